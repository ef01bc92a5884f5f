"""Rearrangement-based Lorentz-space calculus on sampled fields.

A :class:`Field` is a step function, so its decreasing rearrangement is a step
function too and every Lorentz integral splits into power-law pieces that are
integrated in closed form. Two conventions are supported:

* ``double_star``: ``‖f‖_{p,q} = (∫ [x^{1/p} f**(x)]^q dx/x)^{1/q}``
* ``single_star``: same with ``f*`` in place of ``f**``.

The inequality checkers return :class:`RatioReport` objects (``lhs``, ``rhs``,
``ratio``); callers assert ``ratio <= 1``.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np
from scipy.special import binom, hyp2f1

from drift_lab.errors import ConfigError
from drift_lab.numerics.grid import Field

logger = logging.getLogger(__name__)

INF = math.inf

# Gauss-Legendre nodes for the degenerate hypergeometric parameters
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)

_MAX_BINOMIAL_Q = 64


class Convention(str, Enum):
    """Lorentz norm convention."""

    DOUBLE_STAR = "double_star"
    SINGLE_STAR = "single_star"


def conjugate(p: float) -> float:
    """Hölder conjugate exponent, with 1 <-> inf."""
    if p == INF:
        return 1.0
    if p == 1:
        return INF
    return p / (p - 1.0)


def _inv(p: float) -> float:
    return 0.0 if p == INF else 1.0 / p


@dataclass(frozen=True)
class LorentzIndex:
    """Exponent pair ``(p, q)`` with ``p in (1, inf]`` and ``q in [1, inf]``.

    ``p == 1`` is admitted only together with ``q == inf`` (weak-L1, which equals
    the L1 norm under the double-star convention). ``p == inf`` requires ``q == inf``.
    """

    p: float
    q: float

    def __post_init__(self) -> None:
        p, q = float(self.p), float(self.q)
        if math.isnan(p) or math.isnan(q):
            raise ConfigError("Lorentz exponents must not be NaN")
        if q < 1:
            raise ConfigError(f"q must be >= 1, got {q}")
        if p < 1 or (p == 1 and q != INF):
            raise ConfigError(f"p must be > 1 (or p = 1 with q = inf), got ({p}, {q})")
        if p == INF and q != INF:
            raise ConfigError(f"p = inf requires q = inf, got q = {q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def conjugate(self) -> float:
        return conjugate(self.p)

    def __str__(self) -> str:
        return f"({self.p:g},{self.q:g})"


IndexLike = Union[LorentzIndex, Tuple[float, float]]


def as_index(idx: IndexLike) -> LorentzIndex:
    if isinstance(idx, LorentzIndex):
        return idx
    p, q = idx
    return LorentzIndex(p, q)


@dataclass(frozen=True)
class Rearrangement:
    """Decreasing rearrangement of ``|f|`` as a step function.

    Piece ``i`` carries value ``values[i]`` on ``(edges[i], edges[i+1]]``.
    ``cumulative[i]`` is ``f**`` at the right end of piece ``i``.
    """

    values: np.ndarray
    edges: np.ndarray
    cumulative: np.ndarray

    @property
    def support_length(self) -> float:
        return float(self.edges[-1])

    @property
    def total(self) -> float:
        """``∫ f*``, which equals ``∫ |f|``."""
        return float(np.sum(self.values * np.diff(self.edges)))

    def star(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """``f*`` at arbitrary positive abscissae."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.searchsorted(self.edges, x, side="left") - 1
        out = np.zeros_like(x)
        inside = (idx >= 0) & (idx < self.values.size)
        out[inside] = self.values[idx[inside]]
        return out

    def double_star(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """``f**(x) = (1/x) ∫_0^x f*`` at arbitrary positive abscissae."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x <= 0):
            raise ValueError("f** is defined for x > 0")
        widths = np.diff(self.edges)
        partial = np.concatenate(([0.0], np.cumsum(self.values * widths)))
        idx = np.clip(np.searchsorted(self.edges, x, side="left") - 1, 0, self.values.size - 1)
        left = self.edges[idx]
        covered = np.minimum(x, self.edges[idx + 1]) - left
        acc = partial[idx] + self.values[idx] * covered
        beyond = x > self.edges[-1]
        acc[beyond] = partial[-1]
        return acc / x


@dataclass(frozen=True)
class MomentSet:
    """Mass ``m = M_0``, energy ``E = M_2`` and optional extra moments."""

    mass: float
    energy: float
    extra: Dict[float, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RatioReport:
    """Both sides of an inequality and their ratio."""

    name: str
    lhs: float
    rhs: float
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else INF

    def holds(self, rtol: float = 0.0) -> bool:
        return self.lhs <= self.rhs * (1.0 + rtol)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["ratio"] = self.ratio
        return data


def rearrange(f: Field) -> Rearrangement:
    """Sort ``|f|`` by decreasing magnitude, each value carrying its cell width.

    Ties are broken stably by cell index; no norm depends on the order of equal values.

    Raises:
        ValueError: if ``f`` contains a non-finite value.
    """
    if not f.is_finite():
        raise ValueError("cannot rearrange a field with non-finite values")
    magnitude = np.abs(f.values)
    order = np.argsort(-magnitude, kind="stable")
    values = magnitude[order]
    widths = f.grid.widths[order]
    edges = np.concatenate(([0.0], np.cumsum(widths)))
    cumulative = np.cumsum(values * widths) / edges[1:]
    return Rearrangement(values=values, edges=edges, cumulative=cumulative)


def _power_piece(coeff: float, exponent: float, a: float, b: float) -> float:
    """``coeff * ∫_a^b x^(exponent - 1) dx``."""
    if exponent == 0:
        return coeff * math.log(b / a)
    if a == 0:
        return coeff * b**exponent / exponent
    return coeff * (b**exponent - a**exponent) / exponent


def _gauss_log_piece(v: float, A: float, p: float, q: float, a: float, b: float) -> float:
    # ∫_a^b x^{q/p} (v + A/x)^q dx/x in the variable s = log x
    la, lb = math.log(a), math.log(b)
    s = 0.5 * (lb - la) * _GL_NODES + 0.5 * (lb + la)
    x = np.exp(s)
    vals = x ** (q / p) * (v + A / x) ** q
    return float(0.5 * (lb - la) * np.sum(_GL_WEIGHTS * vals))


def _hyp_antiderivative(s: float, q: float, z: float, x: float) -> Optional[float]:
    """``x^s/s · 2F1(-q, s; s+1; -z x)``, an antiderivative of ``x^(s-1) (1+zx)^q``."""
    if s == 0 or (s + 1 <= 0 and float(s + 1).is_integer()):
        return None
    value = x**s / s * float(hyp2f1(-q, s, s + 1.0, -z * x))
    return value if math.isfinite(value) else None


def _double_star_piece(v: float, A: float, p: float, q: float, a: float, b: float) -> float:
    """``∫_a^b [x^{1/p} (v + A/x)]^q dx/x`` for ``v, A >= 0``, finite ``q``."""
    if b <= a:
        return 0.0
    if A == 0:
        return _power_piece(v**q, q / p, a, b)
    if v == 0:
        return _power_piece(A**q, q / p - q, a, b)
    if float(q).is_integer() and q <= _MAX_BINOMIAL_Q:
        n = int(q)
        total = 0.0
        for j in range(n + 1):
            total += _power_piece(float(binom(n, j)) * v ** (n - j) * A**j, q / p - j, a, b)
        return total
    # non-integer q: split where v x = A so each hypergeometric argument stays in [-1, 0]
    split = A / v
    total = 0.0
    lo, hi = a, min(b, split)
    if hi > lo:
        s = q / p - q
        F_hi = _hyp_antiderivative(s, q, v / A, hi)
        F_lo = _hyp_antiderivative(s, q, v / A, lo)
        if F_hi is None or F_lo is None:
            total += _gauss_log_piece(v, A, p, q, lo, hi)
        else:
            total += A**q * (F_hi - F_lo)
    lo, hi = max(a, split), b
    if hi > lo:
        s = -q / p
        H_lo = _hyp_antiderivative(s, q, A / v, 1.0 / lo)
        H_hi = _hyp_antiderivative(s, q, A / v, 1.0 / hi)
        if H_lo is None or H_hi is None:
            total += _gauss_log_piece(v, A, p, q, lo, hi)
        else:
            total += v**q * (H_lo - H_hi)
    return total


def _piece_offsets(r: Rearrangement) -> np.ndarray:
    # f** on piece i equals v_i + A_i / x with A_i = S_{i-1} - v_i X_{i-1} >= 0
    widths = np.diff(r.edges)
    partial = np.concatenate(([0.0], np.cumsum(r.values * widths)))[:-1]
    return np.maximum(partial - r.values * r.edges[:-1], 0.0)


def _single_star_norm(r: Rearrangement, p: float, q: float) -> float:
    v, X = r.values, r.edges
    if q == INF:
        if p == INF:
            return float(v[0]) if v.size else 0.0
        return float(np.max(v * X[1:] ** (1.0 / p))) if v.size else 0.0
    acc = np.sum(v**q * (p / q) * (X[1:] ** (q / p) - X[:-1] ** (q / p)))
    return float(acc ** (1.0 / q))


def _double_star_norm(r: Rearrangement, p: float, q: float) -> float:
    v, X = r.values, r.edges
    if v.size == 0 or r.total == 0:
        return 0.0
    total = r.total
    A = _piece_offsets(r)
    if q == INF:
        if p == INF:
            return float(v[0])
        best = 0.0
        inv_p = 1.0 / p
        for vi, Ai, a, b in zip(v, A, X[:-1], X[1:]):
            candidates = [b]
            if a > 0:
                candidates.append(a)
            if vi > 0 and p > 1:
                crit = (p - 1.0) * Ai / vi
                if a < crit < b:
                    candidates.append(crit)
            for x in candidates:
                best = max(best, x**inv_p * (vi + Ai / x))
        # beyond the support f** = total / x, decreasing in x^{1/p - 1}
        best = max(best, X[-1] ** inv_p * total / X[-1])
        return float(best)
    acc = 0.0
    for vi, Ai, a, b in zip(v, A, X[:-1], X[1:]):
        acc += _double_star_piece(float(vi), float(Ai), p, q, float(a), float(b))
    # tail: ∫_{X}^∞ [x^{1/p} total/x]^q dx/x
    acc += total**q * X[-1] ** (q / p - q) / (q - q / p)
    return float(acc ** (1.0 / q))


def lorentz_norm(
    f: Union[Field, Rearrangement],
    idx: IndexLike,
    convention: Union[Convention, str] = Convention.DOUBLE_STAR,
) -> float:
    """Lorentz quasi-norm of a sampled field.

    Args:
        f: Field (or a precomputed rearrangement).
        idx: ``LorentzIndex`` or ``(p, q)`` pair.
        convention: ``double_star`` (uses ``f**``) or ``single_star`` (uses ``f*``).

    Returns:
        The norm value, computed exactly on the step structure.

    Raises:
        ConfigError: invalid index.
    """
    index = as_index(idx)
    convention = Convention(convention)
    r = f if isinstance(f, Rearrangement) else rearrange(f)
    p, q = index.p, index.q
    if convention is Convention.SINGLE_STAR:
        return _single_star_norm(r, p, q)
    if p == 1:
        # ‖f‖_{1,∞} = sup x f**(x) = ‖f‖_1
        return r.total
    return _double_star_norm(r, p, q)


def lp_norm(f: Field, p: float) -> float:
    """Plain ``L^p`` norm, ``p`` in ``[1, inf]``."""
    if p == INF:
        return f.sup()
    if p < 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.dx) ** (1.0 / p))


def moment(f: Field, alpha: float) -> float:
    """Midpoint value of ``M_α(f) = ∫ |x|^α |f| dx``."""
    if alpha < 0:
        raise ConfigError(f"moment order must be >= 0, got {alpha}")
    if not f.is_finite():
        raise ValueError("moment of a non-finite field")
    weights = np.abs(f.grid.centers) ** alpha if alpha else 1.0
    return float(np.sum(weights * np.abs(f.values)) * f.grid.dx)


def moments(f: Field, alphas: Iterable[float] = ()) -> MomentSet:
    return MomentSet(mass=moment(f, 0.0), energy=moment(f, 2.0), extra={a: moment(f, a) for a in alphas})


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


def _check_same_grid(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise ConfigError("fields must share a grid")


def check_holder(f: Field, g: Field, idx_f: IndexLike, idx_g: IndexLike, idx_prod: IndexLike) -> RatioReport:
    """``‖fg‖_{p,q} <= p' ‖f‖_{p1,q1} ‖g‖_{p2,q2}`` with ``1/p = 1/p1 + 1/p2``, ``1/q <= 1/q1 + 1/q2``."""
    i1, i2, i = as_index(idx_f), as_index(idx_g), as_index(idx_prod)
    if not _close(_inv(i.p), _inv(i1.p) + _inv(i2.p)):
        raise ConfigError(f"Hölder needs 1/p = 1/p1 + 1/p2, got {i}, {i1}, {i2}")
    if _inv(i.q) > _inv(i1.q) + _inv(i2.q) + 1e-12:
        raise ConfigError(f"Hölder needs 1/q <= 1/q1 + 1/q2, got {i}, {i1}, {i2}")
    _check_same_grid(f, g)
    lhs = lorentz_norm(Field(f.grid, f.values * g.values), i)
    rhs = i.conjugate * lorentz_norm(f, i1) * lorentz_norm(g, i2)
    return RatioReport("holder", lhs, rhs, {"idx": str(i), "idx_f": str(i1), "idx_g": str(i2)})


def check_holder_l1(f: Field, g: Field, idx_f: IndexLike, idx_g: IndexLike) -> RatioReport:
    """``‖fg‖_1 <= ‖f‖_{p1,q1} ‖g‖_{p2,q2}`` for conjugate pairs, single-star norms."""
    i1 = as_index(idx_f)
    p2, q2 = (idx_g.p, idx_g.q) if isinstance(idx_g, LorentzIndex) else idx_g
    if not _close(_inv(i1.p) + _inv(p2), 1.0):
        raise ConfigError(f"need 1/p1 + 1/p2 = 1, got p1={i1.p}, p2={p2}")
    if _inv(i1.q) + _inv(q2) < 1.0 - 1e-12:
        raise ConfigError(f"need 1/q1 + 1/q2 >= 1, got q1={i1.q}, q2={q2}")
    _check_same_grid(f, g)
    lhs = float(np.sum(np.abs(f.values * g.values)) * f.grid.dx)
    rhs = _single_star_norm(rearrange(f), i1.p, i1.q) * _single_star_norm(rearrange(g), p2, q2)
    return RatioReport("holder_l1", lhs, rhs, {"p1": i1.p, "q1": i1.q, "p2": p2, "q2": q2})


def check_young(f: Field, g: Field, idx_f: IndexLike, idx_g: IndexLike, idx_conv: IndexLike) -> RatioReport:
    """``‖f⋆g‖_{p,q} <= 3p ‖f‖_{p1,q1} ‖g‖_{p2,q2}`` with ``1/p + 1 = 1/p1 + 1/p2``.

    The endpoint ``1/p1 + 1/p2 = 1`` gives ``p = inf``; it is checked as
    ``‖f⋆g‖_∞ <= ‖f‖_{p1,q1} ‖g‖_{p2,q2}`` and requires ``1/q1 + 1/q2 >= 1``.
    """
    from drift_lab.numerics.heat import convolve

    i1, i2, i = as_index(idx_f), as_index(idx_g), as_index(idx_conv)
    if not _close(_inv(i.p) + 1.0, _inv(i1.p) + _inv(i2.p)):
        raise ConfigError(f"Young needs 1/p + 1 = 1/p1 + 1/p2, got {i}, {i1}, {i2}")
    if i.p == INF:
        if _inv(i1.q) + _inv(i2.q) < 1.0 - 1e-12:
            raise ConfigError(f"sup endpoint needs 1/q1 + 1/q2 >= 1, got {i1}, {i2}")
        constant = 1.0
    else:
        if _inv(i.q) > _inv(i1.q) + _inv(i2.q) + 1e-12:
            raise ConfigError(f"Young needs 1/q <= 1/q1 + 1/q2, got {i}, {i1}, {i2}")
        constant = 3.0 * i.p
    _check_same_grid(f, g)
    lhs = lorentz_norm(convolve(f, g), i)
    rhs = constant * lorentz_norm(f, i1) * lorentz_norm(g, i2)
    return RatioReport("young", lhs, rhs, {"constant": constant})


def interpolation_constant(
    p1: float, q1: float, p2: float, q2: float, p: float, q: float
) -> Tuple[float, float, float]:
    """Explicit constant and weights of the Lorentz interpolation bound.

    Returns ``(K, theta1, theta2)`` such that
    ``‖f‖_{p,q} <= K (c1 ‖f‖_{p1,q1})^theta1 (c2 ‖f‖_{p2,q2})^theta2``
    with ``c_i = (q_i/p_i)^{1/q_i}``.
    """
    inv1, inv2, inv = _inv(p1), _inv(p2), _inv(p)
    theta1 = (inv - inv2) / (inv1 - inv2)
    theta2 = (inv1 - inv) / (inv1 - inv2)
    if q == INF:
        K = 1.0
    else:
        K = (1.0 / (q * inv - q * inv2) + 1.0 / (q * inv1 - q * inv)) ** (1.0 / q)
    return K, theta1, theta2


def _sup_bound_factor(p: float, q: float) -> float:
    # f**(x) <= (q/p)^{1/q} x^{-1/p} ‖f‖_{p,q}
    if q == INF or p == INF:
        return 1.0
    return (q / p) ** (1.0 / q)


def check_interpolation(f: Field, p1: float, q1: float, p2: float, q2: float, p: float, q: float) -> RatioReport:
    """``‖f‖_{p,q}`` against the interpolation bound between ``(p1,q1)`` and ``(p2,q2)``."""
    i1, i2, i = LorentzIndex(p1, q1), LorentzIndex(p2, q2), LorentzIndex(p, q)
    if not (i1.p < i.p < i2.p):
        raise ConfigError(f"interpolation needs p1 < p < p2, got {p1}, {p}, {p2}")
    K, t1, t2 = interpolation_constant(i1.p, i1.q, i2.p, i2.q, i.p, i.q)
    r = rearrange(f)
    n1 = _sup_bound_factor(i1.p, i1.q) * lorentz_norm(r, i1)
    n2 = _sup_bound_factor(i2.p, i2.q) * lorentz_norm(r, i2)
    lhs = lorentz_norm(r, i)
    rhs = K * n1**t1 * n2**t2
    return RatioReport("interpolation", lhs, rhs, {"K": K, "theta1": t1, "theta2": t2})


def check_inclusion(f: Field, p: float, q: float, r: float) -> RatioReport:
    """``‖f‖_{p,r} <= (q/p)^{1/q - 1/r} ‖f‖_{p,q}`` for ``q < r``."""
    if not q < r:
        raise ConfigError(f"inclusion needs q < r, got q={q}, r={r}")
    rr = rearrange(f)
    lhs = lorentz_norm(rr, (p, r))
    rhs = (q / p) ** (_inv(q) - _inv(r)) * lorentz_norm(rr, (p, q))
    return RatioReport("inclusion", lhs, rhs, {"p": p, "q": q, "r": r})


def check_equivalence(f: Field, p: float) -> Tuple[RatioReport, RatioReport]:
    """Sandwich ``‖f‖_p <= ‖f‖_{p,p} <= p' ‖f‖_p`` as two reports."""
    r = rearrange(f)
    plain = _single_star_norm(r, p, p)
    double = lorentz_norm(r, (p, p))
    return (
        RatioReport("equivalence_lower", plain, double, {"p": p}),
        RatioReport("equivalence_upper", double, conjugate(p) * plain, {"p": p}),
    )


def gagliardo_theta(p: float, q: float) -> float:
    return (1.0 / q - _inv(p)) / (1.0 / q + 0.5)


def check_gagliardo(f: Field, p: float, q: float) -> RatioReport:
    """Ratio ``‖f‖_p / (‖f_x‖_2^θ ‖f‖_q^{1-θ})``; the constant is measured, not asserted here."""
    if not 1 < q < p:
        raise ConfigError(f"Gagliardo-Nirenberg needs 1 < q < p, got q={q}, p={p}")
    theta = gagliardo_theta(p, q)
    lhs = lp_norm(f, p)
    rhs = lp_norm(f.gradient(), 2.0) ** theta * lp_norm(f, q) ** (1.0 - theta)
    return RatioReport("gagliardo", lhs, rhs, {"theta": theta})
