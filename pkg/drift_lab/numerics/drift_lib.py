"""Drift families: stationary pairs, critical drifts and the blow-up constructions.

Every family is described by an immutable :class:`DriftSpec`. Builders check the
parameter windows and raise :class:`AdmissibilityError` naming the failed
inequality; a spec returned by a builder is ready for the solver.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from drift_lab.errors import AdmissibilityError, ConfigError
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.lorentz import RatioReport, conjugate, lorentz_norm

logger = logging.getLogger(__name__)

INF = math.inf


class DriftFamily(str, Enum):
    """Supported drift families."""

    STATIONARY_CON1 = "stationary_con1"
    STATIONARY_CON2 = "stationary_con2"
    BLOWUP_CON1 = "blowup_con1"
    BLOWUP_CON2 = "blowup_con2"
    CONSTANT = "constant"
    TANH = "tanh"
    CUSTOM_TABLE = "custom_table"


class Case(str, Enum):
    """Integrability hypothesis on the drift: ``b`` (con1) or ``b_x`` (con2) in ``L^{p,∞}``."""

    CON1 = "con1"
    CON2 = "con2"


def critic(p: float, case: Union[Case, str]) -> float:
    """Critical exponent: ``1 − 1/p`` for con1, ``2 − 1/p`` for con2."""
    case = Case(case)
    if not p >= 1:
        raise ConfigError(f"p must be >= 1, got {p}")
    inv = 0.0 if p == INF else 1.0 / p
    return (1.0 if case is Case.CON1 else 2.0) - inv


def _smoothstep(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)


def _core(r: np.ndarray, power: float, x0: float) -> Tuple[np.ndarray, np.ndarray]:
    """Odd cubic ``a1 r + a3 r³`` matching ``r^power`` and its slope at ``x0``."""
    a3 = (power - 1.0) * x0 ** (power - 3.0) / 2.0
    a1 = x0 ** (power - 1.0) * (3.0 - power) / 2.0
    return a1 * r + a3 * r**3, a1 + 3.0 * a3 * r**2


def _hermite(r: np.ndarray, x_lo: float, x_hi: float, y0: float, y1: float, d0: float, d1: float):
    h = x_hi - x_lo
    s = (r - x_lo) / h
    h00, h10, h01, h11 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s, -2 * s**3 + 3 * s**2, s**3 - s**2
    value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    dh00, dh10, dh01, dh11 = 6 * s**2 - 6 * s, 3 * s**2 - 4 * s + 1, -6 * s**2 + 6 * s, 3 * s**2 - 2 * s
    slope = (dh00 * y0 + dh10 * h * d0 + dh01 * y1 + dh11 * h * d1) / h
    return value, slope


def _blowup_con1_magnitude(r: np.ndarray, alpha: float, beta: float, x_bar: float, eps: float):
    x0 = 2.0 * eps
    g = np.empty_like(r)
    dg = np.empty_like(r)
    core = r < x0
    g[core], dg[core] = _core(r[core], -alpha, x0)
    inner = (~core) & (r <= x_bar)
    g[inner] = r[inner] ** -alpha
    dg[inner] = -alpha * r[inner] ** (-alpha - 1.0)
    blend = (r > x_bar) & (r < 2.0 * x_bar)
    rb = r[blend]
    chi, dchi = _smoothstep((rb - x_bar) / x_bar)
    ga, gb = rb**-alpha, rb**-beta
    g[blend] = (1.0 - chi) * ga + chi * gb
    dg[blend] = (1.0 - chi) * (-alpha * ga / rb) + chi * (-beta * gb / rb) + dchi / x_bar * (gb - ga)
    tail = r >= 2.0 * x_bar
    g[tail] = r[tail] ** -beta
    dg[tail] = -beta * r[tail] ** (-beta - 1.0)
    return g, dg


def _blowup_con2_magnitude(r: np.ndarray, alpha: float, x_bar: float, eps: float):
    x0 = 2.0 * eps
    g = np.empty_like(r)
    dg = np.empty_like(r)
    core = r < x0
    g[core], dg[core] = _core(r[core], alpha, x0)
    lo, hi = x_bar - eps, x_bar + eps
    rising = (~core) & (r <= lo)
    g[rising] = r[rising] ** alpha
    dg[rising] = alpha * r[rising] ** (alpha - 1.0)
    kink = (r > lo) & (r < hi)
    g[kink], dg[kink] = _hermite(r[kink], lo, hi, lo**alpha, x_bar**alpha, alpha * lo ** (alpha - 1.0), 0.0)
    flat = r >= hi
    g[flat] = x_bar**alpha
    dg[flat] = 0.0
    return g, dg


@dataclass(frozen=True)
class DriftSpec:
    """Parametric drift ``b(t, x)`` with its derivative ``b_x``.

    ``params`` holds family parameters (``p``, ``k``, ``alpha``, ``beta``,
    ``x_bar``, ``epsilon``, ``amplitude``, ``width``). ``table`` holds the
    ``(x, b)`` samples of a custom table.
    """

    family: DriftFamily
    params: Mapping[str, float] = field(default_factory=dict)
    table: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", DriftFamily(self.family))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def is_zero(self) -> bool:
        return self.family is DriftFamily.CONSTANT and self.params.get("amplitude", 0.0) == 0.0

    @property
    def case(self) -> Optional[Case]:
        if self.family in (DriftFamily.STATIONARY_CON1, DriftFamily.BLOWUP_CON1):
            return Case.CON1
        if self.family in (DriftFamily.STATIONARY_CON2, DriftFamily.BLOWUP_CON2):
            return Case.CON2
        return None

    def evaluate(self, t: float, x: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """``(b(t,x), b_x(t,x))``; the shipped families are autonomous."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P = self.params
        fam = self.family
        if fam in (DriftFamily.STATIONARY_CON1, DriftFamily.STATIONARY_CON2):
            inv_p = 0.0 if P["p"] == INF else 1.0 / P["p"]
            if fam is DriftFamily.STATIONARY_CON1:
                c, a = (1.0 - inv_p) / P["k"], (1.0 + inv_p) / 2.0
            else:
                c, a = (2.0 - inv_p) / P["k"], inv_p / 2.0
            w = 1.0 + x * x
            b = -c * x * w**-a
            bx = -c * (w**-a - 2.0 * a * x * x * w ** (-a - 1.0))
            return b, bx
        if fam is DriftFamily.BLOWUP_CON1:
            g, dg = _blowup_con1_magnitude(np.abs(x), P["alpha"], P["beta"], P["x_bar"], P["epsilon"])
            return -np.sign(x) * g, -dg
        if fam is DriftFamily.BLOWUP_CON2:
            g, dg = _blowup_con2_magnitude(np.abs(x), P["alpha"], P["x_bar"], P["epsilon"])
            return -np.sign(x) * g, -dg
        if fam is DriftFamily.CONSTANT:
            return np.full_like(x, P.get("amplitude", 0.0)), np.zeros_like(x)
        if fam is DriftFamily.TANH:
            A, width = P["amplitude"], P.get("width", 1.0)
            th = np.tanh(x / width)
            return A * th, A / width * (1.0 - th * th)
        if fam is DriftFamily.CUSTOM_TABLE:
            assert self.table is not None
            tx, tb = np.asarray(self.table[0]), np.asarray(self.table[1])
            b = np.interp(x, tx, tb)
            slopes = np.diff(tb) / np.diff(tx)
            idx = np.searchsorted(tx, x, side="right") - 1
            inside = (idx >= 0) & (idx < slopes.size)
            bx = np.zeros_like(x)
            bx[inside] = slopes[idx[inside]]
            return b, bx
        raise ConfigError(f"unknown drift family {fam}")

    def value(self, t: float, x: Union[float, np.ndarray]) -> np.ndarray:
        return self.evaluate(t, x)[0]

    def derivative(self, t: float, x: Union[float, np.ndarray]) -> np.ndarray:
        return self.evaluate(t, x)[1]

    def sample(self, grid: Grid, t: float = 0.0) -> Field:
        return Field(grid, self.value(t, grid.centers))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"family": self.family.value}
        data.update({key: float(val) for key, val in self.params.items()})
        if self.table is not None:
            data["table_x"] = list(self.table[0])
            data["table_b"] = list(self.table[1])
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DriftSpec":
        params = {key: float(val) for key, val in data.items() if key not in ("family", "table_x", "table_b", "path")}
        table = None
        if "table_x" in data:
            table = (tuple(float(v) for v in data["table_x"]), tuple(float(v) for v in data["table_b"]))
        return cls(DriftFamily(data["family"]), params, table)


@dataclass(frozen=True)
class StationaryProfile:
    """``u_s(x) = (1 + x²)^(-exponent)``."""

    exponent: float

    def values(self, x: np.ndarray) -> np.ndarray:
        return (1.0 + np.asarray(x, dtype=float) ** 2) ** -self.exponent

    def __call__(self, grid: Grid) -> Field:
        return Field(grid, self.values(grid.centers))


def _check_pk(p: float, k: float) -> None:
    if not p > 1:
        raise AdmissibilityError(f"p must be > 1, got {p}")
    if not k > 0:
        raise AdmissibilityError(f"k must be > 0, got {k}")


def stationary_pair_con1(p: float, k: float) -> Tuple[StationaryProfile, DriftSpec]:
    """Zero-flux stationary pair with ``b ∈ L^{p,∞}``; requires ``k < 1 − 1/p``."""
    _check_pk(p, k)
    crit = critic(p, Case.CON1)
    if not k < crit:
        raise AdmissibilityError(
            f"stationary pair needs the subcritical range k < 1 - 1/p = {crit:g}, got k = {k:g}"
        )
    return StationaryProfile(crit / (2.0 * k)), DriftSpec(DriftFamily.STATIONARY_CON1, {"p": p, "k": k})


def stationary_pair_con2(p: float, k: float) -> Tuple[StationaryProfile, DriftSpec]:
    """Zero-flux stationary pair with ``b_x ∈ L^{p,∞}``; requires ``k < 2 − 1/p``."""
    _check_pk(p, k)
    crit = critic(p, Case.CON2)
    if not k < crit:
        raise AdmissibilityError(
            f"stationary pair needs the subcritical range k < 2 - 1/p = {crit:g}, got k = {k:g}"
        )
    return StationaryProfile(crit / (2.0 * k)), DriftSpec(DriftFamily.STATIONARY_CON2, {"p": p, "k": k})


def stationary_residual(profile: StationaryProfile, spec: DriftSpec, k: float, grid: Grid) -> float:
    """Max-norm residual of ``(b u^{k+1})_x − u_xx`` in conservative face form."""
    faces = grid.faces[1:-1]
    u = profile.values(grid.centers)
    u_face = 0.5 * (u[1:] + u[:-1])
    flux = spec.value(0.0, faces) * u_face ** (k + 1.0) - np.diff(u) / grid.dx
    return float(np.max(np.abs(np.diff(flux) / grid.dx)))


def con1_window(alpha: float, beta: float, k: float) -> Tuple[float, float]:
    """Admissible ``x_bar`` range ``[1, ((β+k−1)/(α+k−1))^{k/(β−α)}]``."""
    return 1.0, ((beta + k - 1.0) / (alpha + k - 1.0)) ** (k / (beta - alpha))


def con2_threshold(alpha: float, k: float) -> float:
    """Smallest admissible ``x_bar``: ``((k−1)/(k−(α+1)))^{k/α}``."""
    return ((k - 1.0) / (k - (alpha + 1.0))) ** (k / alpha)


def blowup_drift_con1(
    alpha: float, beta: float, x_bar: float, epsilon: float, k: float, p: float, strict: bool = True
) -> DriftSpec:
    """Odd drift ``−sign(x)|x|^{−α}`` inside ``x_bar`` with a ``|x|^{−β}`` tail.

    A C¹ cubic replaces the singular core on ``|x| < 2ε``; the two power laws
    are blended over ``[x_bar, 2 x_bar]`` by a smoothstep.

    Raises:
        AdmissibilityError: a window inequality fails (only when ``strict``).
    """
    if not (epsilon > 0 and 2.0 * epsilon < x_bar):
        raise AdmissibilityError(f"need 0 < 2*epsilon < x_bar, got epsilon={epsilon}, x_bar={x_bar}")
    if strict:
        _check_pk(p, k)
        # a bounded drift (alpha = 0) is the p = inf member of the family
        if not (0 < alpha or (alpha == 0 and p == INF)) or not alpha < beta:
            raise AdmissibilityError(f"need 0 < alpha < beta, got alpha={alpha}, beta={beta}")
        alpha_p = 0.0 if alpha == 0 else alpha * p
        if not alpha_p < 1:
            raise AdmissibilityError(f"need alpha*p < 1, got {alpha_p:g}")
        if not beta * p > 1:
            raise AdmissibilityError(f"need beta*p > 1, got {beta * p:g}")
        if not alpha + k - 1.0 > 0:
            raise AdmissibilityError(f"need alpha + k - 1 > 0, got {alpha + k - 1.0:g}")
        lo, hi = con1_window(alpha, beta, k)
        if not lo <= x_bar <= hi:
            raise AdmissibilityError(f"need 1 <= x_bar <= {hi:.6g}, got x_bar = {x_bar:g}")
    params = {"alpha": alpha, "beta": beta, "x_bar": x_bar, "epsilon": epsilon, "k": k, "p": p}
    return DriftSpec(DriftFamily.BLOWUP_CON1, params)


def blowup_drift_con2(
    alpha: float, x_bar: float, epsilon: float, k: float, p: float, strict: bool = True
) -> DriftSpec:
    """Odd bounded drift ``−sign(x) min(|x|^α, x_bar^α)``, mollified at the origin and the kink.

    Raises:
        AdmissibilityError: a window inequality fails (only when ``strict``).
    """
    if not (epsilon > 0 and 3.0 * epsilon < x_bar):
        raise AdmissibilityError(f"need 0 < 3*epsilon < x_bar, got epsilon={epsilon}, x_bar={x_bar}")
    if not 0 < alpha <= 1:
        raise AdmissibilityError(f"need alpha in (0, 1], got {alpha}")
    if strict:
        _check_pk(p, k)
        if not k > 1.0 + alpha:
            raise AdmissibilityError(f"need k > 1 + alpha = {1.0 + alpha:g}, got k = {k:g}")
        if alpha < 1 and not (1.0 - alpha) * p < 1:
            raise AdmissibilityError(f"need (1 - alpha)*p < 1, got {(1.0 - alpha) * p:g}")
        threshold = con2_threshold(alpha, k)
        if not x_bar >= threshold:
            raise AdmissibilityError(f"need x_bar >= ((k-1)/(k-(alpha+1)))^(k/alpha) = {threshold:.6g}, got {x_bar:g}")
    params = {"alpha": alpha, "x_bar": x_bar, "epsilon": epsilon, "k": k, "p": p}
    return DriftSpec(DriftFamily.BLOWUP_CON2, params)


def constant_drift(amplitude: float) -> DriftSpec:
    return DriftSpec(DriftFamily.CONSTANT, {"amplitude": amplitude})


def tanh_drift(amplitude: float, width: float = 1.0) -> DriftSpec:
    if not width > 0:
        raise AdmissibilityError(f"tanh width must be positive, got {width}")
    return DriftSpec(DriftFamily.TANH, {"amplitude": amplitude, "width": width})


def load_table(path: Union[str, Path]) -> DriftSpec:
    """Custom drift from a two-column ``x b`` text file (``#`` comments allowed).

    Raises:
        ConfigError: unreadable file, fewer than two rows, or non-increasing ``x``.
    """
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read drift table {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise ConfigError(f"drift table {path} must have two columns and at least two rows")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigError(f"drift table {path} needs strictly increasing x")
    return DriftSpec(DriftFamily.CUSTOM_TABLE, {}, (tuple(data[:, 0]), tuple(data[:, 1])))


@dataclass(frozen=True)
class EnvelopeReport:
    """Outcome of the envelope validation of a blow-up drift."""

    ok: bool
    violations: int
    band: float
    checked: int
    details: List[str] = field(default_factory=list)


def validate_envelope(spec: DriftSpec, grid: Grid, rtol: float = 1e-12) -> EnvelopeReport:
    """Check the two-sided envelope of a blow-up drift at the grid points.

    Points inside the mollified bands (``|x| <= 2ε``, and for con2 the kink
    ``| |x| − x_bar | < ε``) are skipped; ``band`` reports the largest ``|x|``
    at which the envelope is violated anywhere (0 when it never is).
    """
    x = grid.centers
    b = spec.value(0.0, x)
    r = np.abs(x)
    P = spec.params
    details: List[str] = []
    if not np.allclose(b, -spec.value(0.0, -x), rtol=0, atol=1e-14):
        details.append("drift is not odd")
    with np.errstate(divide="ignore"):
        if spec.family is DriftFamily.BLOWUP_CON1:
            inner = r ** -P["alpha"]
            upper = np.where(r <= P["x_bar"], inner, r ** -P["beta"])
            lower = inner
            skip = r <= 2.0 * P["epsilon"]
        elif spec.family is DriftFamily.BLOWUP_CON2:
            lower = upper = np.minimum(r ** P["alpha"], P["x_bar"] ** P["alpha"])
            skip = (r <= 2.0 * P["epsilon"]) | (np.abs(r - P["x_bar"]) < P["epsilon"])
            if np.max(np.abs(b)) > P["x_bar"] ** P["alpha"] * (1.0 + rtol):
                details.append("drift exceeds x_bar^alpha")
        else:
            raise ConfigError(f"no envelope for family {spec.family.value}")
    # envelope on |b|: upper <= |b| <= lower, with b of sign -sign(x)
    mag = -np.sign(x) * b
    bad = (mag > lower * (1.0 + rtol) + 1e-300) | (mag < upper * (1.0 - rtol))
    bad &= r > 0
    checked = int(np.sum(~skip))
    violations = int(np.sum(bad & ~skip))
    band = float(np.max(r[bad])) if np.any(bad) else 0.0
    if violations:
        details.append(f"{violations} envelope violations outside the mollified bands")
    ok = violations == 0 and not details
    return EnvelopeReport(ok=ok, violations=violations, band=band, checked=checked, details=details)


def drift_norm(spec: DriftSpec, grid: Grid, p: float, derivative: bool = False) -> float:
    """``‖b‖_{p,∞}`` (or ``‖b_x‖_{p,∞}``) of the sampled drift; ``p = inf`` gives the sup norm."""
    values = spec.derivative(0.0, grid.centers) if derivative else spec.value(0.0, grid.centers)
    f = Field(grid, values)
    if p == INF:
        return f.sup()
    return lorentz_norm(f, (p, INF))


def holder_continuity_check(
    spec: DriftSpec, p: float, grid: Grid, n_pairs: int = 4000, seed: int = 0
) -> RatioReport:
    """Worst pair for ``|b(x) − b(x')| <= p' ‖b_x‖_{p,∞} |x − x'|^{1/p'}``.

    Pairs are drawn from the cell centers with a seeded generator.
    """
    if not p > 1:
        raise ConfigError(f"p must be > 1, got {p}")
    norm = drift_norm(spec, grid, p, derivative=True)
    pc = conjugate(p)
    rng = np.random.default_rng(seed)
    x = grid.centers
    i = rng.integers(0, x.size, n_pairs)
    j = rng.integers(0, x.size, n_pairs)
    keep = i != j
    xi, xj = x[i[keep]], x[j[keep]]
    lhs = np.abs(spec.value(0.0, xi) - spec.value(0.0, xj))
    rhs = pc * norm * np.abs(xi - xj) ** (1.0 / pc)
    if not np.any(lhs > 0):
        return RatioReport("holder_continuity", 0.0, float(rhs.max()) if rhs.size else 0.0, {"norm": norm})
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0, lhs / rhs, np.inf)
    worst = int(np.argmax(ratios))
    return RatioReport("holder_continuity", float(lhs[worst]), float(rhs[worst]), {"norm": norm, "p_conj": pc})


def drift_from_config(section: Mapping[str, Any], grid: Grid, k: float, p: float) -> DriftSpec:
    """Build a drift from a ``[drift]`` config section.

    ``epsilon`` defaults to the grid spacing. Stationary families take ``p``
    and ``k`` from the cell unless the section sets them.
    """
    try:
        family = DriftFamily(section.get("family", "constant"))
    except ValueError as exc:
        raise ConfigError(f"unknown drift family {section.get('family')!r}") from exc
    eps = float(section.get("epsilon", grid.dx))
    # stationary shapes may be pinned to their own (p, k), e.g. to drive a critical cell
    shape_p = _section_exponent(section.get("p", p))
    shape_k = float(section.get("k", k))
    builders: Dict[DriftFamily, Callable[[], DriftSpec]] = {
        DriftFamily.STATIONARY_CON1: lambda: stationary_pair_con1(shape_p, shape_k)[1],
        DriftFamily.STATIONARY_CON2: lambda: stationary_pair_con2(shape_p, shape_k)[1],
        DriftFamily.BLOWUP_CON1: lambda: blowup_drift_con1(
            float(section["alpha"]), float(section["beta"]), float(section["x_bar"]), eps, k, p
        ),
        DriftFamily.BLOWUP_CON2: lambda: blowup_drift_con2(
            float(section["alpha"]), float(section["x_bar"]), eps, k, p
        ),
        DriftFamily.CONSTANT: lambda: constant_drift(float(section.get("amplitude", 0.0))),
        DriftFamily.TANH: lambda: tanh_drift(float(section["amplitude"]), float(section.get("width", 1.0))),
        DriftFamily.CUSTOM_TABLE: lambda: load_table(section["path"]),
    }
    try:
        return builders[family]()
    except KeyError as exc:
        raise ConfigError(f"drift family {family.value} is missing parameter {exc}") from exc


def _section_exponent(value: Any) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return INF
    return float(value)
