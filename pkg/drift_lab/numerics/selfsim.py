"""Self-similar rescaling about a presumed blow-up time and its diagnostics.

With ``s = sqrt(T e^{-τ}) = sqrt(T - t)`` the rescaled unknowns are

    v(τ, y) = s u(t, s y),    b̃(τ, y) = s^{1-k} b(t, s y),

so that ``v_τ + ½(y v)_y + (b̃ v^{k+1})_y = v_yy`` and ``‖v(τ)‖₁ = ‖u(t)‖₁``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from drift_lab.config.settings import settings
from drift_lab.errors import ConfigError, NumericalError, RescalingError
from drift_lab.numerics.drift_lib import DriftSpec
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.lorentz import lorentz_norm

logger = logging.getLogger(__name__)

INF = math.inf


def tau_of(t: float, T: float) -> float:
    """``τ = −log(1 − t/T)``."""
    if not 0 <= t < T:
        raise RescalingError(f"need 0 <= t < T, got t={t}, T={T}")
    return -math.log1p(-t / T)


def t_of(tau: float, T: float) -> float:
    """``t = T(1 − e^{−τ})``."""
    return -T * math.expm1(-tau)


def scale_of(tau: float, T: float) -> float:
    return math.sqrt(T * math.exp(-tau))


def reference_schedule(tau_bar: float) -> Tuple[float, float]:
    """``(T, t̄)`` with ``e^{τ̄} = T``, so that ``t̄ = T − 1``."""
    T = math.exp(tau_bar)
    return T, T - 1.0


def tail_schedule(tau_bar: float, span: float, step: float) -> Tuple[float, Tuple[float, ...]]:
    """``T`` from :func:`reference_schedule` and a uniform τ mesh on ``[τ̄, τ̄ + span]``.

    Raises:
        ConfigError: nonpositive span or step, or fewer than three frames.
    """
    if not (span > 0 and step > 0):
        raise ConfigError(f"tail schedule needs positive span and step, got {span}, {step}")
    count = int(round(span / step)) + 1
    if count < 3:
        raise ConfigError(f"tail schedule of span {span} and step {step} gives fewer than three frames")
    T, _ = reference_schedule(tau_bar)
    return T, tuple(tau_bar + i * step for i in range(count))


def matched_y_grid(x_grid: Grid, t: float, T: float) -> Grid:
    """y-grid whose cell centers map exactly onto the x-grid centers at time ``t``."""
    return x_grid.dilated(1.0 / scale_of(tau_of(t, T), T))


@dataclass(frozen=True)
class RescaledFrame:
    """``v(τ, ·)`` (and optionally ``b̃(τ, ·)``) on a y-grid."""

    T: float
    tau: float
    v: Field
    b_tilde: Optional[Field] = None

    @property
    def t(self) -> float:
        return t_of(self.tau, self.T)

    @property
    def scale(self) -> float:
        return scale_of(self.tau, self.T)


def _interp_dirichlet(u: Field, x: np.ndarray) -> np.ndarray:
    grid = u.grid
    xp = np.concatenate(([-grid.half_width], grid.centers, [grid.half_width]))
    fp = np.concatenate(([0.0], u.values, [0.0]))
    return np.interp(x, xp, fp)


def to_selfsim(
    u: Field,
    t: float,
    T: float,
    y_grid: Grid,
    drift: Optional[DriftSpec] = None,
    k: Optional[float] = None,
) -> RescaledFrame:
    """Rescale ``u(t, ·)`` onto ``y_grid`` by piecewise-linear interpolation.

    ``u`` vanishes at ``±L``. With ``drift`` and ``k`` the frame also carries ``b̃``.

    Raises:
        RescalingError: ``t`` outside ``[0, T)`` or the y-grid maps outside ``[-L, L]``.
    """
    tau = tau_of(t, T)
    s = scale_of(tau, T)
    x = s * y_grid.centers
    reach = s * y_grid.half_width
    if reach > u.grid.half_width * (1.0 + 1e-12):
        raise RescalingError(
            f"y-grid reaches x = {reach:.6g} at tau = {tau:.4g}, beyond the domain half-width {u.grid.half_width:g}"
        )
    v = Field(y_grid, s * _interp_dirichlet(u, x))
    b_tilde = None
    if drift is not None:
        if k is None:
            raise ConfigError("rescaling the drift needs k")
        b_tilde = Field(y_grid, s ** (1.0 - k) * drift.value(t, x))
    return RescaledFrame(T=T, tau=tau, v=v, b_tilde=b_tilde)


def from_selfsim(frame: RescaledFrame, x_grid: Grid) -> Field:
    """Inverse of :func:`to_selfsim`: ``u(t, x) = v(τ, x/s)/s``, zero beyond the y-grid."""
    s = frame.scale
    return Field(x_grid, _interp_dirichlet(frame.v, x_grid.centers / s) / s)


@dataclass(frozen=True)
class DriftNormReport:
    """``‖b̃(τ)‖_{p,∞}`` next to the value predicted by the dilation law."""

    tau: float
    norm: float
    predicted: float
    physical: float

    @property
    def relative_error(self) -> float:
        if self.predicted == 0:
            return abs(self.norm)
        return abs(self.norm - self.predicted) / abs(self.predicted)


def _weak_norm(f: Field, p: float) -> float:
    return f.sup() if p == INF else lorentz_norm(f, (p, INF))


def rescaled_drift_norm(
    b: DriftSpec, tau: float, T: float, p: float, k: float, x_grid: Grid, rtol: float = 1e-6
) -> DriftNormReport:
    """Compute ``‖b̃(τ)‖_{p,∞}`` and check ``= (T e^{−τ})^{(1−k−1/p)/2} ‖b(t)‖_{p,∞}``.

    The y-grid is the x-grid dilated by ``1/s``, so both norms see the same samples.

    Raises:
        NumericalError: the scaling law is off by more than ``rtol``.
    """
    s = scale_of(tau, T)
    t = t_of(tau, T)
    physical = _weak_norm(b.sample(x_grid, t), p)
    y_grid = x_grid.dilated(1.0 / s)
    b_tilde = Field(y_grid, s ** (1.0 - k) * b.value(t, s * y_grid.centers))
    inv_p = 0.0 if p == INF else 1.0 / p
    report = DriftNormReport(
        tau=tau,
        norm=_weak_norm(b_tilde, p),
        predicted=s ** (1.0 - k - inv_p) * physical,
        physical=physical,
    )
    if report.relative_error > rtol:
        raise NumericalError(
            f"rescaled drift norm {report.norm:.8g} misses the dilation law {report.predicted:.8g}",
            {"tau": tau, "T": T, "p": p, "k": k},
        )
    return report


def eta(v: np.ndarray, a: float) -> np.ndarray:
    """Truncated entropy: ``v²/2`` for ``v <= a``, ``a(v − a/2)`` above."""
    v = np.asarray(v, dtype=float)
    return np.where(v <= a, 0.5 * v * v, a * (v - 0.5 * a))


def eta_prime(v: np.ndarray, a: float) -> np.ndarray:
    return np.minimum(np.asarray(v, dtype=float), a)


@dataclass(frozen=True)
class EntropyDiag:
    """Dissipation check of ``∫η_a(v)`` at one τ.

    ``margin = dissipation_rhs − dissipation_lhs``; the inequality holds when
    it is nonnegative. ``noisy`` marks entries whose derivative estimate moves
    by more than 10% of ``|rhs|`` between centered and one-sided differences.
    """

    tau: float
    a: float
    eta_integral: float
    dissipation_lhs: float
    dissipation_rhs: float
    margin: float
    noisy: bool = False

    def to_row(self) -> Tuple[float, ...]:
        return (self.tau, self.a, self.eta_integral, self.dissipation_lhs, self.dissipation_rhs, self.margin)


def _common_mesh(frames: Sequence[RescaledFrame]) -> Tuple[Grid, np.ndarray, float]:
    if len(frames) < 3:
        raise ConfigError("entropy diagnostics need at least three frames")
    grid = frames[0].v.grid
    if any(f.v.grid != grid for f in frames):
        raise ConfigError("frames must share one y-grid")
    taus = np.array([f.tau for f in frames])
    steps = np.diff(taus)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ConfigError("frames must lie on a uniform increasing tau mesh")
    return grid, taus, float(steps[0])


def entropy_series(frames: Sequence[RescaledFrame], a: float) -> List[EntropyDiag]:
    """Finite-difference ``d/dτ ∫η_a(v)`` against ``−½‖v_{a,y}‖₂² − ⅛‖v_a‖₂²``."""
    if not a > 0:
        raise ConfigError(f"truncation level must be positive, got {a}")
    grid, taus, dtau = _common_mesh(frames)
    dy = grid.dx
    integrals = np.array([float(np.sum(eta(f.v.values, a)) * dy) for f in frames])
    rhs = np.empty(len(frames))
    for i, f in enumerate(frames):
        va = np.minimum(f.v.values, a)
        va_y = np.gradient(va, dy, edge_order=1)
        rhs[i] = -0.5 * np.sum(va_y**2) * dy - 0.125 * np.sum(va**2) * dy
    lhs = np.gradient(integrals, dtau, edge_order=2)
    forward = np.empty_like(lhs)
    forward[:-1] = np.diff(integrals) / dtau
    forward[-1] = lhs[-1]
    diags = []
    for i in range(len(frames)):
        noisy = abs(forward[i] - lhs[i]) > 0.1 * abs(rhs[i]) if rhs[i] != 0 else False
        diags.append(
            EntropyDiag(
                tau=float(taus[i]),
                a=a,
                eta_integral=float(integrals[i]),
                dissipation_lhs=float(lhs[i]),
                dissipation_rhs=float(rhs[i]),
                margin=float(rhs[i] - lhs[i]),
                noisy=bool(noisy),
            )
        )
    return diags


def margin_holds(diags: Sequence[EntropyDiag], rel_tol: float = 1e-3) -> bool:
    return all(d.margin >= -rel_tol * abs(d.dissipation_rhs) for d in diags)


def admissible_level(
    frames: Sequence[RescaledFrame], levels: Sequence[float], rel_tol: float = 1e-3
) -> Optional[float]:
    """Largest truncation level whose dissipation inequality holds at every τ."""
    best = None
    for a in sorted(levels):
        if margin_holds(entropy_series(frames, a), rel_tol):
            best = a
    logger.debug("admissible truncation level: %s", best)
    return best


def entropy_budget(frames: Sequence[RescaledFrame], a_bar: float) -> float:
    """Trapezoid τ-integral of ``‖v_ā‖_∞³/2 + ‖v_ā‖₂²/8``.

    The bound it is held against is ``3ā/2`` times the mass.
    """
    if len(frames) < 2:
        return 0.0
    taus = np.array([f.tau for f in frames])
    values = []
    for f in frames:
        va = np.minimum(f.v.values, a_bar)
        sup = float(np.max(np.abs(va))) if va.size else 0.0
        values.append(0.5 * sup**3 + 0.125 * float(np.sum(va**2) * f.v.grid.dx))
    return float(trapezoid(values, taus))


def l2_decay_fit(frames: Sequence[RescaledFrame], tail: float = 0.5) -> float:
    """Slope of ``log ‖v(τ)‖₂²`` against τ over the last ``tail`` fraction of frames."""
    if len(frames) < 3:
        raise ConfigError("l2_decay_fit needs at least three frames")
    start = min(int(len(frames) * (1.0 - tail)), len(frames) - 3)
    chosen = frames[start:]
    taus = np.array([f.tau for f in chosen])
    sq = np.array([float(np.sum(f.v.values**2) * f.v.grid.dx) for f in chosen])
    if np.any(sq <= 0):
        raise ConfigError("l2_decay_fit needs nonzero frames")
    slope, _ = np.polyfit(taus, np.log(sq), 1)
    return float(slope)


def scaled_lq(values: np.ndarray, q: float, dx: float) -> float:
    """``‖u‖_q`` computed against the sup so that large ``q`` does not underflow."""
    sup = float(np.max(np.abs(values))) if values.size else 0.0
    if sup == 0:
        return 0.0
    if q == INF:
        return sup
    return sup * float(np.sum((np.abs(values) / sup) ** q) * dx) ** (1.0 / q)


def guidolin_exponent(p: float, k: float) -> float:
    """Exponent ``(1 − 1/p)/(1 − 1/p − k/2)`` of ``sup ‖u‖₂`` in the sup-norm bound."""
    inv_p = 0.0 if p == INF else 1.0 / p
    denom = 1.0 - inv_p - k / 2.0
    if not denom > 0:
        raise ConfigError(f"need k < 2(1 - 1/p), got k={k}, p={p}")
    return (1.0 - inv_p) / denom


@dataclass(frozen=True)
class LadderExponents:
    """Iterated exponents of the dyadic ladder between levels ``M'`` and ``M``."""

    m_lo: int
    m_hi: int
    gamma: float
    alpha: float
    beta: float


def _ladder_denominator(inv_p: float, k: float, n: int) -> float:
    return 1.0 - inv_p - k / 2.0**n


def ladder_exponents(p: float, k: float, m_lo: int, m_hi: int) -> LadderExponents:
    """``γ(M′,M)``, ``α(M′,M)`` and ``β(M′,M)``.

    ``γ(M′,M) = (1 − 1/p − k/2^M)/(1 − 1/p − k/2^{M′})``,
    ``α = Σ_{n=M′}^{M−1} 2^{−n} γ(n+1,M)`` and
    ``β = Σ_{n=M′}^{M−1} n 2^{−n−1} γ(n+1,M)/(1 − 1/p − k/2^n)``.

    Raises:
        ConfigError: ``m_lo > m_hi`` or a denominator is not positive.
    """
    if m_lo > m_hi or m_lo < 0:
        raise ConfigError(f"need 0 <= m_lo <= m_hi, got {m_lo}, {m_hi}")
    inv_p = 0.0 if p == INF else 1.0 / p
    for n in range(m_lo, m_hi + 1):
        if not _ladder_denominator(inv_p, k, n) > 0:
            raise ConfigError(f"ladder level {n} has a nonpositive denominator for p={p}, k={k}")

    def gamma(lo: int) -> float:
        return _ladder_denominator(inv_p, k, m_hi) / _ladder_denominator(inv_p, k, lo)

    alpha = sum(2.0**-n * gamma(n + 1) for n in range(m_lo, m_hi))
    beta = sum(n * 2.0 ** (-n - 1) / _ladder_denominator(inv_p, k, n) * gamma(n + 1) for n in range(m_lo, m_hi))
    return LadderExponents(m_lo, m_hi, gamma(m_lo), alpha, beta)


@dataclass(frozen=True)
class LadderReport:
    """Dyadic norm chain ``‖u‖_{2^m}``, ``m = 1..M``, with the ladder checks."""

    levels: Tuple[int, ...]
    norms: Tuple[float, ...]
    sup_norm: float
    mass: float
    step_constants: Tuple[float, ...]
    measured_constant: float
    holder_steps_ok: bool
    interpolation_steps_ok: bool
    exponent: Optional[float]
    critical_ratio: Optional[float]
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "levels": list(self.levels),
            "norms": list(self.norms),
            "sup_norm": self.sup_norm,
            "measured_constant": self.measured_constant,
            "holder_steps_ok": self.holder_steps_ok,
            "interpolation_steps_ok": self.interpolation_steps_ok,
            "exponent": self.exponent,
            "critical_ratio": self.critical_ratio,
        }


def norm_ladder(u: Field, M: int, p: float, k: float, rtol: float = 1e-9) -> LadderReport:
    """Dyadic norms and the measured constants of the ladder step.

    Each step ``n = 2^m`` contributes ``C_n = (‖u‖_{2n} / (n^{e₁}‖u‖_n^{e₂}))^n``
    with ``e₁ = (1/2n)/(1 − 1/p − k/n)`` and ``e₂ = 1 + (k/2n)/(1 − 1/p − k/n)``;
    steps with a nonpositive denominator are skipped. The Hölder step
    ``‖u‖_{2q} <= ‖u‖_∞^{1/2}‖u‖_q^{1/2}`` and the interpolation step
    ``‖u‖_q <= ‖u‖_{2q}^{2/3}‖u‖_{q/2}^{1/3}`` are checked on the chain.
    """
    if M < 1:
        raise ConfigError(f"ladder depth must be >= 1, got {M}")
    values = u.values
    dx = u.grid.dx
    sup = u.sup()
    levels = tuple(range(0, M + 1))
    chain = {m: scaled_lq(values, 2.0**m, dx) for m in levels}
    inv_p = 0.0 if p == INF else 1.0 / p
    constants = []
    for m in range(0, M):
        n = 2.0**m
        denom = 1.0 - inv_p - k / n
        if denom <= 0 or chain[m] == 0:
            continue
        e1 = (0.5 / n) / denom
        e2 = 1.0 + (0.5 * k / n) / denom
        constants.append((chain[m + 1] / (n**e1 * chain[m] ** e2)) ** n)
    holder_ok = all(chain[m + 1] <= math.sqrt(sup * chain[m]) * (1.0 + rtol) for m in levels[:-1])
    interp_ok = all(
        chain[m] <= chain[m + 1] ** (2.0 / 3.0) * chain[m - 1] ** (1.0 / 3.0) * (1.0 + rtol) for m in range(1, M)
    )
    exponent = None
    critical_ratio = None
    if 1.0 - inv_p - k / 2.0 > 0:
        exponent = guidolin_exponent(p, k)
        critical_ratio = (k / 2.0) / (1.0 - inv_p - k / 2.0)
    return LadderReport(
        levels=levels[1:],
        norms=tuple(chain[m] for m in levels[1:]),
        sup_norm=sup,
        mass=chain[0],
        step_constants=tuple(constants),
        measured_constant=max(constants) if constants else 0.0,
        holder_steps_ok=holder_ok,
        interpolation_steps_ok=interp_ok,
        exponent=exponent,
        critical_ratio=critical_ratio,
    )


def guidolin_constant(
    t: np.ndarray, sup_norm: np.ndarray, l2_norm: np.ndarray, t_hat: float, p: float, k: float
) -> float:
    """Measured ``C`` in ``‖u(T)‖_∞ <= C max{‖u(T̂)‖_∞, sup_{[T̂,T]} ‖u‖₂^γ}`` along a series."""
    t = np.asarray(t, dtype=float)
    window = t >= t_hat
    if not np.any(window):
        raise ConfigError(f"no samples after t_hat = {t_hat}")
    first = int(np.argmax(window))
    bound = max(float(sup_norm[first]), float(np.max(np.asarray(l2_norm)[window])) ** guidolin_exponent(p, k))
    return float(sup_norm[-1]) / bound if bound > 0 else 0.0


SeriesLike = Union[Any, Tuple[np.ndarray, np.ndarray]]


def decay_fit_physical(
    report: SeriesLike, t_lo: Optional[float] = None, t_hi: Optional[float] = None
) -> float:
    """Slope of ``log ‖u(t)‖_∞`` against ``log t`` on ``[t_lo, t_hi]``.

    ``report`` is a ``RunReport``, a ``Series`` or a ``(t, sup_norm)`` pair.
    The window defaults to ``settings.decay_window``.

    Raises:
        ConfigError: fewer than three usable samples in the window.
    """
    if isinstance(report, tuple):
        t, sup = (np.asarray(a, dtype=float) for a in report)
    else:
        series = getattr(report, "series", report)
        t, sup = np.asarray(series.t), np.asarray(series.sup_norm)
    lo = settings.decay_window[0] if t_lo is None else t_lo
    hi = settings.decay_window[1] if t_hi is None else t_hi
    mask = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12)) & (sup > 0) & (t > 0)
    if int(np.sum(mask)) < 3:
        raise ConfigError(f"decay fit needs at least three samples in [{lo}, {hi}], found {int(np.sum(mask))}")
    slope, _ = np.polyfit(np.log(t[mask]), np.log(sup[mask]), 1)
    return float(slope)


def frames_from_snapshots(
    snapshots: Sequence[Tuple[float, Field]],
    T: float,
    y_grid: Grid,
    drift: Optional[DriftSpec] = None,
    k: Optional[float] = None,
) -> List[RescaledFrame]:
    """Rescale stored solver snapshots (those with ``t < T``)."""
    return [to_selfsim(u, t, T, y_grid, drift, k) for t, u in snapshots if t < T]
