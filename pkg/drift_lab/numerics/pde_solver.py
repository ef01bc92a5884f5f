"""Conservative IMEX integrator for ``u_t + (b u^{k+1})_x = u_xx`` on ``[-L, L]``.

Advection is explicit and upwinded on the sign of ``b`` at each face; diffusion
is a theta-scheme (Crank-Nicolson by default) solved as a tridiagonal system.
Homogeneous Dirichlet conditions hold at both ends, and all mass leaving the
domain is booked as boundary flux.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.linalg import solve_banded

from drift_lab.config.settings import settings
from drift_lab.errors import AdmissibilityError, ConfigError, NumericalError
from drift_lab.numerics.drift_lib import DriftFamily, DriftSpec, validate_envelope
from drift_lab.numerics.grid import Field, Grid
from drift_lab.telemetry import metrics

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ("t", "sup_norm", "l2_norm", "mass", "energy", "boundary_flux")

# negatives below this fraction of the sup norm trigger the backward Euler retry
_UNDERSHOOT = 1e-12


class Classification(str, Enum):
    """Terminal event of a solve."""

    COMPLETED = "completed"
    BLOW_UP = "blow_up"
    DT_COLLAPSE = "dt_collapse"


class RunFlag(str, Enum):
    DOMAIN_TOO_SMALL = "domain_too_small"
    THETA_FALLBACK = "theta_fallback"
    POSITIVITY_CLAMP = "positivity_clamp"


@dataclass(frozen=True)
class SolverState:
    """Solution at time ``t`` plus the bookkeeping needed for mass accounting.

    ``outflow`` is the cumulative mass that left through ``±L``; ``clamped`` is
    the mass added by zeroing round-off negatives.
    """

    t: float
    u: Field
    dt: float = 0.0
    step_count: int = 0
    outflow: float = 0.0
    clamped: float = 0.0
    fallback_steps: int = 0

    def snapshot(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "dt": self.dt,
            "step_count": self.step_count,
            "u": self.u.values.tolist(),
        }


@dataclass(frozen=True)
class RunConfig:
    """Everything one solve needs.

    ``blowup_threshold`` defaults to ``settings.blowup_factor · ‖u0‖_∞`` and
    ``dt_floor`` to ``settings.dt_floor``. The solver lands exactly on every
    entry of ``snapshot_times`` and keeps the field there.
    """

    k: float
    drift: DriftSpec
    u0: Field
    t_max: float
    grid: Optional[Grid] = None
    blowup_threshold: Optional[float] = None
    dt_floor: Optional[float] = None
    diagnostics_stride: int = 1
    cfl: Optional[float] = None
    dt_max: float = 0.05
    theta: float = 0.5
    boundary_flux_tolerance: Optional[float] = None
    snapshot_times: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        grid = self.grid if self.grid is not None else self.u0.grid
        if grid != self.u0.grid:
            raise ConfigError("u0 lives on a different grid than the run")
        object.__setattr__(self, "grid", grid)
        if not self.k > 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if not self.t_max > 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if not self.u0.is_finite() or np.any(self.u0.values < 0):
            raise ConfigError("u0 must be finite and nonnegative")
        if self.blowup_threshold is None:
            sup = self.u0.sup()
            object.__setattr__(self, "blowup_threshold", settings.blowup_factor * sup if sup > 0 else math.inf)
        if self.dt_floor is None:
            object.__setattr__(self, "dt_floor", settings.dt_floor)
        if self.cfl is None:
            object.__setattr__(self, "cfl", settings.cfl)
        if self.boundary_flux_tolerance is None:
            object.__setattr__(self, "boundary_flux_tolerance", settings.boundary_flux_tolerance)
        for name in ("blowup_threshold", "dt_floor", "dt_max", "boundary_flux_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not 0.5 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [0.5, 1], got {self.theta}")
        if int(self.diagnostics_stride) != self.diagnostics_stride or self.diagnostics_stride < 1:
            raise ConfigError(f"diagnostics_stride must be a positive integer, got {self.diagnostics_stride}")
        times = tuple(sorted(float(t) for t in self.snapshot_times if 0 <= t <= self.t_max))
        object.__setattr__(self, "snapshot_times", times)
        if self.drift.family in (DriftFamily.BLOWUP_CON1, DriftFamily.BLOWUP_CON2):
            report = validate_envelope(self.drift, grid)
            if not report.ok:
                raise AdmissibilityError(f"drift fails its envelope check: {'; '.join(report.details)}")

    @property
    def mass0(self) -> float:
        return self.u0.integral()


@dataclass(frozen=True)
class Series:
    """Diagnostic time series, one entry per recorded step."""

    t: np.ndarray
    sup_norm: np.ndarray
    l2_norm: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    boundary_flux: np.ndarray

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Series":
        data = np.asarray(rows, dtype=float).reshape(-1, len(SERIES_COLUMNS))
        return cls(*(data[:, i].copy() for i in range(len(SERIES_COLUMNS))))

    def rows(self) -> Iterator[Tuple[float, ...]]:
        cols = [getattr(self, name) for name in SERIES_COLUMNS]
        for i in range(self.t.size):
            yield tuple(float(c[i]) for c in cols)

    def __len__(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True)
class RunReport:
    """Immutable outcome of :func:`solve`."""

    classification: Classification
    series: Series
    terminal: SolverState
    flags: Tuple[str, ...] = ()
    snapshots: Tuple[Tuple[float, Field], ...] = ()
    mass_error: float = 0.0
    message: str = ""

    @property
    def last_resolved_time(self) -> float:
        return self.terminal.t

    @property
    def blew_up(self) -> bool:
        return self.classification is not Classification.COMPLETED

    def summary(self) -> Dict[str, Any]:
        """Flat key/value view written to ``report.txt``."""
        s = self.series
        return {
            "classification": self.classification.value,
            "flags": ",".join(self.flags),
            "t_final": self.terminal.t,
            "steps": self.terminal.step_count,
            "fallback_steps": self.terminal.fallback_steps,
            "sup_initial": float(s.sup_norm[0]),
            "sup_final": float(s.sup_norm[-1]),
            "sup_max": float(np.max(s.sup_norm)),
            "mass_initial": float(s.mass[0]),
            "mass_error": self.mass_error,
            "boundary_flux": float(s.boundary_flux[-1]),
            "message": self.message,
        }


def _ghost_extend(u: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], u, [0.0]))


def advective_flux(u: np.ndarray, b_faces: np.ndarray, k: float) -> np.ndarray:
    """Upwind ``b u^{k+1}`` at all ``n + 1`` faces; the exterior is empty."""
    ext = _ghost_extend(u)
    upwind = np.where(b_faces >= 0, ext[:-1], ext[1:])
    return b_faces * np.maximum(upwind, 0.0) ** (k + 1.0)


def face_gradient(u: np.ndarray, dx: float) -> np.ndarray:
    """``u_x`` at all faces with odd ghost cells, i.e. ``u = 0`` on ``±L``."""
    ext = np.concatenate(([-u[0]], u, [-u[-1]]))
    return np.diff(ext) / dx


def _diffusion_bands(n: int, r: float) -> np.ndarray:
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :] = -r
    ab[1, 0] = ab[1, -1] = 1.0 + 3.0 * r
    return ab


def stable_dt(state: SolverState, config: RunConfig) -> float:
    """Largest step allowed by the two-sided upwind CFL bound.

    Each cell is limited by the sum of its outgoing face speeds,
    ``(b_R⁺ + b_L⁻)(k+1)u^k dt/dx <= cfl``, so a cell draining through both
    faces never loses more than ``cfl/(k+1)`` of its content in the explicit part.
    """
    grid = config.grid
    assert grid is not None
    b_faces = config.drift.value(state.t, grid.faces)
    u = np.maximum(np.asarray(state.u.values), 0.0)
    outgoing = np.maximum(b_faces[1:], 0.0) + np.maximum(-b_faces[:-1], 0.0)
    speed = outgoing * (config.k + 1.0) * u**config.k
    peak = float(np.max(speed)) if speed.size else 0.0
    return math.inf if peak == 0 else config.cfl * grid.dx / peak


def _theta_step(u: np.ndarray, b_faces: np.ndarray, k: float, dx: float, dt: float, theta: float):
    adv = advective_flux(u, b_faces, k)
    grad_old = face_gradient(u, dx)
    rhs = u - dt / dx * np.diff(adv) + (1.0 - theta) * dt / dx * np.diff(grad_old)
    ab = _diffusion_bands(u.size, theta * dt / dx**2)
    new = solve_banded((1, 1), ab, rhs, check_finite=False)
    grad_new = face_gradient(new, dx)
    total = adv - (theta * grad_new + (1.0 - theta) * grad_old)
    outflow = dt * (total[-1] - total[0])
    return new, outflow


def step(state: SolverState, config: RunConfig, dt: Optional[float] = None) -> SolverState:
    """Advance one IMEX step.

    Args:
        state: Current state.
        config: Run configuration.
        dt: Step size; defaults to the CFL-limited step capped by ``dt_max`` and ``t_max``.

    Raises:
        NumericalError: a NaN appears; the exception carries the pre-step state.
    """
    grid = config.grid
    assert grid is not None
    if dt is None:
        dt = min(stable_dt(state, config), config.dt_max, config.t_max - state.t)
    if not dt > 0:
        raise ConfigError(f"step size must be positive, got {dt}")
    u = np.asarray(state.u.values)
    b_faces = config.drift.value(state.t, grid.faces)
    new, outflow = _theta_step(u, b_faces, config.k, grid.dx, dt, config.theta)
    fallback = state.fallback_steps
    sup = float(np.max(np.abs(new))) if new.size else 0.0
    if config.theta < 1.0 and new.size and new.min() < -_UNDERSHOOT * max(sup, 1e-300):
        new, outflow = _theta_step(u, b_faces, config.k, grid.dx, dt, 1.0)
        fallback += 1
    if not np.all(np.isfinite(new)):
        raise NumericalError(f"non-finite values at t={state.t + dt:.6g}", state.snapshot())
    negative = np.minimum(new, 0.0)
    clamped = state.clamped - float(np.sum(negative)) * grid.dx
    new = new - negative
    return SolverState(
        t=state.t + dt,
        u=Field(grid, new),
        dt=dt,
        step_count=state.step_count + 1,
        outflow=state.outflow + outflow,
        clamped=clamped,
        fallback_steps=fallback,
    )


def initial_state(config: RunConfig) -> SolverState:
    return SolverState(t=0.0, u=config.u0)


def _diagnostics(state: SolverState) -> Tuple[float, ...]:
    u = state.u
    x = u.grid.centers
    dx = u.grid.dx
    values = u.values
    return (
        state.t,
        u.sup(),
        float(math.sqrt(np.sum(values**2) * dx)),
        u.integral(),
        float(np.sum(x**2 * values) * dx),
        state.outflow,
    )


def solve(config: RunConfig) -> RunReport:
    """Integrate to ``t_max`` or stop on a blow-up event.

    The run is classified ``blow_up`` when ``‖u‖_∞`` exceeds the threshold and
    ``dt_collapse`` when the CFL step falls under ``dt_floor``. Runs whose
    boundary flux exceeds ``boundary_flux_tolerance · m(0)`` carry the
    ``domain_too_small`` flag.
    """
    state = initial_state(config)
    rows: List[Tuple[float, ...]] = [_diagnostics(state)]
    snapshots: List[Tuple[float, Field]] = []
    pending = [t for t in config.snapshot_times]
    if pending and pending[0] == 0.0:
        snapshots.append((0.0, state.u))
        pending.pop(0)
    classification = Classification.COMPLETED
    message = ""
    end_tol = 1e-12 * config.t_max
    while state.t < config.t_max - end_tol:
        sup = state.u.sup()
        if sup > config.blowup_threshold:
            classification = Classification.BLOW_UP
            message = f"sup norm {sup:.4g} exceeded {config.blowup_threshold:.4g}"
            break
        dt_cfl = stable_dt(state, config)
        if dt_cfl < config.dt_floor:
            classification = Classification.DT_COLLAPSE
            message = f"CFL step {dt_cfl:.3g} fell below dt_floor {config.dt_floor:.3g}"
            break
        dt = min(dt_cfl, config.dt_max, config.t_max - state.t)
        if pending:
            dt = min(dt, pending[0] - state.t)
        state = step(state, config, dt)
        if pending and abs(state.t - pending[0]) <= 1e-12 * max(1.0, pending[0]):
            snapshots.append((pending.pop(0), state.u))
        if state.step_count % config.diagnostics_stride == 0:
            rows.append(_diagnostics(state))
    if state.t >= config.t_max - end_tol and state.u.sup() > config.blowup_threshold:
        classification = Classification.BLOW_UP
        message = f"sup norm {state.u.sup():.4g} exceeded {config.blowup_threshold:.4g}"
    if rows[-1][0] != state.t:
        rows.append(_diagnostics(state))

    flags: List[str] = []
    mass0 = config.mass0
    if abs(state.outflow) > config.boundary_flux_tolerance * max(mass0, 1e-300) and mass0 > 0:
        flags.append(RunFlag.DOMAIN_TOO_SMALL.value)
    if state.fallback_steps:
        flags.append(RunFlag.THETA_FALLBACK.value)
    if state.clamped > 0:
        flags.append(RunFlag.POSITIVITY_CLAMP.value)
    mass_error = state.u.integral() - mass0 + state.outflow - state.clamped
    logger.info(
        "solve finished: %s at t=%.6g after %d steps (fallbacks=%d, flags=%s)",
        classification.value,
        state.t,
        state.step_count,
        state.fallback_steps,
        ",".join(flags) or "-",
    )
    if settings.metrics_enabled:
        metrics.solver_steps_total.labels(classification=classification.value).inc(state.step_count)
        metrics.solver_fallback_steps_total.inc(state.fallback_steps)
    return RunReport(
        classification=classification,
        series=Series.from_rows(rows),
        terminal=state,
        flags=tuple(flags),
        snapshots=tuple(snapshots),
        mass_error=mass_error,
        message=message,
    )


@dataclass(frozen=True)
class EnergyBalance:
    """Both sides of ``dE/dt = 2m + 2∫x b u^{k+1}`` for one state.

    ``lhs`` is ``Σ x_i² du_i/dt dx`` from the semi-discrete operator; ``rhs``
    uses the same upwind face fluxes, so the two differ only by the boundary
    terms. ``drift_moment`` is the cell-centered ``∫x b u^{k+1}``.
    """

    lhs: float
    rhs: float
    mass: float
    drift_moment: float
    boundary_term: float
    tolerance: float

    def __iter__(self) -> Iterator[float]:
        return iter((self.lhs, self.rhs))

    @property
    def holds(self) -> bool:
        return abs(self.lhs - self.rhs) <= self.tolerance


def energy_flux_identity(state: SolverState, config: RunConfig) -> EnergyBalance:
    """Semi-discrete energy identity at ``state``.

    For inward drifts (``x b <= 0``) the drift term equals ``−2∫|x b| u^{k+1}``,
    which is the dissipative sign driving ``E`` down.
    """
    grid = config.grid
    assert grid is not None
    u = np.asarray(state.u.values)
    dx = grid.dx
    x = grid.centers
    faces = grid.faces
    adv = advective_flux(u, config.drift.value(state.t, faces), config.k)
    total = adv - face_gradient(u, dx)
    dudt = -np.diff(total) / dx
    lhs = float(np.sum(x**2 * dudt) * dx)
    mass = float(np.sum(u) * dx)
    interior = slice(1, -1)
    rhs = 2.0 * mass + 2.0 * float(np.sum(faces[interior] * adv[interior]) * dx)
    drift_moment = float(np.sum(x * config.drift.value(state.t, x) * u ** (config.k + 1.0)) * dx)
    boundary = lhs - rhs
    tol = 10.0 * dx**2 * (abs(rhs) + 2.0 * mass) + abs(x[0] ** 2 * total[0]) + abs(x[-1] ** 2 * total[-1])
    tol += 4.0 * (abs(x[0]) * u[0] + abs(x[-1]) * u[-1])
    return EnergyBalance(lhs, rhs, mass, drift_moment, boundary, tol)


def flux_moment(u: Field, drift: DriftSpec, k: float, t: float = 0.0) -> float:
    """``∫ u^{k+1} |x b|``."""
    x = u.grid.centers
    values = np.maximum(u.values, 0.0)
    return float(np.sum(values ** (k + 1.0) * np.abs(x * drift.value(t, x))) * u.grid.dx)


@dataclass(frozen=True)
class OdeBranch:
    """Decay term ``coefficient / y^gamma`` of the comparison ODE."""

    coefficient: float
    gamma: float


def lemma_branches(m: float, alpha: float, beta: Optional[float], k: float) -> List[OdeBranch]:
    """Branches from the mass-energy interpolation lemmas.

    From ``m <= 2 c^{2k/D} Q^{2/D} E^{e/D}`` with ``c = 2k/e`` one gets
    ``Q >= (m/2)^{D/2} c^{-k} E^{-e/2}``, so ``dE/dt <= 2m − 2Q`` gives a branch
    with coefficient ``2 (m/2)^{D/2} c^{-k}`` and ``gamma = e/2``. With ``beta``
    the two con1 branches ``(α, β)`` are used, otherwise the con2 pair
    (``α`` and the saturated branch).

    Raises:
        ConfigError: a branch exponent ``e`` is not positive.
    """
    if not m > 0:
        raise ConfigError(f"mass must be positive, got {m}")
    if beta is not None:
        pairs = [(3 * k + 1 + alpha, k - (1 - alpha)), (3 * k + 1 + beta, k - (1 - beta))]
    else:
        pairs = [(3 * k + 1 - alpha, k - (alpha + 1)), (3 * k + 1, k - 1)]
    branches = []
    for D, e in pairs:
        if not e > 0:
            raise ConfigError(f"comparison exponent must be positive, got {e:g} (alpha={alpha}, beta={beta}, k={k})")
        c = 2 * k / e
        branches.append(OdeBranch(2.0 * (m / 2.0) ** (D / 2.0) * c ** (-k), e / 2.0))
    return branches


def measured_branch(E0: float, flux: float, gamma: float) -> OdeBranch:
    """Single branch calibrated so that ``2 Q(E0) = coefficient / E0^gamma``."""
    return OdeBranch(2.0 * flux * E0**gamma, gamma)


@dataclass(frozen=True)
class MomentOdePrediction:
    """Comparison ODE ``y' = a − min_i b_i / y^{γ_i}`` started at ``E0``."""

    a: float
    E0: float
    branches: Tuple[OdeBranch, ...]
    stall_point: float
    hitting_time: Optional[float]

    def decay(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.min([br.coefficient * y ** (-br.gamma) for br in self.branches], axis=0)

    def rate(self, y: np.ndarray) -> np.ndarray:
        return self.a - self.decay(y)

    @property
    def gamma(self) -> float:
        """Exponent governing the approach to ``y = 0``."""
        return min(br.gamma for br in self.branches)

    def time_to_zero(self, y: float) -> float:
        """Time the ODE needs to go from ``y`` to 0."""
        value, _ = quad(lambda s: 1.0 / -self.rate(s), 0.0, y, limit=200)
        return float(value)

    def near_hitting_exponent(self, lo: float = 1e-8, hi: float = 1e-4, points: int = 25) -> float:
        """Fitted ``d log y / d log(T − t)`` on ``y ∈ [lo·E0, hi·E0]``."""
        if self.hitting_time is None:
            raise ConfigError("the comparison ODE stalls; there is no hitting time")
        ys = np.geomspace(lo * self.E0, hi * self.E0, points)
        gaps = np.array([self.time_to_zero(y) for y in ys])
        slope, _ = np.polyfit(np.log(gaps), np.log(ys), 1)
        return float(slope)

    def trajectory(self, points: int = 200) -> Tuple[np.ndarray, np.ndarray]:
        """Dense ``(t, y)`` samples up to (just before) the hitting time."""
        t_end = self.hitting_time if self.hitting_time is not None else 10.0
        floor = 1e-12 * self.E0

        def hit(_t, y):
            return y[0] - floor

        hit.terminal = True  # type: ignore[attr-defined]
        sol = solve_ivp(
            lambda _t, y: [float(self.rate(max(y[0], floor)))],
            (0.0, t_end),
            [self.E0],
            events=hit,
            dense_output=True,
            rtol=1e-10,
            atol=floor,
        )
        t = np.linspace(0.0, sol.t[-1], points)
        return t, sol.sol(t)[0]


def moment_ode_envelope(
    m: float,
    E0: float,
    alpha: float,
    beta_or_none: Optional[float],
    k: float,
    flux: Optional[float] = None,
    branches: Optional[Sequence[OdeBranch]] = None,
) -> MomentOdePrediction:
    """Hitting time of ``y = 0`` for ``y' = 2m − min_i b_i/y^{γ_i}``, ``y(0) = E0``.

    Coefficients come from :func:`lemma_branches`, unless ``flux`` (a measured
    ``∫u^{k+1}|xb|`` at ``E0``) is given, in which case a single branch with
    the lemma's smallest ``gamma`` is calibrated on it. ``hitting_time`` is
    ``None`` when ``E0`` is at or above the stall point ``min_i (b_i/a)^{1/γ_i}``.
    """
    if not E0 > 0:
        raise ConfigError(f"E0 must be positive, got {E0}")
    a = 2.0 * m
    if branches is None:
        lemma = lemma_branches(m, alpha, beta_or_none, k)
        if flux is not None:
            branches = [measured_branch(E0, flux, min(br.gamma for br in lemma))]
        else:
            branches = lemma
    branches = tuple(branches)
    if a > 0:
        stall = min((br.coefficient / a) ** (1.0 / br.gamma) for br in branches)
    else:
        stall = math.inf
    if E0 >= stall:
        return MomentOdePrediction(a, E0, branches, stall, None)
    if a == 0 and len(branches) == 1:
        br = branches[0]
        hit = E0 ** (1.0 + br.gamma) / (br.coefficient * (1.0 + br.gamma))
        return MomentOdePrediction(a, E0, branches, stall, hit)
    prediction = MomentOdePrediction(a, E0, branches, stall, None)
    return replace(prediction, hitting_time=prediction.time_to_zero(E0))


@dataclass(frozen=True)
class ComparisonReport:
    """Worst ``u_low − u_high`` over the common recorded times."""

    times: Tuple[float, ...]
    max_violation: float
    tolerance: float = 1e-10
    violations: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def ordered(self) -> bool:
        return self.max_violation <= self.tolerance


def compare_solutions(cfg_low: RunConfig, cfg_high: RunConfig, stride: int = 1) -> ComparisonReport:
    """Advance two runs with identical steps and record ``max(u_low − u_high)``.

    Both configs must share the grid, drift, ``k`` and ``t_max``; the common
    step is the smaller of the two CFL steps.

    Raises:
        ConfigError: the configs differ in anything but the initial data.
    """
    if cfg_low.grid != cfg_high.grid or cfg_low.k != cfg_high.k or cfg_low.t_max != cfg_high.t_max:
        raise ConfigError("comparison runs must share grid, k and t_max")
    if cfg_low.drift != cfg_high.drift:
        raise ConfigError("comparison runs must share the drift")
    low, high = initial_state(cfg_low), initial_state(cfg_high)
    times: List[float] = [0.0]
    worst: List[float] = [float(np.max(low.u.values - high.u.values))]
    while low.t < cfg_low.t_max * (1 - 1e-12):
        dt = min(stable_dt(low, cfg_low), stable_dt(high, cfg_high), cfg_low.dt_max, cfg_low.t_max - low.t)
        if dt < cfg_low.dt_floor:
            logger.warning("comparison stopped at t=%.4g: step %.3g below dt_floor", low.t, dt)
            break
        low, high = step(low, cfg_low, dt), step(high, cfg_high, dt)
        if low.step_count % stride == 0:
            times.append(low.t)
            worst.append(float(np.max(low.u.values - high.u.values)))
    return ComparisonReport(times=tuple(times), max_violation=max(worst), violations=tuple(worst))
