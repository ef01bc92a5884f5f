"""Heat kernel, discrete convolution and the Duhamel/Picard local solver.

The mild formulation used here is

    Φ[u](t) = G(t) ⋆ u0 − ∫_0^t G_x(t − s) ⋆ (b(s) u(s)^{k+1}) ds

which is the divergence-form equation ``u_t + (b u^{k+1})_x = u_xx`` written
against the heat semigroup.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve
from scipy.special import erf

from drift_lab.errors import ConfigError, ContractionError
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.lorentz import conjugate, lorentz_norm, lp_norm

if TYPE_CHECKING:
    from drift_lab.numerics.drift_lib import DriftSpec

logger = logging.getLogger(__name__)

# below this many cells per kernel width the sampled kernel is replaced by cell averages
_RESOLVED_CELLS = 4.0


def gaussian(t: float, x: np.ndarray) -> np.ndarray:
    """``G(t, x) = (4πt)^{-1/2} exp(-x²/4t)``."""
    return np.exp(-(x**2) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def gaussian_dx(t: float, x: np.ndarray) -> np.ndarray:
    return -x / (2.0 * t) * gaussian(t, x)


@dataclass(frozen=True)
class KernelSample:
    """``G(t,·)`` or ``G_x(t,·)`` sampled at the cell centers of a grid."""

    t: float
    values: Field
    derivative: bool = False
    tail_mass: float = 0.0


def heat_kernel(t: float, grid: Grid, derivative: bool = False) -> KernelSample:
    """Pointwise heat kernel (or its x-derivative) at the cell centers.

    ``tail_mass`` is ``1 − ∫_grid G``, the mass lost to domain truncation.

    Raises:
        ConfigError: if ``t <= 0``.
    """
    if not t > 0:
        raise ConfigError(f"heat kernel needs t > 0, got {t}")
    x = grid.centers
    g = gaussian(t, x)
    tail = 1.0 - float(np.sum(g) * grid.dx)
    values = gaussian_dx(t, x) if derivative else g
    return KernelSample(t=t, values=Field(grid, values), derivative=derivative, tail_mass=tail)


@dataclass(frozen=True)
class Trajectory:
    """Space-time field sampled at increasing ``times`` on a fixed grid."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (times.size, self.grid.n_cells):
            raise ConfigError(f"trajectory shape {values.shape} does not match {times.size} x {self.grid.n_cells}")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ConfigError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def field(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time."""
        times = self.times
        if t <= times[0]:
            return self.values[0]
        if t >= times[-1]:
            return self.values[-1]
        j = int(np.searchsorted(times, t, side="right")) - 1
        w = (t - times[j]) / (times[j + 1] - times[j])
        return (1.0 - w) * self.values[j] + w * self.values[j + 1]

    @classmethod
    def constant(cls, u0: Field, times: np.ndarray) -> "Trajectory":
        return cls(u0.grid, times, np.tile(u0.values, (len(times), 1)))


def _same_spacing(f: Field, g: Field) -> None:
    if not math.isclose(f.grid.dx, g.grid.dx, rel_tol=1e-12):
        raise ConfigError(f"convolution needs equal spacing, got dx={f.grid.dx} and dx={g.grid.dx}")


def convolve(f: Field, g: Field, method: str = "direct") -> Field:
    """``(f ⋆ g)(x) = ∫ f(y) g(x − y) dy`` on the grid of ``f``.

    Both fields are taken as zero outside their grids. On an odd cell count the
    result lands on cell centers exactly; on an even count the face values are
    averaged onto the centers.

    Args:
        f: First factor; its grid carries the result.
        g: Second factor, same spacing.
        method: ``"direct"`` (``numpy.convolve``) or ``"fft"`` (``scipy.signal.fftconvolve``).

    Raises:
        ConfigError: mismatched spacing or unknown method.
    """
    _same_spacing(f, g)
    if method == "direct":
        full = np.convolve(f.values, g.values)
    elif method == "fft":
        full = fftconvolve(f.values, g.values)
    else:
        raise ConfigError(f"unknown convolution method {method!r}")
    full = full * f.grid.dx
    # full[l] sits at x = x0_f + x0_g + l*dx
    start = (f.grid.centers[0] + g.grid.centers[0]) / f.grid.dx
    offset = f.grid.centers[0] / f.grid.dx - start
    n = f.grid.n_cells
    lo = int(math.floor(offset + 1e-9))
    frac = offset - lo
    padded = np.concatenate((np.zeros(1), full, np.zeros(n + 2)))
    base = padded[lo + 1 : lo + 1 + n]
    if frac < 1e-9:
        return Field(f.grid, base)
    nxt = padded[lo + 2 : lo + 2 + n]
    return Field(f.grid, (1.0 - frac) * base + frac * nxt)


def _edge(tau: float, z: np.ndarray) -> np.ndarray:
    # E(z) = ∫_0^z G(tau, s) ds
    if tau == 0:
        return 0.5 * np.sign(z)
    return 0.5 * erf(z / (2.0 * math.sqrt(tau)))


def _ramp(tau: float, z: np.ndarray) -> np.ndarray:
    # Λ(z) = ∫_0^z E(s) ds
    if tau == 0:
        return 0.5 * np.abs(z)
    return 0.5 * z * erf(z / (2.0 * math.sqrt(tau))) + math.sqrt(tau / math.pi) * np.exp(-(z**2) / (4.0 * tau))


def cell_kernel(tau: float, grid: Grid, derivative: bool) -> np.ndarray:
    """Kernel weights for offsets ``m = -(n-1) … n-1`` acting on cell values.

    Well-resolved kernels are sampled pointwise (times ``dx``). Unresolved ones
    (``sqrt(2 tau) < 4 dx``, including ``tau = 0``) use exact cell averages of
    ``G ⋆ 1_cell``; for ``G_x`` at ``tau = 0`` these reduce to the centered difference.
    """
    if tau < 0:
        raise ConfigError(f"kernel time must be >= 0, got {tau}")
    n, dx = grid.n_cells, grid.dx
    m = np.arange(-(n - 1), n, dtype=float)
    if tau > 0 and math.sqrt(2.0 * tau) >= _RESOLVED_CELLS * dx:
        z = m * dx
        return (gaussian_dx(tau, z) if derivative else gaussian(tau, z)) * dx
    z = m * dx
    if derivative:
        return (_edge(tau, z + dx) - 2.0 * _edge(tau, z) + _edge(tau, z - dx)) / dx
    return (_ramp(tau, z + dx) - 2.0 * _ramp(tau, z) + _ramp(tau, z - dx)) / dx


def _apply_kernel(weights: np.ndarray, values: np.ndarray, method: str = "direct") -> np.ndarray:
    n = values.size
    full = np.convolve(values, weights) if method == "direct" else fftconvolve(values, weights)
    return full[n - 1 : 2 * n - 1]


def kernel_gradient_scaling(p: float, times: Sequence[float], grid: Optional[Grid] = None) -> float:
    """Least-squares slope of ``log ‖G_x(t)‖_{p,1}`` against ``log t``.

    The expected slope is ``1/(2p) − 1``.

    Raises:
        ConfigError: fewer than three times, a span under one decade, or ``p`` outside ``(1, inf)``.
    """
    times = np.asarray(sorted(times), dtype=float)
    if times.size < 3:
        raise ConfigError("kernel_gradient_scaling needs at least three times")
    if times[-1] / times[0] < 10.0:
        raise ConfigError("times must span at least one decade")
    if not 1 < p < math.inf:
        raise ConfigError(f"p must lie in (1, inf), got {p}")
    if grid is None:
        half_width = 20.0 * math.sqrt(times[-1])
        dx = math.sqrt(times[0]) / 20.0
        grid = Grid(half_width, int(math.ceil(2 * half_width / dx)) | 1)
    norms = [lorentz_norm(heat_kernel(t, grid, derivative=True).values, (p, 1.0)) for t in times]
    slope, _ = np.polyfit(np.log(times), np.log(norms), 1)
    logger.debug("G_x scaling p=%s slope=%.4f", p, slope)
    return float(slope)


@dataclass(frozen=True)
class DuhamelResult:
    """One evaluation of the Duhamel map."""

    field: Field
    coarse_mesh: bool = False
    quadrature_gap: float = 0.0


def _duhamel_nodes(traj: Trajectory, t: float, graded_levels: int) -> np.ndarray:
    uniform = traj.times[traj.times <= t]
    graded = t - t * 2.0 ** -np.arange(1, graded_levels + 1)
    return np.unique(np.concatenate((uniform, graded, [0.0, t])))


def duhamel_apply(
    traj: Trajectory,
    b: "DriftSpec",
    k: float,
    t: float,
    graded_levels: int = 12,
    method: str = "direct",
) -> DuhamelResult:
    """``Φ[u](t)`` for a trajectory sampled on a time mesh.

    The s-integral uses the trapezoid rule on the trajectory times refined by a
    geometric mesh toward ``s = t``. ``coarse_mesh`` is set when dropping every
    other node moves the integral by more than 1% of its size.
    """
    if t < 0 or t > traj.times[-1] + 1e-15:
        raise ConfigError(f"t={t} lies outside the trajectory window [0, {traj.times[-1]}]")
    grid = traj.grid
    u0 = traj.values[0]
    if t == 0:
        return DuhamelResult(Field(grid, u0))
    heat_part = _apply_kernel(cell_kernel(t, grid, derivative=False), u0, method)
    if b.is_zero:
        return DuhamelResult(Field(grid, heat_part))

    nodes = _duhamel_nodes(traj, t, graded_levels)
    x = grid.centers
    integrand = np.empty((nodes.size, grid.n_cells))
    for i, s in enumerate(nodes):
        u = np.maximum(traj.at(s), 0.0)
        flux = b.value(s, x) * u ** (k + 1.0)
        integrand[i] = _apply_kernel(cell_kernel(t - s, grid, derivative=True), flux, method)
    full = trapezoid(integrand, nodes, axis=0)
    coarse = trapezoid(integrand[::2], nodes[::2], axis=0) if nodes.size > 4 else full
    scale = float(np.max(np.abs(full))) or 1.0
    gap = float(np.max(np.abs(full - coarse))) / scale
    return DuhamelResult(Field(grid, heat_part - full), coarse_mesh=gap > 1e-2, quadrature_gap=gap)


@dataclass
class PicardState:
    """Fixed-point iteration record of the Duhamel map on ``[0, t_bar]``."""

    times: np.ndarray
    radius: float
    iterates: List[Trajectory] = field(default_factory=list)
    distances: List[float] = field(default_factory=list)
    contraction_estimates: List[float] = field(default_factory=list)
    converged: bool = False
    coarse_mesh: bool = False

    @property
    def iterations(self) -> int:
        """Applications of Φ that changed the iterate."""
        return max(len(self.iterates) - 2, 0) if self.converged else len(self.iterates) - 1

    @property
    def solution(self) -> Trajectory:
        return self.iterates[-1]


def _distance(diff: np.ndarray, grid: Grid, case: str, p: float) -> float:
    f = Field(grid, diff)
    if case == "con2":
        return lp_norm(f, 2.0)
    pc = conjugate(p)
    if pc == 1.0:
        return lp_norm(f, 1.0)
    return lorentz_norm(f, (pc, 1.0))


def picard_solve(
    u0: Field,
    b: "DriftSpec",
    k: float,
    t_bar: float,
    tol: float = 1e-8,
    max_iter: int = 40,
    n_times: int = 11,
    case: str = "con1",
    p: float = math.inf,
    radius: Optional[float] = None,
) -> PicardState:
    """Iterate ``u ↦ Φ[u]`` from the constant trajectory ``u0`` until successive iterates agree.

    The distance is ``sup_t ‖u_{n+1}(t) − u_n(t)‖`` in ``L^{p',1}`` (case con1;
    plain ``L^1`` when ``p' = 1``) or ``L^2`` (case con2).

    Raises:
        ConfigError: invalid inputs.
        ContractionError: a measured ratio ``>= 1``, the iterate leaves the ball of
            radius ``r``, or ``max_iter`` is exhausted.
    """
    if not t_bar > 0:
        raise ConfigError(f"t_bar must be positive, got {t_bar}")
    if np.any(u0.values < 0) or not u0.is_finite():
        raise ConfigError("u0 must be finite and nonnegative")
    if case not in ("con1", "con2"):
        raise ConfigError(f"unknown case {case!r}")
    r = radius if radius is not None else 2.0 * u0.sup() * 1.05
    times = np.linspace(0.0, t_bar, n_times)
    state = PicardState(times=times, radius=r)
    current = Trajectory.constant(u0, times)
    state.iterates.append(current)
    grid = u0.grid
    for it in range(max_iter):
        rows = []
        for t in times:
            result = duhamel_apply(current, b, k, float(t))
            state.coarse_mesh = state.coarse_mesh or result.coarse_mesh
            rows.append(result.field.values)
        nxt = Trajectory(grid, times, np.vstack(rows))
        dist = max(_distance(nxt.values[i] - current.values[i], grid, case, p) for i in range(times.size))
        state.iterates.append(nxt)
        state.distances.append(dist)
        sup = float(np.max(np.abs(nxt.values)))
        if sup > r:
            raise ContractionError(
                f"iterate left the ball: sup {sup:.4g} > r = {r:.4g}; retry with t_bar = {t_bar / 2:g}",
                {"iteration": it, "sup": sup},
            )
        if len(state.distances) > 1 and state.distances[-2] > tol:
            ratio = dist / state.distances[-2]
            state.contraction_estimates.append(ratio)
            if ratio >= 1.0:
                raise ContractionError(
                    f"Duhamel map does not contract (ratio {ratio:.3f}); retry with t_bar = {t_bar / 2:g}",
                    {"iteration": it, "ratio": ratio},
                )
        current = nxt
        if dist < tol:
            state.converged = True
            logger.info("Picard converged in %d iterations (t_bar=%g)", state.iterations, t_bar)
            return state
    raise ContractionError(
        f"no convergence after {max_iter} iterations (last distance {state.distances[-1]:.3g})",
        {"distances": state.distances},
    )


@dataclass(frozen=True)
class MomentGrowthReport:
    """Exponential envelope of ``∫(1+x²)|u|`` along a trajectory."""

    weighted_moments: np.ndarray
    minimal_rate: float
    heat_excess: float


def moment_growth_check(traj: Trajectory, b: "DriftSpec", k: float, r: float) -> MomentGrowthReport:
    """Smallest ``C`` with ``∫(1+x²)|u(t)| <= ∫(1+x²)|u0| · exp(C (1 + r^k) t)``.

    ``heat_excess`` is ``max_t [M(t) − M(0) − 2 t m(0)]``, which vanishes for pure heat flow.
    """
    x2 = 1.0 + traj.grid.centers**2
    weighted = np.sum(np.abs(traj.values) * x2, axis=1) * traj.grid.dx
    mass0 = float(np.sum(np.abs(traj.values[0])) * traj.grid.dx)
    t = traj.times - traj.times[0]
    rate = 0.0
    if weighted[0] > 0:
        positive = t > 0
        logs = np.log(np.maximum(weighted[positive], 1e-300) / weighted[0])
        if logs.size:
            rate = max(0.0, float(np.max(logs / ((1.0 + r**k) * t[positive]))))
    excess = float(np.max(weighted - weighted[0] - 2.0 * t * mass0)) if weighted.size else 0.0
    if b.is_zero:
        logger.debug("pure heat moment excess %.3e", excess)
    return MomentGrowthReport(weighted_moments=weighted, minimal_rate=rate, heat_excess=excess)
