"""Property suites run by ``drift-lab verify``.

Each suite is a list of small checks on a seeded corpus. The JSON summary
holds no timings, so a fixed seed gives the same summary on every run.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from drift_lab.config.settings import settings
from drift_lab.errors import ConfigError, DriftLabError
from drift_lab.numerics import lorentz
from drift_lab.numerics.drift_lib import (
    blowup_drift_con1,
    blowup_drift_con2,
    drift_norm,
    stationary_pair_con1,
    stationary_residual,
    tanh_drift,
    validate_envelope,
)
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.heat import convolve, duhamel_apply, heat_kernel, kernel_gradient_scaling, picard_solve
from drift_lab.numerics.pde_solver import RunConfig, compare_solutions, energy_flux_identity, initial_state, solve
from drift_lab.numerics.selfsim import (
    eta,
    eta_prime,
    from_selfsim,
    matched_y_grid,
    norm_ladder,
    rescaled_drift_norm,
    to_selfsim,
)

logger = logging.getLogger(__name__)

SUITES = ("lorentz", "heat", "solver", "selfsim", "drifts")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)


@dataclass
class VerifyReport:
    """Outcome of one or more suites."""

    seed: int
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "passed": self.passed,
            "total": len(self.results),
            "failed": len(self.failures),
            "checks": [asdict(r) for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    return str(value)


def field_corpus(seed: int, grid: Grid, size: int = 12) -> List[Field]:
    """Nonnegative test fields: zero, indicators, Gaussians and random steps."""
    rng = np.random.default_rng(seed)
    x = grid.centers
    fields = [grid.zeros()]
    for _ in range(size):
        kind = rng.integers(0, 3)
        if kind == 0:
            width = rng.uniform(0.5, 0.8 * grid.half_width)
            values = (np.abs(x - rng.uniform(-1, 1)) <= width).astype(float) * rng.uniform(0.1, 3.0)
        elif kind == 1:
            values = rng.uniform(0.2, 2.0) * np.exp(-0.5 * ((x - rng.uniform(-1, 1)) / rng.uniform(0.3, 2.0)) ** 2)
        else:
            values = np.where(np.abs(x) < 0.5 * grid.half_width, rng.uniform(0.0, 1.0, x.size), 0.0)
        fields.append(Field(grid, values))
    return fields


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


# -- lorentz -----------------------------------------------------------------


def _lorentz_checks(seed: int) -> List[CheckResult]:
    grid = Grid(8.0, 801)
    corpus = field_corpus(seed, grid)
    out: List[CheckResult] = []
    worst_mass = max(_rel(lorentz.rearrange(f).total, f.mass()) for f in corpus)
    out.append(CheckResult("lorentz", "rearrangement_preserves_mass", worst_mass <= 1e-12, {"worst": worst_mass}))

    worst_hom = 0.0
    ordering_ok = True
    sandwich_ok = True
    inclusion_ok = True
    power_gap = 0.0
    for f in corpus:
        for p, q in ((2.0, 1.0), (3.0, 2.0), (4.0, math.inf)):
            n = lorentz.lorentz_norm(f, (p, q))
            worst_hom = max(worst_hom, _rel(lorentz.lorentz_norm(f.scaled(2.5), (p, q)), 2.5 * n))
            single = lorentz.lorentz_norm(f, (p, q), lorentz.Convention.SINGLE_STAR)
            ordering_ok &= n >= single * (1.0 - 1e-12)
        for p in (1.5, 2.0, 4.0):
            lower, upper = lorentz.check_equivalence(f, p)
            sandwich_ok &= lower.holds(1e-10) and upper.holds(1e-10)
            inclusion_ok &= lorentz.check_inclusion(f, p, 1.0, 2.0).holds(1e-10)
        k = 1.5
        lhs = lorentz.lorentz_norm(f.with_values(f.values**k), (2.0, 2.0), lorentz.Convention.SINGLE_STAR)
        rhs = lorentz.lorentz_norm(f, (2.0 * k, 2.0 * k), lorentz.Convention.SINGLE_STAR) ** k
        power_gap = max(power_gap, _rel(lhs, rhs))
    out.append(CheckResult("lorentz", "homogeneity", worst_hom <= 1e-12, {"worst": worst_hom}))
    out.append(CheckResult("lorentz", "double_star_dominates_single_star", bool(ordering_ok)))
    out.append(CheckResult("lorentz", "equivalence_sandwich", bool(sandwich_ok)))
    out.append(CheckResult("lorentz", "inclusion_monotone", bool(inclusion_ok)))
    out.append(CheckResult("lorentz", "power_identity", power_gap <= 1e-10, {"worst": power_gap}))

    holder_worst = young_worst = interp_worst = gagliardo_worst = 0.0
    for f, g in zip(corpus, corpus[1:] + corpus[:1]):
        for triple in (((4.0, 2.0), (4.0, 2.0), (2.0, 1.0)), ((3.0, math.inf), (6.0, 2.0), (2.0, 2.0))):
            holder_worst = max(holder_worst, lorentz.check_holder(f, g, *triple).ratio)
        young_worst = max(
            young_worst,
            lorentz.check_young(f, g, (2.0, 2.0), (2.0, 2.0), (math.inf, math.inf)).ratio,
            lorentz.check_young(f, g, (1.5, 1.5), (1.5, 1.5), (3.0, 1.5)).ratio,
        )
        interp_worst = max(
            interp_worst,
            lorentz.check_interpolation(f, 2.0, 1.0, 6.0, 1.0, 3.0, 1.0).ratio,
            lorentz.check_interpolation(f, 1.5, 1.5, 4.0, 2.0, 2.0, 2.0).ratio,
        )
        gagliardo_worst = max(gagliardo_worst, lorentz.check_gagliardo(f, 4.0, 2.0).ratio)
    out.append(CheckResult("lorentz", "holder_products", holder_worst <= 1.0, {"worst_ratio": holder_worst}))
    out.append(CheckResult("lorentz", "young_convolutions", young_worst <= 1.0 + 1e-9, {"worst_ratio": young_worst}))
    out.append(
        CheckResult("lorentz", "interpolation_bound", interp_worst <= 1.0 + 1e-10, {"worst_ratio": interp_worst})
    )
    # ‖f‖_4 <= ‖f‖_∞^{1/2} ‖f‖_2^{1/2} <= ‖f_x‖_2^{1/4} ‖f‖_2^{3/4} on the line
    out.append(
        CheckResult("lorentz", "gagliardo_constant", gagliardo_worst <= 1.0, {"worst_ratio": gagliardo_worst})
    )

    # ‖1_E‖_{p,∞} = |E|^{1/p} under both conventions
    indicator = Field(grid, (np.abs(grid.centers) <= 2.0).astype(float))
    measure = float(np.sum(indicator.values) * grid.dx)
    gap = _rel(lorentz.lorentz_norm(indicator, (3.0, math.inf)), measure ** (1.0 / 3.0))
    out.append(CheckResult("lorentz", "indicator_weak_norm", gap <= 1e-10, {"gap": gap}))
    return out


# -- heat ----------------------------------------------------------------------


def _heat_checks(seed: int) -> List[CheckResult]:
    out: List[CheckResult] = []
    grid = Grid(40.0, 4001)
    worst = 0.0
    for t, s in ((0.1, 0.3), (0.5, 1.0)):
        lhs = convolve(heat_kernel(t, grid).values, heat_kernel(s, grid).values)
        rhs = heat_kernel(t + s, grid).values
        worst = max(worst, float(np.max(np.abs(lhs.values - rhs.values))))
    out.append(CheckResult("heat", "semigroup", worst <= 1e-8, {"worst": worst}))

    slope = kernel_gradient_scaling(2.0, np.logspace(-2, 0, 5))
    expected = 1.0 / 4.0 - 1.0
    out.append(CheckResult("heat", "kernel_gradient_scaling", abs(slope - expected) <= 0.05, {"slope": slope}))

    small = Grid(8.0, 161)
    rng = np.random.default_rng(seed)
    u0 = Field(small, rng.uniform(0.5, 1.0) * np.exp(-(small.centers**2)))
    drift = tanh_drift(-1.0, 1.0)
    try:
        state = picard_solve(u0, drift, 1.0, 0.01, n_times=5, p=math.inf)
        ratios = state.contraction_estimates
        ok = state.converged and all(r < 1 for r in ratios)
        traj = state.solution
        again = duhamel_apply(traj, drift, 1.0, float(traj.times[-1])).field
        fixed_gap = float(np.max(np.abs(again.values - traj.values[-1])))
        mass_gap = _rel(again.integral(), u0.integral())
    except DriftLabError as exc:
        out.append(CheckResult("heat", "picard_contraction", False, {"error": str(exc)}))
        return out
    out.append(CheckResult("heat", "picard_contraction", bool(ok), {"ratios": list(ratios)}))
    out.append(CheckResult("heat", "picard_limit_is_mild", fixed_gap <= 1e-6, {"gap": fixed_gap}))
    out.append(CheckResult("heat", "duhamel_mass", mass_gap <= 1e-3, {"gap": mass_gap}))
    return out


# -- solver --------------------------------------------------------------------


def _solver_checks(seed: int) -> List[CheckResult]:
    out: List[CheckResult] = []
    grid = Grid(10.0, 401)
    rng = np.random.default_rng(seed)
    drift = tanh_drift(-1.0, 1.0)
    worst_mass = 0.0
    worst_min = 0.0
    energy_ok = True
    for _ in range(3):
        sigma = rng.uniform(0.5, 1.5)
        u0 = Field(grid, rng.uniform(0.5, 2.0) * np.exp(-0.5 * (grid.centers / sigma) ** 2))
        cfg = RunConfig(k=1.0, drift=drift, u0=u0, t_max=0.5)
        report = solve(cfg)
        worst_mass = max(worst_mass, abs(report.mass_error) / cfg.mass0)
        worst_min = min(worst_min, float(np.min(report.terminal.u.values)))
        energy_ok &= energy_flux_identity(initial_state(cfg), cfg).holds
    out.append(CheckResult("solver", "mass_conservation", worst_mass <= 1e-8, {"worst": worst_mass}))
    out.append(CheckResult("solver", "positivity", worst_min >= -1e-14, {"min": worst_min}))
    out.append(CheckResult("solver", "energy_identity", bool(energy_ok)))

    # backward Euler keeps the discrete scheme monotone
    base = np.exp(-0.5 * grid.centers**2)
    low = RunConfig(k=1.0, drift=drift, u0=Field(grid, 0.5 * base), t_max=0.5, theta=1.0)
    high = RunConfig(k=1.0, drift=drift, u0=Field(grid, base), t_max=0.5, theta=1.0)
    comparison = compare_solutions(low, high, stride=5)
    out.append(CheckResult("solver", "comparison", comparison.ordered, {"max_violation": comparison.max_violation}))
    return out


# -- selfsim -------------------------------------------------------------------


def _selfsim_checks(seed: int) -> List[CheckResult]:
    out: List[CheckResult] = []
    a = 1.3
    left = float(eta(np.array([a - 1e-12]), a)[0])
    right = float(eta(np.array([a + 1e-12]), a)[0])
    slopes = eta_prime(np.array([a - 1e-12, a, a + 1e-12]), a)
    smooth = abs(left - right) < 1e-9 and bool(np.allclose(slopes, a, atol=1e-9))
    out.append(CheckResult("selfsim", "eta_c11", smooth))

    rng = np.random.default_rng(seed)
    x_grid = Grid(20.0, 801)
    u = Field(x_grid, rng.uniform(0.5, 2.0) * np.exp(-0.5 * x_grid.centers**2))
    T, t = 2.0, 1.5
    frame = to_selfsim(u, t, T, matched_y_grid(x_grid, t, T))
    mass_gap = _rel(frame.v.integral(), u.integral())
    back = from_selfsim(frame, x_grid)
    trip = float(np.max(np.abs(back.values - u.values)))
    out.append(CheckResult("selfsim", "mass_invariance", mass_gap <= 1e-10, {"gap": mass_gap}))
    out.append(CheckResult("selfsim", "round_trip", trip <= 1e-8, {"gap": trip}))

    drift = blowup_drift_con2(1.0, 8.0, 0.05, 3.0, 2.0)
    try:
        drift_grid = Grid(30.0, 1201)
        worst = max(rescaled_drift_norm(drift, tau, 4.0, 2.0, 3.0, drift_grid).relative_error for tau in (0.5, 1.5))
        out.append(CheckResult("selfsim", "drift_norm_scaling", True, {"worst": worst}))
    except DriftLabError as exc:
        out.append(CheckResult("selfsim", "drift_norm_scaling", False, {"error": str(exc)}))

    ladder = norm_ladder(u, 4, 4.0, 0.5)
    out.append(
        CheckResult(
            "selfsim",
            "norm_ladder_steps",
            ladder.holder_steps_ok and ladder.interpolation_steps_ok,
            {"constant": ladder.measured_constant},
        )
    )
    return out


# -- drifts --------------------------------------------------------------------


def _drift_checks(seed: int) -> List[CheckResult]:
    out: List[CheckResult] = []
    profile, spec = stationary_pair_con1(4.0, 0.5)
    coarse = stationary_residual(profile, spec, 0.5, Grid(10.0, 400))
    fine = stationary_residual(profile, spec, 0.5, Grid(10.0, 800))
    order = math.log2(coarse / fine) if fine > 0 else math.inf
    out.append(CheckResult("drifts", "stationary_residual_order", order >= 1.5, {"order": order}))

    grid = Grid(30.0, 4000)
    con1 = blowup_drift_con1(0.1, 0.5, 2.0, 0.05, 1.25, 4.0)
    con2 = blowup_drift_con2(1.0, 8.0, 0.05, 3.0, 2.0)
    for name, drift in (("con1", con1), ("con2", con2)):
        report = validate_envelope(drift, grid)
        out.append(CheckResult("drifts", f"envelope_{name}", report.ok, {"details": report.details}))

    n_coarse = drift_norm(con1, Grid(30.0, 4000), 4.0)
    n_fine = drift_norm(con1, Grid(30.0, 8000), 4.0)
    gap = _rel(n_coarse, n_fine)
    out.append(CheckResult("drifts", "con1_norm_refinement", gap <= 0.02, {"gap": gap}))

    # ε tied to dx: ‖b_x‖_{p,∞} diverges like dx^{-(1-α-1/p)} once (1-α)p > 1
    alpha, p = 0.1, 10.0
    norms = []
    for n in (1000, 10000):
        g = Grid(10.0, n)
        norms.append(drift_norm(blowup_drift_con2(alpha, 4.0, g.dx, 3.0, p, strict=False), g, p, derivative=True))
    growth = norms[1] / norms[0]
    expected = 10.0 ** ((1.0 - alpha) - 1.0 / p)
    out.append(CheckResult("drifts", "con2_derivative_sharpness", growth >= 0.5 * expected, {"growth": growth}))
    return out


_SUITE_FUNCS: Dict[str, Callable[[int], List[CheckResult]]] = {
    "lorentz": _lorentz_checks,
    "heat": _heat_checks,
    "solver": _solver_checks,
    "selfsim": _selfsim_checks,
    "drifts": _drift_checks,
}


def verify(suite: str = "all", seed: Optional[int] = None) -> VerifyReport:
    """Run one suite (or ``all``) and collect the results.

    Raises:
        ConfigError: unknown suite name.
    """
    seed = settings.seed if seed is None else seed
    names: Sequence[str] = SUITES if suite == "all" else (suite,)
    unknown = [n for n in names if n not in _SUITE_FUNCS]
    if unknown:
        raise ConfigError(f"unknown suite {unknown[0]!r}, expected one of {SUITES + ('all',)}")
    report = VerifyReport(seed=seed)
    for name in names:
        try:
            results = _SUITE_FUNCS[name](seed)
        except DriftLabError as exc:
            logger.error(f"Suite {name} aborted: {exc}")
            results = [CheckResult(name, "suite", False, {"error": str(exc)})]
        report.results.extend(results)
        failed = [r.name for r in results if not r.passed]
        logger.info(f"verify {name}: {len(results) - len(failed)}/{len(results)} passed")
        for check in failed:
            logger.warning(f"verify {name}: {check} FAILED")
    return report
