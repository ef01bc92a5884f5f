"""Tests for the IMEX solver, its diagnostics and the comparison ODE."""

import math

import numpy as np
import pytest

from drift_lab.errors import ConfigError
from drift_lab.numerics.drift_lib import constant_drift, tanh_drift
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.pde_solver import (
    SERIES_COLUMNS,
    Classification,
    OdeBranch,
    RunConfig,
    RunFlag,
    Series,
    compare_solutions,
    energy_flux_identity,
    flux_moment,
    initial_state,
    lemma_branches,
    measured_branch,
    moment_ode_envelope,
    solve,
    stable_dt,
    step,
)


def _gaussian(grid: Grid, sigma: float = 1.0, mass: float = 1.0) -> Field:
    return grid.sample(lambda x: mass * np.exp(-(x**2) / (2 * sigma**2)) / math.sqrt(2 * math.pi * sigma**2))


@pytest.fixture
def grid():
    return Grid(10.0, 401)


@pytest.fixture
def inward(grid):
    return RunConfig(k=1.0, drift=tanh_drift(-1.0), u0=_gaussian(grid), t_max=1.0)


class TestRunConfig:
    """Validation performed when a run is configured."""

    def test_defaults_filled_from_settings(self, inward):
        assert inward.grid == inward.u0.grid
        assert inward.blowup_threshold == pytest.approx(1e3 * inward.u0.sup())
        assert 0 < inward.cfl <= 1
        assert inward.dt_floor > 0
        assert inward.mass0 == pytest.approx(1.0, abs=1e-8)

    def test_snapshot_times_sorted_and_clipped(self, grid):
        cfg = RunConfig(k=1.0, drift=constant_drift(0.0), u0=_gaussian(grid), t_max=1.0, snapshot_times=(0.5, 2.0, 0.1))
        assert cfg.snapshot_times == (0.1, 0.5)

    @pytest.mark.parametrize(
        "overrides",
        [
            {"k": 0.0},
            {"t_max": 0.0},
            {"theta": 0.3},
            {"cfl": 1.5},
            {"diagnostics_stride": 0},
            {"dt_floor": -1.0},
        ],
    )
    def test_invalid_parameters_rejected(self, grid, overrides):
        kwargs = {"k": 1.0, "drift": constant_drift(0.0), "u0": _gaussian(grid), "t_max": 1.0}
        kwargs.update(overrides)
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)

    def test_negative_data_rejected(self, grid):
        with pytest.raises(ConfigError):
            RunConfig(k=1.0, drift=constant_drift(0.0), u0=_gaussian(grid).scaled(-1.0), t_max=1.0)

    def test_grid_mismatch_rejected(self, grid):
        with pytest.raises(ConfigError, match="grid"):
            RunConfig(k=1.0, drift=constant_drift(0.0), u0=_gaussian(grid), t_max=1.0, grid=Grid(5.0, 11))


class TestStep:
    """Single-step behaviour."""

    def test_zero_drift_has_no_cfl_limit(self, grid):
        cfg = RunConfig(k=1.0, drift=constant_drift(0.0), u0=_gaussian(grid), t_max=1.0)
        assert stable_dt(initial_state(cfg), cfg) == math.inf

    def test_cfl_step_is_finite_with_drift(self, inward):
        assert 0 < stable_dt(initial_state(inward), inward) < math.inf

    def test_cfl_counts_both_outgoing_faces(self):
        grid = Grid(4.0, 81)
        spike = np.zeros(grid.n_cells)
        spike[grid.n_cells // 2] = 1.0
        # b = ±2 on the two faces of the centre cell
        cfg = RunConfig(k=0.5, drift=tanh_drift(2.0, 1e-3), u0=Field(grid, spike), t_max=1.0, cfl=0.9)
        assert stable_dt(initial_state(cfg), cfg) == pytest.approx(0.9 * grid.dx / (1.5 * 4.0))

    def test_diverging_drift_needs_no_clamp(self):
        grid = Grid(4.0, 81)
        u0 = Field(grid, 50.0 * np.exp(-(grid.centers**2) / 0.02))
        cfg = RunConfig(k=0.5, drift=tanh_drift(2.0, 1e-3), u0=u0, t_max=0.05, theta=1.0)
        report = solve(cfg)
        assert report.terminal.clamped == 0.0
        assert RunFlag.POSITIVITY_CLAMP.value not in report.flags
        assert report.terminal.u.values.min() >= 0.0

    def test_nonpositive_step_rejected(self, inward):
        with pytest.raises(ConfigError):
            step(initial_state(inward), inward, dt=0.0)

    def test_step_conserves_mass(self, inward):
        state = step(initial_state(inward), inward)
        assert state.step_count == 1
        assert state.t == pytest.approx(state.dt)
        balance = state.u.integral() + state.outflow - state.clamped
        assert balance == pytest.approx(inward.mass0, abs=1e-12)


class TestSolve:
    """Whole-run behaviour of :func:`solve`."""

    def test_completes_with_mass_balance(self, inward):
        report = solve(inward)
        assert report.classification is Classification.COMPLETED
        assert not report.blew_up
        assert report.terminal.t == pytest.approx(1.0)
        assert abs(report.mass_error) < 1e-10
        assert RunFlag.DOMAIN_TOO_SMALL.value not in report.flags

    def test_solution_stays_nonnegative(self, inward):
        report = solve(inward)
        assert report.terminal.u.values.min() >= 0.0

    def test_heat_energy_grows_linearly(self):
        grid = Grid(15.0, 601)
        cfg = RunConfig(k=1.0, drift=constant_drift(0.0), u0=_gaussian(grid), t_max=1.0)
        report = solve(cfg)
        e0 = report.series.energy[0]
        m = report.series.mass[0]
        assert report.series.energy[-1] == pytest.approx(e0 + 2.0 * m, abs=1e-6)

    def test_threshold_event_is_blow_up(self, inward):
        cfg = RunConfig(k=1.0, drift=inward.drift, u0=inward.u0, t_max=1.0, blowup_threshold=0.1)
        report = solve(cfg)
        assert report.classification is Classification.BLOW_UP
        assert report.blew_up
        assert "exceeded" in report.message
        assert report.terminal.step_count == 0

    def test_step_floor_is_dt_collapse(self, inward):
        cfg = RunConfig(k=1.0, drift=inward.drift, u0=inward.u0, t_max=1.0, dt_floor=1.0)
        report = solve(cfg)
        assert report.classification is Classification.DT_COLLAPSE
        assert report.blew_up
        assert "dt_floor" in report.message

    def test_snapshots_land_on_requested_times(self, grid):
        cfg = RunConfig(
            k=1.0, drift=tanh_drift(-1.0), u0=_gaussian(grid), t_max=0.5, snapshot_times=(0.0, 0.25, 0.5)
        )
        report = solve(cfg)
        assert [t for t, _ in report.snapshots] == [0.0, 0.25, 0.5]
        np.testing.assert_array_equal(report.snapshots[0][1].values, cfg.u0.values)

    def test_series_layout(self, inward):
        report = solve(inward)
        series = report.series
        assert len(series) >= 2
        assert np.all(np.diff(series.t) > 0)
        assert series.t[-1] == report.terminal.t
        rows = list(series.rows())
        assert len(rows[0]) == len(SERIES_COLUMNS)
        np.testing.assert_array_equal(Series.from_rows(rows).sup_norm, series.sup_norm)

    def test_stride_thins_series_but_keeps_final_row(self, grid):
        dense = solve(RunConfig(k=1.0, drift=tanh_drift(-1.0), u0=_gaussian(grid), t_max=1.0))
        sparse = solve(RunConfig(k=1.0, drift=tanh_drift(-1.0), u0=_gaussian(grid), t_max=1.0, diagnostics_stride=5))
        assert len(sparse.series) < len(dense.series)
        assert sparse.series.t[-1] == pytest.approx(1.0)

    def test_outward_drift_flags_small_domain(self):
        grid = Grid(3.0, 121)
        cfg = RunConfig(k=1.0, drift=tanh_drift(5.0), u0=_gaussian(grid, sigma=0.5), t_max=2.0)
        report = solve(cfg)
        assert RunFlag.DOMAIN_TOO_SMALL.value in report.flags
        assert report.series.boundary_flux[-1] > 0.01
        assert abs(report.mass_error) < 1e-10

    def test_summary_keys(self, inward):
        summary = solve(inward).summary()
        assert summary["classification"] == "completed"
        assert summary["steps"] > 0
        assert summary["mass_initial"] == pytest.approx(1.0, abs=1e-8)


class TestEnergyIdentity:
    """Semi-discrete identity dE/dt = 2m + 2∫x b u^{k+1}."""

    def test_holds_at_initial_state(self, inward):
        balance = energy_flux_identity(initial_state(inward), inward)
        assert balance.holds
        assert balance.mass == pytest.approx(1.0, abs=1e-8)

    def test_inward_drift_dissipates(self, inward):
        balance = energy_flux_identity(initial_state(inward), inward)
        assert balance.drift_moment < 0
        assert balance.rhs < 2.0 * balance.mass

    def test_holds_along_a_run(self, inward):
        report = solve(inward)
        assert energy_flux_identity(report.terminal, inward).holds

    def test_unpacks_as_pair(self, inward):
        lhs, rhs = energy_flux_identity(initial_state(inward), inward)
        assert lhs == pytest.approx(rhs, abs=1e-6)


class TestComparison:
    """Ordered data stay ordered."""

    def test_ordered_data_stay_ordered(self, grid):
        high = _gaussian(grid)
        low = high.scaled(0.5)
        drift = tanh_drift(-1.0)
        cfg_low = RunConfig(k=1.0, drift=drift, u0=low, t_max=0.5, theta=1.0)
        cfg_high = RunConfig(k=1.0, drift=drift, u0=high, t_max=0.5, theta=1.0)
        report = compare_solutions(cfg_low, cfg_high)
        assert report.ordered
        assert report.times[-1] == pytest.approx(0.5)
        assert len(report.violations) == len(report.times)

    def test_mismatched_runs_rejected(self, grid):
        u0 = _gaussian(grid)
        with pytest.raises(ConfigError):
            compare_solutions(
                RunConfig(k=1.0, drift=constant_drift(0.0), u0=u0, t_max=0.5),
                RunConfig(k=2.0, drift=constant_drift(0.0), u0=u0, t_max=0.5),
            )
        with pytest.raises(ConfigError, match="drift"):
            compare_solutions(
                RunConfig(k=1.0, drift=constant_drift(0.0), u0=u0, t_max=0.5),
                RunConfig(k=1.0, drift=tanh_drift(-1.0), u0=u0, t_max=0.5),
            )


class TestMomentOde:
    """Comparison ODE y' = 2m − min b_i / y^γ_i."""

    def test_pure_decay_closed_form(self):
        prediction = moment_ode_envelope(0.0, 1.0, 0.0, None, 1.0, branches=[OdeBranch(2.0, 0.5)])
        assert prediction.stall_point == math.inf
        assert prediction.hitting_time == pytest.approx(1.0 / 3.0)
        assert prediction.time_to_zero(1.0) == pytest.approx(1.0 / 3.0, rel=1e-6)

    def test_near_hitting_exponent(self):
        prediction = moment_ode_envelope(1.0, 1.0, 0.0, None, 1.0, branches=[OdeBranch(10.0, 0.5)])
        assert prediction.stall_point == pytest.approx(25.0)
        assert prediction.hitting_time is not None
        assert prediction.near_hitting_exponent() == pytest.approx(1.0 / 1.5, abs=0.01)

    def test_stalls_above_stall_point(self):
        prediction = moment_ode_envelope(1.0, 30.0, 0.0, None, 1.0, branches=[OdeBranch(10.0, 0.5)])
        assert prediction.hitting_time is None
        with pytest.raises(ConfigError):
            prediction.near_hitting_exponent()

    def test_trajectory_reaches_zero(self):
        prediction = moment_ode_envelope(0.0, 1.0, 0.0, None, 1.0, branches=[OdeBranch(2.0, 0.5)])
        t, y = prediction.trajectory(points=50)
        assert t[0] == 0.0
        assert y[0] == pytest.approx(1.0)
        assert y[-1] < 1e-3
        assert t[-1] <= prediction.hitting_time * (1 + 1e-6)

    def test_lemma_branches_con1(self):
        branches = lemma_branches(1.0, 0.1, 0.5, 1.0)
        assert [br.gamma for br in branches] == pytest.approx([0.05, 0.25])
        assert all(br.coefficient > 0 for br in branches)

    def test_lemma_branches_reject_nonpositive_exponent(self):
        with pytest.raises(ConfigError):
            lemma_branches(1.0, 0.1, 0.5, 0.5)
        with pytest.raises(ConfigError):
            lemma_branches(0.0, 0.1, 0.5, 1.0)

    def test_measured_branch_matches_flux(self):
        br = measured_branch(2.0, 0.3, 0.75)
        assert br.coefficient / 2.0**br.gamma == pytest.approx(2 * 0.3)

    def test_envelope_with_measured_flux_uses_lemma_gamma(self):
        prediction = moment_ode_envelope(1.0, 1.0, 0.1, 0.5, 1.0, flux=0.5)
        assert len(prediction.branches) == 1
        assert prediction.gamma == pytest.approx(0.05)

    def test_nonpositive_start_rejected(self):
        with pytest.raises(ConfigError):
            moment_ode_envelope(1.0, 0.0, 0.1, 0.5, 1.0)

    def test_flux_moment_of_flat_profile(self):
        grid = Grid(1.0, 1000)
        u = Field(grid, np.ones(grid.n_cells))
        assert flux_moment(u, constant_drift(1.0), 1.0) == pytest.approx(1.0, abs=1e-12)
        assert flux_moment(u, constant_drift(0.0), 1.0) == 0.0
