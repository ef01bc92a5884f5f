"""Long runs: stationarity, critical decay, blow-up and the small-mass exception."""

import math

import numpy as np
import pytest

from drift_lab.numerics.drift_lib import blowup_drift_con2, constant_drift, stationary_pair_con1, tanh_drift
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.pde_solver import Classification, RunConfig, flux_moment, moment_ode_envelope, solve
from drift_lab.numerics.selfsim import (
    admissible_level,
    decay_fit_physical,
    entropy_budget,
    entropy_series,
    eta,
    frames_from_snapshots,
    l2_decay_fit,
    margin_holds,
    matched_y_grid,
    rescaled_drift_norm,
    t_of,
    tail_schedule,
    tau_of,
    to_selfsim,
)

pytestmark = pytest.mark.timeout(600)

# rescaling schedule for the critical con1 cell: T = e^{τ̄}, frames on [τ̄, τ̄ + 4]
TAU_BAR = 1.0
T_REF, TAUS = tail_schedule(TAU_BAR, 4.0, 0.1)
Y_GRID = Grid(90.0, 3601)
LEVELS = (0.05, 0.1, 0.2, 0.4, 0.8)


def _gaussian(grid: Grid, sigma: float, mass: float = 1.0) -> Field:
    values = np.exp(-0.5 * (grid.centers / sigma) ** 2)
    return Field(grid, mass * values / (np.sum(values) * grid.dx))


@pytest.fixture(scope="module")
def critical_con1():
    grid = Grid(100.0, 2000)
    cfg = RunConfig(
        k=1.0,
        drift=constant_drift(-1.0),
        u0=_gaussian(grid, 1.0),
        t_max=100.0,
        snapshot_times=tuple(t_of(tau, T_REF) for tau in TAUS),
    )
    return solve(cfg)


@pytest.fixture(scope="module")
def blowup_setup():
    grid = Grid(2.0, 8000)
    drift = blowup_drift_con2(1.0, 8.0, grid.dx, 3.0, 2.0)
    return grid, drift


class TestStationary:
    """Subcritical con1 pair stays put."""

    def test_solution_stays_at_the_profile(self):
        grid = Grid(30.0, 4096)
        profile, drift = stationary_pair_con1(4.0, 0.5)
        u_s = profile(grid)
        report = solve(RunConfig(k=0.5, drift=drift, u0=u_s, t_max=10.0))
        assert report.classification is Classification.COMPLETED
        assert np.max(np.abs(report.terminal.u.values - u_s.values)) <= 1e-2
        exponent = decay_fit_physical(report, 1.0, 10.0)
        assert -0.1 < exponent <= 0.1


class TestCriticalDecay:
    """Sup norm decays like t^(-1/2) in both critical cells."""

    def test_con1_constant_drift(self, critical_con1):
        assert critical_con1.classification is Classification.COMPLETED
        assert decay_fit_physical(critical_con1, 1.0, 100.0) == pytest.approx(-0.5, abs=0.1)

    def test_con2_bounded_derivative_drift(self):
        grid = Grid(60.0, 1200)
        cfg = RunConfig(k=1.5, drift=tanh_drift(-1.0, 1.0), u0=_gaussian(grid, 1.0), t_max=100.0)
        report = solve(cfg)
        assert report.classification is Classification.COMPLETED
        assert decay_fit_physical(report, 1.0, 100.0) == pytest.approx(-0.5, abs=0.1)


class TestRescaling:
    """Self-similar identities along the critical trajectory."""

    def test_l2_identity(self, critical_con1):
        assert len(critical_con1.snapshots) == len(TAUS)
        for t, u in critical_con1.snapshots:
            frame = to_selfsim(u, t, T_REF, matched_y_grid(u.grid, t, T_REF))
            lhs = float(np.sum(frame.v.values**2) * frame.v.grid.dx)
            rhs = math.sqrt(T_REF) * math.exp(-tau_of(t, T_REF) / 2.0) * float(np.sum(u.values**2) * u.grid.dx)
            assert lhs == pytest.approx(rhs, rel=1e-3)

    @pytest.mark.parametrize(
        "drift, p, k",
        [
            (constant_drift(-1.0), math.inf, 1.0),
            (tanh_drift(-1.0, 1.0), 2.0, 1.5),
            (blowup_drift_con2(1.0, 8.0, 0.05, 3.0, 2.0), 2.0, 3.0),
        ],
    )
    def test_drift_norm_dilation_law(self, drift, p, k):
        for tau in (0.1, 0.5, 1.5):
            report = rescaled_drift_norm(drift, tau, 4.0, p, k, Grid(30.0, 1201))
            assert report.relative_error <= 1e-6

    @pytest.fixture(scope="class")
    def frames(self, critical_con1):
        return frames_from_snapshots(critical_con1.snapshots, T_REF, Y_GRID)

    def test_frames_cover_the_tail(self, frames):
        assert len(frames) == len(TAUS)
        assert frames[0].tau == pytest.approx(TAU_BAR)
        assert frames[0].scale == pytest.approx(1.0)
        assert frames[-1].tau - frames[0].tau == pytest.approx(4.0)
        # the y-window still holds the whole profile at the last frame
        edge = frames[-1].v.values[[0, -1]]
        assert np.max(edge) <= 1e-3 * frames[-1].v.sup()

    def test_entropy_dissipation_and_budget(self, critical_con1, frames):
        a_bar = admissible_level(frames, LEVELS)
        assert a_bar is not None
        assert margin_holds(entropy_series(frames, a_bar))
        mass = critical_con1.series.mass[0]
        for a in LEVELS:
            diags = entropy_series(frames, a)
            if not margin_holds(diags):
                continue
            assert all(np.all(eta(f.v.values, a) >= 0.0) for f in frames)
            assert all(d.eta_integral >= 0.0 for d in diags)
            assert entropy_budget(frames, a) <= 1.5 * a * mass * 1.05

    def test_l2_decays_at_least_at_the_critical_rate(self, frames):
        assert l2_decay_fit(frames) <= -0.4


class TestBlowUp:
    """Supercritical con2 drift with concentrated data."""

    def test_event_fires_with_decreasing_energy(self, blowup_setup):
        grid, drift = blowup_setup
        u0 = _gaussian(grid, 0.005)
        # the grid caps ‖u‖_∞ at m/dx, 25 times the initial peak
        report = solve(RunConfig(k=3.0, drift=drift, u0=u0, t_max=10.0, blowup_threshold=10.0 * u0.sup()))
        assert report.classification in (Classification.BLOW_UP, Classification.DT_COLLAPSE)
        assert report.last_resolved_time < 10.0
        assert np.all(np.diff(report.series.energy) <= 1e-12)

    def test_moment_envelope_predicts_a_hitting_time(self, blowup_setup):
        grid, drift = blowup_setup
        u0 = _gaussian(grid, 0.005)
        E0 = float(np.sum(grid.centers**2 * u0.values) * grid.dx)
        prediction = moment_ode_envelope(u0.integral(), E0, 1.0, None, 3.0, flux=flux_moment(u0, drift, 3.0))
        assert prediction.hitting_time is not None
        assert 0 < prediction.hitting_time < math.inf
        assert prediction.near_hitting_exponent() == pytest.approx(1.0 / (1.0 + prediction.gamma), abs=0.1)

    def test_small_mass_stays_global(self, blowup_setup):
        _, drift = blowup_setup
        grid = Grid(8.0, 32000)
        u0 = _gaussian(grid, 0.005, mass=1e-2)
        report = solve(RunConfig(k=3.0, drift=drift, u0=u0, t_max=10.0))
        assert report.classification is Classification.COMPLETED
        assert report.last_resolved_time == pytest.approx(10.0)
        t, sup = report.series.t, report.series.sup_norm
        assert np.max(sup) <= 1.01 * u0.sup()
        late = sup[t >= 1.0]
        assert late[-1] < late[0]
        assert np.all(np.diff(late) <= 1e-12)
