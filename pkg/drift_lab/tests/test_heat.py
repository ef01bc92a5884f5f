"""Tests for the heat kernel, convolution and the Duhamel/Picard solver."""

import math

import numpy as np
import pytest

from drift_lab.errors import ConfigError, ContractionError
from drift_lab.numerics.drift_lib import constant_drift, tanh_drift
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.heat import (
    Trajectory,
    cell_kernel,
    convolve,
    duhamel_apply,
    gaussian,
    heat_kernel,
    kernel_gradient_scaling,
    moment_growth_check,
    picard_solve,
)


class TestKernel:
    """Tests for the sampled heat kernel."""

    def test_unit_mass(self):
        sample = heat_kernel(0.5, Grid(20.0, 401))
        assert sample.values.integral() == pytest.approx(1.0, abs=1e-10)
        assert abs(sample.tail_mass) < 1e-10

    def test_derivative_is_odd(self):
        sample = heat_kernel(0.5, Grid(20.0, 401), derivative=True)
        np.testing.assert_allclose(sample.values.values, -sample.values.values[::-1], atol=1e-15)

    def test_nonpositive_time_rejected(self):
        with pytest.raises(ConfigError):
            heat_kernel(0.0, Grid(1.0, 11))

    @pytest.mark.parametrize("tau", [0.0, 1e-5, 0.5])
    def test_cell_kernel_weights(self, tau):
        """Weights sum to one for G and to zero for G_x, resolved or not."""
        grid = Grid(10.0, 201)
        assert np.sum(cell_kernel(tau, grid, derivative=False)) == pytest.approx(1.0, abs=1e-9)
        assert np.sum(cell_kernel(tau, grid, derivative=True)) == pytest.approx(0.0, abs=1e-9)

    def test_cell_kernel_negative_time(self):
        with pytest.raises(ConfigError):
            cell_kernel(-1.0, Grid(1.0, 11), derivative=False)


class TestConvolve:
    """Tests for grid convolution."""

    def test_semigroup(self):
        """G(t) ⋆ G(s) = G(t + s)."""
        grid = Grid(40.0, 4001)
        lhs = convolve(heat_kernel(0.1, grid).values, heat_kernel(0.3, grid).values)
        rhs = heat_kernel(0.4, grid).values
        assert np.max(np.abs(lhs.values - rhs.values)) < 1e-8

    def test_direct_and_fft_agree(self):
        grid = Grid(10.0, 201)
        f = Field(grid, np.exp(-grid.centers**2))
        g = Field(grid, (np.abs(grid.centers) < 1.0).astype(float))
        direct = convolve(f, g)
        fast = convolve(f, g, method="fft")
        np.testing.assert_allclose(direct.values, fast.values, atol=1e-10)

    def test_even_cell_count_stays_centered(self):
        """On an even grid the result is still a symmetric Gaussian of the summed time."""
        grid = Grid(20.0, 400)
        out = convolve(heat_kernel(0.5, grid).values, heat_kernel(0.5, grid).values)
        np.testing.assert_allclose(out.values, out.values[::-1], atol=1e-12)
        assert out.integral() == pytest.approx(1.0, abs=1e-6)

    def test_unknown_method(self):
        grid = Grid(1.0, 11)
        with pytest.raises(ConfigError):
            convolve(grid.zeros(), grid.zeros(), method="spectral")

    def test_spacing_mismatch(self):
        with pytest.raises(ConfigError):
            convolve(Grid(1.0, 11).zeros(), Grid(1.0, 21).zeros())


class TestGradientScaling:
    """‖G_x(t)‖_{p,1} scales like t^{1/(2p) − 1}."""

    def test_slope_p2(self):
        slope = kernel_gradient_scaling(2.0, np.logspace(-2, 0, 5))
        assert slope == pytest.approx(1.0 / 4.0 - 1.0, abs=0.05)

    def test_too_few_times(self):
        with pytest.raises(ConfigError):
            kernel_gradient_scaling(2.0, [0.01, 1.0])

    def test_short_span(self):
        with pytest.raises(ConfigError):
            kernel_gradient_scaling(2.0, [0.1, 0.2, 0.5])


class TestTrajectory:
    def test_linear_interpolation(self):
        grid = Grid(1.0, 4)
        traj = Trajectory(grid, np.array([0.0, 1.0]), np.vstack([np.zeros(4), np.ones(4)]))
        np.testing.assert_allclose(traj.at(0.25), 0.25)
        np.testing.assert_allclose(traj.at(5.0), 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            Trajectory(Grid(1.0, 4), np.array([0.0, 1.0]), np.zeros((2, 5)))

    def test_times_must_increase(self):
        with pytest.raises(ConfigError):
            Trajectory(Grid(1.0, 4), np.array([1.0, 0.0]), np.zeros((2, 4)))


class TestDuhamel:
    """Tests for the Duhamel map."""

    def test_pure_heat_matches_exact_solution(self):
        grid = Grid(20.0, 401)
        u0 = Field(grid, gaussian(1.0, grid.centers))
        traj = Trajectory.constant(u0, np.linspace(0.0, 0.5, 3))
        out = duhamel_apply(traj, constant_drift(0.0), 1.0, 0.5)
        np.testing.assert_allclose(out.field.values, gaussian(1.5, grid.centers), atol=1e-8)

    def test_time_outside_window(self):
        grid = Grid(5.0, 51)
        traj = Trajectory.constant(grid.zeros(), np.linspace(0.0, 0.1, 3))
        with pytest.raises(ConfigError):
            duhamel_apply(traj, constant_drift(0.0), 1.0, 0.2)


class TestPicard:
    """Tests for the fixed-point iteration."""

    @pytest.fixture
    def u0(self):
        grid = Grid(8.0, 161)
        return Field(grid, np.exp(-(grid.centers**2)))

    def test_zero_drift_converges_in_one_step(self, u0):
        state = picard_solve(u0, constant_drift(0.0), 1.0, 0.05, n_times=3)
        assert state.converged
        assert state.iterations == 1

    def test_bounded_drift_contracts(self, u0):
        state = picard_solve(u0, tanh_drift(-1.0, 1.0), 1.0, 0.01, n_times=5, p=math.inf)
        assert state.converged
        assert all(r < 1.0 for r in state.contraction_estimates)
        again = duhamel_apply(state.solution, tanh_drift(-1.0, 1.0), 1.0, 0.01).field
        assert np.max(np.abs(again.values - state.solution.values[-1])) < 1e-6

    def test_con2_distance(self, u0):
        state = picard_solve(u0, tanh_drift(-1.0, 1.0), 1.0, 0.01, n_times=5, case="con2")
        assert state.converged

    def test_contraction_improves_as_window_shrinks(self, u0):
        worst = []
        for t_bar in (0.04, 0.02, 0.01):
            state = picard_solve(u0, tanh_drift(-1.0, 1.0), 1.0, t_bar, n_times=5, p=math.inf)
            assert state.converged
            worst.append(max(state.contraction_estimates))
        assert worst[0] < 1.0
        assert worst[0] >= worst[1] >= worst[2]

    def test_expanding_map_is_rejected(self, u0):
        with pytest.raises(ContractionError, match="does not contract") as excinfo:
            picard_solve(u0, tanh_drift(-20.0, 1.0), 1.0, 0.5, n_times=5, p=math.inf, radius=1e6)
        assert excinfo.value.snapshot["ratio"] >= 1.0

    def test_leaving_the_ball(self, u0):
        with pytest.raises(ContractionError) as excinfo:
            picard_solve(u0, constant_drift(0.0), 1.0, 0.05, radius=0.5)
        assert "retry" in str(excinfo.value)

    @pytest.mark.parametrize("kwargs", [{"t_bar": 0.0}, {"t_bar": 0.1, "case": "con3"}])
    def test_invalid_inputs(self, u0, kwargs):
        with pytest.raises(ConfigError):
            picard_solve(u0, constant_drift(0.0), 1.0, **kwargs)


class TestMomentGrowth:
    def test_pure_heat_has_no_excess(self):
        """∫(1 + x²)u grows exactly by 2 t m under the heat flow."""
        grid = Grid(30.0, 601)
        times = np.array([0.0, 0.5, 1.0])
        values = np.vstack([gaussian(1.0 + t, grid.centers) for t in times])
        report = moment_growth_check(Trajectory(grid, times, values), constant_drift(0.0), 1.0, 1.0)
        assert abs(report.heat_excess) < 1e-8
        assert report.weighted_moments[-1] == pytest.approx(1.0 + 2.0 * 2.0, rel=1e-8)
