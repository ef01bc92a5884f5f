"""Heat-flow convergence and Picard cross-validation against the solver."""

import math

import numpy as np
import pytest

from drift_lab.numerics.drift_lib import constant_drift, tanh_drift
from drift_lab.numerics.grid import Field, Grid
from drift_lab.numerics.heat import picard_solve
from drift_lab.numerics.pde_solver import Classification, RunConfig, solve

pytestmark = pytest.mark.timeout(120)


def _heat(t: float, x: np.ndarray) -> np.ndarray:
    return np.exp(-(x**2) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


class TestHeatOrder:
    """Zero drift against the exact Gaussian."""

    T0 = 1.0
    T_MAX = 1.0

    def _l1_error(self, n_cells: int):
        grid = Grid(20.0, n_cells)
        cfg = RunConfig(
            k=1.0,
            drift=constant_drift(0.0),
            u0=Field(grid, _heat(self.T0, grid.centers)),
            t_max=self.T_MAX,
            dt_max=grid.dx,
        )
        report = solve(cfg)
        assert report.classification is Classification.COMPLETED
        exact = _heat(self.T0 + self.T_MAX, grid.centers)
        return float(np.sum(np.abs(report.terminal.u.values - exact)) * grid.dx), report, cfg

    def test_second_order_and_mass(self):
        errors = []
        for n_cells in (400, 800, 1600):
            error, report, cfg = self._l1_error(n_cells)
            errors.append(error)
            assert abs(report.mass_error) / cfg.mass0 <= 1e-8
        orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
        assert min(orders) >= 1.8, orders


class TestPicardAgainstSolver:
    """The Picard limit and the PDE solver agree at t_bar."""

    def test_agreement(self):
        grid = Grid(8.0, 161)
        u0 = Field(grid, np.exp(-(grid.centers**2)))
        drift = tanh_drift(-1.0, 1.0)
        t_bar = 0.01
        state = picard_solve(u0, drift, 1.0, t_bar, p=math.inf)
        assert state.converged
        assert all(r < 1 for r in state.contraction_estimates)

        report = solve(RunConfig(k=1.0, drift=drift, u0=u0, t_max=t_bar))
        picard = state.solution.values[-1]
        solver = report.terminal.u.values
        assert np.max(np.abs(picard - solver)) / np.max(np.abs(solver)) <= 5e-2
