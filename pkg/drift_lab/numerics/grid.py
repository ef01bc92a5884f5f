"""Uniform 1D grids and cell-averaged fields."""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from drift_lab.errors import ConfigError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of ``n_cells`` cells on ``[-half_width, half_width]``."""

    half_width: float
    n_cells: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise ConfigError(f"half_width must be positive, got {self.half_width}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ConfigError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        # symmetric construction so that centers[i] == -centers[-1 - i] exactly
        idx = np.arange(self.n_cells, dtype=float) - (self.n_cells - 1) / 2.0
        return idx * self.dx

    @cached_property
    def faces(self) -> np.ndarray:
        idx = np.arange(self.n_cells + 1, dtype=float) - self.n_cells / 2.0
        return idx * self.dx

    @property
    def widths(self) -> np.ndarray:
        return np.full(self.n_cells, self.dx)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n_cells))

    def sample(self, fn: Callable[[np.ndarray], ArrayLike]) -> "Field":
        """Evaluate ``fn`` at the cell centers."""
        values = np.broadcast_to(np.asarray(fn(self.centers), dtype=float), (self.n_cells,))
        return Field(self, np.array(values, dtype=float))

    def dilated(self, factor: float) -> "Grid":
        """Grid with the same cell count and ``factor`` times the extent."""
        return Grid(self.half_width * factor, self.n_cells)


@dataclass(frozen=True)
class Field:
    """Cell-averaged real function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise ConfigError(f"field has shape {values.shape}, grid expects ({self.grid.n_cells},)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)

    def mass(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.dx)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def scaled(self, factor: float) -> "Field":
        return Field(self.grid, self.values * factor)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def gradient(self) -> "Field":
        """Centered differences, one-sided at the two boundary cells."""
        return Field(self.grid, np.gradient(self.values, self.grid.dx, edge_order=1))
