"""Periodic cell-centered grids and the discrete inner products built on them.

A square domain of side ``L`` is split into ``m`` cells per axis; unknowns
live at the cell centers ``x_i = (i - 1/2) h`` with ``h = L / m``.  All
integrals are plain midpoint quadrature, so the L2 pairing is
``(f, g) = h^dim * sum(f * g)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "Field",
    "GridMismatchError",
    "field_from_fn",
    "zeros",
    "full",
    "mean",
    "inner_l2",
    "norm_l2",
    "norm_lp",
    "norm_linf",
]


class GridMismatchError(ValueError):
    """Raised when two fields from different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: ``m`` cells per axis on ``[0, L]^dim``."""

    L: float
    m: int
    dim: int = 2

    def __post_init__(self) -> None:
        if self.L <= 0:
            raise ValueError(f"domain size must be positive, got L={self.L}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not isinstance(self.m, int) or self.m < 2:
            raise ValueError(f"need at least 2 cells per axis, got m={self.m}")

    @property
    def h(self) -> float:
        return self.L / self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.dim

    @property
    def volume(self) -> float:
        return self.L**self.dim

    def cell_centers(self) -> np.ndarray:
        """Coordinates ``(i + 1/2) h`` along one axis (same for every axis)."""
        return (np.arange(self.m) + 0.5) * self.h


@dataclass
class Field:
    """Grid function: ``values[i]`` in 1-D, ``values[i, j]`` ~ ``(x_i, y_j)`` in 2-D."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid shape {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def _check_same_grid(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(f"grids differ: {f.grid} vs {g.grid}")


def zeros(grid: GridSpec) -> Field:
    return Field(grid, np.zeros(grid.shape))


def full(grid: GridSpec, value: float) -> Field:
    return Field(grid, np.full(grid.shape, float(value)))


def field_from_fn(
    grid: GridSpec,
    fn: Callable[..., np.ndarray],
    shift: Sequence[float] | None = None,
) -> Field:
    """Sample ``fn`` at the cell centers.

    ``fn`` takes one coordinate array per axis (broadcast against each other in
    2-D) and must vectorize.  ``shift`` optionally offsets the sample points by
    a physical length per axis.
    """
    if shift is None:
        shift = (0.0,) * grid.dim
    if len(shift) != grid.dim:
        raise ValueError(f"shift needs {grid.dim} entries, got {len(shift)}")
    x = grid.cell_centers()
    if grid.dim == 1:
        vals = fn(x + shift[0])
    else:
        vals = fn(x[:, None] + shift[0], x[None, :] + shift[1])
    return Field(grid, np.broadcast_to(vals, grid.shape).astype(np.float64, copy=True))


def mean(f: Field) -> float:
    """Domain average ``h^dim / L^dim * sum(values)`` (= plain average)."""
    return float(np.sum(f.values) / f.values.size)


def inner_l2(f: Field, g: Field) -> float:
    """Midpoint-quadrature L2 pairing ``h^dim * sum(f * g)``."""
    _check_same_grid(f, g)
    return float(f.grid.h**f.grid.dim * np.sum(f.values * g.values))


def norm_l2(f: Field) -> float:
    return float(np.sqrt(f.grid.h**f.grid.dim * np.sum(f.values**2)))


def norm_lp(f: Field, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((f.grid.h**f.grid.dim * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def norm_linf(f: Field) -> float:
    return float(np.max(np.abs(f.values)))
