"""Shared fixtures and independent oracles for the test suite.

The stencil oracles here are deliberately written as plain Python loops over
``np.roll`` shifts with the coefficient tables restated from scratch, so the
vectorized operators in the package are checked against an implementation
that shares no code with them.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from chfd import Field, GridSpec


# ---------------------------------------------------------------------------
# brute-force stencil oracles


def brute_d1_long(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Five-point first derivative, written as an explicit shift sum."""
    out = np.zeros_like(values)
    for shift, coeff in ((2, -1.0), (1, 8.0), (-1, -8.0), (-2, 1.0)):
        # np.roll(a, -s) brings a[i+s] to position i
        out += coeff * np.roll(values, -shift, axis=axis)
    return out / (12.0 * h)


def brute_d2_long(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    out = np.zeros_like(values)
    for shift, coeff in ((2, -1.0), (1, 16.0), (0, -30.0), (-1, 16.0), (-2, -1.0)):
        out += coeff * np.roll(values, -shift, axis=axis)
    return out / (12.0 * h * h)


def brute_d2_std(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    out = np.zeros_like(values)
    for shift, coeff in ((1, 1.0), (0, -2.0), (-1, 1.0)):
        out += coeff * np.roll(values, -shift, axis=axis)
    return out / (h * h)


def brute_laplace_long(values: np.ndarray, h: float) -> np.ndarray:
    return sum(brute_d2_long(values, h, axis) for axis in range(values.ndim))


def brute_laplace_std(values: np.ndarray, h: float) -> np.ndarray:
    return sum(brute_d2_std(values, h, axis) for axis in range(values.ndim))


def brute_inner(a: np.ndarray, b: np.ndarray, h: float) -> float:
    """Cell-centered inner product via compensated summation."""
    return h ** a.ndim * math.fsum((a * b).ravel().tolist())


# ---------------------------------------------------------------------------
# field builders


def random_values(shape, seed: int, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal(shape)


def random_field(grid: GridSpec, seed: int, scale: float = 1.0) -> Field:
    return Field(grid, random_values(grid.shape, seed, scale))


def trig_field(grid: GridSpec, kx: int, ky: int, phase: float = 0.0) -> Field:
    """Single periodic mode sin(2 pi kx x / L + phase) * cos(2 pi ky y / L)."""
    a = 2.0 * np.pi / grid.L
    x = grid.cell_centers()
    return Field(
        grid,
        np.sin(a * kx * x + phase)[:, None] * np.cos(a * ky * x)[None, :],
    )


@pytest.fixture
def grid32() -> GridSpec:
    return GridSpec(L=3.2, m=32)


@pytest.fixture
def grid16() -> GridSpec:
    return GridSpec(L=2.0, m=16)
