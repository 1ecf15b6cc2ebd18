"""Periodic grids, the unitary discrete Fourier pair, and the Field container.

The box [-L/2, L/2)^d stands in for R^d. Transforms are scaled so that

    u_hat(k) = (2 pi)^{-d/2} sum_j u(x_j) exp(-i k.x_j) dV

which makes discrete Plancherel hold with quadrature weights dV = (L/N)^d in
physical space and dK = (2 pi / L)^d in spectral space. Spectral arrays are
kept in FFT-natural order.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as sfft


class Space(str, enum.Enum):
    PHYSICAL = "physical"
    SPECTRAL = "spectral"


def fft_workers() -> int:
    """Thread cap for the FFT backend, read from ``NLS_LAB_THREADS``."""
    raw = os.environ.get("NLS_LAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2)^d with N points per axis."""

    dim: int
    points_per_axis: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.points_per_axis
        if n % 2 != 0:
            raise ValueError(f"points_per_axis must be even, got {n}")
        if n < 4 or n & (n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 4, got {n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def dx(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def dk(self) -> float:
        return 2 * np.pi / self.box_length

    @property
    def spectral_cell_volume(self) -> float:
        return self.dk**self.dim

    @cached_property
    def nodes_1d(self) -> np.ndarray:
        return -self.box_length / 2 + self.dx * np.arange(self.points_per_axis)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers 2 pi m / L, m = -N/2 .. N/2-1, ascending."""
        n = self.points_per_axis
        return self.dk * np.arange(-n // 2, n // 2, dtype=float)

    @cached_property
    def k_natural(self) -> np.ndarray:
        """Per-axis wavenumbers in FFT-natural order."""
        n = self.points_per_axis
        return self.dk * np.fft.fftfreq(n, d=1.0 / n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.nodes_1d] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def kvecs(self) -> tuple[np.ndarray, ...]:
        """Sparse broadcastable wavevector components, FFT-natural order."""
        return tuple(np.meshgrid(*([self.k_natural] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the full spectral array, FFT-natural order."""
        out = np.zeros(self.shape)
        for kc in self.kvecs:
            out = out + kc**2
        return out

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(i k L/2) = (-1)^m accounts for the nodes starting at -L/2
        n = self.points_per_axis
        m = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        s = np.where(m % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for ax in range(self.dim):
            shp = [1] * self.dim
            shp[ax] = n
            out = out * s.reshape(shp)
        return out

    @property
    def _scale(self) -> float:
        return self.cell_volume / (2 * np.pi) ** (self.dim / 2)


def make_grid(dim: int, points_per_axis: int, box_length: float) -> Grid:
    return Grid(int(dim), int(points_per_axis), float(box_length))


@dataclass(frozen=True)
class Field:
    """Complex samples of a function on a grid, in physical or spectral space.

    ``values`` has shape ``grid.shape`` (row-major, N^d entries) and is made
    read-only on construction.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)
    space: Space = Space.PHYSICAL

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        vals = vals.reshape(self.grid.shape)
        if vals.flags.writeable:
            vals = vals.view()
            vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "space", Space(self.space))

    def with_values(self, values: np.ndarray) -> Field:
        return Field(self.grid, values, self.space)

    def require(self, space: Space) -> None:
        if self.space is not space:
            raise ValueError(f"expected a {space.value} field, got {self.space.value}")


def fft(u: Field) -> Field:
    u.require(Space.PHYSICAL)
    g = u.grid
    vals = sfft.fftn(u.values, workers=fft_workers())
    return Field(g, vals * (g._phase * g._scale), Space.SPECTRAL)


def ifft(u: Field) -> Field:
    u.require(Space.SPECTRAL)
    g = u.grid
    vals = sfft.ifftn(u.values * (g._phase / g._scale), workers=fft_workers())
    return Field(g, vals, Space.PHYSICAL)


def sample(grid: Grid, f: Callable[..., np.ndarray | complex]) -> Field:
    """Evaluate ``f(x1, ..., xd)`` on the grid nodes (broadcast call)."""
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(f(*grid.coords), dtype=np.complex128), grid.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        node = tuple(float(grid.nodes_1d[i]) for i in idx)
        raise ValueError(f"non-finite sample at node index {idx}, x = {node}")
    return Field(grid, vals.copy())


def spectral_multiply(u: Field, multiplier: np.ndarray) -> Field:
    """Apply a Fourier multiplier (FFT-natural order) to a physical field."""
    uh = fft(u)
    return ifft(uh.with_values(uh.values * multiplier))


def laplacian(u: Field) -> Field:
    return spectral_multiply(u, -u.grid.k2)
