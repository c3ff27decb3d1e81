"""Finite support grids and dense probability tables.

Everything downstream works on a product grid of integer coordinates: count
coordinates live on {0..max_value}, binary ones on {0, 1}. Joint tables are
dense vectors in row-major flat order (first coordinate slowest), which keeps
marginal/conditional operations to plain reshapes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError

PMF_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Count:
    """Count coordinate with values {0, 1, ..., max_value}."""

    max_value: int

    @property
    def size(self) -> int:
        return self.max_value + 1


@dataclass(frozen=True)
class Binary:
    """Binary coordinate with values {0, 1}."""

    @property
    def size(self) -> int:
        return 2


Coordinate = Count | Binary


@dataclass(frozen=True)
class SupportGrid:
    """Product grid over a tuple of coordinates.

    Flat indexing is row-major: the first coordinate varies slowest. For a
    [Count(2), Binary] grid the flat order is (0,0),(0,1),(1,0),(1,1),(2,0),
    (2,1).
    """

    coordinates: tuple[Coordinate, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.size for c in self.coordinates)

    @property
    def size(self) -> int:
        return int(np.prod([c.size for c in self.coordinates], dtype=np.int64))

    @property
    def arity(self) -> int:
        return len(self.coordinates)

    def flat_index(self, point: Sequence[int]) -> int:
        if len(point) != self.arity:
            raise ValueError(
                f"point has {len(point)} coordinates, grid has {self.arity}"
            )
        flat = 0
        for value, coord in zip(point, self.coordinates):
            v = int(value)
            if v < 0 or v >= coord.size:
                raise ValueError(f"value {v} outside coordinate range {coord}")
            flat = flat * coord.size + v
        return flat

    def flat_indices(self, points: np.ndarray) -> np.ndarray:
        """Vectorized flat_index for an (n, arity) integer array."""
        points = np.asarray(points, dtype=np.int64)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[1] != self.arity:
            raise ValueError("point array arity mismatch")
        for j, coord in enumerate(self.coordinates):
            col = points[:, j]
            if col.min(initial=0) < 0 or col.max(initial=0) >= coord.size:
                raise ValueError(f"coordinate {j} has out-of-range values")
        return np.ravel_multi_index(tuple(points.T), self.shape).astype(np.int64)

    def point_at(self, flat: int) -> tuple[int, ...]:
        if flat < 0 or flat >= self.size:
            raise ValueError(f"flat index {flat} outside grid of size {self.size}")
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    def coordinate_values(self, axis: int) -> np.ndarray:
        return np.arange(self.coordinates[axis].size, dtype=np.int64)


def make_grid(coordinates: Iterable[Coordinate]) -> SupportGrid:
    coords = tuple(coordinates)
    if not coords:
        raise ConfigurationError("grid needs at least one coordinate")
    for c in coords:
        if isinstance(c, Count):
            if c.max_value < 0:
                raise ConfigurationError(f"count max_value must be >= 0, got {c.max_value}")
        elif not isinstance(c, Binary):
            raise ConfigurationError(f"unknown coordinate type: {c!r}")
    return SupportGrid(coords)


class Pmf:
    """Dense pmf over a grid; validated and renormalized at construction.

    The incoming vector must already sum to 1 within PMF_SUM_TOL; the stored
    vector is divided by its sum to absorb float drift and marked read-only.
    """

    __slots__ = ("grid", "probs")

    def __init__(self, grid: SupportGrid, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if probs.shape[0] != grid.size:
            raise ValueError(
                f"pmf length {probs.shape[0]} does not match grid size {grid.size}"
            )
        if not np.all(np.isfinite(probs)):
            raise ValueError("pmf entries must be finite")
        if probs.min(initial=0.0) < 0.0:
            raise ValueError("pmf entries must be nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > PMF_SUM_TOL:
            raise ValueError(f"pmf sums to {total}, outside 1 +/- {PMF_SUM_TOL}")
        probs = probs / total
        probs.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "probs", probs)

    def __setattr__(self, name, value):
        raise AttributeError("Pmf is immutable")

    def as_table(self) -> np.ndarray:
        """Read-only view shaped like the grid."""
        return self.probs.reshape(self.grid.shape)

    def __repr__(self) -> str:
        return f"Pmf(size={self.grid.size})"


@dataclass(frozen=True)
class Functional:
    """Real-valued function on the grid, stored as its value vector."""

    grid: SupportGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.grid.size:
            raise ValueError("functional length does not match grid size")
        if not np.all(np.isfinite(values)):
            raise ValueError("functional values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class EventSet:
    """H events as an H x size 0/1 indicator matrix."""

    grid: SupportGrid
    indicators: np.ndarray

    def __post_init__(self):
        ind = np.asarray(self.indicators, dtype=np.float64)
        if ind.ndim == 1:
            ind = ind[None, :]
        if ind.shape[0] < 1 or ind.shape[1] != self.grid.size:
            raise ValueError("indicator matrix must be H x grid.size with H >= 1")
        if not np.all((ind == 0.0) | (ind == 1.0)):
            raise ValueError("indicators must be 0/1")
        ind.flags.writeable = False
        object.__setattr__(self, "indicators", ind)

    @property
    def count(self) -> int:
        return self.indicators.shape[0]


def pmf_uniform(grid: SupportGrid) -> Pmf:
    return Pmf(grid, np.full(grid.size, 1.0 / grid.size))


def functional_mean(pmf: Pmf, f: Functional) -> float:
    if f.grid != pmf.grid:
        raise ValueError("functional and pmf live on different grids")
    return float(pmf.probs @ f.values)


def coordinate_functional(grid: SupportGrid, axis: int) -> Functional:
    """f(y) = y[axis], the projection onto one coordinate."""
    if not 0 <= axis < grid.arity:
        raise ValueError(f"axis {axis} out of range for arity {grid.arity}")
    values = np.indices(grid.shape)[axis].ravel().astype(np.float64)
    return Functional(grid, values)


def marginal(pmf: Pmf, keep: Sequence[int]) -> Pmf:
    """Marginal over the kept coordinates (original relative order)."""
    keep = tuple(keep)
    arity = pmf.grid.arity
    if len(set(keep)) != len(keep) or not keep:
        raise ValueError("keep must be a nonempty set of distinct axes")
    if any(k < 0 or k >= arity for k in keep):
        raise ValueError("keep axis out of range")
    if sorted(keep) != list(keep):
        raise ValueError("keep must preserve the original coordinate order")
    drop = tuple(ax for ax in range(arity) if ax not in keep)
    table = pmf.as_table()
    if drop:
        table = table.sum(axis=drop)
    sub = make_grid(pmf.grid.coordinates[k] for k in keep)
    return Pmf(sub, table.reshape(-1))


def conditional(pmf: Pmf, fixed: Mapping[int, int]) -> Pmf:
    """Condition on exact values of some coordinates; renormalizes the slice.

    Raises NumericalError when the conditioning slice carries zero mass, so a
    silent NaN can never escape.
    """
    arity = pmf.grid.arity
    if not fixed:
        raise ValueError("fixed must name at least one coordinate")
    index: list = [slice(None)] * arity
    for axis, value in fixed.items():
        if axis < 0 or axis >= arity:
            raise ValueError(f"axis {axis} out of range")
        coord = pmf.grid.coordinates[axis]
        if value < 0 or value >= coord.size:
            raise ValueError(f"value {value} outside coordinate {axis} range")
        index[axis] = int(value)
    free = [ax for ax in range(arity) if ax not in fixed]
    slab = pmf.as_table()[tuple(index)]
    mass = float(slab.sum()) if free else float(slab)
    if mass <= 0.0:
        raise NumericalError(f"conditioning slice {dict(fixed)} has zero mass")
    if not free:
        degenerate = make_grid([Count(0)])
        return Pmf(degenerate, np.array([1.0]))
    sub = make_grid(pmf.grid.coordinates[ax] for ax in free)
    return Pmf(sub, np.asarray(slab, dtype=np.float64).reshape(-1) / mass)


def hellinger(p: Pmf, q: Pmf) -> float:
    """Hellinger distance sqrt(1 - Bhattacharyya coefficient), in [0, 1]."""
    if p.grid != q.grid:
        raise ValueError("pmfs live on different grids")
    bc = float(np.sqrt(p.probs * q.probs).sum())
    return float(np.sqrt(max(0.0, 1.0 - min(bc, 1.0))))
