"""Base proposal kernels and their Metropolis-Hastings adjustment.

A base kernel k_*(.|center) factorizes over grid coordinates. The adjusted
row reweights each off-center proposal by the acceptance probability

    gamma(y | c) = min{1, p(y) k_*(c|y) / (p(c) k_*(y|c))}

and returns all rejected mass (including proposal mass that fell off the
finite grid) to the center. By construction the adjusted row k(.|c) satisfies
detailed balance k(z|y) p(y) = k(y|z) p(z) exactly, which is what makes the
one-step predictive update a martingale.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, NumericalError
from .grids import Binary, Coordinate, Count, Pmf, SupportGrid, EventSet


@dataclass(frozen=True)
class UniformWindow:
    """Uniform proposal over {c-m, ..., c+m}; window points outside the grid
    keep their 1/(2m+1) weight as off-grid mass."""

    m: int

    def __post_init__(self):
        if self.m < 0:
            raise ConfigurationError(f"window half-width must be >= 0, got {self.m}")

    @property
    def bandwidth(self) -> float:
        return float(self.m)


@dataclass(frozen=True)
class RoundedGaussian:
    """Gaussian mass of the unit cell (y-1/2, y+1/2], normalized over the
    coordinate range."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be > 0, got {self.sigma}")

    @property
    def bandwidth(self) -> float:
        return float(self.sigma)


@dataclass(frozen=True)
class BinaryFlip:
    """Binary proposal |c - delta|^y (1 - |c - delta|)^(1-y): keeps the
    center with probability 1 - delta, flips with probability delta."""

    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 0.5:
            raise ConfigurationError(f"delta must lie in [0, 0.5], got {self.delta}")

    @property
    def bandwidth(self) -> float:
        return float(self.delta)


@dataclass(frozen=True)
class PointMass:
    """Degenerate proposal at the center; turns the update into the DP one."""

    @property
    def bandwidth(self) -> float:
        return 0.0


KernelComponent = UniformWindow | RoundedGaussian | BinaryFlip | PointMass


@dataclass(frozen=True)
class BaseKernelSpec:
    """One component per grid coordinate; the joint proposal is the product."""

    components: tuple[KernelComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise ConfigurationError("kernel spec needs at least one component")

    def validate_for(self, grid: SupportGrid) -> None:
        if len(self.components) != grid.arity:
            raise ConfigurationError(
                f"kernel arity {len(self.components)} != grid arity {grid.arity}"
            )
        for j, (comp, coord) in enumerate(zip(self.components, grid.coordinates)):
            if isinstance(comp, BinaryFlip) and not isinstance(coord, Binary):
                raise ConfigurationError(f"BinaryFlip on non-binary coordinate {j}")
            if isinstance(comp, (UniformWindow, RoundedGaussian)) and not isinstance(
                coord, Count
            ):
                raise ConfigurationError(
                    f"{type(comp).__name__} on non-count coordinate {j}"
                )

    def bandwidth_key(self) -> tuple[float, ...]:
        """Tie-break key for hyperparameter selection: smaller is preferred."""
        return tuple(c.bandwidth for c in self.components)


def kernel_spec(*components: KernelComponent) -> BaseKernelSpec:
    return BaseKernelSpec(tuple(components))


@dataclass(frozen=True)
class KernelRow:
    """Adjusted kernel row k(.|center) with the acceptance vector used."""

    row: np.ndarray
    center: int
    acceptance: np.ndarray


@lru_cache(maxsize=128)
def _component_matrix(comp: KernelComponent, coord: Coordinate) -> np.ndarray:
    """size x size matrix M[c, y] = k_*(y|c) restricted to the grid.

    Rows sum to 1 except for UniformWindow near the boundary, where the
    missing mass is exactly the off-grid proposal weight.
    """
    size = coord.size
    if isinstance(comp, PointMass):
        mat = np.eye(size)
    elif isinstance(comp, BinaryFlip):
        d = comp.delta
        mat = np.array([[1.0 - d, d], [d, 1.0 - d]])
    elif isinstance(comp, UniformWindow):
        centers = np.arange(size)[:, None]
        targets = np.arange(size)[None, :]
        mat = (np.abs(targets - centers) <= comp.m) / (2.0 * comp.m + 1.0)
    elif isinstance(comp, RoundedGaussian):
        centers = np.arange(size)[:, None]
        targets = np.arange(size)[None, :]
        z_hi = (targets + 0.5 - centers) / comp.sigma
        z_lo = (targets - 0.5 - centers) / comp.sigma
        mat = ndtr(z_hi) - ndtr(z_lo)
        rowsum = mat.sum(axis=1, keepdims=True)
        if np.any(rowsum <= 0.0):
            raise NumericalError(f"rounded Gaussian rows underflowed at sigma={comp.sigma}")
        mat = mat / rowsum
    else:
        raise ConfigurationError(f"unknown kernel component {comp!r}")
    mat.flags.writeable = False
    return mat


class KernelOperator:
    """Per-grid cache of component matrices with the row/column products.

    Centralizes the separable structure so the MH row, the full MH matrix and
    the resampling engine all consume the same numbers.
    """

    def __init__(self, spec: BaseKernelSpec, grid: SupportGrid):
        spec.validate_for(grid)
        self.spec = spec
        self.grid = grid
        self.matrices = [
            _component_matrix(comp, coord)
            for comp, coord in zip(spec.components, grid.coordinates)
        ]
        self.is_point_mass = all(isinstance(c, PointMass) for c in spec.components)

    def base_row(self, center_flat: int) -> np.ndarray:
        """k_*(y|center) for every grid point y, in flat order."""
        point = self.grid.point_at(center_flat)
        parts = [m[c, :] for m, c in zip(self.matrices, point)]
        return reduce(np.multiply.outer, parts).ravel()

    def base_col(self, center_flat: int) -> np.ndarray:
        """k_*(center|y) for every grid point y, in flat order."""
        point = self.grid.point_at(center_flat)
        parts = [m[:, c] for m, c in zip(self.matrices, point)]
        return reduce(np.multiply.outer, parts).ravel()

    def base_matrix(self) -> np.ndarray:
        """Full k_*(y|c) matrix (rows = centers); only for small grids."""
        mat = self.matrices[0]
        for m in self.matrices[1:]:
            mat = np.einsum("ab,cd->acbd", mat, m).reshape(
                mat.shape[0] * m.shape[0], mat.shape[1] * m.shape[1]
            )
        return mat

    def mh_row(self, probs: np.ndarray, center_flat: int) -> tuple[np.ndarray, np.ndarray]:
        """Adjusted row and acceptance vector for one center."""
        p_center = probs[center_flat]
        if p_center <= 0.0:
            raise NumericalError("predictive mass at the observed point is zero")
        kr = self.base_row(center_flat)
        kc = self.base_col(center_flat)
        gamma = np.zeros_like(kr)
        support = kr > 0.0
        ratio = (probs[support] * kc[support]) / (p_center * kr[support])
        gamma[support] = np.minimum(1.0, ratio)
        row = gamma * kr
        row[center_flat] += 1.0 - row.sum()
        return row, gamma

    def mh_matrix(self, probs: np.ndarray) -> np.ndarray:
        """All adjusted rows at once: M[c, y] = k(y|c). O(size^2) memory."""
        if np.min(probs) <= 0.0:
            raise NumericalError("mh_matrix requires a strictly positive pmf")
        kstar = self.base_matrix()
        den = probs[:, None] * kstar
        num = probs[None, :] * kstar.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(den > 0.0, num / den, 0.0)
        mat = np.minimum(1.0, ratio) * kstar
        np.fill_diagonal(mat, np.diagonal(mat) + 1.0 - mat.sum(axis=1))
        return mat


_OPERATOR_CACHE: dict[tuple[BaseKernelSpec, SupportGrid], KernelOperator] = {}


def get_operator(spec: BaseKernelSpec, grid: SupportGrid) -> KernelOperator:
    key = (spec, grid)
    op = _OPERATOR_CACHE.get(key)
    if op is None:
        op = KernelOperator(spec, grid)
        if len(_OPERATOR_CACHE) > 64:
            _OPERATOR_CACHE.clear()
        _OPERATOR_CACHE[key] = op
    return op


def _as_flat(grid: SupportGrid, y) -> int:
    if isinstance(y, (int, np.integer)):
        if grid.arity != 1:
            raise ValueError("scalar observation on a multivariate grid")
        return grid.flat_index((int(y),))
    return grid.flat_index(tuple(y))


def base_kernel_row(
    spec: BaseKernelSpec, grid: SupportGrid, center
) -> tuple[np.ndarray, float]:
    """In-grid proposal weights and the off-grid (clipped) proposal mass."""
    op = get_operator(spec, grid)
    weights = op.base_row(_as_flat(grid, center))
    off_grid = 1.0 - float(weights.sum())
    return weights, max(0.0, off_grid)


def mh_kernel_row(spec: BaseKernelSpec, pmf: Pmf, y_obs) -> KernelRow:
    """Metropolis-Hastings adjusted kernel row centered at the observation."""
    op = get_operator(spec, pmf.grid)
    center = _as_flat(pmf.grid, y_obs)
    row, gamma = op.mh_row(pmf.probs, center)
    return KernelRow(row=row, center=center, acceptance=gamma)


def kernel_event_row(
    spec: BaseKernelSpec, pmf: Pmf, y_obs, events: EventSet
) -> np.ndarray:
    """K(A_h | y_obs) for each event: the adjusted row summed over A_h."""
    if events.grid != pmf.grid:
        raise ValueError("events live on a different grid")
    row = mh_kernel_row(spec, pmf, y_obs).row
    return events.indicators @ row
