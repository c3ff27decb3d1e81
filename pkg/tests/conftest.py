import numpy as np
import pytest

from madseq.grids import Binary, Count, Pmf, make_grid
from madseq.kernels import BinaryFlip, PointMass, RoundedGaussian, UniformWindow, kernel_spec


@pytest.fixture
def tri_grid():
    return make_grid([Count(2)])


@pytest.fixture
def tri_pmf(tri_grid):
    # the worked three-cell example reused across modules
    return Pmf(tri_grid, np.array([0.2, 0.3, 0.5]))


def random_grid(rng, max_cells=50):
    """Small random product grid (1-3 coordinates, <= max_cells cells)."""
    while True:
        arity = rng.integers(1, 4)
        coords = []
        for _ in range(arity):
            if rng.random() < 0.3:
                coords.append(Binary())
            else:
                coords.append(Count(int(rng.integers(1, 12))))
        grid = make_grid(coords)
        if grid.size <= max_cells:
            return grid


def random_pmf(rng, grid):
    probs = rng.random(grid.size) + 0.05
    return Pmf(grid, probs / probs.sum())


def random_kernel(rng, grid):
    components = []
    for coord in grid.coordinates:
        if isinstance(coord, Binary):
            components.append(
                rng.choice([BinaryFlip(float(rng.uniform(0.0, 0.5))), PointMass()])
            )
        else:
            pick = rng.integers(3)
            if pick == 0:
                components.append(UniformWindow(int(rng.integers(0, 4))))
            elif pick == 1:
                components.append(RoundedGaussian(float(rng.uniform(0.3, 5.0))))
            else:
                components.append(PointMass())
    return kernel_spec(*components)
