"""Fused numba core against the plain numpy path."""
import numpy as np
import pytest

from conftest import random_grid, random_kernel, random_pmf
from madseq.engine import fit_path, set_threads
from madseq.grids import Count, make_grid, pmf_uniform
from madseq.kernels import PointMass, UniformWindow, kernel_spec
from madseq.predictive import (
    CopulaConfig,
    CopulaMethod,
    DpMethod,
    DpmWeights,
    FitConfig,
    MadMethod,
    PowerLaw,
    fit_sequence,
)
from madseq.resampling import ResampleConfig, predictive_resample, resample_reduced


def test_engine_matches_numpy_fit():
    rng = np.random.default_rng(51)
    for _ in range(6):
        grid = random_grid(rng)
        base = random_pmf(rng, grid)
        cfg = FitConfig(permutations=1, seed=0, base=base)
        flats = rng.integers(0, grid.size, size=40)
        points = np.array([grid.point_at(int(f)) for f in flats])
        for method in (
            MadMethod(random_kernel(rng, grid), PowerLaw(1.0, 0.75)),
            DpMethod(1.5),
        ):
            plain = fit_sequence(points, cfg, method, engine="never")
            fused = fit_sequence(points, cfg, method, engine="always")
            np.testing.assert_allclose(
                fused.state.pmf.probs, plain.state.pmf.probs, rtol=0, atol=1e-12
            )
            np.testing.assert_allclose(
                fused.step_masses, plain.step_masses, rtol=1e-12, atol=0
            )


def test_engine_rejects_copula():
    base = pmf_uniform(make_grid([Count(4)]))
    method = CopulaMethod(CopulaConfig(0.5, DpmWeights(), (0,)))
    with pytest.raises(TypeError):
        fit_path(base, method, np.array([1, 2], dtype=np.int64))


def test_unknown_engine_mode(tri_pmf):
    from madseq.errors import ConfigurationError

    cfg = FitConfig(permutations=1, seed=0, base=tri_pmf)
    method = MadMethod(kernel_spec(UniformWindow(1)), DpmWeights())
    with pytest.raises(ConfigurationError):
        fit_sequence([(1,)], cfg, method, engine="sometimes")


def test_chunked_resampling_matches_one_shot():
    base = pmf_uniform(make_grid([Count(6)]))
    cfg = FitConfig(permutations=1, seed=0, base=base)
    method = MadMethod(kernel_spec(UniformWindow(1)), DpmWeights())
    fit = fit_sequence([2, 3, 3, 4, 1], cfg, method)
    rcfg = ResampleConfig(horizon=fit.state.n + 40, draws=20, seed=99)
    whole = predictive_resample(fit.state, rcfg).matrix
    chunked = resample_reduced(fit.state, rcfg, lambda block: block, chunk=7)
    np.testing.assert_array_equal(chunked, whole)


def test_point_mass_engine_path_matches_dp():
    base = pmf_uniform(make_grid([Count(9)]))
    cfg = FitConfig(permutations=1, seed=0, base=base)
    data = [4, 5, 4, 2, 8, 4]
    dp = fit_sequence(data, cfg, DpMethod(1.0), engine="always")
    mad = fit_sequence(
        data, cfg, MadMethod(kernel_spec(PointMass()), PowerLaw(1.0, 1.0)), engine="always"
    )
    np.testing.assert_allclose(dp.state.pmf.probs, mad.state.pmf.probs, atol=1e-14)


def test_set_threads_clamps():
    assert set_threads(0) == 1
    applied = set_threads(10**6)
    assert applied >= 1
    assert set_threads(1) == 1
