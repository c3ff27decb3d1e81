"""Synthetic scenario generators and their exact truth accessors."""
import math

import numpy as np
import pytest
from scipy.stats import poisson

from madseq.errors import ConfigurationError
from madseq.simbench.scenarios import (
    ScenarioSpec,
    eta_classification,
    eta_copula_order,
    eta_regression,
    generate_scenario,
)


def spec_for(variant, n=20, seed=1, **kw):
    return ScenarioSpec(variant=variant, n=n, seed=seed, test_size=kw.pop("test_size", 30), **kw)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        ScenarioSpec("unknown", n=10, seed=1)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("regression", n=0, seed=1)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("regression", n=10, seed=1, test_size=-1)
    with pytest.raises(ConfigurationError):
        ScenarioSpec("copula-order", n=10, seed=1, beta2=0.3)


def test_response_bounds():
    assert ScenarioSpec("illustrative", n=5, seed=1).ymax == 100
    assert ScenarioSpec("regression", n=5, seed=1).ymax == 200
    assert ScenarioSpec("classification", n=5, seed=1).ymax == 1
    assert ScenarioSpec("regression", n=5, seed=1, response_ymax=30).ymax == 30


def test_illustrative_truth_is_poisson_mixture():
    data = generate_scenario(spec_for("illustrative"))
    support = np.arange(101)
    mass = 0.4 * poisson.pmf(support, 25.0) + 0.6 * poisson.pmf(support, 60.0)
    mass = mass / mass.sum()
    np.testing.assert_allclose(data.truth_pmf.probs, mass, atol=1e-12)
    assert abs(data.truth_pmf.probs.sum() - 1.0) <= 1e-9
    assert data.conditional_mean is None


def test_illustrative_draws_respect_bounds():
    data = generate_scenario(spec_for("illustrative", n=200, test_size=200))
    assert len(data.train) == 200
    assert len(data.test) == 200
    assert data.train.rows.min() >= 0
    assert data.train.rows.max() <= 100
    assert data.train.schema.response_axes() == (0,)


def test_same_seed_reproduces_different_seed_varies():
    a = generate_scenario(spec_for("classification", seed=5))
    b = generate_scenario(spec_for("classification", seed=5))
    c = generate_scenario(spec_for("classification", seed=6))
    np.testing.assert_array_equal(a.train.rows, b.train.rows)
    np.testing.assert_array_equal(a.test.rows, b.test.rows)
    assert not np.array_equal(a.train.rows, c.train.rows)
    # train and test are independent draws
    assert not np.array_equal(a.train.rows[:30], a.test.rows[:30])


def test_regression_truth_surface():
    data = generate_scenario(spec_for("regression"))
    assert data.conditional_mean(tuple([0] * 10)) == pytest.approx(math.e, abs=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.integers(0, 2, 10)
        expect = float(np.exp(eta_regression(x.astype(float))))
        assert data.conditional_mean(tuple(x)) == pytest.approx(expect, rel=1e-12)
    cols = data.train.schema.columns
    assert [c.kind for c in cols] == ["binary"] * 10 + ["count"]
    assert cols[-1].role == "response"


def test_classification_truth_surface():
    data = generate_scenario(spec_for("classification"))
    assert data.conditional_mean(tuple([0] * 10)) == pytest.approx(
        0.04742587317756678, abs=1e-15
    )
    rng = np.random.default_rng(4)
    x = rng.integers(0, 2, 10)
    eta = float(eta_classification(x.astype(float)))
    assert data.conditional_mean(tuple(x)) == pytest.approx(
        1.0 / (1.0 + math.exp(-eta)), rel=1e-12
    )
    assert data.train.schema.columns[-1].kind == "binary"


def test_copula_order_truth_and_bounds():
    data = generate_scenario(spec_for("copula-order", n=300, test_size=100))
    assert data.train.rows[:, :2].max() <= 40
    assert data.conditional_mean((0, 9)) == pytest.approx(
        1.0 / (1.0 + math.exp(-6.0)), abs=1e-12
    )
    shifted = generate_scenario(spec_for("copula-order", beta2=0.5))
    eta = 6.0 - 2.1 * 2.0 + 0.5 * 5.0
    assert shifted.conditional_mean((2, 5)) == pytest.approx(
        1.0 / (1.0 + math.exp(-eta)), abs=1e-12
    )
    assert float(eta_copula_order(np.array([2.0, 5.0]), 0.5)) == pytest.approx(eta)


def test_empty_test_set():
    data = generate_scenario(ScenarioSpec("illustrative", n=5, seed=1, test_size=0))
    assert len(data.test) == 0
