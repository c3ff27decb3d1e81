"""MSE and rank-based AUC."""
import numpy as np
import pytest

from madseq.errors import DataError
from madseq.simbench.metrics import auc, mse


def test_mse_worked_example():
    assert mse([1.0, 2.0], [0.0, 4.0]) == pytest.approx(2.5, abs=1e-15)
    assert mse([3.0, 3.0, 3.0], [3.0, 3.0, 3.0]) == 0.0


def test_mse_validation():
    with pytest.raises(DataError):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(DataError):
        mse([], [])


def test_auc_extremes():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_auc_worked_examples():
    assert auc([0.1, 0.2, 0.3, 0.4], [0, 1, 0, 1]) == pytest.approx(0.75, abs=1e-15)
    # midranks: scores (1,1,2) rank as (1.5, 1.5, 3)
    assert auc([1.0, 1.0, 2.0], [0, 1, 1]) == pytest.approx(0.75, abs=1e-15)


def test_auc_invariant_under_monotone_transforms():
    rng = np.random.default_rng(7)
    scores = rng.random(40)
    scores[rng.integers(0, 40, 6)] = 0.25
    labels = (rng.random(40) < 0.5).astype(int)
    labels[0] = 0
    labels[1] = 1
    base = auc(scores, labels)
    assert auc(np.exp(scores), labels) == base
    assert auc(3.0 * scores + 2.0, labels) == base


def test_auc_validation():
    with pytest.raises(DataError, match="single class"):
        auc([0.1, 0.9], [1, 1])
    with pytest.raises(DataError):
        auc([0.1, 0.9], [1])
    with pytest.raises(DataError):
        auc([], [])
