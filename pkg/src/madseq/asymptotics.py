"""Large-horizon Gaussian approximation for event probabilities.

The update leaves the event-probability sequence a martingale, and the
scaled fluctuations are asymptotically Gaussian with a covariance driven by
the one-step kernel. This module computes that covariance at the current
state, the rate factor that scales it, and the resulting approximate
credible intervals (an alternative to full predictive resampling).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError
from .grids import EventSet
from .kernels import get_operator
from .predictive import MadState, WeightSchedule, limiting_lambda
from .resampling import CredibleInterval

__all__ = [
    "CovEstimate",
    "one_step_cov",
    "rate_r",
    "gaussian_approx",
    "EIGENVALUE_FLOOR",
]

EIGENVALUE_FLOOR = 1e-8


@dataclass(frozen=True)
class CovEstimate:
    """Event covariance sum_y K(A_j|y) K(A_t|y) p(y) - P(A_j) P(A_t)."""

    events: EventSet
    matrix: np.ndarray
    probabilities: np.ndarray
    n: int


def one_step_cov(state: MadState, events: EventSet) -> CovEstimate:
    """Covariance of the next update's event-probability increments,
    rescaled to remove the step weight."""
    if events.indicators.shape[1] != state.pmf.grid.size:
        raise ConfigurationError(
            f"event set is over {events.indicators.shape[1]} cells, grid has {state.pmf.grid.size}"
        )
    op = get_operator(state.kernel, state.pmf.grid)
    p = state.pmf.probs
    kernel = op.mh_matrix(state.pmf.probs)
    # rows of `kernel` are distributions over z given y; event mass K(A|y)
    event_given_y = kernel @ events.indicators.T
    second = (event_given_y * p[:, None]).T @ event_given_y
    probs = events.indicators @ p
    matrix = second - np.outer(probs, probs)
    matrix = 0.5 * (matrix + matrix.T)
    return CovEstimate(events=events, matrix=matrix, probabilities=probs, n=state.n)


def rate_r(schedule: WeightSchedule, n: int) -> float:
    """Scaling r_n = (2 lambda - 1) n^(2 lambda - 1) for the fluctuation variance."""
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    lam = limiting_lambda(schedule)
    exponent = 2.0 * lam - 1.0
    return exponent * float(n) ** exponent


def gaussian_approx(
    cov: CovEstimate, schedule: WeightSchedule, level: float = 0.95
) -> tuple[CredibleInterval, ...]:
    """Per-event intervals P_n(A) +/- z * sqrt(Sigma_jj / r_n), clipped to [0, 1]."""
    if not 0.0 < level < 1.0:
        raise ConfigurationError(f"level must be in (0, 1), got {level}")
    eigenvalues = np.linalg.eigvalsh(cov.matrix)
    if eigenvalues.min() < EIGENVALUE_FLOOR:
        warnings.warn(
            f"covariance is near-singular (min eigenvalue {eigenvalues.min():.3e}); "
            "interval widths may be unreliable",
            RuntimeWarning,
            stacklevel=2,
        )
    rate = rate_r(schedule, cov.n)
    z = float(ndtri(1.0 - (1.0 - level) / 2.0))
    out = []
    for center, variance in zip(cov.probabilities, np.diag(cov.matrix)):
        sd = float(np.sqrt(max(variance, 0.0) / rate))
        lo = min(max(center - z * sd, 0.0), 1.0)
        hi = min(max(center + z * sd, 0.0), 1.0)
        out.append(CredibleInterval(float(lo), float(hi), level))
    return tuple(out)
