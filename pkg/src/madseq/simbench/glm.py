"""Poisson and logistic GLM baselines via iteratively reweighted least squares.

Kept deliberately minimal: canonical links only, an intercept added
internally, and Wald intervals for the conditional mean obtained by
transforming the interval on the linear predictor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from ..errors import ConfigurationError
from ..resampling import CredibleInterval

__all__ = ["GlmFit", "glm_fit_irls", "glm_predict_mean", "glm_mean_interval"]

FAMILIES = ("poisson", "bernoulli")
SCORE_TOL = 1e-8
MAX_ITER = 100


@dataclass(frozen=True)
class GlmFit:
    family: str
    coefficients: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    score_norm: float


def _mean_and_weight(family: str, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if family == "poisson":
        mu = np.exp(eta)
        return mu, mu
    mu = 1.0 / (1.0 + np.exp(-eta))
    return mu, mu * (1.0 - mu)


def _design(covariates: np.ndarray) -> np.ndarray:
    covariates = np.asarray(covariates, dtype=np.float64)
    if covariates.ndim == 1:
        covariates = covariates[:, None]
    return np.column_stack([np.ones(covariates.shape[0]), covariates])


def glm_fit_irls(covariates: np.ndarray, response: np.ndarray, family: str) -> GlmFit:
    """IRLS to score norm < 1e-8; non-convergence and singular information
    come back flagged (converged=False) rather than raising."""
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown family {family!r}; choose from {FAMILIES}")
    x = _design(covariates)
    y = np.asarray(response, dtype=np.float64)
    if y.shape[0] != x.shape[0]:
        raise ConfigurationError(
            f"{y.shape[0]} responses for {x.shape[0]} covariate rows"
        )
    p = x.shape[1]
    beta = np.zeros(p)
    ybar = float(y.mean())
    if family == "poisson":
        beta[0] = np.log(max(ybar, 1e-8))
    else:
        clipped = min(max(ybar, 1e-6), 1.0 - 1e-6)
        beta[0] = np.log(clipped / (1.0 - clipped))

    score_norm = np.inf
    fisher = np.eye(p)
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            mu, w = _mean_and_weight(family, x @ beta)
        if not (np.isfinite(mu).all() and np.isfinite(w).all()):
            return GlmFit(family, beta, fisher * np.nan, False, iterations, float("inf"))
        score = x.T @ (y - mu)
        score_norm = float(np.linalg.norm(score))
        fisher = (x * w[:, None]).T @ x
        if score_norm < SCORE_TOL:
            break
        try:
            step = np.linalg.solve(fisher, score)
        except np.linalg.LinAlgError:
            return GlmFit(family, beta, fisher * np.nan, False, iterations, score_norm)
        # step-halving keeps early Poisson iterations from overshooting exp()
        for _ in range(10):
            candidate = beta + step
            with np.errstate(over="ignore", invalid="ignore"):
                mu_c, _ = _mean_and_weight(family, x @ candidate)
            if np.isfinite(mu_c).all():
                break
            step = 0.5 * step
        beta = beta + step

    converged = score_norm < SCORE_TOL
    try:
        covariance = np.linalg.inv(fisher)
    except np.linalg.LinAlgError:
        covariance = fisher * np.nan
        converged = False
    return GlmFit(family, beta, covariance, converged, iterations, score_norm)


def glm_predict_mean(fit: GlmFit, covariates: np.ndarray) -> np.ndarray:
    eta = _design(covariates) @ fit.coefficients
    mu, _ = _mean_and_weight(fit.family, eta)
    return mu


def glm_mean_interval(fit: GlmFit, covariates, level: float = 0.95) -> CredibleInterval:
    """Wald interval for E(Y|x): the eta interval mapped through the inverse link."""
    row = _design(np.asarray(covariates, dtype=np.float64).reshape(1, -1))[0]
    eta = float(row @ fit.coefficients)
    se = float(np.sqrt(row @ fit.covariance @ row))
    z = float(ndtri(1.0 - (1.0 - level) / 2.0))
    lo, hi = eta - z * se, eta + z * se
    if fit.family == "poisson":
        return CredibleInterval(float(np.exp(lo)), float(np.exp(hi)), level)
    inv = lambda v: 1.0 / (1.0 + np.exp(-v))
    return CredibleInterval(float(inv(lo)), float(inv(hi)), level)
