"""Forward simulation of the predictive sequence and posterior summaries.

A resampling run extends a fitted state from n to a horizon N by repeatedly
drawing the next observation from the current predictive and updating. The
terminal pmfs across B independent draws are samples from the implied
posterior over the unknown pmf; functionals of those samples give credible
intervals.

Draw b always consumes the uniform stream keyed by (seed, b), so results are
independent of chunking and thread count.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import engine
from .errors import ConfigurationError, NumericalError
from .grids import Functional, Pmf, SupportGrid
from .kernels import get_operator
from .predictive import (
    CopulaState,
    DpState,
    MadState,
    copula_update,
    weights_for_range,
)
from .rng import UniformStream, sample_index

__all__ = [
    "ResampleConfig",
    "PosteriorDraws",
    "CredibleInterval",
    "FunctionalPosterior",
    "PairCorrelation",
    "predictive_resample",
    "resample_reduced",
    "posterior_functional",
    "posterior_pair_correlation",
    "draws_to_csv",
]


@dataclass(frozen=True)
class ResampleConfig:
    """Horizon N, number of draws B, and the stream seed."""

    horizon: int
    draws: int
    seed: int

    def __post_init__(self) -> None:
        if self.draws < 1:
            raise ConfigurationError(f"draws must be >= 1, got {self.draws}")
        if self.horizon < 0:
            raise ConfigurationError(f"horizon must be >= 0, got {self.horizon}")

    def validate_for(self, n: int) -> None:
        # horizon == n is the degenerate no-step run; every draw is the
        # starting pmf. Useful in tests, harmless otherwise.
        if self.horizon < n:
            raise ConfigurationError(
                f"horizon {self.horizon} is below the fitted sample size {n}"
            )


@dataclass(frozen=True)
class PosteriorDraws:
    """Terminal pmfs, one row per draw, plus the run provenance."""

    grid: SupportGrid
    matrix: np.ndarray
    seed: int
    horizon: int
    start_n: int

    @property
    def draws(self) -> int:
        return self.matrix.shape[0]

    def pmf(self, index: int) -> Pmf:
        return Pmf(self.grid, self.matrix[index])


@dataclass(frozen=True)
class CredibleInterval:
    lower: float
    upper: float
    level: float

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ConfigurationError(f"level must be in (0, 1), got {self.level}")
        if self.lower > self.upper:
            raise NumericalError(
                f"interval lower {self.lower} exceeds upper {self.upper}"
            )

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class FunctionalPosterior:
    samples: np.ndarray
    mean: float
    interval: CredibleInterval


@dataclass(frozen=True)
class PairCorrelation:
    """Per-draw correlation of two functionals under the terminal pmfs."""

    samples: np.ndarray
    excluded: int

    @property
    def mean(self) -> float:
        return float(self.samples.mean())


def _copula_trajectories(state: CopulaState, cfg: ResampleConfig) -> np.ndarray:
    steps = cfg.horizon - state.n
    out = np.empty((cfg.draws, state.grid.size))
    for b in range(cfg.draws):
        stream = UniformStream(cfg.seed, b)
        current = state
        for _ in range(steps):
            probs = current.pmf.probs
            flat = sample_index(probs, stream.uniform(), total=1.0)
            point = current.grid.point_at(flat)
            current = copula_update(current, point)
        out[b] = current.pmf.probs
    return out


def predictive_resample(
    state: MadState | DpState | CopulaState, cfg: ResampleConfig
) -> PosteriorDraws:
    """Simulate B trajectories forward to the horizon; returns terminal pmfs."""
    cfg.validate_for(state.n)
    if isinstance(state, CopulaState):
        matrix = _copula_trajectories(state, cfg)
    else:
        matrix = _terminal_block(state, cfg, 0, cfg.draws)
    return PosteriorDraws(
        grid=state.pmf.grid,
        matrix=matrix,
        seed=cfg.seed,
        horizon=cfg.horizon,
        start_n=state.n,
    )


def _terminal_block(
    state: MadState | DpState, cfg: ResampleConfig, offset: int, count: int
) -> np.ndarray:
    if isinstance(state, MadState):
        op = get_operator(state.kernel, state.pmf.grid)
        weights = weights_for_range(state.schedule, state.n + 1, cfg.horizon)
    else:
        op = None
        steps = np.arange(state.n + 1, cfg.horizon + 1, dtype=np.float64)
        weights = 1.0 / (state.alpha + steps)
    return engine.resample_terminal(
        state.pmf.probs, state.pmf.grid, op, weights, cfg.seed, offset, count
    )


def resample_reduced(
    state: MadState | DpState,
    cfg: ResampleConfig,
    reducer: Callable[[np.ndarray], np.ndarray],
    chunk: int = 64,
) -> np.ndarray:
    """Run draws in chunks and keep only reducer(terminal pmfs) per chunk.

    For large grids the full B x size matrix does not fit comfortably in
    memory; the reducer maps each chunk (rows = draws) to an array whose
    first axis is the draw, and the stacked result is returned. Draw streams
    are keyed by absolute index, so chunking does not change values.
    """
    cfg.validate_for(state.n)
    if chunk < 1:
        raise ConfigurationError(f"chunk must be >= 1, got {chunk}")
    pieces = []
    done = 0
    while done < cfg.draws:
        take = min(chunk, cfg.draws - done)
        block = _terminal_block(state, cfg, done, take)
        pieces.append(np.asarray(reducer(block)))
        done += take
    return np.concatenate(pieces, axis=0)


def posterior_functional(
    draws: PosteriorDraws, functional: Functional, level: float = 0.95
) -> FunctionalPosterior:
    """Posterior samples of E_p[f] with an equal-tailed credible interval."""
    if functional.values.shape[0] != draws.grid.size:
        raise ConfigurationError(
            f"functional has {functional.values.shape[0]} values for a grid of size {draws.grid.size}"
        )
    samples = draws.matrix @ functional.values
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(samples, [tail, 1.0 - tail], method="linear")
    return FunctionalPosterior(
        samples=samples,
        mean=float(samples.mean()),
        interval=CredibleInterval(float(lo), float(hi), level),
    )


def posterior_pair_correlation(
    draws: PosteriorDraws, first: Functional, second: Functional
) -> PairCorrelation:
    """Per-draw correlation corr_p(f, g) across terminal pmfs.

    Draws under which either functional is degenerate (zero variance) have
    no defined correlation; they are dropped and counted in `excluded`.
    """
    f = first.values
    g = second.values
    m = draws.matrix
    ef = m @ f
    eg = m @ g
    vf = np.maximum(m @ (f * f) - ef * ef, 0.0)
    vg = np.maximum(m @ (g * g) - eg * eg, 0.0)
    cross = m @ (f * g) - ef * eg
    keep = (vf > 0.0) & (vg > 0.0)
    samples = cross[keep] / np.sqrt(vf[keep] * vg[keep])
    return PairCorrelation(samples=samples, excluded=int((~keep).sum()))


def draws_to_csv(draws: PosteriorDraws, path: str) -> None:
    """One row per draw; cell columns are named by their grid coordinates."""
    names = ["draw"] + [
        "p_" + "_".join(str(v) for v in draws.grid.point_at(i))
        for i in range(draws.grid.size)
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for b in range(draws.draws):
            writer.writerow([b] + [repr(float(v)) for v in draws.matrix[b]])
