"""Predictive recursions: weight schedules, one-step updates, fitting.

The central update maps the current predictive p to

    (1 - w) p + w k(.|y)

where k is the Metropolis-adjusted kernel row at the new observation y and w
comes from a decreasing weight schedule. The DP baseline is the same update
with a point-mass kernel and w_n = (alpha + n)^-1; the discrete-copula
baseline replaces the kernel row with a (1-rho)p + rho*indicator blend applied
along a chain of conditionals.

Reductions in the numpy update path use math.fsum, so the result of a single
update is invariant (bitwise) under relabelings that preserve the multiset of
summands; sequence fits on large grids are routed through the fused numba
engine instead, which trades that property for speed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product as iter_product
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .grids import Pmf, SupportGrid
from .kernels import BaseKernelSpec, get_operator
from .rng import random_permutation

ENGINE_GRID_THRESHOLD = 512


# ---------------------------------------------------------------------------
# weight schedules


@dataclass(frozen=True)
class PowerLaw:
    """w_n = (alpha + n)^-lam with lam in (1/2, 1]."""

    alpha: float
    lam: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if not 0.5 < self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in (0.5, 1], got {self.lam}")


@dataclass(frozen=True)
class DpmWeights:
    """w_n = (2 - 1/n) / (n + 1), the mixture-motivated schedule."""


@dataclass(frozen=True)
class Adaptive:
    """Power law whose exponent relaxes from ~1 down to lam on scale n_star."""

    alpha: float
    lam: float
    n_star: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if not 0.5 < self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in (0.5, 1], got {self.lam}")
        if not self.n_star > 0:
            raise ConfigurationError(f"n_star must be > 0, got {self.n_star}")

    def lambda_at(self, n: int) -> float:
        return self.lam + (1.0 - self.lam) * math.exp(-n / self.n_star)


WeightSchedule = PowerLaw | DpmWeights | Adaptive


def weight_at(schedule: WeightSchedule, n: int) -> float:
    """Update weight w_n for the n-th absorbed observation (n >= 1)."""
    if n < 1:
        raise ValueError(f"weights are defined for n >= 1, got {n}")
    if isinstance(schedule, PowerLaw):
        return (schedule.alpha + n) ** (-schedule.lam)
    if isinstance(schedule, DpmWeights):
        return (2.0 - 1.0 / n) / (n + 1.0)
    if isinstance(schedule, Adaptive):
        return (schedule.alpha + n) ** (-schedule.lambda_at(n))
    raise ConfigurationError(f"unknown schedule {schedule!r}")


def weights_for_range(schedule: WeightSchedule, start: int, stop: int) -> np.ndarray:
    """Vector of w_n for n = start..stop inclusive."""
    return np.array([weight_at(schedule, n) for n in range(start, stop + 1)])


def limiting_lambda(schedule: WeightSchedule) -> float:
    """Limit exponent used by the asymptotic rate; DPM has none."""
    if isinstance(schedule, (PowerLaw, Adaptive)):
        return schedule.lam
    raise ConfigurationError("schedule has no power-law limit exponent")


# ---------------------------------------------------------------------------
# states and method descriptors


@dataclass(frozen=True)
class MadState:
    pmf: Pmf
    n: int
    kernel: BaseKernelSpec
    schedule: WeightSchedule


@dataclass(frozen=True)
class DpState:
    pmf: Pmf
    n: int
    alpha: float


@dataclass(frozen=True)
class CopulaConfig:
    rho: float
    schedule: WeightSchedule
    chain_order: tuple[int, ...]

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}")


@dataclass(frozen=True)
class CopulaState:
    """Joint predictive stored as chain conditionals along chain_order.

    factors[k] has the shape of chain coordinates 0..k; its last axis is a
    conditional pmf for chain coordinate k given the earlier ones.
    """

    grid: SupportGrid
    factors: tuple[np.ndarray, ...]
    n: int
    config: CopulaConfig

    @property
    def pmf(self) -> Pmf:
        order = self.config.chain_order
        d = len(order)
        shape = tuple(self.grid.coordinates[c].size for c in order)
        joint = np.ones(shape)
        for k, f in enumerate(self.factors):
            joint *= f.reshape(f.shape + (1,) * (d - 1 - k))
        joint = np.transpose(joint, np.argsort(order))
        return Pmf(self.grid, joint.reshape(-1))


@dataclass(frozen=True)
class FitConfig:
    permutations: int
    seed: int
    base: Pmf

    def __post_init__(self):
        if self.permutations < 1:
            raise ConfigurationError("permutations must be >= 1")
        if float(self.base.probs.min()) <= 0.0:
            raise ConfigurationError("base pmf must be strictly positive")


@dataclass(frozen=True)
class MadMethod:
    kernel: BaseKernelSpec
    schedule: WeightSchedule


@dataclass(frozen=True)
class DpMethod:
    alpha: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class CopulaMethod:
    config: CopulaConfig


Method = MadMethod | DpMethod | CopulaMethod
State = MadState | DpState | CopulaState


# ---------------------------------------------------------------------------
# single-step updates


def _mix_with_row(probs: np.ndarray, row: np.ndarray, w: float, grid: SupportGrid) -> Pmf:
    new = (1.0 - w) * probs + w * row
    total = math.fsum(new)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"updated pmf sums to {total} before renormalization")
    return Pmf(grid, new / total)


def mad_update(state: MadState, y) -> MadState:
    """Absorb one observation: p <- (1-w)p + w k(.|y), n <- n+1."""
    op = get_operator(state.kernel, state.pmf.grid)
    flat = _flat_observation(state.pmf.grid, y)
    w = weight_at(state.schedule, state.n + 1)
    row, _ = _mh_row_fsum(op, state.pmf.probs, flat)
    pmf = _mix_with_row(state.pmf.probs, row, w, state.pmf.grid)
    return MadState(pmf=pmf, n=state.n + 1, kernel=state.kernel, schedule=state.schedule)


def _mh_row_fsum(op, probs: np.ndarray, center: int) -> tuple[np.ndarray, np.ndarray]:
    """KernelOperator.mh_row with the leftover mass accumulated by fsum."""
    from .errors import NumericalError

    p_center = probs[center]
    if p_center <= 0.0:
        raise NumericalError("predictive mass at the observed point is zero")
    kr = op.base_row(center)
    kc = op.base_col(center)
    gamma = np.zeros_like(kr)
    support = kr > 0.0
    gamma[support] = np.minimum(
        1.0, (probs[support] * kc[support]) / (p_center * kr[support])
    )
    row = gamma * kr
    row[center] += 1.0 - math.fsum(row)
    return row, gamma


def dp_update(state: DpState, y) -> DpState:
    """Polya-urn step: the point-mass kernel with w = 1/(alpha + n + 1)."""
    flat = _flat_observation(state.pmf.grid, y)
    w = 1.0 / (state.alpha + state.n + 1.0)
    row = np.zeros(state.pmf.grid.size)
    row[flat] = 1.0
    pmf = _mix_with_row(state.pmf.probs, row, w, state.pmf.grid)
    return DpState(pmf=pmf, n=state.n + 1, alpha=state.alpha)


def copula_update(state: CopulaState, y) -> CopulaState:
    """Chain-conditional copula step at the observed conditioning values.

    Each conditional along chain_order is blended with
    (1-rho)*itself + rho*indicator under the schedule weight; slices not
    matching the observed prefix are untouched.
    """
    grid = state.grid
    point = grid.point_at(_flat_observation(grid, y))
    order = state.config.chain_order
    y_chain = [point[c] for c in order]
    w = weight_at(state.config.schedule, state.n + 1)
    rho = state.config.rho
    new_factors = []
    for k, factor in enumerate(state.factors):
        factor = factor.copy()
        idx = tuple(y_chain[:k])
        vec = factor[idx]
        indicator = np.zeros_like(vec)
        indicator[y_chain[k]] = 1.0
        updated = (1.0 - w) * vec + w * ((1.0 - rho) * vec + rho * indicator)
        factor[idx] = updated / math.fsum(updated)
        new_factors.append(factor)
    return replace(state, factors=tuple(new_factors), n=state.n + 1)


def update_state(state: State, y) -> State:
    if isinstance(state, MadState):
        return mad_update(state, y)
    if isinstance(state, DpState):
        return dp_update(state, y)
    if isinstance(state, CopulaState):
        return copula_update(state, y)
    raise ConfigurationError(f"unknown state type {type(state).__name__}")


def _flat_observation(grid: SupportGrid, y) -> int:
    if isinstance(y, (int, np.integer)):
        if grid.arity != 1:
            raise ValueError("scalar observation on a multivariate grid")
        return grid.flat_index((int(y),))
    return grid.flat_index(tuple(int(v) for v in y))


# ---------------------------------------------------------------------------
# initial states


def chain_factors_from_pmf(pmf: Pmf, chain_order: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    """Exact chain decomposition p = prod_k p(x_(k) | x_(<k)) of a positive pmf."""
    d = pmf.grid.arity
    if sorted(chain_order) != list(range(d)):
        raise ConfigurationError(f"chain_order must permute 0..{d - 1}")
    table = np.transpose(pmf.as_table(), chain_order)
    factors = []
    for k in range(d):
        mk = table.sum(axis=tuple(range(k + 1, d))) if k < d - 1 else table
        if k == 0:
            factors.append(mk.copy())
        else:
            mprev = mk.sum(axis=k)
            factors.append(mk / mprev[..., None])
    return tuple(factors)


def initial_state(method: Method, base: Pmf) -> State:
    if isinstance(method, MadMethod):
        method.kernel.validate_for(base.grid)
        return MadState(pmf=base, n=0, kernel=method.kernel, schedule=method.schedule)
    if isinstance(method, DpMethod):
        return DpState(pmf=base, n=0, alpha=method.alpha)
    if isinstance(method, CopulaMethod):
        factors = chain_factors_from_pmf(base, method.config.chain_order)
        return CopulaState(
            grid=base.grid, factors=factors, n=0, config=method.config
        )
    raise ConfigurationError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# sequence fitting


@dataclass(frozen=True)
class FitResult:
    state: State
    step_masses: np.ndarray

    @property
    def loglik(self) -> float:
        return float(np.log(self.step_masses).sum())


def _as_points(grid: SupportGrid, data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, grid.arity)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] != grid.arity:
        raise ValueError(f"data arity {arr.shape[1]} != grid arity {grid.arity}")
    return arr


def _copula_step_mass(state: CopulaState, flat: int) -> float:
    point = state.grid.point_at(flat)
    y_chain = [point[c] for c in state.config.chain_order]
    mass = 1.0
    for k, factor in enumerate(state.factors):
        mass *= factor[tuple(y_chain[: k + 1])]
    return mass


def fit_sequence(data, cfg: FitConfig, method: Method, engine: str = "auto") -> FitResult:
    """Left-to-right fold of the method's update over the data.

    Returns the final state and the prequential masses p_{i-1}(y_i). The
    `engine` flag routes MAD/DP fits through the fused numba core ("always"),
    the numpy ops ("never"), or by grid size ("auto").
    """
    grid = cfg.base.grid
    points = _as_points(grid, data)
    flats = grid.flat_indices(points) if points.shape[0] else np.zeros(0, np.int64)

    use_engine = False
    if isinstance(method, (MadMethod, DpMethod)) and points.shape[0]:
        if engine == "always":
            use_engine = True
        elif engine == "auto":
            use_engine = grid.size >= ENGINE_GRID_THRESHOLD
        elif engine != "never":
            raise ConfigurationError(f"unknown engine mode {engine!r}")
    if use_engine:
        from . import engine as _engine

        probs, masses = _engine.fit_path(cfg.base, method, flats)
        final = Pmf(grid, probs)
        if isinstance(method, MadMethod):
            state: State = MadState(final, len(flats), method.kernel, method.schedule)
        else:
            state = DpState(final, len(flats), method.alpha)
        return FitResult(state=state, step_masses=masses)

    state = initial_state(method, cfg.base)
    masses = np.empty(points.shape[0])
    for i, flat in enumerate(flats):
        if isinstance(state, CopulaState):
            masses[i] = _copula_step_mass(state, int(flat))
        else:
            masses[i] = state.pmf.probs[flat]
        state = update_state(state, state_point(grid, int(flat)))
    return FitResult(state=state, step_masses=masses)


def state_point(grid: SupportGrid, flat: int) -> tuple[int, ...]:
    return grid.point_at(flat)


# ---------------------------------------------------------------------------
# permutation averaging


@dataclass(frozen=True)
class PermutationFit:
    pmf: Pmf
    mean_loglik: float
    logliks: np.ndarray
    permutations: tuple[np.ndarray, ...]
    final_states: tuple[State, ...]
    n: int
    method: Method

    def state(self) -> State:
        """State carrying the averaged pmf, ready for predictive resampling."""
        if isinstance(self.method, MadMethod):
            return MadState(self.pmf, self.n, self.method.kernel, self.method.schedule)
        if isinstance(self.method, DpMethod):
            return DpState(self.pmf, self.n, self.method.alpha)
        factors = chain_factors_from_pmf(self.pmf, self.method.config.chain_order)
        return CopulaState(self.pmf.grid, factors, self.n, self.method.config)


def _ordered_mean(values: np.ndarray, axis: int = 0) -> np.ndarray:
    # sort before reducing so the mean depends only on the multiset of inputs
    return np.sort(values, axis=axis).sum(axis=axis) / values.shape[axis]


def permutation_averaged_fit(
    data,
    cfg: FitConfig,
    method: Method,
    permutations: Sequence[np.ndarray] | None = None,
    engine: str = "auto",
) -> PermutationFit:
    """Average the fit over S data orderings (identity first, rest seeded)."""
    grid = cfg.base.grid
    points = _as_points(grid, data)
    n = points.shape[0]
    if permutations is None:
        perms = [np.arange(n, dtype=np.int64)]
        for s in range(1, cfg.permutations):
            perms.append(random_permutation(n, cfg.seed, s))
    else:
        perms = [np.asarray(p, dtype=np.int64) for p in permutations]
        for p in perms:
            if sorted(p.tolist()) != list(range(n)):
                raise ConfigurationError("explicit permutation is not a permutation")
    fits = [fit_sequence(points[p], cfg, method, engine=engine) for p in perms]
    stacked = np.stack([f.state.pmf.probs for f in fits])
    averaged = Pmf(grid, _ordered_mean(stacked))
    logliks = np.array([f.loglik for f in fits])
    return PermutationFit(
        pmf=averaged,
        mean_loglik=float(_ordered_mean(logliks[:, None])[0]),
        logliks=logliks,
        permutations=tuple(perms),
        final_states=tuple(f.state for f in fits),
        n=n,
        method=method,
    )


# ---------------------------------------------------------------------------
# hyperparameter selection


@dataclass(frozen=True)
class SelectionResult:
    best: Method
    best_index: int
    table: tuple[tuple[Method, float], ...]


def _candidate_methods(method: Method, search) -> list[Method]:
    if isinstance(method, MadMethod):
        lists = [list(options) for options in search]
        if not lists or any(len(options) == 0 for options in lists):
            raise ConfigurationError("every coordinate needs at least one candidate")
        return [
            MadMethod(kernel=BaseKernelSpec(tuple(combo)), schedule=method.schedule)
            for combo in iter_product(*lists)
        ]
    if isinstance(method, CopulaMethod):
        rhos = list(search)
        if not rhos:
            raise ConfigurationError("empty rho candidate list")
        return [CopulaMethod(replace(method.config, rho=float(r))) for r in rhos]
    raise ConfigurationError(f"{type(method).__name__} has no hyperparameters to select")


def _tiebreak_key(method: Method) -> tuple[float, ...]:
    if isinstance(method, MadMethod):
        return method.kernel.bandwidth_key()
    if isinstance(method, CopulaMethod):
        return (method.config.rho,)
    return ()


def select_hyperparameters(
    data,
    cfg: FitConfig,
    method: Method,
    search,
    threads: int = 1,
    engine: str = "auto",
) -> SelectionResult:
    """Exhaustive prequential-likelihood search over the candidate product.

    All candidates are scored with the same permutations (same cfg.seed), the
    argmax wins, and exact ties go to the smallest bandwidth tuple.
    """
    candidates = _candidate_methods(method, search)
    for cand in candidates:
        if isinstance(cand, MadMethod):
            cand.kernel.validate_for(cfg.base.grid)

    def score(cand: Method) -> float:
        return permutation_averaged_fit(data, cfg, cand, engine=engine).mean_loglik

    if threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            lls = list(pool.map(score, candidates))
    else:
        lls = [score(cand) for cand in candidates]

    best_index = min(
        range(len(candidates)), key=lambda i: (-lls[i], _tiebreak_key(candidates[i]))
    )
    table = tuple((cand, float(ll)) for cand, ll in zip(candidates, lls))
    return SelectionResult(best=candidates[best_index], best_index=best_index, table=table)
