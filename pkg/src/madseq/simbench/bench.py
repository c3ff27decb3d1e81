"""Benchmark harness: replicate loop, method runners, metric aggregation.

Replicates are independent and fully derived from (seed, replicate index):
data, permutations, and resampling draws each use their own derived stream,
and all methods within a replicate share the same training data and the
same permutation set. Reports are canonical-JSON serializable; wall-clock
timings live outside the canonical payload so reruns compare byte-equal.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, MadseqError
from ..grids import hellinger, pmf_uniform
from ..kernels import BaseKernelSpec, BinaryFlip, RoundedGaussian
from ..predictive import (
    Adaptive,
    CopulaConfig,
    CopulaMethod,
    DpMethod,
    DpmWeights,
    FitConfig,
    MadMethod,
    PowerLaw,
    permutation_averaged_fit,
    select_hyperparameters,
)
from ..resampling import ResampleConfig, predictive_resample, resample_reduced
from ..rng import derive_seed
from .glm import glm_fit_irls, glm_mean_interval, glm_predict_mean
from .metrics import auc, mse
from .scenarios import ScenarioData, ScenarioSpec, generate_scenario

__all__ = [
    "BenchConfig",
    "MetricsReport",
    "run_benchmark",
    "report_to_json",
    "report_rows_csv",
    "MAD_METHODS",
]

MAD_METHODS = ("mad-1", "mad-2/3", "mad-dpm", "mad-ada")
PMF_METHODS = MAD_METHODS + ("dp", "cop-a", "cop-b")
ALL_METHODS = PMF_METHODS + ("glm",)

_RHO_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass(frozen=True)
class BenchConfig:
    replicates: int
    seed: int
    permutations: int = 10
    resample_draws: int = 200
    horizon_extra: int = 1000
    coverage_methods: tuple[str, ...] = ()
    level: float = 0.95
    sigma_grid: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0, 8.0)
    delta_grid: tuple[float, ...] = (0.05, 0.15, 0.25, 0.35, 0.45)
    covariate_sigma_grid: tuple[float, ...] = (1.0, 2.0, 4.0)
    covariate_delta: float = 0.25
    rho_grid: tuple[float, ...] = _RHO_GRID
    chunk: int = 50

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ConfigurationError(f"replicates must be >= 1, got {self.replicates}")
        unknown = [m for m in self.coverage_methods if m not in PMF_METHODS + ("glm",)]
        if unknown:
            raise ConfigurationError(f"unknown coverage method {unknown[0]!r}")


@dataclass(frozen=True)
class MetricRow:
    replicate: int
    method: str
    metric: str
    value: float


@dataclass(frozen=True)
class CoverageRecord:
    replicate: int
    method: str
    indicators: tuple[int, ...]
    observed: tuple[int, ...]


@dataclass(frozen=True)
class FailureRow:
    replicate: int
    method: str
    stage: str
    message: str


@dataclass(frozen=True)
class MetricsReport:
    scenario: ScenarioSpec
    methods: tuple[str, ...]
    replicates: int
    seed: int
    config: BenchConfig
    rows: tuple[MetricRow, ...]
    coverage: tuple[CoverageRecord, ...]
    selections: tuple[tuple[int, str, str], ...]
    failures: tuple[FailureRow, ...]
    summary: dict
    timing: dict

    def metric_values(self, method: str, metric: str) -> np.ndarray:
        return np.array(
            [r.value for r in self.rows if r.method == method and r.metric == metric]
        )


# ---------------------------------------------------------------------------
# method runners


def _schedule_for(name: str):
    if name == "mad-1":
        return PowerLaw(1.0, 1.0)
    if name == "mad-2/3":
        return PowerLaw(1.0, 2.0 / 3.0)
    if name == "mad-dpm":
        return DpmWeights()
    if name == "mad-ada":
        return Adaptive(1.0, 0.75, 500.0)
    raise ConfigurationError(f"unknown MAD variant {name!r}")


def _kernel_search(data: ScenarioData, cfg: BenchConfig) -> list[list]:
    search: list[list] = []
    for col in data.train.schema.columns:
        if col.role == "covariate":
            if col.kind == "binary":
                search.append([BinaryFlip(cfg.covariate_delta)])
            else:
                search.append([RoundedGaussian(s) for s in cfg.covariate_sigma_grid])
        else:
            if col.kind == "count":
                search.append([RoundedGaussian(s) for s in cfg.sigma_grid])
            else:
                search.append([BinaryFlip(d) for d in cfg.delta_grid])
    return search


def _describe(method) -> str:
    if isinstance(method, MadMethod):
        return "bandwidths=" + ",".join(repr(b) for b in method.kernel.bandwidth_key())
    if isinstance(method, CopulaMethod):
        return f"rho={method.config.rho!r}"
    return f"alpha={method.alpha!r}"


def _fit_pmf_method(name: str, data: ScenarioData, cfg: BenchConfig, fit_seed: int):
    """Returns (state ready for resampling, description of the chosen method)."""
    points = data.train.points()
    base = pmf_uniform(data.train.schema.to_grid())
    fit_cfg = FitConfig(permutations=cfg.permutations, seed=fit_seed, base=base)
    if name in MAD_METHODS:
        template = MadMethod(
            kernel=BaseKernelSpec(tuple(opts[0] for opts in _kernel_search(data, cfg))),
            schedule=_schedule_for(name),
        )
        sel = select_hyperparameters(points, fit_cfg, template, _kernel_search(data, cfg))
        best = sel.best
    elif name == "dp":
        best = DpMethod(alpha=1.0)
    elif name in ("cop-a", "cop-b"):
        arity = len(data.train.schema.columns)
        if arity != 3:
            raise ConfigurationError(f"{name} is defined for the 3-column ordering study")
        order = (0, 1, 2) if name == "cop-a" else (1, 0, 2)
        template = CopulaMethod(
            CopulaConfig(rho=cfg.rho_grid[0], schedule=DpmWeights(), chain_order=order)
        )
        # single data order: the chain update is tied to the order given, and
        # averaging joints would leak the covariate chain into p(y | x)
        fit_cfg = FitConfig(permutations=1, seed=fit_seed, base=base)
        sel = select_hyperparameters(points, fit_cfg, template, cfg.rho_grid)
        best = sel.best
    else:
        raise ConfigurationError(f"unknown method {name!r}")
    fit = permutation_averaged_fit(points, fit_cfg, best)
    return fit.state(), _describe(best)


def _conditional_mean_matrix(block: np.ndarray, prefix: int, last: int) -> np.ndarray:
    # rows are pmfs over (covariate cell, response); conditional mean per cell
    shaped = block.reshape(block.shape[0], prefix, last)
    yvals = np.arange(last, dtype=np.float64)
    return (shaped @ yvals) / shaped.sum(axis=2)


def _prefix_indices(data: ScenarioData, rows: np.ndarray) -> np.ndarray:
    grid = data.train.schema.to_grid()
    cov_axes = data.train.schema.covariate_axes()
    cov_shape = tuple(grid.shape[a] for a in cov_axes)
    return np.ravel_multi_index(tuple(rows[:, a] for a in cov_axes), cov_shape)


def _all_cell_truth(data: ScenarioData) -> np.ndarray:
    grid = data.train.schema.to_grid()
    cov_axes = data.train.schema.covariate_axes()
    cov_shape = tuple(grid.shape[a] for a in cov_axes)
    cells = np.indices(cov_shape).reshape(len(cov_shape), -1).T
    return np.array([data.conditional_mean(tuple(int(v) for v in c)) for c in cells])


# ---------------------------------------------------------------------------
# benchmark loop


def run_benchmark(
    spec: ScenarioSpec, methods: Sequence[str], cfg: BenchConfig
) -> MetricsReport:
    """Fit every method on R independent replicates and aggregate metrics.

    A method failure is recorded and the replicate is kept for the others.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in ALL_METHODS:
            raise ConfigurationError(f"unknown method {m!r}; choose from {ALL_METHODS}")
    rows: list[MetricRow] = []
    coverage: list[CoverageRecord] = []
    selections: list[tuple[int, str, str]] = []
    failures: list[FailureRow] = []
    timing: dict[str, float] = {}
    t_start = time.monotonic()

    for r in range(cfg.replicates):
        data = generate_scenario(replace(spec, seed=derive_seed(cfg.seed, r, 0)))
        fit_seed = derive_seed(cfg.seed, r, 1)
        for mi, name in enumerate(methods):
            t_m = time.monotonic()
            try:
                new_rows, cov_rec, choice = _run_method(
                    name, data, cfg, r, fit_seed, derive_seed(cfg.seed, r, 2, mi)
                )
            except (MadseqError, np.linalg.LinAlgError) as exc:
                failures.append(FailureRow(r, name, "fit", str(exc)))
                continue
            rows.extend(new_rows)
            if cov_rec is not None:
                coverage.append(cov_rec)
            if choice is not None:
                selections.append((r, name, choice))
            timing[f"r{r}:{name}"] = time.monotonic() - t_m

    summary = _summarize(methods, cfg, rows, coverage)
    timing["total"] = time.monotonic() - t_start
    return MetricsReport(
        scenario=spec,
        methods=methods,
        replicates=cfg.replicates,
        seed=cfg.seed,
        config=cfg,
        rows=tuple(rows),
        coverage=tuple(coverage),
        selections=tuple(selections),
        failures=tuple(failures),
        summary=summary,
        timing=timing,
    )


def _run_method(
    name: str,
    data: ScenarioData,
    cfg: BenchConfig,
    r: int,
    fit_seed: int,
    resample_seed: int,
):
    spec = data.spec
    rows: list[MetricRow] = []
    cov_rec = None
    choice = None

    if name == "glm":
        family = "poisson" if spec.variant == "regression" else "bernoulli"
        if spec.variant == "illustrative":
            raise ConfigurationError("glm needs covariates")
        cov_axes = data.train.schema.covariate_axes()
        resp_axis = data.train.schema.response_axes()[0]
        fit = glm_fit_irls(
            data.train.rows[:, cov_axes], data.train.rows[:, resp_axis], family
        )
        preds = glm_predict_mean(fit, data.test.rows[:, cov_axes])
        rows.append(MetricRow(r, name, _score_metric(spec), _score(spec, preds, data)))
        if name in cfg.coverage_methods:
            if not fit.converged:
                raise ConfigurationError("glm did not converge; coverage skipped")
            cov_rec = _glm_coverage(name, data, cfg, r, fit)
        return rows, cov_rec, None

    state, choice = _fit_pmf_method(name, data, cfg, fit_seed)
    if spec.variant == "illustrative":
        rows.append(MetricRow(r, name, "hellinger", hellinger(state.pmf, data.truth_pmf)))
        return rows, None, choice

    grid = data.train.schema.to_grid()
    last = grid.shape[-1]
    prefix = grid.size // last
    table = _conditional_mean_matrix(state.pmf.probs[None, :], prefix, last)[0]
    preds = table[_prefix_indices(data, data.test.rows)]
    rows.append(MetricRow(r, name, _score_metric(spec), _score(spec, preds, data)))

    if name in cfg.coverage_methods:
        rcfg = ResampleConfig(
            horizon=state.n + cfg.horizon_extra,
            draws=cfg.resample_draws,
            seed=resample_seed,
        )
        reducer = lambda block: _conditional_mean_matrix(block, prefix, last)
        if name in ("cop-a", "cop-b"):
            draws = predictive_resample(state, rcfg)
            mean_draws = reducer(draws.matrix)
        else:
            mean_draws = resample_reduced(state, rcfg, reducer, chunk=cfg.chunk)
        cov_rec = _coverage_record(name, data, cfg, r, mean_draws)
    return rows, cov_rec, choice


def _score_metric(spec: ScenarioSpec) -> str:
    return "mse" if spec.variant == "regression" else "auc"


def _score(spec: ScenarioSpec, preds: np.ndarray, data: ScenarioData) -> float:
    resp_axis = data.train.schema.response_axes()[0]
    actual = data.test.rows[:, resp_axis]
    if spec.variant == "regression":
        return mse(preds, actual)
    return auc(preds, actual)


def _coverage_record(
    name: str, data: ScenarioData, cfg: BenchConfig, r: int, mean_draws: np.ndarray
) -> CoverageRecord:
    tail = (1.0 - cfg.level) / 2.0
    lo, hi = np.quantile(mean_draws, [tail, 1.0 - tail], axis=0, method="linear")
    truth = _all_cell_truth(data)
    indicators = ((truth >= lo) & (truth <= hi)).astype(int)
    observed = np.zeros(truth.shape[0], dtype=int)
    observed[np.unique(_prefix_indices(data, data.train.rows))] = 1
    return CoverageRecord(r, name, tuple(indicators.tolist()), tuple(observed.tolist()))


def _glm_coverage(
    name: str, data: ScenarioData, cfg: BenchConfig, r: int, fit
) -> CoverageRecord:
    grid = data.train.schema.to_grid()
    cov_axes = data.train.schema.covariate_axes()
    cov_shape = tuple(grid.shape[a] for a in cov_axes)
    cells = np.indices(cov_shape).reshape(len(cov_shape), -1).T
    truth = _all_cell_truth(data)
    indicators = np.zeros(truth.shape[0], dtype=int)
    for i, cell in enumerate(cells):
        interval = glm_mean_interval(fit, cell, cfg.level)
        indicators[i] = int(interval.contains(truth[i]))
    observed = np.zeros(truth.shape[0], dtype=int)
    observed[np.unique(_prefix_indices(data, data.train.rows))] = 1
    return CoverageRecord(r, name, tuple(indicators.tolist()), tuple(observed.tolist()))


def _summarize(
    methods: tuple[str, ...],
    cfg: BenchConfig,
    rows: list[MetricRow],
    coverage: list[CoverageRecord],
) -> dict:
    summary: dict = {}
    for name in methods:
        entry: dict = {}
        for metric in ("mse", "auc", "hellinger"):
            values = np.array(
                [x.value for x in rows if x.method == name and x.metric == metric]
            )
            if values.size:
                entry[f"mean_{metric}"] = float(values.mean())
                if values.size > 1:
                    entry[f"sd_{metric}"] = float(values.std(ddof=1))
        records = [c for c in coverage if c.method == name]
        if records:
            mat = np.array([c.indicators for c in records], dtype=np.float64)
            obs = np.array([c.observed for c in records], dtype=bool)
            rates = mat.mean(axis=0)
            entry["coverage_median_all"] = float(np.median(rates))
            seen = obs.any(axis=0)
            if seen.any():
                with np.errstate(invalid="ignore"):
                    masked = np.where(obs, mat, np.nan)
                    observed_rates = np.nanmean(masked[:, seen], axis=0)
                entry["coverage_median_observed"] = float(np.median(observed_rates))
        summary[name] = entry
    return summary


# ---------------------------------------------------------------------------
# serialization


def report_to_json(report: MetricsReport, include_timing: bool = False) -> str:
    """Canonical JSON: sorted keys, no timing unless asked (timings differ
    between byte-identical reruns)."""
    payload = {
        "scenario": asdict(report.scenario),
        "methods": list(report.methods),
        "replicates": report.replicates,
        "seed": report.seed,
        "config": asdict(report.config),
        "rows": [asdict(x) for x in report.rows],
        "coverage": [asdict(x) for x in report.coverage],
        "selections": [list(s) for s in report.selections],
        "failures": [asdict(x) for x in report.failures],
        "summary": report.summary,
    }
    if include_timing:
        payload["timing"] = report.timing
    return json.dumps(payload, sort_keys=True, indent=2)


def report_rows_csv(report: MetricsReport, path: str) -> None:
    """One row per (replicate, method, metric)."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "method", "metric", "value"])
        for row in report.rows:
            writer.writerow([row.replicate, row.method, row.metric, repr(row.value)])
