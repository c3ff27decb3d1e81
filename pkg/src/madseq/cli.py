"""Command line interface: fit, select, resample, simulate, bench, report.

Artifacts are deterministic: the same argv and input files produce
byte-identical outputs. Every output gets a sibling RunManifest
(<out>.manifest.json) recording the command, a config digest that is stable
under key reordering, the seed, and the library version; only the manifest
carries timestamps.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .dataio import (
    Dataset,
    DatasetSchema,
    parse_dataset,
    schema_from_json,
    schema_to_json,
    write_dataset,
)
from .engine import set_threads
from .errors import ConfigurationError, DataError, MadseqError, NumericalError
from .grids import Binary, Count, Pmf, SupportGrid, make_grid, pmf_uniform
from .kernels import (
    BaseKernelSpec,
    BinaryFlip,
    KernelComponent,
    PointMass,
    RoundedGaussian,
    UniformWindow,
)
from .predictive import (
    Adaptive,
    CopulaConfig,
    CopulaMethod,
    CopulaState,
    DpMethod,
    DpmWeights,
    DpState,
    FitConfig,
    MadMethod,
    MadState,
    Method,
    PowerLaw,
    State,
    WeightSchedule,
    chain_factors_from_pmf,
    permutation_averaged_fit,
    select_hyperparameters,
)
from .resampling import ResampleConfig, draws_to_csv, predictive_resample
from .simbench import BenchConfig, run_benchmark
from .simbench.bench import ALL_METHODS, report_rows_csv, report_to_json
from .simbench.scenarios import VARIANTS, ScenarioSpec, generate_scenario

__all__ = ["main", "run_command"]


# ---------------------------------------------------------------------------
# JSON codecs for methods, schedules, kernels, grids


def _schedule_to_json(schedule: WeightSchedule) -> dict:
    if isinstance(schedule, PowerLaw):
        return {"variant": "power_law", "alpha": schedule.alpha, "lambda": schedule.lam}
    if isinstance(schedule, DpmWeights):
        return {"variant": "dpm"}
    return {
        "variant": "adaptive",
        "alpha": schedule.alpha,
        "lambda": schedule.lam,
        "n_star": schedule.n_star,
    }


def _schedule_from_json(obj) -> WeightSchedule:
    if not isinstance(obj, dict) or "variant" not in obj:
        raise ConfigurationError("weights must be an object with a 'variant' key")
    variant = obj["variant"]
    try:
        if variant == "power_law":
            return PowerLaw(float(obj["alpha"]), float(obj["lambda"]))
        if variant == "dpm":
            return DpmWeights()
        if variant == "adaptive":
            return Adaptive(float(obj["alpha"]), float(obj["lambda"]), float(obj["n_star"]))
    except KeyError as exc:
        raise ConfigurationError(f"weights variant {variant!r} needs key {exc}") from exc
    raise ConfigurationError(f"unknown weights variant {variant!r}")


def _component_to_json(comp: KernelComponent) -> dict:
    if isinstance(comp, UniformWindow):
        return {"type": "uniform_window", "m": comp.m}
    if isinstance(comp, RoundedGaussian):
        return {"type": "rounded_gaussian", "sigma": comp.sigma}
    if isinstance(comp, BinaryFlip):
        return {"type": "binary_flip", "delta": comp.delta}
    return {"type": "point_mass"}


def _component_from_json(obj) -> KernelComponent:
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigurationError("kernel component must be an object with a 'type' key")
    kind = obj["type"]
    try:
        if kind == "uniform_window":
            return UniformWindow(int(obj["m"]))
        if kind == "rounded_gaussian":
            return RoundedGaussian(float(obj["sigma"]))
        if kind == "binary_flip":
            return BinaryFlip(float(obj["delta"]))
        if kind == "point_mass":
            return PointMass()
    except KeyError as exc:
        raise ConfigurationError(f"kernel component {kind!r} needs key {exc}") from exc
    raise ConfigurationError(f"unknown kernel component type {kind!r}")


def _grid_to_json(grid: SupportGrid) -> list[dict]:
    return [
        {"kind": "count", "max": c.max_value} if isinstance(c, Count) else {"kind": "binary"}
        for c in grid.coordinates
    ]


def _method_to_json(method: Method) -> dict:
    if isinstance(method, MadMethod):
        return {
            "method": "mad",
            "kernel": [_component_to_json(c) for c in method.kernel.components],
            "weights": _schedule_to_json(method.schedule),
        }
    if isinstance(method, DpMethod):
        return {"method": "dp", "alpha": method.alpha}
    return {
        "method": "copula",
        "rho": method.config.rho,
        "chain_order": list(method.config.chain_order),
        "weights": _schedule_to_json(method.config.schedule),
    }


def _method_from_config(config: dict, schema: DatasetSchema) -> Method:
    kind = config.get("method", "mad")
    if kind == "mad":
        if "kernel" not in config:
            raise ConfigurationError("mad method needs a 'kernel' list in the config")
        components = tuple(_component_from_json(c) for c in config["kernel"])
        spec = BaseKernelSpec(components)
        spec.validate_for(schema.to_grid())
        if "weights" not in config:
            raise ConfigurationError("mad method needs a 'weights' object in the config")
        return MadMethod(kernel=spec, schedule=_schedule_from_json(config["weights"]))
    if kind == "dp":
        return DpMethod(alpha=float(config.get("alpha", 1.0)))
    if kind == "copula":
        if "rho" not in config:
            raise ConfigurationError("copula method needs 'rho' in the config")
        order = tuple(config.get("chain_order", range(len(schema.columns))))
        schedule = _schedule_from_json(config["weights"]) if "weights" in config else DpmWeights()
        return CopulaMethod(CopulaConfig(float(config["rho"]), schedule, order))
    raise ConfigurationError(f"unknown method {kind!r}; choose mad, dp, or copula")


# ---------------------------------------------------------------------------
# config + manifest plumbing


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{what} {path} is not valid JSON: {exc}") from exc


def _canonical_digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_manifest(out_path: str, args, config_obj, seed) -> None:
    manifest = {
        "command": list(args.argv),
        "config_digest": _canonical_digest(config_obj),
        "seed": seed,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_dataset(path: str, schema: DatasetSchema) -> Dataset:
    try:
        return parse_dataset(path, schema)
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc


def _schema_from_config(config: dict) -> DatasetSchema:
    if "schema" not in config:
        raise ConfigurationError("config needs a 'schema' list of column descriptors")
    return schema_from_json(config["schema"])


def _fit_config(config: dict, grid: SupportGrid) -> FitConfig:
    return FitConfig(
        permutations=int(config.get("S", 10)),
        seed=int(config.get("seed", 0)),
        base=pmf_uniform(grid),
    )


# ---------------------------------------------------------------------------
# fit.json round trip


def _fit_document(schema: DatasetSchema, fit, config: dict) -> dict:
    return {
        "grid": _grid_to_json(schema.to_grid()),
        "schema": schema_to_json(schema),
        "probs": [float(v) for v in fit.pmf.probs],
        "n": fit.n,
        "loglik": fit.mean_loglik,
        "S": len(fit.permutations),
        "seed": int(config.get("seed", 0)),
        **_method_to_json(fit.method),
    }


def load_fit(path: str) -> State:
    """Rebuild the fitted state from fit.json, bit-equal probabilities."""
    doc = _load_json(path, "fit file")
    for key in ("schema", "probs", "n", "method"):
        if key not in doc:
            raise ConfigurationError(f"fit file {path} is missing key {key!r}")
    schema = schema_from_json(doc["schema"])
    grid = schema.to_grid()
    probs = np.asarray(doc["probs"], dtype=np.float64)
    if probs.size != grid.size:
        raise ConfigurationError(
            f"fit file has {probs.size} probabilities for a grid of {grid.size} cells"
        )
    pmf = Pmf(grid, probs)
    n = int(doc["n"])
    method = _method_from_config(doc, schema)
    if isinstance(method, MadMethod):
        return MadState(pmf, n, method.kernel, method.schedule)
    if isinstance(method, DpMethod):
        return DpState(pmf, n, method.alpha)
    factors = chain_factors_from_pmf(pmf, method.config.chain_order)
    return CopulaState(grid, factors, n, method.config)


# ---------------------------------------------------------------------------
# subcommands

# --engine names the implementation; fit_sequence speaks in fused-core terms
_ENGINE_MODES = {"auto": "auto", "numpy": "never", "numba": "always"}


def _cmd_fit(args) -> int:
    config = _load_json(args.config, "config file")
    schema = _schema_from_config(config)
    dataset = _read_dataset(args.data, schema)
    method = _method_from_config(config, schema)
    fit_cfg = _fit_config(config, schema.to_grid())
    engine = _ENGINE_MODES[args.engine]
    fit = permutation_averaged_fit(dataset.points(), fit_cfg, method, engine=engine)
    _write_json(args.out, _fit_document(schema, fit, config))
    _write_manifest(args.out, args, config, fit_cfg.seed)
    return 0


def _cmd_select(args) -> int:
    config = _load_json(args.config, "config file")
    schema = _schema_from_config(config)
    dataset = _read_dataset(args.data, schema)
    method = _method_from_config(config, schema)
    if isinstance(method, MadMethod):
        if "candidates" not in config:
            raise ConfigurationError(
                "selection for mad needs 'candidates': per-coordinate component lists"
            )
        search = [
            [_component_from_json(c) for c in options] for options in config["candidates"]
        ]
    elif isinstance(method, CopulaMethod):
        if "rho_candidates" not in config:
            raise ConfigurationError("selection for copula needs 'rho_candidates'")
        search = [float(r) for r in config["rho_candidates"]]
    else:
        raise ConfigurationError("dp has no hyperparameters to select")
    fit_cfg = _fit_config(config, schema.to_grid())
    result = select_hyperparameters(
        dataset.points(),
        fit_cfg,
        method,
        search,
        threads=args.threads,
        engine=_ENGINE_MODES[args.engine],
    )
    payload = {
        "best": _method_to_json(result.best),
        "best_index": result.best_index,
        "table": [
            {"candidate": _method_to_json(cand), "loglik": ll} for cand, ll in result.table
        ],
    }
    _write_json(args.out, payload)
    _write_manifest(args.out, args, config, fit_cfg.seed)
    return 0


def _cmd_resample(args) -> int:
    state = load_fit(args.fit)
    cfg = ResampleConfig(horizon=args.horizon, draws=args.draws, seed=args.seed)
    draws = predictive_resample(state, cfg)
    draws_to_csv(draws, args.out)
    _write_manifest(
        args.out,
        args,
        {"fit": args.fit, "draws": args.draws, "horizon": args.horizon},
        args.seed,
    )
    return 0


def _cmd_simulate(args) -> int:
    spec = ScenarioSpec(
        variant=args.scenario,
        n=args.n,
        seed=args.seed,
        test_size=args.test_size,
        beta2=args.beta2,
    )
    data = generate_scenario(spec)
    write_dataset(data.train, args.out)
    if args.test_out is not None:
        write_dataset(data.test, args.test_out)
    if args.schema_out is not None:
        _write_json(args.schema_out, {"schema": schema_to_json(data.train.schema)})
    _write_manifest(args.out, args, {"scenario": args.scenario, "n": args.n}, args.seed)
    return 0


def _cmd_bench(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    coverage = tuple(m.strip() for m in args.coverage.split(",") if m.strip())
    spec = ScenarioSpec(
        variant=args.scenario,
        n=args.n,
        seed=0,  # per-replicate data seeds are derived inside run_benchmark
        test_size=args.test_size,
        beta2=args.beta2,
    )
    cfg = BenchConfig(
        replicates=args.replicates,
        seed=args.seed,
        permutations=args.permutations,
        resample_draws=args.draws,
        horizon_extra=args.horizon_extra,
        coverage_methods=coverage,
        level=args.level,
    )
    report = run_benchmark(spec, methods, cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
        fh.write("\n")
    if args.rows_csv is not None:
        report_rows_csv(report, args.rows_csv)
    _write_manifest(args.out, args, {"scenario": args.scenario, "methods": methods}, args.seed)
    return 0


def _cmd_report(args) -> int:
    state = load_fit(args.fit)
    grid = state.pmf.grid
    try:
        block = np.loadtxt(args.draws, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read draws file {args.draws}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"draws file {args.draws} is not numeric CSV: {exc}") from exc
    if block.shape[0] == 0:
        raise DataError(f"draws file {args.draws} has no draws")
    cells = block[:, 1:]
    if cells.shape[1] != grid.size:
        raise DataError(
            f"draws file has {cells.shape[1]} cell columns, grid has {grid.size}"
        )
    tail = (1.0 - args.level) / 2.0
    lo, hi = np.quantile(cells, [tail, 1.0 - tail], axis=0, method="linear")
    doc = _load_json(args.fit, "fit file")
    names = [c["name"] for c in doc["schema"]]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["p", "lower", "upper"])
        for i in range(grid.size):
            point = grid.point_at(i)
            writer.writerow(
                [*point, repr(float(state.pmf.probs[i])), repr(float(lo[i])), repr(float(hi[i]))]
            )
    _write_manifest(args.out, args, {"fit": args.fit, "level": args.level}, None)
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="madseq", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker cap for selection and resampling (default: MADSEQ_THREADS or 1)",
    )
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p_fit = sub.add_parser("fit", help="fit a predictive sequence to a CSV dataset")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--engine", choices=("auto", "numpy", "numba"), default="auto")
    p_fit.set_defaults(func=_cmd_fit)

    p_sel = sub.add_parser("select", help="prequential hyperparameter search")
    p_sel.add_argument("--data", required=True)
    p_sel.add_argument("--config", required=True)
    p_sel.add_argument("--out", required=True)
    p_sel.add_argument("--engine", choices=("auto", "numpy", "numba"), default="auto")
    p_sel.set_defaults(func=_cmd_select)

    p_res = sub.add_parser("resample", help="forward-simulate terminal pmf draws")
    p_res.add_argument("--fit", required=True)
    p_res.add_argument("--draws", type=int, required=True)
    p_res.add_argument("--horizon", type=int, required=True)
    p_res.add_argument("--seed", type=int, required=True)
    p_res.add_argument("--out", required=True)
    p_res.set_defaults(func=_cmd_resample)

    p_sim = sub.add_parser("simulate", help="draw a synthetic benchmark dataset")
    p_sim.add_argument("--scenario", choices=VARIANTS, required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--test-size", type=int, default=0)
    p_sim.add_argument("--test-out", default=None)
    p_sim.add_argument("--schema-out", default=None)
    p_sim.add_argument("--beta2", type=float, default=0.0)
    p_sim.set_defaults(func=_cmd_simulate)

    p_bench = sub.add_parser("bench", help="replicate benchmark across methods")
    p_bench.add_argument("--scenario", choices=VARIANTS, required=True)
    p_bench.add_argument("--n", type=int, required=True)
    p_bench.add_argument("--replicates", type=int, required=True)
    p_bench.add_argument("--seed", type=int, required=True)
    p_bench.add_argument("--methods", required=True, help=f"comma list from {ALL_METHODS}")
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--rows-csv", default=None)
    p_bench.add_argument("--coverage", default="", help="comma list of methods")
    p_bench.add_argument("--test-size", type=int, default=10_000)
    p_bench.add_argument("--beta2", type=float, default=0.0)
    p_bench.add_argument("--permutations", type=int, default=10)
    p_bench.add_argument("--draws", type=int, default=200)
    p_bench.add_argument("--horizon-extra", type=int, default=1000)
    p_bench.add_argument("--level", type=float, default=0.95)
    p_bench.set_defaults(func=_cmd_bench)

    p_rep = sub.add_parser("report", help="tidy CSV of pmf with credible bounds")
    p_rep.add_argument("--fit", required=True)
    p_rep.add_argument("--draws", required=True, help="CSV from the resample subcommand")
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--level", type=float, default=0.95)
    p_rep.set_defaults(func=_cmd_report)
    return parser


def run_command(argv) -> int:
    """Parse argv and run one subcommand, mapping errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise ConfigurationError("missing subcommand; see madseq --help")
        args.argv = list(argv)
        threads = args.threads
        if threads is None:
            threads = int(os.environ.get("MADSEQ_THREADS", "1"))
        if threads < 1:
            raise ConfigurationError(f"--threads must be >= 1, got {threads}")
        args.threads = threads
        set_threads(threads)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"madseq: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"madseq: data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"madseq: numerical failure: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)
