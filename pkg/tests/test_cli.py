"""Command line surface: exit codes, artifacts, and round trips."""
import json

import numpy as np
import pytest

from madseq.cli import _canonical_digest, load_fit, run_command
from madseq.errors import NumericalError
from madseq.predictive import MadState

CONFIG = {
    "schema": [{"name": "y", "kind": "count", "role": "response", "ymax": 12}],
    "method": "mad",
    "kernel": [{"type": "uniform_window", "m": 1}],
    "weights": {"variant": "dpm"},
    "S": 3,
    "seed": 7,
}
ROWS = "y\n3\n5\n4\n7\n2\n5\n"


def write_inputs(tmp_path, config=None):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config if config is not None else CONFIG))
    data = tmp_path / "data.csv"
    data.write_text(ROWS)
    return str(data), str(cfg)


def run_fit(tmp_path, out="fit.json", engine="auto"):
    data, cfg = write_inputs(tmp_path)
    out_path = tmp_path / out
    rc = run_command(
        ["fit", "--data", data, "--config", cfg, "--out", str(out_path),
         "--engine", engine]
    )
    assert rc == 0
    return out_path


def test_fit_writes_document_and_manifest(tmp_path):
    out = run_fit(tmp_path)
    doc = json.loads(out.read_text())
    assert doc["method"] == "mad"
    assert doc["n"] == 6
    assert doc["S"] == 3
    assert doc["seed"] == 7
    probs = np.asarray(doc["probs"])
    assert probs.shape == (13,)
    assert abs(probs.sum() - 1.0) < 1e-12
    manifest = json.loads((tmp_path / "fit.json.manifest.json").read_text())
    assert set(manifest) == {"command", "config_digest", "seed", "created_utc", "version"}
    assert manifest["command"][0] == "fit"
    assert manifest["seed"] == 7
    assert manifest["config_digest"].startswith("sha256:")


def test_fit_round_trip_bit_equal(tmp_path):
    out = run_fit(tmp_path)
    doc = json.loads(out.read_text())
    state = load_fit(str(out))
    assert isinstance(state, MadState)
    assert state.n == 6
    assert state.pmf.probs.tolist() == doc["probs"]


def test_fit_rerun_is_byte_identical(tmp_path):
    first = run_fit(tmp_path, out="fit1.json")
    second = run_fit(tmp_path, out="fit2.json")
    assert first.read_bytes() == second.read_bytes()


def test_engine_flag_vocabulary(tmp_path):
    # grid of 13 cells sits below the auto threshold, so auto and numpy coincide
    by_engine = {
        engine: json.loads(run_fit(tmp_path, out=f"fit_{engine}.json", engine=engine).read_text())
        for engine in ("auto", "numpy", "numba")
    }
    assert by_engine["auto"]["probs"] == by_engine["numpy"]["probs"]
    np.testing.assert_allclose(
        by_engine["numba"]["probs"], by_engine["numpy"]["probs"], rtol=0, atol=1e-12
    )


def test_resample_and_report_pipeline(tmp_path):
    fit = run_fit(tmp_path)
    draws = tmp_path / "draws.csv"
    argv = ["resample", "--fit", str(fit), "--draws", "6", "--horizon", "20",
            "--seed", "11", "--out", str(draws)]
    assert run_command(argv) == 0
    lines = draws.read_text().splitlines()
    assert lines[0].split(",") == ["draw"] + [f"p_{i}" for i in range(13)]
    assert len(lines) == 7
    for line in lines[1:]:
        cells = [float(v) for v in line.split(",")[1:]]
        assert abs(sum(cells) - 1.0) < 1e-9

    rerun = tmp_path / "draws2.csv"
    argv[-1] = str(rerun)
    assert run_command(argv) == 0
    assert rerun.read_bytes() == draws.read_bytes()

    report = tmp_path / "report.csv"
    rc = run_command(
        ["report", "--fit", str(fit), "--draws", str(draws),
         "--out", str(report), "--level", "0.9"]
    )
    assert rc == 0
    rows = report.read_text().splitlines()
    assert rows[0] == "y,p,lower,upper"
    assert len(rows) == 14
    doc = json.loads(fit.read_text())
    for i, row in enumerate(rows[1:]):
        y, p, lo, hi = row.split(",")
        assert int(y) == i
        assert float(p) == doc["probs"][i]
        assert float(lo) <= float(hi)


def test_select_reports_best_candidate(tmp_path):
    config = dict(CONFIG)
    config["candidates"] = [
        [{"type": "point_mass"}, {"type": "uniform_window", "m": 1}]
    ]
    data, cfg = write_inputs(tmp_path, config)
    out = tmp_path / "selected.json"
    rc = run_command(
        ["select", "--data", data, "--config", cfg, "--out", str(out),
         "--engine", "numpy"]
    )
    assert rc == 0
    sel = json.loads(out.read_text())
    logliks = [entry["loglik"] for entry in sel["table"]]
    assert sel["best_index"] == int(np.argmax(logliks))
    assert sel["best"] == sel["table"][sel["best_index"]]["candidate"]


def test_select_dp_has_nothing_to_tune(tmp_path, capsys):
    config = {"schema": CONFIG["schema"], "method": "dp"}
    data, cfg = write_inputs(tmp_path, config)
    rc = run_command(["select", "--data", data, "--config", cfg, "--out", "x.json"])
    assert rc == 1
    assert "no hyperparameters" in capsys.readouterr().err


def test_simulate_writes_train_test_and_schema(tmp_path):
    out = tmp_path / "train.csv"
    test_out = tmp_path / "test.csv"
    schema_out = tmp_path / "schema.json"
    argv = ["simulate", "--scenario", "regression", "--n", "8", "--seed", "3",
            "--out", str(out), "--test-size", "5", "--test-out", str(test_out),
            "--schema-out", str(schema_out)]
    assert run_command(argv) == 0
    assert len(out.read_text().splitlines()) == 9
    assert len(test_out.read_text().splitlines()) == 6
    schema = json.loads(schema_out.read_text())["schema"]
    assert len(schema) == 11
    assert schema[-1] == {"name": "y", "kind": "count", "role": "response", "ymax": 200}

    rerun = tmp_path / "train2.csv"
    argv[8] = str(rerun)
    assert run_command(argv) == 0
    assert rerun.read_bytes() == out.read_bytes()


def test_bench_smoke_and_determinism(tmp_path):
    out = tmp_path / "bench.json"
    rows = tmp_path / "rows.csv"
    argv = ["bench", "--scenario", "illustrative", "--n", "10",
            "--replicates", "1", "--seed", "5", "--methods", "dp",
            "--out", str(out), "--rows-csv", str(rows),
            "--test-size", "30", "--permutations", "2",
            "--draws", "8", "--horizon-extra", "10"]
    assert run_command(argv) == 0
    report = json.loads(out.read_text())
    assert "timing" not in report
    assert "mean_hellinger" in report["summary"]["dp"]
    assert rows.read_text().startswith("replicate,method,metric,value")

    rerun = tmp_path / "bench2.json"
    argv[12] = str(rerun)
    assert run_command(argv) == 0
    assert rerun.read_bytes() == out.read_bytes()


def test_usage_errors_exit_1(tmp_path, capsys):
    assert run_command([]) == 1
    assert run_command(["fit", "--nope"]) == 1
    data, cfg = write_inputs(tmp_path)
    assert run_command(
        ["fit", "--data", data, "--config", cfg, "--out", "x.json",
         "--engine", "fortran"]
    ) == 1
    assert run_command(
        ["--threads", "0", "fit", "--data", data, "--config", cfg, "--out", "x.json"]
    ) == 1
    assert "madseq: error:" in capsys.readouterr().err


def test_bad_config_exits_1(tmp_path, capsys):
    data = tmp_path / "data.csv"
    data.write_text(ROWS)
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    rc = run_command(["fit", "--data", str(data), "--config", str(broken), "--out", "x.json"])
    assert rc == 1
    assert "not valid JSON" in capsys.readouterr().err

    no_schema = tmp_path / "no_schema.json"
    no_schema.write_text(json.dumps({"method": "dp"}))
    rc = run_command(["fit", "--data", str(data), "--config", str(no_schema), "--out", "x.json"])
    assert rc == 1
    assert "schema" in capsys.readouterr().err


def test_data_error_exits_2_and_names_the_cell(tmp_path, capsys):
    _, cfg = write_inputs(tmp_path)
    bad = tmp_path / "bad.csv"
    bad.write_text("y\n3\n999\n")
    rc = run_command(["fit", "--data", str(bad), "--config", cfg, "--out", "x.json"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "madseq: data error:" in err
    assert "value 999 out of range [0, 12] at row 2, column 'y'" in err


def test_numerical_failure_exits_3(tmp_path, capsys, monkeypatch):
    import madseq.cli as cli

    def boom(args):
        raise NumericalError("synthetic failure")

    monkeypatch.setattr(cli, "_cmd_fit", boom)
    data, cfg = write_inputs(tmp_path)
    rc = run_command(["fit", "--data", data, "--config", cfg, "--out", "x.json"])
    assert rc == 3
    assert "madseq: numerical failure: synthetic failure" in capsys.readouterr().err


def test_broken_fit_file_exits_1(tmp_path, capsys):
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"schema": CONFIG["schema"], "n": 3, "method": "dp"}))
    rc = run_command(
        ["resample", "--fit", str(partial), "--draws", "2", "--horizon", "5",
         "--seed", "0", "--out", str(tmp_path / "d.csv")]
    )
    assert rc == 1
    assert "'probs'" in capsys.readouterr().err


def test_report_rejects_mismatched_draws(tmp_path, capsys):
    fit = run_fit(tmp_path)
    draws = tmp_path / "narrow.csv"
    draws.write_text("draw,p_0,p_1\n0,0.5,0.5\n")
    rc = run_command(
        ["report", "--fit", str(fit), "--draws", str(draws), "--out", "x.csv"]
    )
    assert rc == 2
    assert "2 cell columns" in capsys.readouterr().err


def test_canonical_digest_ignores_key_order():
    a = {"alpha": 1, "nested": {"b": [1, 2], "a": 3}}
    b = {"nested": {"a": 3, "b": [1, 2]}, "alpha": 1}
    assert _canonical_digest(a) == _canonical_digest(b)
    assert _canonical_digest(a) != _canonical_digest({"alpha": 2})
