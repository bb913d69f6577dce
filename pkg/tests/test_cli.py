import csv
import json

import pytest

from featuremoea.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from featuremoea.feature_model import CATEGORICAL


def run(*argv):
    return main([str(a) for a in argv])


def test_transpose_web_stack(tmp_path):
    assert run("transpose", "--model", "web_stack", "--out", tmp_path) == EXIT_OK
    chrom = json.loads((tmp_path / "chromosome.json").read_text())
    assert len(chrom["genes"]) == 10
    assert (tmp_path / "grown_model.json").exists()
    deps = json.loads((tmp_path / "dependencies.json").read_text())
    assert len(deps["value_trees"]) == 10


def test_transpose_minimal_model_warns(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"root": "r", "features": [
        dict(id="r", name="r", kind=CATEGORICAL, parent=None, relation=None, group=None)]}))
    assert run("transpose", "--model", path, "--out", tmp_path / "o") == EXIT_OK
    assert "0 genes" in capsys.readouterr().err
    assert json.loads((tmp_path / "o" / "chromosome.json").read_text())["genes"] == []


def test_malformed_model(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    assert run("transpose", "--model", path, "--out", tmp_path / "o") == EXIT_INPUT
    assert "line 1" in capsys.readouterr().err
    assert run("validate", "--model", tmp_path / "missing.json") == EXIT_INPUT


def test_usage_errors_exit_one():
    assert run("optimize") == EXIT_USAGE
    assert run("frobnicate") == EXIT_USAGE
    assert run("optimize", "--out", "x", "--algo", "sa") == EXIT_USAGE


def test_validate(capsys):
    assert run("validate", "--model", "mini_cache") == EXIT_OK
    assert "ok:" in capsys.readouterr().out


def test_optimize_outputs(tmp_path):
    assert run("optimize", "--model", "soa", "--seed", 1, "--out", tmp_path) == EXIT_OK
    rec = json.loads((tmp_path / "decision.json").read_text())
    assert rec["valid"] and rec["valid_fraction"] == 1.0 and rec["evaluations"] == 1000
    log = list(csv.DictReader((tmp_path / "run_log.csv").open()))
    assert len(log) == 10 and all(float(r["valid_fraction"]) == 1.0 for r in log)
    front = json.loads((tmp_path / "front.json").read_text())["front"]
    assert front and all(f["valid"] for f in front)


def test_optimize_zero_generations(tmp_path):
    assert run("optimize", "--gens", 0, "--pop", 10, "--variant", "FEMOSAA-D", "--out", tmp_path) == EXIT_OK
    rec = json.loads((tmp_path / "decision.json").read_text())
    assert rec["evaluations"] == 10 and rec["index"] is not None and rec["seed"] == 0


def test_optimize_rejects_bad_rate(tmp_path):
    assert run("optimize", "--mutation-rate", 2, "--out", tmp_path) == EXIT_INPUT


def test_optimize_needs_soa(tmp_path):
    assert run("optimize", "--model", "web_stack", "--out", tmp_path) == EXIT_INPUT


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--profile", "ci", "--timesteps", 4, "--variant", "FEMOSAA", "--variant", "FEMOSAA-N",
               "--variant", "FEMOSAA-0/1", "--seed", 2, "--out", d) == EXIT_OK
    return d


def test_simulate_writes_logs(sim_dir):
    lines = (sim_dir / "FEMOSAA.jsonl").read_text().splitlines()
    assert len(lines) == 4
    meta = json.loads((sim_dir / "FEMOSAA.meta.json").read_text())
    assert "created" in meta and len(meta["run_seconds"]) == 4
    assert (sim_dir / "FEMOSAA-0_1.jsonl").exists()
    assert (sim_dir / "trace.csv").exists() and (sim_dir / "system.json").exists()


def test_simulate_repeat_is_identical(sim_dir, tmp_path):
    assert run("simulate", "--profile", "ci", "--timesteps", 4, "--variant", "FEMOSAA", "--seed", 2,
               "--out", tmp_path) == EXIT_OK
    assert (tmp_path / "FEMOSAA.jsonl").read_bytes() == (sim_dir / "FEMOSAA.jsonl").read_bytes()


def test_optimize_reads_simulate_artifacts(sim_dir, tmp_path):
    args = ["optimize", "--profile", "ci", "--trace", sim_dir / "trace.csv", "--timestep", 2]
    assert run(*args, "--model", sim_dir / "system.json", "--out", tmp_path / "a") == EXIT_OK
    assert run(*args, "--model", "soa", "--out", tmp_path / "b") == EXIT_OK
    assert (tmp_path / "a" / "decision.json").read_bytes() == (tmp_path / "b" / "decision.json").read_bytes()


def test_compare_and_report(sim_dir, tmp_path):
    logs = [sim_dir / f"{v}.jsonl" for v in ("FEMOSAA", "FEMOSAA-N", "FEMOSAA-0_1")]
    out = tmp_path / "cmp.csv"
    assert run("compare", *logs, "--out", out) == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    pairs = {(r["approach"], r["other"]) for r in rows if r["section"] == "wilcoxon"}
    assert len(pairs) == 3
    summary = {(r["approach"], r["metric"]): float(r["value"]) for r in rows if r["section"] == "summary"}
    assert summary[("FEMOSAA", "valid_pct")] == 100.0
    assert run("report", out, "--out", tmp_path / "r1") == EXIT_OK
    assert run("report", out, "--out", tmp_path / "r2") == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "r1").iterdir())
    assert "panel_hv.csv" in files and "panel_ed.csv" in files and "plot_panels.py" in files
    for f in files:
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()


def test_compare_identical_logs(sim_dir, tmp_path):
    log = sim_dir / "FEMOSAA.jsonl"
    assert run("compare", log, log, "--out", tmp_path / "c.csv") == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "c.csv").open()))
    assert {float(r["value"]) for r in rows if r["metric"].startswith("p_")} == {1.0}


def test_compare_misaligned(sim_dir, tmp_path):
    short = tmp_path / "short.jsonl"
    short.write_text("".join((sim_dir / "FEMOSAA-N.jsonl").read_text().splitlines(True)[:2]))
    assert run("compare", sim_dir / "FEMOSAA.jsonl", short, "--out", tmp_path / "c.csv") == EXIT_INPUT
    assert run("compare", sim_dir / "FEMOSAA.jsonl", "--out", tmp_path / "c.csv") == EXIT_INPUT


def test_report_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert run("report", empty, "--out", tmp_path / "r") == EXIT_INPUT
    header_only = tmp_path / "h.csv"
    header_only.write_text("section,approach,other,metric,value\n")
    assert run("report", header_only, "--out", tmp_path / "r") == EXIT_INPUT
    wrong = tmp_path / "w.csv"
    wrong.write_text("a,b\n1,2\n")
    assert run("report", wrong, "--out", tmp_path / "r") == EXIT_INPUT
