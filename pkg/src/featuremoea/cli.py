"""Command-line entry point: ``featuremoea <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .dependency import ModelFaultError, transpose
from .experiment import (
    PROFILES,
    VARIANTS,
    Setup,
    TimestepRecord,
    optimize,
    records_from_jsonl,
    simulate,
)
from .feature_model import ModelError, dump_model, model_from_dict, model_to_dict, parse_model, validate_model
from .metrics import summarize, valid_fraction, wilcoxon_signed_rank
from .models import bundled_names, load_bundled
from .moea.core import ALGORITHMS, IBEA, MOEAD_STM, NSGA2, RunConfig
from .sas_bench import EnvTrace, SoaKnobs, SoaSystem, env_step, read_trace, write_trace

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3
ALGO_FLAGS = {"nsga2": NSGA2, "ibea": IBEA, "moead-stm": MOEAD_STM}
assert set(ALGO_FLAGS.values()) == set(ALGORITHMS)

OBJECTIVES = ("throughput", "cost")
SENSES = ("max", "min")
COMPARE_COLUMNS = ["section", "approach", "other", "metric", "value"]
SUMMARY_METRICS = ("gm_throughput", "gm_cost", "hv", "ed", "valid_pct")


class InputError(Exception):
    """Bad or unreadable input; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# input helpers


def resolve_model(name: str):
    """A path, a bundled model name (``web_stack``, ``mini_cache``) or ``soa[:seed]``.

    Returns ``(model, setup_or_None)``.
    """
    if name == "soa" or name.startswith("soa:"):
        try:
            seed = int(name.split(":", 1)[1]) if ":" in name else 0
        except ValueError:
            raise InputError(f"bad SOA seed in {name!r}") from None
        setup = Setup.default(seed, SoaKnobs())
        return setup.model, setup
    p = Path(name)
    try:
        if p.exists():
            text = p.read_text(encoding="utf-8")
            doc = json.loads(text)
            if isinstance(doc, dict) and "system" in doc:  # written by simulate
                setup = Setup(SoaSystem.from_dict(doc["system"]), model_from_dict(doc["model"]))
                return setup.model, setup
            return parse_model(text), None
        bundled = name if name.endswith(".json") else name + ".json"
        if bundled in bundled_names():
            return load_bundled(bundled), None
    except json.JSONDecodeError as e:
        raise InputError(f"{name}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    except (ModelError, OSError, UnicodeDecodeError, KeyError, TypeError) as e:
        raise InputError(f"{name}: {e}") from None
    raise InputError(f"{name}: no such file or bundled model (bundled: {', '.join(bundled_names())}, soa)")


def _soa_setup(name: str) -> Setup:
    _, setup = resolve_model(name)
    if setup is None:
        raise InputError("optimize/simulate need the SOA benchmark: use --model soa or soa:<seed>")
    return setup


def _load_trace(path: str | None, seed: int) -> EnvTrace:
    if path is None:
        return EnvTrace(seed=seed)
    try:
        return read_trace(path)
    except (OSError, ValueError, IndexError) as e:
        raise InputError(f"trace {path}: {e}") from None


def _run_config(args, profile) -> RunConfig:
    try:
        return RunConfig(
            pop_size=args.pop if args.pop is not None else profile.pop_size,
            generations=args.gens if args.gens is not None else profile.generations,
            mutation_rate=args.mutation_rate,
            crossover_rate=args.crossover_rate,
            algorithm=ALGO_FLAGS[args.algo],
            seed=args.seed,
        )
    except ValueError as e:
        raise InputError(str(e)) from None


def _slug(variant: str) -> str:
    return variant.replace("/", "_")


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


def _csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# subcommands


def cmd_transpose(args) -> int:
    model, _ = resolve_model(args.model)
    diags = validate_model(model)
    if diags:
        raise InputError("invalid model:\n" + "\n".join(f"  {d}" for d in diags))
    try:
        t = transpose(model)
    except ModelFaultError as e:
        raise InputError(f"model fault: {e}") from None
    out = _out_dir(args.out)
    _write(out / "chromosome.json", t.spec.dumps())
    _write(out / "grown_model.json", dump_model(t.grown.as_feature_model()))
    _write(out / "dependencies.json", t.dependency_document())
    n = len(t.spec.genes)
    if n == 0:
        print("warning: the model has no variability; the chromosome has 0 genes", file=sys.stderr)
    print(f"{n} genes, {len(t.dependencies)} dependencies, search space {t.spec.search_space_size}")
    return EXIT_OK


def cmd_validate(args) -> int:
    model, _ = resolve_model(args.model)
    diags = validate_model(model)
    for d in diags:
        print(d)
    if diags:
        return EXIT_INPUT
    print(f"ok: {len(model.features)} features, {len(model.cross_deps)} cross dependencies")
    return EXIT_OK


def _front_document(result, problem_senses) -> dict:
    signs = [-1.0 if s == "max" else 1.0 for s in problem_senses]
    rows = [
        {
            "assignment": list(s.assignment),
            "objectives": dict(zip(OBJECTIVES, (sg * v for sg, v in zip(signs, s.objectives)))),
            "valid": s.valid,
        }
        for s in result.front
    ]
    rows.sort(key=lambda r: (r["assignment"]))
    return {"front": rows, "population_valid_fraction": result.valid_fraction}


def cmd_optimize(args) -> int:
    setup = _soa_setup(args.model)
    profile = PROFILES[args.profile]
    cfg = _run_config(args, profile)
    system = setup.system
    if args.trace is not None or args.timestep is not None:
        trace = _load_trace(args.trace, args.seed)
        t = args.timestep or 0
        if not 0 <= t < len(trace):
            raise InputError(f"--timestep {t} outside trace of length {len(trace)}")
        system = env_step(trace, t, system)
    try:
        result, d = optimize(setup, system, args.variant, cfg, [args.seed, 0, 1])
    except (ValueError, RuntimeError) as e:
        raise RuntimeError(f"optimization failed: {e}") from e
    out = _out_dir(args.out)
    rows = [["generation", "evaluations", "valid_fraction",
             "best_throughput", "best_cost", "median_throughput", "median_cost"]]
    for r in result.log:
        rows.append([r.generation, r.evaluations, _num(r.valid_fraction),
                     _num(r.best[0]), _num(r.best[1]), _num(r.median[0]), _num(r.median[1])])
    _write(out / "run_log.csv", _csv_text(rows))
    _write(out / "front.json", json.dumps(_front_document(result, SENSES), indent=1, sort_keys=True) + "\n")
    record = {
        "variant": args.variant,
        "algorithm": cfg.algorithm if VARIANTS[args.variant].algorithm is None else VARIANTS[args.variant].algorithm,
        "seed": args.seed,
        "pop_size": cfg.pop_size,
        "generations": cfg.generations,
        **{k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(d).items()},
        "assignment": [int(x) for x in d.assignment],
        "evaluations": result.evaluations,
        "valid_fraction": result.valid_fraction,
        "operator_stats": result.operator_stats.as_dict(),
    }
    _write(out / "decision.json", json.dumps(record, indent=1, sort_keys=True) + "\n")
    print(f"{args.variant}: front {len(result.front)}, valid {result.valid_fraction:.0%}, "
          f"chosen throughput {d.throughput:.4g} cost {d.cost:.4g} ({'valid' if d.valid else 'invalid'})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    setup = _soa_setup(args.model)
    profile = PROFILES[args.profile]
    cfg = _run_config(args, profile)
    trace = _load_trace(args.trace, args.seed)
    n = args.timesteps if args.timesteps is not None else min(profile.timesteps, len(trace))
    if not 1 <= n <= len(trace):
        raise InputError(f"--timesteps must lie in [1, {len(trace)}]")
    out = _out_dir(args.out)
    write_trace(out / "trace.csv", trace, setup.system)
    system_doc = {"system": setup.system.to_dict(), "model": model_to_dict(setup.model)}
    _write(out / "system.json", json.dumps(system_doc, sort_keys=True) + "\n")
    for v in args.variant or ["FEMOSAA"]:
        log = simulate(setup, v, cfg, trace, n, args.seed)
        _write(out / f"{_slug(v)}.jsonl", log.to_jsonl())
        meta = log.metadata(variant=v, profile=args.profile, config=asdict(cfg), timesteps=n,
                            model=args.model, trace=args.trace)
        _write(out / f"{_slug(v)}.meta.json", json.dumps(meta, indent=1, sort_keys=True) + "\n")
        vf = valid_fraction([r.valid_fraction for r in log.records])
        print(f"{v}: {n} timesteps, mean valid fraction {vf:.3f}, "
              f"mean run {np.mean(log.timings):.3f}s")
    return EXIT_OK


def _read_logs(paths: Sequence[str]) -> dict[str, list[TimestepRecord]]:
    logs: dict[str, list[TimestepRecord]] = {}
    for p in paths:
        try:
            recs = records_from_jsonl(Path(p).read_text(encoding="utf-8"))
        except (OSError, ValueError, TypeError) as e:
            raise InputError(f"{p}: {e}") from None
        if not recs:
            raise InputError(f"{p}: empty log")
        name = recs[0].variant
        if name in logs:
            name = f"{name}@{Path(p).stem}"
        if name in logs:
            name = f"{name}#{len(logs)}"
        logs[name] = recs
    return logs


def compare_rows(logs: dict[str, list[TimestepRecord]]) -> list[list]:
    """Long-format table: summary metrics per approach, then pairwise tests per objective."""
    if len(logs) < 2:
        raise InputError("compare needs at least two logs")
    names = list(logs)
    ref = [(r.timestep, r.target_rsd) for r in logs[names[0]]]
    for n in names[1:]:
        if [(r.timestep, r.target_rsd) for r in logs[n]] != ref:
            raise InputError(f"logs {names[0]!r} and {n!r} are not aligned on timesteps")
    series = {n: [[getattr(r, o) for r in logs[n]] for o in OBJECTIVES] for n in names}
    vf = {n: valid_fraction([r.valid_fraction for r in logs[n]]) for n in names}
    rows: list[list] = [COMPARE_COLUMNS]
    for s in summarize(series, SENSES, vf):
        raw_gm = [1.0 / g if sense == "max" else g for g, sense in zip(s.gm, SENSES)]
        for metric, v in zip(SUMMARY_METRICS, (*raw_gm, s.hv, s.ed, 100 * s.valid_fraction)):
            rows.append(["summary", s.name, "", metric, _num(v)])
    for a, b in combinations(names, 2):
        for k, o in enumerate(OBJECTIVES):
            r = wilcoxon_signed_rank(series[a][k], series[b][k])
            rows.append(["wilcoxon", a, b, f"p_{o}", _num(r.p_value)])
            rows.append(["wilcoxon", a, b, f"effect_{o}", _num(r.effect_size)])
            rows.append(["wilcoxon", a, b, f"category_{o}", r.category])
    return rows


def cmd_compare(args) -> int:
    logs = _read_logs(args.logs)
    rows = compare_rows(logs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, _csv_text(rows))
    meta = {"normalization": "per comparison set (best/worst GM over the compared approaches)",
            "logs": list(args.logs), "approaches": list(logs)}
    _write(out.with_suffix(".meta.json"), json.dumps(meta, indent=1, sort_keys=True) + "\n")
    w = max(len(n) for n in logs)
    for r in rows[1:]:
        if r[0] == "summary" and r[3] in ("hv", "ed"):
            print(f"{r[1]:<{w}}  {r[3]} = {float(r[4]):.4f}")
    return EXIT_OK


PLOT_SCRIPT = '''\
# Render the panels written next to this file (requires matplotlib).
import csv, pathlib
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).parent
for path in sorted(here.glob("panel_*.csv")):
    rows = list(csv.DictReader(path.open()))
    fig, ax = plt.subplots(figsize=(4, 3))
    if "other" in rows[0]:
        labels = [f"{r['approach']} vs {r['other']}" for r in rows]
    else:
        labels = [r["approach"] for r in rows]
    ax.bar(range(len(rows)), [float(r["value"]) for r in rows])
    ax.set_xticks(range(len(rows)), labels, rotation=45, ha="right")
    ax.set_title(path.stem[len("panel_"):])
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=150)
'''


def report_panels(rows: list[dict]) -> dict[str, str]:
    """File name -> content, one data file per panel plus the plot script."""
    if not rows:
        raise InputError("comparison table is empty")
    files: dict[str, str] = {}
    for metric in SUMMARY_METRICS:
        sel = sorted((r["approach"], r["value"]) for r in rows if r["section"] == "summary" and r["metric"] == metric)
        if sel:
            files[f"panel_{metric}.csv"] = _csv_text([["approach", "value"], *sel])
    for o in OBJECTIVES:
        sel = sorted((r["approach"], r["other"], r["value"]) for r in rows
                     if r["section"] == "wilcoxon" and r["metric"] == f"p_{o}")
        if sel:
            files[f"panel_p_{o}.csv"] = _csv_text([["approach", "other", "value"], *sel])
    if not files:
        raise InputError("comparison table has no recognised metrics")
    files["plot_panels.py"] = PLOT_SCRIPT
    return files


def cmd_report(args) -> int:
    try:
        text = Path(args.comparison).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"{args.comparison}: {e}") from None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise InputError(f"{args.comparison}: empty comparison file")
    missing = [c for c in COMPARE_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise InputError(f"{args.comparison}: missing columns {', '.join(missing)}")
    files = report_panels(list(reader))
    out = _out_dir(args.out)
    for name, content in files.items():
        _write(out / name, content)
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="featuremoea", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_arg(sp, default=None):
        sp.add_argument("--model", default=default, required=default is None,
                        help="model JSON, system.json from simulate, bundled name (web_stack, mini_cache) or soa[:seed]")

    def search_args(sp):
        model_arg(sp, "soa")
        sp.add_argument("--algo", choices=sorted(ALGO_FLAGS), default="nsga2")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--profile", choices=sorted(PROFILES), default="paper")
        sp.add_argument("--pop", type=int, help="population size (overrides the profile)")
        sp.add_argument("--gens", type=int, help="generations (overrides the profile)")
        sp.add_argument("--mutation-rate", type=float, default=0.1)
        sp.add_argument("--crossover-rate", type=float, default=0.9)
        sp.add_argument("--trace", help="environment trace CSV (default: synthetic trace seeded by --seed)")
        sp.add_argument("--out", required=True)

    sp = sub.add_parser("transpose", help="write chromosome, grown model and dependency documents")
    model_arg(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_transpose)

    sp = sub.add_parser("validate", help="check a model and print diagnostics")
    model_arg(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("optimize", help="one optimization run on the SOA benchmark")
    search_args(sp)
    sp.add_argument("--variant", choices=sorted(VARIANTS), default="FEMOSAA")
    sp.add_argument("--timestep", type=int, help="use the environment at this trace timestep")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("simulate", help="one optimization per timestep over a trace")
    search_args(sp)
    sp.add_argument("--variant", choices=sorted(VARIANTS), action="append",
                    help="repeatable; default FEMOSAA")
    sp.add_argument("--timesteps", type=int, help="number of timesteps (default: the profile's)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="metrics table and pairwise tests over simulation logs")
    sp.add_argument("logs", nargs="+", help="simulation JSONL logs")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("report", help="per-panel data files and a plotting script")
    sp.add_argument("comparison", help="CSV written by compare")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help exits 0, errors already mapped to 1
        return int(e.code or 0)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001 - top-level boundary
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
