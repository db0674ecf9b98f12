"""Command line interface: run benchmarks, list problems, report sweeps.

``pecann run`` trains one problem over one or more seeds and writes, per
seed, a run directory ``<output>/<problem>/<strategy>/seed<k>/`` holding

- ``metrics.csv``: per-epoch objective, constraint levels, multiplier and
  penalty summaries, with an epoch-0 row for the initial parameters;
- ``summary.json``: the resolved configuration, final metrics, wallclock
  and run status;
- ``solution_grid.csv``: predictions (and exact values, when known) on
  the evaluation grid;
- ``multipliers.csv``: the per-point multiplier distribution by group
  (pointwise constraint mode only).

A multi-seed run finishes by aggregating its own seeds into
``<output>/<problem>/<strategy>/sweep_summary.csv`` (mean and standard
deviation per metric); ``pecann report`` produces the same aggregate for
an arbitrary directory tree of ``summary.json`` files.  Settings come
from an INI file (``--config``, sections ``[run]`` and ``[options]``)
with command line flags taking precedence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

from .alm import (
    AlmConfig,
    export_multiplier_distribution,
    initial_metrics,
    train,
    write_metrics_csv,
)
from .exceptions import ConfigurationError, TrainingAborted
from .lbfgs import LbfgsConfig
from .problems import available_problems, build_problem

__all__ = ["main"]

_FLOAT_FMT = "%.16e"


def _fmt(value):
    return _FLOAT_FMT % float(value)


def _parse_seeds(text):
    """Seed list syntax: ``4``, ``0,3,7`` or inclusive range ``0..9``."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ConfigurationError(f"empty seed range '{text}'")
        return list(range(lo, hi + 1))
    return [int(part) for part in text.split(",") if part.strip()]


def _parse_int_tuple(text):
    return tuple(int(part) for part in str(text).split(",") if part.strip())


def _coerce(text):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _parse_options(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(
                f"problem option '{pair}' is not KEY=VALUE"
            )
        key, value = pair.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


def _load_config_file(path):
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigurationError(f"cannot read config file '{path}'")
    run = dict(parser["run"]) if parser.has_section("run") else {}
    options = (
        {k: _coerce(v) for k, v in parser["options"].items()}
        if parser.has_section("options") else {}
    )
    return run, options


def _resolve_run_settings(args):
    """Merge defaults, config file and flags (flags win)."""
    file_run, file_options = (
        _load_config_file(args.config) if args.config else ({}, {})
    )

    def pick(flag, key, cast=None):
        if flag is not None:
            return flag
        if key in file_run and file_run[key] != "":
            raw = file_run[key]
            return cast(raw) if cast else raw
        return None

    problem = args.problem or args.problem_flag or file_run.get("problem")
    if not problem:
        raise ConfigurationError(
            "no problem named (positional argument, --problem or config file)"
        )
    settings = {
        "problem": problem,
        "strategy": pick(args.strategy, "strategy") or "apu",
        "constraint_mode": (
            pick(args.constraint_mode, "constraint_mode") or "expectation"
        ),
        "epochs": pick(args.epochs, "epochs", int),
        "seeds": _parse_seeds(pick(args.seeds, "seeds") or "0"),
        "layer_sizes": pick(args.layer_sizes, "layer_sizes", str),
        "lbfgs_max_iterations": pick(
            args.lbfgs_max_iterations, "lbfgs_max_iterations", int
        ),
        "batch_size": pick(args.batch_size, "batch_size", int),
        "eval_grid": pick(args.eval_grid, "eval_grid", str),
        "output": pick(args.output, "output"),
    }
    if settings["layer_sizes"] is not None:
        settings["layer_sizes"] = _parse_int_tuple(settings["layer_sizes"])
    if settings["eval_grid"] is not None:
        settings["eval_grid"] = _parse_int_tuple(settings["eval_grid"])
    if settings["output"] is None:
        settings["output"] = os.environ.get("PECANN_OUTPUT_ROOT", "runs")
    options = dict(file_options)
    options.update(_parse_options(args.option))
    settings["options"] = options
    return settings


def _write_table(path, columns, array):
    array = np.asarray(array)
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in array:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_multipliers(path, groups):
    distributions = export_multiplier_distribution(groups)
    with open(path, "w") as fh:
        fh.write("group,index,lambda\n")
        for name, lam in distributions.items():
            for i, value in enumerate(lam):
                fh.write(f"{name},{i},{_fmt(value)}\n")


def _run_single(settings, seed):
    """Train one seed and write its artifact directory; returns status."""
    spec = build_problem(settings["problem"], **settings["options"])
    epochs = (
        settings["epochs"] if settings["epochs"] is not None
        else spec.defaults.epochs
    )
    eval_grid = settings["eval_grid"] or spec.defaults.eval_grid
    layer_sizes = settings["layer_sizes"] or spec.defaults.layer_sizes
    lbfgs_iters = (
        settings["lbfgs_max_iterations"]
        if settings["lbfgs_max_iterations"] is not None
        else spec.defaults.lbfgs_max_iterations
    )

    run_dir = (
        Path(settings["output"]) / spec.name / settings["strategy"]
        / f"seed{seed}"
    )
    run_dir.mkdir(parents=True, exist_ok=True)

    model = spec.init_model(seed, layer_sizes)
    alm_config = AlmConfig(
        strategy=settings["strategy"],
        epochs=epochs,
        constraint_mode=settings["constraint_mode"],
        batch_size=settings["batch_size"],
    )
    lbfgs_config = LbfgsConfig(max_inner_iterations=lbfgs_iters)

    records = []
    started = time.perf_counter()
    status, error, result = "OK", None, None
    try:
        records.append(initial_metrics(spec, model, alm_config, seed))
        result = train(spec, model, alm_config, lbfgs_config, seed=seed)
        records += result.history
    except TrainingAborted as exc:
        status, error = "FAILED", str(exc)
        records += getattr(exc, "history", [])
    wallclock = time.perf_counter() - started

    if records:
        write_metrics_csv(records, run_dir / "metrics.csv")
    metrics = {}
    if result is not None:
        if spec.solution_table is not None:
            columns, table = spec.solution_table(result.model, eval_grid)
            _write_table(run_dir / "solution_grid.csv", columns, table)
        if spec.evaluate is not None:
            metrics = spec.evaluate(result.model, eval_grid)
        if settings["constraint_mode"] == "pointwise":
            _write_multipliers(run_dir / "multipliers.csv", result.groups)

    final = None
    if records:
        last = records[-1]
        final = {
            "epoch": last.epoch,
            "objective": last.objective,
            "constraints": dict(last.constraints),
        }
    summary = {
        "problem": spec.name,
        "strategy": settings["strategy"],
        "constraint_mode": settings["constraint_mode"],
        "options": dict(settings["options"]),
        "seed": seed,
        "epochs": epochs,
        "layer_sizes": list(layer_sizes),
        "lbfgs_max_iterations": lbfgs_iters,
        "batch_size": settings["batch_size"],
        "eval_grid": list(eval_grid),
        "status": status,
        "wallclock_seconds": wallclock,
        "metrics": {k: float(v) for k, v in metrics.items()},
        "final": final,
    }
    if error is not None:
        summary["error"] = error
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return status, run_dir, metrics


def _cmd_run(args):
    settings = _resolve_run_settings(args)
    failures = 0
    last_dir = None
    for seed in settings["seeds"]:
        status, run_dir, metrics = _run_single(settings, seed)
        shown = ", ".join(
            f"{k}={v:.4e}" for k, v in sorted(metrics.items())
        ) or "no metrics"
        print(f"{settings['problem']} seed={seed} {status}  {shown}")
        print(f"  artifacts: {run_dir}")
        if status != "OK":
            failures += 1
        last_dir = run_dir
    if len(settings["seeds"]) > 1 and last_dir is not None:
        # aggregate the sweep in place: <output>/<problem>/<strategy>/
        _write_sweep_summary(last_dir.parent)
    return 1 if failures else 0


def _cmd_list(_args):
    for name in available_problems():
        spec = build_problem(name)
        d = spec.defaults
        arch = "x".join(str(s) for s in d.layer_sizes)
        print(
            f"{name:18s} {spec.description:45s} "
            f"fields={','.join(spec.field_names):8s} "
            f"net={arch} epochs={d.epochs}"
        )
    return 0


def _write_sweep_summary(root):
    """Aggregate summary.json files under ``root`` into sweep_summary.csv.

    Returns False when no summaries are found, True otherwise.
    """
    summaries = sorted(root.rglob("summary.json"))
    if not summaries:
        return False
    grouped = defaultdict(list)
    for path in summaries:
        with open(path) as fh:
            summary = json.load(fh)
        grouped[(summary["problem"], summary["strategy"])].append(summary)

    rows = []
    for (problem, strategy), runs in sorted(grouped.items()):
        ok = [r for r in runs if r["status"] == "OK"]
        failed = len(runs) - len(ok)
        metric_names = sorted({m for r in ok for m in r["metrics"]})
        for metric in metric_names:
            values = [
                r["metrics"][metric] for r in ok if metric in r["metrics"]
            ]
            rows.append({
                "problem": problem,
                "strategy": strategy,
                "seeds": len(ok),
                "failed": failed,
                "metric": metric,
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
            })
        if not metric_names:
            rows.append({
                "problem": problem, "strategy": strategy,
                "seeds": len(ok), "failed": failed,
                "metric": "", "mean": np.nan, "std": np.nan,
            })

    out_path = root / "sweep_summary.csv"
    with open(out_path, "w") as fh:
        fh.write("problem,strategy,seeds,failed,metric,mean,std\n")
        for row in rows:
            fh.write(
                f"{row['problem']},{row['strategy']},{row['seeds']},"
                f"{row['failed']},{row['metric']},"
                f"{_fmt(row['mean'])},{_fmt(row['std'])}\n"
            )
    for row in rows:
        print(
            f"{row['problem']:18s} {row['strategy']:4s} "
            f"seeds={row['seeds']} failed={row['failed']} "
            f"{row['metric']:24s} {row['mean']:.4e} +/- {row['std']:.4e}"
        )
    print(f"wrote {out_path}")
    return True


def _cmd_report(args):
    root = Path(args.root or os.environ.get("PECANN_OUTPUT_ROOT", "runs"))
    if not _write_sweep_summary(root):
        print(f"no summary.json files under {root}", file=sys.stderr)
        return 1
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pecann",
        description="Constrained-network PDE benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train a benchmark, write artifacts")
    run_p.add_argument("problem", nargs="?",
                       help="problem name (see 'pecann list')")
    run_p.add_argument("--problem", dest="problem_flag", metavar="NAME",
                       help="alternative to the positional problem name")
    run_p.add_argument("--config", help="INI file, sections [run]/[options]")
    run_p.add_argument("--strategy", choices=["mpu", "cpu", "apu"])
    run_p.add_argument("--constraint-mode",
                       choices=["expectation", "pointwise"],
                       dest="constraint_mode")
    run_p.add_argument("--epochs", type=int)
    run_p.add_argument("--seeds", help="e.g. 4, 0,3,7 or 0..9")
    run_p.add_argument("--layer-sizes", dest="layer_sizes",
                       help="e.g. 2,50,50,1")
    run_p.add_argument("--lbfgs-max-iterations", type=int,
                       dest="lbfgs_max_iterations")
    run_p.add_argument("--batch-size", type=int, dest="batch_size")
    run_p.add_argument("--eval-grid", dest="eval_grid", help="e.g. 256,101")
    run_p.add_argument("--output",
                       help="artifact root (default $PECANN_OUTPUT_ROOT "
                            "or ./runs)")
    run_p.add_argument("--option", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="problem builder override, repeatable")
    run_p.set_defaults(func=_cmd_run)

    list_p = sub.add_parser("list", help="list registered problems")
    list_p.set_defaults(func=_cmd_list)

    report_p = sub.add_parser("report",
                              help="aggregate run summaries into a sweep CSV")
    report_p.add_argument("root", nargs="?",
                          help="directory to scan (default $PECANN_OUTPUT_ROOT"
                               " or ./runs)")
    report_p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
