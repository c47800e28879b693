"""Command-line front end: ``mmtc {analytic,simulate,figure,validate}``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
failure, 4 degenerate topology after repeated resampling.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import traceback
import warnings
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, ConfigError, RunConfig, format_config, load_config
from .metrics import evaluate, sweep
from .params import SchedulingScheme, db_to_linear
from .simulator import (
    DegenerateTopologyError,
    SimConfig,
    estimate,
    estimate_multi,
    write_estimate_csv,
    write_tallies_csv,
)
from .specfun import QuadratureError, SeriesError

log = logging.getLogger("mmtc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOPOLOGY = 0, 2, 3, 4
ANALYTIC_COLUMNS = (
    "p_occupy",
    "p_nondrop",
    "p_suc1",
    "p_suc2",
    "pmf_k1_mean",
    "p_mtd_success",
    "avg_successful_mtds",
    "p_channel_util",
    "successful_mtds_per_km2",
)
FIGURES = ("f2", "f3", "f4", "f5", "f6", "f7")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    config_path: str | None
    command: str
    master_seed: int
    started_at: str
    artifact_version: str
    output_paths: list


def _header(cfg: RunConfig, command: str, scheme: SchedulingScheme) -> list[str]:
    lines = [f"mmtc {command} (artifact {__version__})"]
    for line in format_config(cfg).splitlines():
        if line.startswith("scheme ="):
            line = f"scheme = {scheme.value}"
        lines.append(line)
    return lines


def _write_manifest(path: Path, manifest: RunManifest) -> None:
    path.write_text(json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")


def _failing_op(exc: BaseException) -> str:
    """Innermost function of this package on the traceback."""
    name = "unknown"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        if frame.f_globals.get("__name__", "").startswith("mmtc"):
            name = frame.f_code.co_name
    return name


# ---------------------------------------------------------------------------
# verbs


def cmd_analytic(cfg: RunConfig, scheme: SchedulingScheme, out: Path, header: list[str]) -> list[Path]:
    report = evaluate(cfg.params, scheme)
    values = report.scalars()
    with open(out, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANALYTIC_COLUMNS)
        w.writerow([repr(float(values[c])) for c in ANALYTIC_COLUMNS])
    return [out]


def cmd_simulate(cfg: RunConfig, out: Path, header: list[str], tallies: Path | None) -> list[Path]:
    est = estimate(cfg.params, cfg.sim)
    if est.resamples:
        log.warning("resampled %d degenerate topologies", est.resamples)
    write_estimate_csv(est, out, header)
    paths = [out]
    if tallies is not None:
        write_tallies_csv(est, tallies, header)
        paths.append(tallies)
    return paths


def _figure_plan(fig: str, cfg: RunConfig, scheme: SchedulingScheme):
    """``(name, base params, axis, grid, metric, series label, scheme)`` per curve."""
    p = cfg.params
    n_grid = list(range(10, 121, 10))
    tw_grid = list(range(50, 301, 25))
    plan = []
    if fig == "f2":
        for db in (-5.0, 0.0, 5.0):
            for sc in SchedulingScheme:
                plan.append(("f2", p.with_(gamma1=db_to_linear(db)), "n_channels", n_grid, "p_suc1",
                             f"gamma1={db:g}dB", sc))
    elif fig == "f3":
        for n in (30, 50, 70):
            for sc in SchedulingScheme:
                plan.append(("f3", p.with_(n_channels=n), "resource_tw", tw_grid, "p_suc2", f"N={n}", sc))
    elif fig == "f4":
        for sub, metric in (("f4a", "p_mtd_success"), ("f4b", "avg_successful_mtds"), ("f4c", "p_channel_util")):
            for n in (30, 50, 70):
                plan.append((sub, p.with_(n_channels=n), "resource_tw", tw_grid, metric, f"N={n}", scheme))
    elif fig == "f5":
        for sub, metric in (("f5a", "p_channel_util"), ("f5b", "p_mtd_success")):
            for tw in (50, 100, 300):
                plan.append((sub, p.with_(resource_tw=tw), "n_channels", n_grid, metric, f"TW={tw}", scheme))
    elif fig == "f6":
        for a in (3.0, 3.5, 4.0):
            plan.append(("f6a", p.with_(alpha=a), "n_channels", n_grid, "p_mtd_success", f"alpha={a:g}", scheme))
        for e in (-5.0, -4.5, -4.0):
            plan.append(("f6b", p.with_(lambda_a=10.0**e), "n_channels", n_grid, "p_mtd_success",
                         f"lambda_a=1e{e:g}", scheme))
    elif fig == "f7":
        grid = [10.0**e for e in np.arange(-5.5, -3.49, 0.25)]
        for sub, metric in (("f7a", "p_channel_util"), ("f7b", "p_mtd_success"), ("f7c", "successful_mtds_per_km2")):
            for n, tw in ((30, 300), (70, 300), (70, 100)):
                plan.append((sub, p.with_(n_channels=n, resource_tw=tw), "lambda_a", grid, metric,
                             f"N={n} TW={tw}", scheme))
    else:
        raise UsageError(f"unknown figure id {fig!r} (expected one of {', '.join(FIGURES)})")
    return plan


def _sim_overlay(plan, runs: int, seed: int):
    """Desk-scale simulation at the analytic grid points of every curve."""
    rows = []
    for sub, base, axis, grid, metric, label, sc in plan:
        cfg = SimConfig.desk(n_runs=runs, master_seed=seed, scheme=sc)
        if axis == "resource_tw":
            res = estimate_multi(base, cfg, grid)
            for x in grid:
                e = res[x][metric]
                rows.append((sub, x, e.mean, e.stderr, e.n, sc.value, label))
        else:
            for x in grid:
                e = estimate(base.with_(**{axis: x}), cfg)[metric]
                rows.append((sub, x, e.mean, e.stderr, e.n, sc.value, label))
    return rows


def cmd_figure(cfg: RunConfig, fig: str, scheme: SchedulingScheme, out_dir: Path, header: list[str],
               with_sim: bool, runs: int, seed: int) -> list[Path]:
    plan = _figure_plan(fig, cfg, scheme)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: dict[str, list] = {}
    failures = []
    for sub, base, axis, grid, metric, label, sc in plan:
        for point in sweep(base, axis, grid, sc):
            if point.report is None:
                failures.append(f"{sub} {label} {axis}={point.x}: {point.error}")
                value = math.nan
            else:
                value = point.report.scalars()[metric]
            rows.setdefault(sub, []).append((point.x, metric, value, sc.value, label))
    paths = []
    for sub, sub_rows in rows.items():
        path = out_dir / f"{sub}.csv"
        metric = sub_rows[0][1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", metric, "scheme", "series"])
            for x, _, v, sc, label in sub_rows:
                w.writerow([repr(float(x)), repr(float(v)), sc, label])
        paths.append(path)
    if with_sim:
        overlay: dict[str, list] = {}
        for row in _sim_overlay(plan, runs, seed):
            overlay.setdefault(row[0], []).append(row[1:])
        for sub, sub_rows in overlay.items():
            path = out_dir / f"{sub}_sim.csv"
            metric = rows[sub][0][1]
            with open(path, "w", newline="", encoding="utf-8") as fh:
                for line in header + ["simulation overlay at the desk preset"]:
                    fh.write(f"# {line}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["x", metric, "stderr", "n", "scheme", "series"])
                for x, m, se, n, sc, label in sub_rows:
                    w.writerow([repr(float(x)), repr(m), repr(se), n, sc, label])
            paths.append(path)
    if failures:
        raise ArithmeticError("sweep points failed: " + "; ".join(failures))
    return paths


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--preset", choices=PRESETS, help="base parameter set (config keys override it)")
    common.add_argument("--scheme", choices=[s.value for s in SchedulingScheme], help="scheduling scheme")
    common.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mmtc", description="Two-phase mMTC aggregation network analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", parents=[common], help="evaluate the analytical metrics")
    p.add_argument("--out", type=Path, required=True, help="output CSV")

    p = sub.add_parser("simulate", parents=[common], help="run the Monte-Carlo simulator")
    p.add_argument("--out", type=Path, required=True, help="output CSV")
    p.add_argument("--runs", type=int, help="number of realizations")
    p.add_argument("--tallies", type=Path, help="also write per-realization tallies here")

    p = sub.add_parser("figure", parents=[common], help="emit the sweep tables behind a figure")
    p.add_argument("figure_id", help=f"one of {', '.join(FIGURES)}")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--with-sim", action="store_true", help="add a desk-scale simulation overlay")
    p.add_argument("--runs", type=int, default=1000, help="realizations per overlay point")

    sub.add_parser("validate", parents=[common], help="check a configuration and exit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")

    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg = load_config(args.config, args.preset)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        sim_kw = {}
        if args.scheme:
            sim_kw["scheme"] = args.scheme
        if args.seed is not None:
            sim_kw["master_seed"] = args.seed
        if getattr(args, "runs", None) is not None and args.command == "simulate":
            sim_kw["n_runs"] = args.runs
        cfg = RunConfig(cfg.params, cfg.sim.with_(**sim_kw))
        if args.command == "figure" and args.figure_id not in FIGURES:
            raise UsageError(f"unknown figure id {args.figure_id!r} (expected one of {', '.join(FIGURES)})")
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    scheme = cfg.sim.scheme
    if args.command == "validate":
        print("configuration ok")
        print(format_config(cfg), end="")
        return EXIT_OK

    header = _header(cfg, args.command, scheme)
    try:
        if args.command == "analytic":
            paths = cmd_analytic(cfg, scheme, args.out, header)
        elif args.command == "simulate":
            paths = cmd_simulate(cfg, args.out, header, args.tallies)
        else:
            if args.runs < 1:
                raise UsageError("--runs must be >= 1")
            paths = cmd_figure(cfg, args.figure_id, scheme, args.out, header, args.with_sim, args.runs,
                               cfg.sim.master_seed)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateTopologyError as exc:
        print(f"error: degenerate topology: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except (QuadratureError, SeriesError, ArithmeticError, ValueError) as exc:
        print(f"error: numerical failure in {_failing_op(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out
    manifest_path = out / "manifest.json" if args.command == "figure" else out.with_name(out.name + ".manifest.json")
    _write_manifest(manifest_path, RunManifest(
        config_path=str(args.config) if args.config else None,
        command=" ".join([args.command] + ([args.figure_id] if args.command == "figure" else [])
                         + [f"--scheme={scheme.value}"]),
        master_seed=cfg.sim.master_seed,
        started_at=started,
        artifact_version=__version__,
        output_paths=[str(p) for p in paths],
    ))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
