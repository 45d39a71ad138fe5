"""Command-line front end: run, verify, sweep, fit-decay, report.

Exit codes: 0 success, 2 configuration error, 3 blow-up detected,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elwave",
        description="Pseudo-spectral lab for viscous flow coupled to director waves",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one scenario from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the scenario JSON")
    p_run.add_argument("--out", required=True, help="output directory for the run record")

    p_verify = sub.add_parser("verify", help="run a built-in verification suite")
    p_verify.add_argument(
        "--suite",
        required=True,
        choices=["oracles", "commutation", "sobolev", "duhamel", "all"],
    )

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep from a JSON config")
    p_sweep.add_argument("--config", required=True, help="base config plus a 'sweep' table")
    p_sweep.add_argument("--out", required=True)

    p_fit = sub.add_parser("fit-decay", help="fit a power law to a CSV time series")
    p_fit.add_argument("--series", required=True, help="CSV file with a t column")
    p_fit.add_argument("--column", required=True)
    p_fit.add_argument("--window", required=True, help="T0:T1")
    p_fit.add_argument("--log-corrected", action="store_true")

    p_report = sub.add_parser("report", help="regenerate report bundles from run records")
    p_report.add_argument("--in", dest="in_dir", required=True)
    p_report.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on bad flags and 0 on --help; keep those codes
        return int(err.code or 0)
    try:
        return _dispatch(args)
    except FileNotFoundError as err:
        print(f"error: missing file: {err.filename}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args) -> int:
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "sweep":
        return _cmd_sweep(args)
    if args.command == "fit-decay":
        return _cmd_fit(args)
    if args.command == "report":
        return _cmd_report(args)
    return EXIT_CONFIG


def _cmd_run(args) -> int:
    from .harness import ConfigError, ScenarioConfig, run_scenario, save_record

    if not os.path.exists(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ScenarioConfig.from_json_file(args.config)
    except (ConfigError, ValueError, TypeError) as err:
        print(f"error: bad config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    record = run_scenario(cfg)
    save_record(record, args.out)
    print(f"status: {record.status}  t_final: {record.t_final}  frames: {len(record.frames)}")
    print(f"record written to {args.out}")
    if record.status == "blowup":
        return EXIT_BLOWUP
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .harness import ConfigError, ScenarioConfig, run_sweep, save_record
    from .report import _write_table

    if not os.path.exists(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    with open(args.config) as fh:
        doc = json.load(fh)
    axes = doc.pop("sweep", None)
    if not isinstance(axes, dict) or not axes:
        print("error: sweep config needs a nonempty 'sweep' table", file=sys.stderr)
        return EXIT_CONFIG
    try:
        base = ScenarioConfig.from_json_dict(doc)
        records, summary = run_sweep(base, axes)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    for i, rec in enumerate(records):
        if rec is not None:
            save_record(rec, os.path.join(args.out, f"run_{i:03d}"))
    _write_table(os.path.join(args.out, "sweep_summary.csv"), summary)
    print(f"{len(records)} runs; summary at {os.path.join(args.out, 'sweep_summary.csv')}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    from .harness import FitError, fit_decay

    if not os.path.exists(args.series):
        print(f"error: series file not found: {args.series}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        t0, t1 = (float(tok) for tok in args.window.split(":"))
    except ValueError:
        print("error: window must be T0:T1", file=sys.stderr)
        return EXIT_CONFIG
    with open(args.series) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(tok) for tok in line.strip().split(",")] for line in fh if line.strip()]
    if "t" not in header or args.column not in header:
        print(f"error: series must contain 't' and {args.column!r} columns", file=sys.stderr)
        return EXIT_CONFIG
    ti, ci = header.index("t"), header.index(args.column)
    ts = np.array([row[ti] for row in rows])
    vals = np.array([row[ci] for row in rows])
    try:
        fit = fit_decay(ts, vals, (t0, t1), log_corrected=args.log_corrected)
    except FitError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"exponent: {fit.exponent:.6f}")
    print(f"intercept: {fit.intercept:.6f}")
    print(f"residual: {fit.residual:.3e}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .harness import load_record
    from .report import emit_report

    if not os.path.isdir(args.in_dir):
        print(f"error: input directory not found: {args.in_dir}", file=sys.stderr)
        return EXIT_CONFIG
    records = []
    for name in sorted(os.listdir(args.in_dir)):
        path = os.path.join(args.in_dir, name)
        if os.path.isdir(path) and os.path.exists(os.path.join(path, "config.json")):
            records.append(load_record(path))
    if not records and os.path.exists(os.path.join(args.in_dir, "config.json")):
        records.append(load_record(args.in_dir))
    emit_report(records, args.out)
    print(f"report for {len(records)} record(s) written to {args.out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify_suites import run_suites

    results = run_suites(args.suite)
    failed = 0
    for res in results:
        mark = "PASS" if res.ok else "FAIL"
        detail = f"  [{res.value:.3e}]" if isinstance(res.value, float) else ""
        print(f"[{mark}] {res.name}{detail} {res.note}")
        failed += 0 if res.ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
