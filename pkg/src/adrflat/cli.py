"""Command-line front end: run scenarios, sweep parameters, verify the build.

Exit codes: 0 success, 1 configuration error, 2 unstable run.

The observer bandwidth names the magnitude of the (repeated) estimation
eigenvalue: ``--dob-bandwidth 1000`` places every root of the gain
polynomial at -1000 rad/s, i.e. stable estimation error dynamics with a
1000 rad/s bandwidth.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import AdrflatError, ScenarioError, UnstableRun
from .scenario import (
    apply_overrides,
    build_scenario,
    load_scenario_file,
    parse_scenario_text,
    serialize_scenario,
)
from .simulate import compute_metrics, run_scenario, write_metrics
from .svgplot import disturbance_figure, tracking_figure

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSTABLE = 2


def _resolve_scenario(path_arg: str) -> dict:
    """Load a scenario file, or a bundled scenario by bare name."""
    p = Path(path_arg)
    if p.exists():
        return load_scenario_file(p)
    name = path_arg[:-5] if path_arg.endswith(".toml") else path_arg
    try:
        text = (resources.files("adrflat") / "data" / f"{name}.toml").read_text()
    except (FileNotFoundError, ModuleNotFoundError):
        raise ScenarioError(f"scenario file not found: {path_arg}")
    return parse_scenario_text(text)


def _out_dir(arg: str | None, default_name: str) -> Path:
    root = Path(arg) if arg else Path(os.environ.get("ADRFLAT_OUT", "out")) / default_name
    root.mkdir(parents=True, exist_ok=True)
    return root


def _run_overrides(args) -> dict:
    return {
        "controller.variant": args.controller,
        "observer.order": args.dob_order,
        "observer.bandwidth": args.dob_bandwidth,
        "sim.dt": args.dt,
        "sim.t_end": args.duration,
        "sim.seed": args.seed,
    }


def _write_artifacts(out: Path, cfg: dict, log, unstable: bool) -> None:
    (out / "scenario.toml").write_text(serialize_scenario(cfg))
    log.to_csv(out / "log.csv")
    t_end = log.t[-1] if log.t.size else 0.0
    window = (min(0.4 * cfg["sim"]["t_end"], t_end), t_end)
    try:
        metrics = compute_metrics(log, window)
    except AdrflatError:
        metrics = {}
    metrics["window_start"] = window[0]
    metrics["window_end"] = window[1]
    metrics["unstable"] = float(unstable)
    write_metrics(metrics, out / "metrics.txt")
    tracking_figure(out / "fig_tracking.svg", log)
    disturbance_figure(out / "fig_disturbance.svg", log)


def cmd_run(args) -> int:
    try:
        cfg = _resolve_scenario(args.scenario)
        cfg = apply_overrides(cfg, _run_overrides(args))
        scenario = build_scenario(cfg)
    except (ScenarioError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args.out, Path(args.scenario).stem)
    print(f"running scenario -> {out} (seed {scenario.seed})")
    try:
        log = run_scenario(scenario)
    except UnstableRun as e:
        print(f"unstable run: {e}", file=sys.stderr)
        if e.log is not None:
            _write_artifacts(out, cfg, e.log, unstable=True)
        return EXIT_UNSTABLE
    except AdrflatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    _write_artifacts(out, cfg, log, unstable=False)
    print(f"wrote {out / 'log.csv'}, metrics.txt, fig_tracking.svg, fig_disturbance.svg")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_checks

    results = run_checks(name_filter=args.filter, inject_fault=args.inject_fault)
    if not results:
        print(f"no checks match filter {args.filter!r}", file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(r.name) for r in results)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        all_ok &= r.passed
        print(f"{status}  {r.name:<{width}}  [{r.runtime_s:7.2f}s]  {r.detail}")
    print(f"{'all checks passed' if all_ok else 'FAILURES present'}")
    return EXIT_OK if all_ok else 1


def _sweep_one(payload):
    cfg, out_dir, label = payload
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = build_scenario(cfg)
    row = {"value": label}
    try:
        log = run_scenario(scenario)
        unstable = False
    except UnstableRun as e:
        log = e.log
        unstable = True
    _write_artifacts(out, cfg, log, unstable)
    t_end = log.t[-1] if log.t.size else 0.0
    try:
        metrics = compute_metrics(log, (min(0.4 * cfg["sim"]["t_end"], t_end), t_end))
    except AdrflatError:
        metrics = {}
    for key in ("rmse_tracking", "max_abs_err", "settle_time", "est_rmse_d1_0", "est_rmse_d2_0"):
        row[key] = metrics.get(key, float("inf"))
    row["unstable"] = int(unstable)
    return row


def cmd_sweep(args) -> int:
    try:
        cfg = _resolve_scenario(args.scenario)
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not values:
            raise ScenarioError("--values list is empty")
        payloads = []
        for v in values:
            try:
                value = int(v) if v.lstrip("+-").isdigit() else float(v)
            except ValueError:
                raise ScenarioError(f"sweep value {v!r} is not numeric")
            swept = apply_overrides(cfg, {args.param: value})
            payloads.append((swept, None, v))
    except (ScenarioError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args.out, f"sweep_{args.param.replace('.', '_')}")
    payloads = [(cfg_i, str(out / v), v) for cfg_i, _, v in payloads]
    workers = args.workers or min(len(payloads), os.cpu_count() or 1)
    print(f"sweeping {args.param} over {values} with {workers} workers -> {out}")
    if workers <= 1:
        rows = [_sweep_one(p) for p in payloads]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    summary = out / "sweep_summary.csv"
    fields = ["value", "rmse_tracking", "max_abs_err", "settle_time",
              "est_rmse_d1_0", "est_rmse_d2_0", "unstable"]
    with open(summary, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {summary}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="adrflat",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write artifacts")
    run.add_argument("scenario", help="scenario .toml path or bundled name (paper_iv)")
    run.add_argument("--out", help="output directory (default $ADRFLAT_OUT/<name>)")
    run.add_argument("--controller", help="override controller.variant")
    run.add_argument("--dob-order", type=int, help="override observer.order")
    run.add_argument("--dob-bandwidth", type=float, help="override observer.bandwidth [rad/s]")
    run.add_argument("--dt", type=float, help="override sim.dt [s]")
    run.add_argument("--duration", type=float, help="override sim.t_end [s]")
    run.add_argument("--seed", type=int, help="override sim.seed")
    run.set_defaults(fn=cmd_run)

    verify = sub.add_parser("verify", help="run the acceptance checks")
    verify.add_argument("--filter", help="substring filter on check names")
    verify.add_argument(
        "--inject-fault",
        choices=("dob_gain",),
        help="deliberately corrupt a value to demonstrate failure reporting",
    )
    verify.set_defaults(fn=cmd_verify)

    sweep = sub.add_parser("sweep", help="run a scenario across parameter values")
    sweep.add_argument("scenario")
    sweep.add_argument("--param", required=True, help="dotted key, e.g. observer.bandwidth")
    sweep.add_argument("--values", required=True, help="comma-separated numeric values")
    sweep.add_argument("--out", help="output root (default $ADRFLAT_OUT/sweep_<param>)")
    sweep.add_argument("--workers", type=int, help="worker processes (default: cpu count)")
    sweep.set_defaults(fn=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
