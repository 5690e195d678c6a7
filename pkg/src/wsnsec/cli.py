"""Command-line experiment runner.

Exit codes: 0 success, 1 invariant or validation failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from collections import defaultdict
from pathlib import Path

from . import metrics
from .checks import run_invariant_checks
from .experiments import EXPERIMENTS, run_experiment
from .scenario import Scenario, ScenarioError, load_deployment, parse_scenario

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsnsec",
        description="Key-management protocol simulator and experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario file")
    run.add_argument("scenario", help="scenario file path")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--until", type=int, help="override the run duration (ticks)")
    run.add_argument("--snr-threshold", type=float, help="delivery SNR threshold (dB)")
    run.add_argument("--tmin", type=int, help="override the erasure deadline (ticks)")
    run.add_argument("--tp", type=int, help="override the check period (ticks)")
    run.add_argument("--p-detect", type=float, help="override sentinel probability")
    run.add_argument("--check", action="store_true", help="fail on invariant violations")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="csv")

    sweep = sub.add_parser("sweep", help="run one experiment recipe")
    sweep.add_argument("experiment", choices=EXPERIMENTS)
    sweep.add_argument("--step", type=int, default=2, help="network-size step (pairwise_time)")
    sweep.add_argument("--points", type=int, default=10, help="grid points (pairwise_time)")
    sweep.add_argument("--reps", type=int, help="repetitions per grid point")
    sweep.add_argument("--degree", type=int, help="fixed node degree")
    sweep.add_argument("--seed", type=int, default=1)
    sweep.add_argument("--out", default="results", help="output directory")
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")

    report = sub.add_parser("report", help="summarize result files in a directory")
    report.add_argument("results_dir")
    return parser


def cmd_run(args) -> int:
    path = Path(args.scenario)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        scenario = parse_scenario(text, source=str(path))
        scenario = _apply_overrides(scenario, args)
        deployment = load_deployment(scenario, base_dir=path.parent)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    deployment.run()
    result = deployment.summarize()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.txt").write_text(deployment.sim.trace_text(), encoding="utf-8")
    metrics.export([result], args.format, out / f"results.{args.format}")
    print(
        f"run complete: n={result.n} seed={result.seed} "
        f"success_rate={result.success_rate:.3f} energy={result.energy_units:.0f}"
    )
    if args.check:
        violations = run_invariant_checks(deployment)
        if violations:
            for v in violations:
                print(f"invariant violation: {v}", file=sys.stderr)
            return EXIT_FAIL
        print("all invariant checks passed")
    return EXIT_OK


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if args.seed is not None:
        scenario.seed = args.seed
    if args.until is not None:
        scenario.until = args.until
    if args.snr_threshold is not None:
        scenario.snr_threshold = args.snr_threshold
    protocol = scenario.protocol
    updates = {}
    if args.tmin is not None:
        updates["t_min"] = args.tmin
    if args.tp is not None:
        updates["t_p"] = args.tp
    if args.p_detect is not None:
        updates["p_detect"] = args.p_detect
    if updates:
        base = {
            "t_min": protocol.t_min,
            "t_p": protocol.t_p,
            "hello_jitter": protocol.hello_jitter,
            "p_detect": protocol.p_detect,
            "block_duration": protocol.block_duration,
        }
        base.update(updates)
        scenario.protocol = type(protocol)(**base)
    return scenario


def cmd_sweep(args) -> int:
    params = {"seed": args.seed, "step": args.step, "points": args.points}
    if args.reps is not None:
        params["reps"] = args.reps
    if args.degree is not None:
        params["degree"] = args.degree
    results = run_experiment(args.experiment, **params)
    results.sort(key=lambda r: (r.n, r.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{args.experiment}.{args.format}"
    metrics.export(results, args.format, target)
    print(f"{args.experiment}: {len(results)} rows -> {target}")
    return EXIT_OK


def cmd_report(args) -> int:
    root = Path(args.results_dir)
    files = sorted(root.glob("*.csv")) + sorted(root.glob("*.json")) if root.is_dir() else []
    groups: dict[str, list[metrics.ExperimentResult]] = defaultdict(list)
    for f in files:
        try:
            text = f.read_text(encoding="utf-8")
            rows = metrics.from_csv(text) if f.suffix == ".csv" else metrics.from_json(text)
        except Exception as exc:
            print(f"warning: skipping {f}: {exc}", file=sys.stderr)
            continue
        groups[f.stem].extend(rows)
    if not groups:
        print("no results", file=sys.stderr)
        return EXIT_FAIL
    for name in sorted(groups):
        rows = groups[name]
        print(f"== {name} ({len(rows)} rows)")
        print(f"{'n':>5} {'runs':>5} {'success':>9} {'time_us':>12} {'max_msgs':>9} {'energy':>12}")
        by_n: dict[int, list[metrics.ExperimentResult]] = defaultdict(list)
        for r in rows:
            by_n[r.n].append(r)
        plot_rows = []
        for n in sorted(by_n):
            rs = by_n[n]
            mean = lambda xs: sum(xs) / len(xs)
            succ = mean([r.success_rate for r in rs])
            t = mean([r.mean_pairwise_us for r in rs])
            msgs = mean([r.max_msgs for r in rs])
            energy = mean([r.energy_units for r in rs])
            print(f"{n:>5} {len(rs):>5} {succ:>9.3f} {t:>12.1f} {msgs:>9.1f} {energy:>12.1f}")
            plot_rows.append((n, t, msgs, energy))
        for col, idx in (("time_us", 1), ("max_msgs", 2), ("energy", 3)):
            dat = root / f"{name}_{col}.dat"
            dat.write_text(
                "".join(f"{row[0]} {row[idx]:.3f}\n" for row in plot_rows),
                encoding="utf-8",
            )
        print()
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.command == "run":
        return cmd_run(args)
    if args.command == "sweep":
        return cmd_sweep(args)
    if args.command == "report":
        return cmd_report(args)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
