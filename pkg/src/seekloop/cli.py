from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (
    ManifestError,
    RunMode,
    backend_factory,
    load_manifest,
    report_from_logs,
    run_benchmark,
    sweep_alpha,
    sweep_table,
    tool_mask,
    write_synthetic_suite,
)
from .model import ToolConfig


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True)
    p.add_argument("--max-turns", type=int, default=20)
    p.add_argument("--max-calls", type=int, default=4, help="tool calls executed per turn")
    p.add_argument("--tools", default="overview,skim,focus")
    p.add_argument("--mode", default="agent", help="agent | single:BUDGET | replay:RUNDIR")
    p.add_argument("--backend", default="oracle", help="oracle | dense | http | scripted:FILE")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=4)


def _print_aggregates(agg: dict) -> None:
    for k, v in agg.items():
        print(f"{k:>20}: {v:.4f}" if isinstance(v, float) else f"{k:>20}: {v}")


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    config = ToolConfig(args.alpha, args.max_turns, tool_mask(args.tools), args.max_calls)
    report = run_benchmark(
        manifest, config, backend_factory(args.backend), RunMode.parse(args.mode), args.out, args.workers
    )
    _print_aggregates(report.aggregates)
    print(report.failure_summary())
    return 0


def cmd_sweep(args) -> int:
    manifest = load_manifest(args.manifest)
    alphas = [int(a) for a in args.alphas.split(",") if a.strip()]
    results = sweep_alpha(
        manifest, alphas, backend_factory(args.backend), RunMode.parse(args.mode), args.out, args.workers,
        max_turns=args.max_turns, tool_mask=tool_mask(args.tools), max_calls_per_turn=args.max_calls,
    )
    sys.stdout.write(sweep_table(results))
    return 0


def cmd_synth(args) -> int:
    path = write_synthetic_suite(args.out, args.tasks, args.seed, args.duration, args.scenes)
    print(f"wrote {args.tasks} worlds and {path}")
    return 0


def cmd_report(args) -> int:
    report = report_from_logs(args.run_dir)
    stored = Path(args.run_dir) / "report.json"
    if args.json:
        print(json.dumps(report.to_dict(), indent=1))
    else:
        _print_aggregates(report.aggregates)
        print(report.failure_summary())
    if stored.exists():
        same = json.loads(stored.read_text()) == report.to_dict()
        print(f"matches stored report.json: {same}", file=sys.stderr)
        return 0 if same else 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seekloop", description="Agentic frame seeking for long-video QA.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configuration over a manifest")
    _common(run)
    run.add_argument("--alpha", type=int, default=2)
    run.set_defaults(fn=cmd_run)

    sweep = sub.add_parser("sweep", help="run once per budget scale factor")
    _common(sweep)
    sweep.add_argument("--alphas", default="1,2,4,8")
    sweep.set_defaults(fn=cmd_sweep)

    synth = sub.add_parser("synth", help="write a synthetic world suite and its manifest")
    synth.add_argument("--tasks", type=int, default=200)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--duration", type=float, default=3600.0)
    synth.add_argument("--scenes", type=int, default=12)
    synth.add_argument("--out", required=True)
    synth.set_defaults(fn=cmd_synth)

    rep = sub.add_parser("report", help="recompute a run report from its trajectory logs")
    rep.add_argument("run_dir")
    rep.add_argument("--json", action="store_true")
    rep.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ManifestError as e:
        print(f"manifest error at {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
