#!/usr/bin/env python3
"""Seek agent vs. uniform single pass on seeded synthetic worlds.

Writes the suite, runs the full agent, the three leave-one-out masks, a
single pass at a fixed budget and a replay of the agent's frames, then prints
one table plus the equal-accuracy uniform budget from the dense oracle.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from seekloop.harness import (
    RunMode,
    load_manifest,
    oracle_backends,
    run_benchmark,
    write_synthetic_suite,
)
from seekloop.model import VIEW_TOOLS, ToolConfig
from seekloop.synthworld import SyntheticWorld, calibrate_dense_budget


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tasks", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=int, default=4)
    ap.add_argument("--single-budget", type=int, default=384)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="out/synthetic")
    args = ap.parse_args()

    out = Path(args.out)
    manifest = load_manifest(write_synthetic_suite(out / "suite", args.tasks, args.seed))
    rows = []

    def run(name, config, mode=RunMode()):
        rep = run_benchmark(manifest, config, oracle_backends, mode, out / name, args.workers)
        rows.append((name, rep))
        return rep

    full = run("agent", ToolConfig(args.alpha))
    for dropped in VIEW_TOOLS:
        mask = frozenset(set(VIEW_TOOLS) - {dropped})
        run(f"no_{dropped.value}", ToolConfig(args.alpha, tool_mask=mask))
    run(f"single_{args.single_budget}", ToolConfig(args.alpha), RunMode.parse(f"single:{args.single_budget}"))
    run("replay", ToolConfig(args.alpha), RunMode.parse(f"replay:{out / 'agent'}"))

    print(f"{'run':<14}{'accuracy':>10}{'frames':>10}{'turns':>8}{'tokens':>10}")
    for name, rep in rows:
        a = rep.aggregates
        print(f"{name:<14}{a['accuracy']:>10.3f}{a['mean_frames_unique']:>10.1f}"
              f"{a['mean_turns']:>8.2f}{a['mean_tokens']:>10.0f}")

    worlds = [e.world for e in manifest.entries if isinstance(e.world, SyntheticWorld)]
    budget = calibrate_dense_budget(worlds, full.accuracy)
    frames = full.aggregates["mean_frames_unique"]
    if budget:
        print(f"\nuniform budget matching agent accuracy {full.accuracy:.3f}: {budget} frames "
              f"(agent uses {frames:.1f}, ratio {frames / budget:.3f})")


if __name__ == "__main__":
    main()
