#!/usr/bin/env python3
"""Frames vs. accuracy as the budget scale factor grows, on the synthetic suite."""

from __future__ import annotations

import argparse
from pathlib import Path

from seekloop.harness import backend_factory, load_manifest, sweep_alpha, sweep_table, write_synthetic_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="1,2,4,8")
    ap.add_argument("--tasks", type=int, default=200)
    ap.add_argument("--backend", default="oracle", help="oracle (seek policy) or dense (fixed full scan)")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="out/alpha_sweep")
    args = ap.parse_args()

    out = Path(args.out)
    manifest = load_manifest(write_synthetic_suite(out / "suite", args.tasks))
    alphas = [int(a) for a in args.alphas.split(",")]
    results = sweep_alpha(manifest, alphas, backend_factory(args.backend), out_dir=out / args.backend,
                          parallelism=args.workers)
    print(sweep_table(results), end="")


if __name__ == "__main__":
    main()
