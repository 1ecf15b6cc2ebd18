#!/usr/bin/env python3
"""Bisect the Gaussian amplitude separating completed runs from blow-up signals.

Focusing cubic equation (lambda < 0) in 2D; a run "blows up" when
max(sup, H^2) grows past the configured ratio before T.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from nls_lab.solver import BlowUpDetected, SolverConfig, evolve
from nls_lab.spectral import make_grid, sample


def run(amp: float, grid, cfg: SolverConfig) -> tuple[bool, float, float]:
    u0 = sample(grid, lambda x, y: amp * np.exp(-(x * x + y * y) / 2))
    n, _ = cfg.time_nodes()
    try:
        _, hist = evolve(u0, cfg, store_every=n)
    except BlowUpDetected as exc:
        return True, exc.t_last, exc.ratio
    return False, cfg.T, max(max(r.sup / hist[0].sup, r.h2 / hist[0].h2) for r in hist)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=128)
    ap.add_argument("--L", type=float, default=16.0)
    ap.add_argument("--lam", type=float, default=-1.0)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--threshold", type=float, default=50.0, help="blow-up norm ratio")
    ap.add_argument("--lo", type=float, default=1.5)
    ap.add_argument("--hi", type=float, default=4.0)
    ap.add_argument("--steps", type=int, default=8, help="bisection steps")
    args = ap.parse_args()

    grid = make_grid(2, args.N, args.L)
    cfg = SolverConfig(lam=args.lam, p=2.0, T=args.T, dt=args.dt, blowup_threshold=args.threshold)
    out = csv.writer(sys.stdout)
    out.writerow(["amplitude", "blowup", "t_end", "norm_ratio"])
    lo, hi = args.lo, args.hi
    ends = []
    for amp in (lo, hi):
        b, t, r = run(amp, grid, cfg)
        out.writerow([amp, int(b), f"{t:.6g}", f"{r:.6g}"])
        ends.append(b)
    if ends != [False, True]:
        print("bracket does not separate the two branches", file=sys.stderr)
        return 1
    for _ in range(args.steps):
        mid = 0.5 * (lo + hi)
        b, t, r = run(mid, grid, cfg)
        out.writerow([f"{mid:.6g}", int(b), f"{t:.6g}", f"{r:.6g}"])
        lo, hi = (lo, mid) if b else (mid, hi)
    print(f"threshold amplitude in [{lo:.6g}, {hi:.6g}]", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
