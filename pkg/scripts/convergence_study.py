#!/usr/bin/env python3
"""Time-step convergence of the split-step integrator and its energy drift.

For each dt, reports the L2 error of u(T) against a dt/16 reference, the
observed order, and the max drift of mass and conserved energy.
"""

from __future__ import annotations

import argparse
import math

import numpy as np

from nls_lab.solver import SolverConfig, conservation_audit, evolve
from nls_lab.spectral import make_grid, sample


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--L", type=float, default=20.0)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--amp", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--dts", default="0.02,0.01,0.005,0.0025")
    args = ap.parse_args()

    g = make_grid(2, args.N, args.L)
    u0 = sample(g, lambda x, y: args.amp * np.exp(-(x * x + y * y) / 2))
    dts = [float(s) for s in args.dts.split(",")]

    def final(dt):
        cfg = SolverConfig(lam=args.lam, p=args.p, T=args.T, dt=dt)
        n, _ = cfg.time_nodes()
        tr, _ = evolve(u0, cfg, store_every=math.gcd(n, max(n // 50, 1)))
        return tr, cfg

    ref = final(min(dts) / 16)[0].slices[-1].values
    print(f"{'dt':>10} {'error':>12} {'order':>7} {'mass drift':>12} {'energy drift':>13}")
    prev = None
    for dt in dts:
        tr, cfg = final(dt)
        err = math.sqrt(np.sum(np.abs(tr.slices[-1].values - ref) ** 2) * g.cell_volume)
        audit = conservation_audit(tr, cfg)
        order = "" if prev is None else f"{math.log2(prev / err):.2f}"
        print(f"{dt:>10.4g} {err:>12.4e} {order:>7} {audit.mass_drift:>12.2e} {audit.energy_drift:>13.4e}")
        prev = err


if __name__ == "__main__":
    main()
