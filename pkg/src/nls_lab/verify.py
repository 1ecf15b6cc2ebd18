"""Seeded batch checks behind ``nls-lab verify``.

Each check returns a list of :class:`Verdict` and, on failure, the offending
input field so the caller can persist it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from .functionals import (
    INF,
    lipschitz_f_check,
    pointwise_difference_bound_check,
    validate_pair,
)
from .propagators import decay_estimate_check, free_propagate
from .solver import (
    SolverConfig,
    conservation_audit,
    evolve,
    free_trajectory,
    retarded_strichartz_verify,
    strichartz_verify,
)
from .spectral import Field, Grid, sample

CHECKS = ("decay", "strichartz", "retarded", "lipschitz", "pointwise", "conservation", "admissible")


@dataclass
class Verdict:
    name: str
    lhs: float | None
    rhs: float | None
    satisfied: bool
    constant: float | None = None

    def __post_init__(self):
        self.satisfied = bool(self.satisfied)
        for k in ("lhs", "rhs", "constant"):
            v = getattr(self, k)
            if v is not None:
                setattr(self, k, float(v))

    def as_dict(self) -> dict:
        d = asdict(self)
        if self.constant is None:
            d.pop("constant")
        else:
            d.pop("rhs")
        return {k: (_json_float(v) if isinstance(v, float) else v) for k, v in d.items()}


def _json_float(x: float):
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


@dataclass
class CheckResult:
    verdicts: list[Verdict]
    counterexample: Field | None = None

    @property
    def ok(self) -> bool:
        return all(v.satisfied for v in self.verdicts)


def random_gaussian_sum(grid: Grid, rng: np.random.Generator, width=(0.8, 1.5), spread=3.0) -> Field:
    k = int(rng.integers(1, 4))
    centers = rng.uniform(-spread, spread, (k, grid.dim))
    widths = rng.uniform(*width, k)
    amps = rng.normal(size=k) + 1j * rng.normal(size=k)

    def f(*x):
        out = 0
        for a, c, s in zip(amps, centers, widths):
            out = out + a * np.exp(-sum((xi - ci) ** 2 for xi, ci in zip(x, c)) / (2 * s * s))
        return out

    return sample(grid, f)


def random_bandlimited(grid: Grid, rng: np.random.Generator, n_modes: int = 3, scale: float = 1.0) -> Field:
    """Smooth field: a Gaussian envelope times a few low plane-wave modes."""
    env = random_gaussian_sum(grid, rng, width=(1.0, 2.0), spread=1.0)
    ks = rng.integers(-n_modes, n_modes + 1, (n_modes, grid.dim)) * grid.dk
    coef = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)

    def wave(*x):
        return sum(c * np.exp(1j * sum(ki * xi for ki, xi in zip(k, x))) for c, k in zip(coef, ks))

    w = sample(grid, wave)
    return Field(grid, scale * env.values * w.values / max(np.abs(w.values).max(), 1e-300))


def check_decay(
    grid: Grid,
    seed: int,
    count: int = 20,
    ms=(2.0, 4.0, INF),
    ts=(0.1, 1.0, 10.0),
    propagate: Callable[[Field, float], Field] = free_propagate,
) -> CheckResult:
    rng = np.random.default_rng(seed)
    out: list[Verdict] = []
    bad = None
    for i in range(count):
        u = random_gaussian_sum(grid, rng)
        for m in ms:
            for t in ts:
                r = decay_estimate_check(u, t, m, propagate=propagate)
                ok = r.satisfied
                if m == 2:
                    ok = ok and abs(r.lhs - r.rhs) <= 1e-12 * r.rhs
                out.append(Verdict(f"decay[{i}] m={m:g} t={t:g}", r.lhs, r.rhs, ok))
                if not ok and bad is None:
                    bad = u
    return CheckResult(out, bad)


def check_strichartz(u0: Field, cfg: SolverConfig, steps: int = 400) -> CheckResult:
    pair = cfg.pair(u0.grid.dim)
    r1 = strichartz_verify(u0, pair, cfg.T, steps)
    r2 = strichartz_verify(u0, pair, 2 * cfg.T, 2 * steps)
    growth = r2.rhs_constant / r1.rhs_constant - 1
    end = strichartz_verify(u0, validate_pair(INF, 2, u0.grid.dim), cfg.T, steps)
    v = [
        Verdict(f"strichartz q={pair.q:g} r={pair.r:g} T={cfg.T:g}", r1.lhs, None, math.isfinite(r1.rhs_constant), r1.rhs_constant),
        Verdict(f"strichartz growth T->2T", r2.rhs_constant, r1.rhs_constant, growth < 0.05, growth),
        Verdict("strichartz endpoint (inf,2)", end.lhs, end.l2, abs(end.rhs_constant - 1) <= 1e-12),
    ]
    return CheckResult(v, None if all(x.satisfied for x in v) else u0)


def check_retarded(u0: Field, cfg: SolverConfig, steps: int = 100) -> CheckResult:
    pair = cfg.pair(u0.grid.dim)
    ratios = []
    verdicts = []
    for n in (steps, 2 * steps):
        forcing = free_trajectory(u0, n, cfg.T / n)
        r = retarded_strichartz_verify(forcing, pair, pair)
        ratios.append(r.ratio)
        verdicts.append(Verdict(f"retarded steps={n}", r.lhs, r.rhs, math.isfinite(r.ratio), r.ratio))
        verdicts.append(Verdict(f"dual homogeneous steps={n}", r.dual_lhs, r.rhs, math.isfinite(r.dual_ratio), r.dual_ratio))
    change = abs(ratios[1] / ratios[0] - 1) if ratios[0] > 0 else 0.0
    verdicts.append(Verdict("retarded ratio stability under dt halving", ratios[1], ratios[0], change <= 0.10, change))
    return CheckResult(verdicts, None if all(v.satisfied for v in verdicts) else u0)


def check_lipschitz(grid: Grid, seed: int, lam: float = 1.0, p: float = 2.0, count: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    running = 0.0
    for _ in range(count):
        u = random_bandlimited(grid, rng)
        v = random_bandlimited(grid, rng)
        running = lipschitz_f_check(u, v, lam, p, running).bound_constant
    return CheckResult([Verdict(f"lipschitz H2 p={p:g}", None, None, math.isfinite(running), running)])


def check_pointwise(seed: int, count: int = 1000, ps=(1.0, 2.0, 3.0)) -> CheckResult:
    rng = np.random.default_rng(seed)
    out = []
    for p in ps:
        u = rng.normal(size=count) + 1j * rng.normal(size=count)
        v = rng.normal(size=count) + 1j * rng.normal(size=count)
        r = pointwise_difference_bound_check(u, v, p)
        out.append(Verdict(f"pointwise p={p:g}", r.max_ratio, p + 1, r.max_ratio <= p + 1 + 1e-9))
    return CheckResult(out)


def check_conservation(u0: Field, cfg: SolverConfig) -> CheckResult:
    n, _ = cfg.time_nodes()
    tr, _ = evolve(u0, cfg, store_every=_divisor(n))
    a = conservation_audit(tr, cfg)
    v = [Verdict("mass drift", a.mass_drift, 1e-12 * max(cfg.T, 1.0), a.mass_drift <= 1e-12 * max(cfg.T, 1.0))]
    if cfg.lam == 0:
        v.append(Verdict("energy drift (linear flow)", a.energy_drift, 1e-10, a.energy_drift <= 1e-10))
    else:
        half = replace(cfg, dt=cfg.dt / 2)
        n2, _ = half.time_nodes()
        tr2, _ = evolve(u0, half, store_every=_divisor(n2))
        b = conservation_audit(tr2, half)
        ratio = a.energy_drift / b.energy_drift if b.energy_drift > 0 else INF
        v.append(Verdict("energy drift ratio dt/(dt/2)", a.energy_drift, b.energy_drift, 3 <= ratio <= 5, ratio))
    return CheckResult(v, None if all(x.satisfied for x in v) else u0)


def _divisor(n: int, target: int = 100) -> int:
    # largest stride giving at least ~target stored slices
    for s in range(max(n // target, 1), 0, -1):
        if n % s == 0:
            return s
    return 1


ADMISSIBLE_CASES = [
    ((INF, 2.0, 1), True),
    ((INF, 2.0, 2), True),
    ((INF, 2.0, 3), True),
    ((4.0, 4.0, 2), True),
    ((8.0, 4.0, 1), True),
    ((2.0, 6.0, 3), True),
    ((2.0, INF, 2), False),
    ((3.0, 3.0, 2), False),
    ((1.5, 6.0, 1), False),
]


def check_admissible(extra: list[tuple[tuple[float, float, int], bool]] | None = None) -> CheckResult:
    out = []
    for (q, r, d), expected in ADMISSIBLE_CASES + (extra or []):
        try:
            validate_pair(q, r, d)
            accepted = True
        except ValueError:
            accepted = False
        label = "accepted" if accepted else "rejected"
        out.append(Verdict(f"admissible ({q:g},{r:g},{d}) {label}", None, None, accepted == expected))
    return CheckResult(out)


def corrupted_propagator(factor: float = 1.01) -> Callable[[Field, float], Field]:
    """Fault-injection hook: a propagator that is no longer an isometry."""

    def prop(u: Field, t: float) -> Field:
        return Field(u.grid, factor * free_propagate(u, t).values)

    return prop
