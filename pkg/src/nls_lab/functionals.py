"""Norms and nonlinear functionals on fields and trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .spectral import Field, Grid, Space, fft, ifft

INF = math.inf


def conjugate_exponent(p: float) -> float:
    """Hoelder conjugate p' with 1/p + 1/p' = 1."""
    if not p >= 1:
        raise ValueError(f"exponent must be >= 1 for a Hoelder conjugate, got {p}")
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1)


@dataclass(frozen=True)
class AdmissiblePair:
    """Strichartz-admissible exponents: 2/q + d/r = d/2, q, r >= 2, not (2, inf, 2)."""

    q: float
    r: float
    dim: int

    def __post_init__(self):
        q, r, d = self.q, self.r, self.dim
        if q < 2 or r < 2:
            raise ValueError(f"exponents must be >= 2, got (q, r) = ({q}, {r})")
        if (q, r, d) == (2, INF, 2):
            raise ValueError("(q, r, d) = (2, inf, 2) is the excluded endpoint")
        lhs = 2 / q + d / r
        if abs(lhs - d / 2) > 1e-12:
            raise ValueError(f"scaling relation violated: 2/q + d/r = {lhs} != d/2 = {d / 2}")


def validate_pair(q: float, r: float, d: int) -> AdmissiblePair:
    return AdmissiblePair(float(q), float(r), int(d))


def pair_for_q(q: float, d: int) -> AdmissiblePair:
    """Solve the scaling relation for r given q."""
    denom = d / 2 - 2 / q
    r = INF if denom == 0 else d / denom
    return validate_pair(q, r, d)


@dataclass
class Trajectory:
    """Physical-space slices at uniformly spaced times t0 + j*dt."""

    grid: Grid
    t0: float
    dt: float
    slices: list[Field] = field(repr=False)

    def __post_init__(self):
        if len(self.slices) < 2:
            raise ValueError(f"a trajectory needs at least 2 slices, got {len(self.slices)}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        for s in self.slices:
            if s.grid != self.grid:
                raise ValueError("all slices must share the trajectory grid")
            s.require(Space.PHYSICAL)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.slices))

    @property
    def T(self) -> float:
        return self.dt * (len(self.slices) - 1)

    def __len__(self):
        return len(self.slices)

    def stack(self) -> np.ndarray:
        return np.stack([s.values for s in self.slices])

    @classmethod
    def from_array(cls, grid: Grid, t0: float, dt: float, arr: np.ndarray) -> Trajectory:
        return cls(grid, t0, dt, [Field(grid, a) for a in arr])


@dataclass
class DiagnosticsRecord:
    """Per-step observables; ``energy`` is the conserved energy (:func:`hamiltonian`)."""

    t: float
    mass: float
    energy: float
    h1: float
    h2: float
    sup: float
    lp_custom: tuple[float, float] | None = None

    CSV_HEADER = "t,mass,energy,h1,h2,sup"

    def csv_row(self) -> str:
        return ",".join(f"{v:.17g}" for v in (self.t, self.mass, self.energy, self.h1, self.h2, self.sup))


def _lp_of_array(vals: np.ndarray, p: float, dv: float) -> float:
    a = np.abs(vals)
    if p == INF:
        return float(a.max())
    if p == 2:
        return math.sqrt(float(np.vdot(a, a).real) * dv)
    return float((np.sum(a**p) * dv) ** (1 / p))


def lp_norm(u: Field, p: float) -> float:
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    u.require(Space.PHYSICAL)
    return _lp_of_array(u.values, p, u.grid.cell_volume)


def _spectral(u: Field) -> Field:
    return u if u.space is Space.SPECTRAL else fft(u)


def hk_norm(u: Field, k: int) -> float:
    """Sobolev norm (sum (1+|k|^2)^k |u_hat|^2 dK)^{1/2}."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    uh = _spectral(u)
    g = u.grid
    w = (1.0 + g.k2) ** k
    a = np.abs(uh.values)
    return math.sqrt(float(np.sum(w * a * a)) * g.spectral_cell_volume)


def gradient(u: Field) -> list[Field]:
    uh = _spectral(u)
    return [ifft(uh.with_values(1j * kc * uh.values)) for kc in u.grid.kvecs]


def mass(u: Field) -> float:
    u.require(Space.PHYSICAL)
    a = np.abs(u.values)
    return float(np.vdot(a, a).real) * u.grid.cell_volume


def _gradient_energy(u: Field) -> float:
    # sum_j ||d_j u||^2 = int |k|^2 |u_hat|^2 by Plancherel
    uh = fft(u)
    a = np.abs(uh.values)
    return float(np.sum(u.grid.k2 * a * a)) * u.grid.spectral_cell_volume


def _potential_integral(u: Field, p: float) -> float:
    return float(np.sum(np.abs(u.values) ** (p + 2))) * u.grid.cell_volume


def energy(u: Field, lam: float, p: float) -> float:
    """int |grad u|^2 + lam/(p+2) int |u|^{p+2}.

    The quantity conserved by the flow carries 2*lam/(p+2); see
    :func:`hamiltonian`.
    """
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    u.require(Space.PHYSICAL)
    return _gradient_energy(u) + lam / (p + 2) * _potential_integral(u, p)


def hamiltonian(u: Field, lam: float, p: float) -> float:
    """Conserved energy int |grad u|^2 + 2 lam/(p+2) int |u|^{p+2}."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    u.require(Space.PHYSICAL)
    return _gradient_energy(u) + 2 * lam / (p + 2) * _potential_integral(u, p)


def dealias_mask(grid: Grid) -> np.ndarray:
    kmax = grid.dk * grid.points_per_axis / 2
    mask = np.ones(grid.shape, dtype=bool)
    for kc in grid.kvecs:
        mask = mask & (np.abs(kc) < 2 / 3 * kmax)
    return mask


def nonlinearity(u: Field, lam: float, p: float, dealias: bool = False) -> Field:
    """Pointwise lam |u|^p u, optionally 2/3-truncated (integer p only)."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    u.require(Space.PHYSICAL)
    vals = lam * np.abs(u.values) ** p * u.values
    out = Field(u.grid, vals)
    if dealias:
        if float(p) != int(p):
            raise ValueError("dealiasing is only defined for integer p")
        oh = fft(out)
        out = ifft(oh.with_values(oh.values * dealias_mask(u.grid)))
    return out


def mixed_norm(traj: Trajectory, q: float, r: float) -> float:
    """L^q_t L^r_x norm; trapezoid in time, grid quadrature in space."""
    if not (q >= 1 and r >= 1):
        raise ValueError(f"exponents must be >= 1, got (q, r) = ({q}, {r})")
    if len(traj.slices) < 2:
        raise ValueError("need at least 2 slices")
    inner = np.array([lp_norm(s, r) for s in traj.slices])
    if q == INF:
        return float(inner.max())
    return float(trapezoid(inner**q, dx=traj.dt) ** (1 / q))


@dataclass
class LipschitzReport:
    ratio: float
    bound_constant: float


def lipschitz_f_check(
    u: Field, v: Field, lam: float, p: float, running_max: float = 0.0
) -> LipschitzReport:
    """Empirical constant in ||F(u)-F(v)||_H2 <= C (||u||^p + ||v||^p) ||u-v||_H2."""
    if u.grid.dim != 2:
        raise ValueError("the H^2 Lipschitz estimate is checked in d = 2 only")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    diff = u.with_values(u.values - v.values)
    dnorm = hk_norm(diff, 2)
    if dnorm == 0:
        raise ValueError("u and v coincide; ratio undefined")
    fu, fv = nonlinearity(u, lam, p), nonlinearity(v, lam, p)
    num = hk_norm(fu.with_values(fu.values - fv.values), 2)
    den = (hk_norm(u, 2) ** p + hk_norm(v, 2) ** p) * dnorm
    ratio = num / den
    return LipschitzReport(ratio, max(ratio, running_max))


@dataclass
class PointwiseReport:
    max_ratio: float
    bound: float | None

    @property
    def satisfied(self) -> bool:
        return self.bound is None or self.max_ratio <= self.bound + 1e-9


def pointwise_difference_bound_check(u: Field | np.ndarray, v: Field | np.ndarray, p: float) -> PointwiseReport:
    """max over nodes of ||u|^p u - |v|^p v| / ((|u|^p + |v|^p) |u - v|)."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    a = np.asarray(u.values if isinstance(u, Field) else u, dtype=np.complex128)
    b = np.asarray(v.values if isinstance(v, Field) else v, dtype=np.complex128)
    keep = a != b
    a, b = a[keep], b[keep]
    if a.size == 0:
        return PointwiseReport(0.0, p + 1 if p >= 1 else None)
    ma, mb = np.abs(a), np.abs(b)
    num = np.abs(ma**p * a - mb**p * b)
    den = (ma**p + mb**p) * np.abs(a - b)
    return PointwiseReport(float(np.max(num / den)), p + 1 if p >= 1 else None)


@dataclass
class LebesgueComparison:
    high: float
    low: float

    @property
    def holds(self) -> bool:
        return self.high <= self.low


def lebesgue_comparison(u: Field, r: float, p: float) -> LebesgueComparison:
    """Both sides of ||u||_{L^{r(p+1)}} <= ||u||_{L^r}, reported, not asserted.

    On an unbounded domain no such embedding holds in general; both sides
    are 1-homogeneous, and a sufficiently narrow profile makes the left win.
    """
    if not (r >= 1 and p > 0):
        raise ValueError(f"need r >= 1 and p > 0, got r={r}, p={p}")
    return LebesgueComparison(lp_norm(u, r * (p + 1)), lp_norm(u, r))


def diagnostics(u: Field, t: float, lam: float, p: float, lp_exponent: float | None = None) -> DiagnosticsRecord:
    uh = fft(u)
    a2 = np.abs(uh.values) ** 2
    g = u.grid
    dk = g.spectral_cell_volume
    m = float(np.sum(a2)) * dk
    grad = float(np.sum(g.k2 * a2)) * dk
    h1 = math.sqrt(m + grad)
    h2 = math.sqrt(float(np.sum((1 + g.k2) ** 2 * a2)) * dk)
    e = grad + 2 * lam / (p + 2) * _potential_integral(u, p)
    custom = None if lp_exponent is None else (lp_exponent, lp_norm(u, lp_exponent))
    return DiagnosticsRecord(t, mass(u), e, h1, h2, lp_norm(u, INF), custom)


def space_time_norm(slices: Sequence[Field], dt: float, q: float) -> float:
    """Direct (int int |u|^q dx dt)^{1/q} with trapezoid weights in time."""
    arr = np.abs(np.stack([s.values for s in slices])) ** q
    w = np.full(len(slices), dt)
    w[0] = w[-1] = dt / 2
    dv = slices[0].grid.cell_volume
    return float(np.tensordot(w, arr, axes=(0, 0)).sum() * dv) ** (1 / q)
