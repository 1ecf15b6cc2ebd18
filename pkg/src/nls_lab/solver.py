"""Time evolution of i u_t + Lap u = lam |u|^p u.

Two independent routes: a Strang split-step integrator (production) and a
Picard iteration of the Duhamel map (local-existence construction). Both
share the free propagator and nothing else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import (
    INF,
    AdmissiblePair,
    DiagnosticsRecord,
    Trajectory,
    conjugate_exponent,
    diagnostics,
    energy,
    hamiltonian,
    lp_norm,
    mass,
    mixed_norm,
    nonlinearity,
    pair_for_q,
)
from .propagators import free_propagate
from .spectral import Field, Space, fft, ifft


class BlowUpDetected(RuntimeError):
    """Norm growth past the configured threshold, or non-finite values."""

    def __init__(
        self,
        t_last: float,
        ratio: float,
        history: list[DiagnosticsRecord],
        reason: str = "",
        last_field: Field | None = None,
    ):
        self.t_last = t_last
        self.ratio = ratio
        self.history = history
        self.last_field = last_field
        super().__init__(f"blow-up signal after t = {t_last:.6g} (norm ratio {ratio:.4g}) {reason}".rstrip())


@dataclass
class SolverConfig:
    lam: float
    p: float
    T: float
    dt: float
    scheme: str = "strang"
    picard_max_iters: int = 30
    picard_tol: float = 1e-10
    strichartz_pair: AdmissiblePair | None = None
    strichartz_constant_C: float = 1.0
    blowup_threshold: float = 1e3
    dealias: bool = False

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        if self.dt > self.T:
            raise ValueError("dt exceeds T")
        if self.scheme not in ("strang", "picard"):
            raise ValueError(f"scheme must be 'strang' or 'picard', got {self.scheme!r}")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be >= 1")
        if not self.strichartz_constant_C > 0:
            raise ValueError("strichartz_constant_C must be positive")
        if not self.blowup_threshold > 1:
            raise ValueError("blowup_threshold must exceed 1")

    def pair(self, dim: int) -> AdmissiblePair:
        if self.strichartz_pair is not None:
            if self.strichartz_pair.dim != dim:
                raise ValueError("strichartz_pair dimension does not match the grid")
            return self.strichartz_pair
        return pair_for_q(4.0, dim)

    def time_nodes(self, T: float | None = None) -> tuple[int, float]:
        """Number of steps and the step size that exactly tiles [0, T]."""
        T = self.T if T is None else T
        n = max(1, math.ceil(T / self.dt - 1e-9))
        return n, T / n


def _phase_flow(vals: np.ndarray, lam: float, p: float, h: float) -> np.ndarray:
    # exact flow of i u_t = lam |u|^p u; |u| is invariant
    return vals * np.exp(-1j * lam * h * np.abs(vals) ** p)


def strang_step(u: Field, cfg: SolverConfig, dt: float | None = None) -> Field:
    h = cfg.dt if dt is None else dt
    g = u.grid
    vals = _phase_flow(u.values, cfg.lam, cfg.p, h / 2)
    uh = fft(Field(g, vals))
    vals = ifft(uh.with_values(uh.values * np.exp(-1j * h * g.k2))).values
    vals = _phase_flow(vals, cfg.lam, cfg.p, h / 2)
    if not np.all(np.isfinite(vals)):
        raise BlowUpDetected(float("nan"), INF, [], "non-finite values in strang step")
    return Field(g, vals)


def evolve(
    u0: Field, cfg: SolverConfig, store_every: int = 1, T: float | None = None
) -> tuple[Trajectory, list[DiagnosticsRecord]]:
    """Strang integration over [0, T]; diagnostics at every step.

    Slices are stored every ``store_every`` steps (the final step is always a
    stored node when the step count is a multiple of ``store_every``).
    Raises :class:`BlowUpDetected` when max(sup, H^2) grows past
    ``cfg.blowup_threshold`` times its initial value.
    """
    u0.require(Space.PHYSICAL)
    if not math.isfinite(mass(u0)):
        raise ValueError("initial datum has non-finite mass")
    n, h = cfg.time_nodes(T)
    if store_every < 1 or n % store_every:
        raise ValueError(f"store_every={store_every} must divide the step count {n}")
    rec0 = diagnostics(u0, 0.0, cfg.lam, cfg.p)
    history = [rec0]
    slices = [u0]
    u = u0
    g = u0.grid
    kin = np.exp(-1j * h * g.k2)
    vals = u0.values
    for j in range(1, n + 1):
        vals = _phase_flow(vals, cfg.lam, cfg.p, h / 2)
        uh = fft(Field(g, vals))
        vals = ifft(uh.with_values(uh.values * kin)).values
        vals = _phase_flow(vals, cfg.lam, cfg.p, h / 2)
        t = j * h
        if not np.all(np.isfinite(vals)):
            raise BlowUpDetected(history[-1].t, INF, history, "(non-finite values)", last_field=u)
        nxt = Field(g, vals)
        rec = diagnostics(nxt, t, cfg.lam, cfg.p)
        ratio = _growth_ratio(rec, rec0)
        if ratio > cfg.blowup_threshold:
            raise BlowUpDetected(history[-1].t, ratio, history + [rec], last_field=u)
        u = nxt
        history.append(rec)
        if j % store_every == 0:
            slices.append(u)
    return Trajectory(g, 0.0, h * store_every, slices), history


def _growth_ratio(rec: DiagnosticsRecord, rec0: DiagnosticsRecord) -> float:
    r_sup = rec.sup / rec0.sup if rec0.sup > 0 else 0.0
    r_h2 = rec.h2 / rec0.h2 if rec0.h2 > 0 else 0.0
    return max(r_sup, r_h2)


def retarded_integral(forcing: Trajectory) -> Trajectory:
    """I(t_n) = int_0^{t_n} exp(i(t_n - s) Lap) F(s) ds, trapezoid over the slices.

    Uses J_n = exp(i dt Lap) J_{n-1} + dt F_n with J_0 = dt/2 F_0, so that
    I_n = J_n - dt/2 F_n; every term is moved only by relative times t - s.
    """
    g = forcing.grid
    h = forcing.dt
    kin = np.exp(-1j * h * g.k2)
    out = [Field(g, np.zeros(g.shape, dtype=complex))]
    fh = fft(forcing.slices[0]).values
    J = 0.5 * h * fh
    for j in range(1, len(forcing)):
        fh = fft(forcing.slices[j]).values
        J = kin * J + h * fh
        out.append(ifft(Field(g, J - 0.5 * h * fh, Space.SPECTRAL)))
    return Trajectory(g, forcing.t0, h, out)


def free_trajectory(u0: Field, n: int, h: float) -> Trajectory:
    g = u0.grid
    u0h = fft(u0).values
    slices = [u0]
    for j in range(1, n + 1):
        slices.append(ifft(Field(g, u0h * np.exp(-1j * (j * h) * g.k2), Space.SPECTRAL)))
    return Trajectory(g, 0.0, h, slices)


def duhamel_apply(u_traj: Trajectory, u0: Field, cfg: SolverConfig, free: Trajectory | None = None) -> Trajectory:
    """Phi(u)(t) = exp(it Lap) u0 - i lam int_0^t exp(i(t-s) Lap) |u|^p u ds."""
    g = u_traj.grid
    n = len(u_traj) - 1
    if free is None:
        free = free_trajectory(u0, n, u_traj.dt)
    if cfg.lam == 0:
        return free
    forcing = []
    for j, s in enumerate(u_traj.slices):
        f = nonlinearity(s, cfg.lam, cfg.p, dealias=cfg.dealias)
        if not np.all(np.isfinite(f.values)):
            s_time = u_traj.t0 + j * u_traj.dt
            raise ValueError(f"non-finite nonlinearity at s = {s_time:.6g} (first affected t = {s_time:.6g})")
        forcing.append(f)
    integral = retarded_integral(Trajectory(g, u_traj.t0, u_traj.dt, forcing))
    slices = [Field(g, f.values - 1j * i.values) for f, i in zip(free.slices, integral.slices)]
    return Trajectory(g, u_traj.t0, u_traj.dt, slices)


def x_norm(traj: Trajectory, pair: AdmissiblePair) -> float:
    """||u||_X = ||u||_{L^inf L^2} + ||u||_{L^q L^r}."""
    return mixed_norm(traj, INF, 2) + mixed_norm(traj, pair.q, pair.r)


def _difference(a: Trajectory, b: Trajectory) -> Trajectory:
    return Trajectory(a.grid, a.t0, a.dt, [Field(a.grid, x.values - y.values) for x, y in zip(a.slices, b.slices)])


@dataclass
class PicardReport:
    iterates_used: int
    successive_diffs: list[float]
    contraction_ratios: list[float]
    converged: bool
    final: Trajectory = field(repr=False)

    def to_json(self) -> str:
        def clean(xs):
            return [float(x) if math.isfinite(x) else str(x) for x in xs]

        return json.dumps(
            {
                "iterates_used": self.iterates_used,
                "successive_diffs": clean(self.successive_diffs),
                "contraction_ratios": clean(self.contraction_ratios),
                "converged": self.converged,
            },
            indent=2,
        )


def picard_solve(u0: Field, cfg: SolverConfig, T: float | None = None, max_iters: int | None = None) -> PicardReport:
    """Iterate the Duhamel map from the free evolution until the X-distance < picard_tol."""
    n, h = cfg.time_nodes(T)
    pair = cfg.pair(u0.grid.dim)
    max_iters = cfg.picard_max_iters if max_iters is None else max_iters
    free = free_trajectory(u0, n, h)
    cur = free
    diffs: list[float] = []
    ratios: list[float] = []
    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iters):
            try:
                nxt = duhamel_apply(cur, u0, cfg, free=free)
            except ValueError:
                # iterates overflowed: divergence
                diffs.append(INF)
                ratios.append(INF)
                break
            d = x_norm(_difference(nxt, cur), pair)
            if diffs and diffs[-1] > 0:
                ratios.append(d / diffs[-1] if math.isfinite(diffs[-1]) else INF)
            diffs.append(d)
            cur = nxt
            if d < cfg.picard_tol or not math.isfinite(d):
                converged = d < cfg.picard_tol
                break
    return PicardReport(len(diffs), diffs, ratios, converged, cur)


@dataclass
class ExistenceTimeReport:
    R: float
    T_formula: float | None
    T_bound: float | None
    T_adaptive: float
    first_ratio: float


def existence_time(u0: Field, cfg: SolverConfig, max_halvings: int = 40) -> ExistenceTimeReport:
    """Ball radius R = 4 C ||u0||_2 and candidate horizons for the contraction.

    ``T_formula`` uses the contraction-horizon exponent 1 - (p+q)/2 verbatim,
    ``T_bound`` the exponent 1 - (p+1)/q of the nonlinear Holder bound. The
    operational ``T_adaptive`` halves from T_formula (or 1.0) until the
    measured first contraction ratio is at most 1/2.
    """
    C = cfg.strichartz_constant_C
    pair = cfg.pair(u0.grid.dim)
    R = 4 * C * lp_norm(u0, 2)
    if cfg.lam == 0:
        return ExistenceTimeReport(R, INF, INF, INF, 0.0)
    base = 4 * C * abs(cfg.lam) * R**cfg.p
    T_formula = _horizon(base, 1 - (cfg.p + pair.q) / 2)
    T_bound = _horizon(base, 1 - (cfg.p + 1) / pair.q)
    T = T_formula if T_formula is not None and 0 < T_formula < INF else 1.0
    ratio = INF
    for _ in range(max_halvings):
        ratio = first_contraction_ratio(u0, cfg, T)
        if ratio <= 0.5:
            break
        T /= 2
    return ExistenceTimeReport(R, T_formula, T_bound, T, ratio)


def _horizon(base: float, exponent: float) -> float | None:
    if exponent == 0 or not math.isfinite(exponent) or base <= 0:
        return None
    with np.errstate(over="ignore"):
        try:
            return float(base ** (-1 / exponent))
        except OverflowError:
            return INF


def first_contraction_ratio(u0: Field, cfg: SolverConfig, T: float) -> float:
    rep = picard_solve(u0, cfg, T=T, max_iters=2)
    if len(rep.successive_diffs) < 2:
        return 0.0
    return rep.contraction_ratios[0] if rep.contraction_ratios else 0.0


@dataclass
class StrichartzReport:
    lhs: float
    l2: float
    rhs_constant: float


def strichartz_verify(u0: Field, pair: AdmissiblePair, T: float, steps: int = 400) -> StrichartzReport:
    """Empirical constant ||exp(it Lap) u0||_{L^q L^r [0,T]} / ||u0||_2."""
    if pair.dim != u0.grid.dim:
        raise ValueError("pair dimension does not match the grid")
    traj = free_trajectory(u0, steps, T / steps)
    lhs = mixed_norm(traj, pair.q, pair.r)
    l2 = lp_norm(u0, 2)
    return StrichartzReport(lhs, l2, lhs / l2 if l2 > 0 else INF)


@dataclass
class RetardedReport:
    lhs: float
    rhs: float
    ratio: float
    dual_lhs: float
    dual_ratio: float


def retarded_strichartz_verify(forcing: Trajectory, pair: AdmissiblePair, dual_pair: AdmissiblePair) -> RetardedReport:
    """Both sides of the retarded estimate; the dual homogeneous one rides along.

    The dual side is ||int_0^T exp(-is Lap) F(s) ds||_2, the final slice of
    the retarded integral pulled back by exp(-iT Lap).
    """
    if pair.dim != forcing.grid.dim or dual_pair.dim != forcing.grid.dim:
        raise ValueError("pair dimension does not match the grid")
    qd, rd = conjugate_exponent(dual_pair.q), conjugate_exponent(dual_pair.r)
    if qd == INF or rd == INF:
        raise ValueError("dual exponent conjugate is infinite; forcing norm not integrable")
    integral = retarded_integral(forcing)
    lhs = mixed_norm(integral, pair.q, pair.r)
    rhs = mixed_norm(forcing, qd, rd)
    dual_lhs = lp_norm(free_propagate(integral.slices[-1], -forcing.T), 2)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else INF)
    dual_ratio = dual_lhs / rhs if rhs > 0 else (0.0 if dual_lhs == 0 else INF)
    return RetardedReport(lhs, rhs, ratio, dual_lhs, dual_ratio)


@dataclass
class ConservationReport:
    mass_drift: float
    energy_drift: float
    displayed_energy_drift: float
    relative: bool


def conservation_audit(traj: Trajectory, cfg: SolverConfig) -> ConservationReport:
    """Max drift of mass and energy over the slices, relative to t = 0.

    ``energy_drift`` tracks the conserved energy (:func:`hamiltonian`);
    ``displayed_energy_drift`` tracks :func:`energy` as written.
    """
    masses = np.array([mass(s) for s in traj.slices])
    ham = np.array([hamiltonian(s, cfg.lam, cfg.p) for s in traj.slices])
    disp = np.array([energy(s, cfg.lam, cfg.p) for s in traj.slices])
    relative = masses[0] > 0

    def drift(a):
        d = float(np.max(np.abs(a - a[0])))
        return d / abs(a[0]) if relative and a[0] != 0 else d

    return ConservationReport(drift(masses), drift(ham), drift(disp), bool(relative))
