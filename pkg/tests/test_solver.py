import json
import math

import numpy as np
import pytest

from nls_lab.functionals import INF, Trajectory, lp_norm, validate_pair
from nls_lab.propagators import free_propagate, gaussian_closed_form
from nls_lab.solver import (
    BlowUpDetected,
    SolverConfig,
    conservation_audit,
    duhamel_apply,
    evolve,
    existence_time,
    first_contraction_ratio,
    free_trajectory,
    picard_solve,
    retarded_integral,
    retarded_strichartz_verify,
    strang_step,
    strichartz_verify,
    x_norm,
    _difference,
)
from nls_lab.spectral import Field, make_grid
from nls_lab.verify import random_gaussian_sum

from conftest import gaussian, random_field

SMALL_AMP = 0.1 / math.sqrt(math.pi)  # ||A e^{-|x|^2/2}||_2 = 0.1 in d = 2


def sigma_gaussian(grid, amp=1.0):
    return gaussian(grid, a=0.5, amp=amp)


def l2(a, b, grid):
    return math.sqrt(float(np.sum(np.abs(a - b) ** 2)) * grid.cell_volume)


@pytest.fixture(scope="module")
def small_picard():
    g = make_grid(2, 64, 20.0)
    u0 = sigma_gaussian(g, SMALL_AMP)
    cfg = SolverConfig(lam=1.0, p=2.0, T=0.8, dt=1e-3, scheme="picard", strichartz_pair=validate_pair(4, 4, 2))
    return u0, cfg, picard_solve(u0, cfg)


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(dt=2.0),
            dict(p=0.0),
            dict(T=-1.0),
            dict(scheme="rk4"),
            dict(picard_tol=0.0),
            dict(blowup_threshold=1.0),
            dict(strichartz_constant_C=0.0),
            dict(picard_max_iters=0),
        ],
    )
    def test_invalid(self, kw):
        base = dict(lam=1.0, p=2.0, T=1.0, dt=0.1)
        base.update(kw)
        with pytest.raises(ValueError):
            SolverConfig(**base)

    def test_dt_exceeds_message(self):
        with pytest.raises(ValueError, match="dt exceeds T"):
            SolverConfig(lam=1.0, p=2.0, T=1.0, dt=2.0)

    def test_time_nodes_tile(self):
        n, h = SolverConfig(lam=1.0, p=2.0, T=1.0, dt=0.3).time_nodes()
        assert n == 4 and h == 0.25

    def test_pair_dimension_mismatch(self):
        cfg = SolverConfig(lam=1.0, p=2.0, T=1.0, dt=0.1, strichartz_pair=validate_pair(4, 4, 2))
        with pytest.raises(ValueError):
            cfg.pair(1)


class TestStrang:
    def test_linear_is_free(self, grid2, rng):
        u = random_field(grid2, rng)
        cfg = SolverConfig(lam=0.0, p=2.0, T=1.0, dt=0.01)
        assert np.max(np.abs(strang_step(u, cfg).values - free_propagate(u, 0.01).values)) <= 1e-14

    def test_phase_substep(self):
        # a constant field has zero Laplacian: only the phase flow acts
        g = make_grid(2, 8, 4.0)
        A, lam, p, dt = 1.7, 0.8, 3.0, 0.01
        u = Field(g, np.full(g.shape, A, dtype=complex))
        out = strang_step(u, SolverConfig(lam=lam, p=p, T=1.0, dt=dt)).values
        assert np.allclose(np.abs(out), A, rtol=1e-14)
        assert np.allclose(out, A * np.exp(-1j * lam * A**p * dt), atol=1e-13)

    def test_second_order(self):
        g = make_grid(2, 64, 20.0)
        u0 = sigma_gaussian(g)
        T, dt = 0.5, 0.02

        def run(h):
            cfg = SolverConfig(lam=1.0, p=2.0, T=T, dt=h)
            n, _ = cfg.time_nodes()
            return evolve(u0, cfg, store_every=n)[0].slices[-1].values

        ref = run(dt / 8)
        e1 = l2(run(dt), ref, g)
        e2 = l2(run(dt / 2), ref, g)
        assert e1 / e2 == pytest.approx(4.0, rel=0.25)

    def test_time_reversal(self, grid2):
        u0 = sigma_gaussian(grid2)
        for lam, tol in ((0.0, 1e-12), (1.0, 1e-10), (-1.0, 1e-10)):
            cfg = SolverConfig(lam=lam, p=2.0, T=1.0, dt=0.01)
            u = u0
            for _ in range(100):
                u = strang_step(u, cfg)
            for _ in range(100):
                u = strang_step(u, cfg, dt=-0.01)
            assert l2(u.values, u0.values, grid2) <= tol * lp_norm(u0, 2)


class TestEvolve:
    def test_linear_matches_closed_form(self):
        g = make_grid(2, 128, 40.0)
        u0 = sigma_gaussian(g)
        tr, _ = evolve(u0, SolverConfig(lam=0.0, p=2.0, T=1.0, dt=0.1))
        assert len(tr) == 11
        for j in (3, 10):
            ref = gaussian_closed_form(g, tr.times[j])
            assert l2(tr.slices[j].values, ref.values, g) / lp_norm(ref, 2) < 1e-8

    def test_defocusing_completes_bounded(self):
        g = make_grid(2, 64, 20.0)
        cfg = SolverConfig(lam=1.0, p=2.0, T=1.0, dt=1e-3)
        tr, hist = evolve(sigma_gaussian(g), cfg, store_every=100)
        assert len(tr) == 11 and len(hist) == 1001
        assert max(r.h2 for r in hist) / hist[0].h2 < 10
        m = np.array([r.mass for r in hist])
        assert np.max(np.abs(m - m[0])) / m[0] < 1e-12
        assert all(b.t > a.t for a, b in zip(hist, hist[1:]))

    def test_focusing_blowup_signal(self):
        g = make_grid(2, 128, 16.0)
        cfg = SolverConfig(lam=-1.0, p=2.0, T=1.0, dt=1e-3, blowup_threshold=50.0)
        with pytest.raises(BlowUpDetected) as info:
            evolve(sigma_gaussian(g, 3.0), cfg)
        exc = info.value
        assert 0 < exc.t_last < 1.0
        assert exc.ratio > 50
        assert exc.history[0].t == 0.0
        assert exc.last_field is not None

    def test_store_every_must_divide(self, grid2):
        with pytest.raises(ValueError):
            evolve(sigma_gaussian(grid2), SolverConfig(lam=1.0, p=2.0, T=1.0, dt=0.1), store_every=3)


class TestDuhamel:
    def test_zero(self, grid2):
        z = Field(grid2, np.zeros(grid2.shape))
        tr = Trajectory(grid2, 0.0, 0.1, [z] * 5)
        out = duhamel_apply(tr, z, SolverConfig(lam=1.0, p=2.0, T=0.4, dt=0.1))
        assert all(not np.any(s.values) for s in out.slices)

    def test_linear_ignores_input(self, grid2, rng):
        u0 = sigma_gaussian(grid2)
        junk = Trajectory(grid2, 0.0, 0.1, [random_field(grid2, rng) for _ in range(4)])
        out = duhamel_apply(junk, u0, SolverConfig(lam=0.0, p=2.0, T=0.3, dt=0.1))
        for t, s in zip(out.times, out.slices):
            assert np.max(np.abs(s.values - free_propagate(u0, t).values)) < 1e-13

    def test_fixed_point_residual(self, small_picard):
        u0, cfg, rep = small_picard
        again = duhamel_apply(rep.final, u0, cfg)
        assert x_norm(_difference(again, rep.final), cfg.pair(2)) < cfg.picard_tol

    def test_nonfinite_names_time(self, grid2):
        bad = Field(grid2, np.full(grid2.shape, 1e200))
        tr = Trajectory(grid2, 0.0, 0.1, [bad, bad])
        with np.errstate(over="ignore", invalid="ignore"), pytest.raises(ValueError, match="s = "):
            duhamel_apply(tr, bad, SolverConfig(lam=1.0, p=2.0, T=0.1, dt=0.1))


class TestPicard:
    def test_linear_one_iteration(self, grid2):
        rep = picard_solve(sigma_gaussian(grid2), SolverConfig(lam=0.0, p=2.0, T=0.5, dt=0.01, scheme="picard"))
        assert rep.converged and rep.iterates_used == 1
        assert rep.contraction_ratios == []

    def test_small_data_contracts(self, small_picard):
        _, cfg, rep = small_picard
        assert rep.converged
        assert rep.iterates_used <= 30
        assert len(rep.contraction_ratios) == rep.iterates_used - 1
        assert all(r <= 0.5 for r in rep.contraction_ratios)
        assert all(d > 0 for d in rep.successive_diffs)

    def test_cross_validation(self, small_picard):
        u0, cfg, rep = small_picard
        tr, _ = evolve(u0, SolverConfig(lam=cfg.lam, p=cfg.p, T=cfg.T, dt=cfg.dt), store_every=1)
        g = u0.grid
        worst = max(l2(a.values, b.values, g) for a, b in zip(rep.final.slices, tr.slices))
        assert worst < max(10 * cfg.picard_tol, 1e-6)

    def test_oversized_horizon_diverges(self):
        g = make_grid(2, 32, 16.0)
        cfg = SolverConfig(lam=1.0, p=2.0, T=70.0, dt=0.1, scheme="picard", picard_max_iters=10)
        rep = picard_solve(sigma_gaussian(g), cfg)
        assert not rep.converged
        assert rep.contraction_ratios[0] > 1

    def test_report_json(self, small_picard):
        doc = json.loads(small_picard[2].to_json())
        assert set(doc) == {"iterates_used", "successive_diffs", "contraction_ratios", "converged"}


class TestExistenceTime:
    def test_linear_infinite(self, grid2):
        rep = existence_time(sigma_gaussian(grid2), SolverConfig(lam=0.0, p=2.0, T=1.0, dt=0.01))
        assert rep.T_formula == INF and rep.T_adaptive == INF

    def test_radius_and_horizons(self):
        g = make_grid(2, 32, 16.0)
        u0 = sigma_gaussian(g, 0.25 / math.sqrt(math.pi))
        cfg = SolverConfig(lam=1.0, p=2.0, T=1.0, dt=0.01, strichartz_pair=validate_pair(4, 4, 2))
        rep = existence_time(u0, cfg)
        assert rep.R == pytest.approx(1.0, rel=1e-8)
        # base 4C|lam|R^p = 4; exponents 1-(p+q)/2 = -2 and 1-(p+1)/q = 1/4
        assert rep.T_formula == pytest.approx(2.0, rel=1e-7)
        assert rep.T_bound == pytest.approx(4.0**-4, rel=1e-7)
        assert rep.first_ratio <= 0.5
        assert rep.T_adaptive <= rep.T_formula

    def test_doubling_norm(self):
        g = make_grid(2, 32, 16.0)
        cfg = SolverConfig(lam=1.0, p=2.0, T=1.0, dt=0.01, strichartz_pair=validate_pair(4, 4, 2))
        a = existence_time(sigma_gaussian(g, 0.05), cfg)
        b = existence_time(sigma_gaussian(g, 0.1), cfg)
        # base grows by 2^p = 4; the Holder-bound horizon shrinks by 4^4, while the
        # negative formula exponent makes T_formula grow by 4^{1/2}
        assert b.T_bound == pytest.approx(a.T_bound / 256, rel=1e-8)
        assert b.T_formula == pytest.approx(2 * a.T_formula, rel=1e-8)
        # at a fixed horizon the measured contraction worsens with the norm (~R^p)
        ra = first_contraction_ratio(sigma_gaussian(g, 0.05), cfg, 0.5)
        rb = first_contraction_ratio(sigma_gaussian(g, 0.1), cfg, 0.5)
        assert rb / ra == pytest.approx(4.0, rel=0.1)


class TestStrichartz:
    def test_endpoint_unitarity(self):
        g = make_grid(2, 64, 40.0)
        r = strichartz_verify(sigma_gaussian(g), validate_pair(INF, 2, 2), 5.0, 100)
        assert abs(r.rhs_constant - 1) <= 1e-12

    def test_finite_44(self):
        g = make_grid(2, 128, 100.0)
        r = strichartz_verify(sigma_gaussian(g), validate_pair(4, 4, 2), 2.0, 200)
        assert 0 < r.rhs_constant < INF

    def test_dimension_mismatch(self, grid1):
        with pytest.raises(ValueError):
            strichartz_verify(gaussian(grid1), validate_pair(4, 4, 2), 1.0)


class TestRetarded:
    pair = validate_pair(4, 4, 2)

    def test_zero_forcing(self, grid2):
        z = Field(grid2, np.zeros(grid2.shape))
        r = retarded_strichartz_verify(Trajectory(grid2, 0.0, 0.1, [z] * 4), self.pair, self.pair)
        assert r.lhs == 0 and r.ratio == 0

    def test_free_wave_forcing(self):
        g = make_grid(2, 64, 30.0)
        gdat = sigma_gaussian(g)
        forcing = free_trajectory(gdat, 100, 0.01)
        integ = retarded_integral(forcing)
        for t, s, f in zip(integ.times, integ.slices, forcing.slices):
            assert np.max(np.abs(s.values - t * f.values)) < 1e-12
        r = retarded_strichartz_verify(forcing, self.pair, self.pair)
        assert 0 < r.ratio < INF
        # final-time dual estimate: ||int_0^T e^{-is Lap} F ds||_2 = T ||g||_2
        assert r.dual_lhs == pytest.approx(1.0 * lp_norm(gdat, 2), rel=1e-12)

    def test_stable_under_dt_halving(self, rng):
        g = make_grid(2, 64, 20.0)
        base = random_gaussian_sum(g, rng)
        ratios = []
        for n in (50, 100):
            h = 1.0 / n
            sl = [Field(g, (1 + np.sin(3 * j * h)) * base.values) for j in range(n + 1)]
            ratios.append(retarded_strichartz_verify(Trajectory(g, 0.0, h, sl), self.pair, self.pair).ratio)
        assert abs(ratios[1] / ratios[0] - 1) <= 0.10

    def test_dimension_mismatch(self, grid1, grid2):
        z = Field(grid1, np.zeros(grid1.shape))
        with pytest.raises(ValueError):
            retarded_strichartz_verify(Trajectory(grid1, 0.0, 0.1, [z, z]), self.pair, self.pair)


class TestConservation:
    def test_mass_and_energy_order(self):
        g = make_grid(2, 64, 20.0)
        u0 = sigma_gaussian(g)
        drifts = []
        for dt in (2e-3, 1e-3):
            cfg = SolverConfig(lam=1.0, p=2.0, T=1.0, dt=dt)
            tr, _ = evolve(u0, cfg, store_every=10)
            a = conservation_audit(tr, cfg)
            assert a.mass_drift <= 1e-12
            drifts.append(a.energy_drift)
        assert 3 <= drifts[0] / drifts[1] <= 5

    def test_linear_exact(self, grid2):
        cfg = SolverConfig(lam=0.0, p=2.0, T=1.0, dt=0.01)
        tr, _ = evolve(sigma_gaussian(grid2), cfg, store_every=10)
        a = conservation_audit(tr, cfg)
        assert a.energy_drift <= 1e-10 and a.mass_drift <= 1e-12

    def test_zero_mass_absolute(self, grid2):
        z = Field(grid2, np.zeros(grid2.shape))
        a = conservation_audit(Trajectory(grid2, 0.0, 0.1, [z, z]), SolverConfig(lam=1.0, p=2.0, T=1.0, dt=0.1))
        assert not a.relative and a.mass_drift == 0.0
