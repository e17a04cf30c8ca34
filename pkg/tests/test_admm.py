"""Optimizer tests: subproblem solvers, full runs, and the distance rule."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize

from rssdgeom.admm import (
    AdmmOptions,
    g_update_mm,
    mm_row_update,
    optimal_distance,
    optimize,
    singular_value_map,
    uniform_init,
    x_update,
)
from rssdgeom.fim import (
    coupling_matrix,
    fim_full,
    g0_bound,
    is_feasible,
    noise_weights,
    sensitivity_diag,
)
from rssdgeom.model import Placement, SourceParams, case_a, case_b
from rssdgeom.numerics import psd_sqrt, sym_eig_max

TWO_PI = 2.0 * math.pi


class TestUniformInit:
    def test_full_circle_eight(self):
        p = uniform_init(8, TWO_PI)
        expect = np.radians([45, 90, 135, 180, 225, 270, 315, 0])  # 360 wraps to 0
        np.testing.assert_allclose(p.angles, expect, atol=1e-12)

    def test_half_circle_four(self):
        p = uniform_init(4, math.pi)
        np.testing.assert_allclose(p.angles, np.radians([45, 90, 135, 180]), atol=1e-12)

    def test_two_sensors(self):
        p = uniform_init(2, TWO_PI / 3)
        np.testing.assert_allclose(p.angles, np.radians([60, 120]), atol=1e-12)

    def test_rejects_tiny_swarm(self):
        with pytest.raises(ValueError):
            uniform_init(1, math.pi)


class TestSingularValueMap:
    def test_zero_sigma(self):
        assert singular_value_map(0.0, 2.0) == pytest.approx(1.0, abs=1e-15)

    def test_unit_case(self):
        assert singular_value_map(1.0, 1.0) == pytest.approx(2.0, abs=1e-15)

    def test_quadratic_formula(self):
        # (5 + sqrt(29)) / 1
        assert singular_value_map(5.0, 0.5) == pytest.approx(10.385164807134505, rel=1e-12)

    def test_is_positive_root(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            sigma = rng.uniform(0, 10)
            rho = rng.uniform(0.01, 10)
            lam = singular_value_map(sigma, rho)
            assert lam > 0
            assert rho * lam**2 - sigma * lam - 2 == pytest.approx(0.0, abs=1e-9)


def x_objective(x, j_k, rho):
    """ln det (X'X)^-1 + rho/2 ||X||^2 - <J, X> (the X-subproblem objective)."""
    sign, logdet = np.linalg.slogdet(x.T @ x)
    if sign <= 0:
        return math.inf
    return -logdet + 0.5 * rho * np.sum(x * x) - np.sum(j_k * x)


def x_objective_grad(x, j_k, rho):
    return -2.0 * x @ np.linalg.inv(x.T @ x) + rho * x - j_k


class TestXUpdate:
    def test_zero_input_inflates_to_unit_values(self):
        x = x_update(np.zeros((6, 2)), rho=2.0)
        s = np.linalg.svd(x, compute_uv=False)
        np.testing.assert_allclose(s, [1.0, 1.0], atol=1e-12)

    def test_unit_singular_values(self):
        # J with both singular values 1: orthonormal columns
        j_k = np.zeros((5, 2))
        j_k[0, 0] = 1.0
        j_k[1, 1] = 1.0
        x = x_update(j_k, rho=1.0)
        s = np.linalg.svd(x, compute_uv=False)
        np.testing.assert_allclose(s, [2.0, 2.0], atol=1e-12)

    def test_beats_random_perturbations(self):
        rng = np.random.default_rng(22)
        j_k = rng.normal(size=(8, 2))
        x = x_update(j_k, rho=1.0)
        base = x_objective(x, j_k, 1.0)
        # 1e4 random perturbations at radius 1e-3 never beat the solution
        noise = rng.normal(size=(10_000, 8, 2))
        noise /= np.linalg.norm(noise, axis=(1, 2))[:, None, None]
        for z in noise:
            assert x_objective(x + 1e-3 * z, j_k, 1.0) >= base - 1e-12

    def test_beats_generic_minimizer(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            n = int(rng.integers(3, 9))
            rho = float(rng.uniform(0.2, 5.0))
            j_k = rng.normal(size=(n, 2)) * rng.uniform(0.5, 3.0)
            x = x_update(j_k, rho)
            ours = x_objective(x, j_k, rho)
            best = math.inf
            for start in (j_k / rho + 0.5 * rng.normal(size=(n, 2)), x + 0.3 * rng.normal(size=(n, 2))):
                res = minimize(
                    lambda v: x_objective(v.reshape(n, 2), j_k, rho),
                    start.ravel(),
                    jac=lambda v: x_objective_grad(v.reshape(n, 2), j_k, rho).ravel(),
                    method="L-BFGS-B",
                    options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-12},
                )
                best = min(best, res.fun)
            assert ours <= best + 1e-6


class TestMmRowUpdate:
    def test_interior_case(self):
        bound = g0_bound(math.pi / 2)
        g = mm_row_update(np.array([0.0, -1.0]), bound)
        np.testing.assert_allclose(g, [0.0, 1.0], atol=1e-12)

    def test_endpoint_case(self):
        # -q points at [0,-1], infeasible; candidates give values 1 and 0
        bound = g0_bound(math.pi / 2)
        g = mm_row_update(np.array([0.0, 1.0]), bound)
        np.testing.assert_allclose(g, [1.0, 0.0], atol=1e-12)

    def test_zero_q_keeps_previous(self):
        bound = g0_bound(math.pi)
        prev = np.array([0.6, 0.8])
        np.testing.assert_allclose(mm_row_update(np.zeros(2), bound, prev=prev), prev)

    def test_matches_dense_arc_grid(self):
        # 1e5 random (q, beta_max) pairs, each checked against a 1e4-point
        # sweep of the feasible arc
        rng = np.random.default_rng(24)
        n_grid = 10_000
        for beta_max in rng.uniform(0.05, TWO_PI, 100):
            bound = g0_bound(beta_max)
            if beta_max <= math.pi:
                arc = np.linspace(0.0, beta_max, n_grid)
            else:
                lo = math.pi / 2 - beta_max / 2
                arc = np.linspace(lo, lo + beta_max, n_grid)
            cand = np.column_stack([np.cos(arc), np.sin(arc)])
            qs = rng.normal(size=(1000, 2))
            grid_vals = cand @ qs.T  # (n_grid, 1000)
            grid_min = grid_vals.min(axis=0)
            for q, gmin in zip(qs, grid_min):
                g = mm_row_update(q, bound)
                assert float(g @ q) <= gmin + 1e-9
                assert np.all(g >= bound.g0 - 1e-12)


def random_mm_instance(rng, n=5, beta_max=math.radians(140)):
    bound = g0_bound(beta_max)
    w = rng.uniform(0.2, 1.0, n)
    w /= w.sum()
    b = np.diag(w) - np.outer(w, w)
    d = rng.uniform(0.5, 1.5, n)
    half_bd = psd_sqrt(b) * d[None, :]
    m = half_bd.T @ half_bd
    m = 0.5 * (m + m.T)
    m_tilde = m - sym_eig_max(m) * np.eye(n)
    rho = float(rng.uniform(0.5, 4.0))
    x_next = rng.normal(size=(n, 2))
    v = rng.normal(size=(n, 2))
    start_angles = rng.uniform(0, beta_max if beta_max <= math.pi else TWO_PI, n)
    if beta_max > math.pi:
        lo = math.pi / 2 - beta_max / 2
        start_angles = lo + rng.uniform(0, beta_max, n)
    g_start = np.column_stack([np.cos(start_angles), np.sin(start_angles)])
    return bound, half_bd, m_tilde, rho, x_next, v, g_start


def g_objective(g, half_bd, c, rho):
    sg = half_bd @ g
    return 0.5 * rho * float(np.sum(sg * sg)) + float(np.sum(c * sg))


class TestGUpdateMm:
    def test_fixed_point_returns_start(self):
        rng = np.random.default_rng(25)
        bound, half_bd, m_tilde, rho, _, _, g_start = random_mm_instance(rng)
        x_next = half_bd @ g_start
        v = np.zeros_like(x_next)
        g, inner = g_update_mm(x_next, v, g_start, half_bd, m_tilde, rho, bound)
        assert inner == 1
        np.testing.assert_allclose(g, g_start, atol=1e-12)

    def test_monotone_descent_every_sweep(self):
        # re-run the sweeps by hand and check the true subproblem objective
        # never increases (the linearization is a global upper bound)
        rng = np.random.default_rng(26)
        for _ in range(20):
            bound, half_bd, m_tilde, rho, x_next, v, g = random_mm_instance(rng)
            c = v - rho * x_next
            base = half_bd.T @ c
            prev_val = g_objective(g, half_bd, c, rho)
            for _ in range(40):
                q_all = base + rho * (m_tilde @ g)
                g = np.stack([mm_row_update(q_all[i], bound, prev=g[i]) for i in range(len(g))])
                val = g_objective(g, half_bd, c, rho)
                assert val <= prev_val + 1e-10
                prev_val = val

    @staticmethod
    def _grid_min(half_bd, c, rho, beta_max):
        arc = np.linspace(0, beta_max, 60)
        dirs = np.column_stack([np.cos(arc), np.sin(arc)])
        best = math.inf
        for i1 in range(60):
            for i2 in range(60):
                g3 = np.empty((60, 3, 2))
                g3[:, 0] = dirs[i1]
                g3[:, 1] = dirs[i2]
                g3[:, 2] = dirs
                sdg = np.einsum("ij,kjl->kil", half_bd, g3)
                vals = 0.5 * rho * np.sum(sdg * sdg, axis=(1, 2)) + np.sum(
                    c * sdg, axis=(1, 2)
                )
                best = min(best, float(vals.min()))
        return best

    def test_usually_globally_optimal_on_three_sensor_grid(self):
        # exhaustive 60^3 grid over feasible angle triples: the sweep limit
        # is a fixed point that is usually, but provably not always, the
        # global subproblem optimum (see test_documents_local_fixed_point)
        rng = np.random.default_rng(27)
        beta_max = math.radians(120.0)
        hits = 0
        for _ in range(8):
            bound, half_bd, m_tilde, rho, x_next, v, g_start = random_mm_instance(
                rng, n=3, beta_max=beta_max
            )
            g, _ = g_update_mm(
                x_next, v, g_start, half_bd, m_tilde, rho, bound,
                mm_tol=1e-12, max_inner=500,
            )
            c = v - rho * x_next
            ours = g_objective(g, half_bd, c, rho)
            start_val = g_objective(g_start, half_bd, c, rho)
            assert ours <= start_val + 1e-10
            hits += ours <= self._grid_min(half_bd, c, rho, beta_max) + 1e-6
        assert hits >= 6

    def test_documents_local_fixed_point(self):
        # reproducible counterexample to universal global optimality: the 4th
        # instance of this seed converges (tol 1e-12, a true fixed point) to
        # an objective ~0.3 above the exhaustive grid minimum
        rng = np.random.default_rng(27)
        beta_max = math.radians(120.0)
        gaps = []
        for _ in range(4):
            bound, half_bd, m_tilde, rho, x_next, v, g_start = random_mm_instance(
                rng, n=3, beta_max=beta_max
            )
            g, _ = g_update_mm(
                x_next, v, g_start, half_bd, m_tilde, rho, bound,
                mm_tol=1e-12, max_inner=500,
            )
            c = v - rho * x_next
            gaps.append(
                g_objective(g, half_bd, c, rho) - self._grid_min(half_bd, c, rho, beta_max)
            )
        assert gaps[3] > 0.1  # non-global fixed point, stable under more sweeps


class TestOptimize:
    def test_equal_weights_full_circle_matches_uniform(self):
        # with identical sensors and no constraint the even spread is optimal,
        # so the optimizer must return (numerically) the same LB-RMSE
        sc = case_b(beta_max=TWO_PI)
        placement, trace = optimize(sc)
        lb_uniform = trace.records[0].lb_rmse
        lb_opt = min(rec.lb_rmse for rec in trace.records)
        assert lb_opt == pytest.approx(lb_uniform, rel=1e-6)
        assert trace.converged

    def test_constrained_heterogeneous_improves_early(self):
        sc = case_a(beta_max=math.radians(120.0))
        placement, trace = optimize(sc, options=AdmmOptions(max_outer=10))
        lb_uniform = trace.records[0].lb_rmse
        lb_10 = min(rec.lb_rmse for rec in trace.records)
        assert 1.0 - lb_10 / lb_uniform >= 0.20

    def test_every_iterate_feasible_unit_norm(self):
        for beta_deg in (120.0, 200.0, 280.0, 360.0):
            sc = case_a(beta_max=math.radians(beta_deg))
            placement, trace = optimize(sc)
            for rec in trace.records:
                assert np.all(rec.angles >= -1e-9)
                assert np.all(rec.angles <= sc.beta_max + 1e-9)
            norms = np.linalg.norm(placement.directions, axis=1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-9)
            bound = g0_bound(sc.beta_max)
            if sc.beta_max <= math.pi:
                assert is_feasible(placement, bound).ok

    def test_trace_starts_at_uniform(self):
        sc = case_a(beta_max=math.radians(200.0))
        _, trace = optimize(sc)
        uniform = uniform_init(8, sc.beta_max)
        np.testing.assert_allclose(trace.records[0].angles, uniform.angles, atol=0.0)
        lb_uniform = fim_full(sc, uniform, SourceParams(0.0, [0.0, 0.0])).lb_rmse
        assert trace.records[0].lb_rmse == lb_uniform

    def test_never_worse_than_uniform(self):
        rng = np.random.default_rng(28)
        for _ in range(5):
            beta = float(rng.uniform(0.6, TWO_PI))
            sc = case_a(beta_max=beta)
            placement, trace = optimize(sc)
            summary = fim_full(sc, placement, SourceParams(0.0, [0.0, 0.0]))
            assert summary.lb_rmse <= trace.records[0].lb_rmse + 1e-9
            det_uniform = trace.records[0].det_t
            assert np.linalg.det(summary.t) >= det_uniform - 1e-12

    def test_deterministic_trajectories(self):
        sc = case_a(beta_max=math.radians(280.0))
        p1, t1 = optimize(sc)
        p2, t2 = optimize(sc)
        assert np.array_equal(p1.angles, p2.angles)
        assert len(t1.records) == len(t2.records)
        for a, b in zip(t1.records, t2.records):
            assert a.lb_rmse == b.lb_rmse
            assert a.det_t == b.det_t
            assert np.array_equal(a.angles, b.angles)

    def test_converges_across_penalty_weights(self):
        for rho in (0.1, 1.0, 10.0):
            for builder in (case_a, case_b):
                sc = builder(beta_max=math.radians(280.0))
                _, trace = optimize(sc, options=AdmmOptions(rho=rho, max_outer=1000))
                assert trace.converged, rho

    def test_nonconvergence_flagged(self):
        sc = case_a(beta_max=math.radians(120.0))
        _, trace = optimize(sc, options=AdmmOptions(max_outer=1))
        assert not trace.converged

    def test_prior_centered_geometry_same_angles(self):
        # the optimal angles depend only on distances/noise, not on where the
        # assumed source sits
        sc = case_a(beta_max=math.radians(150.0))
        p0, _ = optimize(sc)
        guess = SourceParams(0.0, [400.0, -250.0])
        p1, _ = optimize(sc.with_source(guess.position), source_guess=guess)
        np.testing.assert_allclose(p0.angles, p1.angles, atol=1e-12)


def grid_best_distance(r_range, h_range, n_grid=1000):
    """Dense grid-search oracle for the single-sensor distance choice."""
    r = np.linspace(r_range[0], r_range[1], n_grid)
    h = np.linspace(h_range[0], h_range[1], n_grid)
    rr, hh = np.meshgrid(r, h, indexing="ij")
    val = rr / (rr**2 + hh**2)
    k = int(np.argmax(val))
    return rr.ravel()[k], hh.ravel()[k]


class TestOptimalDistance:
    def test_interior_maximum_at_r_equals_h(self):
        got = optimal_distance((50.0, 2000.0), (100.0, 500.0))
        assert got == (100.0, 100.0)
        grid = grid_best_distance((50.0, 2000.0), (100.0, 500.0))
        assert abs(grid[0] - got[0]) < 2.5 and abs(grid[1] - got[1]) < 2.5

    def test_lower_clamp(self):
        got = optimal_distance((200.0, 2000.0), (100.0, 500.0))
        assert got == (200.0, 100.0)
        grid = grid_best_distance((200.0, 2000.0), (100.0, 500.0))
        assert abs(grid[0] - got[0]) < 2.5 and abs(grid[1] - got[1]) < 2.5

    def test_upper_clamp(self):
        got = optimal_distance((10.0, 50.0), (100.0, 500.0))
        assert got == (50.0, 100.0)
        grid = grid_best_distance((10.0, 50.0), (100.0, 500.0))
        assert abs(grid[0] - got[0]) < 0.1 and abs(grid[1] - got[1]) < 0.5

    def test_hundred_random_rectangles(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            r_min = rng.uniform(1, 500)
            r_max = r_min + rng.uniform(1, 2000)
            h_min = rng.uniform(0, 500)
            h_max = h_min + rng.uniform(1, 500)
            got = optimal_distance((r_min, r_max), (h_min, h_max))
            grid = grid_best_distance((r_min, r_max), (h_min, h_max), n_grid=400)
            cell_r = (r_max - r_min) / 399
            cell_h = (h_max - h_min) / 399
            assert abs(got[0] - grid[0]) <= cell_r + 1e-9
            assert abs(got[1] - grid[1]) <= cell_h + 1e-9

    def test_rejects_empty_ranges(self):
        with pytest.raises(ValueError):
            optimal_distance((10.0, 5.0), (0.0, 1.0))
        with pytest.raises(ValueError):
            optimal_distance((1.0, 5.0), (3.0, 2.0))
