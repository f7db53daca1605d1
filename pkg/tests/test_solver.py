import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_path_points
from oracles import NaturalSplineOracle, grid_search, mpcc_cost_batch
from mpccil import solver as S
from mpccil.controllers import Avoidance, MpccWeights, mpcc_solve
from mpccil.dynamics import ModelParams, cruise_state, step_kernel
from mpccil.geometry import build_spline, closest_point
from mpccil.world import Obstacle, pack_obstacles

MODEL = ModelParams.from_alpha(0.85)
WEIGHTS = MpccWeights(R=(2.0, 8.0, 8.0, 1.0), nu_dot_max=1.3)


def grid_instance(rng, N):
    pts = np.array([[0, 0, 1], [4, rng.uniform(-1, 1), 1 + rng.uniform(-0.2, 0.2)],
                    [8, rng.uniform(-1, 1), 1], [12, 0, 1]])
    nu0 = rng.uniform(0.5, 6)
    path = build_spline(pts)
    x0 = cruise_state(path.position(nu0) + rng.normal(0, 0.3, 3), rng.uniform(-0.3, 0.3),
                      rng.uniform(0, 1.3), MODEL)
    x0[5] = rng.uniform(-0.2, 0.2)
    w = MpccWeights(K_c=rng.uniform(1, 50), beta=rng.uniform(0.5, 2), R=tuple(rng.uniform(0.1, 2, 4)),
                    N=N, nu_dot_max=1.3)
    return pts, path, nu0, x0, w


@pytest.mark.parametrize("seed", range(6))
def test_no_grid_point_beats_the_solver(seed):
    rng = np.random.default_rng(100 + seed)
    N, levels = (3, 3) if seed % 3 == 0 else (2, 5)
    pts, path, nu0, x0, w = grid_instance(rng, N)
    oracle = NaturalSplineOracle(pts)
    sol = mpcc_solve(x0, nu0, path, w, MODEL)
    W = np.column_stack([sol.inputs[:, :3], sol.nu_dot])[None]
    own, _ = mpcc_cost_batch(x0, nu0, W, oracle, w.K_c, w.K_l, w.beta, np.array(w.R), w.nu_dot_reg, MODEL)
    assert sol.cost == pytest.approx(own[0], rel=1e-9, abs=1e-9)
    best, _ = grid_search(x0, nu0, N, oracle, w.K_c, w.K_l, w.beta, np.array(w.R), w.nu_dot_reg, MODEL,
                          levels, w.nu_dot_max, path.total_length)
    assert sol.cost <= best + 1e-6


# ------------------------------------------------------- derivative checks

def problem(rng, n=4, nref=0, with_obstacle=False):
    path = build_spline(random_path_points(rng))
    nu0 = rng.uniform(0.5, path.total_length - 3)
    x0 = cruise_state(path.position(nu0) + rng.normal(0, 0.4, 3), rng.uniform(-0.5, 0.5),
                      rng.uniform(0.3, 1.3), MODEL)
    w = np.empty(n * S.NW)
    for k in range(n):
        w[k * S.NW:k * S.NW + 4] = rng.uniform(-0.3, 0.3, 4)
        w[k * S.NW + 4] = rng.uniform(0.2, 1.2)
    wts = np.array([rng.uniform(1, 40), 100.0, 1.0, 1e-3, 0.0, 0.0])
    obs = np.zeros((0, 7))
    if with_obstacle:
        p = path.position(nu0 + 1.0)
        obs = pack_obstacles([Obstacle.cylinder(p[0] + 0.3, p[1] + 0.8, 0.3)])
        wts[S.W_AVOID], wts[S.W_ONSET] = 50.0, 3.0
    xrefs = rng.normal(0, 1, (nref, n + 1, 8)) + x0
    qrefs = rng.uniform(0.1, 2, (nref, n + 1, 8))
    rdiag = rng.uniform(0.1, 8, 4)
    uref = rng.uniform(-0.2, 0.2, (n, 4))
    return dict(path=path, nu0=nu0, x0=x0, w=w, n=n, wts=wts, obs=obs, xrefs=xrefs, qrefs=qrefs,
                rdiag=rdiag, uref=uref)


def cost_at(P, w):
    X, NU = S.rollout_aug(P["x0"], P["nu0"], w, MODEL.packed, P["n"])
    return S.total_cost(X, NU, w, P["n"], P["path"].knots, P["path"].coefs, P["wts"], P["rdiag"],
                        P["uref"], P["xrefs"], P["qrefs"], P["obs"])


def analytic_gradient(P):
    X, NU = S.rollout_aug(P["x0"], P["nu0"], P["w"], MODEL.packed, P["n"])
    g, H = S.gradient_hessian(X, NU, P["w"], P["n"], MODEL.packed, P["path"].knots, P["path"].coefs,
                              P["wts"], P["rdiag"], P["uref"], P["xrefs"], P["qrefs"], P["obs"])
    return g, H


def fd_gradient(P, h=1e-6):
    g = np.zeros_like(P["w"])
    for i in range(len(g)):
        d = np.zeros_like(g)
        d[i] = h
        g[i] = (cost_at(P, P["w"] + d) - cost_at(P, P["w"] - d)) / (2 * h)
    return g


def test_gradient_matches_finite_differences(rng):
    worst = 0.0
    for i in range(200):
        P = problem(rng, n=int(rng.integers(2, 6)), nref=i % 3, with_obstacle=i % 4 == 0)
        g, H = analytic_gradient(P)
        fd = fd_gradient(P)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-6))
        assert np.allclose(H, H.T)
        assert np.min(np.linalg.eigvalsh(H)) > -1e-8
    assert worst < 1e-5


def test_stage_jacobian_matches_finite_differences(rng):
    worst = 0.0
    for i in range(200):
        P = problem(rng, nref=i % 2, with_obstacle=i % 3 == 0)
        k = int(rng.integers(0, P["n"] + 1))
        x = P["x0"] + rng.normal(0, 0.2, 8)
        nu = P["nu0"] + rng.uniform(0, 1)
        args = (k, P["path"].knots, P["path"].coefs, P["wts"], P["xrefs"], P["qrefs"], P["obs"])
        _, J = S.stage_residual(x, nu, *args, True)
        Jf = np.zeros_like(J)
        h = 1e-6
        for j in range(9):
            z = np.concatenate([x, [nu]])
            zp, zm = z.copy(), z.copy()
            zp[j] += h
            zm[j] -= h
            rp, _ = S.stage_residual(zp[:8], zp[8], *args, False)
            rm, _ = S.stage_residual(zm[:8], zm[8], *args, False)
            Jf[:, j] = (rp - rm) / (2 * h)
        worst = max(worst, np.linalg.norm(J - Jf) / max(np.linalg.norm(Jf), 1e-6))
    assert worst < 1e-5


# ------------------------------------------------------------ solutions

STRAIGHT = build_spline([[0, 0, 1], [30, 0, 1]])


@pytest.mark.parametrize("offset", [0.0, 0.3, -0.5])
def test_kkt_on_straight_path(offset):
    x = cruise_state([0, offset, 1], 0.0, 1.0, MODEL)
    sol = mpcc_solve(x, 0.0, STRAIGHT, MpccWeights(), MODEL)
    assert sol.converged
    assert sol.kkt_residual <= 1e-6


def test_terminal_bound_near_path_end():
    x = cruise_state([28.5, 0, 1], 0.0, 1.3, MODEL)
    sol = mpcc_solve(x, 28.5, STRAIGHT, WEIGHTS, MODEL)
    assert sol.nu[-1] <= STRAIGHT.total_length + 1e-9


def check_solution(sol, x0, path, w):
    assert np.all(sol.nu >= -1e-12) and np.all(sol.nu <= path.total_length + 1e-9)
    assert np.all(np.diff(sol.nu) >= -1e-12)
    assert np.all(sol.nu_dot >= -1e-12) and np.all(sol.nu_dot <= w.nu_dot_max + 1e-12)
    ub = MODEL.input_limits.upper
    assert np.all(np.abs(sol.inputs) <= ub + 1e-12)
    x = np.asarray(x0, dtype=float)
    for k, u in enumerate(sol.inputs):
        x = step_kernel(x, u, MODEL.packed)
        np.testing.assert_allclose(sol.states[k + 1], x, atol=1e-12)
        assert sol.nu[k + 1] == pytest.approx(sol.nu[k] + MODEL.Ts * sol.nu_dot[k], abs=1e-12)


@given(seed=st.integers(0, 2 ** 31 - 1), horizon=st.integers(2, 12))
@settings(max_examples=25)
def test_solution_invariants(seed, horizon):
    r = np.random.default_rng(seed)
    path = build_spline(random_path_points(r))
    nu0 = r.uniform(0, path.total_length)
    x0 = cruise_state(path.position(nu0) + r.normal(0, 0.5, 3), r.uniform(-1, 1), r.uniform(0, 1.5), MODEL)
    w = MpccWeights(N=horizon, nu_dot_max=1.3, R=(2, 8, 8, 1))
    avoid = None
    if seed % 2:
        p = path.position(min(nu0 + 2, path.total_length))
        avoid = Avoidance((Obstacle.cylinder(p[0], p[1] + 0.5, 0.3),))
    sol = mpcc_solve(x0, nu0, path, w, MODEL, avoid=avoid)
    check_solution(sol, x0, path, w)


@given(seed=st.integers(0, 2 ** 31 - 1))
@settings(max_examples=15)
def test_solve_is_deterministic(seed):
    r = np.random.default_rng(seed)
    path = build_spline(random_path_points(r))
    x0 = cruise_state(path.position(1.0) + r.normal(0, 0.3, 3), 0.0, 1.0, MODEL)
    w = MpccWeights(N=8, nu_dot_max=1.3)
    a = mpcc_solve(x0, 1.0, path, w, MODEL)
    b = mpcc_solve(x0.copy(), 1.0, path, w, MODEL)
    assert np.array_equal(a.w, b.w) and a.cost == b.cost and a.iterations == b.iterations


def receding_iterations(steps=100):
    path = build_spline([[0, 0, 1], [5, 1, 1], [10, -1, 1.2], [15, 0, 1], [30, 0, 1]])
    x = cruise_state([0, 0.5, 1], 0.0, 1.0, MODEL)
    nu, warm = 0.0, None
    warm_it, cold_it = [], []
    for _ in range(steps):
        nu = closest_point(path, x[:3], nu)[0]
        s = mpcc_solve(x, nu, path, WEIGHTS, MODEL, warm=warm)
        c = mpcc_solve(x, nu, path, WEIGHTS, MODEL)
        warm_it.append(s.iterations)
        cold_it.append(c.iterations)
        warm = s
        x = step_kernel(x, s.first_input, MODEL.packed)
    return np.array(warm_it), np.array(cold_it)


@pytest.fixture(scope="module")
def iterations():
    return receding_iterations()


def test_warm_start_never_needs_more_iterations(iterations):
    warm, cold = iterations
    assert np.median(warm) <= np.median(cold)
    assert np.mean(warm <= cold) >= 0.9


@pytest.mark.xfail(strict=True, reason="cold start from held attitude already converges in ~3 "
                                       "Gauss-Newton iterations; warm median is 2")
def test_warm_start_needs_a_third_of_cold_iterations(iterations):
    warm, cold = iterations
    assert np.median(warm) <= np.median(cold) / 3
