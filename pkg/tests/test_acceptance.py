"""Acceptance suite: one PASS/FAIL line per criterion.

Experiments run at the scale in configs/acceptance.yaml with a fresh policy
cache per session, so the reported wall times are cold-cache times.  Set
MPCCIL_SKIP_ACCEPTANCE=1 to skip the long experiment criteria (4-8, 10).
"""
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_path_points
from oracles import NaturalSplineOracle, grid_search, mpcc_cost_batch
from test_geometry import brute_force
from test_policy import fd_check, random_policy
from test_solver import MODEL, analytic_gradient, fd_gradient, grid_instance, problem
from mpccil import config as C
from mpccil import experiments as E
from mpccil import solver as S
from mpccil.controllers import mpcc_solve
from mpccil.geometry import build_spline, closest_point, contouring_lag_approx
from mpccil.imitation import ExampleSet, return_scenario
from mpccil.world import COLLISION_MARGIN

ROOT = Path(__file__).resolve().parents[1]
ACCEPTANCE = ROOT / "configs" / "acceptance.yaml"
SMOKE = ROOT / "configs" / "smoke.yaml"

long_run = pytest.mark.skipif(os.environ.get("MPCCIL_SKIP_ACCEPTANCE") == "1",
                              reason="MPCCIL_SKIP_ACCEPTANCE=1")


@pytest.fixture
def verdict(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok
    return emit


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("policy-cache"))


def acceptance_cfg(experiment, cache_dir):
    return C.load_config(ACCEPTANCE, experiment, {"cache_dir": cache_dir})


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


# ------------------------------------------------------------------ 1-3: numerical suites

def test_1_solver_matches_grid_oracle(verdict):
    t0 = time.perf_counter()
    gaps = []
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        N, levels = (3, 3) if seed % 2 else (2, 5)
        pts, path, nu0, x0, w = grid_instance(rng, N)
        oracle = NaturalSplineOracle(pts)
        sol = mpcc_solve(x0, nu0, path, w, MODEL)
        W = np.column_stack([sol.inputs[:, :3], sol.nu_dot])[None]
        own, _ = mpcc_cost_batch(x0, nu0, W, oracle, w.K_c, w.K_l, w.beta, np.array(w.R), w.nu_dot_reg, MODEL)
        best, _ = grid_search(x0, nu0, N, oracle, w.K_c, w.K_l, w.beta, np.array(w.R), w.nu_dot_reg, MODEL,
                              levels, w.nu_dot_max, path.total_length)
        # the solver's reported cost must be the oracle's cost for the same inputs
        assert abs(sol.cost - own[0]) <= 1e-9 * max(1.0, abs(own[0]))
        gaps.append(sol.cost - best)
    elapsed = time.perf_counter() - t0
    ok = max(gaps) <= 1e-4 and elapsed < 60
    assert verdict(1, "solver vs grid oracle", ok,
                   f"20 instances, worst cost - grid = {max(gaps):.3g} (<= 1e-4), {elapsed:.1f} s (< 60 s)")


def test_2_gradient_suite(verdict):
    rng = np.random.default_rng(2)
    mlp, cost = 0.0, 0.0
    for _ in range(200):
        r = np.random.default_rng(rng.integers(2 ** 31))
        p = random_policy(r, n_in=int(r.integers(2, 6)), hidden=(int(r.integers(2, 6)), int(r.integers(2, 6))))
        b = int(r.integers(1, 10))
        mlp = max(mlp, fd_check(p, r.normal(0, 1, (b, p.n_inputs)), r.normal(0, 1, (b, 3))))
    worst_jac = 0.0
    for i in range(200):
        P = problem(rng, n=int(rng.integers(2, 5)), nref=i % 3, with_obstacle=i % 4 == 0)
        g, _ = analytic_gradient(P)
        fd = fd_gradient(P)
        cost = max(cost, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-6))
        k = int(rng.integers(0, P["n"] + 1))
        x, nu = P["x0"] + rng.normal(0, 0.2, 8), P["nu0"] + rng.uniform(0, 1)
        args = (k, P["path"].knots, P["path"].coefs, P["wts"], P["xrefs"], P["qrefs"], P["obs"])
        _, J = S.stage_residual(x, nu, *args, True)
        z, Jf = np.concatenate([x, [nu]]), np.zeros_like(J)
        for j in range(9):
            zp, zm = z.copy(), z.copy()
            zp[j] += 1e-6
            zm[j] -= 1e-6
            Jf[:, j] = (S.stage_residual(zp[:8], zp[8], *args, False)[0]
                        - S.stage_residual(zm[:8], zm[8], *args, False)[0]) / 2e-6
        worst_jac = max(worst_jac, np.linalg.norm(J - Jf) / max(np.linalg.norm(Jf), 1e-6))
    ok = max(mlp, cost, worst_jac) < 1e-5
    assert verdict(2, "gradient suite", ok,
                   f"200 cases each, rel err MLP {mlp:.2g}, MPCC cost {cost:.2g}, constraint Jacobian "
                   f"{worst_jac:.2g} (< 1e-5)")


def test_3_geometry_suite(verdict):
    rng = np.random.default_rng(3)
    worst_dist, worst_nu, straight = 0.0, 0.0, 0.0
    for i in range(1000):
        if i % 50 == 0:
            pts = random_path_points(rng, n=int(rng.integers(3, 7)))
            path, ref = build_spline(pts), NaturalSplineOracle(pts)
        p = ref(rng.uniform(0, path.total_length))[0] + rng.normal(0, 0.4, 3)
        nu, err = closest_point(path, p)
        nu_b, err_b = brute_force(ref, p)
        worst_dist = max(worst_dist, err - err_b)
        if err_b - err > 1e-9:
            worst_nu = max(worst_nu, abs(nu - nu_b))
    for _ in range(1000):
        h = rng.uniform(-math.pi, math.pi)
        d = np.array([math.cos(h), math.sin(h), 0.0])
        line = build_spline([[0, 0, 0], (10 * d).tolist()])
        p = rng.uniform(-5, 5, 3)
        exact = np.linalg.norm(p - np.dot(p, d) * d)
        straight = max(straight, abs(contouring_lag_approx(line, p, rng.uniform(0, 10)).contour - exact))
    # brute force grid is 1e-4; a projection within one grid step counts as a match
    ok = worst_dist <= 1e-12 and worst_nu <= 2e-4 and straight <= 1e-9
    assert verdict(3, "geometry suite", ok,
                   f"1000 pairs, distance excess over brute force {worst_dist:.2g}, nu gap {worst_nu:.2g} "
                   f"(<= 2e-4); straight contour error {straight:.2g} (<= 1e-9)")


# ------------------------------------------------------------------ 4-8, 10: experiments

@long_run
def test_4_runtime_trend(verdict, cache_dir):
    cfg = acceptance_cfg("runtime", cache_dir)
    rows, elapsed = timed(E.exp_runtime, cfg, cfg["seed"])
    solve = [r["solve_time_mean"] for r in rows]
    pol = [r["policy_time"] for r in rows]
    increasing = all(b > a for a, b in zip(solve, solve[1:]))
    flat = max(pol) <= 1.2 * min(pol)
    below = max(pol) < solve[-1]
    ok = increasing and flat and below and elapsed < 300
    assert verdict(4, "runtime trend", ok,
                   "MPCC ms " + "/".join(f"{1e3 * s:.2f}" for s in solve)
                   + f" for N={[r['horizon'] for r in rows]} (increasing={increasing}); policy us "
                   + "/".join(f"{1e6 * p:.1f}" for p in pol)
                   + f" (spread {max(pol) / min(pol):.2f} <= 1.2, below N=30: {below}); {elapsed:.0f} s (< 300 s)")


@pytest.fixture(scope="module")
def exploration(cache_dir):
    cfg = acceptance_cfg("exploration", cache_dir)
    rows, elapsed = timed(E.exp_exploration_sweep, cfg, cfg["seed"])
    return cfg, rows, elapsed


@long_run
def test_5_exploration_sweep(verdict, exploration):
    cfg, rows, elapsed = exploration
    by = {(r["setting"], r["run_seed"]): r for r in rows}
    seeds = sorted({r["run_seed"] for r in rows})
    unsafe_coll = sum(by[("unsafe", s)]["train_collisions"] for s in seeds)
    k10_coll = sum(by[("K_c=10", s)]["train_collisions"] + by[("K_c=10", s)]["test_collisions"] for s in seeds)
    order = sum(by[("K_c=0.1", s)]["train_error"] > by[("K_c=10", s)]["train_error"]
                > by[("K_c=25", s)]["train_error"] for s in seeds)
    best = sum(by[("K_c=10", s)]["test_error"] < min(by[("K_c=0.1", s)]["test_error"],
                                                    by[("K_c=25", s)]["test_error"]) for s in seeds)
    need = math.ceil(2 * len(seeds) / 3)
    parts = {"unsafe train collisions >= 1": unsafe_coll >= 1, "K_c=10 collisions == 0": k10_coll == 0,
             f"train order 0.1>10>25 in {order}/{len(seeds)}": order >= need,
             f"K_c=10 lowest test error in {best}/{len(seeds)}": best >= need, "runtime < 30 min": elapsed < 1800}
    ok = all(parts.values())
    assert verdict(5, "exploration sweep", ok,
                   f"unsafe collisions {unsafe_coll}, K_c=10 collisions {k10_coll}; "
                   + "; ".join(f"{k}: {'ok' if v else 'no'}" for k, v in parts.items()) + f"; {elapsed:.0f} s")


@long_run
def test_6_robustness(verdict, cache_dir):
    cfg = acceptance_cfg("robustness", cache_dir)
    rows, elapsed = timed(E.exp_robustness, cfg, cfg["seed"])
    err = {(r["alpha"], r["supervisor"]): r["rescaled_error"] for r in rows}
    alphas = cfg["experiment"]["alphas"]
    wins = sum(err[(a, "mpcc")] <= err[(a, "mpc")] for a in alphas)
    nominal = cfg["experiment"]["plant_alpha"]
    both = err[(nominal, "mpcc")] < 10 and err[(nominal, "mpc")] < 10
    ok = wins >= 4 and both and elapsed < 1800
    table = ", ".join(f"{a}: {err[(a, 'mpcc')]:.2f}/{err[(a, 'mpc')]:.2f}" for a in alphas)
    assert verdict(6, "robustness", ok,
                   f"MPCC <= MPC for {wins}/6 alphas (need 4); at {nominal} both < 10: {both}; "
                   f"rescale {cfg['experiment']['rescale']}; mpcc/mpc error {table}; {elapsed:.0f} s")


@pytest.fixture(scope="module")
def supervisor(cache_dir):
    cfg = acceptance_cfg("supervisor", cache_dir)
    rows, elapsed = timed(E.exp_supervisor_compare, cfg, cfg["seed"])
    return cfg, rows, elapsed


@long_run
def test_7_supervisor_comparison(verdict, supervisor):
    cfg, rows, elapsed = supervisor
    pairs = {}
    for r in rows:
        pairs.setdefault(r["run_seed"], {})[r["supervisor"]] = r
    votes = sum(p["mpcc"]["max_z_deviation"] < p["mpc"]["max_z_deviation"]
                and p["mpcc"]["flight_distance"] > p["mpc"]["flight_distance"] for p in pairs.values())

    def mean(sup, key):
        return float(np.mean([p[sup][key] for p in pairs.values()]))

    ok = votes > len(pairs) / 2
    assert verdict(7, "supervisor comparison", ok,
                   f"MPCC better on both metrics in {votes}/{len(pairs)} seeds; mean max z dev "
                   f"{mean('mpcc', 'max_z_deviation'):.3f} vs {mean('mpc', 'max_z_deviation'):.3f} m, mean distance "
                   f"{mean('mpcc', 'flight_distance'):.1f} vs {mean('mpc', 'flight_distance'):.1f} m "
                   f"(reference 0.077 vs 0.847 m, 183.3 vs 41.67 m); {elapsed:.0f} s")


@pytest.fixture(scope="module")
def density(cache_dir):
    cfg = acceptance_cfg("density", cache_dir)
    rows, elapsed = timed(E.exp_density, cfg, cfg["seed"])
    return cfg, rows, elapsed


@long_run
def test_8_density_comparison(verdict, density):
    cfg, rows, _ = density
    dist = {((r["spacing_mean"], r["spacing_spread"]), r["controller"]): r["mean_distance"] for r in rows}
    spacings = [tuple(s) for s in cfg["experiment"]["spacings"] if s[0] > 0]
    densest = min(spacings)
    vs_apf = dist[(densest, "policy")] >= dist[(densest, "apf")]
    drop = dist[((2.0, 1.0), "policy")] < 0.5 * dist[((3.0, 1.5), "policy")]
    ok = vs_apf and drop
    assert verdict(8, "density comparison", ok,
                   f"at {densest[0]}+-{densest[1]} policy {dist[(densest, 'policy')]:.1f} m vs APF "
                   f"{dist[(densest, 'apf')]:.1f} m (>=: {vs_apf}); policy 2+-1 {dist[((2.0, 1.0), 'policy')]:.1f} m "
                   f"vs 3+-1.5 {dist[((3.0, 1.5), 'policy')]:.1f} m (< 50%: {drop})")


def _strip_timing(path):
    rows = C.read_report(path)
    return [{k: v for k, v in r.items() if k not in C.TIMING_COLUMNS} for r in rows]


def test_9_determinism(verdict, tmp_path):
    mismatched = []
    for name, fn in E.EXPERIMENTS.items():
        cfg = C.load_config(SMOKE, name)
        outs = []
        for rep in ("a", "b"):
            fn(cfg, 0, out=str(tmp_path / rep))
            outs.append(_strip_timing(tmp_path / rep / f"{name}.csv"))
        if outs[0] != outs[1]:
            mismatched.append(name)
    ok = not mismatched
    assert verdict(9, "determinism", ok,
                   f"{len(E.EXPERIMENTS)} experiments re-run at smoke scale, non-timing columns identical; "
                   f"mismatched: {mismatched or 'none'}")


@long_run
def test_10_safe_exploration(verdict, cache_dir, exploration, supervisor, density):
    # every policy trained with the default safe settings during the acceptance runs
    dists = []
    cfg, rows, _ = exploration
    dists += [r["onpolicy_min_distance"] for r in rows if r["setting"] == "K_c=10"]
    cfg, rows, _ = supervisor
    dists += [E.train_policy(cfg, r["run_seed"], r["supervisor"])[1]["onpolicy_min_distance"] for r in rows]
    cfg, _, _ = density
    dists.append(E.train_policy(cfg, cfg["seed"])[1]["onpolicy_min_distance"])
    rcfg = acceptance_cfg("robustness", cache_dir)
    ex = rcfg["experiment"]
    for a in ex["alphas"]:
        model = C.model_from(rcfg, "model", alpha=a)
        train = ExampleSet([return_scenario(o, rcfg["speed"], model) for o in ex["train_offsets"]])
        for s in ex["supervisors"]:
            for k in range(ex["policies"]):
                summary = E.train_policy(rcfg, rcfg["seed"] * 100 + k, s, examples=train, sup_alpha=a,
                                         learn_changes={"obs_dim": ex["obs_dim"]}, cache_tag="robust")[1]
                dists.append(summary["onpolicy_min_distance"])
    ok = min(dists) > COLLISION_MARGIN
    assert verdict(10, "safe exploration", ok,
                   f"{len(dists)} training runs, min on-policy obstacle distance {min(dists):.3f} m "
                   f"(> margin {COLLISION_MARGIN})")
