"""Obstacle courses, the flight harness and the reproduced experiments."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import config as C
from .controllers import (Avoidance, ApfParams, MpccSolver, MpccWeights, TimedReference, apf_step,
                          mpc_track_solve, mpcc_solve)
from .dynamics import ModelParams, cruise_state, step_kernel
from .errors import ConfigurationError, MpccilError, PolicyOutputError, TrainingDivergedError
from .geometry import SplinePath, build_spline, closest_point
from .imitation import (ExampleScenario, ExampleSet, MpccSupervisor, collect_off_policy,
                        learn, make_example_set, return_scenario, straight_guidance)
from .policy import MlpPolicy, init_policy, load_policy, save_policy
from .world import (COLLISION_MARGIN, Obstacle, World, advance_obstacles, obstacle_distance, observe,
                    setpoint, yaw_pd)

log = logging.getLogger(__name__)

END_TOLERANCE = 0.5
TEST_RETURN_OFFSETS = [(1.2, 0.2), (-1.2, -0.2), (0.8, 0.0), (-1.3, 0.3), (1.4, -0.3), (-0.9, 0.1)]


# --------------------------------------------------------------------------- courses

def gen_course(length, spacing_mean, spacing_spread, seed, curvature=0.0, lateral=0.5, radius=0.2,
               speed=1.3, altitude=1.0, clear_start=3.0):
    """Guidance of ``length`` m with cylinders at gaps ~ U(mean - spread, mean + spread).

    ``spacing_mean = 0`` gives an obstacle-free course.  ``curvature`` is
    the amplitude (m) of a gentle sinusoidal bend with a 50 m wavelength.
    """
    if not length > 0:
        raise ConfigurationError("course length must be positive")
    if spacing_mean != 0 and not spacing_mean > spacing_spread >= 0:
        raise ConfigurationError("need spacing_mean > spacing_spread >= 0")
    n_pts = max(2, int(math.ceil(length / 2.0)) + 1)
    xs = np.linspace(0.0, length, n_pts)
    ys = curvature * np.sin(2 * math.pi * xs / 50.0)
    guidance = build_spline(np.column_stack([xs, ys, np.full(n_pts, altitude)]))
    obstacles = []
    if spacing_mean > 0:
        rng = np.random.default_rng(seed)
        s = clear_start
        while True:
            s += rng.uniform(spacing_mean - spacing_spread, spacing_mean + spacing_spread)
            if s > guidance.total_length:
                break
            fr = guidance.frame(s)
            nrm = np.array([-fr.tangent[1], fr.tangent[0]])
            nrm /= np.linalg.norm(nrm)
            off = rng.uniform(-lateral, lateral)
            c = fr.point[:2] + off * nrm
            obstacles.append(Obstacle.cylinder(c[0], c[1], radius))
    return World(guidance, tuple(obstacles), speed)


# --------------------------------------------------------------------------- controllers

class PolicyController:
    kind = "policy"

    def __init__(self, policy: MlpPolicy):
        self.policy = policy

    def reset(self, world, x0):
        pass

    def act(self, x, t, world, vz):
        a = self.policy.act(observe(x, world, t, vz).vector)
        return np.array([a[0], a[1], a[2], 0.0])


class MpccController:
    kind = "mpcc"

    def __init__(self, weights: MpccWeights, model: ModelParams, path: SplinePath | None = None,
                 avoid_weight=0.0, onset=1.5):
        self.weights = weights
        self.model = model
        self.path = path
        self.avoid_weight = avoid_weight
        self.onset = onset

    def reset(self, world, x0):
        path = self.path or world.guidance
        avoid = Avoidance(world.obstacles, self.onset, self.avoid_weight) if self.avoid_weight > 0 else None
        self.solver = MpccSolver(path, self.weights, self.model, avoid)
        self.nu = closest_point(path, x0[:3])[0]

    def act(self, x, t, world, vz):
        self.nu = closest_point(self.solver.path, x[:3], self.nu)[0]
        return self.solver.solve(x, self.nu).first_input


class MpcController:
    kind = "mpc"

    def __init__(self, reference: TimedReference, weights: MpccWeights, model: ModelParams):
        self.reference = reference
        self.weights = weights
        self.model = model

    def reset(self, world, x0):
        self.last = None

    def act(self, x, t, world, vz):
        ref = self.reference.window(t, self.weights.N, self.model.Ts)
        self.last = mpc_track_solve(x, ref, self.weights, self.model, warm=self.last)
        return self.last.first_input


class ApfController:
    kind = "apf"

    def __init__(self, params: ApfParams, model: ModelParams):
        self.params = params
        self.model = model

    def reset(self, world, x0):
        pass

    def act(self, x, t, world, vz):
        return apf_step(x, world, t, self.params, self.model)


# --------------------------------------------------------------------------- harness

@dataclass
class FlightMetrics:
    distance: float
    max_z_deviation: float
    mean_speed: float
    imitation_error: float
    collision: bool
    completed: bool
    steps: int
    min_obstacle_distance: float
    nonfinite: bool = False
    aborted: str = ""
    controller_time: float = 0.0
    harness_time: float = 0.0

    def __post_init__(self):
        if self.distance < 0:
            raise ConfigurationError("flight distance must be non-negative")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    progress: np.ndarray
    obstacle_distance: np.ndarray

    @property
    def positions(self):
        return self.states[:, :3]

    def to_csv(self, path, metrics: FlightMetrics | None = None):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "px", "py", "pz", "vx", "vy", "roll", "pitch", "yaw", "u_vz", "u_roll",
                         "u_pitch", "u_yaw_rate", "nu", "obstacle_distance"])
            n = len(self.times)
            for k in range(n):
                u = self.inputs[k] if k < len(self.inputs) else np.full(4, np.nan)
                wr.writerow([repr(float(v)) for v in (self.times[k], *self.states[k], *u, self.progress[k],
                                                      self.obstacle_distance[k])])
            if metrics is not None:
                fh.write("# " + json.dumps(asdict(metrics)) + "\n")


def segment_distances(points, polyline):
    """Distance from each point to a polyline (vectorized point-to-segment)."""
    P = np.asarray(points, dtype=float)
    Q = np.asarray(polyline, dtype=float)
    if len(Q) == 1:
        return np.linalg.norm(P - Q[0], axis=1)
    A = Q[:-1]
    D = Q[1:] - A
    dd = np.einsum("ij,ij->i", D, D)
    dd = np.where(dd > 0, dd, 1.0)
    rel = P[:, None, :] - A[None, :, :]
    s = np.clip(np.einsum("pij,ij->pi", rel, D) / dd, 0.0, 1.0)
    close = A[None] + s[..., None] * D[None]
    return np.min(np.linalg.norm(P[:, None, :] - close, axis=2), axis=1)


def imitation_error(positions, reference, cap=50.0):
    """Sum of squared distances to the reference trajectory, capped."""
    d = segment_distances(positions, reference)
    return float(min(np.sum(d * d), cap))


def run_episode(controller, world: World, plant: ModelParams, x0=None, max_steps=None, reference=None,
                cap=50.0, margin=COLLISION_MARGIN, stop_at_end=True, yaw_gains=(2.0, 0.0)):
    """Fly ``controller`` in ``world`` on ``plant`` until collision, completion or the step cap.

    Returns ``(FlightMetrics, Trajectory)``.  When ``reference`` (positions)
    is given the capped imitation error against it is reported; a collision
    counts as the cap.
    """
    g = world.guidance
    L = g.total_length
    Ts = plant.Ts
    if x0 is None:
        sp = setpoint(world, 0.0)
        x0 = cruise_state(sp.point, sp.heading, world.setpoint_speed, plant)
    x = np.array(x0, dtype=float)
    if max_steps is None:
        max_steps = int(math.ceil(1.5 * L / (world.setpoint_speed * Ts)))
    prm = plant.packed
    lim = plant.input_limits
    controller.reset(world, x)
    nu = closest_point(g, x[:3])[0]
    times, states, inputs, prog, odist = [0.0], [x.copy()], [], [nu], [obstacle_distance(x, world)]
    best_nu, max_z = nu, abs(x[2] - g.position(nu)[2])
    collided = completed = nonfinite = False
    aborted = ""
    t_ctrl = t_harness = 0.0
    vz = 0.0
    for k in range(max_steps):
        t = k * Ts
        h0 = time.perf_counter()
        heading = setpoint(world, t).heading
        c0 = time.perf_counter()
        try:
            u = controller.act(x, t, world, vz)
        except PolicyOutputError as exc:
            nonfinite, aborted = True, str(exc)
            break
        except MpccilError as exc:
            aborted = f"{type(exc).__name__}: {exc}"
            break
        c1 = time.perf_counter()
        if not np.all(np.isfinite(u)):
            nonfinite, aborted = True, "non-finite control"
            break
        u = np.array(u, dtype=float)
        u[3] = yaw_pd(x, heading, yaw_gains, limit=lim.yaw_rate_max)
        u = lim.clip(u)
        vz = u[0]
        x = step_kernel(x, u, prm)
        world = advance_obstacles(world, Ts)
        nu = closest_point(g, x[:3], nu)[0]
        best_nu = max(best_nu, nu)
        max_z = max(max_z, abs(x[2] - g.position(nu)[2]))
        d = obstacle_distance(x, world)
        times.append(t + Ts)
        states.append(x.copy())
        inputs.append(u)
        prog.append(nu)
        odist.append(d)
        t_ctrl += c1 - c0
        t_harness += (time.perf_counter() - h0) - (c1 - c0)
        if not np.all(np.isfinite(x)):
            nonfinite, aborted = True, "non-finite state"
            break
        if d < margin:
            collided = True
            break
        if stop_at_end and nu >= L - END_TOLERANCE:
            completed = True
            break
    traj = Trajectory(np.array(times), np.array(states), np.array(inputs).reshape(-1, 4), np.array(prog),
                      np.array(odist))
    P = traj.positions
    travelled = float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))
    elapsed = times[-1]
    err = math.nan
    if reference is not None:
        err = cap if (collided or nonfinite) else imitation_error(P, reference, cap)
    distance = L if completed else float(min(max(best_nu, 0.0), L))
    n = len(inputs)
    m = FlightMetrics(distance, float(max_z), travelled / elapsed if elapsed > 0 else 0.0, err, collided,
                      completed, n, float(np.min(odist)), nonfinite, aborted,
                      t_ctrl / max(n, 1), t_harness / max(n, 1))
    return m, traj


# --------------------------------------------------------------------------- training helpers

def _examples_from(cfg, seed, model):
    ex = cfg["examples"]
    return make_example_set(seed, model, ex["speed"], ex["n_return"], ex["n_avoid"],
                            avoid_lateral=ex.get("avoid_lateral", (0.1, 0.4)))


def _cache_path(cfg, key):
    d = cfg.get("cache_dir")
    if not d:
        return None
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, f"policy-{key}")


def train_policy(cfg, seed, supervisor="mpcc", examples=None, sup_alpha=None, learn_changes=None,
                 cache_tag=None):
    """Run the learning loop; returns ``(policy, summary dict, report, dataset)``.

    With ``cache_dir`` set, trained policies and their summaries are memoized
    on disk under a hash of everything that determines them.
    """
    learn_changes = learn_changes or {}
    key_blob = {k: cfg[k] for k in ("model", "plant", "limits", "weights", "train", "learn", "examples", "speed")}
    key = C.config_hash({"cfg": key_blob, "seed": seed, "sup": supervisor, "alpha": sup_alpha,
                         "changes": learn_changes, "tag": cache_tag})
    cp = _cache_path(cfg, key)
    if cp and os.path.exists(cp + ".npz") and os.path.exists(cp + ".json"):
        with open(cp + ".json") as fh:
            return load_policy(cp + ".npz"), json.load(fh), None, None
    plant = C.model_from(cfg, "plant")
    sup_model = C.model_from(cfg, "model", alpha=sup_alpha)
    weights = C.weights_from(cfg)
    lc = C.learn_config_from(cfg, seed, supervisor=supervisor, **learn_changes)
    if examples is None:
        examples = _examples_from(cfg, seed, sup_model)
    t0 = time.perf_counter()
    diverged = False
    try:
        policy, report, data = learn(examples, plant, sup_model, weights, lc)
    except TrainingDivergedError as exc:
        log.warning("training diverged (seed %d): %s", seed, exc)
        policy, report, data, diverged = init_policy(seed, n_in=lc.obs_dim), None, None, True
    summary = {
        "seed": seed, "supervisor": supervisor, "diverged": diverged,
        "train_collisions": report.train_collisions if report else 0,
        "onpolicy_min_distance": report.onpolicy_min_distance if report else math.inf,
        "train_error": report.train_error if report else math.nan,
        "final_loss": report.iterations[-1].loss if report else math.nan,
        "dataset_size": len(data) if data is not None else 0,
        "wall_time": time.perf_counter() - t0,
    }
    if cp:
        save_policy(policy, cp + ".npz")
        with open(cp + ".json", "w") as fh:
            json.dump(summary, fh)
    return policy, summary, report, data


def resolve_policy(cfg, seed):
    if cfg.get("policy"):
        return load_policy(cfg["policy"])
    return train_policy(cfg, seed)[0]


def _map(fn, tasks, jobs):
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _ground_truth(scenario: ExampleScenario, model, weights, speed):
    sup = MpccSupervisor(scenario.path, weights, model)
    _shard, rec = collect_off_policy(scenario, model, sup, scenario.world(speed))
    return rec.positions


def held_out_error(policy, scenarios, plant, gt_model, weights, speed, cap=50.0):
    """Mean capped imitation error and collision count over held-out scenarios."""
    errs, coll = [], 0
    for sc in scenarios:
        gt = _ground_truth(sc, gt_model, weights, speed)
        m, _ = run_episode(PolicyController(policy), sc.world(speed), plant, x0=sc.start,
                           max_steps=len(gt) - 1, reference=gt, cap=cap, stop_at_end=False)
        errs.append(m.imitation_error)
        coll += int(m.collision)
    return float(np.mean(errs)), coll, errs


# --------------------------------------------------------------------------- experiments

def exp_runtime(cfg, seed, out=None, jobs=1):
    ex = cfg["experiment"]
    model = C.model_from(cfg)
    path = build_spline([[0, 0, 1], [3, 0, 1], [6, 1.5, 1], [9, 0, 1], [20, 0, 1]])
    policy = load_policy(cfg["policy"]) if cfg.get("policy") else init_policy(seed)
    world = World(path, (), cfg["speed"])
    rows, obs_sets = [], []
    for n in ex["horizons"]:
        w = C.weights_from(cfg, N=int(n))
        # one closed-loop pass fixes the state/warm-start history; timing re-solves it
        x = cruise_state(path.position(0.0), 0.0, cfg["speed"], model)
        nu, warm, hist = 0.0, None, []
        for _ in range(ex["steps"]):
            nu = closest_point(path, x[:3], nu)[0]
            sol = mpcc_solve(x, nu, path, w, model, warm=warm)
            hist.append((x.copy(), nu, warm))
            x = step_kernel(x, sol.first_input, model.packed)
            warm = sol
        times = []
        for _rep in range(ex["repeats"]):
            for xs, nus, ws in hist:
                t0 = time.perf_counter()
                mpcc_solve(xs, nus, path, w, model, warm=ws)
                times.append(time.perf_counter() - t0)
        obs_sets.append([observe(h[0], world, 0.0).vector for h in hist])
        rows.append({"horizon": int(n), "solve_time_mean": float(np.mean(times)),
                     "solve_time_max": float(np.max(times)), "solves": len(times)})
    # the forward pass does not depend on N; blocks are interleaved across horizons so
    # slow drifts in machine speed hit every horizon alike, and the best block is kept
    for o in obs_sets[0][:50]:
        policy.act(o)
    best = [math.inf] * len(rows)
    for _rep in range(7):
        for j, obs in enumerate(obs_sets):
            t0 = time.perf_counter()
            for i in range(ex["policy_calls"]):
                policy.act(obs[i % len(obs)])
            best[j] = min(best[j], (time.perf_counter() - t0) / ex["policy_calls"])
    for r, t in zip(rows, best):
        r["policy_time"] = float(t)
    return _finish(out, "runtime", rows, cfg, seed)


def _density_cell(task):
    cfg, seed, spacing, r, ctrl = task
    ex = cfg["experiment"]
    plant = C.model_from(cfg, "plant")
    world = gen_course(ex["course_length"], spacing[0], spacing[1], seed * 1000 + r, speed=cfg["speed"])
    if ctrl == "policy":
        controller = PolicyController(resolve_policy(cfg, seed))
    else:
        controller = ApfController(ApfParams(speed=cfg["speed"], **ex.get("apf", {})), plant)
    m, _ = run_episode(controller, world, plant)
    return {"spacing_mean": spacing[0], "spacing_spread": spacing[1], "rollout": r, "controller": ctrl,
            "obstacles": len(world.obstacles), "distance": m.distance, "collision": m.collision,
            "completed": m.completed, "controller_time": m.controller_time}


def exp_density(cfg, seed, out=None, jobs=1):
    ex = cfg["experiment"]
    if not cfg.get("policy"):
        resolve_policy(cfg, seed)  # train (and cache) once before fanning out
    tasks = [(cfg, seed, tuple(sp), r, c) for sp in ex["spacings"] for c in ("policy", "apf")
             for r in range(ex["rollouts"])]
    cells = _map(_density_cell, tasks, jobs)
    rows = []
    for sp in ex["spacings"]:
        for c in ("policy", "apf"):
            sel = [x for x in cells if (x["spacing_mean"], x["spacing_spread"]) == tuple(sp) and x["controller"] == c]
            rows.append({"spacing_mean": sp[0], "spacing_spread": sp[1], "controller": c,
                         "mean_distance": float(np.mean([x["distance"] for x in sel])),
                         "distances": ";".join(repr(float(x["distance"])) for x in sel),
                         "collisions": sum(int(x["collision"]) for x in sel),
                         "obstacles": ";".join(str(x["obstacles"]) for x in sel)})
    return _finish(out, "density", rows, cfg, seed)


def _robust_cell(task):
    cfg, seed, alpha, sup, k = task
    ex = cfg["experiment"]
    model = C.model_from(cfg, "model", alpha=alpha)
    plant = C.model_from(cfg, "plant", alpha=ex["plant_alpha"])
    speed = cfg["speed"]
    train = ExampleSet([return_scenario(o, speed, model) for o in ex["train_offsets"]])
    pseed = seed * 100 + k
    policy, summary, _r, _d = train_policy(cfg, pseed, sup, examples=train, sup_alpha=alpha,
                                           learn_changes={"obs_dim": ex["obs_dim"]}, cache_tag="robust")
    weights = C.weights_from(cfg)
    tests = [return_scenario(o, speed, plant) for o in ex["test_offsets"]]
    if summary["diverged"]:
        err = ex["cap"]
    else:
        err, _c, _e = held_out_error(policy, tests, plant, plant, weights, speed, ex["cap"])
    return {"alpha": alpha, "supervisor": sup, "policy": k, "error": err}


def exp_robustness(cfg, seed, out=None, jobs=1):
    ex = cfg["experiment"]
    tasks = [(cfg, seed, a, s, k) for a in ex["alphas"] for s in ex["supervisors"] for k in range(ex["policies"])]
    cells = _map(_robust_cell, tasks, jobs)
    rows = []
    for a in ex["alphas"]:
        for s in ex["supervisors"]:
            errs = [c["error"] for c in cells if c["alpha"] == a and c["supervisor"] == s]
            mean = float(np.mean(errs))
            rows.append({"alpha": a, "plant_alpha": ex["plant_alpha"], "supervisor": s, "error": mean,
                         "errors": ";".join(repr(float(e)) for e in errs), "cap": ex["cap"],
                         "rescale": ex["rescale"], "rescaled_error": min(mean * ex["rescale"], ex["cap"])})
    return _finish(out, "robustness", rows, cfg, seed)


def _supervisor_cell(task):
    cfg, seed, sup, s = task
    ex = cfg["experiment"]
    plant = C.model_from(cfg, "plant")
    pseed = seed * 100 + s
    policy, summary, _r, _d = train_policy(cfg, pseed, sup)
    world = gen_course(ex["course_length"], ex["spacing"][0], ex["spacing"][1], pseed, speed=cfg["speed"])
    m, _ = run_episode(PolicyController(policy), world, plant)
    return {"supervisor": sup, "run_seed": pseed, "max_z_deviation": m.max_z_deviation,
            "flight_distance": m.distance, "collision": m.collision, "train_collisions": summary["train_collisions"]}


def exp_supervisor_compare(cfg, seed, out=None, jobs=1):
    ex = cfg["experiment"]
    tasks = [(cfg, seed, sup, s) for s in range(ex["seeds"]) for sup in ex["supervisors"]]
    rows = _map(_supervisor_cell, tasks, jobs)
    return _finish(out, "supervisor", rows, cfg, seed)


def _exploration_cell(task):
    cfg, seed, label, changes = task
    ex = cfg["experiment"]
    plant = C.model_from(cfg, "plant")
    model = C.model_from(cfg)
    weights = C.weights_from(cfg)
    policy, summary, report, _d = train_policy(cfg, seed, "mpcc", learn_changes=changes)
    tests = make_example_set(10_000 + seed, plant, cfg["speed"], ex["test_returns"], ex["test_avoids"],
                             return_offsets=TEST_RETURN_OFFSETS[:ex["test_returns"]],
                             avoid_lateral=cfg["examples"]["avoid_lateral"])
    err, coll, errs = held_out_error(policy, tests.scenarios, plant, model, weights, cfg["speed"], ex["cap"])
    tc = summary["train_collisions"]
    phase = "train" if tc else ("test" if coll else "none")
    return {"setting": label, "run_seed": seed, "train_collisions": tc, "test_collisions": coll,
            "collision_phase": phase, "onpolicy_min_distance": summary["onpolicy_min_distance"],
            "train_error": summary["train_error"], "test_error": err,
            "test_errors": ";".join(repr(float(e)) for e in errs)}


def exp_exploration_sweep(cfg, seed, out=None, jobs=1):
    ex = cfg["experiment"]
    settings = []
    if ex.get("unsafe", True):
        settings.append(("unsafe", {"exploration": "unsafe"}))
    for kc in ex["K_c"]:
        settings.append((f"K_c={kc:g}", {"exploration": "safe", "onpolicy_K_c": float(kc)}))
    tasks = [(cfg, seed * 100 + s, lab, ch) for s in range(ex["seeds"]) for lab, ch in settings]
    rows = _map(_exploration_cell, tasks, jobs)
    return _finish(out, "exploration", rows, cfg, seed)


def _crossing_world(speed_obs, cfg, ahead=8.0, length=16.0):
    g = straight_guidance(length)
    # time the crossing so the obstacle reaches the guidance when the setpoint does
    t_meet = ahead / cfg["speed"]
    y0 = -speed_obs * t_meet
    ob = Obstacle.cylinder(ahead, y0, 0.2, velocity=(0.0, speed_obs))
    return World(g, (ob,), cfg["speed"])


def exp_generalization(cfg, seed, out=None, jobs=1):
    ex = cfg["experiment"]
    plant = C.model_from(cfg, "plant")
    policy = resolve_policy(cfg, seed)
    g = straight_guidance(16.0)
    rows = []

    def fly(world, probe, value):
        m, _ = run_episode(PolicyController(policy), world, plant)
        rows.append({"probe": probe, "value": value, "success": m.completed and not m.collision,
                     "collision": m.collision, "nonfinite": m.nonfinite, "distance": m.distance,
                     "min_obstacle_distance": m.min_obstacle_distance})

    for scale in ex["radius_scales"]:
        ob = Obstacle.cylinder(8.0, ex["lateral"], 0.2 * scale)
        fly(World(g, (ob,), cfg["speed"]), "radius_scale", scale)
    for kind in ex["kinds"]:
        ob = Obstacle.cylinder(8.0, ex["lateral"], 0.2) if kind == "cylinder" else \
            Obstacle.box((8.0, ex["lateral"], 1.0), (0.2, 0.2, 1.0))
        fly(World(g, (ob,), cfg["speed"]), "kind", kind)
    for v in ex["crossing_speeds"]:
        fly(_crossing_world(v, cfg), "crossing_speed", v)
    return _finish(out, "generalization", rows, cfg, seed)


def _finish(out, name, rows, cfg, seed):
    if out:
        C.write_report(os.path.join(out, f"{name}.csv"), rows, cfg, seed)
    return rows


EXPERIMENTS = {
    "runtime": exp_runtime,
    "density": exp_density,
    "robustness": exp_robustness,
    "supervisor": exp_supervisor_compare,
    "exploration": exp_exploration_sweep,
    "generalization": exp_generalization,
}
