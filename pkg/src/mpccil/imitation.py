"""Example paths, supervision data collection and the learning loop."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .controllers import (MpccWeights, TimedReference, mpc_track_solve, mpcc_solve,
                          offline_traj_opt, onpolicy_mpcc_solve, policy_rollout)
from .dynamics import NX, ModelParams, cruise_state, step_kernel
from .errors import InvalidInputError, MpccilError, NumericalError, SafetyViolationError
from .geometry import SplinePath, build_spline, closest_point
from .policy import MlpPolicy, TrainConfig, init_policy, train
from .world import (COLLISION_MARGIN, OBS_DIM, Obstacle, World, obstacle_distance, observe, setpoint,
                    yaw_pd)

log = logging.getLogger(__name__)

OFF_POLICY, ON_POLICY, AUGMENTED = 0, 1, 2
PROVENANCE = {OFF_POLICY: "off-policy", ON_POLICY: "on-policy", AUGMENTED: "augmented"}

# augmentation noise: position (m), planar velocity (m/s), roll/pitch/yaw (rad)
NOISE_STD = np.array([0.1, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05])


# --------------------------------------------------------------------------- paths


def _guidance_axes(guidance: SplinePath, nu):
    fr = guidance.frame(nu)
    t = fr.tangent
    lateral = np.array([-t[1], t[0], 0.0])
    lateral /= np.linalg.norm(lateral)
    return fr.point, t, lateral, fr.heading


def gen_return_path(start_offset, guidance: SplinePath, start_nu=0.0, tail=None) -> SplinePath:
    """Path from an offset start that joins the guidance at 45 degrees.

    ``start_offset`` is (lateral, vertical) in the guidance frame at
    ``start_nu``.  The merge point lies ``|offset|`` downstream, after which
    the path runs along the guidance until ``start_nu + |offset| + tail``.
    """
    off = np.asarray(start_offset, dtype=float)
    mag = float(np.linalg.norm(off))
    if mag <= 0:
        raise InvalidInputError("start offset must be non-zero")
    g0, _t, lat, _h = _guidance_axes(guidance, start_nu)
    start = g0 + off[0] * lat + np.array([0.0, 0.0, off[1]])
    merge_nu = start_nu + mag
    if tail is None:
        tail = guidance.total_length - merge_nu
    end_nu = min(merge_nu + tail, guidance.total_length)
    pts = [start]
    n_mid = max(1, int(round(mag / 0.5)))
    merge = guidance.position(merge_nu)
    for i in range(1, n_mid):
        pts.append(start + (merge - start) * i / n_mid)
    pts.append(merge)
    nu = merge_nu + 0.5
    while nu < end_nu - 0.25:
        pts.append(guidance.position(nu))
        nu += 1.0
    pts.append(guidance.position(end_nu))
    return build_spline(pts)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def gen_avoid_path(obstacle: Obstacle, guidance: SplinePath, seed=0, onset=3.0, clearance=1.5,
                   lead=1.0, tail=None, plateau=0.6, tie=0.05) -> SplinePath:
    """Detour that starts ``onset`` upstream and passes at ``clearance``.

    The detour goes to the side away from the obstacle's lateral offset;
    for obstacles within ``tie`` of the guidance the side alternates with
    the parity of ``seed``.
    """
    c = np.array([obstacle.center[0], obstacle.center[1], 0.0])
    nu_o, _ = closest_point(guidance, np.array([c[0], c[1], guidance.position(0.0)[2]]))
    g_o, _t, lat, _h = _guidance_axes(guidance, nu_o)
    e_o = float(np.dot(c[:2] - g_o[:2], lat[:2]))
    if abs(e_o) > 0.5 + 1e-9:
        raise InvalidInputError(f"obstacle lateral offset {e_o:.3f} m exceeds 0.5 m")
    if abs(e_o) < tie:
        side = 1.0 if seed % 2 == 0 else -1.0
    else:
        side = -math.copysign(1.0, e_o)
    amp = e_o + side * clearance
    start_nu = max(nu_o - onset - lead, 0.0)
    if tail is None:
        tail = guidance.total_length - nu_o
    end_nu = min(nu_o + tail, guidance.total_length)
    ramp = onset - plateau

    def lateral(nu):
        up = _smoothstep((nu - (nu_o - onset)) / ramp)
        down = _smoothstep(((nu_o + onset) - nu) / ramp)
        return amp * min(up, down)

    nus = list(np.arange(start_nu, nu_o - onset, 1.0))
    nus += list(np.linspace(nu_o - onset, nu_o + onset, 13))
    nus += list(np.arange(nu_o + onset + 1.0, end_nu, 1.0))
    if nus[-1] < end_nu - 0.25:
        nus.append(end_nu)
    pts = []
    for nu in nus:
        g, _t, lat_n, _h = _guidance_axes(guidance, nu)
        pts.append(g + lateral(nu) * lat_n)
    return build_spline(np.array(pts))


def straight_guidance(length, start=(0.0, 0.0, 1.0), heading=0.0):
    s = np.asarray(start, dtype=float)
    d = np.array([math.cos(heading), math.sin(heading), 0.0])
    return build_spline([s, s + d * length])


@dataclass
class ExampleScenario:
    path: SplinePath
    tag: str
    guidance: SplinePath
    obstacles: tuple = ()
    start: np.ndarray | None = None
    references: dict = field(default_factory=dict, repr=False)

    def world(self, speed, **kwargs):
        return World(self.guidance, self.obstacles, speed, **kwargs)


@dataclass
class ExampleSet:
    scenarios: list

    def __post_init__(self):
        if len(self.scenarios) < 3:
            raise InvalidInputError("an example set needs at least 3 paths")

    @property
    def paths(self):
        return [s.path for s in self.scenarios]

    def tagged(self, tag):
        return [i for i, s in enumerate(self.scenarios) if s.tag == tag]

    def __len__(self):
        return len(self.scenarios)

    def __getitem__(self, i):
        return self.scenarios[i]


def return_scenario(offset, speed, model, length=10.0, altitude=1.0):
    g = straight_guidance(length, (0.0, 0.0, altitude))
    path = gen_return_path(offset, g)
    x0 = cruise_state(path.position(0.0), 0.0, speed, model)
    return ExampleScenario(path, "return-to-guidance", g, (), x0)


def avoid_scenario(lateral, speed, model, seed=0, ahead=5.0, length=12.0, altitude=1.0, radius=0.2):
    g = straight_guidance(length, (0.0, 0.0, altitude))
    ob = Obstacle.cylinder(ahead, lateral, radius)
    path = gen_avoid_path(ob, g, seed=seed)
    x0 = cruise_state(path.position(0.0), 0.0, speed, model)
    return ExampleScenario(path, "obstacle-avoidance", g, (ob,), x0)


def make_example_set(seed, model, speed=1.3, n_return=4, n_avoid=8, return_offsets=None,
                     avoid_lateral=(0.1, 0.4)) -> ExampleSet:
    """Return-to-guidance and single-obstacle avoidance examples on straight guidance.

    Obstacle lateral offsets have magnitude ~ U(avoid_lateral) and a random
    sign; a scalar ``avoid_lateral`` means U(-a, a).
    """
    rng = np.random.default_rng(seed)
    if return_offsets is None:
        base = [(1.5, 0.0), (-1.5, 0.0), (1.0, 0.5), (-1.0, -0.5), (2.0, -0.3), (-2.0, 0.3)]
        return_offsets = [base[i % len(base)] for i in range(n_return)]
    out = [return_scenario(o, speed, model) for o in return_offsets]
    for i in range(n_avoid):
        if np.ndim(avoid_lateral) == 0:
            lat = float(rng.uniform(-avoid_lateral, avoid_lateral))
        else:
            lat = float(rng.uniform(*avoid_lateral)) * (1.0 if rng.random() < 0.5 else -1.0)
        out.append(avoid_scenario(lat, speed, model, seed=seed + i))
    return ExampleSet(out)


# --------------------------------------------------------------------------- dataset


class Dataset:
    """Append-only (observation, target) store with provenance."""

    def __init__(self, obs_dim=OBS_DIM):
        self.obs_dim = obs_dim
        self._obs = []
        self._tgt = []
        self._prov = []
        self._ep = []
        self._parent = []
        self._n = 0

    def __len__(self):
        return self._n

    def add(self, obs, target, provenance, episode, parent=-1):
        obs = np.array(obs, dtype=float)
        target = np.array(target, dtype=float)
        if obs.shape != (self.obs_dim,) or target.shape != (3,):
            raise InvalidInputError("bad sample shape")
        if not (np.all(np.isfinite(obs)) and np.all(np.isfinite(target))):
            raise InvalidInputError("non-finite sample")
        if provenance == AUGMENTED and not 0 <= parent < self._n:
            raise InvalidInputError("augmented samples must reference an existing parent")
        obs.setflags(write=False)
        target.setflags(write=False)
        self._obs.append(obs)
        self._tgt.append(target)
        self._prov.append(int(provenance))
        self._ep.append(int(episode))
        self._parent.append(int(parent))
        self._n += 1
        return self._n - 1

    def extend(self, other: "Dataset"):
        offset = self._n
        for i in range(len(other)):
            parent = other._parent[i]
            self.add(other._obs[i], other._tgt[i], other._prov[i], other._ep[i],
                     parent + offset if parent >= 0 else -1)
        return self

    @property
    def observations(self):
        return np.array(self._obs).reshape(self._n, self.obs_dim)

    @property
    def targets(self):
        return np.array(self._tgt).reshape(self._n, 3)

    @property
    def provenance(self):
        return np.array(self._prov, dtype=int)

    @property
    def episodes(self):
        return np.array(self._ep, dtype=int)

    @property
    def parents(self):
        return np.array(self._parent, dtype=int)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["provenance", "episode", "parent"] + [f"o{i}" for i in range(self.obs_dim)]
                        + ["u_vz", "u_roll", "u_pitch"])
            for i in range(self._n):
                wr.writerow([PROVENANCE[self._prov[i]], self._ep[i], self._parent[i]]
                            + [repr(float(v)) for v in self._obs[i]] + [repr(float(v)) for v in self._tgt[i]])

    @classmethod
    def from_csv(cls, path):
        inv = {v: k for k, v in PROVENANCE.items()}
        with open(path) as fh:
            rows = list(csv.reader(fh))
        obs_dim = len(rows[0]) - 6
        ds = cls(obs_dim)
        for r in rows[1:]:
            vals = [float(v) for v in r[3:]]
            ds.add(vals[:obs_dim], vals[obs_dim:], inv[r[0]], int(r[1]), int(r[2]))
        return ds

    def save(self, path):
        with open(path, "wb") as fh:
            np.savez(fh, version=1, obs=self.observations, targets=self.targets, provenance=self.provenance,
                     episodes=self.episodes, parents=self.parents)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            ds = cls(z["obs"].shape[1])
            for o, t, p, e, par in zip(z["obs"], z["targets"], z["provenance"], z["episodes"], z["parents"]):
                ds.add(o, t, int(p), int(e), int(par))
        return ds


# --------------------------------------------------------------------------- supervisors


class MpccSupervisor:
    """Time-free labels from the contouring controller on an example path."""

    kind = "mpcc"

    def __init__(self, path: SplinePath, weights: MpccWeights, model: ModelParams,
                 onpolicy_weights: MpccWeights | None = None):
        self.path = path
        self.weights = weights
        self.model = model
        self.onpolicy_weights = onpolicy_weights or weights
        self.end_margin = weights.N * weights.Ts * weights.nu_dot_max

    def progress(self, x, hint=None):
        return closest_point(self.path, x[:3], hint)[0]

    def label(self, x, t, heading, warm=None, hint=None):
        nu = self.progress(x, hint)
        yr = yaw_pd(x, heading, limit=self.model.input_limits.yaw_rate_max)
        sol = mpcc_solve(x, nu, self.path, self.weights, self.model, warm=warm, yaw_rate=yr)
        return sol, nu

    def explore(self, x, t, heading, policy, world, vz, warm=None, hint=None):
        nu = self.progress(x, hint)
        yr = yaw_pd(x, heading, limit=self.model.input_limits.yaw_rate_max)
        sol = onpolicy_mpcc_solve(x, nu, self.path, self.onpolicy_weights, self.model, policy, world, t, vz,
                                  warm=warm, yaw_rate=yr)
        return sol, nu

    def finished(self, x, t, nu):
        return nu >= self.path.total_length - self.end_margin

    def deviation(self, x, hint=None):
        return closest_point(self.path, x[:3], hint)


class MpcSupervisor:
    """Timed-reference tracking labels (the baseline supervisor)."""

    kind = "mpc"

    def __init__(self, reference: TimedReference, weights: MpccWeights, model: ModelParams, K_f=None,
                 path: SplinePath | None = None):
        self.reference = reference
        self.weights = weights
        self.model = model
        self.K_f = weights.K_f if K_f is None else K_f
        self.path = path or build_spline(_dedupe(reference.states[:, :3]))

    def label(self, x, t, heading, warm=None, hint=None):
        ref = self.reference.window(t, self.weights.N, self.model.Ts)
        yr = yaw_pd(x, heading, limit=self.model.input_limits.yaw_rate_max)
        return mpc_track_solve(x, ref, self.weights, self.model, warm=warm, yaw_rate=yr), t

    def explore(self, x, t, heading, policy, world, vz, warm=None, hint=None):
        ref = self.reference.window(t, self.weights.N, self.model.Ts)
        xpi = policy_rollout(x, policy, world, t, self.model, self.weights.N, vz)
        yr = yaw_pd(x, heading, limit=self.model.input_limits.yaw_rate_max)
        sol = mpc_track_solve(x, ref, self.weights, self.model, policy_states=xpi, K_f=self.K_f, warm=warm,
                              yaw_rate=yr)
        sol.policy_states = xpi
        return sol, t

    def finished(self, x, t, nu):
        return t >= self.reference.times[-1] - self.weights.N * self.model.Ts

    def deviation(self, x, hint=None):
        return closest_point(self.path, x[:3], hint)


def _dedupe(points):
    keep = [0]
    for i in range(1, len(points)):
        if np.linalg.norm(points[i] - points[keep[-1]]) > 1e-6:
            keep.append(i)
    return points[keep]


def timed_reference(scenario: ExampleScenario, weights, model, speed=1.3):
    """Offline-optimized timed reference for the tracking baseline (memoized per model)."""
    key = (model.alpha, model.Ts, model.c_d, speed, weights.N)
    if key not in scenario.references:
        scenario.references[key] = offline_traj_opt(scenario.path, scenario.obstacles, speed, model, weights,
                                                    start_state=scenario.start)
    return scenario.references[key]


def make_supervisor(kind, scenario: ExampleScenario, weights, model, onpolicy_weights=None, speed=1.3):
    if kind == "mpcc":
        return MpccSupervisor(scenario.path, weights, model, onpolicy_weights)
    if kind == "mpc":
        return MpcSupervisor(timed_reference(scenario, weights, model, speed), weights, model,
                             K_f=(onpolicy_weights or weights).K_f)
    raise InvalidInputError(f"unknown supervisor kind {kind!r}")


# --------------------------------------------------------------------------- episodes


@dataclass
class EpisodeRecord:
    """Everything recorded while flying one data-collection episode."""

    states: list = field(default_factory=list)
    times: list = field(default_factory=list)
    vz_prev: list = field(default_factory=list)
    progress: list = field(default_factory=list)
    headings: list = field(default_factory=list)
    applied: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    label_w: list = field(default_factory=list)
    deviations: list = field(default_factory=list)
    min_distance: float = math.inf
    collisions: int = 0
    converged: list = field(default_factory=list)
    failed: bool = False
    positions: np.ndarray | None = None

    @property
    def n(self):
        return len(self.states)

    @property
    def sum_sq_deviation(self):
        return float(np.sum(np.square(self.deviations)))

    @property
    def max_deviation(self):
        return float(np.max(self.deviations)) if self.deviations else 0.0


def _step_cap(path_len, speed, Ts):
    return int(math.ceil(1.5 * path_len / (speed * Ts)))


def _fly(supervisor, scenario: ExampleScenario, plant: ModelParams, world: World, mode, policy=None,
         episode=0, margin=COLLISION_MARGIN, strict=False):
    """Run one episode; ``mode`` is 'off', 'on' or 'unsafe'."""
    rec = EpisodeRecord()
    x = np.array(scenario.start, dtype=float)
    Ts = plant.Ts
    cap = _step_cap(supervisor.path.total_length, world.setpoint_speed, Ts)
    prm = plant.packed
    lim = plant.input_limits
    warm = None
    hint = None
    vz = 0.0
    t = 0.0
    for k in range(cap):
        sp = setpoint(world, t)
        rec.states.append(x.copy())
        rec.times.append(t)
        rec.vz_prev.append(vz)
        rec.headings.append(sp.heading)
        try:
            if mode == "off":
                sol, nu = supervisor.label(x, t, sp.heading, warm=warm, hint=hint)
                u = sol.first_input
                rec.labels.append(u[:3].copy())
                rec.label_w.append(sol.w.copy())
            elif mode == "on":
                sol, nu = supervisor.explore(x, t, sp.heading, policy, world, vz, warm=warm, hint=hint)
                u = sol.first_input
            else:
                sol = None
                nu = supervisor.deviation(x, hint)[0] if supervisor.kind == "mpcc" else t
                a = policy.act(observe(x, world, t, vz).vector)
                u = np.array([a[0], a[1], a[2], yaw_pd(x, sp.heading, limit=lim.yaw_rate_max)])
        except (NumericalError, MpccilError) as exc:
            log.warning("episode %d aborted at step %d: %s", episode, k, exc)
            rec.failed = True
            for lst in (rec.states, rec.times, rec.vz_prev, rec.headings):
                lst.pop()
            break
        if sol is not None:
            rec.converged.append(sol.converged)
            warm = sol
        hint = nu if supervisor.kind == "mpcc" else hint
        rec.progress.append(nu)
        dev = supervisor.deviation(x)[1]
        rec.deviations.append(dev)
        u = lim.clip(u)
        rec.applied.append(u.copy())
        vz = u[0]
        x = step_kernel(x, u, prm)
        t = (k + 1) * Ts
        if not np.all(np.isfinite(x)) or abs(x[5]) >= math.pi / 2 or abs(x[6]) >= math.pi / 2:
            rec.failed = True
            break
        d = obstacle_distance(x, world)
        rec.min_distance = min(rec.min_distance, d)
        if d < margin:
            rec.collisions += 1
            if strict:
                raise SafetyViolationError(f"collision in episode {episode} at step {k}", step=k, distance=d)
            break
        if supervisor.finished(x, t, nu) or setpoint(world, t).complete:
            break
    rec.positions = np.array([s[:3] for s in rec.states] + [x[:3]])
    return rec


def _shard_from(rec: EpisodeRecord, world, provenance, episode, obs_dim):
    shard = Dataset(obs_dim)
    for x, t, vz, lab in zip(rec.states, rec.times, rec.vz_prev, rec.labels):
        o = observe(x, world, t, vz).vector[:obs_dim]
        shard.add(o, lab, provenance, episode)
    return shard


def collect_off_policy(scenario: ExampleScenario, plant, supervisor, world: World, episode=0,
                       obs_dim=OBS_DIM):
    """Supervisor flies the example; every visited state is labelled with its first input."""
    rec = _fly(supervisor, scenario, plant, world, "off", episode=episode)
    return _shard_from(rec, world, OFF_POLICY, episode, obs_dim), rec


def relabel(rec: EpisodeRecord, supervisor):
    """Supervisor labels for recorded states, warm-started along the episode."""
    labels, sols = [], []
    warm = None
    hint = None
    for x, t, h in zip(rec.states, rec.times, rec.headings):
        sol, nu = supervisor.label(x, t, h, warm=warm, hint=hint)
        labels.append(sol.first_input[:3].copy())
        sols.append(sol)
        warm = sol
        hint = nu if supervisor.kind == "mpcc" else None
    return labels, sols


def collect_on_policy(scenario: ExampleScenario, plant, supervisor, policy: MlpPolicy, world: World,
                      episode=0, unsafe=False, obs_dim=OBS_DIM, strict=False):
    """Explore with the on-policy controller (or the raw policy), label afterwards."""
    rec = _fly(supervisor, scenario, plant, world, "unsafe" if unsafe else "on", policy=policy,
               episode=episode, strict=strict)
    labels, sols = relabel(rec, supervisor)
    rec.labels = labels
    rec.label_w = [s.w.copy() for s in sols]
    return _shard_from(rec, world, ON_POLICY, episode, obs_dim), rec


def augment(shard: Dataset, rec: EpisodeRecord, supervisor, world: World, rng, noise_std=NOISE_STD, k=3,
            obs_dim=OBS_DIM):
    """Add ``k`` noisy copies of every recorded state with recomputed labels.

    Returns ``(dataset, dropped)`` where ``dataset`` holds the shard followed
    by its augmented samples.
    """
    if k < 0:
        raise InvalidInputError("k must be non-negative")
    out = Dataset(obs_dim)
    out.extend(shard)
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float), (NX,))
    dropped = 0
    ep = int(shard.episodes[0]) if len(shard) else 0
    for i, (x, t, vz, h) in enumerate(zip(rec.states, rec.times, rec.vz_prev, rec.headings)):
        for _ in range(k):
            xn = x + rng.normal(0.0, 1.0, NX) * noise_std
            xn[5:7] = np.clip(xn[5:7], -1.2, 1.2)
            try:
                sol, _nu = supervisor.label(xn, t, h, warm=rec.label_w[i] if i < len(rec.label_w) else None)
            except MpccilError:
                dropped += 1
                continue
            u = sol.first_input
            if not np.all(np.isfinite(u)):
                dropped += 1
                continue
            o = observe(xn, world, t, vz).vector[:obs_dim]
            out.add(o, u[:3], AUGMENTED, ep, parent=i)
    return out, dropped


# --------------------------------------------------------------------------- learning loop


@dataclass(frozen=True)
class LearnConfig:
    seed: int = 0
    supervisor: str = "mpcc"
    exploration: str = "safe"          # 'safe' (on-policy MPCC) or 'unsafe' (raw policy)
    onpolicy_K_c: float = 10.0
    K_f: float = 10.0
    n_augment: int = 3
    noise_std: tuple = tuple(NOISE_STD)
    speed: float = 1.3
    obs_dim: int = OBS_DIM
    train: TrainConfig = TrainConfig()
    init_epochs: int | None = None


@dataclass
class IterationReport:
    iteration: int
    mode: str
    scenario: int
    tag: str
    samples: int
    dataset_size: int
    loss: float
    sum_sq_deviation: float
    max_deviation: float
    collisions: int
    min_distance: float
    dropped: int


@dataclass
class LearnReport:
    seed: int
    iterations: list = field(default_factory=list)
    episodes: list = field(default_factory=list)

    @property
    def train_collisions(self):
        return sum(r.collisions for r in self.iterations if r.mode != "off")

    @property
    def onpolicy_min_distance(self):
        d = [r.min_distance for r in self.iterations if r.mode != "off"]
        return min(d) if d else math.inf

    @property
    def train_error(self):
        """Sum of squared deviations from the example path, averaged over exploration episodes."""
        vals = [r.sum_sq_deviation for r in self.iterations if r.mode != "off"]
        return float(np.mean(vals)) if vals else 0.0

    def to_csv(self, path):
        cols = list(IterationReport.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["seed"] + cols)
            for r in self.iterations:
                wr.writerow([self.seed] + [getattr(r, c) for c in cols])


def learn(examples: ExampleSet, plant: ModelParams, sup_model: ModelParams, weights: MpccWeights,
          config: LearnConfig = LearnConfig(), policy: MlpPolicy | None = None, on_iteration=None):
    """Alternate off-policy and on-policy collection over the example set.

    Initialization flies two randomly chosen return-to-guidance examples
    off-policy and fits the first policy.  The remaining examples, in random
    order, are flown once each, alternating off-policy and on-policy
    collection, with augmentation and an incremental retrain after every
    step.
    """
    if len(examples) < 3:
        raise InvalidInputError("need at least 3 example paths")
    rng = np.random.default_rng(config.seed)
    onw = replace(weights, K_c=config.onpolicy_K_c, K_f=config.K_f)
    returns = examples.tagged("return-to-guidance")
    pool = returns if len(returns) >= 2 else list(range(len(examples)))
    init = [int(i) for i in rng.choice(pool, size=2, replace=False)]
    rest = [i for i in range(len(examples)) if i not in init]
    rest = [rest[i] for i in rng.permutation(len(rest))]
    policy = policy or init_policy(config.seed, n_in=config.obs_dim)
    data = Dataset(config.obs_dim)
    report = LearnReport(config.seed)
    episode = 0
    tcfg = config.train

    def supervisor_for(idx):
        return make_supervisor(config.supervisor, examples[idx], weights, sup_model, onw, config.speed)

    def add(shard, rec, sup, world, mode, idx, it, epochs=None):
        nonlocal policy
        aug, dropped = augment(shard, rec, sup, world, rng, np.asarray(config.noise_std), config.n_augment,
                               config.obs_dim)
        data.extend(aug)
        tc = tcfg if epochs is None else replace(tcfg, epochs=epochs)
        tc = replace(tc, seed=tcfg.seed + it)
        policy, loss, _ = train(policy, data.observations, data.targets, tc)
        ir = IterationReport(it, mode, idx, examples[idx].tag, len(aug), len(data), loss, rec.sum_sq_deviation,
                             rec.max_deviation, rec.collisions, rec.min_distance, dropped)
        report.iterations.append(ir)
        report.episodes.append(rec)
        if on_iteration is not None:
            on_iteration(ir, policy)
        log.info("iter %d %s ex%d n=%d loss=%.4g dev=%.3g coll=%d", it, mode, idx, len(data), loss,
                 rec.sum_sq_deviation, rec.collisions)

    # initialization: off-policy on two return paths, train once on the union
    shards = []
    for idx in init:
        sup = supervisor_for(idx)
        world = examples[idx].world(config.speed)
        shard, rec = collect_off_policy(examples[idx], plant, sup, world, episode, config.obs_dim)
        aug, dropped = augment(shard, rec, sup, world, rng, np.asarray(config.noise_std), config.n_augment,
                               config.obs_dim)
        shards.append((aug, rec, idx, dropped))
        episode += 1
    for aug, _rec, _idx, _d in shards:
        data.extend(aug)
    tc0 = tcfg if config.init_epochs is None else replace(tcfg, epochs=config.init_epochs)
    policy, loss, _ = train(policy, data.observations, data.targets, tc0)
    for aug, rec, idx, dropped in shards:
        report.iterations.append(IterationReport(0, "off", idx, examples[idx].tag, len(aug), len(data), loss,
                                                 rec.sum_sq_deviation, rec.max_deviation, rec.collisions,
                                                 rec.min_distance, dropped))
        report.episodes.append(rec)

    unsafe = config.exploration == "unsafe"
    for it, idx in enumerate(rest, start=1):
        sup = supervisor_for(idx)
        world = examples[idx].world(config.speed)
        if it % 2 == 1:
            shard, rec = collect_off_policy(examples[idx], plant, sup, world, episode, config.obs_dim)
            mode = "off"
        else:
            shard, rec = collect_on_policy(examples[idx], plant, sup, policy, world, episode, unsafe=unsafe,
                                           obs_dim=config.obs_dim)
            mode = "unsafe" if unsafe else "on"
        episode += 1
        add(shard, rec, sup, world, mode, idx, it)
    return policy, report, data
