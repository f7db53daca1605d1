"""MPCC supervisor, on-policy MPCC, MPC tracking baseline and APF baseline."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import solver as _sqp
from .dynamics import NX, ModelParams, QuadState, step_kernel
from .errors import ConfigurationError, PolicyOutputError
from .geometry import SplinePath, build_spline
from .world import World, observe, pack_obstacles, surface_distance, yaw_pd


@dataclass(frozen=True)
class MpccWeights:
    K_c: float = 25.0
    K_l: float = 100.0
    beta: float = 1.0
    R: tuple = (0.1, 0.1, 0.1, 0.1)
    K_f: float = 1.0
    N: int = 20
    Ts: float = 0.1
    nu_dot_max: float = 2.0
    nu_dot_reg: float = 1e-3
    tol: float = 1e-6
    max_iter: int = 50

    def __post_init__(self):
        if self.K_c < 0 or self.K_l < 0 or self.beta < 0:
            raise ConfigurationError("K_c, K_l and beta must be non-negative")
        if any(r <= 0 for r in self.R) or len(self.R) != 4:
            raise ConfigurationError("R must have four positive diagonal entries")
        if self.N < 2:
            raise ConfigurationError("horizon N must be at least 2")
        if self.nu_dot_max < 0:
            raise ConfigurationError("nu_dot_max must be non-negative")

    def packed(self, avoid_weight=0.0, onset=0.0):
        return np.array([self.K_c, self.K_l, self.beta, self.nu_dot_reg, avoid_weight, onset])


@dataclass(frozen=True)
class Avoidance:
    """Soft hinge ``weight * max(0, onset - dist)^2`` per obstacle and stage."""

    obstacles: tuple
    onset: float = 3.0
    weight: float = 50.0


@dataclass
class MpccSolution:
    states: np.ndarray
    inputs: np.ndarray
    nu: np.ndarray
    nu_dot: np.ndarray
    cost: float
    kkt_residual: float
    iterations: int
    solve_time: float
    converged: bool
    w: np.ndarray = field(repr=False)
    policy_states: np.ndarray | None = field(default=None, repr=False)

    @property
    def first_input(self):
        return self.inputs[0].copy()

    @property
    def horizon(self):
        return len(self.inputs)

    def shifted(self):
        """Decision vector for the next sampling instant."""
        n = _sqp.NW
        w = np.concatenate([self.w[n:], self.w[-n:]])
        return w


class SolveLog:
    """Per-solve diagnostics appended as CSV rows."""

    header = ("stage", "cost", "iterations", "solve_time", "kkt_residual", "converged")

    def __init__(self, path=None):
        self.rows = []
        self.path = path

    def record(self, stage, sol: MpccSolution):
        self.rows.append((stage, sol.cost, sol.iterations, sol.solve_time, sol.kkt_residual,
                          int(sol.converged)))

    def write(self, path=None):
        path = path or self.path
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.header)
            wr.writerows(self.rows)


def _as_array(state):
    return state.array if isinstance(state, QuadState) else np.asarray(state, dtype=float)


def _bounds(weights: MpccWeights, model: ModelParams, n, nu_dot_max=None, yaw_rate=0.0):
    ub = model.input_limits.upper
    lo = np.empty(n * _sqp.NW)
    hi = np.empty(n * _sqp.NW)
    nd = weights.nu_dot_max if nu_dot_max is None else nu_dot_max
    for k in range(n):
        lo[k * 5:k * 5 + 4] = -ub
        hi[k * 5:k * 5 + 4] = ub
        # yaw is driven by the separate heading controller, not optimized
        lo[k * 5 + 3] = hi[k * 5 + 3] = np.clip(yaw_rate, -ub[3], ub[3])
        lo[k * 5 + 4] = 0.0
        hi[k * 5 + 4] = nd
    return lo, hi


def cold_start(x, weights: MpccWeights, model: ModelParams, n, heading=None):
    """Deterministic initial guess: hold attitude, progress at current speed."""
    w = np.zeros((n, _sqp.NW))
    w[:, 1] = x[5]
    w[:, 2] = x[6]
    speed = math.hypot(x[3], x[4])
    w[:, 4] = min(speed, weights.nu_dot_max)
    ub = model.input_limits.upper
    w[:, :4] = np.clip(w[:, :4], -ub, ub)
    return w.ravel()


_DUMMY_PATH = build_spline([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])


def _solve(x0, nu0, path, weights, model, w0, xrefs, qrefs, uref, avoid, n, nu_dot_max=None,
           mpcc_terms=True, yaw_rate=0.0):
    if path is None:
        path = _DUMMY_PATH
    if not 0.0 <= nu0 <= path.total_length + 1e-9:
        raise ConfigurationError(f"nu0={nu0} outside [0, {path.total_length}]")
    nu0 = min(max(nu0, 0.0), path.total_length)
    lo, hi = _bounds(weights, model, n, nu_dot_max, yaw_rate)
    if np.any(lo > hi):
        raise ConfigurationError("infeasible input bounds")
    if mpcc_terms:
        wts = weights.packed()
    else:
        wts = np.array([0.0, 0.0, 0.0, weights.nu_dot_reg, 0.0, 0.0])
    obs = np.zeros((0, 7))
    if avoid is not None and len(avoid.obstacles) > 0:
        wts[_sqp.W_AVOID] = avoid.weight
        wts[_sqp.W_ONSET] = avoid.onset
        obs = pack_obstacles(avoid.obstacles)
    if uref is None:
        uref = np.zeros((n, 4))
    t0 = time.perf_counter()
    w, X, NU, cost, kkt, it, conv = _sqp.sqp_kernel(
        x0, float(nu0), w0, n, model.packed, path.knots, path.coefs, path.total_length, wts,
        np.asarray(weights.R, dtype=float), uref, xrefs, qrefs, obs, lo, hi, weights.tol,
        weights.max_iter)
    dt = time.perf_counter() - t0
    W = w.reshape(n, _sqp.NW)
    return MpccSolution(X, W[:, :4].copy(), NU, W[:, 4].copy(), float(cost), float(kkt), int(it),
                        dt, bool(conv), w)


def _no_refs(n):
    return np.zeros((0, n + 1, NX)), np.zeros((0, n + 1, NX))


def mpcc_solve(state, nu0, path: SplinePath, weights: MpccWeights, model: ModelParams, warm=None,
               avoid: Avoidance | None = None, yaw_rate=0.0) -> MpccSolution:
    """Solve the contouring problem from ``state`` at path parameter ``nu0``.

    ``warm`` may be a previous :class:`MpccSolution` (shifted by one stage)
    or a raw decision vector.
    """
    x0 = _as_array(state)
    n = weights.N
    w0 = _warm_vector(warm, x0, weights, model, n)
    xr, qr = _no_refs(n)
    return _solve(x0, float(nu0), path, weights, model, w0, xr, qr, None, avoid, n, yaw_rate=yaw_rate)


def _warm_vector(warm, x0, weights, model, n):
    if warm is None:
        return cold_start(x0, weights, model, n)
    if isinstance(warm, MpccSolution):
        w = warm.shifted()
    else:
        w = np.asarray(warm, dtype=float).copy()
    if len(w) != n * _sqp.NW:
        return cold_start(x0, weights, model, n)
    return w


def policy_rollout(state, policy, world: World, t, model: ModelParams, n, vz=0.0, yaw_gains=(2.0, 0.0)):
    """Predicted states from running ``policy`` through the model for ``n`` steps."""
    X = np.empty((n + 1, NX))
    X[0] = _as_array(state)
    prm = model.packed
    lim = model.input_limits
    for k in range(n):
        o = observe(X[k], world, t + k * model.Ts, vz)
        a = policy.act(o.vector)
        if not np.all(np.isfinite(a)):
            raise PolicyOutputError(f"policy returned non-finite output at horizon stage {k}")
        sp_heading = _heading(world, t + k * model.Ts)
        u = np.array([a[0], a[1], a[2], yaw_pd(X[k], sp_heading, yaw_gains, limit=lim.yaw_rate_max)])
        u = lim.clip(u)
        vz = u[0]
        X[k + 1] = step_kernel(X[k], u, prm)
    return X


def _heading(world, t):
    from .world import setpoint

    return setpoint(world, t).heading


def onpolicy_mpcc_solve(state, nu0, path, weights: MpccWeights, model, policy, world: World, t=0.0,
                        vz=0.0, warm=None, avoid=None, yaw_rate=0.0) -> MpccSolution:
    """Contouring problem plus a pull ``K_f ||x_pi,k - x_k||^2`` towards the policy rollout."""
    x0 = _as_array(state)
    n = weights.N
    w0 = _warm_vector(warm, x0, weights, model, n)
    if weights.K_f == 0.0:
        xr, qr = _no_refs(n)
        return _solve(x0, float(nu0), path, weights, model, w0, xr, qr, None, avoid, n, yaw_rate=yaw_rate)
    xpi = policy_rollout(x0, policy, world, t, model, n, vz)
    xr = xpi[None, :, :]
    qr = np.full((1, n + 1, NX), weights.K_f)
    sol = _solve(x0, float(nu0), path, weights, model, w0, xr, qr, None, avoid, n, yaw_rate=yaw_rate)
    sol.policy_states = xpi
    return sol


TRACK_Q = (1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0)


def mpc_track_solve(state, reference, weights: MpccWeights, model, policy_states=None, K_f=0.0,
                    Q=TRACK_Q, ref_inputs=None, warm=None, avoid=None, yaw_rate=0.0) -> MpccSolution:
    """Track ``reference`` (N+1 timed states) with a quadratic state cost."""
    x0 = _as_array(state)
    n = weights.N
    ref = np.asarray(reference, dtype=float)
    if ref.shape != (n + 1, NX):
        raise ConfigurationError(f"reference must have shape {(n + 1, NX)}, got {ref.shape}")
    refs = [ref]
    qs = [np.tile(np.asarray(Q, dtype=float), (n + 1, 1))]
    if policy_states is not None and K_f > 0:
        refs.append(np.asarray(policy_states, dtype=float))
        qs.append(np.full((n + 1, NX), K_f))
    w0 = _warm_vector(warm, x0, weights, model, n)
    w0 = w0.reshape(n, _sqp.NW)
    w0[:, 4] = 0.0
    uref = None if ref_inputs is None else np.asarray(ref_inputs, dtype=float)
    return _solve(x0, 0.0, None, weights, model, w0.ravel(), np.array(refs), np.array(qs), uref,
                  avoid, n, nu_dot_max=0.0, mpcc_terms=False, yaw_rate=yaw_rate)


@dataclass
class TimedReference:
    times: np.ndarray
    states: np.ndarray
    converged: bool = True

    def window(self, t, n, Ts):
        """States at ``t, t + Ts, ..., t + n Ts`` (held at the end)."""
        k0 = int(round(t / Ts))
        idx = np.clip(np.arange(k0, k0 + n + 1), 0, len(self.states) - 1)
        return self.states[idx]

    def position_path(self):
        return self.states[:, :3]


def offline_traj_opt(path: SplinePath, obstacles, speed, model: ModelParams,
                     weights: MpccWeights | None = None, clearance=1.0, avoid_weight=500.0,
                     start_state=None, max_iter=30) -> TimedReference:
    """Whole-path contouring solve with obstacle cost, re-timed at constant speed.

    The horizon is sized so that full-speed progress stays just short of
    the path end, and the large solve is warm-started from a receding-horizon
    pass over the same problem.
    """
    if path.total_length <= 0:
        raise ConfigurationError("path must have positive length")
    weights = weights or MpccWeights()
    n = max(2, int(math.floor(path.total_length / (speed * model.Ts))) - 1)
    fr = path.frame(0.0)
    if start_state is None:
        from .dynamics import cruise_state

        start_state = cruise_state(fr.point, fr.heading, speed, model)
    x0 = _as_array(start_state)
    avoid = Avoidance(tuple(obstacles), onset=clearance + 0.5, weight=avoid_weight) if obstacles else None
    local = replace(weights, nu_dot_max=speed)
    w0 = np.zeros((n, _sqp.NW))
    x, nu, warm = x0.copy(), 0.0, None
    for k in range(n):
        sol = mpcc_solve(x, nu, path, local, model, warm=warm, avoid=avoid)
        w0[k] = sol.w[:_sqp.NW]
        x = step_kernel(x, sol.first_input, model.packed)
        nu = min(nu + model.Ts * sol.nu_dot[0], path.total_length)
        warm = sol
    w_full = replace(weights, N=n, nu_dot_max=speed, max_iter=max_iter)
    sol = mpcc_solve(x0, 0.0, path, w_full, model, warm=w0.ravel(), avoid=avoid)
    pos = sol.states[:, :3]
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    keep = np.concatenate([[True], seg > 1e-9])
    arc, pos = arc[keep], pos[keep]
    m = int(math.floor(arc[-1] / (speed * model.Ts))) + 1
    s = np.arange(m) * speed * model.Ts
    P = np.column_stack([np.interp(s, arc, pos[:, i]) for i in range(3)])
    V = np.gradient(P, model.Ts, axis=0) if m > 1 else np.zeros((1, 3))
    states = np.zeros((m, NX))
    states[:, :3] = P
    states[:, 3:5] = V[:, :2]
    states[:, 7] = np.unwrap(np.arctan2(V[:, 1], V[:, 0]))
    states[:, 6] = np.arctan(model.c_d * np.hypot(V[:, 0], V[:, 1]) / model.a_g)
    return TimedReference(np.arange(m) * model.Ts, states, sol.converged)


class MpccSolver:
    """Stateful wrapper owning the warm start for one episode."""

    def __init__(self, path, weights: MpccWeights, model: ModelParams, avoid=None, log: SolveLog | None = None):
        self.path = path
        self.weights = weights
        self.model = model
        self.avoid = avoid
        self.log = log
        self.last = None
        self.stage = 0

    def reset(self):
        self.last = None
        self.stage = 0

    def solve(self, state, nu0, yaw_rate=0.0):
        sol = mpcc_solve(state, nu0, self.path, self.weights, self.model, warm=self.last, avoid=self.avoid,
                         yaw_rate=yaw_rate)
        self._bookkeep(sol)
        return sol

    def solve_onpolicy(self, state, nu0, policy, world, t, vz=0.0, yaw_rate=0.0):
        sol = onpolicy_mpcc_solve(state, nu0, self.path, self.weights, self.model, policy, world, t, vz,
                                  warm=self.last, avoid=self.avoid, yaw_rate=yaw_rate)
        self._bookkeep(sol)
        return sol

    def _bookkeep(self, sol):
        if self.log is not None:
            self.log.record(self.stage, sol)
        self.last = sol
        self.stage += 1


@dataclass(frozen=True)
class ApfParams:
    attraction: float = 1.0
    repulsion: float = 1.0
    influence: float = 1.5
    speed: float = 1.3
    k_v: float = 2.0

    def __post_init__(self):
        if min(self.attraction, self.repulsion, self.k_v) < 0 or self.influence <= 0:
            raise ConfigurationError("APF gains must be non-negative and influence radius positive")


def apf_gradient(p, p_d, world: World, params: ApfParams):
    grad = 2.0 * params.attraction * (np.asarray(p, dtype=float) - p_d)
    for ob in world.packed:
        dist, dgrad = surface_distance(np.ascontiguousarray(p, dtype=float), ob)
        dist = max(dist, 1e-3)
        if dist < params.influence:
            coef = 2.0 * params.repulsion * (1.0 / dist - 1.0 / params.influence) / dist ** 2
            grad = grad - coef * dgrad
    return grad


def apf_step(state, world: World, t, params: ApfParams, model: ModelParams) -> np.ndarray:
    """Velocity-reference potential field mapped to (vz, roll_d, pitch_d, 0)."""
    from .world import setpoint

    x = _as_array(state)
    sp = setpoint(world, t)
    grad = apf_gradient(x[:3], sp.point, world, params)
    gn = np.linalg.norm(grad)
    if gn < 1e-9:
        return np.zeros(4)
    v_des = -params.speed * grad / gn
    acc = params.k_v * (v_des[:2] - x[3:5]) + model.c_d * x[3:5]
    c, s = math.cos(x[7]), math.sin(x[7])
    ab_x = c * acc[0] + s * acc[1]
    ab_y = -s * acc[0] + c * acc[1]
    u = np.array([v_des[2], -math.atan(ab_y / model.a_g), math.atan(ab_x / model.a_g), 0.0])
    return model.input_limits.clip(u)
