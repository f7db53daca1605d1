"""Eight-state quadrotor model.

State layout ``[px, py, pz, vx, vy, roll, pitch, yaw]``, input layout
``[vz, roll_d, pitch_d, yaw_rate_d]``.  Attitude follows the exact
discretization of a first-order low-pass (``alpha = exp(-Ts / tau_a)``);
position and planar velocity use forward Euler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._jit import njit
from .errors import InvalidInputError, NumericalError, SingularityError

NX = 8
NU = 4
GRAVITY = 9.81

# indices into the packed parameter vector used by kernels
P_AG, P_CD, P_ALPHA, P_TS, P_WX, P_WY = range(6)


@dataclass(frozen=True)
class QuadState:
    p: np.ndarray
    v: np.ndarray
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:5].copy(), float(x[5]), float(x[6]), float(x[7]))

    @classmethod
    def hover(cls, p=(0.0, 0.0, 0.0), yaw=0.0):
        return cls(np.asarray(p, dtype=float), np.zeros(2), 0.0, 0.0, yaw)

    @property
    def array(self):
        return np.concatenate([self.p, self.v, [self.roll, self.pitch, self.yaw]])


@dataclass(frozen=True)
class ControlInput:
    vz: float = 0.0
    roll_d: float = 0.0
    pitch_d: float = 0.0
    yaw_rate_d: float = 0.0

    @classmethod
    def from_array(cls, u):
        return cls(*(float(a) for a in u))

    @property
    def array(self):
        return np.array([self.vz, self.roll_d, self.pitch_d, self.yaw_rate_d])


@dataclass(frozen=True)
class InputLimits:
    vz_max: float = 1.0
    roll_max: float = 0.4
    pitch_max: float = 0.4
    yaw_rate_max: float = 1.5

    @property
    def upper(self):
        return np.array([self.vz_max, self.roll_max, self.pitch_max, self.yaw_rate_max])

    @property
    def lower(self):
        return -self.upper

    def clip(self, u):
        return np.clip(u, self.lower, self.upper)


@dataclass(frozen=True)
class StateLimits:
    roll_max: float = 0.4
    pitch_max: float = 0.4


@dataclass(frozen=True)
class ModelParams:
    tau_a: float = -0.1 / math.log(0.85)
    Ts: float = 0.1
    c_d: float = 0.3
    a_g: float = GRAVITY
    input_limits: InputLimits = field(default_factory=InputLimits)
    state_limits: StateLimits = field(default_factory=StateLimits)
    wind: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.Ts > 0 or not self.tau_a > 0:
            raise InvalidInputError("Ts and tau_a must be positive")

    @classmethod
    def from_alpha(cls, alpha, Ts=0.1, **kwargs):
        if not 0.0 < alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
        return cls(tau_a=-Ts / math.log(alpha), Ts=Ts, **kwargs)

    @property
    def alpha(self):
        return math.exp(-self.Ts / self.tau_a)

    @property
    def packed(self):
        return np.array([self.a_g, self.c_d, self.alpha, self.Ts, self.wind[0], self.wind[1]])


def perturb_params(params: ModelParams, alpha_used: float) -> ModelParams:
    """Copy of ``params`` whose attitude constant is ``alpha_used``."""
    if not 0.0 < alpha_used < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha_used}")
    return replace(params, tau_a=-params.Ts / math.log(alpha_used))


@njit
def step_kernel(x, u, prm):
    ag = prm[0]
    cd = prm[1]
    alpha = prm[2]
    ts = prm[3]
    out = np.empty(8)
    out[0] = x[0] + ts * x[3]
    out[1] = x[1] + ts * x[4]
    out[2] = x[2] + ts * u[0]
    cy = np.cos(x[7])
    sy = np.sin(x[7])
    bx = ag * np.tan(x[6])
    by = -ag * np.tan(x[5])
    out[3] = x[3] + ts * (cy * bx - sy * by - cd * x[3] + prm[4])
    out[4] = x[4] + ts * (sy * bx + cy * by - cd * x[4] + prm[5])
    out[5] = alpha * x[5] + (1.0 - alpha) * u[1]
    out[6] = alpha * x[6] + (1.0 - alpha) * u[2]
    out[7] = x[7] + ts * u[3]
    return out


@njit
def jacobian_kernel(x, u, prm):
    ag = prm[0]
    cd = prm[1]
    alpha = prm[2]
    ts = prm[3]
    A = np.zeros((8, 8))
    B = np.zeros((8, 4))
    A[0, 0] = 1.0
    A[1, 1] = 1.0
    A[2, 2] = 1.0
    A[0, 3] = ts
    A[1, 4] = ts
    cy = np.cos(x[7])
    sy = np.sin(x[7])
    bx = ag * np.tan(x[6])
    by = -ag * np.tan(x[5])
    dbx = ag / np.cos(x[6]) ** 2
    dby = -ag / np.cos(x[5]) ** 2
    A[3, 3] = 1.0 - ts * cd
    A[4, 4] = 1.0 - ts * cd
    A[3, 5] = -ts * sy * dby
    A[4, 5] = ts * cy * dby
    A[3, 6] = ts * cy * dbx
    A[4, 6] = ts * sy * dbx
    A[3, 7] = ts * (-sy * bx - cy * by)
    A[4, 7] = ts * (cy * bx - sy * by)
    A[5, 5] = alpha
    A[6, 6] = alpha
    A[7, 7] = 1.0
    B[2, 0] = ts
    B[5, 1] = 1.0 - alpha
    B[6, 2] = 1.0 - alpha
    B[7, 3] = ts
    return A, B


def _as_state(state):
    if isinstance(state, QuadState):
        return state.array
    return np.asarray(state, dtype=float)


def _as_input(u):
    if isinstance(u, ControlInput):
        return u.array
    return np.asarray(u, dtype=float)


def _check(x, where):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values {where}")
    if abs(x[5]) >= math.pi / 2 or abs(x[6]) >= math.pi / 2:
        raise SingularityError(f"roll/pitch reached pi/2 {where}")


def step(state, u, params: ModelParams, clip=True):
    """One sampling period of the model.

    Accepts :class:`QuadState`/:class:`ControlInput` or raw arrays and
    returns the same kind as ``state``.
    """
    x = _as_state(state)
    uu = _as_input(u)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(uu))):
        raise NumericalError("non-finite state or input")
    if clip:
        uu = params.input_limits.clip(uu)
    nxt = step_kernel(x, uu, params.packed)
    _check(nxt, "after step")
    return QuadState.from_array(nxt) if isinstance(state, QuadState) else nxt


def rollout(state0, inputs, params: ModelParams, clip=True):
    """States visited by applying ``inputs`` in order, initial state included."""
    if len(inputs) == 0:
        raise InvalidInputError("rollout needs at least one input")
    xs = [state0]
    for i, u in enumerate(inputs):
        try:
            xs.append(step(xs[-1], u, params, clip=clip))
        except NumericalError as exc:
            raise type(exc)(f"rollout failed at index {i}: {exc}") from exc
    return xs


def linearize(state, u, params: ModelParams):
    """Jacobians (A, B) of :func:`step` w.r.t. state and input."""
    x = _as_state(state)
    uu = _as_input(u)
    if abs(x[5]) >= math.pi / 2 or abs(x[6]) >= math.pi / 2:
        raise SingularityError("roll/pitch at pi/2")
    return jacobian_kernel(x, uu, params.packed)


def trim_pitch(speed, params: ModelParams):
    """Pitch angle holding ``speed`` against drag."""
    return math.atan(params.c_d * speed / params.a_g)


def cruise_state(p, heading, speed, params: ModelParams):
    """State moving at ``speed`` along ``heading`` in drag equilibrium."""
    x = np.zeros(NX)
    x[0:3] = p
    x[3] = speed * math.cos(heading)
    x[4] = speed * math.sin(heading)
    x[6] = trim_pitch(speed, params)
    x[7] = heading
    return x
