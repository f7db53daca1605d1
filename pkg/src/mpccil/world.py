"""Obstacles, range sensor, guidance setpoint and policy observations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ._jit import njit
from .dynamics import QuadState
from .errors import InvalidInputError
from .geometry import SplinePath

CYLINDER = 0
BOX = 1

N_RAYS = 40
MAX_RANGE = 5.0
FIELD_OF_VIEW = math.pi
COLLISION_MARGIN = 0.3


@dataclass(frozen=True)
class Obstacle:
    """Vertical cylinder (unbounded height) or axis-aligned box."""

    kind: str
    center: tuple
    size: tuple
    velocity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("cylinder", "box"):
            raise InvalidInputError(f"unknown obstacle kind {self.kind!r}")
        if any(s <= 0 for s in self.size):
            raise InvalidInputError("obstacle size must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "size", tuple(float(c) for c in self.size))
        object.__setattr__(self, "velocity", tuple(float(c) for c in self.velocity))

    @classmethod
    def cylinder(cls, x, y, radius=0.2, velocity=(0.0, 0.0)):
        return cls("cylinder", (float(x), float(y), 0.0), (float(radius),), tuple(velocity))

    @classmethod
    def box(cls, center, half_extents, velocity=(0.0, 0.0)):
        return cls("box", tuple(float(c) for c in center), tuple(float(h) for h in half_extents),
                   tuple(velocity))

    @property
    def radius(self):
        return self.size[0]

    def packed(self):
        row = np.zeros(7)
        row[0] = CYLINDER if self.kind == "cylinder" else BOX
        row[1:4] = self.center
        if self.kind == "cylinder":
            row[4] = self.size[0]
        else:
            row[4:7] = self.size
        return row

    def moved(self, dt):
        if self.velocity == (0.0, 0.0):
            return self
        c = (self.center[0] + self.velocity[0] * dt, self.center[1] + self.velocity[1] * dt,
             self.center[2])
        return replace(self, center=c)

    def scaled(self, factor):
        return replace(self, size=tuple(s * factor for s in self.size))


def pack_obstacles(obstacles):
    if not obstacles:
        return np.zeros((0, 7))
    return np.array([o.packed() for o in obstacles])


@dataclass(frozen=True, eq=False)
class World:
    guidance: SplinePath
    obstacles: tuple = ()
    setpoint_speed: float = 1.3
    time: float = 0.0
    n_rays: int = N_RAYS
    max_range: float = MAX_RANGE
    fov: float = FIELD_OF_VIEW
    packed: np.ndarray = field(init=False, repr=False)
    ray_angles: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.setpoint_speed > 0:
            raise InvalidInputError("setpoint_speed must be positive")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "packed", pack_obstacles(self.obstacles))
        if self.n_rays == 1:
            angles = np.zeros(1)
        else:
            angles = np.linspace(-self.fov / 2, self.fov / 2, self.n_rays)
        object.__setattr__(self, "ray_angles", angles)

    def with_obstacles(self, obstacles):
        return replace(self, obstacles=tuple(obstacles))


class Setpoint(NamedTuple):
    point: np.ndarray
    heading: float
    complete: bool


class Observation(NamedTuple):
    d: np.ndarray
    v: np.ndarray
    l: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.d, self.v, self.l])


OBS_DIM = 2 + 3 + N_RAYS


def setpoint(world: World, t) -> Setpoint:
    """Guidance point moving at constant speed, clamped to the path end."""
    g = world.guidance
    nu = world.setpoint_speed * max(float(t), 0.0)
    complete = nu >= g.total_length
    nu = min(nu, g.total_length)
    s, d1, _ = g.derivatives(nu)
    return Setpoint(s, float(math.atan2(d1[1], d1[0])), bool(complete))


def guidance_offset(p, p_d, heading):
    """Lateral and vertical offset of ``p`` from ``p_d`` in the guidance frame.

    The full offset is the row vector ``(p - p_d) R(heading)`` with ``R`` the
    usual counter-clockwise rotation about z; its first (along-track)
    component is dropped.
    """
    diff = np.asarray(p, dtype=float) - np.asarray(p_d, dtype=float)
    c = math.cos(heading)
    s = math.sin(heading)
    return np.array([-diff[0] * s + diff[1] * c, diff[2]])


@njit
def ray_distance(ox, oy, oz, dx, dy, obs, max_range):
    best = max_range
    for i in range(obs.shape[0]):
        kind = obs[i, 0]
        if kind == 0:
            fx = ox - obs[i, 1]
            fy = oy - obs[i, 2]
            r = obs[i, 4]
            b = fx * dx + fy * dy
            c = fx * fx + fy * fy - r * r
            if c <= 0.0:
                return 0.0
            disc = b * b - c
            if disc < 0.0:
                continue
            t = -b - np.sqrt(disc)
            if t >= 0.0 and t < best:
                best = t
        else:
            if abs(oz - obs[i, 3]) > obs[i, 6]:
                continue
            tmin = -np.inf
            tmax = np.inf
            hit = True
            for ax in range(2):
                o = ox if ax == 0 else oy
                d = dx if ax == 0 else dy
                lo = obs[i, 1 + ax] - obs[i, 4 + ax]
                hi = obs[i, 1 + ax] + obs[i, 4 + ax]
                if abs(d) < 1e-15:
                    if o < lo or o > hi:
                        hit = False
                        break
                else:
                    t1 = (lo - o) / d
                    t2 = (hi - o) / d
                    if t1 > t2:
                        t1, t2 = t2, t1
                    if t1 > tmin:
                        tmin = t1
                    if t2 < tmax:
                        tmax = t2
            if not hit or tmax < tmin or tmax < 0.0:
                continue
            t = tmin if tmin > 0.0 else 0.0
            if t < best:
                best = t
    return best


@njit
def raycast_kernel(px, py, pz, yaw, angles, obs, max_range):
    out = np.empty(angles.shape[0])
    for k in range(angles.shape[0]):
        a = yaw + angles[k]
        out[k] = ray_distance(px, py, pz, np.cos(a), np.sin(a), obs, max_range)
    return out


@njit
def surface_distance(p, ob):
    """Signed distance from ``p`` to an obstacle surface and its gradient."""
    grad = np.zeros(3)
    if ob[0] == 0:
        dx = p[0] - ob[1]
        dy = p[1] - ob[2]
        n = np.sqrt(dx * dx + dy * dy)
        if n > 1e-12:
            grad[0] = dx / n
            grad[1] = dy / n
        return n - ob[4], grad
    q = np.empty(3)
    sg = np.empty(3)
    for a in range(3):
        diff = p[a] - ob[1 + a]
        sg[a] = 1.0 if diff >= 0.0 else -1.0
        q[a] = abs(diff) - ob[4 + a]
    qmax = max(q[0], max(q[1], q[2]))
    if qmax > 0.0:
        n = 0.0
        for a in range(3):
            if q[a] > 0.0:
                n += q[a] * q[a]
        n = np.sqrt(n)
        for a in range(3):
            if q[a] > 0.0:
                grad[a] = sg[a] * q[a] / n
        return n, grad
    for a in range(3):
        if q[a] == qmax:
            grad[a] = sg[a]
            break
    return qmax, grad


@njit
def min_distance_kernel(p, obs):
    best = np.inf
    for i in range(obs.shape[0]):
        d, _g = surface_distance(p, obs[i])
        if d < best:
            best = d
    return best


def raycast(state, world: World):
    x = state.array if isinstance(state, QuadState) else np.asarray(state, dtype=float)
    return raycast_kernel(x[0], x[1], x[2], x[7], world.ray_angles, world.packed, world.max_range)


def raycast_numpy(state, world: World):
    """Vectorized reference for :func:`raycast` (cylinders only)."""
    x = state.array if isinstance(state, QuadState) else np.asarray(state, dtype=float)
    a = x[7] + world.ray_angles
    d = np.stack([np.cos(a), np.sin(a)], axis=1)
    out = np.full(len(a), world.max_range)
    for ob in world.packed:
        f = x[:2] - ob[1:3]
        b = d @ f
        c = f @ f - ob[4] ** 2
        if c <= 0:
            return np.zeros(len(a))
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            t = -b - np.sqrt(disc)
        hit = (disc >= 0) & (t >= 0)
        out = np.where(hit, np.minimum(out, t), out)
    return out


def observe(state, world: World, t, vz=0.0) -> Observation:
    """Policy observation ``[d, v, l]`` at time ``t``.

    ``vz`` is the last vertical-velocity command, which stands in for the
    vertical velocity measurement since the model has no z-velocity state.
    """
    x = state.array if isinstance(state, QuadState) else np.asarray(state, dtype=float)
    sp = setpoint(world, t)
    d = guidance_offset(x[:3], sp.point, sp.heading)
    c = math.cos(sp.heading)
    s = math.sin(sp.heading)
    v = np.array([x[3] * c + x[4] * s, -x[3] * s + x[4] * c, float(vz)])
    l = raycast_kernel(x[0], x[1], x[2], x[7], world.ray_angles, world.packed, world.max_range)
    return Observation(d, v, l)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2 * math.pi)
    if w <= 0:
        w += 2 * math.pi
    return w - math.pi


def yaw_pd(state, heading, gains=(2.0, 0.0), yaw_rate=0.0, limit=1.5):
    x = state.array if isinstance(state, QuadState) else np.asarray(state, dtype=float)
    kp, kd = gains
    cmd = kp * wrap_angle(heading - x[7]) - kd * yaw_rate
    return float(np.clip(cmd, -limit, limit))


def obstacle_distance(state, world: World):
    """Smallest signed distance from the quadrotor position to any obstacle surface."""
    x = state.array if isinstance(state, QuadState) else np.asarray(state, dtype=float)
    if len(world.obstacles) == 0:
        return math.inf
    return float(min_distance_kernel(np.ascontiguousarray(x[:3]), world.packed))


def collision(state, world: World, margin=COLLISION_MARGIN):
    if margin < 0:
        raise InvalidInputError("margin must be non-negative")
    return obstacle_distance(state, world) < margin


def advance_obstacles(world: World, Ts) -> World:
    if all(o.velocity == (0.0, 0.0) for o in world.obstacles):
        return world
    return world.with_obstacles([o.moved(Ts) for o in world.obstacles])
