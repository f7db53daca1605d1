"""Natural cubic splines for example paths and global guidance.

Splines are parametrized by cumulative chord length, so the parameter
``nu`` is close to arc length and ``nu_dot`` behaves like a speed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._jit import njit
from .errors import DegenerateTangentError, InvalidInputError

TANGENT_EPS = 1e-12
SCAN_PER_SEGMENT = 64


@njit
def spline_eval(knots, coefs, nu):
    """Position, first and second derivative at ``nu`` (clamped).

    ``coefs`` has shape (segments, 4, 3), highest power first.
    """
    m = coefs.shape[0]
    lo = knots[0]
    hi = knots[m]
    if nu < lo:
        nu = lo
    elif nu > hi:
        nu = hi
    # binary search for the segment
    a = 0
    b = m - 1
    while a < b:
        mid = (a + b + 1) // 2
        if knots[mid] <= nu:
            a = mid
        else:
            b = mid - 1
    tau = nu - knots[a]
    c = coefs[a]
    pos = ((c[0] * tau + c[1]) * tau + c[2]) * tau + c[3]
    d1 = (3.0 * c[0] * tau + 2.0 * c[1]) * tau + c[2]
    d2 = 6.0 * c[0] * tau + 2.0 * c[1]
    return pos, d1, d2


@njit
def _newton_project(knots, coefs, p, nu, max_iter):
    lo = knots[0]
    hi = knots[coefs.shape[0]]
    for _ in range(max_iter):
        s, d1, d2 = spline_eval(knots, coefs, nu)
        r = s - p
        g = np.dot(r, d1)
        h = np.dot(d1, d1) + np.dot(r, d2)
        if h <= 1e-12:
            h = np.dot(d1, d1) + 1e-12
        step = -g / h
        new = nu + step
        if new < lo:
            new = lo
        elif new > hi:
            new = hi
        # accept only non-increasing distance; otherwise halve
        f0 = np.dot(r, r)
        for _k in range(30):
            s1, _a, _b = spline_eval(knots, coefs, new)
            r1 = s1 - p
            if np.dot(r1, r1) <= f0 + 1e-15:
                break
            new = nu + 0.5 * (new - nu)
        if abs(new - nu) < 1e-13:
            nu = new
            break
        nu = new
    s, _d1, _d2 = spline_eval(knots, coefs, nu)
    return nu, np.sqrt(np.dot(s - p, s - p))


@njit
def closest_point_kernel(knots, coefs, p, hint, use_hint):
    if not use_hint:
        m = coefs.shape[0]
        best = knots[0]
        best_d = np.inf
        for i in range(m):
            h = (knots[i + 1] - knots[i]) / SCAN_PER_SEGMENT
            for j in range(SCAN_PER_SEGMENT + 1):
                nu = knots[i] + j * h
                s, _d1, _d2 = spline_eval(knots, coefs, nu)
                d = np.dot(s - p, s - p)
                if d < best_d:
                    best_d = d
                    best = nu
        hint = best
    return _newton_project(knots, coefs, p, hint, 50)


@njit
def lag_contour_kernel(knots, coefs, p, nu):
    """Tangent-projection errors and their derivatives.

    Returns (e_lag_signed, q, dlag_dnu, dq_dnu, t) where the lag error is
    ``r . t`` with ``r = s(nu) - p`` and ``q = r - (r . t) t`` is the
    contouring error vector.  Derivatives w.r.t. ``p`` are ``-t`` and
    ``-(I - t t^T)``.
    """
    s, d1, d2 = spline_eval(knots, coefs, nu)
    n = np.sqrt(np.dot(d1, d1))
    t = d1 / n
    dt = (d2 - np.dot(t, d2) * t) / n
    r = s - p
    lag = np.dot(r, t)
    q = r - lag * t
    dlag = n + np.dot(r, dt)
    dq = -np.dot(r, dt) * t - lag * dt
    return lag, q, dlag, dq, t


@dataclass(frozen=True)
class PathFrame:
    point: np.ndarray
    tangent: np.ndarray
    heading: float
    clamped: bool = False


@dataclass(frozen=True, eq=False)
class SplinePath:
    control_points: np.ndarray
    knots: np.ndarray
    coefs: np.ndarray
    total_length: float

    @property
    def n_segments(self):
        return self.coefs.shape[0]

    def position(self, nu):
        return spline_eval(self.knots, self.coefs, float(nu))[0]

    def derivatives(self, nu):
        return spline_eval(self.knots, self.coefs, float(nu))

    def frame(self, nu):
        return evaluate(self, nu)

    def sample(self, n):
        """``n`` positions at evenly spaced parameters."""
        nus = np.linspace(0.0, self.total_length, n)
        return np.array([self.position(v) for v in nus])


def build_spline(points) -> SplinePath:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInputError(f"expected an (n, 3) array of points, got shape {pts.shape}")
    if len(pts) < 2:
        raise InvalidInputError("a spline needs at least 2 points")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("control points must be finite")
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(chords <= 0.0):
        raise InvalidInputError("consecutive duplicate control points")
    knots = np.concatenate([[0.0], np.cumsum(chords)])
    if len(pts) == 2:
        # natural spline through two points is the straight segment
        coefs = np.zeros((1, 4, 3))
        coefs[0, 2] = (pts[1] - pts[0]) / chords[0]
        coefs[0, 3] = pts[0]
    else:
        cs = CubicSpline(knots, pts, axis=0, bc_type="natural")
        coefs = np.ascontiguousarray(np.transpose(cs.c, (1, 0, 2)))
    return SplinePath(pts, knots, coefs, float(knots[-1]))


def evaluate(path: SplinePath, nu) -> PathFrame:
    nu = float(nu)
    clamped = nu < 0.0 or nu > path.total_length
    s, d1, _ = spline_eval(path.knots, path.coefs, nu)
    n = np.linalg.norm(d1)
    if n < TANGENT_EPS:
        raise DegenerateTangentError(f"path tangent vanishes at nu={nu}")
    t = d1 / n
    return PathFrame(s, t, float(np.arctan2(t[1], t[0])), clamped)


def closest_point(path: SplinePath, p, hint=None):
    """Locally closest path parameter and the contouring error."""
    p = np.asarray(p, dtype=float)
    if hint is None:
        nu, dist = closest_point_kernel(path.knots, path.coefs, p, 0.0, False)
    else:
        nu, dist = closest_point_kernel(path.knots, path.coefs, p, float(hint), True)
    return float(nu), float(dist)


@dataclass(frozen=True)
class LagContour:
    lag: float
    contour: float
    dlag_dp: np.ndarray
    dlag_dnu: float
    dcontour_dp: np.ndarray
    dcontour_dnu: float


def contouring_lag_approx(path: SplinePath, p, nu) -> LagContour:
    """Approximate lag and contouring errors from the tangent at ``nu``."""
    p = np.asarray(p, dtype=float)
    nu = min(max(float(nu), 0.0), path.total_length)
    d1 = path.derivatives(nu)[1]
    if np.linalg.norm(d1) < TANGENT_EPS:
        raise DegenerateTangentError(f"path tangent vanishes at nu={nu}")
    lag, q, dlag, dq, t = lag_contour_kernel(path.knots, path.coefs, p, nu)
    sign = 1.0 if lag >= 0.0 else -1.0
    qn = float(np.linalg.norm(q))
    if qn > 0.0:
        u = q / qn
        dc_dp = -(u - np.dot(u, t) * t)
        dc_dnu = float(np.dot(u, dq))
    else:
        dc_dp = np.zeros(3)
        dc_dnu = 0.0
    return LagContour(abs(float(lag)), qn, -sign * t, sign * float(dlag), dc_dp, dc_dnu)
