"""Condensed Gauss-Newton SQP for the horizon problems.

Decision vector per stage: ``[vz, roll_d, pitch_d, yaw_rate_d, nu_dot]``.
States and the path parameter are eliminated by forward simulation
(single shooting), so dynamics and progress equalities hold exactly at
every iterate.  Input boxes are handled by a projected-Newton box QP and
the terminal bound ``nu_N <= l_path`` by a scalar multiplier search.

All stage costs are squared residuals plus the linear progress reward,
which makes the Gauss-Newton Hessian natural:

* contour   ``sqrt(Kc) * (r - (r.t) t)``, ``r = s(nu) - p``
* lag       ``sqrt(Kl) * (r.t)``
* references ``sqrt(q_j) * (x - xref_j)`` (tracking and policy following)
* avoidance ``sqrt(w) * max(0, onset - dist(p, obstacle))``
* inputs    ``sqrt(R) * (u - uref)``, ``sqrt(eps) * nu_dot``
* progress  ``-beta * nu_dot``
"""
import numpy as np

from ._jit import njit
from .dynamics import jacobian_kernel, step_kernel
from .geometry import lag_contour_kernel
from .world import surface_distance

NW = 5
NZ = 9

# indices into the packed weight vector
W_KC, W_KL, W_BETA, W_EPS, W_AVOID, W_ONSET = range(6)


@njit
def rollout_aug(x0, nu0, w, prm, n):
    X = np.empty((n + 1, 8))
    NU = np.empty(n + 1)
    X[0] = x0
    NU[0] = nu0
    for k in range(n):
        X[k + 1] = step_kernel(X[k], w[k * NW:k * NW + 4], prm)
        NU[k + 1] = NU[k] + prm[3] * w[k * NW + 4]
    return X, NU


@njit
def stage_residual(x, nu, k, knots, coefs, wts, xrefs, qrefs, obs, with_jac):
    """Residual vector of state stage ``k`` and its Jacobian w.r.t. (x, nu)."""
    nref = xrefs.shape[0]
    nobs = obs.shape[0]
    m = 4 + 8 * nref + nobs
    r = np.zeros(m)
    J = np.zeros((m, NZ))
    p = x[:3]
    skc = np.sqrt(wts[W_KC])
    skl = np.sqrt(wts[W_KL])
    if skc > 0.0 or skl > 0.0:
        lag, q, dlag, dq, t = lag_contour_kernel(knots, coefs, p, nu)
        r[:3] = skc * q
        r[3] = skl * lag
        if with_jac:
            for i in range(3):
                for j in range(3):
                    J[i, j] = -skc * ((1.0 if i == j else 0.0) - t[i] * t[j])
                J[i, 8] = skc * dq[i]
                J[3, i] = -skl * t[i]
            J[3, 8] = skl * dlag
    row = 4
    for j in range(nref):
        for i in range(8):
            sq = np.sqrt(qrefs[j, k, i])
            r[row + i] = sq * (x[i] - xrefs[j, k, i])
            if with_jac:
                J[row + i, i] = sq
        row += 8
    if wts[W_AVOID] > 0.0:
        sw = np.sqrt(wts[W_AVOID])
        for o in range(nobs):
            dist, grad = surface_distance(p, obs[o])
            gap = wts[W_ONSET] - dist
            if gap > 0.0:
                r[row + o] = sw * gap
                if with_jac:
                    for i in range(3):
                        J[row + o, i] = -sw * grad[i]
    return r, J


@njit
def total_cost(X, NU, w, n, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs):
    c = 0.0
    for k in range(n + 1):
        r, _J = stage_residual(X[k], NU[k], k, knots, coefs, wts, xrefs, qrefs, obs, False)
        c += np.dot(r, r)
    for k in range(n):
        for i in range(4):
            e = w[k * NW + i] - uref[k, i]
            c += rdiag[i] * e * e
        nd = w[k * NW + 4]
        c += wts[W_EPS] * nd * nd - wts[W_BETA] * nd
    return c


@njit
def gradient_hessian(X, NU, w, n, prm, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs):
    """Exact gradient and Gauss-Newton Hessian of the condensed cost."""
    nv = n * NW
    H = np.zeros((nv, nv))
    g = np.zeros(nv)
    G = np.zeros((NZ, nv))
    for k in range(n):
        A, B = jacobian_kernel(X[k], w[k * NW:k * NW + 4], prm)
        Gn = np.zeros((NZ, nv))
        cols = k * NW
        if cols > 0:
            Gn[:8, :cols] = A @ G[:8, :cols]
            Gn[8, :cols] = G[8, :cols]
        Gn[:8, cols:cols + 4] = B
        Gn[8, cols + 4] = prm[3]
        G = Gn
        r, J = stage_residual(X[k + 1], NU[k + 1], k + 1, knots, coefs, wts, xrefs, qrefs, obs, True)
        used = cols + NW
        JG = J @ G[:, :used]
        H[:used, :used] += 2.0 * (JG.T @ JG)
        g[:used] += 2.0 * (JG.T @ r)
    for k in range(n):
        for i in range(4):
            idx = k * NW + i
            H[idx, idx] += 2.0 * rdiag[i]
            g[idx] += 2.0 * rdiag[i] * (w[idx] - uref[k, i])
        idx = k * NW + 4
        H[idx, idx] += 2.0 * wts[W_EPS]
        g[idx] += 2.0 * wts[W_EPS] * w[idx] - wts[W_BETA]
    return g, H


@njit
def box_qp(H, g, lo, hi, x0, max_iter):
    """Projected-Newton solve of min 0.5 x'Hx + g'x subject to lo <= x <= hi."""
    n = g.shape[0]
    x = np.minimum(np.maximum(x0, lo), hi)
    for _it in range(max_iter):
        grad = g + H @ x
        free = np.ones(n, dtype=np.bool_)
        nfree = 0
        for i in range(n):
            if (x[i] <= lo[i] + 1e-12 and grad[i] > 0.0) or (x[i] >= hi[i] - 1e-12 and grad[i] < 0.0):
                free[i] = False
            else:
                nfree += 1
        if nfree == 0:
            break
        idx = np.empty(nfree, dtype=np.int64)
        c = 0
        gn = 0.0
        for i in range(n):
            if free[i]:
                idx[c] = i
                c += 1
                gn = max(gn, abs(grad[i]))
        if gn < 1e-13:
            break
        Hf = np.empty((nfree, nfree))
        gf = np.empty(nfree)
        for a in range(nfree):
            gf[a] = grad[idx[a]]
            for b in range(nfree):
                Hf[a, b] = H[idx[a], idx[b]]
        L = np.linalg.cholesky(Hf)
        y = np.linalg.solve(L, -gf)
        df = np.linalg.solve(L.T, y)
        d = np.zeros(n)
        for a in range(nfree):
            d[idx[a]] = df[a]
        f0 = 0.5 * x @ (H @ x) + g @ x
        step = 1.0
        accepted = False
        for _ls in range(40):
            xn = np.minimum(np.maximum(x + step * d, lo), hi)
            fn = 0.5 * xn @ (H @ xn) + g @ xn
            if fn <= f0 + 0.1 * (grad @ (xn - x)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = np.max(np.abs(xn - x))
        x = xn
        if moved < 1e-14:
            break
    return x


@njit
def constrained_step(H, g, lo, hi, a, budget, d0):
    """Box QP with the extra half-space a.d <= budget via multiplier search."""
    d = box_qp(H, g, lo, hi, d0, 60)
    if a @ d <= budget + 1e-12:
        return d, 0.0
    lam_lo = 0.0
    lam_hi = 1.0
    for _ in range(60):
        d = box_qp(H, g + lam_hi * a, lo, hi, d, 60)
        if a @ d <= budget:
            break
        lam_lo = lam_hi
        lam_hi *= 4.0
    for _ in range(50):
        lam = 0.5 * (lam_lo + lam_hi)
        dm = box_qp(H, g + lam * a, lo, hi, d, 60)
        if a @ dm <= budget:
            lam_hi = lam
            d = dm
        else:
            lam_lo = lam
        if lam_hi - lam_lo <= 1e-10 * (1.0 + lam_hi):
            break
    return d, lam_hi


@njit
def projected_gradient(w, g, lo, hi):
    res = 0.0
    for i in range(w.shape[0]):
        t = w[i] - g[i]
        if t < lo[i]:
            t = lo[i]
        elif t > hi[i]:
            t = hi[i]
        res = max(res, abs(w[i] - t))
    return res


@njit
def sqp_kernel(x0, nu0, w0, n, prm, knots, coefs, lpath, wts, rdiag, uref, xrefs, qrefs, obs,
               lo, hi, tol, max_iter):
    """Returns (w, X, NU, cost, kkt, iterations, converged)."""
    nv = n * NW
    w = np.minimum(np.maximum(w0.copy(), lo), hi)
    a = np.zeros(nv)
    for k in range(n):
        a[k * NW + 4] = prm[3]
    budget_total = lpath - nu0
    # make the warm start respect the terminal bound
    s = a @ w
    if s > budget_total and s > 0.0:
        scale = max(budget_total, 0.0) / s
        for k in range(n):
            w[k * NW + 4] *= scale
    X, NU = rollout_aug(x0, nu0, w, prm, n)
    cost = total_cost(X, NU, w, n, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs)
    kkt = np.inf
    lam = 0.0
    it = 0
    converged = False
    reg = 1e-9
    for it in range(1, max_iter + 1):
        g, H = gradient_hessian(X, NU, w, n, prm, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs)
        kkt = projected_gradient(w, g + lam * a, lo, hi)
        if kkt <= tol:
            converged = True
            it -= 1
            break
        for i in range(nv):
            H[i, i] += reg * (1.0 + H[i, i])
        d, lam = constrained_step(H, g, lo - w, hi - w, a, budget_total - a @ w, np.zeros(nv))
        slope = g @ d
        if slope >= 0.0:
            # Gauss-Newton model predicts no descent: stationary to model accuracy
            break
        step = 1.0
        accepted = False
        for _ls in range(30):
            wn = w + step * d
            Xn, NUn = rollout_aug(x0, nu0, wn, prm, n)
            cn = total_cost(Xn, NUn, wn, n, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs)
            if cn <= cost + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w = wn
        X = Xn
        NU = NUn
        dec = cost - cn
        cost = cn
        if step == 1.0 and np.max(np.abs(d)) < 1e-10:
            g, H = gradient_hessian(X, NU, w, n, prm, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs)
            kkt = projected_gradient(w, g + lam * a, lo, hi)
            converged = kkt <= tol
            break
        if dec < 1e-14 * (1.0 + abs(cost)):
            g, H = gradient_hessian(X, NU, w, n, prm, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs)
            kkt = projected_gradient(w, g + lam * a, lo, hi)
            converged = kkt <= tol
            break
    else:
        g, H = gradient_hessian(X, NU, w, n, prm, knots, coefs, wts, rdiag, uref, xrefs, qrefs, obs)
        kkt = projected_gradient(w, g + lam * a, lo, hi)
        converged = kkt <= tol
    return w, X, NU, cost, kkt, it, converged
