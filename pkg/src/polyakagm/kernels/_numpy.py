"""Pure-numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_numba``; the
two are tested against each other.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "numpy"


def power_iteration(matrix, x0, tol=1e-10, max_iter=10_000):
    """Largest eigenvalue of a symmetric PSD matrix.

    Returns ``(value, iterations, converged)``; ``value`` is the Rayleigh
    quotient of the final iterate, so it never exceeds the true eigenvalue.
    """
    v = np.asarray(x0, dtype=np.float64).copy()
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("power iteration needs a nonzero start vector")
    v /= nrm
    lam_old = 0.0
    for it in range(1, max_iter + 1):
        w = matrix @ v
        lam = float(v @ w)
        nrm = float(np.linalg.norm(w))
        if nrm == 0.0:
            return 0.0, it, True
        v = w / nrm
        if abs(lam - lam_old) <= tol * abs(lam):
            return float(v @ (matrix @ v)), it, True
        lam_old = lam
    return float(v @ (matrix @ v)), max_iter, False


def soft_threshold(x, threshold):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def _reduced_coefficients(mu, L, gamma, theta):
    # X = 1 and fgap = theta * gamma * G eliminated; constraints read
    # A_i * GX + B_i * G + K_i <= 0.
    c = 0.0 if mu == 0.0 else mu * L / (2.0 * (L - mu))
    d = theta * gamma
    a1 = 1.0 + 2.0 * c / L
    b1 = d + 1.0 / (2.0 * L) + c / L**2
    a2 = 2.0 * c / L
    b2 = -d + 1.0 / (2.0 * L) + c / L**2
    return a1, b1, c, a2, b2, c


def _parabola_roots(b, a, k):
    """Roots of b*t**2 + a*t + k = 0, tangency snapped, nan when absent."""
    disc = a * a - 4.0 * b * k
    scale = a * a + abs(4.0 * b * k)
    disc = np.where((disc < 0.0) & (disc > -1e-12 * scale), 0.0, disc)
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    q = -0.5 * (a + np.where(a >= 0.0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(b != 0.0, q / b, np.where(a != 0.0, -k / a, np.nan))
        r2 = np.where((b != 0.0) & (q != 0.0), k / q, r1)
    r1 = np.where(ok, r1, np.nan)
    r2 = np.where(ok, r2, np.nan)
    return r1, r2


def pep_kkt(mu, L, gammas, theta):
    """Vectorised KKT enumeration of the reduced one-step program.

    For every step ``gamma`` maximise ``1 + 2*gamma*GX + gamma**2*G`` over the
    two interpolation constraints and ``G >= GX**2``. Returns arrays
    ``(rho, GX, G)``; entries are nan where the feasible set is empty.
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    a1, b1, k1, a2, b2, k2 = _reduced_coefficients(mu, L, gammas, theta)
    a1 = np.broadcast_to(a1, gammas.shape)
    a2 = np.broadcast_to(a2, gammas.shape)
    k1 = np.broadcast_to(k1, gammas.shape)
    k2 = np.broadcast_to(k2, gammas.shape)

    det = a1 * b2 - a2 * b1
    with np.errstate(divide="ignore", invalid="ignore"):
        va = np.where(det != 0.0, (-k1 * b2 + k2 * b1) / det, np.nan)
        vg = np.where(det != 0.0, (-a1 * k2 + a2 * k1) / det, np.nan)
    r11, r12 = _parabola_roots(b1, a1, k1)
    r21, r22 = _parabola_roots(b2, a2, k2)

    cand_a = np.stack([va, r11, r12, r21, r22], axis=1)
    cand_g = np.stack([vg, r11**2, r12**2, r21**2, r22**2], axis=1)

    tol = 1e-10 * (1.0 + np.abs(cand_a) + np.abs(cand_g))
    with np.errstate(invalid="ignore"):
        feas = (
            (a1[:, None] * cand_a + b1[:, None] * cand_g + k1[:, None] <= tol)
            & (a2[:, None] * cand_a + b2[:, None] * cand_g + k2[:, None] <= tol)
            & (cand_g - cand_a**2 >= -tol)
            & np.isfinite(cand_a)
            & np.isfinite(cand_g)
        )
    obj = 1.0 + 2.0 * gammas[:, None] * cand_a + gammas[:, None] ** 2 * cand_g
    obj = np.where(feas, obj, -np.inf)
    best = obj.max(axis=1)

    # ties (within 1e-12 relative) resolved by the smallest (GX, G) norm
    near = obj >= best[:, None] - 1e-12 * np.maximum(1.0, np.abs(best[:, None]))
    norms = np.where(near, np.hypot(cand_a, cand_g), np.inf)
    pick = np.argmin(norms, axis=1)
    rows = np.arange(gammas.size)
    found = np.isfinite(best)
    rho = np.where(found, best, np.nan)
    ga = np.where(found, cand_a[rows, pick], np.nan)
    gg = np.where(found, cand_g[rows, pick], np.nan)
    return rho, ga, gg


def pep_grid_max(mu, L, gamma, theta, a_lo, a_hi, g_lo, g_hi, na, ng):
    """Brute-force maximum of the kernelised one-step program on a grid.

    Constraints are evaluated in the unreduced Gram variables
    (X, G, GX, fgap) with X = 1; infeasible grid points are discarded with no
    tolerance, so the result is a lower bound of the true maximum.
    Returns ``(value, GX, G)``; value is -inf when no grid point is feasible.
    """
    c = 0.0 if mu == 0.0 else mu / (2.0 * (1.0 - mu / L))
    gx = np.linspace(a_lo, a_hi, na)
    gg = np.linspace(g_lo, g_hi, ng)
    best, best_a, best_g = -np.inf, np.nan, np.nan
    chunk = max(1, 2_000_000 // max(ng, 1))
    for start in range(0, na, chunk):
        GX = gx[start:start + chunk, None]
        G = gg[None, :]
        X = 1.0
        fgap = theta * gamma * G
        quad = X + 2.0 * GX / L + G / L**2
        c1 = fgap + GX + G / (2.0 * L) + c * quad
        c2 = -fgap + G / (2.0 * L) + c * quad
        ok = (c1 <= 0.0) & (c2 <= 0.0) & (X * G - GX**2 >= 0.0) & (G >= 0.0)
        obj = np.where(ok, X + 2.0 * gamma * GX + gamma**2 * G, -np.inf)
        idx = np.unravel_index(np.argmax(obj), obj.shape)
        if obj[idx] > best:
            best = float(obj[idx])
            best_a = float(gx[start + idx[0]])
            best_g = float(gg[idx[1]])
    return best, best_a, best_g


def _logistic_value_grad(A, y, reg, x):
    z = y * (A @ x)
    loss = np.logaddexp(0.0, -z).mean() + 0.5 * reg * float(x @ x)
    s = 0.5 * (1.0 - np.tanh(0.5 * z))  # 1 / (1 + exp(z)), overflow-free
    grad = -(A.T @ (y * s)) / A.shape[0] + reg * x
    return float(loss), grad


def _quadratic_value_grad(H, c, x):
    r = x - c
    g = H @ r
    return 0.5 * float(r @ g), g


def _agm_loop(value_grad, L, mu, x0, max_iter, grad_tol):
    x = np.array(x0, dtype=np.float64)
    y = x.copy()
    f_best, g0 = value_grad(x)
    x_best = x.copy()
    grad_sq = float(g0 @ g0)
    if grad_sq < grad_tol:
        return f_best, x_best, 0, grad_sq, True
    gx = g0
    if mu > 0.0:
        beta_const = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
    t = 1.0
    for k in range(1, max_iter + 1):
        y_next = x - gx / L
        f_y, g_y = value_grad(y_next)
        grad_sq = float(g_y @ g_y)
        if f_y < f_best:
            f_best = f_y
            x_best = y_next.copy()
        if grad_sq < grad_tol:
            return f_best, x_best, k, grad_sq, True
        if mu > 0.0:
            beta = beta_const
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            t = t_next
        x = y_next + beta * (y_next - y)
        y = y_next
        _, gx = value_grad(x)
    return f_best, x_best, max_iter, grad_sq, False


def agm_logistic(A, y, reg, L, mu, x0, max_iter, grad_tol):
    """Momentum run on a logistic objective for presolving its optimal value.

    Constant momentum when ``mu > 0``, the 1983 schedule otherwise. Returns
    ``(f_best, x_best, iterations, last_grad_sq, converged)``.
    """
    return _agm_loop(lambda x: _logistic_value_grad(A, y, reg, x), L, mu, x0, max_iter, grad_tol)


def agm_quadratic(H, c, L, mu, x0, max_iter, grad_tol):
    """Same loop as :func:`agm_logistic` for ``0.5 (x-c)^T H (x-c)``."""
    return _agm_loop(lambda x: _quadratic_value_grad(H, c, x), L, mu, x0, max_iter, grad_tol)
