"""numba-compiled implementations of the hot kernels.

Importing this module raises ImportError when numba is unavailable; the
package then falls back to ``_numpy``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def _power_iteration(matrix, x0, tol, max_iter):
    n = matrix.shape[0]
    v = x0.copy()
    nrm = math.sqrt(np.sum(v * v))
    v /= nrm
    w = np.empty(n)
    lam_old = 0.0
    for it in range(1, max_iter + 1):
        lam = 0.0
        nrm = 0.0
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += matrix[i, j] * v[j]
            w[i] = s
            lam += v[i] * s
            nrm += s * s
        nrm = math.sqrt(nrm)
        if nrm == 0.0:
            return 0.0, it, True
        for i in range(n):
            v[i] = w[i] / nrm
        if abs(lam - lam_old) <= tol * abs(lam):
            return _rayleigh(matrix, v), it, True
        lam_old = lam
    return _rayleigh(matrix, v), max_iter, False


@njit(cache=True)
def _rayleigh(matrix, v):
    n = matrix.shape[0]
    out = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += matrix[i, j] * v[j]
        out += v[i] * s
    return out


def power_iteration(matrix, x0, tol=1e-10, max_iter=10_000):
    """Largest eigenvalue of a symmetric PSD matrix (see the numpy twin)."""
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    v = np.array(x0, dtype=np.float64)
    if not np.any(v):
        raise ValueError("power iteration needs a nonzero start vector")
    lam, it, ok = _power_iteration(m, v, float(tol), int(max_iter))
    return float(lam), int(it), bool(ok)


@njit(cache=True)
def _soft_threshold(x, t):
    out = np.empty_like(x)
    for i in range(x.size):
        v = x[i]
        if v > t:
            out[i] = v - t
        elif v < -t:
            out[i] = v + t
        else:
            out[i] = 0.0
    return out


def soft_threshold(x, threshold):
    x = np.asarray(x, dtype=np.float64)
    return _soft_threshold(x.ravel(), float(threshold)).reshape(x.shape)


@njit(cache=True)
def _feasible(a1, b1, k1, a2, b2, k2, ca, cg):
    if not (math.isfinite(ca) and math.isfinite(cg)):
        return False
    tol = 1e-10 * (1.0 + abs(ca) + abs(cg))
    return (a1 * ca + b1 * cg + k1 <= tol) and (a2 * ca + b2 * cg + k2 <= tol) and (cg - ca * ca >= -tol)


@njit(cache=True)
def _roots(b, a, k):
    disc = a * a - 4.0 * b * k
    scale = a * a + abs(4.0 * b * k)
    if disc < 0.0 and disc > -1e-12 * scale:
        disc = 0.0
    if disc < 0.0:
        return np.nan, np.nan
    sq = math.sqrt(disc)
    q = -0.5 * (a + sq) if a >= 0.0 else -0.5 * (a - sq)
    if b != 0.0:
        r1 = q / b
    elif a != 0.0:
        r1 = -k / a
    else:
        return np.nan, np.nan
    r2 = k / q if (b != 0.0 and q != 0.0) else r1
    return r1, r2


@njit(cache=True)
def _pep_kkt(mu, L, gammas, theta):
    n = gammas.size
    rho = np.full(n, np.nan)
    out_a = np.full(n, np.nan)
    out_g = np.full(n, np.nan)
    c = 0.0 if mu == 0.0 else mu * L / (2.0 * (L - mu))
    ca = np.empty(5)
    cg = np.empty(5)
    for i in range(n):
        gam = gammas[i]
        d = theta * gam
        a1 = 1.0 + 2.0 * c / L
        b1 = d + 1.0 / (2.0 * L) + c / (L * L)
        a2 = 2.0 * c / L
        b2 = -d + 1.0 / (2.0 * L) + c / (L * L)
        det = a1 * b2 - a2 * b1
        if det != 0.0:
            ca[0] = (-c * b2 + c * b1) / det
            cg[0] = (-a1 * c + a2 * c) / det
        else:
            ca[0] = np.nan
            cg[0] = np.nan
        r1, r2 = _roots(b1, a1, c)
        r3, r4 = _roots(b2, a2, c)
        ca[1] = r1
        ca[2] = r2
        ca[3] = r3
        ca[4] = r4
        for j in range(1, 5):
            cg[j] = ca[j] * ca[j]
        best = -np.inf
        for j in range(5):
            if _feasible(a1, b1, c, a2, b2, c, ca[j], cg[j]):
                val = 1.0 + 2.0 * gam * ca[j] + gam * gam * cg[j]
                if val > best:
                    best = val
        if best == -np.inf:
            continue
        thr = best - 1e-12 * max(1.0, abs(best))
        best_norm = np.inf
        for j in range(5):
            if _feasible(a1, b1, c, a2, b2, c, ca[j], cg[j]):
                val = 1.0 + 2.0 * gam * ca[j] + gam * gam * cg[j]
                nrm = math.hypot(ca[j], cg[j])
                if val >= thr and nrm < best_norm:
                    best_norm = nrm
                    out_a[i] = ca[j]
                    out_g[i] = cg[j]
        rho[i] = best
    return rho, out_a, out_g


def pep_kkt(mu, L, gammas, theta):
    """KKT enumeration of the reduced one-step program (see the numpy twin)."""
    g = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    return _pep_kkt(float(mu), float(L), np.ascontiguousarray(g), float(theta))


@njit(cache=True)
def _pep_grid_max(mu, L, gamma, theta, a_lo, a_hi, g_lo, g_hi, na, ng):
    c = 0.0 if mu == 0.0 else mu / (2.0 * (1.0 - mu / L))
    best = -np.inf
    best_a = np.nan
    best_g = np.nan
    da = (a_hi - a_lo) / (na - 1) if na > 1 else 0.0
    dg = (g_hi - g_lo) / (ng - 1) if ng > 1 else 0.0
    for i in range(na):
        GX = a_lo + i * da if i < na - 1 else a_hi
        for j in range(ng):
            G = g_lo + j * dg if j < ng - 1 else g_hi
            if G < 0.0 or G - GX * GX < 0.0:
                continue
            fgap = theta * gamma * G
            quad = 1.0 + 2.0 * GX / L + G / (L * L)
            if fgap + GX + G / (2.0 * L) + c * quad > 0.0:
                continue
            if -fgap + G / (2.0 * L) + c * quad > 0.0:
                continue
            obj = 1.0 + 2.0 * gamma * GX + gamma * gamma * G
            if obj > best:
                best = obj
                best_a = GX
                best_g = G
    return best, best_a, best_g


def pep_grid_max(mu, L, gamma, theta, a_lo, a_hi, g_lo, g_hi, na, ng):
    """Brute-force grid maximum of the one-step program (see the numpy twin)."""
    best, a, g = _pep_grid_max(float(mu), float(L), float(gamma), float(theta),
                               float(a_lo), float(a_hi), float(g_lo), float(g_hi), int(na), int(ng))
    return float(best), float(a), float(g)


@njit(cache=True)
def _logistic_value_grad(A, y, reg, x, grad):
    m, n = A.shape
    for j in range(n):
        grad[j] = reg * x[j]
    loss = 0.0
    for i in range(m):
        z = 0.0
        for j in range(n):
            z += A[i, j] * x[j]
        z *= y[i]
        if z > 0.0:
            loss += math.log1p(math.exp(-z))
            s = math.exp(-z) / (1.0 + math.exp(-z))
        else:
            loss += -z + math.log1p(math.exp(z))
            s = 1.0 / (1.0 + math.exp(z))
        w = -y[i] * s / m
        for j in range(n):
            grad[j] += w * A[i, j]
    sq = 0.0
    for j in range(n):
        sq += x[j] * x[j]
    return loss / m + 0.5 * reg * sq


@njit(cache=True)
def _quadratic_value_grad(H, c, x, grad):
    n = x.size
    val = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += H[i, j] * (x[j] - c[j])
        grad[i] = s
        val += (x[i] - c[i]) * s
    return 0.5 * val


@njit(cache=True)
def _agm_loop(kind, P, q, reg, L, mu, x0, max_iter, grad_tol):
    n = x0.size
    x = x0.copy()
    y = x0.copy()
    gx = np.empty(n)
    gy = np.empty(n)
    if kind == 0:
        f_best = _logistic_value_grad(P, q, reg, x, gx)
    else:
        f_best = _quadratic_value_grad(P, q, x, gx)
    x_best = x.copy()
    grad_sq = np.sum(gx * gx)
    if grad_sq < grad_tol:
        return f_best, x_best, 0, grad_sq, True
    beta_const = 0.0
    if mu > 0.0:
        beta_const = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
    t = 1.0
    y_next = np.empty(n)
    for k in range(1, max_iter + 1):
        for i in range(n):
            y_next[i] = x[i] - gx[i] / L
        if kind == 0:
            f_y = _logistic_value_grad(P, q, reg, y_next, gy)
        else:
            f_y = _quadratic_value_grad(P, q, y_next, gy)
        grad_sq = np.sum(gy * gy)
        if f_y < f_best:
            f_best = f_y
            x_best[:] = y_next
        if grad_sq < grad_tol:
            return f_best, x_best, k, grad_sq, True
        if mu > 0.0:
            beta = beta_const
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            t = t_next
        for i in range(n):
            x[i] = y_next[i] + beta * (y_next[i] - y[i])
            y[i] = y_next[i]
        if kind == 0:
            _logistic_value_grad(P, q, reg, x, gx)
        else:
            _quadratic_value_grad(P, q, x, gx)
    return f_best, x_best, max_iter, grad_sq, False


def _unpack(res):
    f, xb, k, gs, ok = res
    return float(f), np.asarray(xb), int(k), float(gs), bool(ok)


def agm_logistic(A, y, reg, L, mu, x0, max_iter, grad_tol):
    """Momentum presolve on a logistic objective (see the numpy twin)."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    x0 = np.array(x0, dtype=np.float64)
    return _unpack(_agm_loop(0, A, y, float(reg), float(L), float(mu), x0, int(max_iter), float(grad_tol)))


def agm_quadratic(H, c, L, mu, x0, max_iter, grad_tol):
    """Momentum presolve on ``0.5 (x-c)^T H (x-c)`` (see the numpy twin)."""
    H = np.ascontiguousarray(H, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    x0 = np.array(x0, dtype=np.float64)
    return _unpack(_agm_loop(1, H, c, 0.0, float(L), float(mu), x0, int(max_iter), float(grad_tol)))
