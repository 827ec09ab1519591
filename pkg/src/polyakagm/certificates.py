"""Numerical verification of the convergence proofs as algebraic identities.

Each proof is a weighted sum of valid inequalities (interpolation
inequalities, convexity, the step definitions) that equals the claimed
contraction plus explicit nonnegative residual terms. Both sides are
polynomials in free "atoms" (points, gradients, function values), so
sampling the atoms at random falsifies a wrong identity almost surely.

Identity tags:

``gd_distance``  distance contraction of the doubled Polyak step, step ``gamma``
``gd_gap``       gap contraction of the second adaptive step, step ``gamma``
``robust``       momentum potential for any momentum ``beta`` in [0, 1]
``adaptive``     momentum potential for an estimate ``mu_tilde`` (convex case)
``intermediate`` momentum potential for ``beta`` inside the intermediate bracket
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .rates import intermediate_bracket

TAGS = ("gd_distance", "gd_gap", "robust", "adaptive", "intermediate")
RESIDUAL_TOL = 1e-10
SIGN_TOL = 1e-12
MP_DIGITS = 40


def _dot(a, b):
    return (a * b).sum(-1)


def _sq(a):
    return (a * a).sum(-1)


def interpolation_gap(fx, fy, x, y, gx, gy, mu, L):
    """Left side of the smooth strongly convex interpolation inequality.

    Nonpositive for every pair of points of a function in F_{mu,L}:
    ``f(x) - f(y) + <g(x), y - x> + ||g(x) - g(y)||^2 / (2L)
    + mu / (2 (1 - mu/L)) ||x - y - (g(x) - g(y)) / L||^2``.
    Works row-wise on stacked atoms.
    """
    d = gx - gy
    out = fx - fy + _dot(gx, y - x) + _sq(d) / (2 * L)
    if mu != 0:
        out = out + mu / (2 * (1 - mu / L)) * _sq(x - y - d / L)
    return out


# -- multipliers --------------------------------------------------------------


@dataclass
class Certificate:
    """Parameters of one identity.

    ``multipliers`` weight the inequalities; ``nonneg`` lists every value the
    proof needs to be nonnegative (multipliers of inequalities and residual
    coefficients); ``extra`` holds derived quantities (rates, momentum).
    """

    tag: str
    multipliers: dict
    nonneg: dict
    extra: dict = field(default_factory=dict)


def _check_param(tag, mu, L, p):
    mu, L, p = float(mu), float(L), float(p)
    if tag not in TAGS:
        raise ValueError(f"unknown identity {tag!r}; expected one of {TAGS}")
    if not (L > 0 and 0 <= mu < L):
        raise ValueError(f"need 0 <= mu < L, got mu={mu}, L={L}")
    if tag == "gd_distance" and not (1 / L < p < (1 / mu if mu > 0 else math.inf)):
        raise ValueError("gamma must lie strictly inside (1/L, 1/mu)")
    if tag == "gd_gap" and not (1 / L <= p <= (2 - mu / L) / L):
        raise ValueError("gamma must lie in [1/L, (2 - mu/L)/L]")
    if tag == "robust" and not 0 <= p <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if tag == "adaptive" and not 0 < p <= L:
        raise ValueError("mu_tilde must lie in (0, L]")
    if tag == "intermediate":
        if mu == 0:
            raise ValueError("the intermediate identity needs mu > 0")
        lo, hi = intermediate_bracket(mu, L)
        if not lo - 1e-15 <= p <= hi + 1e-15:
            raise ValueError(f"beta must lie in [{lo!r}, {hi!r}]")


def certificate(tag: str, mu, L, param, sqrt=math.sqrt) -> Certificate:
    """Multipliers and sign-constrained coefficients of identity ``tag``.

    Arithmetic is generic: pass mpmath numbers and ``sqrt=mpmath.sqrt`` for
    extended precision.
    """
    if tag == "gd_distance":
        g = param
        den = g * (L + mu) - 1
        lam = {"l1": 2 * g * (g * L - 1) / den, "l2": 2 * g * (1 - g * mu) / den,
               "l3": g * (2 - g * (L + mu)) / den}
        rho = (g * L - 1) * (1 - g * mu) / den
        return Certificate(tag, lam, {"l1": lam["l1"], "l2": lam["l2"]}, {"rho": rho})
    if tag == "gd_gap":
        g = param
        lam = {"l1": g * mu * (L * g - 1), "l2": g * mu, "l3": 1 - g * mu,
               "l4": g / 2 * ((L + mu) * g - 2)}
        rho = (L * g - 1) * (L * g * (3 - g * (L + mu)) - 1)
        nonneg = {k: lam[k] for k in ("l1", "l2", "l3")}
        return Certificate(tag, lam, nonneg, {"rho": rho})
    if tag == "robust":
        b = param
        rho = 1 - mu / L
        lam = {"l1": rho, "l2": 1 - rho, "l3": rho}
        nonneg = dict(lam, residual=(1 - b * b) * rho / (2 * L))
        return Certificate(tag, lam, nonneg, {"rho": rho, "beta": b})
    if tag == "adaptive":
        mt = param
        rho = 1 / (1 + mt / L)
        beta = (sqrt(L) - sqrt(mt)) / (sqrt(L) + sqrt(mt))
        lam = {"l1": rho, "l2": rho, "l3": (1 - rho) / (2 * mt)}
        s = sqrt(mt / L)
        coef = (4 * L * L * s - L * (mt - 2 * mt * s) - mt * mt) / (2 * L * L * (L + mt) * (s + 1) ** 2)
        return Certificate(tag, lam, dict(lam, residual=coef), {"rho": rho, "beta": beta, "coef": coef})
    b = param
    k = mu / L
    r = 1 / (1 + k ** (mpmath.mpf(3) / 4 if isinstance(k, mpmath.mpf) else 0.75))
    lam = {"l1": 1, "l2": 1 - r, "l3": r}
    gap = r**3 - b * b
    num = coefficient_numerator(b, k, r)
    c = {
        "grad_new": 1 / (2 * (L - mu)),
        "grad_old": (1 - r) / (2 * L),
        "mixed": L * gap / (2 * r),
        "shifted": L * L * (1 - r) * num / (2 * gap * (L - mu)),
    }
    return Certificate(tag, lam, dict(lam, **c), {"rho": r, "beta": b, "gap": gap, "num": num})


def coefficient_numerator(beta, kappa, rho):
    """Numerator of the last residual coefficient of the intermediate identity."""
    return kappa * rho * (2 * beta * rho - beta * (beta + 2) + rho) + (rho - 1) * (beta - rho) ** 2


# -- identities ---------------------------------------------------------------


def _sides(tag, cert: Certificate, A: dict, mu, L, sqrt):
    lam = cert.multipliers
    x, xs, fs = A["x"], A["xs"], A["fs"]
    gx, fx = A["gx"], A["fx"]
    zero = 0 * gx
    if tag == "gd_distance":
        g, rho = A["param"], cert.extra["rho"]
        lhs = (lam["l1"] * interpolation_gap(fx, fs, x, xs, gx, zero, mu, L)
               + lam["l2"] * interpolation_gap(fs, fx, xs, x, zero, gx, mu, L)
               + lam["l3"] * (2 * (fx - fs) - g * _sq(gx)))
        rhs = _sq(x - g * gx - xs) - rho * _sq(x - xs)
        return lhs, rhs
    if tag == "gd_gap":
        g, rho = A["param"], cert.extra["rho"]
        g1, f1 = A["g1"], A["f1"]
        x1 = x - g * gx
        lhs = (lam["l1"] * interpolation_gap(fx, fs, x, xs, gx, zero, mu, L)
               + lam["l2"] * interpolation_gap(f1, fs, x1, xs, g1, zero, mu, L)
               + lam["l3"] * interpolation_gap(f1, fx, x1, x, g1, gx, mu, L)
               + lam["l4"] * ((2 * L * L * g - 4 * L) * (fx - fs) + _sq(gx)))
        rhs = (f1 - fs - rho * (fx - fs)
               + _sq(g1 - L * mu * g * (x - xs) + (g * (L + mu) - 1) * gx) / (2 * (L - mu)))
        return lhs, rhs

    y, gy, fy, g1, f1 = A["y"], A["gy"], A["fy"], A["g1"], A["f1"]
    rho, b = cert.extra["rho"], cert.extra["beta"]
    y1 = x - gx / L
    x1 = y1 + b * (y1 - y)
    if tag == "robust":
        lhs = (lam["l1"] * interpolation_gap(fx, fy, x, y, gx, gy, mu, L)
               + lam["l2"] * interpolation_gap(f1, fs, y1, xs, g1, zero, mu, L)
               + lam["l3"] * interpolation_gap(f1, fx, y1, x, g1, gx, mu, L))

        def V(xx, yy, ff):
            return (L - mu) / 2 * _sq(xx - yy) + ff - fs

        rhs = (V(x1, y1, f1) - rho * V(x, y, fy)
               + _sq((1 - rho) * (gx - L * (x - xs)) + g1) / (2 * (L - mu))
               + rho / (2 * (L - mu)) * _sq(gy - gx + mu * (x - y))
               + cert.nonneg["residual"] * _sq(gx + L * (y - x)))
        return lhs, rhs
    if tag == "adaptive":
        mt = A["param"]
        lhs = (lam["l1"] * (f1 - fx + _dot(g1, x - y1) + _sq(gx - g1) / (2 * L))
               + lam["l2"] * (fx - fy + _dot(gx, y - x))
               + lam["l3"] * (2 * mt * (f1 - fs) - _sq(g1)))

        def V(xx, yy, ff):
            return L / 2 * _sq(xx - yy) + ff - fs

        rhs = V(x1, y1, f1) - rho * V(x, y, fy) + cert.extra["coef"] * _sq(gx + L * (y - x))
        return lhs, rhs

    # intermediate
    r = rho
    lhs = (lam["l1"] * interpolation_gap(f1, fx, y1, x, g1, gx, mu, L)
           + lam["l2"] * interpolation_gap(fx, fs, x, xs, gx, zero, mu, L)
           + lam["l3"] * (fx - fy + _dot(gx, y - x)))
    sr = sqrt(r)

    def V(xx, yy, ff):
        return L / 2 * _sq((xx - xs) / sr - sr * (yy - xs)) + ff - fs

    c = cert.nonneg
    gap = cert.extra["gap"]
    mixed = ((y - xs) + (b * r - b * (b + 1) + r * r) / (-gap) * (x - xs)
             + (b * b - b * r + b - r * r) / (-L * gap) * gx)
    rhs = (V(x1, y1, f1) - r * V(x, y, fy) + c["grad_new"] * _sq(g1) + c["grad_old"] * _sq(gx)
           + c["mixed"] * _sq(mixed) + c["shifted"] * _sq(x - xs - gx / L))
    return lhs, rhs


def sample_atoms(samples: int, dim: int, rng: np.random.Generator) -> dict:
    """Random atoms: vector components on [-1, 1], function values f* + [0, 1]."""
    A = {k: rng.uniform(-1.0, 1.0, (samples, dim)) for k in ("x", "y", "xs", "gx", "gy", "g1")}
    A["fs"] = rng.uniform(-1.0, 1.0, samples)
    for k in ("fx", "fy", "f1"):
        A[k] = A["fs"] + rng.uniform(0.0, 1.0, samples)
    return A


def _to_mp(A: dict) -> dict:
    conv = np.vectorize(mpmath.mpf, otypes=[object])
    return {k: conv(v) if isinstance(v, np.ndarray) else mpmath.mpf(v) for k, v in A.items()}


def identity_residuals(tag, mu, L, param, atoms: dict, perturb: dict | None = None,
                       extended: bool = False) -> np.ndarray:
    """Scaled residuals ``|lhs - rhs| / max(1, |lhs|, |rhs|)`` per sample."""
    if extended:
        with mpmath.workdps(MP_DIGITS):
            mu_, L_, p_ = (mpmath.mpf(v) for v in (mu, L, param))
            cert = certificate(tag, mu_, L_, p_, sqrt=mpmath.sqrt)
            for k, dv in (perturb or {}).items():
                cert.multipliers[k] = cert.multipliers[k] + mpmath.mpf(dv)
            A = _to_mp(atoms)
            A["param"] = p_
            lhs, rhs = _sides(tag, cert, A, mu_, L_, mpmath.sqrt)
            lhs, rhs = np.atleast_1d(lhs), np.atleast_1d(rhs)
            out = [abs(a - b) / max(1, abs(a), abs(b)) for a, b in zip(lhs, rhs)]
            return np.array([float(v) for v in out])
    cert = certificate(tag, mu, L, param)
    for k, dv in (perturb or {}).items():
        if k not in cert.multipliers:
            raise KeyError(f"{tag} has no multiplier {k!r}")
        cert.multipliers[k] = cert.multipliers[k] + dv
    A = dict(atoms, param=param)
    lhs, rhs = _sides(tag, cert, A, mu, L, math.sqrt)
    return np.abs(lhs - rhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


@dataclass(frozen=True)
class CertificateReport:
    tag: str
    max_residual: float
    multiplier_min: float
    samples: int
    param: float
    mu: float
    L: float
    tol: float = RESIDUAL_TOL

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol and self.multiplier_min >= -SIGN_TOL

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.tag:<13} {status}  max_residual={self.max_residual:.3e}  "
                f"multiplier_min={self.multiplier_min:.3e}  samples={self.samples}  "
                f"mu={self.mu:g} L={self.L:g} param={self.param:.6g}")


def check_identity(tag: str, mu: float, L: float, param: float, samples: int = 1000, dim: int = 4,
                   seed: int = 0, tol: float = RESIDUAL_TOL, perturb: dict | None = None) -> CertificateReport:
    """Sample the identity ``tag`` and report its residual and sign conditions.

    Samples whose double-precision residual is within 10x of ``tol`` are
    re-evaluated with mpmath at 40 digits and the extended value is kept.
    ``perturb`` adds offsets to named multipliers (mutation testing).
    """
    _check_param(tag, mu, L, param)
    rng = np.random.default_rng(seed)
    atoms = sample_atoms(samples, dim, rng)
    res = identity_residuals(tag, mu, L, param, atoms, perturb)
    near = np.nonzero(res > tol / 10.0)[0]
    if near.size:
        sub = {k: (v[near] if isinstance(v, np.ndarray) else v) for k, v in atoms.items()}
        res = res.copy()
        res[near] = identity_residuals(tag, mu, L, param, sub, perturb, extended=True)
    cert = certificate(tag, mu, L, param)
    mult_min = min(float(v) for v in cert.nonneg.values())
    return CertificateReport(tag, float(res.max()), mult_min, samples, float(param), float(mu), float(L), tol)


def default_params(tag: str, mu: float, L: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` parameters spread over the identity's domain (endpoints included)."""
    t = np.concatenate([[0.0, 1.0], rng.uniform(0.0, 1.0, max(count - 2, 0))])[:count]
    if tag == "gd_distance":
        lo, hi = 1 / L, 1 / mu
        t = np.clip(t, 1e-3, 1 - 1e-3)
    elif tag == "gd_gap":
        lo, hi = 1 / L, (2 - mu / L) / L
    elif tag == "robust":
        lo, hi = 0.0, 1.0
    elif tag == "adaptive":
        lo, hi = 0.0, L
        t = np.clip(t, 1e-3, 1.0)
    else:
        lo, hi = intermediate_bracket(mu, L)
    return lo + t * (hi - lo)


def write_reports_csv(reports, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tag", "max_residual", "multiplier_min", "samples", "mu", "L", "param", "passed"])
        for r in reports:
            w.writerow([r.tag, repr(r.max_residual), repr(r.multiplier_min), r.samples,
                        repr(r.mu), repr(r.L), repr(r.param), int(r.passed)])


def read_reports_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# -- polynomial sign conditions ----------------------------------------------


def _poly(coeffs_high_to_low, x):
    return np.polyval(np.asarray(coeffs_high_to_low, dtype=np.float64), x)


def gap_low_poly(x):
    """Numerator polynomial of ``rho^3 - beta_lo^2`` in ``x = kappa^(1/4)``."""
    return _poly([-1, 4, -8, 9, -4, -4, 9, -8, 4], x)


def gap_high_poly(x):
    """Numerator polynomial of ``rho^3 - beta_hi^2`` in ``x = kappa^(1/4)``."""
    return _poly([-1, 0, 2, -3, -1, 6, -3, -3, 6, 0, -3, 4], x)


def coef_high_poly(x):
    """Numerator polynomial of :func:`coefficient_numerator` at ``beta_hi``."""
    return _poly([1, -1, 2, 3, -7, 5, 4, -7, 4], x)


def _common(x):
    return (1 + x) ** 3 * (1 - x + x * x) ** 3


def closed_forms(kappa):
    """Factored forms of the four bracket-endpoint quantities, vectorised in kappa."""
    x = np.asarray(kappa, dtype=np.float64) ** 0.25
    s = x * x
    den_lo = _common(x)
    den_hi = den_lo * (1 + s) ** 2
    return {
        "gap_low": x * gap_low_poly(x) / den_lo,
        "gap_high": s * gap_high_poly(x) / den_hi,
        "coef_low": (1 - s + x**3) * x**7 / den_lo,
        "coef_high": s**3 * coef_high_poly(x) / den_hi,
    }


def direct_forms(kappa):
    """The same four quantities evaluated from their definitions."""
    k = np.asarray(kappa, dtype=np.float64)
    r = 1 / (1 + k**0.75)
    q, s = k**0.25, np.sqrt(k)
    b_lo, b_hi = (1 - q) / (1 + q), (1 - s) / (1 + s)
    return {
        "gap_low": r**3 - b_lo**2,
        "gap_high": r**3 - b_hi**2,
        "coef_low": coefficient_numerator(b_lo, k, r),
        "coef_high": coefficient_numerator(b_hi, k, r),
    }


@dataclass(frozen=True)
class PolynomialReport:
    minima: dict
    max_discrepancy: float
    grid: int

    @property
    def passed(self) -> bool:
        return min(self.minima.values()) >= -SIGN_TOL and self.max_discrepancy <= 1e-12

    def __str__(self) -> str:
        parts = "  ".join(f"{k}={v:.3e}" for k, v in self.minima.items())
        return f"polynomials {'PASS' if self.passed else 'FAIL'}  {parts}  discrepancy={self.max_discrepancy:.2e}"


def check_polynomials(grid: int = 100_000) -> PolynomialReport:
    """Minima on a uniform grid of [0, 1] of the three polynomials and of the
    factored endpoint coefficients; also the largest gap between factored and
    direct evaluations.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    x = np.linspace(0.0, 1.0, grid)
    cf = closed_forms(x)
    minima = {
        "gap_low_poly": float(gap_low_poly(x).min()),
        "gap_high_poly": float(gap_high_poly(x).min()),
        "coef_high_poly": float(coef_high_poly(x).min()),
        "coef_low": float(cf["coef_low"].min()),
        "coef_high": float(cf["coef_high"].min()),
    }
    df = direct_forms(x)
    disc = max(float(np.max(np.abs(cf[k] - df[k]))) for k in cf)
    return PolynomialReport(minima, disc, grid)


@dataclass(frozen=True)
class BracketReport:
    min_gap: float
    min_numerator: float
    kappas: int

    @property
    def passed(self) -> bool:
        return self.min_gap >= -SIGN_TOL and self.min_numerator >= -SIGN_TOL

    def __str__(self) -> str:
        return (f"bracket {'PASS' if self.passed else 'FAIL'}  min(rho^3-beta^2)={self.min_gap:.3e}  "
                f"min numerator={self.min_numerator:.3e}  kappas={self.kappas}")


def check_intermediate_bracket(kappas, interior: int = 100) -> BracketReport:
    """Sign conditions across the intermediate momentum bracket for each kappa."""
    kappas = np.atleast_1d(np.asarray(kappas, dtype=np.float64))
    if np.any((kappas <= 0) | (kappas > 1)):
        raise ValueError("kappa values must lie in (0, 1]")
    t = np.concatenate([[0.0, 1.0], np.linspace(0.0, 1.0, interior + 2)[1:-1]])
    min_gap = min_num = math.inf
    for k in kappas:
        lo, hi = intermediate_bracket(k, 1.0)
        b = lo + t * (hi - lo)
        r = 1 / (1 + k**0.75)
        min_gap = min(min_gap, float(np.min(r**3 - b * b)))
        min_num = min(min_num, float(np.min(coefficient_numerator(b, k, r))))
    return BracketReport(min_gap, min_num, kappas.size)


def exact_bracket_gap(kappa, upper: bool = True, digits: int = 50):
    """``rho^3 - beta^2`` at a bracket endpoint in mpmath precision."""
    with mpmath.workdps(digits):
        k = mpmath.mpf(kappa)
        r = 1 / (1 + k ** (mpmath.mpf(3) / 4))
        e = mpmath.sqrt(k) if upper else k ** (mpmath.mpf(1) / 4)
        b = (1 - e) / (1 + e)
        return r**3 - b * b
