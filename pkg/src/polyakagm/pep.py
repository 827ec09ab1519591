"""One-iteration worst-case analysis of Polyak-type gradient steps.

The worst ratio ``||x+ - x*||^2 / ||x - x*||^2`` over the function class is
relaxed to a program in the Gram variables

    X = ||x - x*||^2,  G = ||g||^2,  GX = g^T (x* - x),  fgap = f(x) - f*

constrained by the two interpolation inequalities between ``x`` and ``x*``
and by positive semidefiniteness of ``[[X, GX], [GX, G]]``. With ``X = 1``
and ``fgap = theta gamma G`` (``theta = 1/2`` for the doubled Polyak step,
``1`` for the plain one) the program is linear in ``(GX, G)`` apart from the
parabola ``G >= GX^2`` and is solved exactly by enumerating KKT points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, InfeasiblePep
from .rates import golden_max

RULE_THETA = {"variant1": 0.5, "polyak": 1.0}
ACTIVE_TOL = 1e-9


def _theta(rule: str) -> float:
    try:
        return RULE_THETA[rule]
    except KeyError:
        raise ValueError(f"unknown rule {rule!r}; expected one of {tuple(RULE_THETA)}") from None


def _check(mu: float, L: float) -> None:
    if not (L > 0 and 0 <= mu < L):
        raise DomainError(f"need 0 <= mu < L, got mu={mu}, L={L}")


def _curvature(mu: float, L: float) -> float:
    return 0.0 if mu == 0.0 else mu / (2.0 * (1.0 - mu / L))


@dataclass(frozen=True)
class PepVars:
    X: float
    G: float
    GX: float
    fgap: float

    @property
    def gram_slack(self) -> float:
        """``X G - GX^2``; nonnegative iff the Gram block is PSD."""
        return self.X * self.G - self.GX**2


def constraint_values(v: PepVars, mu: float, L: float) -> dict[str, float]:
    """Left-hand sides of the program's constraints (feasible when <= 0).

    ``psd`` is reported as ``GX^2 - X G`` so that all entries share the sign
    convention.
    """
    c = _curvature(mu, L)
    quad = v.X + 2.0 * v.GX / L + v.G / L**2
    return {
        "interp_x_xstar": v.fgap + v.GX + v.G / (2.0 * L) + c * quad,
        "interp_xstar_x": -v.fgap + v.G / (2.0 * L) + c * quad,
        "psd": -v.gram_slack,
    }


def objective(v: PepVars, gamma: float) -> float:
    """``||x - gamma g - x*||^2`` in Gram variables."""
    return v.X + 2.0 * gamma * v.GX + gamma**2 * v.G


@dataclass(frozen=True)
class PepSolution:
    objective: float
    vars: PepVars
    active_set: tuple[str, ...]
    gamma: float
    rule: str

    def max_violation(self, mu: float, L: float) -> float:
        return max(constraint_values(self.vars, mu, L).values())


def admissible_interval(mu: float, L: float, rule: str) -> tuple[float, float]:
    """Range of steps the rule can produce on the class."""
    _check(mu, L)
    theta = _theta(rule)
    hi = math.inf if mu == 0.0 else 1.0 / (2.0 * theta * mu)
    return 1.0 / (2.0 * theta * L), hi


def solve_rho_of_gamma(mu: float, L: float, gamma: float, rule: str = "variant1") -> PepSolution:
    """Exact worst one-step ratio for a realised step ``gamma``."""
    _check(mu, L)
    theta = _theta(rule)
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    rho, ga, gg = kernels.pep_kkt(mu, L, np.array([gamma]), theta)
    if not np.isfinite(rho[0]):
        lo, hi = admissible_interval(mu, L, rule)
        raise InfeasiblePep(f"no feasible point for gamma={gamma!r}; the rule reaches [{lo!r}, {hi!r}]")
    v = PepVars(X=1.0, G=float(gg[0]), GX=float(ga[0]), fgap=theta * gamma * float(gg[0]))
    cons = constraint_values(v, mu, L)
    scale = 1.0 + abs(v.G) + abs(v.GX)
    active = tuple(k for k, val in cons.items() if abs(val) <= ACTIVE_TOL * scale)
    return PepSolution(objective=float(rho[0]), vars=v, active_set=active, gamma=float(gamma), rule=rule)


@dataclass(frozen=True)
class SweepResult:
    gammas: np.ndarray
    rhos: np.ndarray
    gamma_max: float
    rho_max: float
    rule: str


def sweep_gamma(mu: float, L: float, rule: str = "variant1", grid_size: int = 101,
                refine: int = 60) -> SweepResult:
    """Worst ratio on a uniform step grid plus a golden-section refined maximum."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    lo, hi = admissible_interval(mu, L, rule)
    if not math.isfinite(hi):
        raise DomainError("mu = 0 gives an unbounded step interval")
    theta = _theta(rule)
    gammas = np.linspace(lo, hi, grid_size)
    rhos, _, _ = kernels.pep_kkt(mu, L, gammas, theta)
    i = int(np.nanargmax(rhos))
    gamma_best, rho_best = float(gammas[i]), float(rhos[i])

    def scalar(g):
        val = kernels.pep_kkt(mu, L, np.array([g]), theta)[0][0]
        return -math.inf if not np.isfinite(val) else float(val)

    # refine on a dense local grid first so a coarse user grid cannot hide the peak
    fine = np.linspace(gammas[max(i - 1, 0)], gammas[min(i + 1, grid_size - 1)], 1001)
    frho = kernels.pep_kkt(mu, L, fine, theta)[0]
    j = int(np.nanargmax(frho))
    g, v = golden_max(scalar, fine[max(j - 1, 0)], fine[min(j + 1, fine.size - 1)], refine)
    for cand_g, cand_v in ((float(fine[j]), float(frho[j])), (g, v)):
        if cand_v > rho_best:
            gamma_best, rho_best = cand_g, cand_v
    return SweepResult(gammas=gammas, rhos=rhos, gamma_max=gamma_best, rho_max=rho_best, rule=rule)


@dataclass(frozen=True)
class GridOracleResult:
    value: float
    GX: float
    G: float
    box: tuple[float, float, float, float]
    resolution: float


def _roots(b: float, a: float, k: float) -> list[float]:
    if b == 0.0:
        return [-k / a] if a != 0.0 else []
    disc = a * a - 4.0 * b * k
    if disc < -1e-12 * (a * a + abs(4.0 * b * k)):
        return []
    sq = math.sqrt(max(disc, 0.0))
    return [(-a - sq) / (2.0 * b), (-a + sq) / (2.0 * b)]


def bounding_box(mu: float, L: float, gamma: float, rule: str = "variant1") -> tuple[float, float, float, float]:
    """Bounding box of the feasible set from its constraint intersections.

    The feasible set is convex and bounded by two lines and the parabola
    ``G = GX^2``, so its extent in ``GX`` and its largest ``G`` are attained
    at pairwise intersections of those curves; the smallest ``G`` is 0 when
    ``GX = 0`` is in range and otherwise at an intersection.
    """
    c = _curvature(mu, L)
    d = _theta(rule) * gamma
    a1, b1 = 1.0 + 2.0 * c / L, d + 1.0 / (2.0 * L) + c / L**2
    a2, b2 = 2.0 * c / L, -d + 1.0 / (2.0 * L) + c / L**2
    pts = []
    det = a1 * b2 - a2 * b1
    if det != 0.0:
        pts.append(((-c * b2 + c * b1) / det, (-a1 * c + a2 * c) / det))
    for a, b in ((a1, b1), (a2, b2)):
        pts += [(r, r * r) for r in _roots(b, a, c)]
    feas = []
    for ga, gg in pts:
        tol = 1e-10 * (1.0 + abs(ga) + abs(gg))
        if (a1 * ga + b1 * gg + c <= tol and a2 * ga + b2 * gg + c <= tol and gg - ga * ga >= -tol):
            feas.append((ga, gg))
    if not feas:
        raise InfeasiblePep(f"empty feasible set at gamma={gamma!r}")
    gas = [p[0] for p in feas]
    ggs = [p[1] for p in feas]
    a_lo, a_hi = min(gas), max(gas)
    g_lo = 0.0 if a_lo <= 0.0 <= a_hi else min(ggs)
    return a_lo, a_hi, min(g_lo, min(ggs)), max(ggs)


def grid_oracle(mu: float, L: float, gamma: float, rule: str = "variant1", n: int = 2000,
                zoom: int = 10) -> GridOracleResult:
    """Brute-force lower bound of the worst ratio on ``n x n`` grids.

    A first grid covers :func:`bounding_box`; when ``zoom > 0`` a second grid
    of the same size covers ``zoom`` cells around the first grid's maximiser.
    Infeasible grid points are dropped without tolerance, so the value never
    exceeds the true maximum. ``resolution`` is the objective change across
    one cell of the first grid, which bounds how far below the maximum the
    first pass can land.
    """
    _check(mu, L)
    theta = _theta(rule)
    a_lo, a_hi, g_lo, g_hi = bounding_box(mu, L, gamma, rule)
    val, ga, gg = kernels.pep_grid_max(mu, L, gamma, theta, a_lo, a_hi, g_lo, g_hi, n, n)
    da = (a_hi - a_lo) / (n - 1)
    dg = (g_hi - g_lo) / (n - 1)
    res = 2.0 * gamma * da + gamma**2 * dg
    if zoom > 0 and np.isfinite(val):
        box2 = (ga - zoom * da, ga + zoom * da, max(gg - zoom * dg, 0.0), gg + zoom * dg)
        v2, a2, g2 = kernels.pep_grid_max(mu, L, gamma, theta, *box2, n, n)
        if v2 > val:
            val, ga, gg = v2, a2, g2
    return GridOracleResult(value=val, GX=ga, G=gg, box=(a_lo, a_hi, g_lo, g_hi), resolution=res)


def verify_certificate_multipliers(mu: float, L: float, gamma: float, samples: int = 100,
                                   dim: int = 4, seed: int = 0):
    """Check the distance-contraction certificate at ``gamma`` by sampling."""
    from .certificates import check_identity

    if not (1.0 / L < gamma < (1.0 / mu if mu > 0 else math.inf)):
        raise DomainError("gamma must lie strictly inside (1/L, 1/mu)")
    return check_identity("gd_distance", mu, L, gamma, samples=samples, dim=dim, seed=seed)
