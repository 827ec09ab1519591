"""Closed-form worst-case rates, potential functions and the composite bound.

Conventions: ``kappa = mu / L``. Rates are per-iteration contraction factors
of a distance, a function gap or a potential, as documented per function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, MissingFStar

DOMAIN_SLACK = 1e-12
MIN_KAPPA = 1e-12
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

RATE_TAGS = ("gd_distance", "gd_gap", "robust", "adaptive", "intermediate", "accelerated")


def _check_class(mu: float, L: float) -> None:
    if not (L > 0 and 0 <= mu <= L):
        raise DomainError(f"need 0 <= mu <= L and L > 0, got mu={mu}, L={L}")


def _check_interval(name: str, value: float, lo: float, hi: float) -> None:
    slack = DOMAIN_SLACK * max(1.0, abs(lo), abs(hi) if math.isfinite(hi) else 1.0)
    if not (lo - slack <= value <= hi + slack):
        raise DomainError(f"{name}={value!r} outside [{lo!r}, {hi!r}]")


# -- step-size rates --------------------------------------------------------


def gd_distance_rate(gamma: float, mu: float, L: float) -> float:
    """Distance contraction of one gradient step with step ``gamma``.

    Valid for steps in ``[1/L, 1/mu]`` where the step equals twice the
    function gap over the squared gradient norm. Vanishes at both ends and
    peaks at ``2/(L+mu)`` with value ``((L-mu)/(L+mu))^2``.
    """
    den = gamma * (L + mu) - 1.0
    num = (gamma * L - 1.0) * (1.0 - gamma * mu)
    if den == 0.0:
        return 0.0
    return num / den


def gd_gap_rate(gamma: float, mu: float, L: float) -> float:
    """Function-gap contraction for steps in ``[1/L, (2 - mu/L)/L]``."""
    return (L * gamma - 1.0) * (L * gamma * (3.0 - gamma * (L + mu)) - 1.0)


def robust_momentum_rate(mu: float, L: float) -> float:
    """Potential contraction ``1 - mu/L`` valid for any momentum in [0, 1]."""
    return 1.0 - mu / L


def adaptive_momentum_rate(mu_tilde: float, L: float) -> float:
    """Potential contraction ``1 / (1 + mu_tilde / L)``."""
    return 1.0 / (1.0 + mu_tilde / L)


def intermediate_rate(mu: float, L: float) -> float:
    """``1 / (1 + kappa^(3/4))``, valid for momentum inside the intermediate bracket."""
    return 1.0 / (1.0 + (mu / L) ** 0.75)


def accelerated_rate(mu: float, L: float) -> float:
    """``1 / (1 + sqrt(kappa))``."""
    return 1.0 / (1.0 + math.sqrt(mu / L))


def max_distance_rate(mu: float, L: float) -> float:
    """Maximum of :func:`gd_distance_rate` over its domain."""
    return ((L - mu) / (L + mu)) ** 2


def regular_polyak_worst_rate(mu: float, L: float) -> float:
    """Worst one-step distance ratio of the unscaled Polyak step."""
    return (L * L - L * mu + mu * mu) / (L + mu) ** 2


# -- tagged formulas with domain checks -------------------------------------


@dataclass(frozen=True)
class RateFormula:
    """A rate formula selected by ``tag`` with its class parameters.

    Tags and their argument:

    ``gd_distance``  step size, domain ``[1/L, 1/mu]``
    ``gd_gap``       step size, domain ``[1/L, (2L - mu)/L^2]``
    ``robust``       no argument
    ``adaptive``     momentum estimate ``mu_tilde`` in ``(0, L]``
    ``intermediate``, ``accelerated``  no argument
    """

    tag: str
    mu: float
    L: float

    def __post_init__(self):
        if self.tag not in RATE_TAGS:
            raise ValueError(f"unknown rate tag {self.tag!r}; expected one of {RATE_TAGS}")
        _check_class(self.mu, self.L)

    def domain(self) -> tuple[float, float] | None:
        mu, L = self.mu, self.L
        if self.tag == "gd_distance":
            return 1.0 / L, (1.0 / mu if mu > 0 else math.inf)
        if self.tag == "gd_gap":
            return 1.0 / L, (2.0 * L - mu) / L**2
        if self.tag == "adaptive":
            return 0.0, L
        return None


def rate_value(formula: RateFormula, arg: float | None = None) -> float:
    """Evaluate ``formula`` at ``arg``; raises DomainError outside its domain."""
    mu, L, tag = formula.mu, formula.L, formula.tag
    dom = formula.domain()
    if dom is not None:
        if arg is None:
            raise DomainError(f"{tag} needs an argument")
        arg = float(arg)
        _check_interval(tag, arg, *dom)
        if tag == "adaptive" and not arg > 0.0:
            raise DomainError("adaptive rate needs mu_tilde > 0")
    if tag == "gd_distance":
        return gd_distance_rate(arg, mu, L)
    if tag == "gd_gap":
        return gd_gap_rate(arg, mu, L)
    if tag == "adaptive":
        return adaptive_momentum_rate(arg, L)
    if tag == "robust":
        return robust_momentum_rate(mu, L)
    if tag == "intermediate":
        return intermediate_rate(mu, L)
    return accelerated_rate(mu, L)


def golden_max(func: Callable[[float], float], lo: float, hi: float, iters: int = 60) -> tuple[float, float]:
    """Golden-section maximisation of a unimodal function on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = func(d)
    x = 0.5 * (a + b)
    return x, func(x)


def grid_then_golden(func: Callable[[float], float], lo: float, hi: float,
                     grid: int = 10_000, refine: int = 60) -> tuple[float, float]:
    """Grid search followed by golden-section refinement around the best cell."""
    xs = np.linspace(lo, hi, grid)
    vals = np.array([func(x) for x in xs])
    i = int(np.nanargmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    x, v = golden_max(func, a, b, refine)
    if v >= vals[i]:
        return x, v
    return float(xs[i]), float(vals[i])


def formula_max(formula: RateFormula, grid: int = 10_000, refine: int = 60) -> tuple[float, float]:
    """``(argmax, max)`` of a step-size formula over its (finite) domain."""
    if formula.tag not in ("gd_distance", "gd_gap"):
        raise DomainError("formula_max applies to step-size formulas only")
    lo, hi = formula.domain()
    if not math.isfinite(hi):
        raise DomainError("unbounded domain (mu = 0)")
    return grid_then_golden(lambda g: rate_value(formula, min(max(g, lo), hi)), lo, hi, grid, refine)


# -- composite bound for the running-min momentum rule ----------------------


def _check_kappa(mu: float, L: float) -> None:
    _check_class(mu, L)
    if mu / L < MIN_KAPPA:
        raise DomainError(f"kappa={mu / L:g} below {MIN_KAPPA:g}; the bound's constant loses all precision")


def switch_constant(mu: float, L: float) -> float:
    """Constant paying for the switch from the accelerated to the intermediate regime."""
    _check_kappa(mu, L)
    r1 = intermediate_rate(mu, L)
    return (1.0 / r1 - 1.0) * (1.0 + math.sqrt(L / (2.0 * mu))) ** 2 + 1.0


def switching_bound(mu: float, L: float, N: int, m: int | float, initial_gap: float,
                    initial_dist: float | None = None) -> float:
    """Upper bound on ``f(y_N) - f*`` for the running-min momentum rule.

    ``m`` is the first index whose next momentum ratio drops below
    ``sqrt(L mu)``, or ``math.inf`` when that never happens within ``N``
    iterations. ``initial_dist`` is ``||x_0 - x*||^2`` and is needed only when
    ``m == 0``.
    """
    if N < 0 or int(N) != N:
        raise DomainError(f"N must be a nonnegative integer, got {N}")
    _check_kappa(mu, L)
    r1, r2 = intermediate_rate(mu, L), accelerated_rate(mu, L)
    if m == math.inf:
        return r2**N * initial_gap
    if int(m) != m or not 0 <= m <= N:
        raise DomainError(f"m must be in 0..N or inf, got {m}")
    m = int(m)
    if m == 0:
        if initial_dist is None:
            raise DomainError("the m = 0 case needs initial_dist")
        lead = 0.5 * L * (1.0 / math.sqrt(r1) - math.sqrt(r1)) ** 2 * initial_dist
        return r1**N * (lead + initial_gap)
    return switch_constant(mu, L) * r1 ** (N - m) * r2**m * initial_gap


# -- momentum helpers -------------------------------------------------------


def momentum_from_estimate(mu_tilde, L):
    """``(sqrt(L) - sqrt(mu_tilde)) / (sqrt(L) + sqrt(mu_tilde))``."""
    s = np.sqrt(mu_tilde)
    r = math.sqrt(L)
    return (r - s) / (r + s)


def intermediate_bracket(mu: float, L: float) -> tuple[float, float]:
    """Momentum interval on which the intermediate potential contracts."""
    q = (mu / L) ** 0.25
    s = math.sqrt(mu / L)
    return (1.0 - q) / (1.0 + q), (1.0 - s) / (1.0 + s)


# -- potentials -------------------------------------------------------------

POTENTIAL_TAGS = ("robust", "adaptive", "intermediate")


@dataclass(frozen=True)
class PotentialSpec:
    """Potential selector.

    ``robust``       (L - mu)/2 ||x - y||^2 + f(y) - f*
    ``adaptive``     L/2 ||x - y||^2 + f(y) - f*
    ``intermediate`` L/2 ||(x - x*)/sqrt(rho) - sqrt(rho) (y - x*)||^2 + f(y) - f*

    ``rho`` defaults to :func:`intermediate_rate`.
    """

    tag: str
    mu: float
    L: float
    rho: float | None = None
    x_star: np.ndarray | None = None

    def __post_init__(self):
        if self.tag not in POTENTIAL_TAGS:
            raise ValueError(f"unknown potential {self.tag!r}; expected one of {POTENTIAL_TAGS}")
        _check_class(self.mu, self.L)


def potential_from_parts(spec: PotentialSpec, x, y, f_gap_y: float) -> float:
    """Potential value given the gap ``f(y) - f*`` directly."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if spec.tag == "robust":
        d = x - y
        return 0.5 * (spec.L - spec.mu) * float(d @ d) + f_gap_y
    if spec.tag == "adaptive":
        d = x - y
        return 0.5 * spec.L * float(d @ d) + f_gap_y
    if spec.x_star is None:
        raise MissingFStar("the intermediate potential needs the minimiser x*")
    rho = spec.rho if spec.rho is not None else intermediate_rate(spec.mu, spec.L)
    xs = np.asarray(spec.x_star, dtype=np.float64)
    d = (x - xs) / math.sqrt(rho) - math.sqrt(rho) * (y - xs)
    return 0.5 * spec.L * float(d @ d) + f_gap_y


def potential_value(spec: PotentialSpec, oracle, x, y) -> float:
    """Evaluate the potential at ``(x, y)`` on ``oracle`` (needs ``f*``)."""
    if oracle.f_star is None:
        raise MissingFStar("potentials need the optimal value")
    x_star = spec.x_star if spec.x_star is not None else getattr(oracle, "x_star", None)
    if spec.tag == "intermediate" and spec.x_star is None and x_star is not None:
        spec = PotentialSpec(spec.tag, spec.mu, spec.L, spec.rho, x_star)
    return potential_from_parts(spec, x, y, oracle.value(y) - oracle.f_star)
