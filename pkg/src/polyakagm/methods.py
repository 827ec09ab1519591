"""Gradient and accelerated gradient methods with Polyak-type adaptive rules.

Two families share one driver, :func:`run`:

* gradient steps ``x+ = x - gamma g`` (proximal when the problem is
  composite) with a fixed step or a step computed from the optimal value;
* momentum methods ``y+ = x - g/L`` (or its prox), ``x+ = y+ + beta (y+ - y)``
  with ``beta`` from a constant, an optimal-value based estimate of the
  strong convexity, a running minimum of that estimate, the 1983 schedule or
  an explicit sequence.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, GradientVanished, MissingFStar
from .oracles import CompositeOracle, SmoothOracle
from .rates import PotentialSpec, momentum_from_estimate, potential_from_parts

logger = logging.getLogger(__name__)

GAP_GUARD = 1e-14
GRAD_GUARD = 1e-28
MU_TILDE_FLOOR = 1e-16

STEP_KINDS = ("polyak", "variant1", "variant2", "fixed")
MOMENTUM_KINDS = ("constant", "acc1", "acc2", "schedule", "nesterov83")


@dataclass(frozen=True)
class StepRule:
    """Step-size rule for gradient steps.

    ``polyak``   gap / ||g||^2
    ``variant1`` 2 gap / ||g||^2
    ``variant2`` (2 - ||g||^2 / (2 L gap)) / L
    ``fixed``    the constant ``step``
    """

    kind: str
    step: float | None = None

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown step rule {self.kind!r}; expected one of {STEP_KINDS}")
        if self.kind == "fixed" and not (self.step is not None and self.step > 0):
            raise ValueError("a fixed step rule needs a positive step")

    @property
    def needs_f_star(self) -> bool:
        return self.kind != "fixed"

    @classmethod
    def fixed(cls, step: float) -> "StepRule":
        return cls("fixed", float(step))


@dataclass(frozen=True)
class MomentumRule:
    """Momentum rule for the accelerated family.

    ``constant``   estimate ``mu`` (the problem's when None)
    ``acc1``       ratio ||g(y+)||^2 / (2 gap(y+)) at the new point
    ``acc2``       running minimum of that ratio
    ``schedule``   explicit momentum values, cycled
    ``nesterov83`` t+ = (1 + sqrt(1 + 4 t^2)) / 2, beta = (t - 1) / t+
    """

    kind: str
    mu: float | None = None
    betas: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in MOMENTUM_KINDS:
            raise ValueError(f"unknown momentum rule {self.kind!r}; expected one of {MOMENTUM_KINDS}")
        if self.kind == "schedule" and not self.betas:
            raise ValueError("a schedule rule needs a non-empty betas sequence")

    @property
    def adaptive(self) -> bool:
        return self.kind in ("acc1", "acc2")

    @classmethod
    def constant(cls, mu: float | None = None) -> "MomentumRule":
        return cls("constant", mu=mu)

    @classmethod
    def schedule(cls, betas: Sequence[float]) -> "MomentumRule":
        return cls("schedule", betas=tuple(float(b) for b in betas))


@dataclass
class IterateState:
    """Iterates of the momentum family plus the rule's running state.

    ``mu_tilde_prev`` is None before the first running-min update (an
    infinite previous value). ``last_ratio`` and ``last_clamped`` describe the
    most recent adaptive estimate before clamping.
    """

    x: np.ndarray
    y: np.ndarray | None = None
    k: int = 0
    mu_tilde_prev: float | None = None
    t: float = 1.0
    last_ratio: float = math.nan
    last_clamped: bool = False

    @classmethod
    def start(cls, x0) -> "IterateState":
        x0 = np.array(x0, dtype=np.float64)
        return cls(x=x0, y=x0.copy())


def _vanished(gap: float, sq: float, f_star: float, L: float) -> bool:
    return not (gap > GAP_GUARD * max(1.0, abs(f_star))) or not (sq > GRAD_GUARD * max(1.0, L * L))


def step_size(rule: StepRule, gap: float, grad_sq: float, L: float) -> float:
    """Step from the rule given the gap and squared gradient norm."""
    if rule.kind == "fixed":
        return rule.step
    if rule.kind == "polyak":
        return gap / grad_sq
    if rule.kind == "variant1":
        return 2.0 * gap / grad_sq
    return (2.0 - grad_sq / (2.0 * L * gap)) / L


def polyak_gd_step(oracle: SmoothOracle, x, rule: StepRule, k: int = 0) -> tuple[np.ndarray, float]:
    """One gradient step ``x - gamma g`` with ``gamma`` from ``rule``."""
    x = np.asarray(x, dtype=np.float64)
    g = oracle.gradient(x)
    if rule.kind == "fixed":
        return x - rule.step * g, rule.step
    if oracle.f_star is None:
        raise MissingFStar("Polyak steps need the optimal value")
    gap = oracle.value(x) - oracle.f_star
    gsq = float(g @ g)
    if _vanished(gap, gsq, oracle.f_star, oracle.L):
        raise GradientVanished(f"iterate {k} is optimal up to the guards", k=k)
    gamma = step_size(rule, gap, gsq, oracle.L)
    return x - gamma * g, gamma


def prox_gd_step(problem: CompositeOracle, x, step: float | None = None) -> np.ndarray:
    """Proximal gradient step, step ``1/L`` by default."""
    t = 1.0 / problem.L if step is None else step
    x = np.asarray(x, dtype=np.float64)
    return problem.prox(x - t * problem.smooth.gradient(x), t)


def gradient_mapping_sq(problem: CompositeOracle, x) -> float:
    """``L^2 ||x - prox(x - g/L, 1/L)||^2``; equals ``||g||^2`` when h = 0."""
    d = np.asarray(x, dtype=np.float64) - prox_gd_step(problem, x)
    return problem.L**2 * float(d @ d)


def prox_decrease(problem: CompositeOracle, x) -> float:
    """``-2L min_z [<g(x), z - x> + L/2 ||z - x||^2 + h(z) - h(x)]``.

    The minimiser is the prox point of ``x - g(x)/L``; equals ``||g(x)||^2``
    when h = 0 and vanishes at minimisers of the composite objective.
    """
    L = problem.L
    x = np.asarray(x, dtype=np.float64)
    g = problem.gradient(x)
    z = problem.prox(x - g / L, 1.0 / L)
    d = z - x
    return -2.0 * L * (float(g @ d) + 0.5 * L * float(d @ d)
                       + problem.nonsmooth_value(z) - problem.nonsmooth_value(x))


def _clamp(ratio: float, L: float) -> tuple[float, bool]:
    lo = MU_TILDE_FLOOR * L
    if ratio < lo:
        return lo, True
    if ratio > L:
        return L, True
    return ratio, False


def _advance(problem, state: IterateState, rule: MomentumRule, proximal: bool):
    L = problem.L
    x, y = state.x, state.y
    g = problem.gradient(x)
    y1 = problem.prox(x - g / L, 1.0 / L) if proximal else x - g / L

    ratio, clamped = math.nan, False
    prev, t = state.mu_tilde_prev, state.t
    if rule.adaptive:
        f_star = problem.f_star
        if f_star is None:
            raise MissingFStar("adaptive momentum needs the optimal value")
        if proximal:
            num = prox_decrease(problem, y1)
        else:
            gy = problem.gradient(y1)
            num = float(gy @ gy)
        gap = problem.value(y1) - f_star
        if _vanished(gap, num, f_star, L):
            exc = GradientVanished(f"point {state.k + 1} is optimal up to the guards", k=state.k + 1)
            exc.point = y1
            raise exc
        ratio = num / (2.0 * gap)
        mu_t, clamped = _clamp(ratio, L)
        if rule.kind == "acc2" and prev is not None:
            mu_t = min(mu_t, prev)
        prev = mu_t
        beta = momentum_from_estimate(mu_t, L)
    elif rule.kind == "constant":
        mu_t = problem.mu if rule.mu is None else rule.mu
        beta = momentum_from_estimate(mu_t, L)
    elif rule.kind == "schedule":
        mu_t = math.nan
        beta = rule.betas[state.k % len(rule.betas)]
    else:
        mu_t = math.nan
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        t = t_next

    x1 = y1 + beta * (y1 - y)
    nxt = IterateState(x=x1, y=y1, k=state.k + 1, mu_tilde_prev=prev, t=t,
                       last_ratio=ratio, last_clamped=clamped)
    return nxt, float(mu_t), float(beta)


def agm_step(oracle: SmoothOracle, state: IterateState, rule: MomentumRule):
    """One accelerated step; returns ``(state_next, mu_tilde, beta)``.

    ``mu_tilde`` is nan for rules that do not use an estimate.
    """
    return _advance(oracle, state, rule, proximal=False)


def prox_agm_step(problem: CompositeOracle, state: IterateState, rule: MomentumRule):
    """Proximal accelerated step.

    The adaptive estimate replaces ``||g(y+)||^2`` by
    ``-2L min_z [<g(y+), z - y+> + L/2 ||z - y+||^2 + h(z) - h(y+)]``,
    evaluated in closed form at the prox point.
    """
    return _advance(problem, state, rule, proximal=True)


# -- method registry --------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    name: str
    family: str
    step: StepRule | None = None
    momentum: MomentumRule | None = None

    def __post_init__(self):
        if self.family == "gd" and self.step is None:
            raise ValueError("gradient methods need a step rule")
        if self.family == "agm" and self.momentum is None:
            raise ValueError("accelerated methods need a momentum rule")
        if self.family not in ("gd", "agm"):
            raise ValueError(f"unknown family {self.family!r}")


METHOD_NAMES = ("gd", "polyak", "variant1", "variant2", "agm", "agm-smooth", "acc-variant1", "acc-variant2")


def resolve_method(name: str, problem) -> MethodSpec:
    """Registered method for ``problem``.

    ``gd`` is the fixed ``1/L`` step (ISTA on composite problems),
    ``agm`` uses constant momentum with the problem's ``mu`` and
    ``agm-smooth`` the 1983 schedule (FISTA on composite problems).
    """
    composite = isinstance(problem, CompositeOracle)
    if name == "gd":
        return MethodSpec(name, "gd", step=StepRule.fixed(1.0 / problem.L))
    if name in ("polyak", "variant1", "variant2"):
        if composite:
            raise ConfigError(f"{name} is not defined for composite problems")
        return MethodSpec(name, "gd", step=StepRule(name))
    if name == "agm":
        return MethodSpec(name, "agm", momentum=MomentumRule.constant())
    if name == "agm-smooth":
        return MethodSpec(name, "agm", momentum=MomentumRule("nesterov83"))
    if name == "acc-variant1":
        return MethodSpec(name, "agm", momentum=MomentumRule("acc1"))
    if name == "acc-variant2":
        return MethodSpec(name, "agm", momentum=MomentumRule("acc2"))
    raise ConfigError(f"unknown method {name!r}; expected one of {METHOD_NAMES}")


# -- traces -----------------------------------------------------------------

CSV_COLUMNS = ("iter", "f_gap", "best_gap", "grad_sq", "step_or_mu", "beta")
_FLOAT_COLUMNS = ("f_gap", "grad_sq", "step_or_mu", "beta", "potential", "best_gap", "ratio", "dist_sq")


@dataclass
class RunTrace:
    """Per-iteration record of a run.

    Row ``k`` describes iterate ``k`` (``x_k`` for gradient methods, ``y_k``
    for accelerated ones) and the step or estimate computed there.
    ``step_or_mu`` is the step ``gamma_k`` or the estimate ``mu_tilde_k``
    (after clamping and running min); ``ratio`` is the raw estimate.
    ``potential`` is filled when a potential spec was given and ``dist_sq``
    (``||x_k - x*||^2``) when the minimiser is known.
    """

    method: str
    k: np.ndarray
    f_gap: np.ndarray
    grad_sq: np.ndarray
    step_or_mu: np.ndarray
    beta: np.ndarray
    potential: np.ndarray
    best_gap: np.ndarray
    ratio: np.ndarray
    clamped: np.ndarray
    dist_sq: np.ndarray
    reason: str = "budget"
    xs: list | None = field(default=None, repr=False)
    ys: list | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.k.size)

    @property
    def iterations(self) -> int:
        return int(self.k[-1]) if len(self) else 0

    def iterations_to(self, tol: float) -> int | None:
        """First ``k`` whose best gap is at most ``tol``, None if never."""
        hit = np.nonzero(self.best_gap <= tol)[0]
        return int(self.k[hit[0]]) if hit.size else None

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for i in range(len(self)):
                w.writerow([int(self.k[i])] + [repr(float(getattr(self, c)[i])) for c in CSV_COLUMNS[1:]])

    @classmethod
    def from_csv(cls, path, method: str | None = None) -> "RunTrace":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in ("iter", "step_or_mu") if c not in (reader.fieldnames or ())]
            if missing:
                raise ValueError(f"{path} lacks columns {missing}")
            rows = list(reader)
        n = len(rows)
        col = {c: np.array([float(r[c]) for r in rows]) if rows and c in rows[0] else np.full(n, np.nan)
               for c in _FLOAT_COLUMNS}
        return cls(method=method or path.stem, k=np.array([int(r["iter"]) for r in rows], dtype=np.int64),
                   clamped=np.zeros(n, dtype=bool), **col)


class _Builder:
    def __init__(self, store: bool):
        self.rows: list[dict] = []
        self.xs = [] if store else None
        self.ys = [] if store else None

    def add(self, k, f_gap, grad_sq, potential, dist_sq, x=None, y=None):
        best = f_gap if not self.rows else min(self.rows[-1]["best_gap"], f_gap)
        if math.isnan(best) and self.rows:
            best = self.rows[-1]["best_gap"]
        self.rows.append(dict(k=k, f_gap=f_gap, grad_sq=grad_sq, step_or_mu=math.nan, beta=math.nan,
                              potential=potential, best_gap=best, ratio=math.nan, clamped=False,
                              dist_sq=dist_sq))
        if self.xs is not None:
            self.xs.append(None if x is None else np.array(x))
            self.ys.append(None if y is None else np.array(y))

    def set_last(self, **kw):
        self.rows[-1].update(kw)

    def build(self, method: str, reason: str) -> RunTrace:
        cols = {c: np.array([r[c] for r in self.rows], dtype=np.float64) for c in _FLOAT_COLUMNS}
        return RunTrace(method=method, k=np.array([r["k"] for r in self.rows], dtype=np.int64),
                        clamped=np.array([r["clamped"] for r in self.rows], dtype=bool),
                        reason=reason, xs=self.xs, ys=self.ys, **cols)


def _finite(*vals) -> bool:
    return all(math.isfinite(v) for v in vals)


def run(problem, method, x0, *, max_iter: int = 1000, gap_tol: float | None = None,
        grad_tol: float | None = None, potential: PotentialSpec | None = None,
        store_iterates: bool = False) -> RunTrace:
    """Iterate ``method`` from ``x0`` and record a :class:`RunTrace`.

    ``method`` is a registered name or a :class:`MethodSpec`. Stops when the
    best gap reaches ``gap_tol`` or the squared gradient norm (gradient
    mapping for composite problems) reaches ``grad_tol`` (reason
    ``converged``), after ``max_iter`` steps (``budget``), when an adaptive
    rule meets an optimal point (``gradient_vanished``) or on NaN/Inf
    (``nonfinite``, with the offending row kept for diagnosis).
    """
    spec = resolve_method(method, problem) if isinstance(method, str) else method
    composite = isinstance(problem, CompositeOracle)
    x0 = np.array(x0, dtype=np.float64).ravel()
    if x0.size != problem.dim:
        raise ValueError(f"x0 has length {x0.size}, problem dimension is {problem.dim}")
    if spec.family == "gd" and spec.step.needs_f_star and composite:
        raise ConfigError(f"{spec.name} is not defined for composite problems")
    f_star = problem.f_star
    needs = (spec.family == "gd" and spec.step.needs_f_star) or (spec.family == "agm" and spec.momentum.adaptive)
    if needs and f_star is None:
        raise MissingFStar(f"{spec.name} needs the optimal value")
    x_star = problem.x_star

    def measure(point, partner):
        gap = problem.value(point) - f_star if f_star is not None else math.nan
        if composite:
            gsq = gradient_mapping_sq(problem, point)
        else:
            g = problem.gradient(point)
            gsq = float(g @ g)
        pot = math.nan
        if potential is not None and not math.isnan(gap):
            pot = potential_from_parts(potential, partner, point, gap)
        dist = math.nan
        if x_star is not None:
            d = point - x_star
            dist = float(d @ d)
        return gap, gsq, pot, dist

    def done(b: _Builder) -> bool:
        r = b.rows[-1]
        return ((gap_tol is not None and r["best_gap"] <= gap_tol)
                or (grad_tol is not None and r["grad_sq"] <= grad_tol))

    b = _Builder(store_iterates)
    reason = "budget"
    clamp_count = 0
    if spec.family == "gd":
        x = x0
        for k in range(max_iter + 1):
            gap, gsq, pot, dist = measure(x, x)
            b.add(k, gap, gsq, pot, dist, x=x)
            if not _finite(gsq, *(v for v in (gap,) if f_star is not None)) or not np.all(np.isfinite(x)):
                reason = "nonfinite"
                break
            if done(b):
                reason = "converged"
                break
            if k == max_iter:
                break
            if composite:
                x = prox_gd_step(problem, x, spec.step.step)
                b.set_last(step_or_mu=spec.step.step)
                continue
            try:
                x, gamma = polyak_gd_step(problem, x, spec.step, k=k)
            except GradientVanished:
                reason = "gradient_vanished"
                break
            b.set_last(step_or_mu=gamma)
    else:
        state = IterateState.start(x0)
        advance = prox_agm_step if composite else agm_step
        for k in range(max_iter + 1):
            gap, gsq, pot, dist = measure(state.y, state.x)
            b.add(k, gap, gsq, pot, dist, x=state.x, y=state.y)
            if not _finite(gsq, *(v for v in (gap,) if f_star is not None)) or not (
                    np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.y))):
                reason = "nonfinite"
                break
            if done(b):
                reason = "converged"
                break
            if k == max_iter:
                break
            try:
                state, mu_t, beta = advance(problem, state, spec.momentum)
            except GradientVanished as exc:
                point = exc.point
                gap, gsq, pot, dist = measure(point, point)
                b.add(k + 1, gap, gsq, pot, dist, x=point, y=point)
                reason = "gradient_vanished"
                break
            clamp_count += state.last_clamped
            b.set_last(step_or_mu=mu_t, beta=beta, ratio=state.last_ratio, clamped=state.last_clamped)
    if clamp_count:
        logger.warning("%s: momentum estimate clamped to [%g L, L] at %d iterations",
                       spec.name, MU_TILDE_FLOOR, clamp_count)
    return b.build(spec.name, reason)


def switch_index(trace: RunTrace, mu: float, L: float, raw: bool = True) -> float:
    """First row whose momentum estimate is at most ``sqrt(L mu)``.

    Uses the unclamped ratio when ``raw`` and the applied estimate
    otherwise; returns ``math.inf`` when it never happens.
    """
    vals = trace.ratio if raw else trace.step_or_mu
    hit = np.nonzero(vals <= math.sqrt(L * mu))[0]
    return float(trace.k[hit[0]]) if hit.size else math.inf
