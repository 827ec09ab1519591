"""Objective oracles with known regularity constants and optimal values.

An oracle bundles ``value`` and ``gradient`` callables with the class
F_{mu,L} the function belongs to and, when known, its optimal value. Oracles
are immutable: attaching an optimal value returns a new object.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from . import kernels
from .errors import MissingFStar

logger = logging.getLogger(__name__)

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000


@dataclass(frozen=True)
class RegularityClass:
    """Strong convexity ``mu`` and gradient Lipschitz constant ``L``.

    ``mu == L`` is accepted (isotropic quadratics); rate formulas whose
    denominators vanish there reject it themselves.
    """

    mu: float
    L: float

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0.0):
            raise ValueError(f"L must be positive and finite, got {self.L}")
        if not (0.0 <= self.mu <= self.L):
            raise ValueError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.L}")

    @property
    def kappa(self) -> float:
        """Inverse condition number mu / L."""
        return self.mu / self.L


@dataclass(frozen=True)
class SmoothOracle:
    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    regularity: RegularityClass
    f_star: float | None = None
    x_star: np.ndarray | None = None
    f_star_confident: bool = True
    kind: str = "generic"
    params: Mapping[str, Any] = field(default_factory=dict, repr=False)

    @property
    def mu(self) -> float:
        return self.regularity.mu

    @property
    def L(self) -> float:
        return self.regularity.L

    def with_f_star(self, f_star: float, confident: bool = True) -> "SmoothOracle":
        return dataclasses.replace(self, f_star=float(f_star), f_star_confident=bool(confident))

    def gap(self, x) -> float:
        if self.f_star is None:
            raise MissingFStar("oracle has no optimal value; run estimate_f_star first")
        return self.value(x) - self.f_star


@dataclass(frozen=True)
class CompositeOracle:
    """``F = f + h`` with ``f`` smooth and ``h`` convex with a cheap prox.

    ``prox(x, t)`` returns ``argmin_y h(y) + ||y - x||^2 / (2 t)``.
    """

    smooth: SmoothOracle
    nonsmooth_value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]
    F_star: float | None = None
    x_star: np.ndarray | None = None
    F_star_confident: bool = True
    kind: str = "composite"
    params: Mapping[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def without_nonsmooth(cls, smooth: SmoothOracle) -> "CompositeOracle":
        """Wrap a smooth oracle with ``h = 0`` (prox is the identity)."""
        return cls(
            smooth=smooth,
            nonsmooth_value=lambda x: 0.0,
            prox=lambda x, t: np.array(x, dtype=np.float64, copy=True),
            F_star=smooth.f_star,
            x_star=smooth.x_star,
            F_star_confident=smooth.f_star_confident,
        )

    @property
    def dim(self) -> int:
        return self.smooth.dim

    @property
    def regularity(self) -> RegularityClass:
        return self.smooth.regularity

    @property
    def mu(self) -> float:
        return self.smooth.mu

    @property
    def L(self) -> float:
        return self.smooth.L

    @property
    def f_star(self) -> float | None:
        # uniform access for code that handles both oracle types
        return self.F_star

    def value(self, x) -> float:
        return self.smooth.value(x) + self.nonsmooth_value(x)

    def gradient(self, x) -> np.ndarray:
        return self.smooth.gradient(x)

    def with_f_star(self, F_star: float, confident: bool = True) -> "CompositeOracle":
        return dataclasses.replace(self, F_star=float(F_star), F_star_confident=bool(confident))

    def gap(self, x) -> float:
        if self.F_star is None:
            raise MissingFStar("composite oracle has no optimal value F*")
        return self.value(x) - self.F_star


# -- spectral helpers -------------------------------------------------------


def _start_vector(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(n)


def largest_eigenvalue(matrix, seed: int = 0) -> float:
    """Top eigenvalue of a symmetric PSD matrix by power iteration."""
    matrix = np.asarray(matrix, dtype=np.float64)
    lam, it, ok = kernels.power_iteration(matrix, _start_vector(matrix.shape[0], seed), POWER_TOL, POWER_MAX_ITER)
    if not ok:
        logger.warning("power iteration hit %d iterations without meeting tolerance", it)
    return lam


def smallest_eigenvalue(matrix, top: float | None = None, seed: int = 1) -> float:
    """Bottom eigenvalue of a symmetric PSD matrix by inverse iteration.

    Power iteration runs on the inverse (tolerance 1e-14); a failed Cholesky
    factorisation or a value below ``1e-12 * top`` is reported as 0.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if top is None:
        top = largest_eigenvalue(matrix)
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        return 0.0
    inv = np.linalg.inv(matrix)
    inv = 0.5 * (inv + inv.T)
    lam, it, ok = kernels.power_iteration(inv, _start_vector(matrix.shape[0], seed), 1e-14, POWER_MAX_ITER)
    if not ok:
        logger.warning("inverse iteration hit %d iterations; smallest eigenvalue is approximate", it)
    if not lam > 0.0:
        return 0.0
    mu = min(1.0 / lam, top)
    return mu if mu > 1e-12 * top else 0.0


def _as_matrix(features) -> np.ndarray:
    A = np.asarray(features, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("features must be a non-empty 2-D array")
    if not np.all(np.isfinite(A)):
        raise ValueError("features contain NaN or Inf")
    return A


# -- problem constructors ---------------------------------------------------


def make_quadratic(matrix, target, *, mu: float | None = None, L: float | None = None) -> SmoothOracle:
    """``f(x) = 0.5 (x - c)^T A (x - c)`` with ``f* = 0`` and ``x* = c``.

    ``mu`` and ``L`` default to the extreme eigenvalues of ``A`` estimated by
    power iteration; pass them when they are known exactly.
    """
    A = np.asarray(matrix, dtype=np.float64)
    c = np.asarray(target, dtype=np.float64).ravel()
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] != c.size:
        raise ValueError("target length does not match the matrix")
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if scale == 0.0:
        raise ValueError("zero matrix: L = 0 is not a valid smoothness constant")
    if np.max(np.abs(A - A.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    if L is None:
        L = largest_eigenvalue(A)
    if mu is None:
        mu = smallest_eigenvalue(A, top=L)
    mu = min(float(mu), float(L))

    def value(x):
        r = np.asarray(x, dtype=np.float64) - c
        return 0.5 * float(r @ (A @ r))

    def gradient(x):
        return A @ (np.asarray(x, dtype=np.float64) - c)

    return SmoothOracle(
        dim=c.size, value=value, gradient=gradient,
        regularity=RegularityClass(mu, float(L)),
        f_star=0.0, x_star=c.copy(), kind="quadratic", params={"matrix": A, "target": c},
    )


def make_least_squares(features, labels, *, mu: float | None = None, L: float | None = None) -> SmoothOracle:
    """``f(x) = 0.5 ||A x - b||^2`` with ``x*`` from a least-squares solve."""
    A = _as_matrix(features)
    b = np.asarray(labels, dtype=np.float64).ravel()
    if A.shape[0] != b.size:
        raise ValueError("features and labels disagree on the number of samples")
    gram = A.T @ A
    if L is None:
        L = largest_eigenvalue(gram)
    if mu is None:
        mu = smallest_eigenvalue(gram, top=L) if A.shape[0] >= A.shape[1] else 0.0
        if mu <= 1e-12 * L:
            mu = 0.0
    x_star = np.linalg.lstsq(A, b, rcond=None)[0]
    r = A @ x_star - b
    f_star = 0.5 * float(r @ r)

    def value(x):
        res = A @ np.asarray(x, dtype=np.float64) - b
        return 0.5 * float(res @ res)

    def gradient(x):
        return A.T @ (A @ np.asarray(x, dtype=np.float64) - b)

    return SmoothOracle(
        dim=A.shape[1], value=value, gradient=gradient,
        regularity=RegularityClass(min(float(mu), float(L)), float(L)),
        f_star=f_star, x_star=x_star, kind="least_squares", params={"features": A, "labels": b},
    )


def make_logistic(features, labels, reg: float) -> SmoothOracle:
    """Mean logistic loss plus ``reg/2 ||x||^2``; labels must be +-1.

    ``L = ||A||_op^2 / (4 m) + reg`` and ``mu = reg``. The optimal value is
    left unset; see :func:`estimate_f_star`.
    """
    A = _as_matrix(features)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if A.shape[0] != y.size:
        raise ValueError("features and labels disagree on the number of samples")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("logistic labels must be -1 or +1")
    if reg < 0:
        raise ValueError("regularisation weight must be nonnegative")
    m = A.shape[0]
    op_sq = largest_eigenvalue(A.T @ A) if np.any(A) else 0.0
    L = op_sq / (4.0 * m) + reg
    if L == 0.0:
        raise ValueError("all-zero features with reg = 0 give L = 0")

    def value(x):
        z = y * (A @ np.asarray(x, dtype=np.float64))
        return float(np.logaddexp(0.0, -z).mean()) + 0.5 * reg * float(np.dot(x, x))

    def gradient(x):
        x = np.asarray(x, dtype=np.float64)
        z = y * (A @ x)
        s = 0.5 * (1.0 - np.tanh(0.5 * z))
        return -(A.T @ (y * s)) / m + reg * x

    return SmoothOracle(
        dim=A.shape[1], value=value, gradient=gradient,
        regularity=RegularityClass(float(reg), float(L)),
        kind="logistic", params={"features": A, "labels": y, "reg": float(reg)},
    )


def make_lasso(features, labels, l1_weight: float) -> CompositeOracle:
    """``0.5 ||A x - b||^2 + l1_weight ||x||_1`` with soft-thresholding prox."""
    A = _as_matrix(features)
    b = np.asarray(labels, dtype=np.float64).ravel()
    if A.shape[0] != b.size:
        raise ValueError("features and labels disagree on the number of samples")
    if not l1_weight > 0:
        raise ValueError("l1_weight must be positive")
    gram = A.T @ A
    L = largest_eigenvalue(gram)
    if L == 0.0:
        raise ValueError("all-zero features give L = 0")
    mu = 0.0
    if A.shape[0] >= A.shape[1]:
        mu = smallest_eigenvalue(gram, top=L)
        if mu <= 1e-12 * L:
            mu = 0.0

    def value(x):
        res = A @ np.asarray(x, dtype=np.float64) - b
        return 0.5 * float(res @ res)

    def gradient(x):
        return A.T @ (A @ np.asarray(x, dtype=np.float64) - b)

    smooth = SmoothOracle(
        dim=A.shape[1], value=value, gradient=gradient,
        regularity=RegularityClass(mu, L), kind="least_squares",
        params={"features": A, "labels": b},
    )
    lam = float(l1_weight)
    return CompositeOracle(
        smooth=smooth,
        nonsmooth_value=lambda x: lam * float(np.abs(x).sum()),
        prox=lambda x, t: kernels.soft_threshold(x, t * lam),
        kind="lasso",
        params={"features": A, "labels": b, "l1_weight": lam},
    )


# -- synthetic problems -----------------------------------------------------


def random_spectrum(n: int, mu: float, L: float, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues containing ``mu`` and ``L`` exactly, others in between.

    With ``mu == 0`` a quarter of the spectrum is zero (convex, not strongly
    convex); interior values are log-uniform when ``mu > 0``.
    """
    if n < 2:
        return np.array([L])
    if mu > 0:
        inner = np.exp(rng.uniform(math.log(mu), math.log(L), n - 2))
        return np.concatenate([[mu], inner, [L]])
    zeros = max(1, n // 4)
    inner = rng.uniform(0.0, L, n - zeros - 1)
    return np.concatenate([np.zeros(zeros), inner, [L]])


def random_quadratic(n: int, mu: float, L: float, rng: np.random.Generator, *, target=None) -> SmoothOracle:
    """Randomly rotated quadratic with spectrum from :func:`random_spectrum`."""
    ev = random_spectrum(n, mu, L, rng)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    H = (Q * ev) @ Q.T
    H = 0.5 * (H + H.T)
    c = np.zeros(n) if target is None else np.asarray(target, dtype=np.float64)
    return make_quadratic(H, c, mu=mu, L=L)


def synthetic_least_squares(m: int, n: int, kappa: float, rng: np.random.Generator, L: float = 1.0) -> SmoothOracle:
    """Least squares whose Gram matrix has log-spaced spectrum in [kappa L, L]."""
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = L * np.logspace(0.0, math.log10(kappa), n)
    A = (U * np.sqrt(ev)) @ V.T
    b = rng.standard_normal(m)
    return make_least_squares(A, b, mu=kappa * L, L=L)


def rescaled_gram_quadratic(m: int, n: int, mu: float, L: float, rng: np.random.Generator) -> SmoothOracle:
    """Quadratic built from a standardised Gaussian design, rescaled to F_{mu,L}.

    The Gram matrix of the standardised ``m x n`` design is mapped affinely so
    that its spectrum spans exactly ``[mu, L]``; the minimiser is random.
    """
    from .data import Dataset, standardize

    raw = Dataset(features=rng.standard_normal((m, n)), labels=np.ones(m), name="gaussian")
    X = standardize(raw).features
    G = X.T @ X / m
    ev = np.linalg.eigvalsh(G)
    H = (G - ev[0] * np.eye(n)) * ((L - mu) / (ev[-1] - ev[0])) + mu * np.eye(n)
    H = 0.5 * (H + H.T)
    return make_quadratic(H, rng.standard_normal(n), mu=mu, L=L)


# -- optimal value presolve -------------------------------------------------


class FStarEstimate(float):
    """A float carrying presolve diagnostics.

    ``confident`` is False when the iteration budget ran out before the
    stopping tolerance was met.
    """

    confident: bool
    iterations: int
    residual: float
    x_best: np.ndarray

    def __new__(cls, value, *, confident, iterations, residual, x_best):
        obj = super().__new__(cls, value)
        obj.confident = bool(confident)
        obj.iterations = int(iterations)
        obj.residual = float(residual)
        obj.x_best = x_best
        return obj


def _agm_presolve(value, grad_like, step, L, mu, x0, budget, tolerance):
    """Python momentum loop; ``grad_like(x)`` returns the stopping residual."""
    x = np.array(x0, dtype=np.float64)
    y = x.copy()
    f_best, x_best = value(x), x.copy()
    beta_const = None
    if mu > 0:
        beta_const = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
    t = 1.0
    res = grad_like(x)
    if res < tolerance:
        return f_best, x_best, 0, res, True
    for k in range(1, budget + 1):
        y_next = step(x)
        f_y = value(y_next)
        if f_y < f_best:
            f_best, x_best = f_y, y_next.copy()
        res = grad_like(y_next)
        if res < tolerance:
            return f_best, x_best, k, res, True
        if beta_const is not None:
            beta = beta_const
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            t = t_next
        x = y_next + beta * (y_next - y)
        y = y_next
    return f_best, x_best, budget, res, False


def estimate_f_star(problem, budget: int = 100_000, tolerance: float = 1e-20,
                    x0=None, seed: int = 0) -> FStarEstimate:
    """Upper estimate of the optimal value by an over-solved momentum run.

    Runs the constant-momentum accelerated method (the 1983 schedule when
    ``mu = 0``), or its proximal form for composite problems, until the
    squared gradient norm (gradient-mapping norm for composites) drops below
    ``tolerance`` or ``budget`` iterations are spent. Returns the best
    objective value seen.
    """
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = rng.standard_normal(problem.dim)
    L, mu = problem.L, problem.mu

    if isinstance(problem, CompositeOracle):
        smooth = problem.smooth

        def step(x):
            return problem.prox(x - smooth.gradient(x) / L, 1.0 / L)

        def residual(x):
            d = x - step(x)
            return L * L * float(d @ d)

        f, xb, it, res, ok = _agm_presolve(problem.value, residual, step, L, mu, x0, budget, tolerance)
    elif problem.kind == "logistic":
        p = problem.params
        f, xb, it, res, ok = kernels.agm_logistic(p["features"], p["labels"], p["reg"], L, mu, x0, budget, tolerance)
    elif problem.kind == "quadratic":
        p = problem.params
        f, xb, it, res, ok = kernels.agm_quadratic(p["matrix"], p["target"], L, mu, x0, budget, tolerance)
    else:
        def sq_grad(x):
            g = problem.gradient(x)
            return float(g @ g)

        f, xb, it, res, ok = _agm_presolve(
            problem.value, sq_grad, lambda x: x - problem.gradient(x) / L, L, mu, x0, budget, tolerance
        )
    if not ok:
        logger.warning("f* presolve used its %d-iteration budget (residual %.3g > %.3g); estimate is low-confidence",
                       budget, res, tolerance)
    return FStarEstimate(f, confident=ok, iterations=it, residual=res, x_best=xb)
