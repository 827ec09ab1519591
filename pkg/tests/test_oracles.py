import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyakagm import oracles
from polyakagm.certificates import interpolation_gap
from polyakagm.errors import MissingFStar
from polyakagm.oracles import CompositeOracle, RegularityClass


def central_difference(f, x, h):
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def sample_problems(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((30, 5))
    y = np.sign(rng.standard_normal(30))
    return {
        "quadratic": oracles.random_quadratic(6, 0.05, 2.0, rng, target=rng.standard_normal(6)),
        "convex_quadratic": oracles.random_quadratic(6, 0.0, 1.0, rng, target=rng.standard_normal(6)),
        "least_squares": oracles.make_least_squares(A, rng.standard_normal(30)),
        "logistic": oracles.make_logistic(A, y, 1e-3),
        "lasso_smooth": oracles.make_lasso(A, rng.standard_normal(30), 0.5).smooth,
    }


# -- regularity class -------------------------------------------------------------


def test_regularity_class_validation():
    assert RegularityClass(0.01, 1.0).kappa == pytest.approx(0.01)
    assert RegularityClass(1.0, 1.0).kappa == 1.0
    for mu, L in [(-0.1, 1.0), (2.0, 1.0), (0.0, 0.0), (0.0, math.inf)]:
        with pytest.raises(ValueError):
            RegularityClass(mu, L)


def test_oracles_are_immutable():
    q = oracles.make_quadratic(np.eye(2), np.zeros(2))
    with pytest.raises(dataclasses.FrozenInstanceError):
        q.f_star = 1.0
    q2 = q.with_f_star(3.0, confident=False)
    assert q.f_star == 0.0 and q2.f_star == 3.0 and not q2.f_star_confident


# -- quadratics ---------------------------------------------------------------------


def test_isotropic_quadratic():
    q = oracles.make_quadratic(np.eye(3), np.zeros(3))
    e1 = np.array([1.0, 0.0, 0.0])
    assert q.value(e1) == 0.5
    np.testing.assert_array_equal(q.gradient(e1), e1)
    assert q.L == pytest.approx(1.0, rel=1e-12)
    assert q.mu == pytest.approx(1.0, rel=1e-12)


def test_diagonal_quadratic_class():
    q = oracles.make_quadratic(np.diag([0.01, 1.0]), np.zeros(2))
    assert q.mu == pytest.approx(0.01, rel=1e-10)
    assert q.L == pytest.approx(1.0, rel=1e-12)
    assert q.f_star == 0.0
    np.testing.assert_array_equal(q.x_star, [0.0, 0.0])


def test_random_gram_constants_match_dense_eigensolver(rng):
    A = rng.standard_normal((20, 20))
    G = A.T @ A
    ev = np.linalg.eigvalsh(G)
    q = oracles.make_quadratic(G, np.zeros(20))
    assert q.L == pytest.approx(ev[-1], rel=1e-8)
    assert q.mu == pytest.approx(ev[0], rel=1e-8)


def test_singular_matrix_gives_zero_mu(rng):
    B = rng.standard_normal((3, 6))
    q = oracles.make_quadratic(B.T @ B, np.zeros(6))
    assert q.mu == 0.0


def test_quadratic_errors():
    with pytest.raises(ValueError, match="symmetric"):
        oracles.make_quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
    with pytest.raises(ValueError, match="zero matrix"):
        oracles.make_quadratic(np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        oracles.make_quadratic(np.eye(2), np.zeros(3))


def test_least_squares_optimum(rng):
    A = rng.standard_normal((15, 4))
    b = rng.standard_normal(15)
    q = oracles.make_least_squares(A, b)
    assert np.linalg.norm(q.gradient(q.x_star)) < 1e-10
    assert q.value(q.x_star) == pytest.approx(q.f_star, abs=1e-14)
    assert q.mu == pytest.approx(np.linalg.eigvalsh(A.T @ A)[0], rel=1e-8)


# -- logistic ------------------------------------------------------------------------


def test_logistic_zero_feature():
    reg = 0.3
    A = np.zeros((1, 3))
    with pytest.raises(ValueError):
        oracles.make_logistic(A, [1.0], 0.0)  # L = 0
    q = oracles.make_logistic(A, [1.0], reg)
    x = np.array([1.0, -2.0, 0.5])
    assert q.value(x) == pytest.approx(math.log(2) + reg / 2 * x @ x, rel=1e-14)


def test_logistic_separable_infimum():
    q = oracles.make_logistic(np.array([[1.0, 0.0]]), [1.0], 0.0)
    vals = [q.value(np.array([t, 0.0])) for t in (1.0, 10.0, 100.0, 1000.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-300 or vals[-1] == 0.0
    assert q.mu == 0.0 and q.f_star is None


def test_logistic_constants(rng):
    A = rng.standard_normal((30, 5))
    q = oracles.make_logistic(A, np.sign(rng.standard_normal(30)), 1e-3)
    assert q.mu == 1e-3
    assert q.L == pytest.approx(np.linalg.norm(A, 2) ** 2 / 120 + 1e-3, rel=1e-9)


def test_logistic_errors(rng):
    A = rng.standard_normal((4, 2))
    with pytest.raises(ValueError, match="labels"):
        oracles.make_logistic(A, [0, 1, 1, 0], 0.1)
    with pytest.raises(ValueError):
        oracles.make_logistic(np.zeros((0, 2)), [], 0.1)
    with pytest.raises(ValueError):
        oracles.make_logistic(A, [1, -1, 1, -1], -1.0)
    with pytest.raises(MissingFStar):
        oracles.make_logistic(A, [1, -1, 1, -1], 0.1).gap(np.zeros(2))


def test_logistic_presolve_is_stable_across_starts(rng):
    A = rng.standard_normal((30, 5))
    q = oracles.make_logistic(A, np.sign(rng.standard_normal(30)), 1e-3)
    e1 = oracles.estimate_f_star(q, budget=1_000_000, seed=1)
    e2 = oracles.estimate_f_star(q, budget=1_000_000, seed=2)
    assert e1.confident and e2.confident
    assert abs(e1 - e2) <= 1e-12
    # over-solved reference: no early stop, fixed long budget
    ref = oracles.estimate_f_star(q, budget=50_000, tolerance=0.0, seed=3)
    assert abs(e1 - ref) <= 1e-12
    assert not ref.confident


# -- lasso ---------------------------------------------------------------------------


def test_lasso_prox_soft_threshold():
    p = oracles.make_lasso(np.eye(2), [0.0, 0.0], 1.0)
    np.testing.assert_array_equal(p.prox(np.array([2.0, -0.5]), 1.0), [1.0, 0.0])


def test_lasso_zero_target():
    p = oracles.make_lasso(np.eye(3), np.zeros(3), 2.0)
    est = oracles.estimate_f_star(p)
    assert est == pytest.approx(0.0, abs=1e-14)
    assert p.value(np.zeros(3)) == 0.0


def test_lasso_closed_form_instance():
    p = oracles.make_lasso(np.eye(2), [3.0, 0.2], 1.0)
    assert p.value(np.array([2.0, 0.0])) == pytest.approx(2.52, abs=1e-15)
    est = oracles.estimate_f_star(p)
    assert est == pytest.approx(2.52, abs=1e-10)
    np.testing.assert_allclose(est.x_best, [2.0, 0.0], atol=1e-10)
    assert p.mu == pytest.approx(1.0) and p.L == pytest.approx(1.0)


def test_lasso_errors():
    with pytest.raises(ValueError):
        oracles.make_lasso(np.eye(2), [1.0, 2.0, 3.0], 1.0)
    with pytest.raises(ValueError):
        oracles.make_lasso(np.eye(2), [1.0, 2.0], 0.0)


def test_lasso_wide_matrix_is_not_strongly_convex(rng):
    p = oracles.make_lasso(rng.standard_normal((3, 5)), rng.standard_normal(3), 1.0)
    assert p.mu == 0.0


@given(seed=st.integers(0, 2**31 - 1), t=st.floats(1e-3, 10.0), lam=st.floats(1e-3, 5.0))
@settings(max_examples=50, deadline=None)
def test_prox_is_the_minimiser(seed, t, lam):
    rng = np.random.default_rng(seed)
    p = oracles.make_lasso(np.eye(4), np.zeros(4), lam)
    x = rng.normal(scale=3.0, size=4)
    z = p.prox(x, t)

    def obj(y):
        return p.nonsmooth_value(y) + (y - x) @ (y - x) / (2 * t)

    ys = z + rng.normal(scale=0.5, size=(200, 4))
    assert all(obj(z) <= obj(y) + 1e-12 for y in ys)


def test_without_nonsmooth_wraps_smooth(rng):
    q = oracles.random_quadratic(4, 0.1, 1.0, rng)
    c = CompositeOracle.without_nonsmooth(q)
    x = rng.standard_normal(4)
    assert c.value(x) == q.value(x)
    np.testing.assert_array_equal(c.prox(x, 0.3), x)
    assert c.F_star == q.f_star and c.f_star == q.f_star


# -- presolve --------------------------------------------------------------------------


def test_presolve_on_quadratic_with_known_minimiser(rng):
    q = oracles.random_quadratic(8, 0.01, 1.0, rng, target=rng.standard_normal(8))
    est = oracles.estimate_f_star(q)
    assert est == pytest.approx(q.f_star, abs=1e-12)
    assert est >= q.f_star - 1e-15


def test_presolve_low_confidence_flag(rng):
    q = oracles.random_quadratic(8, 1e-4, 1.0, rng, target=rng.standard_normal(8))
    est = oracles.estimate_f_star(q, budget=5)
    assert not est.confident and est.iterations == 5
    assert est >= q.f_star


def test_presolve_generic_oracle(rng):
    base = oracles.random_quadratic(5, 0.1, 1.0, rng, target=rng.standard_normal(5))
    generic = dataclasses.replace(base, kind="generic")
    assert oracles.estimate_f_star(generic) == pytest.approx(0.0, abs=1e-12)


# -- invariants ------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["quadratic", "convex_quadratic", "least_squares", "logistic", "lasso_smooth"])
def test_gradient_matches_finite_differences(name):
    q = sample_problems(7)[name]
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.normal(scale=2.0, size=q.dim)
        h = 1e-6 * (1 + np.linalg.norm(x))
        g = q.gradient(x)
        fd = central_difference(q.value, x, h)
        assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_interpolation_inequality_holds(seed):
    rng = np.random.default_rng(seed)
    for q in sample_problems(seed).values():
        X = rng.normal(scale=3.0, size=(1000, q.dim))
        Y = rng.normal(scale=3.0, size=(1000, q.dim))
        fx = np.array([q.value(x) for x in X])
        fy = np.array([q.value(y) for y in Y])
        gx = np.array([q.gradient(x) for x in X])
        gy = np.array([q.gradient(y) for y in Y])
        lhs = interpolation_gap(fx, fy, X, Y, gx, gy, q.mu, q.L)
        scale = np.maximum(1.0, np.maximum(np.abs(fx), np.abs(fy)))
        assert np.all(lhs <= 1e-10 * scale)


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_gap_sandwich(seed):
    rng = np.random.default_rng(seed)
    for q in (oracles.random_quadratic(5, 0.05, 2.0, rng, target=rng.standard_normal(5)),
              oracles.synthetic_least_squares(12, 4, 1e-2, rng)):
        for _ in range(20):
            x = rng.normal(scale=5.0, size=q.dim)
            d = float((x - q.x_star) @ (x - q.x_star))
            gap = q.value(x) - q.f_star
            assert gap >= q.mu / 2 * d - 1e-10 * (1 + gap)
            assert gap <= q.L / 2 * d + 1e-10 * (1 + gap)


def test_rescaled_quadratic_spectrum(rng):
    q = oracles.rescaled_gram_quadratic(208, 60, 0.01, 1.0, rng)
    ev = np.linalg.eigvalsh(q.params["matrix"])
    assert ev[0] == pytest.approx(0.01, rel=1e-9)
    assert ev[-1] == pytest.approx(1.0, rel=1e-12)


def test_synthetic_least_squares_spectrum(rng):
    q = oracles.synthetic_least_squares(200, 50, 1e-3, rng)
    ev = np.linalg.eigvalsh(q.params["features"].T @ q.params["features"])
    assert ev[0] == pytest.approx(1e-3, rel=1e-8)
    assert ev[-1] == pytest.approx(1.0, rel=1e-10)
