import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyakagm import certificates as C
from polyakagm.rates import intermediate_bracket

CLASSES = [(0.1, 1.0), (0.01, 1.0), (1e-3, 1.0), (0.5, 2.0)]


@pytest.mark.parametrize("tag", C.TAGS)
@pytest.mark.parametrize("mu,L", CLASSES)
def test_identities_hold(tag, mu, L):
    rng = np.random.default_rng(1)
    for p in C.default_params(tag, mu, L, 5, rng):
        rep = C.check_identity(tag, mu, L, p, samples=300, seed=2)
        assert rep.passed, str(rep)


def test_distance_identity_at_peak_step():
    rep = C.check_identity("gd_distance", 0.1, 1.0, 2 / 1.1, samples=1000, dim=4)
    assert rep.max_residual < 1e-10
    cert = C.certificate("gd_distance", 0.1, 1.0, 2 / 1.1)
    assert cert.multipliers["l3"] == pytest.approx(0.0, abs=1e-15)


def test_robust_identity_with_zero_momentum():
    cert = C.certificate("robust", 0.1, 1.0, 0.0)
    assert cert.nonneg["residual"] == pytest.approx(0.9 / 2)  # (1 - beta^2) rho / (2L)
    assert C.check_identity("robust", 0.1, 1.0, 0.0).max_residual < 1e-10


def test_adaptive_identity_at_L():
    cert = C.certificate("adaptive", 0.1, 1.0, 1.0)
    assert cert.extra["rho"] == 0.5 and cert.extra["beta"] == 0.0
    # (4 - (1 - 2) - 1) / (2 * 2 * 4)
    assert cert.extra["coef"] == pytest.approx(4 / 16)
    assert C.check_identity("adaptive", 0.1, 1.0, 1.0).passed


@pytest.mark.parametrize("tag", C.TAGS)
def test_mutated_multipliers_are_detected(tag):
    mu, L = 0.1, 1.0
    p = C.default_params(tag, mu, L, 3, np.random.default_rng(0))[2]
    names = C.certificate(tag, mu, L, p).multipliers
    for name in names:
        rep = C.check_identity(tag, mu, L, p, samples=50, perturb={name: 1e-3})
        assert rep.max_residual > 1e-5, name
        assert not rep.passed
    with pytest.raises(KeyError):
        C.check_identity(tag, mu, L, p, samples=5, perturb={"nope": 1.0})


@pytest.mark.parametrize("tag", C.TAGS)
def test_sign_conditions_on_dense_parameter_grid(tag):
    rng = np.random.default_rng(3)
    worst = math.inf
    for mu, L in CLASSES + [(1e-6, 1.0), (0.9, 1.0)]:
        for p in C.default_params(tag, mu, L, 10_000 // 6, rng):
            cert = C.certificate(tag, mu, L, float(p))
            worst = min(worst, min(float(v) for v in cert.nonneg.values()))
    assert worst >= -1e-12


@given(scale=st.floats(1e-3, 1e3), tag=st.sampled_from(C.TAGS), seed=st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_identities_are_scale_invariant(scale, tag, seed):
    mu, L = 0.05, 1.0
    rng = np.random.default_rng(seed)
    p = C.default_params(tag, mu, L, 3, rng)[2]
    atoms = C.sample_atoms(20, 3, rng)
    scaled = {k: (v * scale if k in ("x", "y", "xs", "gx", "gy", "g1") else v * scale**2)
              for k, v in atoms.items()}
    assert C.identity_residuals(tag, mu, L, p, scaled).max() <= 1e-10
    assert C.identity_residuals(tag, mu, L, p, atoms).max() <= 1e-10


def test_extended_precision_path_agrees():
    atoms = C.sample_atoms(5, 2, np.random.default_rng(0))
    res = C.identity_residuals("intermediate", 0.01, 1.0, 0.7, atoms, extended=True)
    assert res.max() < 1e-30


def test_parameter_validation():
    with pytest.raises(ValueError):
        C.check_identity("gd_distance", 0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        C.check_identity("gd_gap", 0.1, 1.0, 2.0)
    with pytest.raises(ValueError):
        C.check_identity("robust", 0.1, 1.0, 1.5)
    with pytest.raises(ValueError):
        C.check_identity("adaptive", 0.1, 1.0, 0.0)
    with pytest.raises(ValueError):
        C.check_identity("intermediate", 0.01, 1.0, 0.0)
    with pytest.raises(ValueError):
        C.check_identity("intermediate", 0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        C.check_identity("unknown", 0.1, 1.0, 1.0)


def test_interpolation_gap_is_zero_for_tight_pair():
    # f = L/2 x^2 in 1-D with mu = 0: the upper bound is attained
    x, y = np.array([[1.0]]), np.array([[0.0]])
    val = C.interpolation_gap(np.array([0.5]), np.array([0.0]), x, y, np.array([[1.0]]), np.array([[0.0]]), 0.0, 1.0)
    assert val == pytest.approx(0.0, abs=1e-15)


def test_report_csv_round_trip(tmp_path):
    reps = [C.check_identity(t, 0.1, 1.0, C.default_params(t, 0.1, 1.0, 3, np.random.default_rng(0))[2],
                             samples=10) for t in C.TAGS]
    C.write_reports_csv(reps, tmp_path / "r.csv")
    rows = C.read_reports_csv(tmp_path / "r.csv")
    assert [r["tag"] for r in rows] == list(C.TAGS)
    assert all(float(r["max_residual"]) == rep.max_residual for r, rep in zip(rows, reps))
    assert "PASS" in str(reps[0])


# -- polynomials --------------------------------------------------------------------


def test_polynomial_endpoint_values():
    assert C.gap_low_poly(0.0) == 4
    # the coefficient list sums to 1 (see the decisions ledger for the stated value)
    assert C.gap_low_poly(1.0) == 1
    assert C.coef_high_poly(1.0) == 4
    assert C.gap_high_poly(0.0) == 4


def test_polynomials_nonnegative_on_unit_interval():
    rep = C.check_polynomials(100_000)
    assert rep.passed, str(rep)
    assert rep.max_discrepancy <= 1e-12
    with pytest.raises(ValueError):
        C.check_polynomials(1)


def test_closed_forms_match_direct_evaluation():
    k = np.linspace(1e-6, 1.0, 1001)
    cf, df = C.closed_forms(k), C.direct_forms(k)
    for key in cf:
        np.testing.assert_allclose(cf[key], df[key], atol=1e-12)


def test_bracket_conditions_on_kappa_grid():
    rep = C.check_intermediate_bracket(np.logspace(-8, 0, 1000))
    assert rep.passed, str(rep)
    with pytest.raises(ValueError):
        C.check_intermediate_bracket([0.0])


def test_bracket_at_kappa_one():
    lo, hi = intermediate_bracket(1.0, 1.0)
    assert lo == hi == 0.0
    assert float(C.exact_bracket_gap(1.0)) == pytest.approx(1 / 8)
    assert C.check_intermediate_bracket([1.0]).min_gap == pytest.approx(1 / 8)


def test_bracket_small_kappa_limit():
    gap = C.exact_bracket_gap(1e-8)
    assert 0 < gap < 1e-3
    rep = C.check_intermediate_bracket([1e-8])
    assert rep.min_gap >= -1e-12


def test_bracket_gap_cross_checked_in_extended_precision():
    k = 0.01
    r = 1 / (1 + k**0.75)
    b = (1 - math.sqrt(k)) / (1 + math.sqrt(k))
    exact = C.exact_bracket_gap("0.01", upper=True, digits=60)
    assert exact > 0
    assert r**3 - b * b == pytest.approx(float(exact), rel=1e-12)
    # independent rational evaluation: sqrt(0.01) = 1/10 exactly
    with mpmath.workdps(60):
        rr = 1 / (1 + mpmath.mpf(1) / 10 ** mpmath.mpf(1.5))
        bb = mpmath.mpf(9) / 11
        assert abs((rr**3 - bb**2) - exact) < mpmath.mpf(10) ** -50
