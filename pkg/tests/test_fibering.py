import dataclasses

import mpmath
import numpy as np
import pytest
from conftest import smooth_pair
from hypothesis import given
from hypothesis import strategies as st

from fracnehari import (BranchUnavailableError, FiberingCurve, StatePair,
                        UsageError, build_fibering, classify_nehari,
                        compute_constants, desk_instance, discretize, energy,
                        find_roots, project)
from fracnehari.fibering import MINUS, OFF, PLUS, fibering_table


def closed_form(Q):
    """t phi'(t) = t^2 - Q t^1.5 - t^3, i.e. phi'(t) = t - Q sqrt(t) - t^2."""
    return FiberingCurve.from_coefficients([(2.0, 1.0)], [(1.5, Q)], [(3.0, 1.0)])


def mp_root(Q, lo, hi):
    with mpmath.workdps(40):
        f = lambda t: t - Q * mpmath.sqrt(t) - t ** 2
        return float(mpmath.findroot(f, (mpmath.mpf(lo), mpmath.mpf(hi)),
                                     solver="bisect", tol=mpmath.mpf(10) ** -30))


def positive_pair(sysm, seed):
    u, v = smooth_pair(sysm, seed)
    return StatePair(np.abs(u) + 0.05, np.abs(v) + 0.05)


# -- build and evaluate -----------------------------------------------------------

def test_constant_exponents_give_three_buckets(desk16):
    curve = build_fibering(desk16, positive_pair(desk16, 0))
    assert curve.n_buckets == 3
    assert list(curve.kinetic_exp) == [2.0]
    assert list(curve.concave_exp) == [1.5]
    assert list(curve.convex_exp) == [3.0]


@given(st.integers(0, 10 ** 6))
def test_exact_mode_reproduces_energy(var16, seed):
    pair = StatePair(*smooth_pair(var16, seed))
    curve = build_fibering(var16, pair, 0.0)
    J = energy(var16, pair).J
    scale = curve.P + curve.Q + curve.R
    assert abs(float(curve.evaluate(1.0)) - J) <= 1e-12 * scale


def test_merged_buckets_exact_at_one_and_bounded_elsewhere(var16):
    pair = positive_pair(var16, 1)
    exact = build_fibering(var16, pair, 0.0)
    merged = build_fibering(var16, pair, 1e-3)
    assert merged.n_buckets < exact.n_buckets
    scale = exact.P + exact.Q + exact.R
    assert abs(float(merged.evaluate(1.0)) - float(exact.evaluate(1.0))) <= 1e-12 * scale
    assert float(merged.error_bound(1.0)) == 0.0
    for t in (1e-3, 0.2, 5.0, 80.0):
        err = abs(float(merged.evaluate(t)) - float(exact.evaluate(t)))
        assert err <= float(merged.error_bound(t)) * (1 + 1e-9) + 1e-13 * scale


def test_exponent_ordering_and_signs(var16):
    curve = build_fibering(var16, positive_pair(var16, 2))
    assert curve.concave_exp.max() < curve.kinetic_exp.min()
    assert curve.kinetic_exp.max() < curve.convex_exp.min()
    for arr in (curve.kinetic_coef, curve.concave_coef, curve.convex_coef):
        assert np.all(arr >= 0)


def test_zero_pair_and_bad_t_rejected(desk16):
    with pytest.raises(UsageError):
        build_fibering(desk16, StatePair(np.zeros(desk16.m), np.zeros(desk16.m)))
    with pytest.raises(UsageError):
        closed_form(0.1).evaluate(0.0)
    with pytest.raises(UsageError):
        closed_form(0.1).evaluate(1.0, 3)


def test_phi_vanishes_at_zero():
    assert abs(float(closed_form(0.1).evaluate(1e-14))) < 1e-14


def test_closed_form_slope():
    curve = closed_form(0.0)
    ts = np.array([0.3, 1.0, 2.5])
    assert np.allclose(curve.evaluate(ts, 1), ts - ts ** 2, rtol=1e-14)


@given(st.floats(1e-2, 1e2))
def test_derivatives_match_finite_differences(t):
    curve = closed_form(0.1)
    h = 1e-6 * t
    fd1 = (curve.evaluate(t + h) - curve.evaluate(t - h)) / (2 * h)
    fd2 = (curve.evaluate(t + h, 1) - curve.evaluate(t - h, 1)) / (2 * h)
    s1 = abs(float(curve.f1(t) + curve.f2(t) + curve.f3(t))) / t
    s2 = float(curve.curvature_scale(t))
    assert abs(float(fd1 - curve.evaluate(t, 1))) <= 1e-6 * s1
    assert abs(float(fd2 - curve.evaluate(t, 2))) <= 1e-6 * s2


def test_fibering_table_columns():
    tab = fibering_table(closed_form(0.1), [0.5, 1.0])
    assert tab.shape == (2, 4)
    assert tab[1, 2] == pytest.approx(1 - 0.1 - 1)


# -- roots ------------------------------------------------------------------------

def test_minus_only_when_no_concave_part():
    r = find_roots(closed_form(0.0))
    assert r.t_plus is None
    assert r.t_minus == pytest.approx(1.0, rel=1e-12)
    assert r.regime == "minus-only"


def test_two_roots_match_high_precision_oracle():
    r = find_roots(closed_form(0.1))
    assert r.t_plus == pytest.approx(mp_root(0.1, 0.005, 0.3), abs=1e-9)
    assert r.t_minus == pytest.approx(mp_root(0.1, 0.3, 2.0), abs=1e-9)
    assert r.second_plus > 0 > r.second_minus
    assert r.t_plus < r.t_max_f < r.t_minus


@given(st.floats(1e-4, 0.24))
def test_roots_of_closed_form_family(Q):
    # t - Q sqrt(t) - t^2 has two positive roots for Q < max(sqrt(t) - t^1.5) ~ 0.385
    r = find_roots(closed_form(Q))
    assert r.both
    for t in (r.t_plus, r.t_minus):
        assert abs(t - Q * np.sqrt(t) - t * t) <= 1e-12
    assert r.second_plus > 0 > r.second_minus


def test_plus_only_without_convex_part():
    curve = FiberingCurve.from_coefficients([(2.0, 1.0)], [(1.5, 0.3)])
    r = find_roots(curve)
    assert r.t_minus is None
    assert r.t_plus == pytest.approx(0.09, rel=1e-12)   # t = 0.3 sqrt(t)


def test_no_root_regime_for_large_concave_term():
    r = find_roots(closed_form(5.0))
    assert r.regime == "no-root"
    assert r.t_plus is None and r.t_minus is None


def test_no_root_for_pure_kinetic_curve():
    r = find_roots(FiberingCurve.from_coefficients([(2.0, 1.0)]))
    assert r.regime == "no-root"


@pytest.fixture(scope="module")
def small_lambda_desk():
    sysm = discretize(desk_instance(1.0), 16)
    th = compute_constants(sysm, trials=8)
    lam = th.delta0 / 4
    return sysm.with_parameters(lam, lam)


@given(st.integers(0, 10 ** 6))
def test_root_structure_on_random_directions(small_lambda_desk, seed):
    sysm = small_lambda_desk
    curve = build_fibering(sysm, positive_pair(sysm, seed))
    r = find_roots(curve)
    assert r.both and 0 < r.t_plus < r.t_minus
    assert r.second_plus > 0 > r.second_minus
    # energy levels below delta0: phi(t+) < 0 < phi(t-), zero in between
    assert curve.evaluate(r.t_plus) < 0 < curve.evaluate(r.t_minus)
    assert r.t_plus < r.t_star < r.t_minus
    assert abs(float(curve.evaluate(r.t_star))) <= 1e-10 * (curve.P + curve.Q + curve.R)
    # interlacing: decreasing, increasing, decreasing
    ts = np.geomspace(r.t_plus * 1e-3, r.t_minus * 1e3, 600)
    d = curve.evaluate(ts, 1)
    assert np.all(d[ts < r.t_plus * 0.999] < 0)
    assert np.all(d[(ts > r.t_plus * 1.001) & (ts < r.t_minus * 0.999)] > 0)
    assert np.all(d[ts > r.t_minus * 1.001] < 0)


# -- classification and projection ----------------------------------------------------

def test_zero_pair_is_off_manifold(desk16):
    z = StatePair(np.zeros(desk16.m), np.zeros(desk16.m))
    assert classify_nehari(desk16, z) == OFF


def test_projection_classified_and_idempotent(small_lambda_desk):
    sysm = small_lambda_desk
    pair = positive_pair(sysm, 3)
    for branch in (PLUS, MINUS):
        z, t, _ = project(sysm, pair, branch, return_root=True)
        assert classify_nehari(sysm, z) == branch
        _, t2, _ = project(sysm, z, branch, return_root=True)
        assert t2 == pytest.approx(1.0, rel=1e-9)
    assert classify_nehari(sysm, pair) == OFF


@given(st.integers(0, 10 ** 6), st.floats(1e-3, 1e3))
def test_projection_scaling_invariance(small_lambda_desk, seed, c):
    sysm = small_lambda_desk
    pair = positive_pair(sysm, seed)
    for branch in (PLUS, MINUS):
        a = project(sysm, pair, branch).flat()
        b = project(sysm, pair.scaled(c), branch).flat()
        assert np.allclose(a, b, rtol=1e-9, atol=0)


def test_plus_branch_unavailable_without_concave_term(small_lambda_desk):
    sysm = dataclasses.replace(small_lambda_desk, a=np.zeros(16), b=np.zeros(16))
    pair = positive_pair(sysm, 4)
    with pytest.raises(BranchUnavailableError) as info:
        project(sysm, pair, PLUS)
    assert info.value.diagnostics["regime"] == "minus-only"
    assert classify_nehari(sysm, project(sysm, pair, MINUS)) == MINUS


def test_project_rejects_unknown_branch(desk16):
    with pytest.raises(UsageError):
        project(desk16, positive_pair(desk16, 0), "zero")
