import dataclasses

import numpy as np
import pytest
from conftest import brute_force_energy, smooth_pair
from hypothesis import given
from hypothesis import strategies as st

from fracnehari import (StatePair, build_fibering, compute_P, compute_Q,
                        compute_R, desk_instance, discretize, energy,
                        energy_gradient, modular_rho_X0, variable_instance)
from fracnehari.energy import pair_norm


def test_zero_pair(desk16):
    z = StatePair(np.zeros(desk16.m), np.zeros(desk16.m))
    e = energy(desk16, z)
    assert (e.P, e.Q, e.R, e.J) == (0.0, 0.0, 0.0, 0.0)
    gu, gv = energy_gradient(desk16, z)
    assert not np.any(gu) and not np.any(gv)


def test_P_with_one_zero_component(desk16):
    u, _ = smooth_pair(desk16, 0)
    pair = StatePair(u, np.zeros_like(u))
    assert compute_P(desk16.cache, pair) == pytest.approx(modular_rho_X0(desk16.cache, u), rel=1e-14)
    assert compute_R(desk16, pair) == 0.0


def test_Q_and_R_constant_integrands():
    sysm = discretize(desk_instance(3.0, 1.0), 16)
    sysm = dataclasses.replace(sysm, q=np.full(16, 2.0))
    ones, zeros = np.ones(16), np.zeros(16)
    assert compute_Q(sysm, StatePair(ones, zeros)) == pytest.approx(3.0, rel=1e-14)
    assert compute_R(sysm, StatePair(ones, ones)) == pytest.approx(1.0, rel=1e-14)


@given(st.integers(0, 10 ** 6))
def test_P_sandwich_of_modulars(desk16, seed):
    u, v = smooth_pair(desk16, seed)
    P = compute_P(desk16.cache, StatePair(u, v))
    ru, rv = modular_rho_X0(desk16.cache, u), modular_rho_X0(desk16.cache, v)
    assert max(ru, rv) <= P <= 2 * max(ru, rv)


@pytest.mark.parametrize("maker", [desk_instance, variable_instance])
def test_energy_matches_brute_force_oracle(maker):
    sysm = discretize(maker(0.3, 0.2), 6, collar_width=0.5)
    u, v = smooth_pair(sysm, 7)
    u[2] = -u[2]
    e = energy(sysm, StatePair(u, v))
    J, P, Q, R = brute_force_energy(sysm, u, v)
    assert e.J == pytest.approx(J, rel=1e-12)
    assert e.P == pytest.approx(P, rel=1e-12)
    assert e.Q == pytest.approx(Q, rel=1e-12)
    assert e.R == pytest.approx(R, rel=1e-12)


@given(st.floats(0.01, 50.0), st.integers(0, 10 ** 6))
def test_constant_exponent_homogeneity(desk16, t, seed):
    u, v = smooth_pair(desk16, seed)
    e = energy(desk16, StatePair(u, v))
    et = energy(desk16, StatePair(t * u, t * v))
    expect = t ** 2 / 2 * e.P - t ** 1.5 / 1.5 * e.Q - t ** 3 / 3 * e.R
    assert et.J == pytest.approx(expect, rel=1e-9, abs=1e-12 * max(1, abs(e.P) * t ** 3))


@given(st.integers(0, 10 ** 6))
def test_energy_even(var16, seed):
    u, v = smooth_pair(var16, seed)
    assert energy(var16, StatePair(-u, -v)).J == pytest.approx(
        energy(var16, StatePair(u, v)).J, rel=1e-14)


@pytest.mark.parametrize("name", ["desk16", "var16"])
def test_gradient_matches_central_differences(name, request):
    sysm = request.getfixturevalue(name)
    rng = np.random.default_rng(11)
    for k in range(10):
        u, v = smooth_pair(sysm, 100 + k)
        phi, psi = rng.standard_normal(sysm.m), rng.standard_normal(sysm.m)
        gu, gv = energy_gradient(sysm, StatePair(u, v))
        h = 1e-6
        jp = energy(sysm, StatePair(u + h * phi, v + h * psi)).J
        jm = energy(sysm, StatePair(u - h * phi, v - h * psi)).J
        fd = (jp - jm) / (2 * h)
        assert float(gu @ phi + gv @ psi) == pytest.approx(fd, rel=1e-5)


@given(st.integers(0, 10 ** 6))
def test_gradient_pairing_is_fibering_slope(var16, seed):
    u, v = smooth_pair(var16, seed)
    pair = StatePair(u, v)
    gu, gv = energy_gradient(var16, pair)
    e = energy(var16, pair)
    slope = float(build_fibering(var16, pair).evaluate(1.0, 1))
    pairing = float(gu @ u + gv @ v)
    assert pairing == pytest.approx(slope, rel=1e-10, abs=1e-12 * e.P)
    assert pairing == pytest.approx(e.P - e.Q - e.R, rel=1e-10, abs=1e-12 * e.P)


def test_sign_structure_without_concave_term(desk16):
    sysm = dataclasses.replace(desk16, a=np.zeros(desk16.m), b=np.zeros(desk16.m))
    u, v = np.abs(smooth_pair(sysm, 3)[0]), np.abs(smooth_pair(sysm, 4)[1])
    pair = StatePair(u, v)
    assert compute_Q(sysm, pair) == 0.0
    assert energy(sysm, pair.scaled(1e-3)).J > 0
    assert energy(sysm, pair.scaled(1e4)).J < 0


def test_pair_norm_is_max_of_component_norms(desk16):
    u, v = smooth_pair(desk16, 5)
    n = pair_norm(desk16, StatePair(u, v))
    nu = pair_norm(desk16, StatePair(u, np.zeros_like(u)))
    nv = pair_norm(desk16, StatePair(np.zeros_like(v), v))
    assert n == max(nu, nv)
    assert nu == pytest.approx(np.sqrt(modular_rho_X0(desk16.cache, u)), rel=1e-9)


def test_state_pair_shapes():
    with pytest.raises(ValueError):
        StatePair(np.zeros(3), np.zeros(4))
    p = StatePair.from_flat(np.arange(6.0))
    assert np.array_equal(p.v, [3.0, 4.0, 5.0])
    assert np.array_equal(p.flat(), np.arange(6.0))
