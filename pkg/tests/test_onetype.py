import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from matchkit.errors import OutOfRangeMatching
from matchkit.onetype import (LOGISTIC, NORMAL, OneTypeModel, one_type_differentials,
                              one_type_identify, solve_one_type)
from matchkit.rng import EULER_GAMMA


@pytest.mark.parametrize("n, m, phi, U, mu", [
    (1.0, 1.0, 0.0, 0.0, 0.5),
    (0.5, 1.0, 0.0, math.log(2), 1 / 3),
    (1.0, 1.0, 2 * math.log(2), math.log(2), 2 / 3),
])
def test_logistic_solutions(n, m, phi, U, mu):
    sol = solve_one_type(OneTypeModel(n, m, phi))
    assert sol.U == pytest.approx(U, abs=1e-12)
    assert sol.mu == pytest.approx(mu, abs=1e-12)


def test_logistic_welfare_level():
    sol = solve_one_type(OneTypeModel(1.0, 1.0, 0.0))
    assert sol.u == pytest.approx(math.log(2) + EULER_GAMMA, abs=1e-12)


def test_identify_examples():
    assert one_type_identify(0.5, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert one_type_identify(1 / 3, 0.5, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(OutOfRangeMatching):
        one_type_identify(0.6, 0.5, 1.0)


def test_elasticity_pin():
    sol = solve_one_type(OneTypeModel(0.5, 1.0, 0.0))
    assert sol.kP == pytest.approx(2 / 9, abs=1e-12)
    assert sol.kQ == pytest.approx(2 / 9, abs=1e-12)
    assert sol.S == pytest.approx(1 / 3, abs=1e-12)
    assert sol.T == pytest.approx(3.0, abs=1e-11)
    d = one_type_differentials(sol)
    assert d.e_n == pytest.approx(2 / 3, abs=1e-12)
    assert d.e_m == pytest.approx(1 / 3, abs=1e-12)
    assert d.e_n > d.e_m


def test_normal_welfare_by_quadrature():
    from scipy import integrate
    sol = solve_one_type(OneTypeModel(0.8, 1.1, 0.4, NORMAL, NORMAL))
    tail, _ = integrate.quad(NORMAL.cdf, -np.inf, sol.U)
    assert sol.u == pytest.approx(tail, abs=1e-10)


dists = st.sampled_from([LOGISTIC, NORMAL])
mass = st.floats(0.2, 5.0)


@given(mass, mass, st.floats(-3, 3), dists, dists)
def test_elasticities_sum_to_one(n, m, phi, P, Q):
    d = one_type_differentials(solve_one_type(OneTypeModel(n, m, phi, P, Q)))
    assert d.e_n + d.e_m == pytest.approx(1.0, abs=1e-12)
    assert d.s > 0
    if n <= 1 and m <= 1:
        # s is a harmonic mean of n kP and m kQ, so it is below one at unit-or-smaller masses
        assert d.s < 1
    if n < m and P is Q:
        # with a common log-concave symmetric density the smaller side is more elastic
        assert d.e_n >= d.e_m - 1e-12


@given(mass, mass, st.floats(-3, 3), dists, dists)
def test_identify_inverts_solve(n, m, phi, P, Q):
    sol = solve_one_type(OneTypeModel(n, m, phi, P, Q))
    assert one_type_identify(sol.mu, n, m, P, Q) == pytest.approx(phi, abs=1e-8)


@given(mass, mass, st.floats(-3, 3), dists)
def test_differentials_match_resolve(n, m, phi, P):
    base = OneTypeModel(n, m, phi, P, P)
    d = one_type_differentials(solve_one_type(base), 0.3, -0.2, 0.5)
    h = 1e-6

    def at(t):
        return solve_one_type(OneTypeModel(n * math.exp(0.3 * t), m * math.exp(-0.2 * t),
                                           phi + 0.5 * t, P, P))

    hi, lo = at(h), at(-h)
    assert d.dmu == pytest.approx((hi.mu - lo.mu) / (2 * h), rel=1e-5, abs=1e-7)
    assert d.du == pytest.approx((hi.u - lo.u) / (2 * h), rel=1e-5, abs=1e-7)
    assert d.dv == pytest.approx((hi.v - lo.v) / (2 * h), rel=1e-5, abs=1e-7)


def test_rejects_bad_masses():
    with pytest.raises(OutOfRangeMatching):
        OneTypeModel(0.0, 1.0, 0.0)


@given(st.floats(0.2, 2.0), st.floats(1.05, 3.0), st.floats(-2, 2), dists)
def test_scarce_side_premium(n, ratio, phi, P):
    # identical symmetric log-concave shocks: the smaller side takes more than half
    sol = solve_one_type(OneTypeModel(n, n * ratio, phi, P, P))
    assert sol.U > phi / 2
    assert sol.u > sol.v
