import math

import numpy as np
import pytest
from conftest import random_market
from hypothesis import given, strategies as st

from matchkit.equilibrium import solve_equilibrium
from matchkit.errors import BoundaryShares, NoConvergence, RankDeficientBasis
from matchkit.heterogeneity import MEN, WOMEN, Logit, simulated_from_seed
from matchkit.identification import (BasisFamily, comoments, estimate_lambda, laplace_smooth,
                                     recover_surplus, recover_u, recover_v)
from matchkit.market import Matching, check_feasibility, make_market

HM, HW = Logit(side=MEN), Logit(side=WOMEN)


def test_recover_u_examples():
    assert recover_u(Matching([[0.5]], [0.5], [0.5]), make_market([1.0], [1.0]), HM)[0, 0] \
        == pytest.approx(0.0, abs=1e-15)
    U = recover_u(Matching([[0.2]], [0.3], [0.25]), make_market([0.5], [0.45]), HM)
    assert U[0, 0] == pytest.approx(math.log(0.2 / 0.3), abs=1e-14)
    assert U[0, 0] == pytest.approx(-0.4055, abs=5e-5)


def test_recover_surplus_example():
    market = make_market([0.5], [0.45])
    phi = recover_surplus(Matching([[0.2]], [0.3], [0.25]), market, HM, HW)
    expected = 2 * math.log(0.2) - math.log(0.3) - math.log(0.25)
    assert phi[0, 0] == pytest.approx(expected, abs=1e-14)
    assert phi[0, 0] == pytest.approx(-0.6286, abs=5e-5)
    # re-solving at the recovered surplus reproduces the matching
    eq = solve_equilibrium(market, HM, HW, phi, tolerance=1e-12)
    assert eq.mu[0, 0] == pytest.approx(0.2, abs=1e-8)


def test_symmetric_identification_is_zero():
    t = 0.3
    phi = recover_surplus(Matching([[t]], [t], [t]), make_market([2 * t], [2 * t]), HM, HW)
    assert phi[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_zero_cell_rejected():
    with pytest.raises(BoundaryShares):
        recover_u(Matching([[0.0]], [1.0], [1.0]), make_market([1.0], [1.0]), HM)


def test_recover_matches_solver_utilities():
    market, phi = random_market(np.random.default_rng(12), 4, 3)
    eq = solve_equilibrium(market, HM, HW, phi)
    np.testing.assert_allclose(recover_u(eq.matching, market, HM), eq.U, atol=1e-7)
    np.testing.assert_allclose(recover_v(eq.matching, market, HW), eq.V, atol=1e-7)


def test_ten_by_ten_round_trip():
    market, phi = random_market(np.random.default_rng(99), 10, 10)
    eq = solve_equilibrium(market, HM, HW, phi)
    assert np.max(np.abs(recover_surplus(eq.matching, market, HM, HW) - phi)) <= 1e-6


def test_simulated_round_trip():
    market, phi = random_market(np.random.default_rng(5), 2, 2)
    hm = simulated_from_seed(3, 2000, 2, 2, MEN)
    hw = simulated_from_seed(3, 2000, 2, 2, WOMEN)
    eq = solve_equilibrium(market, hm, hw, phi, tolerance=1e-12)
    np.testing.assert_allclose(recover_surplus(eq.matching, market, hm, hw), phi, atol=1e-6)


@given(st.integers(0, 10_000), st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_round_trip_with_scales(seed, sm, sw):
    market, phi = random_market(np.random.default_rng(seed), 3, 4)
    hm, hw = Logit(sm, MEN), Logit(sw, WOMEN)
    eq = solve_equilibrium(market, hm, hw, phi)
    np.testing.assert_allclose(recover_surplus(eq.matching, market, hm, hw), phi, atol=1e-6)


def test_comoment_examples():
    mu = np.array([[0.2, 0.1], [0.1, 0.3]])
    matching = Matching(mu, [0.1, 0.1], [0.1, 0.1])
    assert comoments(matching, BasisFamily(np.eye(2)))[0] == pytest.approx(0.5, abs=1e-15)
    assert comoments(matching, BasisFamily(np.ones((2, 2))))[0] == pytest.approx(0.7, abs=1e-15)
    empty = Matching(np.zeros((2, 2)), [1, 1], [1, 1])
    assert comoments(empty, BasisFamily(np.eye(2)))[0] == 0.0


def test_rank_check():
    with pytest.raises(RankDeficientBasis):
        BasisFamily(np.array([np.eye(2), 2 * np.eye(2)])).check_rank()


def _synthetic(seed, X, Y, lam):
    rng = np.random.default_rng(seed)
    market = make_market(rng.uniform(0.5, 2.0, X), rng.uniform(0.5, 2.0, Y))
    basis = BasisFamily(rng.normal(size=(len(lam), X, Y)))
    eq = solve_equilibrium(market, HM, HW, basis.surplus(lam), tolerance=1e-12)
    return market, basis, eq


def test_estimation_recovers_truth():
    lam = np.array([1.5, -0.5, 0.25])
    market, basis, eq = _synthetic(8, 4, 4, lam)
    est = estimate_lambda(eq.matching, market, HM, HW, basis)
    np.testing.assert_allclose(est.lam, lam, atol=1e-6)
    np.testing.assert_allclose(est.observed_moments, est.fitted_moments, atol=1e-8)


def test_estimation_at_zero():
    market, basis, eq = _synthetic(2, 3, 3, np.zeros(2))
    est = estimate_lambda(eq.matching, market, HM, HW, basis)
    assert est.iterations == 0
    np.testing.assert_allclose(est.lam, 0.0, atol=1e-12)


def test_saturated_basis_equals_nonparametric():
    market, phi = random_market(np.random.default_rng(21), 2, 3)
    eq = solve_equilibrium(market, HM, HW, phi, tolerance=1e-12)
    cells = np.eye(6).reshape(6, 2, 3)
    est = estimate_lambda(eq.matching, market, HM, HW, BasisFamily(cells))
    np.testing.assert_allclose(est.lam.reshape(2, 3),
                               recover_surplus(eq.matching, market, HM, HW), atol=1e-6)


def test_estimation_iteration_cap():
    lam = np.array([3.0, -2.0])
    market, basis, eq = _synthetic(4, 3, 3, lam)
    with pytest.raises(NoConvergence):
        estimate_lambda(eq.matching, market, HM, HW, basis, max_iterations=1)


def test_laplace_smoothing_restores_interior():
    market = make_market([1.0, 1.0], [1.0, 1.0])
    raw = Matching([[0.5, 0.0], [0.25, 0.5]], [0.5, 0.25], [0.25, 0.5])
    smooth = laplace_smooth(raw, market, 1e-3)
    assert check_feasibility(smooth, market, 1e-12).passed
    assert smooth.mu.min() > 0
    phi = recover_surplus(smooth, market, HM, HW)
    assert np.all(np.isfinite(phi))
