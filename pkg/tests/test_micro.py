import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linear_sum_assignment

from matchkit.equilibrium import solve_equilibrium
from matchkit.errors import InvalidSpec, UnsupportedDistribution
from matchkit.heterogeneity import MEN, WOMEN, Logit, simulated_from_seed
from matchkit.market import check_feasibility, make_market
from matchkit.micro import (SampledPopulation, aggregate, enumerate_matchings,
                            exhaustive_optimum, net_surplus, realized_market,
                            sample_population, solve_assignment)
from matchkit.rng import EULER_GAMMA

HM, HW = Logit(side=MEN), Logit(side=WOMEN)


def _pair(shock_sum, phi):
    pop = SampledPopulation(np.array([0]), np.array([[0.0, shock_sum / 2]]),
                            np.array([0]), np.array([[0.0, shock_sum / 2]]),
                            np.array([1]), np.array([1]), 1.0, 0)
    return pop, solve_assignment(pop, np.array([[phi]]))


def test_single_positive_pair():
    pop, res = _pair(1.0, 1.0)
    assert res.matched_pairs == [(0, 0)]
    assert res.total_surplus == pytest.approx(2.0, abs=1e-12)


def test_single_negative_pair():
    pop, res = _pair(0.0, -1.0)
    assert res.matched_pairs == []
    assert res.single_men == [0] and res.single_women == [0]
    agg = aggregate(pop, res)
    assert agg.mu[0, 0] == 0.0 and agg.mu_x0[0] == 1.0


def test_sampling_is_deterministic():
    market = make_market([1.0], [1.0])
    a = sample_population(market, HM, HW, scale=1000, seed=7)
    b = sample_population(market, HM, HW, scale=1000, seed=7)
    assert a.men_counts.tolist() == [1000]
    np.testing.assert_array_equal(a.men_shocks, b.men_shocks)
    c = sample_population(market, HM, HW, scale=1000, seed=8)
    assert not np.array_equal(a.men_shocks, c.men_shocks)
    assert c.men_counts.tolist() == a.men_counts.tolist()


def test_gumbel_mean():
    pop = sample_population(make_market([1.0], [1.0]), HM, HW, scale=1e6, seed=3)
    assert pop.men_shocks[:, 0].mean() == pytest.approx(EULER_GAMMA, abs=5e-3)


def test_incumbent_draws_survive_entry():
    small = sample_population(make_market([1.0, 0.5], [1.0]), HM, HW, scale=200, seed=4)
    big = sample_population(make_market([1.05, 0.5], [1.0]), HM, HW, scale=200, seed=4)
    assert big.men_counts[0] == small.men_counts[0] + 10
    np.testing.assert_array_equal(big.men_shocks[:200], small.men_shocks[:200])
    np.testing.assert_array_equal(big.men_shocks[210:], small.men_shocks[200:])
    np.testing.assert_array_equal(big.women_shocks, small.women_shocks)


def test_callable_sampler_and_unsupported():
    market = make_market([1.0], [1.0])
    pop = sample_population(market, lambda u: np.log(u), None, scale=10, seed=1)
    assert np.all(pop.men_shocks < 0)
    with pytest.raises(UnsupportedDistribution):
        sample_population(market, simulated_from_seed(0, 10, 1, 1), scale=10)
    with pytest.raises(InvalidSpec):
        sample_population(market, HM, scale=0.5)


def test_three_by_three_enumeration():
    assert sum(1 for _ in enumerate_matchings(3, 3)) == 34
    pop = sample_population(make_market([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]), HM, HW,
                            scale=1, seed=11)
    phi = np.random.default_rng(11).uniform(-1, 1, (3, 3))
    S = net_surplus(pop, phi)
    brute = max(sum(S[i, j] for i, j in m) for m in enumerate_matchings(3, 3))
    res = solve_assignment(pop, phi)
    base = pop.men_shocks[:, 0].sum() + pop.women_shocks[:, 0].sum()
    assert res.total_surplus - base == pytest.approx(brute, abs=1e-12)
    assert exhaustive_optimum(S) == pytest.approx(brute, abs=1e-12)


def _hungarian_optimum(S):
    # rectangular assignment with zero-value dummy partners for staying single
    I, J = S.shape
    big = np.zeros((I + J, J + I))
    big[:I, :J] = np.maximum(S, -1e6)
    big[:I, J:] = np.where(np.eye(I) > 0, 0.0, -1e9)
    big[I:, :J] = np.where(np.eye(J) > 0, 0.0, -1e9)
    r, c = linear_sum_assignment(big, maximize=True)
    return big[r, c].sum()


@given(st.integers(0, 10_000))
def test_small_instances_match_hungarian(seed):
    rng = np.random.default_rng(seed)
    market = make_market(rng.uniform(0.01, 0.03, 2), rng.uniform(0.01, 0.03, 2))
    phi = rng.uniform(-1.5, 1.5, (2, 2))
    pop = sample_population(market, HM, HW, scale=300, seed=seed)
    res = solve_assignment(pop, phi)
    base = pop.men_shocks[:, 0].sum() + pop.women_shocks[:, 0].sum()
    assert res.total_surplus - base == pytest.approx(_hungarian_optimum(net_surplus(pop, phi)),
                                                     abs=1e-9)
    assert res.blocking_surplus <= 1e-9


def test_medium_population():
    market = make_market([1.0, 0.7], [0.9, 0.8])
    phi = np.array([[0.5, -0.2], [0.0, 0.8]])
    pop = sample_population(market, HM, HW, scale=150, seed=2)
    res = solve_assignment(pop, phi)
    base = pop.men_shocks[:, 0].sum() + pop.women_shocks[:, 0].sum()
    assert res.total_surplus - base == pytest.approx(_hungarian_optimum(net_surplus(pop, phi)),
                                                     abs=1e-8)
    assert res.blocking_surplus <= 1e-9
    emp = aggregate(pop, res)
    assert check_feasibility(emp, realized_market(pop, market), 1e-12).passed


def test_symmetric_market_share():
    market = make_market([1.0], [1.0])
    pop = sample_population(market, HM, HW, scale=1000, seed=5)
    emp = aggregate(pop, solve_assignment(pop, [[0.0]]))
    assert emp.mu[0, 0] == pytest.approx(0.5, abs=0.05)
    np.testing.assert_allclose(emp.mu.sum(1) + emp.mu_x0, pop.men_counts / pop.scale,
                               atol=1e-15)


def test_entry_lowers_men_match_rate():
    base_market = make_market([1.0, 1.0], [1.0, 1.0])
    more_men = make_market([1.05, 1.0], [1.0, 1.0])
    phi = np.eye(2)
    rates = []
    for market in (base_market, more_men):
        pop = sample_population(market, HM, HW, scale=2000, seed=42)
        emp = aggregate(pop, solve_assignment(pop, phi))
        rates.append(emp.mu.sum(axis=1) / (pop.men_counts / pop.scale))
    assert rates[1][0] <= rates[0][0]


def test_convergence_to_continuum():
    market = make_market([1.0, 1.0], [1.0, 1.0])
    phi = np.eye(2)
    star = solve_equilibrium(market, HM, HW, phi).mu
    pop = sample_population(market, HM, HW, scale=20000, seed=42)
    emp = aggregate(pop, solve_assignment(pop, phi))
    assert np.max(np.abs(emp.mu - star)) <= 0.02
