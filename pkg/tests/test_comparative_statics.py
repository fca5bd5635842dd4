import numpy as np
import pytest
from conftest import ORACLE_DMU_DN1, random_market
from hypothesis import given, strategies as st

from matchkit.comparative_statics import (Shock, assemble_hessians, comparative_statics,
                                          differential_response)
from matchkit.equilibrium import solve_equilibrium
from matchkit.errors import DimensionMismatch, SingularSystem
from matchkit.heterogeneity import MEN, WOMEN, Logit, simulated_from_seed
from matchkit.market import ValidatedMarket, make_market
from matchkit.numdiff import relative_error

HM, HW = Logit(side=MEN), Logit(side=WOMEN)


@pytest.fixture
def unit_case():
    market = make_market([1.0], [1.0])
    eq = solve_equilibrium(market, HM, HW, [[0.0]])
    return market, eq


def test_unit_hessians(unit_case):
    market, eq = unit_case
    b = assemble_hessians(market, HM, HW, eq)
    assert b.d2G[0, 0] == pytest.approx(0.25, abs=1e-12)
    assert b.d2H[0, 0] == pytest.approx(0.25, abs=1e-12)
    assert b.T[0, 0] == pytest.approx(2.0, abs=1e-12)


def test_unit_shocks(unit_case):
    market, eq = unit_case
    rep = comparative_statics(market, HM, HW, eq, Shock.build((1, 1), dn=[1.0]))
    assert rep.du[0] == pytest.approx(-0.5, abs=1e-12)
    rep = comparative_statics(market, HM, HW, eq, Shock.build((1, 1), dphi=[[1.0]]))
    assert rep.dmu[0, 0] == pytest.approx(0.125, abs=1e-12)
    b = rep.blocks
    assert b.du_dn[0, 0] == pytest.approx(-0.5, abs=1e-12)
    assert b.du_dm[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert b.du_dphi[0, 0] == pytest.approx(0.25, abs=1e-12)


def test_zero_shock(unit_case):
    market, eq = unit_case
    rep = comparative_statics(market, HM, HW, eq, blocks=False)
    assert rep.blocks is None
    assert np.all(rep.dU == 0) and np.all(rep.du == 0) and np.all(rep.dmu == 0)


def test_inverse_identity():
    market, phi = random_market(np.random.default_rng(3), 2, 2)
    eq = solve_equilibrium(market, HM, HW, phi)
    b = assemble_hessians(market, HM, HW, eq)
    np.testing.assert_allclose((b.d2G + b.d2H) @ b.T, np.eye(4), atol=1e-10)


def test_matches_entry_oracle(oracle_instance):
    market, phi = oracle_instance
    eq = solve_equilibrium(market, HM, HW, phi)
    rep = comparative_statics(market, HM, HW, eq, Shock.build((3, 2), dn=[1.0, 0.0, 0.0]))
    np.testing.assert_allclose(rep.dmu, ORACLE_DMU_DN1, atol=1e-7)


def test_singular_near_boundary():
    market = make_market([1.0], [1.0])
    eq = solve_equilibrium(market, HM, HW, [[-70.0]])
    with pytest.raises(SingularSystem):
        assemble_hessians(market, HM, HW, eq)


def test_shock_shape():
    with pytest.raises(DimensionMismatch):
        Shock.build((2, 2), dn=[1.0])
    assert Shock.build((2, 3), dphi=np.arange(6.0)).dphi.shape == (2, 3)


def _resolved(market, phi, hm, hw, dn=0.0, dm=0.0, dphi=0.0):
    moved = ValidatedMarket(market.types, market.n + dn, market.m + dm)
    return solve_equilibrium(moved, hm, hw, phi + dphi, tolerance=1e-13)


@given(st.integers(0, 10_000))
def test_response_matches_resolve(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.integers(1, 4, size=2)
    market, phi = random_market(rng, X, Y)
    eq = solve_equilibrium(market, HM, HW, phi, tolerance=1e-13)
    shock = Shock.build((X, Y), rng.normal(size=X), rng.normal(size=Y),
                        rng.normal(size=(X, Y)))
    rep = differential_response(assemble_hessians(market, HM, HW, eq), market, eq, shock)
    h = 1e-5
    plus = _resolved(market, phi, HM, HW, h * shock.dn, h * shock.dm, h * shock.dphi)
    minus = _resolved(market, phi, HM, HW, -h * shock.dn, -h * shock.dm, -h * shock.dphi)
    fd_mu = (plus.mu - minus.mu) / (2 * h)
    fd_u = (plus.welfare.u - minus.welfare.u) / (2 * h)
    assert relative_error(rep.dmu, fd_mu) <= 1e-4
    assert relative_error(rep.du, fd_u) <= 1e-4
    np.testing.assert_allclose(rep.dmu_x0, shock.dn - rep.dmu.sum(axis=1), atol=1e-12)


@given(st.integers(0, 10_000))
def test_sign_structure(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.integers(1, 6, size=2)
    market, phi = random_market(rng, X, Y)
    eq = solve_equilibrium(market, HM, HW, phi)
    rep = comparative_statics(market, HM, HW, eq)
    b = assemble_hessians(market, HM, HW, eq)
    assert b.T.min() >= -1e-12
    assert rep.blocks.du_dn.max() <= 1e-12
    assert rep.blocks.du_dm.min() >= -1e-12
    np.testing.assert_allclose(rep.blocks.dv_dn, rep.blocks.du_dm.T, atol=1e-12)


def test_simulated_blocks_match_resolve():
    market, phi = random_market(np.random.default_rng(17), 2, 2)
    hm = simulated_from_seed(4, 3000, 2, 2, MEN)
    hw = simulated_from_seed(4, 3000, 2, 2, WOMEN)
    eq = solve_equilibrium(market, hm, hw, phi, tolerance=1e-13)
    blocks = comparative_statics(market, hm, hw, eq).blocks
    h = 1e-5
    for x in range(2):
        dn = np.zeros(2)
        dn[x] = h
        fd = (_resolved(market, phi, hm, hw, dn=dn).welfare.u
              - _resolved(market, phi, hm, hw, dn=-dn).welfare.u) / (2 * h)
        assert relative_error(blocks.du_dn[:, x], fd) <= 1e-4
