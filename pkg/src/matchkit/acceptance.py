"""Desk-scale acceptance suite.

Each criterion returns a :class:`CriterionResult`; ``run_all`` drives them
for the ``selftest`` command and the test suite.  Instances are drawn from
fixed seeds, so results are reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .comparative_statics import (Shock, assemble_hessians, differential_response,
                                  welfare_derivatives)
from .equilibrium import ipfp_logit, solve_equilibrium
from .heterogeneity import MEN, WOMEN, Logit, emax, simulated_from_seed
from .identification import BasisFamily, estimate_lambda, recover_surplus
from .market import ValidatedMarket, make_market
from .micro import aggregate, exhaustive_optimum, net_surplus, sample_population, \
    solve_assignment
from .numdiff import central_derivative, central_jacobian, relative_error
from .onetype import LOGISTIC, OneTypeModel, one_type_differentials, solve_one_type
from .rng import EULER_GAMMA

FD_STEP = 1e-5
FD_SOLVE_TOL = 1e-13


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


def random_instance(rng: np.random.Generator, X: int, Y: int):
    market = make_market(rng.uniform(0.5, 2.0, X), rng.uniform(0.5, 2.0, Y))
    return market, rng.uniform(-2.0, 2.0, (X, Y))


def _logit_pair(scale_men=1.0, scale_women=1.0):
    return Logit(scale_men, MEN), Logit(scale_women, WOMEN)


def symmetric_logit_pin() -> tuple[bool, str]:
    hm, hw = _logit_pair()
    eq = solve_equilibrium(make_market([1.0], [1.0]), hm, hw, [[0.0]])
    target = math.log(2) + EULER_GAMMA
    errs = {"mu": abs(eq.mu[0, 0] - 0.5), "U": abs(eq.U[0, 0]),
            "u": abs(eq.welfare.u[0] - target), "v": abs(eq.welfare.v[0] - target)}
    worst = max(errs.values())
    return worst <= 1e-9, f"max error {worst:.2e} (tol 1e-9)"


def one_type_logistic_pin() -> tuple[bool, str]:
    sol = solve_one_type(OneTypeModel(0.5, 1.0, 0.0, LOGISTIC, LOGISTIC))
    d = one_type_differentials(sol)
    pin = max(abs(sol.mu - 1 / 3), abs(sol.U - math.log(2)),
              abs(d.e_n - 2 / 3), abs(d.e_m - 1 / 3))
    total = abs(d.e_n + d.e_m - 1.0)
    ok = pin <= 1e-9 and total <= 1e-12 and d.e_n > d.e_m
    return ok, (f"pin error {pin:.2e} (tol 1e-9), |e_n+e_m-1| {total:.1e} (tol 1e-12), "
                f"e_n={d.e_n:.6f} > e_m={d.e_m:.6f}")


def cross_solver_agreement() -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    hm, hw = _logit_pair()
    worst = 0.0
    for _ in range(20):
        market, phi = random_instance(rng, 5, 5)
        a = solve_equilibrium(market, hm, hw, phi, tolerance=1e-12)
        b = ipfp_logit(market, hm, hw, phi, tolerance=1e-12)
        worst = max(worst, float(np.max(np.abs(a.U - b.U))))
    return worst <= 1e-8, f"max |U_newton - U_ipfp| {worst:.2e} over 20 instances (tol 1e-8)"


def identification_round_trip() -> tuple[bool, str]:
    rng = np.random.default_rng(4)
    hm, hw = _logit_pair()
    market, phi = random_instance(rng, 10, 10)
    eq = solve_equilibrium(market, hm, hw, phi)
    err = float(np.max(np.abs(recover_surplus(eq.matching, market, hm, hw) - phi)))
    return err <= 1e-6, f"|Phi_hat - Phi|_inf {err:.2e} (tol 1e-6)"


def comoment_estimation() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    hm, hw = _logit_pair()
    market, _ = random_instance(rng, 4, 4)
    basis = BasisFamily(rng.normal(size=(3, 4, 4)))
    truth = np.array([1.5, -0.5, 0.25])
    observed = solve_equilibrium(market, hm, hw, basis.surplus(truth), tolerance=1e-12)
    est = estimate_lambda(observed.matching, market, hm, hw, basis)
    err = float(np.max(np.abs(est.lam - truth)))
    return err <= 1e-6, f"|lambda_hat - lambda|_inf {err:.2e} (tol 1e-6)"


def stieltjes_sign_suite() -> tuple[bool, str]:
    rng = np.random.default_rng(6)
    min_T, max_dudn, min_dudm = np.inf, -np.inf, np.inf
    for _ in range(100):
        X, Y = rng.integers(1, 7, size=2)
        market, phi = random_instance(rng, X, Y)
        hm, hw = _logit_pair(*rng.uniform(0.5, 2.0, 2))
        eq = solve_equilibrium(market, hm, hw, phi)
        bundle = assemble_hessians(market, hm, hw, eq)
        blocks = welfare_derivatives(bundle, market, eq)
        min_T = min(min_T, bundle.T.min())
        max_dudn = max(max_dudn, blocks.du_dn.max())
        min_dudm = min(min_dudm, blocks.du_dm.min())
    ok = min_T >= -1e-12 and max_dudn <= 1e-12 and min_dudm >= -1e-12
    return ok, (f"min T {min_T:.2e} (>= -1e-12), max du/dn {max_dudn:.2e} (<= 1e-12), "
                f"min du/dm {min_dudm:.2e} (>= -1e-12)")


def _resolve(market: ValidatedMarket, hm, hw, phi, dn=None, dm=None, dphi=None):
    n = market.n + (0 if dn is None else dn)
    m = market.m + (0 if dm is None else dm)
    mk = make_market(n, m, market.types.x_types, market.types.y_types)
    return solve_equilibrium(mk, hm, hw, phi + (0 if dphi is None else dphi),
                             tolerance=FD_SOLVE_TOL)


def finite_difference_blocks(market, hm, hw, phi) -> dict:
    """Welfare Jacobians by central differences of re-solved equilibria."""
    X, Y = market.shape

    def welfare(eq):
        return np.concatenate([eq.welfare.u, eq.welfare.v])

    j_n = central_jacobian(lambda d: welfare(_resolve(market, hm, hw, phi, dn=d)),
                           np.zeros(X), FD_STEP)
    j_m = central_jacobian(lambda d: welfare(_resolve(market, hm, hw, phi, dm=d)),
                           np.zeros(Y), FD_STEP)
    j_phi = central_jacobian(lambda d: welfare(_resolve(market, hm, hw, phi,
                                                        dphi=d.reshape(X, Y))),
                             np.zeros(X * Y), FD_STEP)
    return {"du_dn": j_n[:X], "dv_dn": j_n[X:], "du_dm": j_m[:X], "dv_dm": j_m[X:],
            "du_dphi": j_phi[:X], "dv_dphi": j_phi[X:]}


def analytic_vs_finite_difference() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        X, Y = rng.integers(1, 7, size=2)
        market, phi = random_instance(rng, X, Y)
        hm, hw = _logit_pair(*rng.uniform(0.5, 2.0, 2))
        eq = solve_equilibrium(market, hm, hw, phi, tolerance=FD_SOLVE_TOL)
        bundle = assemble_hessians(market, hm, hw, eq)
        analytic = welfare_derivatives(bundle, market, eq).as_dict()
        numeric = finite_difference_blocks(market, hm, hw, phi)
        for key, val in analytic.items():
            worst = max(worst, relative_error(val, numeric[key]))
        shock = Shock.build((X, Y), rng.normal(size=X), rng.normal(size=Y),
                            rng.normal(size=(X, Y)))
        rep = differential_response(bundle, market, eq, shock)

        def state(t):
            e = _resolve(market, hm, hw, phi, t * shock.dn, t * shock.dm, t * shock.dphi)
            return np.concatenate([e.U.ravel(), e.welfare.u, e.welfare.v, e.mu.ravel(),
                                   e.matching.mu_x0, e.matching.mu_0y])

        num = central_derivative(state, FD_STEP)
        ana = np.concatenate([rep.dU.ravel(), rep.du, rep.dv, rep.dmu.ravel(),
                              rep.dmu_x0, rep.dmu_0y])
        worst = max(worst, relative_error(ana, num))
    return worst <= 1e-4, f"max relative error {worst:.2e} over 20 instances (tol 1e-4)"


def emax_derivative_checks() -> tuple[bool, str]:
    rng = np.random.default_rng(8)
    worst_logit = worst_sim = 0.0
    sim = simulated_from_seed(8, 10_000, 1, 3, smoothing=0.05)
    for trial in range(10):
        U = rng.uniform(-3, 3, 3)
        for spec, is_logit in ((Logit(rng.uniform(0.5, 2.0)), True), (sim, False)):
            ev = emax(spec, U)
            g_num = central_jacobian(lambda z: np.array([emax(spec, z).value]), U, FD_STEP)[0]
            h_num = central_jacobian(lambda z: emax(spec, z).gradient, U, FD_STEP)
            err = max(relative_error(ev.gradient, g_num), relative_error(ev.hessian, h_num))
            if is_logit:
                worst_logit = max(worst_logit, err)
            else:
                worst_sim = max(worst_sim, err)
    ok = worst_logit <= 1e-6 and worst_sim <= 1e-3
    return ok, (f"logit {worst_logit:.2e} (tol 1e-6), simulated S=1e4 sigma=0.05 "
                f"{worst_sim:.2e} (tol 1e-3)")


def micro_oracle_convergence() -> tuple[bool, str]:
    hm, hw = _logit_pair()
    details, ok = [], True
    for label, market, phi in (
            ("1x1", make_market([1.0], [1.0]), np.zeros((1, 1))),
            ("2x2 assortative", make_market([1.0, 1.0], [1.0, 1.0]), np.eye(2))):
        pop = sample_population(market, hm, hw, scale=1e5, seed=42)
        emp = aggregate(pop, solve_assignment(pop, phi))
        star = solve_equilibrium(market, hm, hw, phi)
        gap = float(np.max(np.abs(emp.mu - star.mu)))
        ok &= gap <= 0.02
        details.append(f"{label} gap {gap:.4f}")
    worst = 0.0
    for seed in range(6):
        for market, phi in ((make_market([8e-3], [8e-3]), np.zeros((1, 1))),
                            (make_market([4e-3, 4e-3], [5e-3, 3e-3]), np.eye(2) - 0.5)):
            pop = sample_population(market, hm, hw, scale=1000, seed=seed)
            res = solve_assignment(pop, phi)
            base = pop.men_shocks[:, 0].sum() + pop.women_shocks[:, 0].sum()
            worst = max(worst, abs(res.total_surplus - base
                                   - exhaustive_optimum(net_surplus(pop, phi))))
    ok &= worst <= 1e-9
    details.append(f"8+8 enumeration gap {worst:.1e}")
    return ok, ", ".join(details) + " (tol 0.02 / exact)"


def engine_matches_one_type() -> tuple[bool, str]:
    worst = 0.0
    for n, m, phi in ((1.0, 1.0, 0.0), (0.5, 1.0, 0.0), (0.7, 1.3, 0.8)):
        hm, hw = _logit_pair()
        market = make_market([n], [m])
        eq = solve_equilibrium(market, hm, hw, [[phi]], tolerance=1e-14)
        bundle = assemble_hessians(market, hm, hw, eq)
        sol = solve_one_type(OneTypeModel(n, m, phi, LOGISTIC, LOGISTIC))
        for dn, dm, dphi in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
            rep = differential_response(bundle, market, eq,
                                        Shock.build((1, 1), [dn], [dm], [[dphi]]))
            one = one_type_differentials(sol, dn / n, dm / m, dphi)
            worst = max(worst, abs(rep.dU[0, 0] - one.dU), abs(rep.du[0] - one.du),
                        abs(rep.dmu[0, 0] - one.dmu), abs(rep.dv[0] - one.dv))
    return worst <= 1e-10, f"max gap {worst:.2e} (tol 1e-10)"


def entry_direction() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst_u, worst_v = -np.inf, np.inf
    for _ in range(20):
        X, Y = rng.integers(1, 6, size=2)
        market, phi = random_instance(rng, X, Y)
        hm, hw = _logit_pair(*rng.uniform(0.5, 2.0, 2))
        base = solve_equilibrium(market, hm, hw, phi, tolerance=1e-12)
        for x in range(X):
            dn = np.zeros(X)
            dn[x] = 0.01
            new = _resolve(market, hm, hw, phi, dn=dn)
            worst_u = max(worst_u, float(np.max(new.welfare.u - base.welfare.u)))
            worst_v = min(worst_v, float(np.min(new.welfare.v - base.welfare.v)))
    ok = worst_u <= 1e-9 and worst_v >= -1e-9
    return ok, f"max du {worst_u:.2e} (<= 1e-9), min dv {worst_v:.2e} (>= -1e-9)"


CRITERIA: list[tuple[int, str, Callable[[], tuple[bool, str]]]] = [
    (1, "symmetric logit pin", symmetric_logit_pin),
    (2, "one-type logistic pin", one_type_logistic_pin),
    (3, "Newton vs IPFP agreement", cross_solver_agreement),
    (4, "identification round-trip", identification_round_trip),
    (5, "comoment estimation", comoment_estimation),
    (6, "Stieltjes / sign suite", stieltjes_sign_suite),
    (7, "analytic vs finite differences", analytic_vs_finite_difference),
    (8, "emax gradient / Hessian checks", emax_derivative_checks),
    (9, "micro-oracle convergence", micro_oracle_convergence),
    (10, "general engine equals one-type formulas", engine_matches_one_type),
    (11, "entry direction", entry_direction),
]


def run_criterion(number: int) -> CriterionResult:
    for num, name, fn in CRITERIA:
        if num == number:
            start = time.perf_counter()
            try:
                passed, detail = fn()
            except Exception as exc:  # reported as a failing row
                passed, detail = False, f"raised {type(exc).__name__}: {exc}"
            return CriterionResult(num, name, bool(passed), detail,
                                   time.perf_counter() - start)
    raise KeyError(number)


def run_all() -> list[CriterionResult]:
    return [run_criterion(num) for num, _, _ in CRITERIA]
