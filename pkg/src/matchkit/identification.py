"""Recovering utilities and surplus from an observed matching.

Inverting each side's demand through the conjugate gradient of the emax
gives ``U`` from the men's matching ratios and ``V`` from the women's; their
sum identifies ``Phi`` once the heterogeneity is known.  A linearly
parameterised surplus ``Phi(lambda) = sum_k lambda_k phi^k`` is estimated by
matching the observed comoments ``C_k = sum_xy mu_xy phi^k_xy``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .comparative_statics import Shock, assemble_hessians, differential_response
from .equilibrium import EquilibriumResult, solve_equilibrium
from .errors import BoundaryShares, DimensionMismatch, NoConvergence, RankDeficientBasis
from .heterogeneity import HeterogeneitySpec, conjugate_gradient
from .market import Matching, ValidatedMarket, conditional_shares

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
MOMENT_TOL = 1e-8
MAX_OUTER_ITER = 100
INNER_TOL = 1e-11


@dataclass(frozen=True)
class BasisFamily:
    matrices: np.ndarray          # K x |X| x |Y|
    names: tuple = field(default=())

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[0] < 1:
            raise DimensionMismatch("basis must be a stack of K >= 1 matrices")
        mats = mats.copy()
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        names = tuple(self.names) or tuple(f"phi{k + 1}" for k in range(mats.shape[0]))
        if len(names) != mats.shape[0]:
            raise DimensionMismatch("one name per basis matrix")
        object.__setattr__(self, "names", names)

    @property
    def K(self) -> int:
        return self.matrices.shape[0]

    def surplus(self, lam) -> np.ndarray:
        return np.tensordot(np.asarray(lam, dtype=float), self.matrices, axes=1)

    def check_rank(self) -> None:
        stack = self.matrices.reshape(self.K, -1)
        rank = np.linalg.matrix_rank(stack, tol=RANK_TOL)
        if rank < self.K:
            raise RankDeficientBasis(f"basis of {self.K} matrices has rank {rank}")


def _interior(matching: Matching) -> None:
    smallest = min(matching.mu.min(), matching.mu_x0.min(), matching.mu_0y.min())
    if smallest <= 0:
        raise BoundaryShares("observed matching has empty cells; full support requires "
                             "every pair and singles mass to be positive",
                             smallest=float(smallest))


def recover_u(matching: Matching, market: ValidatedMarket,
              het_men: HeterogeneitySpec) -> np.ndarray:
    _interior(matching)
    shares = conditional_shares(matching, market)
    rows = [conjugate_gradient(het_men, shares.men[1:, x], shares.men[0, x], x)
            for x in range(market.shape[0])]
    return np.array(rows)


def recover_v(matching: Matching, market: ValidatedMarket,
              het_women: HeterogeneitySpec) -> np.ndarray:
    _interior(matching)
    shares = conditional_shares(matching, market)
    cols = [conjugate_gradient(het_women, shares.women[1:, y], shares.women[0, y], y)
            for y in range(market.shape[1])]
    return np.array(cols).T


def recover_surplus(matching: Matching, market: ValidatedMarket,
                    het_men: HeterogeneitySpec, het_women: HeterogeneitySpec) -> np.ndarray:
    return recover_u(matching, market, het_men) + recover_v(matching, market, het_women)


def comoments(matching: Matching, basis: BasisFamily) -> np.ndarray:
    if basis.matrices.shape[1:] != matching.shape:
        raise DimensionMismatch(f"basis is {basis.matrices.shape[1:]}, "
                                f"matching is {matching.shape}")
    return np.tensordot(basis.matrices, matching.mu, axes=([1, 2], [0, 1]))


def laplace_smooth(matching: Matching, market: ValidatedMarket, eps: float) -> Matching:
    """Add ``eps`` to every pair and singles cell, then rescale each cell by the
    average of its two margin corrections so margins hold again on average.

    Men's singles absorb the remaining men-side gap and women's singles the
    women-side gap, so the result is exactly feasible.
    """
    if eps <= 0:
        raise ValueError("laplace eps must be positive")
    mu = matching.mu + eps
    mu_x0 = matching.mu_x0 + eps
    mu_0y = matching.mu_0y + eps
    rx = market.n / (mu.sum(axis=1) + mu_x0)
    ry = market.m / (mu.sum(axis=0) + mu_0y)
    mu = mu * np.sqrt(rx[:, None] * ry[None, :])
    mu_x0 = market.n - mu.sum(axis=1)
    mu_0y = market.m - mu.sum(axis=0)
    if mu_x0.min() <= 0 or mu_0y.min() <= 0:
        raise BoundaryShares("laplace smoothing left a nonpositive singles mass")
    log.info("laplace smoothing applied with eps=%g", eps)
    return Matching(mu, mu_x0, mu_0y)


@dataclass(frozen=True)
class EstimationResult:
    lam: np.ndarray
    fitted: EquilibriumResult
    phi: np.ndarray
    moment_gap: float
    iterations: int
    observed_moments: np.ndarray
    fitted_moments: np.ndarray


def moment_jacobian(market, het_men, het_women, eq: EquilibriumResult,
                    basis: BasisFamily) -> np.ndarray:
    """dC_k / dlambda_l from the differential matching response to dPhi = phi^l."""
    bundle = assemble_hessians(market, het_men, het_women, eq)
    J = np.empty((basis.K, basis.K))
    for l in range(basis.K):
        shock = Shock.build(market.shape, dphi=basis.matrices[l])
        dmu = differential_response(bundle, market, eq, shock).dmu
        J[:, l] = np.tensordot(basis.matrices, dmu, axes=([1, 2], [0, 1]))
    return J


def estimate_lambda(observed: Matching, market: ValidatedMarket,
                    het_men: HeterogeneitySpec, het_women: HeterogeneitySpec,
                    basis: BasisFamily, tolerance: float = MOMENT_TOL,
                    max_iterations: int = MAX_OUTER_ITER, inner_tolerance: float = INNER_TOL,
                    start: Sequence[float] | None = None) -> EstimationResult:
    """Newton root-finding on ``lambda -> C(lambda) - C_hat``.

    The moment Jacobian is symmetric positive semidefinite (it is the Hessian
    of the convex dual welfare in lambda), so steps are damped on the
    squared moment gap.
    """
    basis.check_rank()
    _interior(observed)
    conditional_shares(observed, market)
    target = comoments(observed, basis)
    lam = np.zeros(basis.K) if start is None else np.asarray(start, dtype=float)

    def fit(lam_):
        eq_ = solve_equilibrium(market, het_men, het_women, basis.surplus(lam_),
                                tolerance=inner_tolerance)
        return eq_, comoments(eq_.matching, basis) - target

    eq, gap = fit(lam)
    for it in range(max_iterations + 1):
        if np.max(np.abs(gap)) <= tolerance:
            return EstimationResult(lam, eq, basis.surplus(lam), float(np.max(np.abs(gap))),
                                    it, target, target + gap)
        if it == max_iterations:
            break
        J = moment_jacobian(market, het_men, het_women, eq, basis)
        step = -np.linalg.solve(J, gap)
        t = 1.0
        for _ in range(30):
            eq_c, gap_c = fit(lam + t * step)
            if gap_c @ gap_c < gap @ gap:
                break
            t *= 0.5
        else:
            break
        lam, eq, gap = lam + t * step, eq_c, gap_c
    raise NoConvergence("moment matching did not converge",
                        moment_gap=float(np.max(np.abs(gap))))
