"""Local comparative statics of the equilibrium.

Differentiating the equilibrium condition in the primitives ``(n, m, Phi)``
gives the linear system

    (D2G + D2H) dU = -dG/dn dn + dH/dm dm + D2H dPhi,

where, cell by cell, the population terms are ``-mu^M_{y|x} dn_x`` and
``+mu^W_{x|y} dm_y``.  ``T = (D2G + D2H)^-1`` is the inverse of a Stieltjes
matrix, hence entrywise nonnegative, which drives all the sign results.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .equilibrium import EquilibriumResult, _evaluate, hessian_blocks
from .errors import DimensionMismatch, SingularSystem
from .heterogeneity import HeterogeneitySpec
from .market import ValidatedMarket

log = logging.getLogger(__name__)

MIN_SHARE = 1e-12
MAX_CONDITION = 1e12
STIELTJES_TOL = 1e-12


@dataclass(frozen=True)
class HessianBundle:
    d2G: np.ndarray
    d2H: np.ndarray
    T: np.ndarray
    men_shares: np.ndarray     # mu^M_{y|x}, |X| x |Y|
    women_shares: np.ndarray   # mu^W_{x|y}, |X| x |Y|
    factor: tuple

    @property
    def shape(self) -> tuple[int, int]:
        return self.men_shares.shape

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self.factor, rhs)

    def cell_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Selection matrices M (|X| x |X||Y|) and W (|Y| x |X||Y|) holding the
        conditional shares on the cells of each type."""
        X, Y = self.shape
        M = np.zeros((X, X * Y))
        W = np.zeros((Y, X * Y))
        for x in range(X):
            M[x, x * Y:(x + 1) * Y] = self.men_shares[x]
        for y in range(Y):
            W[y, np.arange(X) * Y + y] = self.women_shares[:, y]
        return M, W


@dataclass(frozen=True)
class Shock:
    dn: np.ndarray
    dm: np.ndarray
    dphi: np.ndarray

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "Shock":
        return cls(np.zeros(shape[0]), np.zeros(shape[1]), np.zeros(shape))

    @classmethod
    def build(cls, shape, dn=None, dm=None, dphi=None) -> "Shock":
        X, Y = shape
        dn = np.zeros(X) if dn is None else np.asarray(dn, dtype=float).ravel()
        dm = np.zeros(Y) if dm is None else np.asarray(dm, dtype=float).ravel()
        dphi = np.zeros((X, Y)) if dphi is None else np.asarray(dphi, dtype=float)
        if dphi.size == X * Y:
            dphi = dphi.reshape(X, Y)
        if dn.shape != (X,) or dm.shape != (Y,) or dphi.shape != (X, Y):
            raise DimensionMismatch(f"shock does not fit a {X}x{Y} market")
        if not (np.all(np.isfinite(dn)) and np.all(np.isfinite(dm))
                and np.all(np.isfinite(dphi))):
            raise DimensionMismatch("shock entries must be finite")
        return cls(dn, dm, dphi)


@dataclass(frozen=True)
class WelfareBlocks:
    du_dn: np.ndarray    # |X| x |X|
    du_dm: np.ndarray    # |X| x |Y|
    du_dphi: np.ndarray  # |X| x |X||Y|
    dv_dn: np.ndarray    # |Y| x |X|
    dv_dm: np.ndarray    # |Y| x |Y|
    dv_dphi: np.ndarray  # |Y| x |X||Y|

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("du_dn", "du_dm", "du_dphi", "dv_dn", "dv_dm", "dv_dphi")}


@dataclass(frozen=True)
class ComparativeStaticsReport:
    dU: np.ndarray
    dV: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    dmu: np.ndarray
    dmu_x0: np.ndarray
    dmu_0y: np.ndarray
    blocks: Optional[WelfareBlocks] = None


def assemble_hessians(market: ValidatedMarket, het_men: HeterogeneitySpec,
                      het_women: HeterogeneitySpec,
                      equilibrium: EquilibriumResult) -> HessianBundle:
    mt = equilibrium.matching
    phi = equilibrium.U + equilibrium.V
    smallest = min((mt.mu / market.n[:, None]).min(), (mt.mu_x0 / market.n).min(),
                   (mt.mu / market.m[None, :]).min(), (mt.mu_0y / market.m).min())
    if smallest < MIN_SHARE:
        raise SingularSystem(f"equilibrium share {smallest:.3e} is too close to the "
                             "boundary to differentiate", smallest_share=float(smallest))
    ev = _evaluate(market, het_men, het_women, phi, equilibrium.U)
    d2G, d2H = hessian_blocks(market, ev.men, ev.women)
    A = d2G + d2H
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystem(f"condition number {cond:.3e} of D2G + D2H too large",
                             condition=float(cond))
    try:
        factor = cho_factor(A)
    except LinAlgError as exc:
        raise SingularSystem("D2G + D2H is not positive definite") from exc
    T = cho_solve(factor, np.eye(A.shape[0]))
    T = (T + T.T) / 2.0
    if T.min() < -STIELTJES_TOL:
        log.warning("T has a negative entry %.3e", T.min())
    return HessianBundle(d2G, d2H, T, mt.mu / market.n[:, None],
                         mt.mu / market.m[None, :], factor)


def differential_response(bundle: HessianBundle, market: ValidatedMarket,
                          equilibrium: EquilibriumResult,
                          shock: Shock) -> ComparativeStaticsReport:
    X, Y = bundle.shape
    if shock.dn.shape != (X,) or shock.dm.shape != (Y,) or shock.dphi.shape != (X, Y):
        raise DimensionMismatch(f"shock does not fit a {X}x{Y} market")
    pm, pw = bundle.men_shares, bundle.women_shares
    rhs = (-pm * shock.dn[:, None] + pw * shock.dm[None, :]).ravel() \
        + bundle.d2H @ shock.dphi.ravel()
    dU_flat = bundle.solve(rhs)
    dU = dU_flat.reshape(X, Y)
    dV = shock.dphi - dU
    dmu = (bundle.d2G @ dU_flat).reshape(X, Y) + pm * shock.dn[:, None]
    return ComparativeStaticsReport(
        dU=dU, dV=dV,
        du=(pm * dU).sum(axis=1),
        dv=(pw * dV).sum(axis=0),
        dmu=dmu,
        dmu_x0=shock.dn - dmu.sum(axis=1),
        dmu_0y=shock.dm - dmu.sum(axis=0),
    )


def welfare_derivatives(bundle: HessianBundle, market: ValidatedMarket,
                        equilibrium: EquilibriumResult) -> WelfareBlocks:
    """Jacobians of per-type welfare in (n, m, Phi).

    ``du/dn = -M T M'`` and ``du/dm = M T W'`` where ``M`` / ``W`` carry the
    men's / women's conditional shares, so ``dv/dn`` is the transpose of
    ``du/dm``.
    """
    M, W = bundle.cell_weights()
    MT = M @ bundle.T
    WT = W @ bundle.T
    return WelfareBlocks(
        du_dn=-MT @ M.T,
        du_dm=MT @ W.T,
        du_dphi=MT @ bundle.d2H,
        dv_dn=WT @ M.T,
        dv_dm=-WT @ W.T,
        dv_dphi=WT @ bundle.d2G,
    )


def comparative_statics(market: ValidatedMarket, het_men: HeterogeneitySpec,
                        het_women: HeterogeneitySpec, equilibrium: EquilibriumResult,
                        shock: Optional[Shock] = None,
                        blocks: bool = True) -> ComparativeStaticsReport:
    bundle = assemble_hessians(market, het_men, het_women, equilibrium)
    shock = Shock.zeros(market.shape) if shock is None else shock
    report = differential_response(bundle, market, equilibrium, shock)
    if blocks:
        report = replace(report, blocks=welfare_derivatives(bundle, market, equilibrium))
    return report
