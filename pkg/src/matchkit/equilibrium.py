"""Equilibrium of a separable TU matching market.

The equilibrium utilities ``U`` minimise the strictly convex social objective
``sum_x n_x G_x(U_x.) + sum_y m_y H_y(Phi_.y - U_.y)``; its gradient is the
excess demand ``n_x dG_x/dU_xy - m_y dH_y/dV_xy``, which vanishes exactly at
equilibrium.  The default solver is a damped Newton method on this objective.
For logit heterogeneity with equal scales on both sides an IPFP fixed point on
the singles masses is also available.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DimensionMismatch, NoConvergence, NonFiniteUtility, NotLogit
from .heterogeneity import EmaxEvaluation, HeterogeneitySpec, Logit, emax_many
from .market import Matching, ValidatedMarket, validate_surplus

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
MAX_NEWTON_ITER = 500
MAX_HALVINGS = 40
MAX_IPFP_ITER = 200_000


@dataclass(frozen=True)
class SplitUtilities:
    U: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class WelfareVector:
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class EquilibriumResult:
    utilities: SplitUtilities
    matching: Matching
    welfare: WelfareVector
    diagnostics: dict = field(default_factory=dict)

    @property
    def U(self) -> np.ndarray:
        return self.utilities.U

    @property
    def V(self) -> np.ndarray:
        return self.utilities.V

    @property
    def mu(self) -> np.ndarray:
        return self.matching.mu


@dataclass(frozen=True)
class _Evaluation:
    value: float
    gradient: np.ndarray
    men: list
    women: list


def _evaluate(market: ValidatedMarket, het_men: HeterogeneitySpec,
              het_women: HeterogeneitySpec, phi: np.ndarray, U: np.ndarray) -> _Evaluation:
    if not np.all(np.isfinite(U)):
        raise NonFiniteUtility("utilities must be finite")
    V = phi - U
    men = emax_many(het_men, [U[x] for x in range(U.shape[0])])
    women = emax_many(het_women, [V[:, y] for y in range(U.shape[1])])
    value = float(sum(n * e.value for n, e in zip(market.n, men))
                  + sum(m * e.value for m, e in zip(market.m, women)))
    demand_men = market.n[:, None] * np.array([e.gradient for e in men])
    demand_women = market.m[None, :] * np.array([e.gradient for e in women]).T
    return _Evaluation(value, demand_men - demand_women, men, women)


def social_gain(market: ValidatedMarket, het_men: HeterogeneitySpec,
                het_women: HeterogeneitySpec, phi, U) -> tuple[float, np.ndarray]:
    """Social objective G(U) + H(Phi - U) and its gradient with respect to U."""
    phi = validate_surplus(phi, market)
    U = np.asarray(U, dtype=float).reshape(phi.shape)
    ev = _evaluate(market, het_men, het_women, phi, U)
    return ev.value, ev.gradient


def hessian_blocks(market: ValidatedMarket, men: list[EmaxEvaluation],
                   women: list[EmaxEvaluation]) -> tuple[np.ndarray, np.ndarray]:
    """Dense D2G and D2H over cells flattened row-major (index x*|Y| + y)."""
    X, Y = market.shape
    d2G = np.zeros((X * Y, X * Y))
    d2H = np.zeros((X * Y, X * Y))
    for x, e in enumerate(men):
        sl = slice(x * Y, (x + 1) * Y)
        d2G[sl, sl] = market.n[x] * e.hessian
    for y, e in enumerate(women):
        idx = np.arange(X) * Y + y
        d2H[np.ix_(idx, idx)] = market.m[y] * e.hessian
    return d2G, d2H


def _newton_direction(H: np.ndarray, g: np.ndarray) -> Optional[np.ndarray]:
    try:
        return -cho_solve(cho_factor(H), g)
    except LinAlgError:
        return None


def _line_search(market, het_men, het_women, phi, U, ev, direction):
    slope = float(ev.gradient.ravel() @ direction.ravel())
    resid = np.max(np.abs(ev.gradient))
    t = 1.0
    for _ in range(MAX_HALVINGS):
        cand = U + t * direction
        ev_c = _evaluate(market, het_men, het_women, phi, cand)
        # the residual test keeps progress once value changes drop below rounding
        if ev_c.value <= ev.value + 1e-4 * t * slope or np.max(np.abs(ev_c.gradient)) < resid:
            return cand, ev_c
        t *= 0.5
    return None


def _polish(market, het_men, het_women, phi, U, ev):
    """One extra full Newton step, kept only if it lowers the residual."""
    d2G, d2H = hessian_blocks(market, ev.men, ev.women)
    direction = _newton_direction(d2G + d2H, ev.gradient.ravel())
    if direction is None:
        return U
    cand = U + direction.reshape(U.shape)
    try:
        ev_c = _evaluate(market, het_men, het_women, phi, cand)
    except NonFiniteUtility:
        return U
    if np.max(np.abs(ev_c.gradient)) < np.max(np.abs(ev.gradient)):
        return cand
    return U


def build_result(market: ValidatedMarket, het_men: HeterogeneitySpec,
                 het_women: HeterogeneitySpec, phi: np.ndarray, U: np.ndarray,
                 diagnostics: dict) -> EquilibriumResult:
    """Package U into utilities, matching and welfare.

    Pair masses come from the men's demand; women's singles are set so that
    their margins hold exactly.
    """
    ev = _evaluate(market, het_men, het_women, phi, U)
    mu = market.n[:, None] * np.array([e.gradient for e in ev.men])
    mu_x0 = market.n * np.array([e.singles_share for e in ev.men])
    mu_0y = market.m - mu.sum(axis=0)
    u = np.array([e.value for e in ev.men])
    v = np.array([e.value for e in ev.women])
    diag = dict(diagnostics)
    diag["residual"] = float(np.max(np.abs(ev.gradient)))
    U = np.array(U, dtype=float)
    return EquilibriumResult(SplitUtilities(U, phi - U), Matching(mu, mu_x0, mu_0y),
                             WelfareVector(u, v), diag)


def _check_dims(market, het_men, het_women, phi):
    phi = validate_surplus(phi, market)
    # simulated specs must supply one block per type (or one shared block)
    for spec, count in ((het_men, market.shape[0]), (het_women, market.shape[1])):
        draws = getattr(spec, "draws", None)
        if draws is not None and len(draws) not in (1, count):
            raise DimensionMismatch(f"{len(draws)} draws blocks for {count} types")
    return phi


def solve_equilibrium(market: ValidatedMarket, het_men: HeterogeneitySpec,
                      het_women: HeterogeneitySpec, phi, tolerance: float = DEFAULT_TOL,
                      max_iterations: int = MAX_NEWTON_ITER, start=None) -> EquilibriumResult:
    """Damped Newton on the social objective, started at ``Phi / 2`` by default."""
    phi = _check_dims(market, het_men, het_women, phi)
    U = phi / 2.0 if start is None else np.array(start, dtype=float).reshape(phi.shape)
    ev = _evaluate(market, het_men, het_women, phi, U)
    gradient_steps = 0
    for it in range(max_iterations + 1):
        resid = float(np.max(np.abs(ev.gradient)))
        if resid <= tolerance:
            U = _polish(market, het_men, het_women, phi, U, ev)
            return build_result(market, het_men, het_women, phi, U,
                                {"solver": "newton", "iterations": it,
                                 "gradient_steps": gradient_steps})
        if it == max_iterations:
            break
        d2G, d2H = hessian_blocks(market, ev.men, ev.women)
        direction = _newton_direction(d2G + d2H, ev.gradient.ravel())
        step = None
        if direction is not None:
            step = _line_search(market, het_men, het_women, phi, U, ev,
                                direction.reshape(U.shape))
        if step is None:
            gradient_steps += 1
            step = _line_search(market, het_men, het_women, phi, U, ev, -ev.gradient)
        if step is None:
            break
        U, ev = step
    raise NoConvergence(f"Newton solver stopped with residual {resid:.3e}",
                        residual=resid, iterations=it)


def ipfp_logit(market: ValidatedMarket, het_men: HeterogeneitySpec,
               het_women: HeterogeneitySpec, phi, tolerance: float = DEFAULT_TOL,
               max_iterations: int = MAX_IPFP_ITER) -> EquilibriumResult:
    """Choo-Siow equilibrium by alternating margin updates on sqrt singles masses.

    With unit scales ``mu_xy = sqrt(mu_x0 mu_0y) exp(Phi_xy / 2)``; a common
    scale ``theta`` is handled by working with ``Phi / theta``.  Unequal
    scales fall back to :func:`solve_equilibrium`.
    """
    if not (isinstance(het_men, Logit) and isinstance(het_women, Logit)):
        raise NotLogit("IPFP requires logit heterogeneity on both sides")
    phi = validate_surplus(phi, market)
    if het_men.scale != het_women.scale:
        log.info("unequal logit scales; routing IPFP request to the Newton solver")
        res = solve_equilibrium(market, het_men, het_women, phi, tolerance)
        res.diagnostics["solver"] = "newton (ipfp fallback)"
        return res
    theta = het_men.scale
    K = np.exp(phi / theta / 2.0)
    n, m = market.n, market.m
    b = np.sqrt(m / 2.0)
    resid = np.inf
    for it in range(1, max_iterations + 1):
        B = K @ b
        a = (np.sqrt(B * B + 4.0 * n) - B) / 2.0
        C = K.T @ a
        total_w = b * b + b * C
        if it % 10 == 0 or it == 1:
            mu = a[:, None] * K * b[None, :]
            resid = float(np.max(np.abs(mu * (1.0 - m / total_w)[None, :])))
            if resid <= tolerance * 1e-2:
                break
        b = (np.sqrt(C * C + 4.0 * m) - C) / 2.0
    else:
        raise NoConvergence(f"IPFP stopped with residual {resid:.3e}", residual=resid)
    U = theta * (phi / theta / 2.0 + np.log(b)[None, :] - np.log(a)[:, None])
    res = build_result(market, het_men, het_women, phi, U,
                       {"solver": "ipfp", "iterations": it})
    if res.diagnostics["residual"] > tolerance:
        raise NoConvergence("IPFP fixed point does not meet the stationarity tolerance",
                            residual=res.diagnostics["residual"])
    return res
