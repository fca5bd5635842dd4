"""Finite-population oracle.

Samples individuals with explicit shocks, solves the individual-level optimal
assignment exactly, and aggregates matches back to types.

Man ``i`` of type ``x`` matched with woman ``j`` of type ``y`` produces
``Phi_xy + eps_iy + eta_jx``; singles get ``eps_i0`` / ``eta_j0``.  Working
with net values ``a_iy = eps_iy - eps_i0`` and ``b_jx = eta_jx - eta_j0``, the
dual of the assignment reduces to a search over type-level utilities ``U``:
every man takes ``max(0, max_y U_xy + a_iy)`` and every woman
``max(0, max_x Phi_xy - U_xy + b_jx)``.  The solver

1. minimises a log-sum-exp smoothing of that dual to locate ``U``,
2. fixes every agent whose best option beats the runner-up by more than a
   window ``delta`` and solves the remaining problem as a small
   (totally unimodular) LP,
3. certifies optimality by finding cell utilities under which every agent's
   assigned option is a best response -- a difference-constraint system
   solved with Bellman-Ford -- and widens ``delta`` if that fails.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from typing import Callable, Iterator, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, minimize
from scipy.special import logsumexp, softmax

from . import rng
from .errors import InvalidSpec, NoConvergence, UnsupportedDistribution
from .heterogeneity import Logit, SimulatedSmoothed
from .market import Matching, ValidatedMarket

log = logging.getLogger(__name__)

Sampler = Callable[[np.ndarray], np.ndarray]
CERTIFICATE_TOL = 1e-9


@dataclass(frozen=True)
class SampledPopulation:
    """``men_shocks[i, 0]`` is man i's singles shock, ``men_shocks[i, 1 + y]``
    his shock for type-y partners; women are laid out the same way over x."""

    men_types: np.ndarray
    men_shocks: np.ndarray
    women_types: np.ndarray
    women_shocks: np.ndarray
    men_counts: np.ndarray
    women_counts: np.ndarray
    scale: float
    seed: int

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.men_counts), len(self.women_counts)

    def net_men(self) -> np.ndarray:
        return self.men_shocks[:, 1:] - self.men_shocks[:, :1]

    def net_women(self) -> np.ndarray:
        return self.women_shocks[:, 1:] - self.women_shocks[:, :1]

    def pair_surplus(self, phi: np.ndarray) -> np.ndarray:
        """Dense individual surplus matrix; only sensible for small populations."""
        y = self.women_types
        x = self.men_types
        return (phi[x][:, y] + self.men_shocks[:, 1:][:, y]
                + self.women_shocks[:, 1:][:, x].T)


@dataclass(frozen=True)
class AssignmentResult:
    matched_pairs: list
    single_men: list
    single_women: list
    total_surplus: float
    men_choice: np.ndarray      # partner type y, or -1 for single
    women_choice: np.ndarray    # partner type x, or -1 for single
    U: np.ndarray               # certifying type-level utilities
    men_payoffs: np.ndarray
    women_payoffs: np.ndarray
    blocking_surplus: float     # max_ij (surplus_ij - u_i - v_j); <= 0 when stable
    n_marginal: int


def _draw_side(spec, seed, tag, counts, n_choices):
    blocks = []
    for t, c in enumerate(counts):
        key = (tag, t)
        if isinstance(spec, Logit):
            blocks.append(rng.gumbel(seed, key, (int(c), n_choices + 1), spec.scale))
        elif isinstance(spec, SimulatedSmoothed):
            raise UnsupportedDistribution(
                "micro draws need a logit spec or a sampler; smoothed draw sets "
                "describe a type-level emax, not a population")
        elif callable(spec):
            u = rng.open_uniforms(seed, key, (int(c), n_choices + 1))
            shocks = np.asarray(spec(u), dtype=float)
            if shocks.shape != u.shape or not np.all(np.isfinite(shocks)):
                raise InvalidSpec("sampler must map uniforms to finite shocks of equal shape")
            blocks.append(shocks)
        else:
            raise UnsupportedDistribution(f"cannot sample from {type(spec).__name__}")
    types = np.repeat(np.arange(len(counts)), counts)
    return types, np.vstack(blocks)


def sample_population(market: ValidatedMarket, het_men: Union[Logit, Sampler] = Logit(),
                      het_women: Union[Logit, Sampler, None] = None, scale: float = 1000.0,
                      seed: int = 0) -> SampledPopulation:
    """``round(n_x * scale)`` men of each type with i.i.d. shock vectors.

    Agent ``k`` of type ``t`` always receives row ``k`` of the stream keyed by
    ``(seed, side, t)``, so enlarging a population keeps incumbents' draws.
    A sampler is any callable mapping an array of open uniforms to shocks.
    """
    if scale < 1:
        raise InvalidSpec("scale must be at least one agent per unit mass")
    het_women = het_men if het_women is None else het_women
    men_counts = np.rint(market.n * scale).astype(int)
    women_counts = np.rint(market.m * scale).astype(int)
    if men_counts.min() < 1 or women_counts.min() < 1:
        raise InvalidSpec("scale too small: some type would have no agents")
    X, Y = market.shape
    mt, ms = _draw_side(het_men, seed, rng.MEN, men_counts, Y)
    wt, ws = _draw_side(het_women, seed, rng.WOMEN, women_counts, X)
    return SampledPopulation(mt, ms, wt, ws, men_counts, women_counts, float(scale), int(seed))


# -- dual machinery ---------------------------------------------------------

def _option_values(pop: SampledPopulation, phi: np.ndarray, U: np.ndarray):
    """Per-agent option values, singles in column 0."""
    a, b = pop.net_men(), pop.net_women()
    om = np.hstack([np.zeros((a.shape[0], 1)), U[pop.men_types] + a])
    ow = np.hstack([np.zeros((b.shape[0], 1)), (phi - U).T[pop.women_types] + b])
    return om, ow


def _smoothed_dual(pop: SampledPopulation, phi: np.ndarray, U0: np.ndarray,
                   tau: float) -> np.ndarray:
    X, Y = phi.shape
    N = len(pop.men_types) + len(pop.women_types)

    def fun(flat):
        U = flat.reshape(X, Y)
        om, ow = _option_values(pop, phi, U)
        val = tau * (logsumexp(om / tau, axis=1).sum() + logsumexp(ow / tau, axis=1).sum())
        pm = softmax(om / tau, axis=1)[:, 1:]
        pw = softmax(ow / tau, axis=1)[:, 1:]
        grad = np.zeros((X, Y))
        np.add.at(grad, pop.men_types, pm)
        gw = np.zeros((Y, X))
        np.add.at(gw, pop.women_types, pw)
        return val / N, (grad - gw.T).ravel() / N

    res = minimize(fun, U0.ravel(), jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "gtol": 1e-12, "ftol": 1e-15})
    return res.x.reshape(X, Y)


def _margin(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    best = values.argmax(axis=1)
    top2 = np.partition(values, values.shape[1] - 2, axis=1)[:, -2:]
    return best, top2[:, 1] - top2[:, 0]


def _solve_marginal_lp(pop, phi, om, ow, men_free, women_free, men_fixed, women_fixed):
    """Optimal options for the free agents given the fixed agents' choices.

    Returns full choice vectors (option index; 0 = single) or None if the
    fixed choices leave the cell balances unreachable.
    """
    X, Y = phi.shape
    a, b = pop.net_men(), pop.net_women()
    fm = np.flatnonzero(men_free)
    fw = np.flatnonzero(women_free)
    nm, nw = len(fm), len(fw)
    kx, ky = Y + 1, X + 1

    # fixed pair counts per cell from each side
    fixed_m = np.zeros((X, Y))
    sel = ~men_free & (men_fixed > 0)
    np.add.at(fixed_m, (pop.men_types[sel], men_fixed[sel] - 1), 1)
    fixed_w = np.zeros((X, Y))
    sel = ~women_free & (women_fixed > 0)
    np.add.at(fixed_w, (women_fixed[sel] - 1, pop.women_types[sel]), 1)

    if nm + nw == 0:
        if np.array_equal(fixed_m, fixed_w):
            return men_fixed.copy(), women_fixed.copy()
        return None

    cost_m = np.hstack([np.zeros((nm, 1)), a[fm] + phi[pop.men_types[fm]]])
    cost_w = np.hstack([np.zeros((nw, 1)), b[fw]])
    c = -np.concatenate([cost_m.ravel(), cost_w.ravel()])
    nvar = nm * kx + nw * ky

    rows, cols, vals = [], [], []
    # each free agent picks exactly one option
    rows.append(np.repeat(np.arange(nm), kx))
    cols.append(np.arange(nm * kx))
    vals.append(np.ones(nm * kx))
    rows.append(nm + np.repeat(np.arange(nw), ky))
    cols.append(nm * kx + np.arange(nw * ky))
    vals.append(np.ones(nw * ky))
    # cell balance: free men at (x,y) - free women at (x,y) = fixed_w - fixed_m
    base = nm + nw
    xm = np.repeat(pop.men_types[fm], Y)
    ym = np.tile(np.arange(Y), nm)
    rows.append(base + xm * Y + ym)
    cols.append((np.arange(nm)[:, None] * kx + 1 + np.arange(Y)[None, :]).ravel())
    vals.append(np.ones(nm * Y))
    yw = np.repeat(pop.women_types[fw], X)
    xw = np.tile(np.arange(X), nw)
    rows.append(base + xw * Y + yw)
    cols.append(nm * kx + (np.arange(nw)[:, None] * ky + 1 + np.arange(X)[None, :]).ravel())
    vals.append(-np.ones(nw * X))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(base + X * Y, nvar))
    rhs = np.concatenate([np.ones(nm + nw), (fixed_w - fixed_m).ravel()])
    res = linprog(c, A_eq=A, b_eq=rhs, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        return None
    z = res.x
    zm = z[:nm * kx].reshape(nm, kx)
    zw = z[nm * kx:].reshape(nw, ky)
    if nm and np.max(np.abs(zm - np.rint(zm))) > 1e-6 or \
            nw and np.max(np.abs(zw - np.rint(zw))) > 1e-6:
        raise NoConvergence("assignment LP returned a fractional vertex")
    men_choice = men_fixed.copy()
    women_choice = women_fixed.copy()
    men_choice[fm] = zm.argmax(axis=1)
    women_choice[fw] = zw.argmax(axis=1)
    return men_choice, women_choice


def _certify(pop, phi, men_choice, women_choice):
    """Type-level U making every assigned option a best response, or None.

    Potentials live on cells (x, y) plus a zero node for the singles option;
    each agent contributes constraints ``p[current] - p[alternative] >= gap``.
    """
    X, Y = phi.shape
    a, b = pop.net_men(), pop.net_women()
    Z = X * Y
    nodes = Z + 1
    # best[(src, dst)] = largest required gap p[src] - p[dst]
    W = np.full((nodes, nodes), -np.inf)
    am = np.hstack([np.zeros((a.shape[0], 1)), a])
    for x in range(X):
        idx = pop.men_types == x
        node = np.concatenate([[Z], x * Y + np.arange(Y)])
        ch = men_choice[idx]
        vals = am[idx]
        for c in np.unique(ch):
            grp = vals[ch == c]
            need = (grp - grp[:, [c]]).max(axis=0)
            for o in range(Y + 1):
                if o != c:
                    W[node[c], node[o]] = max(W[node[c], node[o]], need[o])
    # women: value of option x is phi_xy - U_xy + b_jx, i.e. potential -U
    bw = np.hstack([np.zeros((b.shape[0], 1)), b + phi.T[pop.women_types]])
    for y in range(Y):
        idx = pop.women_types == y
        node = np.concatenate([[Z], np.arange(X) * Y + y])
        ch = women_choice[idx]
        vals = bw[idx]
        for c in np.unique(ch):
            grp = vals[ch == c]
            need = (grp - grp[:, [c]]).max(axis=0)
            # (-U[c]) - (-U[o]) >= need  ->  U[o] - U[c] >= need
            for o in range(X + 1):
                if o != c:
                    W[node[o], node[c]] = max(W[node[o], node[c]], need[o])
    # p_src - p_dst >= w  <=>  p_dst <= p_src - w: shortest paths, edge weight -w
    finite = np.isfinite(W)
    src, dst = np.nonzero(finite)
    wts = -W[src, dst]
    p = np.zeros(nodes)
    for _ in range(nodes + 1):
        cand = p[src] + wts
        upd = np.full(nodes, np.inf)
        np.minimum.at(upd, dst, cand)
        improved = upd < p - 1e-12
        if not improved.any():
            break
        p = np.where(improved, upd, p)
    else:
        return None
    p = p - p[Z]
    viol = (W[src, dst] - (p[src] - p[dst])).max(initial=0.0)
    if viol > CERTIFICATE_TOL:
        return None
    return p[:Z].reshape(X, Y)


def solve_assignment(pop: SampledPopulation, phi, delta: float = 0.05,
                     tau: float = 0.005, max_rounds: int = 12) -> AssignmentResult:
    """Exact surplus-maximising assignment with the option to stay single."""
    X, Y = pop.shape
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    U = _smoothed_dual(pop, phi, phi / 2.0, tau * 10)
    U = _smoothed_dual(pop, phi, U, tau)
    n_agents = len(pop.men_types) + len(pop.women_types)
    for _ in range(max_rounds):
        om, ow = _option_values(pop, phi, U)
        men_best, men_gap = _margin(om)
        women_best, women_gap = _margin(ow)
        men_free = men_gap <= delta
        women_free = women_gap <= delta
        solved = _solve_marginal_lp(pop, phi, om, ow, men_free, women_free,
                                    men_best, women_best)
        if solved is not None:
            cert = _certify(pop, phi, *solved)
            if cert is not None:
                return _package(pop, phi, solved[0], solved[1], cert,
                                int(men_free.sum() + women_free.sum()))
        if men_free.all() and women_free.all():
            break
        delta *= 4.0
        log.debug("widening assignment window to %g", delta)
    raise NoConvergence(f"assignment not certified for {n_agents} agents")


def _package(pop, phi, men_choice, women_choice, U, n_marginal):
    X, Y = phi.shape
    pairs = []
    for x in range(X):
        for y in range(Y):
            mi = np.flatnonzero((pop.men_types == x) & (men_choice == y + 1))
            wj = np.flatnonzero((pop.women_types == y) & (women_choice == x + 1))
            if len(mi) != len(wj):
                raise NoConvergence(f"cell ({x}, {y}) is unbalanced")
            pairs.extend(zip(mi.tolist(), wj.tolist()))
    single_men = np.flatnonzero(men_choice == 0).tolist()
    single_women = np.flatnonzero(women_choice == 0).tolist()
    om, ow = _option_values(pop, phi, U)
    u_i = om.max(axis=1)
    v_j = ow.max(axis=1)
    total = _vector_total(pop, phi, pairs) if pairs else 0.0
    total += float(pop.men_shocks[single_men, 0].sum() + pop.women_shocks[single_women, 0].sum())
    u_full = u_i + pop.men_shocks[:, 0]
    v_full = v_j + pop.women_shocks[:, 0]
    return AssignmentResult(pairs, single_men, single_women, total,
                            men_choice - 1, women_choice - 1, U, u_full, v_full,
                            blocking_surplus(pop, phi, u_full, v_full), n_marginal)


def _vector_total(pop, phi, pairs):
    i, j = np.array(pairs).T
    x, y = pop.men_types[i], pop.women_types[j]
    return float((phi[x, y] + pop.men_shocks[i, 1 + y] + pop.women_shocks[j, 1 + x]).sum())


def blocking_surplus(pop: SampledPopulation, phi: np.ndarray, u: np.ndarray,
                     v: np.ndarray) -> float:
    """``max_ij (surplus_ij - u_i - v_j)`` and the singles deficits, via types.

    Nonpositive iff the payoffs are dual feasible, i.e. no pair and no agent
    alone can block.
    """
    X, Y = phi.shape
    worst = max(float((pop.men_shocks[:, 0] - u).max()),
                float((pop.women_shocks[:, 0] - v).max()))
    for x in range(X):
        im = pop.men_types == x
        if not im.any():
            continue
        best_men = (pop.men_shocks[im, 1:] - u[im, None]).max(axis=0)
        for y in range(Y):
            jw = pop.women_types == y
            if not jw.any():
                continue
            best_w = (pop.women_shocks[jw, 1 + x] - v[jw]).max()
            worst = max(worst, float(phi[x, y] + best_men[y] + best_w))
    return worst


def aggregate(pop: SampledPopulation, assignment: AssignmentResult) -> Matching:
    X, Y = pop.shape
    mu = np.zeros((X, Y))
    for i, j in assignment.matched_pairs:
        mu[pop.men_types[i], pop.women_types[j]] += 1
    mu_x0 = pop.men_counts - mu.sum(axis=1)
    mu_0y = pop.women_counts - mu.sum(axis=0)
    return Matching(mu / pop.scale, mu_x0 / pop.scale, mu_0y / pop.scale)


def realized_market(pop: SampledPopulation, market: ValidatedMarket) -> ValidatedMarket:
    """The market whose masses are the realised counts over scale."""
    return ValidatedMarket(market.types, pop.men_counts / pop.scale,
                           pop.women_counts / pop.scale)


# -- brute-force references ---------------------------------------------------

def enumerate_matchings(n_men: int, n_women: int) -> Iterator[tuple]:
    """Every partial one-to-one matching as a tuple of (i, j) pairs."""
    for k in range(min(n_men, n_women) + 1):
        for men in combinations(range(n_men), k):
            for women in permutations(range(n_women), k):
                yield tuple(zip(men, women))


def exhaustive_optimum(net_surplus: np.ndarray) -> float:
    """Best total net surplus (singles normalised to 0) over all matchings.

    Memoised recursion over (next man, set of taken women); it visits every
    partial matching's value implicitly.
    """
    S = np.asarray(net_surplus, dtype=float)
    I, J = S.shape

    @lru_cache(maxsize=None)
    def best(i, taken):
        if i == I:
            return 0.0
        out = best(i + 1, taken)
        for j in range(J):
            if not taken >> j & 1:
                out = max(out, S[i, j] + best(i + 1, taken | 1 << j))
        return out

    return best(0, 0)


def net_surplus(pop: SampledPopulation, phi) -> np.ndarray:
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    return (pop.pair_surplus(phi) - pop.men_shocks[:, :1]
            - pop.women_shocks[:, 0][None, :])
