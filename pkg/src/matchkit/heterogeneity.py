"""Emax functions of one side of the market.

For men of type x the emax is ``G_x(U) = E max(max_y U_y + eps_y, eps_0)``;
its gradient gives the choice probabilities over partner types and its
Hessian is a Stieltjes matrix (gross substitutes).  Women are handled by the
same code, with utilities indexed by men's types.

Two families are provided:

* :class:`Logit` -- i.i.d. Gumbel shocks with scale ``theta``, closed form.
* :class:`SimulatedSmoothed` -- any distribution given through sampled draws;
  the sample max is replaced by a log-sum-exp at temperature ``smoothing`` so
  that Hessians exist.  The smoothing bias is at most
  ``smoothing * log(choices + 1)`` on the value.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from . import rng
from .errors import BoundaryShares, DimensionMismatch, InvalidSpec, NoConvergence, \
    NonFiniteUtility

MEN = "men"
WOMEN = "women"

BOUNDARY_SHARE = 1e-300
CONJUGATE_MAX_ITER = 200
CONJUGATE_TOL = 1e-10
DEFAULT_SMOOTHING = 0.05


@dataclass(frozen=True)
class Logit:
    scale: float = 1.0
    side: str = MEN

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidSpec(f"logit scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class SimulatedSmoothed:
    """Sampled shocks, one ``(S, choices + 1)`` matrix per type; column 0 is
    the singles shock."""

    draws: tuple = field(repr=False)
    smoothing: float = DEFAULT_SMOOTHING
    side: str = MEN

    def __post_init__(self):
        if isinstance(self.draws, np.ndarray):
            blocks = (self.draws,) if self.draws.ndim == 2 else tuple(self.draws)
        else:
            blocks = tuple(self.draws)
        frozen = []
        for d in blocks:
            d = np.array(d, dtype=float)
            if d.ndim != 2 or d.shape[0] < 2 or d.shape[1] < 2:
                raise InvalidSpec("each draws block must be S x (choices+1) with S >= 2")
            if not np.all(np.isfinite(d)):
                raise InvalidSpec("draws must be finite")
            d.setflags(write=False)
            frozen.append(d)
        if not frozen:
            raise InvalidSpec("no draws supplied")
        object.__setattr__(self, "draws", tuple(frozen))
        if not (np.isfinite(self.smoothing) and self.smoothing > 0):
            raise InvalidSpec(f"smoothing must be positive, got {self.smoothing}")

    def block(self, type_index: int) -> np.ndarray:
        # a single block is shared by every type
        if len(self.draws) == 1:
            return self.draws[0]
        return self.draws[type_index]


HeterogeneitySpec = Union[Logit, SimulatedSmoothed]


def simulated_from_seed(seed: int, num_draws: int, n_types: int, n_choices: int,
                        side: str = MEN, smoothing: float = DEFAULT_SMOOTHING,
                        distribution: str = "gumbel", scale: float = 1.0
                        ) -> SimulatedSmoothed:
    """Draw per-type shock matrices from counter-based streams."""
    samplers = {"gumbel": rng.gumbel, "normal": rng.normal}
    if distribution not in samplers:
        raise InvalidSpec(f"unknown draws distribution {distribution!r}")
    tag = rng.MEN if side == MEN else rng.WOMEN
    blocks = tuple(samplers[distribution](seed, (rng.DRAWS, tag, t),
                                          (num_draws, n_choices + 1), scale)
                   for t in range(n_types))
    return SimulatedSmoothed(blocks, smoothing, side)


@dataclass(frozen=True)
class EmaxEvaluation:
    value: float
    gradient: np.ndarray
    singles_share: float
    hessian: np.ndarray


def _check_utilities(utilities) -> np.ndarray:
    u = np.atleast_1d(np.asarray(utilities, dtype=float))
    if u.ndim != 1:
        raise DimensionMismatch("utilities must be a vector")
    if not np.all(np.isfinite(u)):
        raise NonFiniteUtility("systematic utilities must be finite")
    return u


def emax(spec: HeterogeneitySpec, utilities, type_index: int = 0) -> EmaxEvaluation:
    """Value, choice probabilities and Hessian of the emax at ``utilities``."""
    u = _check_utilities(utilities)
    if isinstance(spec, Logit):
        theta = spec.scale
        z = np.concatenate([[0.0], u / theta])
        lse = logsumexp(z)
        p = np.exp(z - lse)
        probs = p[1:]
        hess = (np.diag(probs) - np.outer(probs, probs)) / theta
        return EmaxEvaluation(theta * lse + theta * rng.EULER_GAMMA, probs, float(p[0]), hess)

    draws = spec.block(type_index)
    if draws.shape[1] != u.size + 1:
        raise DimensionMismatch(
            f"draws have {draws.shape[1] - 1} choices, utilities have {u.size}")
    sigma = spec.smoothing
    z = (draws + np.concatenate([[0.0], u])) / sigma
    lse = logsumexp(z, axis=1)
    p = np.exp(z - lse[:, None])
    S = draws.shape[0]
    mean_p = p.mean(axis=0)
    probs = mean_p[1:]
    inner = p[:, 1:]
    hess = (np.diag(probs) - inner.T @ inner / S) / sigma
    return EmaxEvaluation(float(sigma * lse.mean()), probs, float(mean_p[0]), hess)


def _check_shares(shares, singles):
    s = np.atleast_1d(np.asarray(shares, dtype=float))
    s0 = 1.0 - s.sum() if singles is None else float(singles)
    if not (np.all(np.isfinite(s)) and np.isfinite(s0)):
        raise BoundaryShares("shares must be finite")
    if np.any(s <= BOUNDARY_SHARE) or s0 <= BOUNDARY_SHARE:
        raise BoundaryShares("shares on the boundary of the simplex have no "
                             "finite conjugate gradient", shares=s.tolist(), singles=s0)
    return s, s0


def conjugate_gradient(spec: HeterogeneitySpec, shares, singles=None,
                       type_index: int = 0) -> np.ndarray:
    """Utilities whose emax gradient equals ``shares``.

    ``shares`` holds the non-singles choice shares; the singles share defaults
    to ``1 - sum(shares)``.
    """
    s, s0 = _check_shares(shares, singles)
    start = np.log(s) - np.log(s0)
    if isinstance(spec, Logit):
        return spec.scale * start

    # damped Newton on the convex function G(U) - U.s
    u = start
    ev = emax(spec, u, type_index)
    obj = ev.value - u @ s
    for _ in range(CONJUGATE_MAX_ITER):
        resid = ev.gradient - s
        if np.max(np.abs(resid)) <= CONJUGATE_TOL:
            return u
        step = -np.linalg.solve(ev.hessian, resid)
        t = 1.0
        for _ in range(40):
            cand = u + t * step
            ev_c = emax(spec, cand, type_index)
            obj_c = ev_c.value - cand @ s
            if obj_c <= obj + 1e-4 * t * (resid @ step) or \
                    np.max(np.abs(ev_c.gradient - s)) < np.max(np.abs(resid)):
                break
            t *= 0.5
        u, ev, obj = cand, ev_c, obj_c
    if np.max(np.abs(ev.gradient - s)) <= CONJUGATE_TOL:
        return u
    raise NoConvergence("conjugate gradient inversion did not converge",
                        residual=float(np.max(np.abs(ev.gradient - s))))


def conjugate_value(spec: HeterogeneitySpec, shares, singles=None,
                    type_index: int = 0) -> float:
    """Legendre-Fenchel transform ``sup_U (U.s - G(U))`` at interior shares."""
    s, s0 = _check_shares(shares, singles)
    u = conjugate_gradient(spec, s, s0, type_index)
    return float(u @ s - emax(spec, u, type_index).value)


def worker_count() -> int:
    raw = os.environ.get("MATCHKIT_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise InvalidSpec(f"MATCHKIT_THREADS must be an integer, got {raw!r}")
    if k < 1:
        raise InvalidSpec("MATCHKIT_THREADS must be >= 1")
    return k


def emax_many(spec: HeterogeneitySpec, rows: Sequence[np.ndarray]) -> list[EmaxEvaluation]:
    """Evaluate one emax per type; results come back in type order."""
    threads = worker_count()
    if threads == 1 or len(rows) < 2:
        return [emax(spec, r, t) for t, r in enumerate(rows)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda a: emax(spec, a[1], a[0]), enumerate(rows)))
