"""Market with a single type on each side.

Each side is described by the distribution of the difference between the
singles shock and the match shock, ``eps_0 - eps`` for men and
``eta_0 - eta`` for women.  The equilibrium solves
``n F_P(U) = m F_Q(Phi - U) = mu`` and all local responses are scalar.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import expit, logit, ndtr, ndtri

from .errors import NoConvergence, OutOfRangeMatching
from .rng import EULER_GAMMA


@dataclass(frozen=True)
class ShockDifference:
    """cdf / pdf / quantile of a shock difference.

    ``location`` is the mean of the singles shock, which sets the welfare
    level ``u = location + int_{-inf}^{U} cdf``.  ``integrated_cdf`` is an
    optional closed form of that integral.
    """

    name: str
    cdf: Callable[[float], float]
    pdf: Callable[[float], float]
    quantile: Callable[[float], float]
    location: float = 0.0
    integrated_cdf: Optional[Callable[[float], float]] = None

    def k(self, t: float) -> float:
        """Density evaluated at the t-quantile."""
        return float(self.pdf(self.quantile(t)))

    def welfare(self, utility: float) -> float:
        if self.integrated_cdf is not None:
            tail = float(self.integrated_cdf(utility))
        else:
            tail, _ = integrate.quad(self.cdf, -np.inf, utility, epsabs=1e-13, epsrel=1e-12)
        return self.location + tail


def _logistic_pdf(t):
    p = expit(t)
    return p * (1.0 - p)


# unit Gumbel shocks: the difference is standard logistic, E eps_0 = gamma
LOGISTIC = ShockDifference("logistic", expit, _logistic_pdf, logit, EULER_GAMMA,
                           lambda t: float(np.logaddexp(0.0, t)))

NORMAL = ShockDifference("normal", ndtr, lambda t: np.exp(-t * t / 2) / np.sqrt(2 * np.pi),
                         ndtri, 0.0,
                         lambda t: float(t * ndtr(t) + np.exp(-t * t / 2) / np.sqrt(2 * np.pi)))

DISTRIBUTIONS = {"logistic": LOGISTIC, "normal": NORMAL}


@dataclass(frozen=True)
class OneTypeModel:
    n: float
    m: float
    phi: float
    P: ShockDifference = LOGISTIC
    Q: ShockDifference = LOGISTIC

    def __post_init__(self):
        if not (self.n > 0 and self.m > 0):
            raise OutOfRangeMatching("population masses must be positive")


@dataclass(frozen=True)
class OneTypeSolution:
    model: OneTypeModel
    U: float
    mu: float
    u: float
    v: float
    kP: float
    kQ: float

    @property
    def V(self) -> float:
        return self.model.phi - self.U

    @property
    def S(self) -> float:
        return self.model.n * self.kP + self.model.m * self.kQ

    @property
    def T(self) -> float:
        return 1.0 / self.S


@dataclass(frozen=True)
class OneTypeDifferentials:
    dU: float
    du: float
    dv: float
    dmu: float
    e_n: float    # elasticity of mu in n
    e_m: float    # elasticity of mu in m
    s: float      # dmu = (s / 2) dPhi


def solve_one_type(model: OneTypeModel, tol: float = 1e-15,
                   max_iterations: int = 200) -> OneTypeSolution:
    """Bracket and bisect the excess demand, then polish with Newton."""
    n, m, phi, P, Q = model.n, model.m, model.phi, model.P, model.Q

    def excess(t):
        return n * P.cdf(t) - m * Q.cdf(phi - t)

    lo = hi = phi / 2.0
    width = 1.0
    while excess(lo) > 0 or excess(hi) < 0:
        lo, hi = phi / 2.0 - width, phi / 2.0 + width
        width *= 2.0
        if width > 1e6:
            raise NoConvergence("could not bracket the one-type equilibrium")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    U = 0.5 * (lo + hi)
    for _ in range(max_iterations):
        slope = n * P.pdf(U) + m * Q.pdf(phi - U)
        step = excess(U) / slope
        U -= step
        if abs(step) <= tol * max(1.0, abs(U)):
            break
    else:
        raise NoConvergence("Newton polish did not converge", residual=float(excess(U)))
    mu = float(n * P.cdf(U))
    return OneTypeSolution(model, float(U), mu, P.welfare(U), Q.welfare(phi - U),
                           P.k(mu / n), Q.k(mu / m))


def one_type_identify(mu: float, n: float, m: float, P: ShockDifference = LOGISTIC,
                      Q: ShockDifference = LOGISTIC) -> float:
    """Surplus that rationalises ``mu`` marriages: ``F_P^-1(mu/n) + F_Q^-1(mu/m)``."""
    if not (0.0 < mu < min(n, m)):
        raise OutOfRangeMatching(f"need 0 < mu < min(n, m), got mu={mu}", mu=mu)
    return float(P.quantile(mu / n) + Q.quantile(mu / m))


def one_type_differentials(solution: OneTypeSolution, dlogn: float = 0.0,
                           dlogm: float = 0.0, dphi: float = 0.0) -> OneTypeDifferentials:
    n, m = solution.model.n, solution.model.m
    mu, kP, kQ, T = solution.mu, solution.kP, solution.kQ, solution.T
    dU = T * (mu * (dlogm - dlogn) + m * kQ * dphi)
    dmu = T * (mu * (m * kQ * dlogn + n * kP * dlogm) + n * m * kP * kQ * dphi)
    return OneTypeDifferentials(
        dU=dU,
        du=mu / n * dU,
        dv=mu / m * (dphi - dU),
        dmu=dmu,
        e_n=T * m * kQ,
        e_m=T * n * kP,
        s=2.0 * T * n * m * kP * kQ,
    )
