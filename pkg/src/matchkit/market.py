"""Observable primitives: type spaces, population masses, surplus, matchings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateTypeLabel,
    InfeasibleMatching,
    InvalidTypeLabel,
    NonFiniteUtility,
    NonPositiveMass,
)

SINGLES_LABEL = "0"
DEFAULT_FEASIBILITY_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TypeSpace:
    x_types: tuple[str, ...]
    y_types: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.x_types), len(self.y_types)


@dataclass(frozen=True)
class ValidatedMarket:
    types: TypeSpace
    n: np.ndarray
    m: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.types.shape


@dataclass(frozen=True)
class Matching:
    """Pair masses ``mu`` (|X| x |Y|) plus the two singles vectors."""

    mu: np.ndarray
    mu_x0: np.ndarray
    mu_0y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "mu_x0", _frozen(self.mu_x0))
        object.__setattr__(self, "mu_0y", _frozen(self.mu_0y))
        if self.mu.ndim != 2 or self.mu_x0.shape != (self.mu.shape[0],) \
                or self.mu_0y.shape != (self.mu.shape[1],):
            raise DimensionMismatch(
                f"matching shapes disagree: mu {self.mu.shape}, "
                f"mu_x0 {self.mu_x0.shape}, mu_0y {self.mu_0y.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.mu.shape


@dataclass(frozen=True)
class ConditionalShares:
    """Matching ratios.

    ``men[0, x]`` is the singles share of men of type x and ``men[1 + y, x]``
    the share matched with type y; ``women`` is laid out the same way over x.
    """

    men: np.ndarray
    women: np.ndarray

    @property
    def men_pairs(self) -> np.ndarray:
        """mu^M_{y|x} as an |X| x |Y| matrix."""
        return self.men[1:].T

    @property
    def women_pairs(self) -> np.ndarray:
        """mu^W_{x|y} as an |X| x |Y| matrix."""
        return self.women[1:]


def _labels(raw: Sequence[Any], side: str) -> tuple[str, ...]:
    labels = tuple(str(v) for v in raw)
    if not labels:
        raise DimensionMismatch(f"{side} type list is empty")
    if SINGLES_LABEL in labels:
        raise InvalidTypeLabel(f"'{SINGLES_LABEL}' is reserved for singles ({side})")
    if len(set(labels)) != len(labels):
        raise DuplicateTypeLabel(f"duplicate label among {side} types: {list(labels)}")
    return labels


def validate_market(raw: Mapping[str, Any]) -> ValidatedMarket:
    """Build a market from a mapping with keys ``x_types, y_types, n, m``.

    The short keys ``x`` and ``y`` are accepted as aliases.
    """
    xs = _labels(raw["x_types"] if "x_types" in raw else raw["x"], "x")
    ys = _labels(raw["y_types"] if "y_types" in raw else raw["y"], "y")
    n = np.asarray(raw["n"], dtype=float).ravel()
    m = np.asarray(raw["m"], dtype=float).ravel()
    if n.shape != (len(xs),) or m.shape != (len(ys),):
        raise DimensionMismatch(
            f"masses have lengths {n.size}, {m.size} for {len(xs)}, {len(ys)} types")
    if not (np.all(np.isfinite(n)) and np.all(np.isfinite(m))):
        raise NonPositiveMass("masses must be finite")
    if np.any(n <= 0) or np.any(m <= 0):
        raise NonPositiveMass("all population masses must be strictly positive")
    return ValidatedMarket(TypeSpace(xs, ys), _frozen(n), _frozen(m))


def make_market(n, m, x_types=None, y_types=None) -> ValidatedMarket:
    """Convenience constructor with default labels ``x1..`` / ``y1..``."""
    n = np.atleast_1d(np.asarray(n, dtype=float))
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if x_types is None:
        x_types = [f"x{i + 1}" for i in range(n.size)]
    if y_types is None:
        y_types = [f"y{j + 1}" for j in range(m.size)]
    return validate_market({"x_types": x_types, "y_types": y_types, "n": n, "m": m})


def validate_surplus(phi, market: ValidatedMarket) -> np.ndarray:
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape != market.shape:
        raise DimensionMismatch(f"phi has shape {phi.shape}, market is {market.shape}")
    if not np.all(np.isfinite(phi)):
        raise NonFiniteUtility("surplus matrix has non-finite entries")
    phi = phi.copy()
    phi.setflags(write=False)
    return phi


@dataclass(frozen=True)
class FeasibilityReport:
    men_residual: float
    women_residual: float
    tolerance: float

    @property
    def residual(self) -> float:
        return max(self.men_residual, self.women_residual)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def check_feasibility(matching: Matching, market: ValidatedMarket,
                      tolerance: float = DEFAULT_FEASIBILITY_TOL) -> FeasibilityReport:
    if matching.shape != market.shape:
        raise DimensionMismatch(f"matching is {matching.shape}, market is {market.shape}")
    men = matching.mu.sum(axis=1) + matching.mu_x0 - market.n
    women = matching.mu.sum(axis=0) + matching.mu_0y - market.m
    return FeasibilityReport(float(np.max(np.abs(men))), float(np.max(np.abs(women))),
                             tolerance)


def conditional_shares(matching: Matching, market: ValidatedMarket,
                       tolerance: float = DEFAULT_FEASIBILITY_TOL) -> ConditionalShares:
    report = check_feasibility(matching, market, tolerance)
    negative = min(matching.mu.min(), matching.mu_x0.min(), matching.mu_0y.min())
    if not report.passed or negative < 0:
        raise InfeasibleMatching(
            f"margin residual {report.residual:.3e} exceeds {tolerance:.1e}"
            if negative >= 0 else "matching has negative masses",
            residual=report.residual)
    men = np.vstack([matching.mu_x0, matching.mu.T]) / market.n
    women = np.vstack([matching.mu_0y, matching.mu]) / market.m
    return ConditionalShares(_frozen(men), _frozen(women))


def masses_from_shares(shares: ConditionalShares, market: ValidatedMarket) -> Matching:
    """Inverse of :func:`conditional_shares` (men side carries the pair masses)."""
    mu = shares.men_pairs * market.n[:, None]
    return Matching(mu, shares.men[0] * market.n, shares.women[0] * market.m)
