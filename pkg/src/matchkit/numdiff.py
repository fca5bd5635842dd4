"""Central finite differences used as an independent derivative oracle."""

from __future__ import annotations

from typing import Callable

import numpy as np

RELATIVE_FLOOR = 1e-6


def central_jacobian(f: Callable[[np.ndarray], np.ndarray], x, step: float = 1e-5) -> np.ndarray:
    """Jacobian of ``f`` at ``x``: rows index outputs, columns inputs."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e.flat[k] = step
        cols.append((np.ravel(f(x + e)) - np.ravel(f(x - e))) / (2 * step))
    return np.array(cols).T


def central_derivative(f: Callable[[float], np.ndarray], step: float = 1e-5) -> np.ndarray:
    """Directional derivative of ``t -> f(t)`` at 0."""
    return (np.asarray(f(step)) - np.asarray(f(-step))) / (2 * step)


def relative_error(analytic, numeric, floor: float = RELATIVE_FLOOR) -> float:
    """Worst entrywise ``|a - b| / max(|b|, floor)``.

    The floor keeps entries that are zero up to solver noise from dominating.
    """
    a = np.asarray(analytic, dtype=float)
    b = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor), initial=0.0))
