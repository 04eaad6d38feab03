"""Gaussian heat kernel and Gauss-Hermite spatial convolution.

The convolution uses the substitution v = (x - y) / (2 a sqrt(t)), which turns
the heat-kernel integral into a Gauss-Hermite integral:

    int p(t, x - y) g(y) dy = pi^{-1/2} int exp(-v^2) g(x - 2 a v sqrt(t)) dv
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite nodes and weights for the weight function exp(-v^2)."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return len(self.nodes)


@lru_cache(maxsize=None)
def gauss_hermite(n: int = 64) -> QuadratureRule:
    """Golub-Welsch construction of the n-point Gauss-Hermite rule.

    The Jacobi matrix of the physicists' Hermite polynomials has zero diagonal
    and off-diagonal entries sqrt(k/2). Its eigenvalues are the nodes and the
    squared first eigenvector components, times sqrt(pi), are the weights.
    """
    if not 2 <= n <= 256:
        raise ValueError(f"quadrature node count must be in [2, 256], got {n}")
    off = np.sqrt(np.arange(1, n) / 2.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(n), off)
    weights = SQRT_PI * vecs[0] ** 2
    # enforce exact symmetry about 0
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights * (SQRT_PI / weights.sum())
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(nodes, weights)


def heat_kernel(t, x, a: float):
    """p(t, x) = exp(-x^2 / (4 a^2 t)) / (2 a sqrt(pi t))."""
    t = np.asarray(t, dtype=float)
    if a == 0:
        raise ValueError("diffusion coefficient a must be nonzero")
    if np.any(t <= 0):
        raise ValueError("heat kernel requires t > 0")
    a = abs(a)
    out = np.exp(-np.square(x) / (4.0 * a * a * t)) / (2.0 * a * np.sqrt(np.pi * t))
    return out if np.ndim(out) else float(out)


def convolve(t_lag, x, a: float, g, rule: QuadratureRule | None = None):
    """Approximate int p(t_lag, x - y) g(y) dy by Gauss-Hermite quadrature.

    ``t_lag`` and ``x`` broadcast against each other; ``g`` must accept numpy
    arrays. Exact when g composed with the substitution is a polynomial of
    degree below 2 * rule.count.
    """
    if rule is None:
        rule = gauss_hermite()
    t_lag = np.asarray(t_lag, dtype=float)
    if np.any(t_lag <= 0):
        raise ValueError("convolve requires t_lag > 0; use the delta limit at zero lag")
    x = np.asarray(x, dtype=float)
    spread = 2.0 * a * np.sqrt(t_lag)
    y = x[..., None] - spread[..., None] * rule.nodes
    vals = np.asarray(g(y), dtype=float)
    if vals.shape != y.shape:
        vals = np.broadcast_to(vals, y.shape)
    out = vals @ rule.weights / SQRT_PI
    return out if np.ndim(out) else float(out)
