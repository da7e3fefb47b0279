"""Reference element tools on (-1, 1): GLL/Gauss rules, nodal Lagrange bases,
differentiation, coefficient interpolation and Gram matrices.

Polynomials are always carried in nodal (Lagrange) form; monomial
coefficients are never stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .errors import InvalidCoefficientError, InvalidOrderError

NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights on [-1, 1]. ``order`` is W for a Lobatto rule
    (W+1 points) and the number of points for a Gauss rule."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "lobatto"

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _legendre_table(x: np.ndarray, n: int) -> np.ndarray:
    # rows k = 0..n of P_k(x) by the three-term recurrence
    table = np.empty((n + 1, len(x)))
    table[0] = 1.0
    if n >= 1:
        table[1] = x
    for k in range(1, n):
        table[k + 1] = ((2 * k + 1) * x * table[k] - k * table[k - 1]) / (k + 1)
    return table


@lru_cache(maxsize=None)
def _gll_cached(W: int) -> tuple[np.ndarray, np.ndarray]:
    n = W + 1
    # Chebyshev-Gauss-Lobatto initial guess, ascending
    x = -np.cos(np.pi * np.arange(n) / W)
    for _ in range(NEWTON_MAXITER):
        P = _legendre_table(x, W)
        # Newton step for (1 - x^2) P'_W(x), written via P_W and P_{W-1}
        step = (x * P[W] - P[W - 1]) / (n * P[W])
        x = x - step
        if np.max(np.abs(step)) < NEWTON_TOL:
            break
    x[0], x[-1] = -1.0, 1.0
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    if n % 2 == 1:
        x[W // 2] = 0.0
    P = _legendre_table(x, W)
    w = 2.0 / (W * n * P[W] ** 2)
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gll_rule(W: int) -> QuadratureRule:
    """The (W+1)-point Gauss-Lobatto-Legendre rule.

    Nodes are -1, +1 and the roots of P'_W, computed by Newton iteration;
    weights are 2 / (W (W+1) P_W(x)^2). Exact for degree <= 2W-1.
    """
    if int(W) != W or W < 1:
        raise InvalidOrderError(f"GLL order must be an integer >= 1, got {W!r}")
    x, w = _gll_cached(int(W))
    return QuadratureRule(int(W), x, w, "lobatto")


@lru_cache(maxsize=None)
def _gauss_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``n_points`` nodes, exact for degree 2n-1."""
    if int(n_points) != n_points or n_points < 1:
        raise InvalidOrderError(f"Gauss rule needs >= 1 point, got {n_points!r}")
    x, w = _gauss_cached(int(n_points))
    return QuadratureRule(int(n_points), x, w, "gauss")


def exact_rule(degree: int) -> QuadratureRule:
    """Smallest Gauss rule integrating polynomials of ``degree`` exactly."""
    return gauss_rule(max(1, degree // 2 + 1))


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_matrix(nodes: np.ndarray, points) -> np.ndarray:
    """V[i, j] = l_j(points[i]) for the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    bw = barycentric_weights(nodes)
    diff = points[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    terms = bw / diff
    V = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    V[hit] = exact[hit].astype(float)
    return V


def differentiation_matrix(rule: QuadratureRule) -> np.ndarray:
    """D[i, j] = l_j'(x_i); exact on polynomials of degree <= W."""
    x = np.asarray(rule.nodes, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise InvalidOrderError("differentiation needs at least two nodes")
    bw = barycentric_weights(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bw[None, :] / bw[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    # negative-sum trick keeps D @ ones == 0 to roundoff
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True, eq=False)
class ReferencePolynomial:
    """A polynomial on (-1, 1) held by its values at a set of nodes."""

    degree: int
    nodes: np.ndarray
    nodal_values: np.ndarray

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = lagrange_matrix(self.nodes, xi.ravel()) @ self.nodal_values
        return out.reshape(xi.shape)

    def derivative(self) -> "ReferencePolynomial":
        if self.degree == 0:
            return ReferencePolynomial(0, self.nodes, np.zeros_like(self.nodal_values))
        D = differentiation_matrix(QuadratureRule(self.degree, self.nodes, self.nodes))
        return ReferencePolynomial(self.degree, self.nodes, D @ self.nodal_values)


def interpolate_coefficient(f, degree: int) -> ReferencePolynomial:
    """Interpolate ``f`` on the GLL nodes of the given degree.

    Degree 0 samples f at the midpoint. Raises InvalidCoefficientError when
    any sample is not finite.
    """
    if int(degree) != degree or degree < 0:
        raise InvalidOrderError(f"interpolation degree must be >= 0, got {degree!r}")
    degree = int(degree)
    nodes = np.array([0.0]) if degree == 0 else np.array(gll_rule(degree).nodes)
    values = sample(f, nodes)
    if not np.all(np.isfinite(values)):
        bad = nodes[~np.isfinite(values)]
        raise InvalidCoefficientError(f"coefficient is not finite at xi = {bad.tolist()}")
    return ReferencePolynomial(degree, nodes, values)


def sample(f, x: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on an array, accepting scalar-only callables too."""
    x = np.asarray(x, dtype=float)
    try:
        with np.errstate(all="ignore"):
            y = np.asarray(f(x), dtype=float)
        return np.broadcast_to(y, x.shape).astype(float)
    except (TypeError, ValueError):
        return np.array([float(f(t)) for t in x.ravel()]).reshape(x.shape)


@dataclass(frozen=True, eq=False)
class ReferenceGram:
    """Gram matrices of the degree-W nodal basis on (-1, 1)."""

    order: int
    l2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    @property
    def full(self) -> np.ndarray:
        """Matrix of the squared H^2 norm (L^2 + H^1 + H^2 seminorm parts)."""
        return self.l2 + self.h1 + self.h2


@lru_cache(maxsize=None)
def reference_gram(W: int) -> ReferenceGram:
    if int(W) != W or W < 1:
        raise InvalidOrderError(f"order must be an integer >= 1, got {W!r}")
    rule = gll_rule(W)
    D = differentiation_matrix(rule)
    quad = gauss_rule(math.ceil((2 * W + 2) / 2) + 1)
    V = lagrange_matrix(rule.nodes, quad.nodes)
    w = quad.weights[:, None]
    mats = []
    for B in (V, V @ D, V @ D @ D):
        G = B.T @ (w * B)
        mats.append(0.5 * (G + G.T))
    for G in mats:
        G.setflags(write=False)
    return ReferenceGram(int(W), *mats)
