"""Sampling and quadrature rules on the hypercube [-1, 1]^M.

Provides the Halton low-discrepancy sequence for quasi-Monte Carlo,
plain Monte Carlo, 1D Gauss-Legendre and (nested) Clenshaw-Curtis rules,
their full tensor products, and Smolyak sparse grids built from the
nested Clenshaw-Curtis family.

All multivariate rules returned as :class:`QuadratureRule` carry
probability-normalized weights (they integrate against the uniform
density 0.5^M on [-1, 1]^M, so the weights of f == 1 sum to one).  The
1D constructors return raw Lebesgue weights summing to 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "QuadratureRule",
    "halton",
    "monte_carlo",
    "gauss_legendre_1d",
    "clenshaw_curtis_1d",
    "tensor_rule",
    "smolyak_cc",
    "rule_to_table",
]

#: hard cap on the number of nodes any constructor may produce
MAX_NODES = 10**7


@dataclass(frozen=True)
class QuadratureRule:
    """A set of nodes in [-1, 1]^M with probability-normalized weights.

    Attributes
    ----------
    nodes : ndarray, shape (n, M)
    weights : ndarray, shape (n,)
        Sum to one (within roundoff) for every rule built here.
    kind : str
        One of ``qmc_halton``, ``mc``, ``gauss_legendre_tensor``,
        ``clenshaw_curtis_tensor``, ``smolyak_cc``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    normalization: float = field(init=False)

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape[0] != weights.shape[0] or weights.shape[0] == 0:
            raise ValueError(
                f"node/weight count mismatch: {nodes.shape[0]} vs {weights.shape[0]}"
            )
        if np.any(np.abs(nodes) > 1.0 + 1e-12):
            raise ValueError("quadrature nodes must lie in [-1, 1]^M")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "normalization", float(weights.sum()))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def integrate(self, values):
        """Weighted sum of per-node values (first axis indexes nodes)."""
        values = np.asarray(values, dtype=float)
        return np.tensordot(self.weights, values, axes=(0, 0))


def _first_primes(m: int) -> list[int]:
    primes, cand = [], 2
    while len(primes) < m:
        if all(cand % p for p in primes):
            primes.append(cand)
        cand += 1
    return primes


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    """van der Corput radical inverse of integer indices in the given base."""
    result = np.zeros(len(indices), dtype=float)
    rest = indices.astype(np.int64).copy()
    inv_b = 1.0 / base
    scale = inv_b
    while np.any(rest > 0):
        result += (rest % base) * scale
        rest //= base
        scale *= inv_b
    return result


def halton(n: int, M: int) -> QuadratureRule:
    """Halton sequence of length ``n`` in dimension ``M``.

    The j-th coordinate is the radical inverse in the j-th prime base,
    with the index starting at 1 (the origin is skipped) and no
    scrambling.  Points are mapped affinely from (0, 1) to (-1, 1);
    weights are uniform 1/n.
    """
    if n < 1 or M < 1:
        raise ValueError(f"need n >= 1 and M >= 1, got n={n}, M={M}")
    if n > MAX_NODES:
        raise ConfigError(f"qMC sample count {n} exceeds the cap of {MAX_NODES}")
    idx = np.arange(1, n + 1)
    cols = [2.0 * _radical_inverse(idx, b) - 1.0 for b in _first_primes(M)]
    nodes = np.column_stack(cols)
    return QuadratureRule(nodes, np.full(n, 1.0 / n), "qmc_halton")


def monte_carlo(n: int, M: int, seed: int) -> QuadratureRule:
    """Seeded i.i.d. uniform sample on [-1, 1]^M with weights 1/n."""
    if n < 1 or M < 1:
        raise ValueError(f"need n >= 1 and M >= 1, got n={n}, M={M}")
    if n > MAX_NODES:
        raise ConfigError(f"MC sample count {n} exceeds the cap of {MAX_NODES}")
    rng = np.random.default_rng(seed)
    nodes = rng.uniform(-1.0, 1.0, size=(n, M))
    return QuadratureRule(nodes, np.full(n, 1.0 / n), "mc")


def _legendre_pair(n: int, x: np.ndarray):
    """Values of the Legendre polynomials (P_n, P_{n-1}) at x."""
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for k in range(n):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    return p, p_prev


def gauss_legendre_1d(n: int):
    """Nodes and Lebesgue weights of the n-point Gauss-Legendre rule.

    Nodes are the roots of the degree-n Legendre polynomial, found by
    Newton iteration from Chebyshev-like initial guesses; weights are
    2 / ((1 - x^2) P_n'(x)^2) and sum to 2.  Exact for polynomials of
    degree <= 2n - 1.  Probability weights are obtained by halving.

    Returns
    -------
    (nodes, weights) : two ndarrays of shape (n,), nodes ascending.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if n == 1:
        return np.array([0.0]), np.array([2.0])
    k = np.arange(n)
    x = np.cos(np.pi * (k + 0.75) / (n + 0.5))
    for _ in range(100):
        p, p_prev = _legendre_pair(n, x)
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # enforce exact symmetry about the origin
    x = 0.5 * (x - x[::-1])
    p, p_prev = _legendre_pair(n, x)
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def clenshaw_curtis_1d(level: int):
    """Nested Clenshaw-Curtis rule at the given level.

    Level ``l`` has ``n = 2**l + 1`` cosine-spaced nodes (a single node
    at the origin for ``l = 0``); the nodes of level ``l`` are a subset
    of level ``l + 1`` bit-for-bit, which the Smolyak construction
    relies on.  Lebesgue weights (summing to 2) follow the standard
    cosine-sum formula; the rule is exact for degree <= n - 1.

    Returns
    -------
    (nodes, weights) : two ndarrays of shape (n,), nodes ascending.
    """
    if level < 0:
        raise ValueError(f"need level >= 0, got {level}")
    if level == 0:
        return np.array([0.0]), np.array([2.0])
    n = 2**level + 1
    N = n - 1
    # k / N is an exact power-of-two division, so shared nodes coincide
    # exactly across levels; the midpoint is pinned to 0.0
    t = np.arange(n) / N
    nodes = -np.cos(np.pi * t)
    nodes[N // 2] = 0.0
    k = np.arange(n)
    j = np.arange(1, N // 2 + 1)
    b = np.where(j == N // 2, 1.0, 2.0)
    c = np.where((k == 0) | (k == N), 1.0, 2.0)
    cos_table = np.cos(2.0 * np.pi * np.outer(j, k) / N)
    w = (c / N) * (1.0 - (b / (4.0 * j * j - 1.0)) @ cos_table)
    return nodes, w


def tensor_rule(nodes_1d, weights_1d, M: int, kind: str) -> QuadratureRule:
    """Full tensor product of a 1D rule, probability-normalized.

    The product weights carry an overall factor 0.5**M so that they sum
    to one when the 1D weights sum to 2 (the Lebesgue normalization of
    both 1D families here).
    """
    if M < 1:
        raise ValueError(f"need M >= 1, got {M}")
    n1 = len(nodes_1d)
    if n1**M > MAX_NODES:
        raise ConfigError(f"tensor rule would have {n1}^{M} nodes, exceeding {MAX_NODES}")
    grids = np.meshgrid(*([np.asarray(nodes_1d, dtype=float)] * M), indexing="ij")
    nodes = np.column_stack([g.ravel() for g in grids])
    wgrids = np.meshgrid(*([np.asarray(weights_1d, dtype=float)] * M), indexing="ij")
    weights = 0.5**M * math.prod(wgrids).ravel()
    return QuadratureRule(nodes, weights, kind)


def gauss_legendre_tensor(n: int, M: int) -> QuadratureRule:
    """Probability-normalized tensor Gauss-Legendre rule, n points per axis."""
    x, w = gauss_legendre_1d(n)
    return tensor_rule(x, w, M, "gauss_legendre_tensor")


def clenshaw_curtis_tensor(level: int, M: int) -> QuadratureRule:
    """Probability-normalized tensor Clenshaw-Curtis rule at one level."""
    x, w = clenshaw_curtis_1d(level)
    return tensor_rule(x, w, M, "clenshaw_curtis_tensor")


def smolyak_cc(level: int, M: int) -> QuadratureRule:
    """Smolyak sparse grid from nested Clenshaw-Curtis rules.

    Standard combination over level multi-indices ``k`` with
    ``level - M + 1 <= |k| <= level``; coincident nodes are merged and
    their weights summed (exact float comparison is safe because the
    nested 1D nodes coincide bit-for-bit across levels).
    """
    if level < 0 or M < 1:
        raise ValueError(f"need level >= 0 and M >= 1, got level={level}, M={M}")
    rules = {l: clenshaw_curtis_1d(l) for l in range(level + 1)}
    merged: dict[tuple, float] = {}
    for total in range(max(0, level - M + 1), level + 1):
        coeff = (-1.0) ** (level - total) * math.comb(M - 1, level - total)
        for k in _compositions(total, M):
            axes_x = [rules[ki][0] for ki in k]
            axes_w = [rules[ki][1] for ki in k]
            grids = np.meshgrid(*axes_x, indexing="ij")
            pts = np.column_stack([g.ravel() for g in grids])
            wgrids = np.meshgrid(*axes_w, indexing="ij")
            wts = coeff * 0.5**M * math.prod(wgrids).ravel()
            for pt, wt in zip(map(tuple, pts), wts):
                merged[pt] = merged.get(pt, 0.0) + wt
            if len(merged) > MAX_NODES:
                raise ConfigError(f"sparse grid exceeds the cap of {MAX_NODES} nodes")
    keys = sorted(merged)
    nodes = np.array(keys, dtype=float)
    weights = np.array([merged[k] for k in keys])
    return QuadratureRule(nodes, weights, "smolyak_cc")


def _compositions(total: int, M: int):
    """All M-tuples of nonnegative integers summing to ``total``."""
    if M == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, M - 1):
            yield (first,) + rest


def rule_to_table(rule: QuadratureRule) -> str:
    """Plain-text audit table: one node per line, coordinates then weight."""
    lines = [f"# kind={rule.kind} n={rule.n_nodes} dim={rule.dim}"]
    for pt, wt in zip(rule.nodes, rule.weights):
        coords = " ".join(f"{x:.17g}" for x in pt)
        lines.append(f"{coords} {wt:.17g}")
    return "\n".join(lines) + "\n"
