"""Legendre polynomial chaos surrogates on uniform inputs.

A random field c(theta) with theta uniform on [-1, 1]^M is expanded in
multivariate Legendre polynomials Psi_beta(theta) = prod_j psi_{beta_j}(theta_j)
over a truncated multi-index set.  Coefficients are recovered by discrete
projection against a quadrature rule; the mean is the zeroth coefficient
and the variance the norm-weighted sum of squares of the others.

The basis is orthogonal but not normalized: <Psi_beta, Psi_beta> under the
uniform probability density equals Q_beta = prod_j 1 / (2 beta_j + 1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .quadrature import QuadratureRule

__all__ = [
    "MultiIndexSet",
    "GpcSurrogate",
    "build_multiindex_set",
    "legendre_eval",
    "basis_eval",
    "project",
    "surrogate_mean",
    "surrogate_variance",
    "surrogate_eval",
    "surrogate_sample_stats",
    "approximation_error_report",
    "save_surrogate",
    "load_surrogate",
]

MAX_INDICES = 10**5

TRUNCATION_RULES = ("total_degree", "max_degree", "product_degree")


@dataclass(frozen=True)
class MultiIndexSet:
    """Truncated set of Legendre multi-indices in graded-lex order.

    ``indices`` is an int array of shape (K, M); row 0 is always the
    all-zeros index.  ``norms`` holds Q_beta = prod_j 1/(2 beta_j + 1).
    """

    M: int
    p: int
    rule: str
    indices: np.ndarray
    norms: np.ndarray = field(init=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "norms", 1.0 / np.prod(2.0 * idx + 1.0, axis=1))

    def __len__(self) -> int:
        return self.indices.shape[0]


def build_multiindex_set(M: int, p: int, rule: str = "total_degree") -> MultiIndexSet:
    """Enumerate all multi-indices allowed by the truncation rule.

    Rules: ``total_degree`` keeps sum(beta) <= p, ``max_degree`` keeps
    max(beta) <= p, and ``product_degree`` keeps prod(max(beta_j, 1)) <= p
    (zero entries count as one, which resolves the ambiguity of a plain
    product for indices touching zero).  Output is graded-lexicographic:
    sorted by total degree, ties broken lexicographically.
    """
    if M < 1 or p < 0:
        raise ValueError(f"need M >= 1 and p >= 0, got M={M}, p={p}")
    if rule not in TRUNCATION_RULES:
        raise ConfigError(f"unknown truncation rule {rule!r}; expected one of {TRUNCATION_RULES}")
    if rule == "total_degree":
        accepted = [
            beta
            for total in range(p + 1)
            for beta in itertools.product(range(total + 1), repeat=M)
            if sum(beta) == total
        ]
    else:
        candidates = itertools.product(range(p + 1), repeat=M)
        if rule == "max_degree":
            accepted = list(candidates)
        else:
            accepted = [b for b in candidates if _protected_product(b) <= max(p, 1)]
            if p == 0:
                accepted = [b for b in accepted if sum(b) == 0]
    accepted.sort(key=lambda b: (sum(b), b))
    if len(accepted) > MAX_INDICES:
        raise ConfigError(f"multi-index set has {len(accepted)} members, exceeding {MAX_INDICES}")
    return MultiIndexSet(M, p, rule, np.array(accepted, dtype=np.int64).reshape(len(accepted), M))


def _protected_product(beta) -> int:
    out = 1
    for b in beta:
        out *= max(b, 1)
    return out


def legendre_eval(n: int, x):
    """psi_n(x) by the three-term recurrence from psi_0 = 1, psi_1 = x."""
    return legendre_eval_all(n, x)[n]


def legendre_eval_all(nmax: int, x):
    """Stack of psi_0(x) .. psi_nmax(x); leading axis indexes the degree."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape, dtype=float)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for n in range(1, nmax):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def basis_eval(beta, theta):
    """Multivariate Legendre polynomial Psi_beta evaluated at theta.

    ``theta`` may be a single point of shape (M,) or a batch (n, M);
    the result is a scalar or a length-n vector accordingly.
    """
    beta = np.asarray(beta, dtype=np.int64)
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    pts = np.atleast_2d(theta)
    if pts.shape[1] != beta.shape[0]:
        raise ValueError(f"dimension mismatch: index has {beta.shape[0]} entries, theta has {pts.shape[1]}")
    table = legendre_eval_all(int(beta.max(initial=0)), pts)   # (deg+1, n, M)
    vals = np.ones(pts.shape[0])
    for j, bj in enumerate(beta):
        vals = vals * table[bj, :, j]
    return float(vals[0]) if single else vals


def _basis_matrix(index_set: MultiIndexSet, thetas: np.ndarray) -> np.ndarray:
    """Matrix B with B[k, i] = Psi_{beta_k}(theta_i); thetas shape (n, M)."""
    table = legendre_eval_all(int(index_set.indices.max(initial=0)), thetas)  # (deg+1, n, M)
    B = np.ones((len(index_set), thetas.shape[0]))
    for k, beta in enumerate(index_set.indices):
        for j, bj in enumerate(beta):
            if bj:
                B[k] *= table[bj, :, j]
    return B


@dataclass(frozen=True)
class GpcSurrogate:
    """Truncated Legendre expansion with per-index coefficient fields.

    ``coeffs`` has shape (K, ...) where K = len(index_set) and the
    trailing axes hold whatever the projected samples held (a scalar,
    a DoF vector, or snapshots x DoFs).  ``snapshot_times`` and
    ``grid_shape`` are optional metadata carried through serialization.
    """

    index_set: MultiIndexSet
    coeffs: np.ndarray
    snapshot_times: np.ndarray | None = None
    grid_descriptor: dict | None = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape[0] != len(self.index_set):
            raise ValueError(
                f"coefficient count {coeffs.shape[0]} != index count {len(self.index_set)}"
            )
        object.__setattr__(self, "coeffs", coeffs)


def project(samples, rule: QuadratureRule, index_set: MultiIndexSet,
            snapshot_times=None, grid_descriptor=None) -> GpcSurrogate:
    """Discrete projection of per-node samples onto the Legendre basis.

    c_beta = (1 / Q_beta) * sum_i w_i Psi_beta(theta_i) * samples[i]
    with probability-normalized weights w_i, applied along the leading
    (node) axis of ``samples``.  Exact-degree models are recovered
    exactly when the rule integrates degree p + deg(model) products.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != rule.n_nodes:
        raise ValueError(f"{samples.shape[0]} sample sets for {rule.n_nodes} quadrature nodes")
    if rule.dim != index_set.M:
        raise ValueError(f"rule dimension {rule.dim} != index set dimension {index_set.M}")
    B = _basis_matrix(index_set, rule.nodes) * rule.weights[np.newaxis, :]
    flat = samples.reshape(rule.n_nodes, -1)
    coeffs = (B @ flat) / index_set.norms[:, np.newaxis]
    coeffs = coeffs.reshape((len(index_set),) + samples.shape[1:])
    return GpcSurrogate(index_set, coeffs, snapshot_times=snapshot_times,
                        grid_descriptor=grid_descriptor)


def surrogate_mean(s: GpcSurrogate) -> np.ndarray:
    """Mean field: the coefficient of the all-zeros index."""
    return s.coeffs[0].copy()


def surrogate_variance(s: GpcSurrogate) -> np.ndarray:
    """Variance field: sum over beta != 0 of Q_beta * c_beta^2."""
    norms = s.index_set.norms[1:]
    sq = s.coeffs[1:] ** 2
    return np.tensordot(norms, sq, axes=(0, 0))


def surrogate_eval(s: GpcSurrogate, theta) -> np.ndarray:
    """Evaluate the expansion at one point (M,) or a batch (n, M).

    Returns the coefficient field shape for a single point, or an array
    with a leading batch axis for a batch of points.
    """
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    pts = np.atleast_2d(theta)
    B = _basis_matrix(s.index_set, pts)           # (K, n)
    flat = s.coeffs.reshape(len(s.index_set), -1)  # (K, F)
    vals = B.T @ flat                              # (n, F)
    vals = vals.reshape((pts.shape[0],) + s.coeffs.shape[1:])
    return vals[0] if single else vals


@dataclass(frozen=True)
class SampleStats:
    """Monte-Carlo statistics of a surrogate at one probe location."""

    thresholds: np.ndarray
    exceedance: np.ndarray
    quantile_levels: np.ndarray
    quantiles: np.ndarray
    histogram: np.ndarray
    bin_edges: np.ndarray
    n_samples: int


def surrogate_sample_stats(s: GpcSurrogate, probe, Ns: int, thresholds=(),
                           quantiles=(), seed: int = 0, bins: int = 100) -> SampleStats:
    """Sample the surrogate at a probe DoF and collect counting statistics.

    ``probe`` indexes into the coefficient field's trailing axes (an
    integer for 1D fields, a tuple for snapshot x DoF layouts; None for
    scalar surrogates).  Exceedance probabilities are plain counts
    #{c_hat > c*} / Ns over ``Ns`` seeded uniform samples; quantiles are
    order statistics of the same sample.
    """
    if Ns < 1:
        raise ValueError(f"need Ns >= 1, got {Ns}")
    coeff = s.coeffs
    if probe is not None:
        sl = (slice(None),) + (tuple(np.atleast_1d(probe)) if np.ndim(probe) else (probe,))
        coeff = coeff[sl]
    coeff = np.asarray(coeff, dtype=float).reshape(len(s.index_set))
    rng = np.random.default_rng(seed)
    samples = np.empty(Ns)
    chunk = 200_000
    for start in range(0, Ns, chunk):
        stop = min(start + chunk, Ns)
        pts = rng.uniform(-1.0, 1.0, size=(stop - start, s.index_set.M))
        samples[start:stop] = _basis_matrix(s.index_set, pts).T @ coeff
    thresholds = np.asarray(thresholds, dtype=float)
    exceed = np.array([(samples > t).sum() / Ns for t in thresholds])
    qlevels = np.asarray(quantiles, dtype=float)
    qvals = (np.quantile(samples, qlevels, method="inverted_cdf")
             if qlevels.size else np.empty(0))
    hist, edges = np.histogram(samples, bins=bins)
    return SampleStats(thresholds, exceed, qlevels, np.asarray(qvals, dtype=float),
                       hist, edges, Ns)


@dataclass(frozen=True)
class ErrorReport:
    """Surrogate-vs-truth errors over a validation sample.

    ``rms_field``/``max_field`` resolve the error per field entry;
    ``rms``/``max`` aggregate over both validation points and the field
    (the spatial L2 uses plain entrywise RMS).  The reported numbers mix
    truncation and quadrature-approximation error; the two are not
    separable without the exact expansion.
    """

    rms_field: np.ndarray
    max_field: np.ndarray
    rms: float
    max: float
    n_validation: int


def approximation_error_report(s: GpcSurrogate, thetas, values) -> ErrorReport:
    """Compare surrogate predictions with fresh samples at new theta points."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    values = np.asarray(values, dtype=float)
    pred = surrogate_eval(s, thetas)
    err = pred - values.reshape(pred.shape)
    rms_field = np.sqrt(np.mean(err**2, axis=0))
    max_field = np.max(np.abs(err), axis=0)
    return ErrorReport(
        rms_field=rms_field,
        max_field=max_field,
        rms=float(np.sqrt(np.mean(err**2))),
        max=float(np.max(np.abs(err))),
        n_validation=thetas.shape[0],
    )


def save_surrogate(path, s: GpcSurrogate) -> None:
    """Write a surrogate to a self-describing .npz container.

    Keys: ``M``, ``p``, ``rule`` (truncation rule name), ``indices``
    (K x M int array), ``coeffs`` (K x ... float array), and optional
    ``snapshot_times`` plus grid descriptor arrays ``grid_lo``,
    ``grid_hi``, ``grid_n``.
    """
    payload = {
        "M": np.int64(s.index_set.M),
        "p": np.int64(s.index_set.p),
        "rule": np.str_(s.index_set.rule),
        "indices": s.index_set.indices,
        "coeffs": s.coeffs,
    }
    if s.snapshot_times is not None:
        payload["snapshot_times"] = np.asarray(s.snapshot_times, dtype=float)
    if s.grid_descriptor is not None:
        payload["grid_lo"] = np.asarray(s.grid_descriptor["lo"], dtype=float)
        payload["grid_hi"] = np.asarray(s.grid_descriptor["hi"], dtype=float)
        payload["grid_n"] = np.asarray(s.grid_descriptor["n"], dtype=np.int64)
    np.savez_compressed(path, **payload)


def load_surrogate(path) -> GpcSurrogate:
    """Read a surrogate written by :func:`save_surrogate`."""
    with np.load(path, allow_pickle=False) as data:
        index_set = MultiIndexSet(int(data["M"]), int(data["p"]),
                                  str(data["rule"]), data["indices"])
        times = data["snapshot_times"] if "snapshot_times" in data else None
        descriptor = None
        if "grid_n" in data:
            descriptor = {
                "lo": data["grid_lo"].tolist(),
                "hi": data["grid_hi"].tolist(),
                "n": data["grid_n"].tolist(),
            }
        return GpcSurrogate(index_set, data["coeffs"], snapshot_times=times,
                            grid_descriptor=descriptor)
