"""Nonlinear and linear solvers: Newton with line search, BiCGStab, and a
geometric multigrid V-cycle with ILU(0) smoothing.

The per-step nonlinear systems are solved by a damped Newton method;
each Newton correction comes from BiCGStab preconditioned either by a
single-level ILU(0) or by a V-cycle over rediscretized coarse-level
Jacobians.  The multigrid hierarchy acts on the full coupled 2x2-block
Jacobian (no pressure/salt splitting); the block structure enters only
through the interleaved DOF ordering, on which scalar ILU(0) sees the
complete blocks.

Everything here is deterministic: fixed iteration orders, no threading
beyond whatever BLAS does for a fixed thread count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._ilu_kernels import diagonal_positions, ilu0_factorize, ilu0_solve
from .errors import KrylovError, NewtonError

__all__ = [
    "NewtonConfig",
    "LinearSolverConfig",
    "NewtonReport",
    "ILU0",
    "ilu0_smoother",
    "bicgstab",
    "MgHierarchy",
    "mg_vcycle",
    "newton_solve",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    """Termination and line-search settings for the Newton iteration."""

    tol_abs: float = 1e-12
    tol_rel: float = 1e-8
    max_iter: int = 20
    ls_max_halvings: int = 12

    def __post_init__(self):
        if self.tol_abs <= 0.0 or self.tol_rel <= 0.0:
            raise ValueError("Newton tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("need max_iter >= 1")


@dataclass(frozen=True)
class LinearSolverConfig:
    """Krylov and multigrid settings.

    ``mg_coarse`` selects the coarsest-level treatment: ``"direct"``
    uses a dense LU when the coarse system has at most
    ``coarse_direct_max_dofs`` unknowns (falling back to smoothing
    above that), ``"many_smooths"`` always applies
    ``coarse_smooth_sweeps`` ILU(0) sweeps.
    """

    krylov_tol_rel: float = 1e-8
    krylov_max_iter: int = 200
    mg_pre_smooth: int = 1
    mg_post_smooth: int = 1
    mg_coarse: str = "direct"
    coarse_direct_max_dofs: int = 2000
    coarse_smooth_sweeps: int = 50

    def __post_init__(self):
        if self.krylov_tol_rel <= 0.0:
            raise ValueError("Krylov tolerance must be positive")
        if min(self.krylov_max_iter, self.mg_pre_smooth, self.mg_post_smooth,
               self.coarse_smooth_sweeps) < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.mg_coarse not in ("direct", "many_smooths"):
            raise ValueError(f"unknown coarse strategy {self.mg_coarse!r}")


@dataclass
class NewtonReport:
    """Convergence record of one Newton solve."""

    converged: bool = False
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    krylov_iters: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)


class ILU0:
    """Zero-fill incomplete LU of a sparse matrix, used as smoother.

    A zero pivot triggers one retry with the diagonal shifted by
    ``1e-12 * max |diag|`` (recorded as a warning); a second failure
    raises.
    """

    def __init__(self, A):
        A = sp.csr_matrix(A)
        A.sort_indices()
        self.A = A
        self.n = A.shape[0]
        self._indptr = A.indptr.astype(np.int64)
        self._indices = A.indices.astype(np.int64)
        self._diag_pos = diagonal_positions(self._indptr, self._indices, self.n)
        data = A.data.astype(float).copy()
        bad = ilu0_factorize(self.n, self._indptr, self._indices, data, self._diag_pos)
        if bad >= 0:
            shift = 1e-12 * float(np.max(np.abs(A.diagonal())))
            logger.warning("ILU(0) hit a zero pivot in row %d; retrying with "
                           "diagonal shift %.3e", bad, shift)
            data = A.data.astype(float).copy()
            data[self._diag_pos] += shift
            bad = ilu0_factorize(self.n, self._indptr, self._indices, data, self._diag_pos)
            if bad >= 0:
                raise ZeroDivisionError(f"ILU(0) zero pivot persists in row {bad} after shift")
        self._data = data

    def solve(self, r: np.ndarray) -> np.ndarray:
        """Apply (LU)^-1 to a vector."""
        x = np.empty_like(r, dtype=float)
        ilu0_solve(self.n, self._indptr, self._indices, self._data, self._diag_pos,
                   np.asarray(r, dtype=float), x)
        return x

    def smooth(self, x: np.ndarray, b: np.ndarray, sweeps: int = 1) -> np.ndarray:
        """Richardson sweeps x <- x + (LU)^-1 (b - A x)."""
        for _ in range(sweeps):
            x = x + self.solve(b - self.A @ x)
        return x


def ilu0_smoother(A) -> ILU0:
    """Factor a matrix for smoothing; see :class:`ILU0`."""
    return ILU0(A)


def bicgstab(apply_A, apply_M_inv, b, cfg: LinearSolverConfig, x0=None, callback=None):
    """Right-side preconditioned BiCGStab.

    Iterates until ``||b - A x|| <= krylov_tol_rel * ||b||``.  On a rho
    or omega breakdown the iteration restarts once from the current
    iterate; a second breakdown or exhausting ``krylov_max_iter`` raises
    :class:`KrylovError` carrying the best iterate.

    Returns ``(x, iterations)``; ``callback(k, resid_norm)`` is invoked
    after every iteration when given.
    """
    b = np.asarray(b, dtype=float)
    if apply_M_inv is None:
        apply_M_inv = lambda v: v
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), 0
    tol = cfg.krylov_tol_rel * b_norm
    tiny = 1e-300

    r = b - apply_A(x)
    r_hat = r.copy()
    rho_prev = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    restarted = False
    best_x, best_res = x.copy(), float(np.linalg.norm(r))
    residuals = [best_res]

    k = 0
    while k < cfg.krylov_max_iter:
        rho = float(r_hat @ r)
        if abs(rho) < tiny or abs(omega) < tiny:
            if restarted:
                raise KrylovError(f"BiCGStab breakdown after restart (iteration {k})",
                                  x=best_x, residuals=residuals)
            restarted = True
            r = b - apply_A(x)
            r_hat = r.copy()
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            continue
        beta = (rho / rho_prev) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = apply_M_inv(p)
        v = apply_A(p_hat)
        denom = float(r_hat @ v)
        if abs(denom) < tiny:
            if restarted:
                raise KrylovError(f"BiCGStab breakdown after restart (iteration {k})",
                                  x=best_x, residuals=residuals)
            restarted = True
            r = b - apply_A(x)
            r_hat = r.copy()
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            continue
        alpha = rho / denom
        s = r - alpha * v
        s_norm = float(np.linalg.norm(s))
        if s_norm <= tol:
            x = x + alpha * p_hat
            k += 1
            residuals.append(s_norm)
            if callback is not None:
                callback(k, s_norm)
            return x, k
        s_hat = apply_M_inv(s)
        t = apply_A(s_hat)
        tt = float(t @ t)
        if tt < tiny:
            raise KrylovError(f"BiCGStab stagnated (t = 0 at iteration {k})",
                              x=best_x, residuals=residuals)
        omega = float(t @ s) / tt
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        rho_prev = rho
        k += 1
        res = float(np.linalg.norm(r))
        residuals.append(res)
        if callback is not None:
            callback(k, res)
        if res < best_res:
            best_res = res
            best_x = x.copy()
        if res <= tol:
            return x, k
    raise KrylovError(
        f"BiCGStab did not reach {cfg.krylov_tol_rel:.1e} in {cfg.krylov_max_iter} "
        f"iterations (best relative residual {best_res / b_norm:.3e})",
        x=best_x, residuals=residuals)


class MgHierarchy:
    """Matrices, smoothers, and transfers for a V-cycle preconditioner.

    ``matrices`` run finest to coarsest; ``prolongs[l]`` maps level
    ``l + 1`` (coarser) DOF vectors to level ``l``.  Residuals move down
    with the plain transpose.  Smoothers are ILU(0); the coarsest level
    is solved per :class:`LinearSolverConfig`.
    """

    def __init__(self, matrices, prolongs, cfg: LinearSolverConfig):
        if len(matrices) != len(prolongs) + 1:
            raise ValueError(f"{len(matrices)} level matrices need "
                             f"{len(matrices) - 1} prolongation operators")
        self.matrices = [sp.csr_matrix(A) for A in matrices]
        self.prolongs = prolongs
        self.cfg = cfg
        self.smoothers = [ILU0(A) for A in self.matrices[:-1]]
        coarse = self.matrices[-1]
        self._coarse_lu = None
        self._coarse_smoother = None
        if cfg.mg_coarse == "direct" and coarse.shape[0] <= cfg.coarse_direct_max_dofs:
            self._coarse_lu = sla.lu_factor(coarse.toarray())
        else:
            self._coarse_smoother = ILU0(coarse)

    @property
    def n_levels(self) -> int:
        return len(self.matrices)

    def coarse_solve(self, b: np.ndarray) -> np.ndarray:
        if self._coarse_lu is not None:
            return sla.lu_solve(self._coarse_lu, b)
        return self._coarse_smoother.smooth(np.zeros_like(b), b,
                                            self.cfg.coarse_smooth_sweeps)

    def apply(self, b: np.ndarray) -> np.ndarray:
        """One V-cycle from a zero initial guess (preconditioner action)."""
        return mg_vcycle(self, b)


def mg_vcycle(levels: MgHierarchy, rhs, x0=None, cfg: LinearSolverConfig | None = None,
              _level: int = 0) -> np.ndarray:
    """One multigrid V-cycle on the given hierarchy.

    Pre-smooth, restrict the residual, recurse, prolong the coarse
    correction, post-smooth; the coarsest level is solved per the
    hierarchy's configuration.
    """
    cfg = levels.cfg if cfg is None else cfg
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs) if x0 is None else np.asarray(x0, dtype=float).copy()
    if _level == levels.n_levels - 1:
        return x + levels.coarse_solve(rhs - levels.matrices[_level] @ x)
    A = levels.matrices[_level]
    smoother = levels.smoothers[_level]
    x = smoother.smooth(x, rhs, cfg.mg_pre_smooth)
    P = levels.prolongs[_level]
    r_coarse = P.T @ (rhs - A @ x)
    e_coarse = mg_vcycle(levels, r_coarse, None, cfg, _level + 1)
    x = x + P @ e_coarse
    x = smoother.smooth(x, rhs, cfg.mg_post_smooth)
    return x


def _linear_solve(J, rhs, cfg: LinearSolverConfig):
    """Dispatch on the Jacobian representation; returns (dx, krylov_iters)."""
    if isinstance(J, MgHierarchy):
        A = J.matrices[0]
        return bicgstab(lambda v: A @ v, J.apply, rhs, cfg)
    if sp.issparse(J):
        if J.shape[0] <= 4:
            return np.linalg.solve(J.toarray(), rhs), 0
        M = ILU0(J)
        return bicgstab(lambda v: J @ v, M.solve, rhs, cfg)
    J = np.asarray(J, dtype=float)
    if J.ndim == 0 or J.size == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            return rhs / float(np.ravel(J)[0]), 0
    return np.linalg.solve(J, rhs), 0


def newton_solve(residual_fn, jacobian_fn, x0, cfg: NewtonConfig,
                 lin: LinearSolverConfig, log_prefix: str = ""):
    """Newton iteration with a backtracking (halving) line search.

    ``jacobian_fn(x)`` may return a dense array, a sparse matrix, or a
    :class:`MgHierarchy`; the linear solver is chosen accordingly.
    Convergence requires ``||R(x)|| <= max(tol_abs, tol_rel * ||R(x0)||)``.
    The line search accepts the first step satisfying the sufficient
    decrease ``||R(x + a dx)|| < (1 - 1e-4 a) ||R(x)||``; running out of
    halvings or iterations raises :class:`NewtonError` carrying the
    residual history.

    Returns ``(x, NewtonReport)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    report = NewtonReport()
    r = residual_fn(x)
    norm0 = float(np.linalg.norm(r))
    report.residual_norms.append(norm0)
    target = max(cfg.tol_abs, cfg.tol_rel * norm0)
    norm = norm0

    for it in range(cfg.max_iter):
        if norm <= target:
            report.converged = True
            report.iterations = it
            return x, report
        J = jacobian_fn(x)
        try:
            dx, kry_iters = _linear_solve(J, -r, lin)
        except KrylovError as err:
            logger.warning("%slinear solve fell short (%s); using best iterate",
                           log_prefix, err)
            dx, kry_iters = err.x, len(err.residuals) - 1
            if dx is None:
                raise NewtonError("linear solver returned no iterate", report) from err
        report.krylov_iters.append(kry_iters)

        alpha = 1.0
        accepted = False
        for _ in range(cfg.ls_max_halvings + 1):
            x_trial = x + alpha * dx
            r_trial = residual_fn(x_trial)
            norm_trial = float(np.linalg.norm(r_trial))
            if norm_trial < (1.0 - 1e-4 * alpha) * norm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            report.iterations = it + 1
            raise NewtonError(
                f"line search stagnated at iteration {it + 1} "
                f"(residual {norm:.3e}, trial {norm_trial:.3e})", report)
        x, r, norm = x_trial, r_trial, norm_trial
        report.residual_norms.append(norm)
        report.step_sizes.append(alpha)
        logger.debug("%snewton_iter=%d residual=%.6e krylov_iters=%d alpha=%g",
                     log_prefix, it + 1, norm, kry_iters, alpha)

    if norm <= target:
        report.converged = True
        report.iterations = cfg.max_iter
        return x, report
    report.iterations = cfg.max_iter
    raise NewtonError(
        f"Newton did not converge in {cfg.max_iter} iterations "
        f"(residual {norm:.3e}, target {target:.3e})", report)
