"""Implicit-Euler time stepping of a transport problem hierarchy.

One scenario is a fixed-step transient solve: at every step the coupled
nonlinear system is handed to the Newton solver, whose corrections are
computed by BiCGStab preconditioned with a V-cycle over Jacobians
rediscretized on the coarser grids (or a single-level ILU(0) when no
hierarchy is available).  Solver progress is logged as structured lines
``step=<i> newton_iters=<k> residual=<r> krylov_iters=<m>``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .discretization import (
    FieldState,
    TransportProblem,
    assemble_jacobian,
    assemble_residual,
    initial_state,
    pack_state,
    unpack_state,
)
from .errors import NewtonError
from .grid import GridTransfer
from .solvers import LinearSolverConfig, MgHierarchy, NewtonConfig, newton_solve

__all__ = ["ProblemHierarchy", "StepStats", "TransientResult", "run_transient"]

logger = logging.getLogger(__name__)


class ProblemHierarchy:
    """A transport problem on the finest grid plus rediscretization data.

    ``problems`` run finest to coarsest on nested grids; the coarse
    problems carry their own coefficient fields and boundary data and
    exist only to rediscretize the Jacobian for the multigrid
    preconditioner.  A single-entry hierarchy falls back to one-level
    ILU(0)-preconditioned BiCGStab.
    """

    def __init__(self, problems: list[TransportProblem]):
        if not problems:
            raise ValueError("need at least one problem level")
        self.problems = problems
        self.transfers = [
            GridTransfer(problems[l].grid, problems[l + 1].grid)
            for l in range(len(problems) - 1)
        ]
        # DOF-level prolongations for the interleaved (c, p) vectors
        self._dof_prolongs = [sp.kron(tr.P, sp.identity(2, format="csr"), format="csr")
                              for tr in self.transfers]

    @property
    def fine(self) -> TransportProblem:
        return self.problems[0]

    def jacobian_operator(self, x: np.ndarray, t: float, dt: float,
                          lin_cfg: LinearSolverConfig):
        """Assemble the Jacobian representation for one Newton iterate."""
        state = unpack_state(x, t)
        if len(self.problems) == 1:
            return assemble_jacobian(self.fine, state, dt)
        matrices = [assemble_jacobian(self.fine, state, dt)]
        c, p = state.c, state.p
        for level, tr in enumerate(self.transfers):
            c = tr.inject(c)
            p = tr.inject(p)
            coarse_state = FieldState(c, p, t)
            matrices.append(assemble_jacobian(self.problems[level + 1], coarse_state, dt))
        return MgHierarchy(matrices, self._dof_prolongs, lin_cfg)


@dataclass
class StepStats:
    """Newton/Krylov effort of one time step."""

    step: int
    newton_iters: int
    krylov_iters: int
    residual_norm: float


@dataclass
class TransientResult:
    """Snapshots (step index -> state) and per-step solver statistics."""

    snapshots: dict
    steps: list = field(default_factory=list)

    @property
    def final(self) -> FieldState:
        return self.snapshots[max(self.snapshots)]


def run_transient(hierarchy: ProblemHierarchy, dt: float, n_steps: int,
                  snapshot_steps=(), newton_cfg: NewtonConfig | None = None,
                  lin_cfg: LinearSolverConfig | None = None,
                  initial: FieldState | None = None,
                  keep_final: bool = True) -> TransientResult:
    """March the problem from t = 0 over ``n_steps`` fixed steps.

    ``snapshot_steps`` lists the step indices to retain (0 stores the
    initial state); the final state is always kept when ``keep_final``.
    Raises :class:`saltflow.errors.NewtonError` if any step fails, with
    the failing step recorded in the message.
    """
    if n_steps < 1:
        raise ValueError(f"need n_steps >= 1, got {n_steps}")
    newton_cfg = newton_cfg or NewtonConfig()
    lin_cfg = lin_cfg or LinearSolverConfig()
    problem = hierarchy.fine
    state = initial.copy() if initial is not None else initial_state(problem)
    wanted = set(int(s) for s in snapshot_steps)
    if keep_final:
        wanted.add(n_steps)
    result = TransientResult(snapshots={})
    if 0 in wanted:
        result.snapshots[0] = state.copy()

    for step in range(1, n_steps + 1):
        # steady assembly (dt = inf) keeps the evaluation time frozen
        t_new = state.t if np.isinf(dt) else step * dt
        state_old = state

        def residual(x):
            return assemble_residual(problem, unpack_state(x, t_new), state_old, dt)

        def jacobian(x):
            return hierarchy.jacobian_operator(x, t_new, dt, lin_cfg)

        try:
            x, report = newton_solve(residual, jacobian, pack_state(state),
                                     newton_cfg, lin_cfg, log_prefix=f"step={step} ")
        except NewtonError as err:
            raise NewtonError(f"step {step}: {err}", err.report) from err
        state = unpack_state(x, t_new)
        stats = StepStats(step, report.iterations, int(sum(report.krylov_iters)),
                          report.residual_norms[-1])
        result.steps.append(stats)
        logger.info("step=%d newton_iters=%d residual=%.6e krylov_iters=%d",
                    stats.step, stats.newton_iters, stats.residual_norm,
                    stats.krylov_iters)
        if step in wanted:
            result.snapshots[step] = state.copy()
    return result
