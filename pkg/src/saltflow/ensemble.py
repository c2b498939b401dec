"""Scenario execution and weighted statistics over parameter ensembles.

One scenario is a full transient solve at a fixed realization theta of
the random inputs.  Scenarios are independent (no shared state), so the
ensemble runs embarrassingly parallel over a process pool; results are
persisted one file per scenario so an interrupted run can resume, and a
resumed run validates each file against the configuration digest before
trusting it.

Statistics use the plain weighted estimators: mean = sum w_i c_i,
variance = sum w_i (mean - c_i)^2 (no Bessel correction), exceedance
P(c > c*) = sum w_i [c_i > c*], summed in scenario-id order so results
are independent of completion order and worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field

import numpy as np

from .constitutive import FlowParameters
from .discretization import TransportProblem
from .errors import InvalidRealizationError, NewtonError
from .grid import StructuredGrid
from .random_fields import PorosityFieldSpec, coefficient_fields
from .solvers import LinearSolverConfig, NewtonConfig
from .transient import ProblemHierarchy, run_transient

__all__ = [
    "EnsembleSetup",
    "ScenarioSpec",
    "ScenarioResult",
    "StatisticsFields",
    "run_scenario",
    "run_ensemble",
    "weighted_stats",
    "compare_fields",
    "save_result",
    "load_result",
    "EnsembleFailure",
]

logger = logging.getLogger(__name__)


class EnsembleFailure(RuntimeError):
    """Raised under the abort policy when a scenario fails; completed
    results stay persisted."""

    def __init__(self, message, failed, results):
        super().__init__(message)
        self.failed = failed
        self.results = results


@dataclass(frozen=True)
class EnsembleSetup:
    """Everything one worker needs to run a scenario deterministically."""

    grids: list            # nested StructuredGrid hierarchy, finest first
    field_spec: PorosityFieldSpec
    params: FlowParameters
    dt: float
    n_steps: int
    snapshot_steps: tuple
    newton: NewtonConfig = NewtonConfig()
    linear: LinearSolverConfig = LinearSolverConfig()
    mg_levels: int = 0     # 0 = use the full hierarchy; 1 = single level
    config_hash: str = ""

    @property
    def fine_grid(self) -> StructuredGrid:
        return self.grids[0]

    def snapshot_times(self) -> np.ndarray:
        steps = sorted(set(int(s) for s in self.snapshot_steps) | {self.n_steps})
        return np.array([s * self.dt for s in steps])


@dataclass(frozen=True)
class ScenarioSpec:
    """One quadrature/sampling point with its weight and stable id."""

    scenario_id: int
    theta: np.ndarray
    weight: float
    config_hash: str = ""

    def __post_init__(self):
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        if not np.isfinite(self.weight):
            raise ValueError(f"scenario weight must be finite, got {self.weight}")


@dataclass
class ScenarioResult:
    """Snapshot archive and solver statistics of one scenario."""

    scenario_id: int
    theta: np.ndarray
    weight: float
    status: str                      # "ok" | "failed"
    config_hash: str = ""
    failure_reason: str = ""
    snapshot_steps: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    c: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    p: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    newton_iters: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    krylov_iters: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _build_hierarchy(setup: EnsembleSetup, theta) -> ProblemHierarchy:
    levels = len(setup.grids) if setup.mg_levels == 0 else min(setup.mg_levels, len(setup.grids))
    problems = []
    for grid in setup.grids[:levels]:
        coeff = coefficient_fields(setup.field_spec, grid, theta, setup.params)
        problems.append(TransportProblem.from_grid(grid, coeff, setup.params))
    return ProblemHierarchy(problems)


def run_scenario(spec: ScenarioSpec, setup: EnsembleSetup) -> ScenarioResult:
    """Transient solve from t = 0 over the configured steps at one theta.

    Deterministic given (spec, setup).  Newton failures and invalid
    coefficient realizations produce a ``failed`` result rather than an
    exception; the failure reason records the offending step or vertex.
    """
    try:
        hierarchy = _build_hierarchy(setup, spec.theta)
        result = run_transient(hierarchy, setup.dt, setup.n_steps,
                               snapshot_steps=setup.snapshot_steps,
                               newton_cfg=setup.newton, lin_cfg=setup.linear)
    except (InvalidRealizationError, NewtonError) as err:
        logger.warning("scenario %d failed: %s", spec.scenario_id, err)
        return ScenarioResult(spec.scenario_id, spec.theta, spec.weight,
                              status="failed", config_hash=setup.config_hash,
                              failure_reason=str(err))
    steps = np.array(sorted(result.snapshots), dtype=np.int64)
    return ScenarioResult(
        scenario_id=spec.scenario_id,
        theta=spec.theta,
        weight=spec.weight,
        status="ok",
        config_hash=setup.config_hash,
        snapshot_steps=steps,
        times=steps * setup.dt,
        c=np.stack([result.snapshots[s].c for s in steps]),
        p=np.stack([result.snapshots[s].p for s in steps]),
        newton_iters=np.array([s.newton_iters for s in result.steps], dtype=np.int64),
        krylov_iters=np.array([s.krylov_iters for s in result.steps], dtype=np.int64),
    )


def _result_path(results_dir, scenario_id: int) -> str:
    return os.path.join(results_dir, f"scenario_{scenario_id:05d}.npz")


def save_result(results_dir, result: ScenarioResult) -> str:
    """Persist one scenario as a self-describing .npz file.

    Keys: ``scenario_id``, ``theta``, ``weight``, ``status``,
    ``config_hash``, ``failure_reason``, ``snapshot_steps``, ``times``,
    ``c``/``p`` (snapshots x DoFs), and the per-step solver counters.
    """
    os.makedirs(results_dir, exist_ok=True)
    path = _result_path(results_dir, result.scenario_id)
    tmp = path + ".tmp.npz"
    np.savez_compressed(
        tmp,
        scenario_id=np.int64(result.scenario_id),
        theta=result.theta,
        weight=np.float64(result.weight),
        status=np.str_(result.status),
        config_hash=np.str_(result.config_hash),
        failure_reason=np.str_(result.failure_reason),
        snapshot_steps=result.snapshot_steps,
        times=result.times,
        c=result.c,
        p=result.p,
        newton_iters=result.newton_iters,
        krylov_iters=result.krylov_iters,
    )
    os.replace(tmp, path)
    return path


def load_result(path) -> ScenarioResult:
    """Read a scenario file written by :func:`save_result`."""
    with np.load(path, allow_pickle=False) as data:
        return ScenarioResult(
            scenario_id=int(data["scenario_id"]),
            theta=data["theta"],
            weight=float(data["weight"]),
            status=str(data["status"]),
            config_hash=str(data["config_hash"]),
            failure_reason=str(data["failure_reason"]),
            snapshot_steps=data["snapshot_steps"],
            times=data["times"],
            c=data["c"],
            p=data["p"],
            newton_iters=data["newton_iters"],
            krylov_iters=data["krylov_iters"],
        )


def _scenario_task(args):
    spec, setup = args
    return run_scenario(spec, setup)


def run_ensemble(specs, setup: EnsembleSetup, workers: int = 1,
                 resume: bool = False, results_dir=None,
                 failure_policy: str = "abort") -> list[ScenarioResult]:
    """Run all scenarios, optionally in parallel, with per-file persistence.

    With ``resume``, previously persisted ``ok`` results whose config
    digest matches are loaded instead of recomputed.  ``failure_policy``
    is ``"abort"`` (raise :class:`EnsembleFailure` once every in-flight
    scenario finished; completed results stay on disk) or ``"continue"``
    (failed results are returned alongside the others).  Results come
    back in the order of ``specs`` and are identical for any worker
    count.
    """
    specs = list(specs)
    ids = [s.scenario_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("scenario ids must be unique within a run")
    if failure_policy not in ("abort", "continue"):
        raise ValueError(f"unknown failure policy {failure_policy!r}")

    results: dict[int, ScenarioResult] = {}
    pending = []
    for spec in specs:
        if resume and results_dir is not None:
            path = _result_path(results_dir, spec.scenario_id)
            if os.path.exists(path):
                cached = load_result(path)
                if cached.ok and cached.config_hash == setup.config_hash:
                    logger.info("scenario %d loaded from %s", spec.scenario_id, path)
                    results[spec.scenario_id] = cached
                    continue
                logger.info("scenario %d cache invalid (status=%s); recomputing",
                            spec.scenario_id, cached.status)
        pending.append(spec)

    def finish(result: ScenarioResult):
        if results_dir is not None:
            save_result(results_dir, result)
        results[result.scenario_id] = result
        logger.info("scenario %d finished: %s", result.scenario_id, result.status)

    if workers <= 1:
        for spec in pending:
            finish(run_scenario(spec, setup))
            if failure_policy == "abort" and not results[spec.scenario_id].ok:
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_scenario_task, (spec, setup)): spec for spec in pending}
            remaining = set(futures)
            aborted = False
            while remaining:
                done, remaining = wait(remaining, return_when=FIRST_COMPLETED)
                for fut in done:
                    if fut.cancelled():
                        continue
                    # scenarios already in flight when aborting still
                    # land on disk; only unstarted ones are dropped
                    finish(fut.result())
                    if (failure_policy == "abort" and not aborted
                            and not results[futures[fut].scenario_id].ok):
                        aborted = True
                        for other in remaining:
                            other.cancel()

    failed = [r for r in results.values() if not r.ok]
    if failed and failure_policy == "abort":
        raise EnsembleFailure(
            f"{len(failed)} scenario(s) failed, first: id={failed[0].scenario_id} "
            f"({failed[0].failure_reason})", failed,
            [results[i] for i in ids if i in results])
    return [results[i] for i in ids if i in results]


@dataclass
class StatisticsFields:
    """Weighted ensemble statistics per snapshot."""

    snapshot_steps: np.ndarray
    times: np.ndarray
    mean: np.ndarray                 # (n_snap, n_dofs)
    variance: np.ndarray
    exceedance: dict                 # threshold -> (n_snap, n_dofs)
    n_effective: int


def weighted_stats(results, weights=None, thresholds=(),
                   skip_failed: bool = False) -> StatisticsFields:
    """Plain weighted mean/variance/exceedance over scenario snapshots.

    ``weights`` overrides the per-result weights (aligned with the
    ``results`` argument order).  All results must be ``ok`` unless
    ``skip_failed`` is set, in which case failures are dropped and the
    remaining weights renormalized (logged).  Accumulation runs in
    scenario-id order, so any permutation of the inputs produces
    identical fields.
    """
    results = list(results)
    if weights is not None:
        if len(weights) != len(results):
            raise ValueError(f"{len(weights)} weights for {len(results)} results")
        pairs = [(r, float(w)) for r, w in zip(results, weights)]
    else:
        pairs = [(r, r.weight) for r in results]
    bad = [r for r, _ in pairs if not r.ok]
    if bad:
        if not skip_failed:
            raise ValueError(
                f"{len(bad)} failed scenario(s) in statistics input "
                f"(first: id={bad[0].scenario_id}); enable skip-and-reweight to drop them")
        total_before = sum(w for _, w in pairs)
        pairs = [(r, w) for r, w in pairs if r.ok]
        total_after = sum(w for _, w in pairs)
        logger.warning("dropping %d failed scenario(s); reweighting by %.6f",
                       len(bad), total_before / total_after)
        pairs = [(r, w * total_before / total_after) for r, w in pairs]
    if not pairs:
        raise ValueError("no usable scenario results")

    pairs.sort(key=lambda rw: rw[0].scenario_id)
    ref = pairs[0][0]
    for r, _ in pairs:
        if r.c.shape != ref.c.shape or not np.array_equal(r.snapshot_steps, ref.snapshot_steps):
            raise ValueError(f"scenario {r.scenario_id} snapshots do not match scenario "
                             f"{ref.scenario_id}")
    stack = np.stack([r.c for r, _ in pairs])          # (n_res, n_snap, n)
    w = np.array([wt for _, wt in pairs])
    mean = np.sum(w[:, None, None] * stack, axis=0)
    variance = np.sum(w[:, None, None] * (mean[None] - stack) ** 2, axis=0)
    variance = np.maximum(variance, 0.0)
    exceed = {
        float(thr): np.sum(w[:, None, None] * (stack > thr), axis=0)
        for thr in thresholds
    }
    return StatisticsFields(ref.snapshot_steps.copy(), ref.times.copy(),
                            mean, variance, exceed, len(pairs))


@dataclass(frozen=True)
class ComparisonMetrics:
    l2_rel: float
    max_abs: float
    jaccard: float | None = None


def compare_fields(a, b, isovalue: float | None = None) -> ComparisonMetrics:
    """Difference metrics between two fields on the same grid.

    ``l2_rel`` is ||a - b||_2 / max(||a||_2, ||b||_2) (zero for two zero
    fields); the Jaccard index compares the vertex sets {a >= isovalue}
    and {b >= isovalue} and is defined as 1.0 when both are empty.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    l2_rel = float(np.linalg.norm(a - b)) / denom if denom > 0.0 else 0.0
    max_abs = float(np.max(np.abs(a - b))) if a.size else 0.0
    jaccard = None
    if isovalue is not None:
        sa = a >= isovalue
        sb = b >= isovalue
        union = int(np.count_nonzero(sa | sb))
        jaccard = 1.0 if union == 0 else float(np.count_nonzero(sa & sb)) / union
    return ComparisonMetrics(l2_rel, max_abs, jaccard)
