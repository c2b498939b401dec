"""Command-line front end.

Subcommands::

    saltflow run-deterministic --config cfg.yaml   # one solve at theta = 0
    saltflow run-ensemble      --config cfg.yaml   # qMC/MC/quadrature ensemble
    saltflow gpc-build         --config cfg.yaml   # ensemble + projection
    saltflow gpc-eval          --config cfg.yaml --surrogate S.npz [...]
    saltflow stats             --config cfg.yaml   # re-aggregate persisted runs
    saltflow compare           --a A.npz --b B.npz --field mean_c [...]
    saltflow convergence       --config cfg.yaml   # MMS order tables

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 partial ensemble failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from . import gpc as gpcmod
from .ensemble import (
    EnsembleFailure,
    load_result,
    run_ensemble,
    run_scenario,
    weighted_stats,
    compare_fields,
)
from .errors import ConfigError, KrylovError, NewtonError
from .random_fields import coefficient_fields
from .vtk_io import (
    fmt,
    grid_descriptor,
    load_statistics,
    save_statistics,
    threshold_key,
    write_csv,
    write_vtk,
)

logger = logging.getLogger("saltflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_PARTIAL = 4


def _load(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    if args.workers is not None:
        cfg["run"]["workers"] = args.workers
    if args.resume:
        cfg["run"]["resume"] = True
    if args.output is not None:
        cfg["output"]["directory"] = args.output
    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    return cfg


def _outdir(cfg) -> str:
    out = cfg["output"]["directory"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "effective_config.yaml"), "w", encoding="utf-8") as fh:
        fh.write(cfgmod.dump_config(cfg))
    return out


def _probe_indices(cfg, grid):
    coords = grid.coords()
    out = []
    for probe in cfg["output"]["probes"]:
        out.append(int(np.argmin(np.sum((coords - np.asarray(probe)) ** 2, axis=1))))
    return out


def _write_probe_csv(path, cfg, grid, stats):
    probes = _probe_indices(cfg, grid)
    if not probes:
        return
    header = ["time_s", "probe_index"] + [f"x{k}" for k in range(grid.dim)] + \
             ["mean_c", "var_c"] + [f"exceed_c_{threshold_key(t)}" for t in sorted(stats.exceedance)]
    rows = []
    for snap, t in enumerate(stats.times):
        for v in probes:
            row = [t, v] + list(grid.coords()[v]) + [stats.mean[snap, v], stats.variance[snap, v]]
            row += [stats.exceedance[thr][snap, v] for thr in sorted(stats.exceedance)]
            rows.append(row)
    write_csv(path, header, rows)


def cmd_run_deterministic(args) -> int:
    cfg = _load(args)
    setup = cfgmod.build_setup(cfg)
    out = _outdir(cfg)
    rule = cfgmod.build_rule({**cfg, "method": {**cfg["method"], "kind": "deterministic"}})
    spec = cfgmod.build_specs(cfg, rule)[0]
    result = run_scenario(spec, setup)
    if not result.ok:
        logger.error("deterministic run failed: %s", result.failure_reason)
        return EXIT_SOLVER
    grid = setup.fine_grid
    coeff = coefficient_fields(setup.field_spec, grid, spec.theta, setup.params)
    if "vtk" in cfg["output"]["formats"]:
        for k, step in enumerate(result.snapshot_steps):
            write_vtk(os.path.join(out, f"deterministic_{step:05d}.vtk"), grid,
                      {"c": result.c[k], "p": result.p[k],
                       "phi": coeff.phi, "K": coeff.K},
                      title=f"t={result.times[k]:.8g}s")
    if "csv" in cfg["output"]["formats"]:
        probes = _probe_indices(cfg, grid)
        if probes:
            rows = [[t, v, *grid.coords()[v], result.c[k, v], result.p[k, v]]
                    for k, t in enumerate(result.times) for v in probes]
            write_csv(os.path.join(out, "deterministic_probes.csv"),
                      ["time_s", "probe_index"] + [f"x{k}" for k in range(grid.dim)]
                      + ["c", "p"], rows)
    logger.info("wrote %d snapshot(s) to %s", len(result.snapshot_steps), out)
    return EXIT_OK


def _ensemble_results(cfg, setup, out):
    rule = cfgmod.build_rule(cfg)
    specs = cfgmod.build_specs(cfg, rule)
    policy = cfg["run"]["failure_policy"]
    results = run_ensemble(specs, setup, workers=cfg["run"]["workers"],
                           resume=cfg["run"]["resume"],
                           results_dir=os.path.join(out, "scenarios"),
                           failure_policy="continue" if policy == "skip_reweight" else policy)
    return rule, results


def _emit_statistics(cfg, setup, stats, out, prefix="stats"):
    grid = setup.fine_grid
    save_statistics(os.path.join(out, f"{prefix}.npz"), stats, grid)
    if "vtk" in cfg["output"]["formats"]:
        for k, step in enumerate(stats.snapshot_steps):
            fields = {"mean_c": stats.mean[k], "var_c": stats.variance[k]}
            for thr in sorted(stats.exceedance):
                fields[f"exceed_c_{threshold_key(thr)}"] = stats.exceedance[thr][k]
            write_vtk(os.path.join(out, f"{prefix}_{step:05d}.vtk"), grid, fields,
                      title=f"t={stats.times[k]:.8g}s")
    if "csv" in cfg["output"]["formats"]:
        _write_probe_csv(os.path.join(out, f"{prefix}_probes.csv"), cfg, grid, stats)


def cmd_run_ensemble(args) -> int:
    cfg = _load(args)
    setup = cfgmod.build_setup(cfg)
    out = _outdir(cfg)
    try:
        rule, results = _ensemble_results(cfg, setup, out)
    except EnsembleFailure as err:
        logger.error("%s", err)
        return EXIT_PARTIAL
    stats = weighted_stats(results, thresholds=cfg["output"]["thresholds"],
                           skip_failed=cfg["run"]["failure_policy"] == "skip_reweight")
    _emit_statistics(cfg, setup, stats, out)
    logger.info("ensemble statistics over %d scenario(s) written to %s",
                stats.n_effective, out)
    return EXIT_OK


def cmd_gpc_build(args) -> int:
    cfg = _load(args)
    if cfg["method"]["kind"] != "gpc":
        raise ConfigError("gpc-build needs method.kind == 'gpc'")
    setup = cfgmod.build_setup(cfg)
    out = _outdir(cfg)
    try:
        rule, results = _ensemble_results(cfg, setup, out)
    except EnsembleFailure as err:
        logger.error("%s", err)
        return EXIT_PARTIAL
    bad = [r for r in results if not r.ok]
    if bad:
        logger.error("%d scenario(s) failed; a projection needs every node", len(bad))
        return EXIT_PARTIAL
    index_set = gpcmod.build_multiindex_set(setup.field_spec.dim_theta,
                                            cfg["method"]["gpc_order"],
                                            cfg["method"]["gpc_truncation"])
    samples = np.stack([r.c for r in results])
    surrogate = gpcmod.project(samples, rule, index_set,
                               snapshot_times=results[0].times,
                               grid_descriptor=grid_descriptor(setup.fine_grid))
    path = os.path.join(out, "surrogate.npz")
    gpcmod.save_surrogate(path, surrogate)
    mean = gpcmod.surrogate_mean(surrogate)
    var = gpcmod.surrogate_variance(surrogate)
    if "vtk" in cfg["output"]["formats"]:
        for k, step in enumerate(results[0].snapshot_steps):
            write_vtk(os.path.join(out, f"gpc_{step:05d}.vtk"), setup.fine_grid,
                      {"mean_c": mean[k], "var_c": var[k]},
                      title=f"t={results[0].times[k]:.8g}s")
    logger.info("surrogate with %d coefficients written to %s", len(index_set), path)
    return EXIT_OK


def cmd_gpc_eval(args) -> int:
    cfg = _load(args)
    setup = cfgmod.build_setup(cfg)
    out = _outdir(cfg)
    surrogate = gpcmod.load_surrogate(args.surrogate)
    grid = setup.fine_grid
    if list(surrogate.grid_descriptor["n"]) != list(grid.n):
        raise ConfigError(
            f"surrogate grid {surrogate.grid_descriptor['n']} does not match the "
            f"configured grid {list(grid.n)}")
    if args.theta is not None:
        theta = np.array([float(v) for v in args.theta.split(",")])
        field = gpcmod.surrogate_eval(surrogate, theta)
        if "vtk" in cfg["output"]["formats"]:
            for k, t in enumerate(surrogate.snapshot_times):
                write_vtk(os.path.join(out, f"gpc_eval_{k:03d}.vtk"), grid,
                          {"c": field[k]}, title=f"t={t:.8g}s")
        logger.info("surrogate evaluated at theta=%s", theta.tolist())
        return EXIT_OK
    # sampling statistics at a probe
    probes = _probe_indices(cfg, grid)
    if not probes:
        raise ConfigError("gpc-eval sampling statistics need output.probes")
    snap = args.snapshot if args.snapshot is not None else len(surrogate.snapshot_times) - 1
    rows = []
    for v in probes:
        stats = gpcmod.surrogate_sample_stats(
            surrogate, (snap, v), args.ns,
            thresholds=cfg["output"]["thresholds"],
            quantiles=args.quantiles, seed=cfg["run"]["seed"])
        for thr, pe in zip(stats.thresholds, stats.exceedance):
            rows.append([v, "exceedance", thr, pe])
        for ql, qv in zip(stats.quantile_levels, stats.quantiles):
            rows.append([v, "quantile", ql, qv])
        hist_path = os.path.join(out, f"gpc_pdf_probe{v}.csv")
        write_csv(hist_path, ["bin_lo", "bin_hi", "count"],
                  [[stats.bin_edges[i], stats.bin_edges[i + 1], int(stats.histogram[i])]
                   for i in range(len(stats.histogram))])
    write_csv(os.path.join(out, "gpc_eval_stats.csv"),
              ["probe_index", "statistic", "parameter", "value"], rows)
    logger.info("sampling statistics for %d probe(s) written to %s", len(probes), out)
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _load(args)
    setup = cfgmod.build_setup(cfg)
    out = _outdir(cfg)
    rule = cfgmod.build_rule(cfg)
    specs = cfgmod.build_specs(cfg, rule)
    results_dir = args.results_dir or os.path.join(out, "scenarios")
    results = []
    for spec in specs:
        path = os.path.join(results_dir, f"scenario_{spec.scenario_id:05d}.npz")
        if not os.path.exists(path):
            raise ConfigError(f"missing persisted scenario file {path}")
        results.append(load_result(path))
    stats = weighted_stats(results, thresholds=cfg["output"]["thresholds"],
                           skip_failed=cfg["run"]["failure_policy"] == "skip_reweight")
    _emit_statistics(cfg, setup, stats, out)
    logger.info("statistics over %d persisted scenario(s) written to %s",
                stats.n_effective, out)
    return EXIT_OK


def _extract_field(path, name, snapshot):
    if name in ("c", "p"):
        result = load_result(path)
        return result.c[snapshot] if name == "c" else result.p[snapshot]
    stats = load_statistics(path)
    if name == "mean_c":
        return stats.mean[snapshot]
    if name == "var_c":
        return stats.variance[snapshot]
    if name.startswith("exceed_c_"):
        thr = float(name[len("exceed_c_"):])
        for key, field in stats.exceedance.items():
            if abs(key - thr) <= 1e-12:
                return field[snapshot]
        raise ConfigError(f"threshold {thr} not present in {path}")
    raise ConfigError(f"unknown field {name!r}; expected c, p, mean_c, var_c, "
                      f"or exceed_c_<threshold>")


def cmd_compare(args) -> int:
    a = _extract_field(args.a, args.field, args.snapshot)
    b = _extract_field(args.b, args.field, args.snapshot)
    isovalues = [float(v) for v in args.isovalues.split(",")] if args.isovalues else []
    rows = []
    base = compare_fields(a, b)
    rows.append(["", base.l2_rel, base.max_abs, ""])
    for iso in isovalues:
        m = compare_fields(a, b, isovalue=iso)
        rows.append([iso, m.l2_rel, m.max_abs, m.jaccard])
    if args.csv:
        write_csv(args.csv, ["isovalue", "l2_rel", "max_abs", "jaccard"], rows)
    for row in rows:
        print("isovalue=%s l2_rel=%s max_abs=%s jaccard=%s"
              % tuple(fmt(v) if v != "" else "-" for v in row))
    return EXIT_OK


def cmd_convergence(args) -> int:
    from .mms import build_mms, spatial_convergence, temporal_convergence

    cfg = _load(args)
    out = _outdir(cfg)
    ms = build_mms()
    spacings, errors, orders = spatial_convergence(ms)
    rows = [[spacings[k], errors[k], orders[k - 1] if k else ""]
            for k in range(len(errors))]
    write_csv(os.path.join(out, "convergence_spatial.csv"),
              ["spacing_m", "l2_error", "observed_order"], rows)
    print("spatial convergence (L2 error in c vs exact):")
    for row in rows:
        print("  h=%-8s error=%-12s order=%s"
              % (fmt(row[0]), fmt(row[1]), fmt(row[2]) if row[2] != "" else "-"))
    dts, diffs, torders = temporal_convergence(ms)
    rows = [[dts[k], diffs[k], torders[k - 1] if k else ""]
            for k in range(len(diffs))]
    write_csv(os.path.join(out, "convergence_temporal.csv"),
              ["dt_s", "l2_difference", "observed_order"], rows)
    print("temporal convergence (L2 difference between dt and dt/2 solutions):")
    for row in rows:
        print("  dt=%-10s diff=%-12s order=%s"
              % (fmt(row[0]), fmt(row[1]), fmt(row[2]) if row[2] != "" else "-"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saltflow",
        description="Density-driven brine transport with uncertainty quantification.")
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML run configuration")
        p.add_argument("--workers", type=int, default=None, help="override run.workers")
        p.add_argument("--resume", action="store_true", help="reuse persisted scenario files")
        p.add_argument("--output", default=None, help="override output.directory")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")

    common(sub.add_parser("run-deterministic", help="single solve at theta = 0"))
    common(sub.add_parser("run-ensemble", help="sampled ensemble statistics"))
    common(sub.add_parser("gpc-build", help="build a gPC surrogate by projection"))

    p = sub.add_parser("gpc-eval", help="evaluate or sample a stored surrogate")
    common(p)
    p.add_argument("--surrogate", required=True, help="surrogate .npz container")
    p.add_argument("--theta", default=None,
                   help="comma-separated point to evaluate (else sampling stats)")
    p.add_argument("--ns", type=int, default=10**6, help="sample count for statistics")
    p.add_argument("--quantiles", type=float, nargs="*", default=(0.5,),
                   help="quantile levels for order statistics")
    p.add_argument("--snapshot", type=int, default=None, help="snapshot index (default last)")

    p = sub.add_parser("stats", help="aggregate persisted scenario files")
    common(p)
    p.add_argument("--results-dir", default=None,
                   help="scenario directory (default <output>/scenarios)")

    p = sub.add_parser("compare", help="difference metrics between two stored fields")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--field", default="mean_c")
    p.add_argument("--snapshot", type=int, default=-1)
    p.add_argument("--isovalues", default=None, help="comma-separated isovalues for Jaccard")
    p.add_argument("--csv", default=None, help="write metrics to this CSV file")

    common(sub.add_parser("convergence", help="manufactured-solution order tables"))
    return parser


COMMANDS = {
    "run-deterministic": cmd_run_deterministic,
    "run-ensemble": cmd_run_ensemble,
    "gpc-build": cmd_gpc_build,
    "gpc-eval": cmd_gpc_eval,
    "stats": cmd_stats,
    "compare": cmd_compare,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        logger.error("configuration error: %s", err)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    except (NewtonError, KrylovError) as err:
        logger.error("solver failure: %s", err)
        return EXIT_SOLVER
    except EnsembleFailure as err:
        logger.error("partial ensemble failure: %s", err)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
