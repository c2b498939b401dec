"""Run configuration: YAML schema, validation, and setup builders.

A run is described by one YAML file with the sections below; every key
is validated and unknown keys are rejected with the offending path in
the message.  Times may be given in seconds or years (``time.time_unit``);
they are converted to seconds at this boundary (1 year = 3.1536e7 s,
365 days) and all solver code and output files use seconds only.

Sections and keys (defaults in brackets):

domain:     dim (2|3), lo, hi, patch {shape: rectangle|disk|none, ...}
            [patch defaults to a centered rectangle covering half the
            top-face extent per axis -- a stand-in documented as a guess]
grid:       coarse_n (per-axis vertex counts), levels [5]
time:       dt, n_steps, snapshot_steps [[]], time_unit [s]
physics:    rho0, rho1, mu, Dm, g, phi_mean, K_mean [standard values]
stochastic: field (constant|paral_3rv|box_2rv|cyl_3layer|layered_cz)
method:     kind (deterministic|qmc|mc|gpc), rule (qmc_halton|mc|
            gauss_legendre|clenshaw_curtis|smolyak_cc), rule_n,
            gpc_order [4], gpc_truncation [total_degree]
solver:     newton_tol_abs [1e-12], newton_tol_rel [1e-8],
            newton_max_iter [20], ls_max_halvings [12],
            krylov_tol_rel [1e-6], krylov_max_iter [200],
            mg_pre_smooth [1], mg_post_smooth [1], mg_coarse [direct],
            mg_levels [0 = full hierarchy]
output:     directory [out], formats [[vtk, csv]], thresholds [[]],
            probes [[]]
run:        workers [1], resume [false], failure_policy [abort],
            seed [0]
"""

from __future__ import annotations

import hashlib
import json

import numpy as np
import yaml

from .constitutive import FlowParameters
from .ensemble import EnsembleSetup, ScenarioSpec
from .errors import ConfigError
from .grid import BoxDomain, DirichletPatch, build_grid
from .quadrature import (
    QuadratureRule,
    clenshaw_curtis_tensor,
    gauss_legendre_tensor,
    halton,
    monte_carlo,
    smolyak_cc,
)
from .random_fields import FIELD_KINDS, PorosityFieldSpec
from .solvers import LinearSolverConfig, NewtonConfig

__all__ = ["load_config", "normalize_config", "config_hash", "build_setup",
           "build_rule", "build_specs", "dump_config", "SECONDS_PER_YEAR"]

SECONDS_PER_YEAR = 3.1536e7

METHOD_KINDS = ("deterministic", "qmc", "mc", "gpc")
RULE_KINDS = ("qmc_halton", "mc", "gauss_legendre", "clenshaw_curtis", "smolyak_cc")


def _require(section: dict, name: str, key: str, kind, default=None, choices=None):
    """Fetch and type-check one key; ``default=None`` marks it required."""
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key '{name}.{key}'")
        return default
    value = section[key]
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"'{name}.{key}' must be a boolean, got {value!r}")
    elif kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{name}.{key}' must be an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{name}.{key}' must be a number, got {value!r}")
        value = float(value)
    elif kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"'{name}.{key}' must be a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(f"'{name}.{key}' must be one of {choices}, got {value!r}")
    return value


def _check_keys(section: dict, name: str, allowed) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")


def _float_list(section, name, key, length=None, default=None):
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"missing required key '{name}.{key}'")
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"'{name}.{key}' must be a list, got {value!r}")
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"'{name}.{key}' must hold numbers, got {value!r}") from None
    if length is not None and len(out) != length:
        raise ConfigError(f"'{name}.{key}' needs {length} entries, got {len(out)}")
    return out


def load_config(path) -> dict:
    """Read and normalize a YAML run configuration."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"configuration root must be a mapping, got {type(raw).__name__}")
    return normalize_config(raw)


def normalize_config(raw: dict) -> dict:
    """Validate a raw mapping and return the effective settings.

    The result has every default filled in, times converted to seconds,
    and ``time_unit`` dropped; normalizing is idempotent.
    """
    _check_keys(raw, "<root>", ("domain", "grid", "time", "physics", "stochastic",
                                "method", "solver", "output", "run"))
    for name in ("domain", "grid", "time", "stochastic", "method"):
        if name not in raw:
            raise ConfigError(f"missing required section '{name}'")
        if not isinstance(raw[name], dict):
            raise ConfigError(f"section '{name}' must be a mapping")

    dom = raw["domain"]
    _check_keys(dom, "domain", ("dim", "lo", "hi", "patch"))
    dim = _require(dom, "domain", "dim", int, choices=(2, 3))
    lo = _float_list(dom, "domain", "lo", length=dim)
    hi = _float_list(dom, "domain", "hi", length=dim)
    if any(h <= l for l, h in zip(lo, hi)):
        raise ConfigError(f"'domain.hi' must exceed 'domain.lo' per axis, got {lo} vs {hi}")
    patch_cfg = dom.get("patch")
    if patch_cfg is None:
        # default: centered rectangle covering half the top-face extent
        # per axis (the source extent is not standardized; documented as
        # a guess in the README)
        plo = [l + 0.25 * (h - l) for l, h in zip(lo[:-1], hi[:-1])]
        phi_ = [l + 0.75 * (h - l) for l, h in zip(lo[:-1], hi[:-1])]
        patch = {"shape": "rectangle", "lo": plo, "hi": phi_}
    else:
        if not isinstance(patch_cfg, dict):
            raise ConfigError("'domain.patch' must be a mapping")
        shape = _require(patch_cfg, "domain.patch", "shape", str,
                         choices=("rectangle", "disk", "none"))
        if shape == "none":
            _check_keys(patch_cfg, "domain.patch", ("shape",))
            patch = {"shape": "none"}
        elif shape == "rectangle":
            _check_keys(patch_cfg, "domain.patch", ("shape", "lo", "hi"))
            patch = {"shape": "rectangle",
                     "lo": _float_list(patch_cfg, "domain.patch", "lo", length=dim - 1),
                     "hi": _float_list(patch_cfg, "domain.patch", "hi", length=dim - 1)}
        else:
            _check_keys(patch_cfg, "domain.patch", ("shape", "center", "radius"))
            patch = {"shape": "disk",
                     "center": _float_list(patch_cfg, "domain.patch", "center", length=dim - 1),
                     "radius": _require(patch_cfg, "domain.patch", "radius", float)}

    gr = raw["grid"]
    _check_keys(gr, "grid", ("coarse_n", "levels"))
    coarse_n = [int(v) for v in _float_list(gr, "grid", "coarse_n", length=dim)]
    levels = _require(gr, "grid", "levels", int, default=5)
    if levels < 1:
        raise ConfigError(f"'grid.levels' must be >= 1, got {levels}")

    tm = raw["time"]
    _check_keys(tm, "time", ("dt", "n_steps", "snapshot_steps", "time_unit"))
    unit = _require(tm, "time", "time_unit", str, default="s", choices=("s", "yr"))
    scale = SECONDS_PER_YEAR if unit == "yr" else 1.0
    dt = _require(tm, "time", "dt", float) * scale
    n_steps = _require(tm, "time", "n_steps", int)
    if dt <= 0 or n_steps < 1:
        raise ConfigError(f"need positive 'time.dt' and 'time.n_steps' >= 1, "
                          f"got dt={dt}, n_steps={n_steps}")
    snap = tm.get("snapshot_steps", [])
    if not isinstance(snap, (list, tuple)) or any(
            not isinstance(s, int) or isinstance(s, bool) or s < 0 or s > n_steps
            for s in snap):
        raise ConfigError(f"'time.snapshot_steps' must be integers in [0, {n_steps}], got {snap}")

    ph = raw.get("physics", {})
    _check_keys(ph, "physics", ("rho0", "rho1", "mu", "Dm", "g", "phi_mean", "K_mean"))
    defaults = FlowParameters()
    physics = {
        "rho0": _require(ph, "physics", "rho0", float, default=defaults.rho0),
        "rho1": _require(ph, "physics", "rho1", float, default=defaults.rho1),
        "mu": _require(ph, "physics", "mu", float, default=defaults.mu),
        "Dm": _require(ph, "physics", "Dm", float, default=defaults.Dm),
        "g": _require(ph, "physics", "g", float, default=defaults.g),
        "phi_mean": _require(ph, "physics", "phi_mean", float, default=defaults.phi_mean),
        "K_mean": _require(ph, "physics", "K_mean", float, default=defaults.K_mean),
    }

    st = raw["stochastic"]
    _check_keys(st, "stochastic", ("field",))
    fld = _require(st, "stochastic", "field", str, choices=FIELD_KINDS)

    me = raw["method"]
    _check_keys(me, "method", ("kind", "rule", "rule_n", "gpc_order", "gpc_truncation"))
    kind = _require(me, "method", "kind", str, choices=METHOD_KINDS)
    method = {
        "kind": kind,
        "rule": _require(me, "method", "rule", str, default="qmc_halton", choices=RULE_KINDS),
        "rule_n": _require(me, "method", "rule_n", int, default=1),
        "gpc_order": _require(me, "method", "gpc_order", int, default=4),
        "gpc_truncation": _require(me, "method", "gpc_truncation", str,
                                   default="total_degree",
                                   choices=("total_degree", "max_degree", "product_degree")),
    }
    if kind != "deterministic" and fld == "constant":
        raise ConfigError("stochastic methods need a non-constant porosity field")
    if method["rule_n"] < 1:
        raise ConfigError(f"'method.rule_n' must be >= 1, got {method['rule_n']}")

    so = raw.get("solver", {})
    _check_keys(so, "solver", ("newton_tol_abs", "newton_tol_rel", "newton_max_iter",
                               "ls_max_halvings", "krylov_tol_rel", "krylov_max_iter",
                               "mg_pre_smooth", "mg_post_smooth", "mg_coarse", "mg_levels"))
    solver = {
        "newton_tol_abs": _require(so, "solver", "newton_tol_abs", float, default=1e-12),
        "newton_tol_rel": _require(so, "solver", "newton_tol_rel", float, default=1e-8),
        "newton_max_iter": _require(so, "solver", "newton_max_iter", int, default=20),
        "ls_max_halvings": _require(so, "solver", "ls_max_halvings", int, default=12),
        "krylov_tol_rel": _require(so, "solver", "krylov_tol_rel", float, default=1e-6),
        "krylov_max_iter": _require(so, "solver", "krylov_max_iter", int, default=200),
        "mg_pre_smooth": _require(so, "solver", "mg_pre_smooth", int, default=1),
        "mg_post_smooth": _require(so, "solver", "mg_post_smooth", int, default=1),
        "mg_coarse": _require(so, "solver", "mg_coarse", str, default="direct",
                              choices=("direct", "many_smooths")),
        "mg_levels": _require(so, "solver", "mg_levels", int, default=0),
    }

    ou = raw.get("output", {})
    _check_keys(ou, "output", ("directory", "formats", "thresholds", "probes"))
    formats = ou.get("formats", ["vtk", "csv"])
    if not isinstance(formats, (list, tuple)) or set(formats) - {"vtk", "csv"}:
        raise ConfigError(f"'output.formats' entries must be 'vtk' or 'csv', got {formats}")
    probes = ou.get("probes", [])
    if not isinstance(probes, (list, tuple)):
        raise ConfigError("'output.probes' must be a list of coordinate lists")
    probes = [
        _float_list({"p": pr}, "output.probes", "p", length=dim) for pr in probes
    ]
    output = {
        "directory": _require(ou, "output", "directory", str, default="out"),
        "formats": list(formats),
        "thresholds": _float_list(ou, "output", "thresholds", default=[]),
        "probes": probes,
    }

    rn = raw.get("run", {})
    _check_keys(rn, "run", ("workers", "resume", "failure_policy", "seed"))
    run = {
        "workers": _require(rn, "run", "workers", int, default=1),
        "resume": _require(rn, "run", "resume", bool, default=False),
        "failure_policy": _require(rn, "run", "failure_policy", str, default="abort",
                                   choices=("abort", "continue", "skip_reweight")),
        "seed": _require(rn, "run", "seed", int, default=0),
    }
    if run["workers"] < 1:
        raise ConfigError(f"'run.workers' must be >= 1, got {run['workers']}")

    return {
        "domain": {"dim": dim, "lo": lo, "hi": hi, "patch": patch},
        "grid": {"coarse_n": coarse_n, "levels": levels},
        "time": {"dt": dt, "n_steps": n_steps, "snapshot_steps": sorted(set(snap))},
        "physics": physics,
        "stochastic": {"field": fld},
        "method": method,
        "solver": solver,
        "output": output,
        "run": run,
    }


def dump_config(cfg: dict) -> str:
    """Serialize an effective configuration back to YAML."""
    return yaml.safe_dump(cfg, sort_keys=True)


def config_hash(cfg: dict) -> str:
    """Digest of every setting that affects numerical results.

    Output destinations, worker counts, and the resume flag are
    excluded; everything else (domain, grid, time, physics, field,
    method, solver, seed) is hashed canonically.
    """
    payload = {k: cfg[k] for k in ("domain", "grid", "time", "physics",
                                   "stochastic", "method", "solver")}
    payload["seed"] = cfg["run"]["seed"]
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _build_patch(cfg_patch: dict) -> DirichletPatch | None:
    if cfg_patch["shape"] == "none":
        return None
    if cfg_patch["shape"] == "rectangle":
        return DirichletPatch("rectangle", lo=cfg_patch["lo"], hi=cfg_patch["hi"])
    return DirichletPatch("disk", center=cfg_patch["center"], radius=cfg_patch["radius"])


def build_setup(cfg: dict) -> EnsembleSetup:
    """Construct grids, physics, and solver settings from a configuration."""
    dom = cfg["domain"]
    domain = BoxDomain(tuple(dom["lo"]), tuple(dom["hi"]))
    grids = build_grid(domain, cfg["grid"]["coarse_n"], cfg["grid"]["levels"],
                       _build_patch(dom["patch"]))
    params = FlowParameters(gravity_axis=dom["dim"] - 1, **cfg["physics"])
    field_spec = PorosityFieldSpec(cfg["stochastic"]["field"],
                                   base=cfg["physics"]["phi_mean"],
                                   domain=domain)
    so = cfg["solver"]
    return EnsembleSetup(
        grids=grids,
        field_spec=field_spec,
        params=params,
        dt=cfg["time"]["dt"],
        n_steps=cfg["time"]["n_steps"],
        snapshot_steps=tuple(cfg["time"]["snapshot_steps"]),
        newton=NewtonConfig(tol_abs=so["newton_tol_abs"], tol_rel=so["newton_tol_rel"],
                            max_iter=so["newton_max_iter"],
                            ls_max_halvings=so["ls_max_halvings"]),
        linear=LinearSolverConfig(krylov_tol_rel=so["krylov_tol_rel"],
                                  krylov_max_iter=so["krylov_max_iter"],
                                  mg_pre_smooth=so["mg_pre_smooth"],
                                  mg_post_smooth=so["mg_post_smooth"],
                                  mg_coarse=so["mg_coarse"]),
        mg_levels=so["mg_levels"],
        config_hash=config_hash(cfg),
    )


def build_rule(cfg: dict) -> QuadratureRule:
    """Quadrature/sampling rule for the configured method."""
    me = cfg["method"]
    M = PorosityFieldSpec(cfg["stochastic"]["field"]).dim_theta
    if me["kind"] == "deterministic":
        return QuadratureRule(np.zeros((1, max(M, 1))), np.ones(1), "mc")
    if me["kind"] == "qmc":
        return halton(me["rule_n"], M)
    if me["kind"] == "mc":
        return monte_carlo(me["rule_n"], M, seed=cfg["run"]["seed"])
    # gpc: a quadrature rule accurate enough for the projection
    if me["rule"] == "gauss_legendre":
        return gauss_legendre_tensor(me["rule_n"], M)
    if me["rule"] == "clenshaw_curtis":
        return clenshaw_curtis_tensor(me["rule_n"], M)
    if me["rule"] == "smolyak_cc":
        return smolyak_cc(me["rule_n"], M)
    raise ConfigError(f"method.rule {me['rule']!r} is not usable for gPC projection")


def build_specs(cfg: dict, rule: QuadratureRule) -> list[ScenarioSpec]:
    """One scenario per rule node, ids in node order."""
    digest = config_hash(cfg)
    M = PorosityFieldSpec(cfg["stochastic"]["field"]).dim_theta
    return [
        ScenarioSpec(i, rule.nodes[i, :M] if M else np.zeros(0),
                     float(rule.weights[i]), digest)
        for i in range(rule.n_nodes)
    ]
