"""Config-driven experiment runner.

Usage::

    crfolio <task> --config run.json [--out DIR] [--seed N]
    crfolio catalog

Config schema (JSON, ``"schema": 1``)::

    {
      "schema": 1,
      "task": "verdict",                      # optional, must match the CLI task
      "family": {"builder": "rotating_circles", "R": 1, "r": 2},
      "function": "globevnik_n" | {"name": "globevnik_n", "n": 2} | {"expr": "z**2"},
      "grids": {"circle": 256, "parameter": 256, "raster": 512},
      "tolerances": {"extension": 1e-8, "degeneracy": 1e-8, "spread": 1e-6, "cr": 1e-6},
      "seed": 0,
      "probes": [[0, 0], [2, 0]],             # fibers / symmetry
      "probe_count": 8,                       # random far probes when "probes" is absent
      "path": [[-1.5, 0], [4.5, 0]],          # jumps
      "samples": 50,                          # jumps
      "jacobian": {"taylor": [[-0.1, 0], [1, 0]]},   # synthetic J for jumps / symmetry
      "surface": {"name": "sphere", "radius": 1},    # hypersurface
      "fibers": 20,
      "outputs": {"report": "report.json", "csv": true}
    }

Complex numbers are written as ``[re, im]`` (a bare number is real). Family
builders: ``rotating_circles`` (``R``, ``r``), ``translated_circles`` (``rho``,
``center_path``), ``tangent_lines`` (``ball_radius``, ``inner_radius``),
``hopf_discs`` and ``custom`` (``parameter`` = ``circle`` or ``interval`` and
``taylor_table``, one row of Taylor coefficients per node). Box families take
their own ``resolution`` (default 8).

The report is ``{meta, config_echo, evidence, verdict?}`` written with sorted
keys; only ``meta`` carries timestamps. Exit codes: 0 success, 1 task error,
2 config error, 3 nondegenerate witness, 4 inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .extension import FUNCTION_CATALOG, analyze, make_function, moment_test
from .family import (CIRCLE, INTERVAL, ParamSpace, build_custom, build_hopf_discs,
                     build_rotating_circles, build_tangent_lines, build_translated_circles,
                     closure_intersection_empty)
from .hypersurface import (SURFACE_CATALOG, K_mu_reality, boundary_samples, compute_minors,
                           dbar_mu_nu, lemma34_check, quadric, sphere, tangential_cr_residual,
                           trace_constancy)
from .jacobian import (DegenerateTheta, JacobianField, compute_J, theta_field, track_zeros)
from .numerics import ConfigurationError
from .topology import (CriticalPoint, NotRegularValue, boundary_preimages, homology_test,
                       trace_fiber)
from .verify import (INCONCLUSIVE, NONDEGENERATE_WITNESS, VerdictConfig, counterexample_suite,
                     far_probes, jump_profile, run_verdict, symmetry_relation)

SCHEMA = 1
TASKS = ("extend", "jacobian", "fibers", "homology", "symmetry", "jumps", "verdict",
         "counterexamples", "hypersurface")

EXIT_OK, EXIT_TASK, EXIT_CONFIG, EXIT_WITNESS, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

FAMILY_CATALOG = {
    "custom": ("§1.2", "circle or interval parameter, one coefficient row per node"),
    "hopf_discs": ("§2.3 Hopf foliation", "zeta (a, b) over the unit sphere in C^2"),
    "rotating_circles": ("§2.3", "R e^{it} + r zeta over the circle"),
    "tangent_lines": ("Theorem 3", "complex tangent lines of an inner sphere cut by a ball"),
    "translated_circles": ("§1.4", "radius rho, centres along a path, over an interval"),
}
FUNCTION_PROVENANCE = {
    "abs_z1_sq": "§2.3 Hopf foliation",
    "const": "test function",
    "expr:<source>": "user expression",
    "globevnik_n": "§2.3",
    "z_sq": "test function",
    "zbar": "test function",
}
SURFACE_PROVENANCE = {"quadric": "§3.6", "sphere": "§3.6"}

_DEFAULT_GRIDS = {"circle": 256, "parameter": 256, "raster": 512}
_DEFAULT_TOLERANCES = {"extension": 1e-8, "degeneracy": 1e-8, "spread": 1e-6, "cr": 1e-6}
_TOP_KEYS = {"schema", "task", "family", "function", "grids", "tolerances", "seed", "probes",
             "probe_count", "path", "samples", "jacobian", "surface", "fibers", "outputs"}


class ConfigError(ValueError):
    """Invalid config; ``key`` names the offending entry, ``line`` its source line."""

    def __init__(self, key: str, message: str, line: int | None = None):
        self.key = key
        self.line = line
        super().__init__(message)

    def render(self, path) -> str:
        where = f"{path}:{self.line}" if self.line else str(path)
        return f"{where}: {self.key}: {self}"


def list_catalog() -> str:
    """Sorted listing of builtin families, functions and surfaces with provenance."""
    lines = ["families:"]
    for name in sorted(FAMILY_CATALOG):
        prov, desc = FAMILY_CATALOG[name]
        lines.append(f"  {name:<20} [{prov}] {desc}")
    lines.append("functions:")
    for name in sorted(FUNCTION_CATALOG):
        lines.append(f"  {name:<20} [{FUNCTION_PROVENANCE.get(name, '')}] {FUNCTION_CATALOG[name]}")
    lines.append("surfaces:")
    for name in sorted(SURFACE_CATALOG):
        lines.append(f"  {name:<20} [{SURFACE_PROVENANCE.get(name, '')}] {SURFACE_CATALOG[name]}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# config parsing


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key.split(".")[-1]}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def _complex(value, key: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(key, "expected a number or [re, im]")
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return complex(value[0], value[1])
    raise ConfigError(key, f"expected a number or [re, im], got {value!r}")


def _complex_list(value, key: str) -> list[complex]:
    if not isinstance(value, list) or not value:
        raise ConfigError(key, "expected a non-empty list of complex values")
    return [_complex(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _number(obj: dict, key: str, prefix: str, default=None, positive: bool = False,
            integer: bool = False):
    full = f"{prefix}.{key}" if prefix else key
    if key not in obj:
        if default is None:
            raise ConfigError(full, "missing required value")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(full, f"expected a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(full, f"expected an integer, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(full, f"must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _check_keys(obj: dict, allowed: set, prefix: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        key = f"{prefix}.{extra[0]}" if prefix else extra[0]
        raise ConfigError(key, "unknown key")


def normalize_config(raw, task: str) -> dict:
    """Validate a parsed config and fill defaults. Raises ``ConfigError``."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "")
    if raw.get("schema") != SCHEMA:
        raise ConfigError("schema", f"expected schema {SCHEMA}, got {raw.get('schema')!r}")
    if task not in TASKS:
        raise ConfigError("task", f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    if "task" in raw and raw["task"] != task:
        raise ConfigError("task", f"config is for task {raw['task']!r}, not {task!r}")
    cfg = {"schema": SCHEMA, "task": task}

    grids = raw.get("grids", {})
    if not isinstance(grids, dict):
        raise ConfigError("grids", "expected an object")
    _check_keys(grids, set(_DEFAULT_GRIDS), "grids")
    cfg["grids"] = {k: _number(grids, k, "grids", d, positive=True, integer=True)
                    for k, d in _DEFAULT_GRIDS.items()}
    tols = raw.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("tolerances", "expected an object")
    _check_keys(tols, set(_DEFAULT_TOLERANCES), "tolerances")
    cfg["tolerances"] = {k: _number(tols, k, "tolerances", d, positive=True)
                         for k, d in _DEFAULT_TOLERANCES.items()}
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed", "expected an unsigned 64-bit integer")
    cfg["seed"] = seed
    for key, default in (("probe_count", 8), ("samples", 50), ("fibers", 20)):
        cfg[key] = _number(raw, key, "", default, positive=True, integer=True)
    if "probes" in raw:
        cfg["probes"] = [[z.real, z.imag] for z in _complex_list(raw["probes"], "probes")]
    if "path" in raw:
        path = _complex_list(raw["path"], "path")
        if len(path) < 2:
            raise ConfigError("path", "a path needs at least two vertices")
        cfg["path"] = [[z.real, z.imag] for z in path]

    if task != "counterexamples":
        if "family" not in raw:
            raise ConfigError("family", "missing required value")
        cfg["family"] = _normalize_family(raw["family"], cfg["grids"]["parameter"])
    needs_function = task in ("extend", "jacobian", "verdict", "hypersurface") or (
        task in ("symmetry", "jumps", "fibers") and "jacobian" not in raw and "function" in raw)
    if needs_function or "function" in raw:
        if "function" not in raw:
            raise ConfigError("function", "missing required value")
        cfg["function"] = _normalize_function(raw["function"])
    if "jacobian" in raw:
        jac = raw["jacobian"]
        if not isinstance(jac, dict) or "taylor" not in jac:
            raise ConfigError("jacobian.taylor", "expected {\"taylor\": [c0, c1, ...]}")
        _check_keys(jac, {"taylor", "scale"}, "jacobian")
        coeffs = _complex_list(jac["taylor"], "jacobian.taylor")
        cfg["jacobian"] = {"taylor": [[c.real, c.imag] for c in coeffs],
                           "scale": _number(jac, "scale", "jacobian", 1.0, positive=True)}
    if task in ("symmetry", "jumps") and "function" not in cfg and "jacobian" not in cfg:
        raise ConfigError("function", "symmetry and jumps need a function or a synthetic jacobian")
    if task == "jumps" and "path" not in cfg:
        raise ConfigError("path", "missing required value")
    if task == "fibers" and "probes" not in cfg:
        raise ConfigError("probes", "missing required value")
    if "surface" in raw or task == "hypersurface":
        cfg["surface"] = _normalize_surface(raw.get("surface", {"name": "sphere"}))

    out = raw.get("outputs", {})
    if not isinstance(out, dict):
        raise ConfigError("outputs", "expected an object")
    _check_keys(out, {"report", "csv"}, "outputs")
    report = out.get("report", "report.json")
    if not isinstance(report, str) or not report:
        raise ConfigError("outputs.report", "expected a file name")
    write_csv = out.get("csv", True)
    if not isinstance(write_csv, bool):
        raise ConfigError("outputs.csv", "expected true or false")
    cfg["outputs"] = {"report": report, "csv": write_csv}
    return cfg


_FAMILY_KEYS = {
    "rotating_circles": {"R", "r"},
    "translated_circles": {"rho", "center_path"},
    "tangent_lines": {"ball_radius", "inner_radius"},
    "hopf_discs": set(),
    "custom": {"parameter", "taylor_table"},
}


def _normalize_family(spec, resolution: int) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError("family", "expected an object with a builder")
    builder = spec.get("builder")
    if builder not in _FAMILY_KEYS:
        raise ConfigError("family.builder", f"unknown builder {builder!r}")
    _check_keys(spec, _FAMILY_KEYS[builder] | {"builder", "resolution"}, "family")
    box = builder in ("tangent_lines", "hopf_discs")
    out = {"builder": builder,
           "resolution": _number(spec, "resolution", "family", 8 if box else resolution,
                                 positive=True, integer=True)}
    if builder == "rotating_circles":
        out["R"] = _number(spec, "R", "family")
        out["r"] = _number(spec, "r", "family", positive=True)
        if out["R"] < 0:
            raise ConfigError("family.R", "must be non-negative")
    elif builder == "translated_circles":
        out["rho"] = _number(spec, "rho", "family", positive=True)
        if "center_path" not in spec:
            raise ConfigError("family.center_path", "missing required value")
        path = _complex_list(spec["center_path"], "family.center_path")
        if len(path) < 2:
            raise ConfigError("family.center_path", "needs at least two points")
        out["center_path"] = [[z.real, z.imag] for z in path]
    elif builder == "tangent_lines":
        out["ball_radius"] = _number(spec, "ball_radius", "family", positive=True)
        out["inner_radius"] = _number(spec, "inner_radius", "family", positive=True)
    elif builder == "custom":
        kind = spec.get("parameter")
        if kind not in (CIRCLE, INTERVAL):
            raise ConfigError("family.parameter", "expected 'circle' or 'interval'")
        table = spec.get("taylor_table")
        if not isinstance(table, list) or not table:
            raise ConfigError("family.taylor_table", "expected one coefficient row per node")
        rows = [[[c.real, c.imag] for c in _complex_list(row, f"family.taylor_table[{i}]")]
                for i, row in enumerate(table)]
        if len({len(r) for r in rows}) != 1:
            raise ConfigError("family.taylor_table", "rows must have equal length")
        if "resolution" in spec and out["resolution"] != len(rows):
            raise ConfigError("family.resolution", "does not match the number of table rows")
        out.update(parameter=kind, resolution=len(rows), taylor_table=rows)
    return out


def _normalize_function(spec) -> dict:
    if isinstance(spec, str):
        spec = {"expr": spec[5:]} if spec.startswith("expr:") else {"name": spec}
    if not isinstance(spec, dict):
        raise ConfigError("function", "expected a name or an object")
    if "expr" in spec:
        _check_keys(spec, {"expr"}, "function")
        if not isinstance(spec["expr"], str):
            raise ConfigError("function.expr", "expected a string")
        out = {"name": "expr:" + spec["expr"]}
    else:
        name = spec.get("name")
        if name not in FUNCTION_CATALOG or name == "expr:<source>":
            raise ConfigError("function.name", f"unknown function {name!r}")
        out = {"name": name}
        if name == "globevnik_n":
            _check_keys(spec, {"name", "n"}, "function")
            out["n"] = _number(spec, "n", "function", 2, integer=True)
        elif name == "const":
            _check_keys(spec, {"name", "value"}, "function")
            v = _complex(spec.get("value", 1.0), "function.value")
            out["value"] = [v.real, v.imag]
        else:
            _check_keys(spec, {"name"}, "function")
    try:
        _make_function(out)
    except ConfigurationError as exc:
        raise ConfigError("function", str(exc)) from None
    return out


def _normalize_surface(spec) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError("surface", "expected an object")
    name = spec.get("name", "sphere")
    if name == "sphere":
        _check_keys(spec, {"name", "radius"}, "surface")
        return {"name": "sphere", "radius": _number(spec, "radius", "surface", 1.0, positive=True)}
    if name == "quadric":
        _check_keys(spec, {"name", "A", "b", "c"}, "surface")
        A = spec.get("A")
        if not (isinstance(A, list) and len(A) == 2 and all(isinstance(r, list) and len(r) == 2
                                                           for r in A)):
            raise ConfigError("surface.A", "expected a 2x2 matrix of complex values")
        rows = [[[c.real, c.imag] for c in _complex_list(r, f"surface.A[{i}]")]
                for i, r in enumerate(A)]
        b = [[c.real, c.imag] for c in _complex_list(spec.get("b", [0, 0]), "surface.b")]
        if len(b) != 2:
            raise ConfigError("surface.b", "expected two complex values")
        return {"name": "quadric", "A": rows, "b": b, "c": _number(spec, "c", "surface", -1.0)}
    raise ConfigError("surface.name", f"unknown surface {name!r}")


# ---------------------------------------------------------------------------
# object construction


def _pairs(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _make_function(spec: dict):
    params = {k: v for k, v in spec.items() if k != "name"}
    if "value" in params:
        params["value"] = complex(*params["value"])
    return make_function(spec["name"], **params)


def build_family(spec: dict):
    b = spec["builder"]
    res = spec["resolution"]
    if b == "rotating_circles":
        return build_rotating_circles(spec["R"], spec["r"], res)
    if b == "translated_circles":
        return build_translated_circles(spec["rho"], _pairs(spec["center_path"]), res)
    if b == "tangent_lines":
        return build_tangent_lines(spec["ball_radius"], spec["inner_radius"], res)
    if b == "hopf_discs":
        return build_hopf_discs(res)
    return build_custom(_pairs(spec["taylor_table"]), ParamSpace(spec["parameter"], res))


def _make_surface(spec: dict):
    if spec["name"] == "sphere":
        return sphere(spec["radius"])
    return quadric(_pairs(spec["A"]), _pairs(spec["b"]), spec["c"])


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# tasks; each returns (evidence, verdict or None, exit code, csv tables)


def _task_extend(cfg, family):
    f = _make_function(cfg["function"])
    N = cfg["grids"]["circle"]
    ext = analyze(f, family, N)
    valid = family.params.valid_mask
    rel = ext.residual_t[valid] / np.maximum(ext.rms_t[valid], 1e-300)
    evidence = {
        "function": f.name,
        "extension_residual": ext.residual,
        "extension_holds": ext.holds,
        "worst_relative_residual": float(rel.max()),
        "nodes_failing": int(np.sum(~ext.holds_t[valid])),
        "moment_max_normalized": moment_test(f, family, 4, N, normalize=True),
    }
    rows = None
    if family.params.kind != "box3":
        rows = [("t", "residual", "rms")] + [
            (float(t), float(r), float(s))
            for t, r, s in zip(family.t_nodes, ext.residual_t, ext.rms_t)]
    return evidence, None, EXIT_OK, {"extension_residual.csv": rows} if rows else {}


def _synthetic_J(cfg, family):
    jac = cfg["jacobian"]
    return JacobianField.from_taylor(family, _pairs(jac["taylor"]), jac["scale"],
                                     cfg["grids"]["circle"])


def _jacobian_for(cfg, family):
    if "jacobian" in cfg:
        return _synthetic_J(cfg, family), None
    f = _make_function(cfg["function"])
    ext = analyze(f, family, cfg["grids"]["circle"])
    return compute_J(ext, family), f


def _chain_evidence(chain, family) -> dict:
    branches = [{"start_t": float(br.t[0]), "end_t": float(br.t[-1]), "kappa": float(br.kappa),
                 "closed": bool(br.closed), "central": bool(br.is_central),
                 "nodes": int(len(br.t))} for br in chain.branches]
    return {"branches": branches, "central_cycle_present": bool(chain.central_cycle_present),
            "zero_disc_nodes": [int(k) for k in chain.zero_disc_nodes],
            "collisions": len(chain.collisions)}


def _task_jacobian(cfg, family):
    family.require_planar("the jacobian task")
    J, f = _jacobian_for(cfg, family)
    evidence = {"j_max": J.j_max, "scale": J.scale}
    if J.j_max < cfg["tolerances"]["degeneracy"]:
        evidence["degenerate"] = True
        return evidence, None, EXIT_OK, {}
    evidence["degenerate"] = False
    try:
        th = theta_field(J, f)
        evidence["theta"] = {"compatibility_residual": th.compatibility_residual,
                             "pairs_compared": th.pairs_compared,
                             "unimodularity_error": th.unimodularity_error}
    except DegenerateTheta as exc:
        evidence["theta"] = {"error": str(exc)}
    chain = track_zeros(J)
    evidence["zeros"] = _chain_evidence(chain, family)
    rows = [("branch", "t", "re", "im", "kappa", "closed")]
    for i, br in enumerate(chain.branches):
        for t, z in zip(br.t, br.roots):
            rows.append((i, float(t), float(z.real), float(z.imag), float(br.kappa),
                         int(br.closed)))
    return evidence, None, EXIT_OK, {"zeros.csv": rows}


def _task_fibers(cfg, family):
    f = _make_function(cfg["function"]) if "function" in cfg else None
    ext = analyze(f, family, cfg["grids"]["circle"]) if f is not None else None
    probes, rows = [], [("probe", "component", "t", "re", "im", "f_re", "f_im")]
    for i, b in enumerate(_pairs(cfg["probes"])):
        try:
            fibers = trace_fiber(family, b, ext, size=cfg["grids"]["circle"])
        except (NotRegularValue, CriticalPoint) as exc:
            probes.append({"b": _c(b), "error": f"{type(exc).__name__}: {exc}"})
            continue
        entry = {"b": _c(b), "components": len(fibers),
                 "closed": [bool(fb.closed) for fb in fibers],
                 "max_residual": max((fb.residual(family) for fb in fibers), default=0.0)}
        if family.planar:
            pre = boundary_preimages(family, b)
            entry["boundary_preimages"] = int(len(pre.psi))
            entry["brouwer_degree"] = int(pre.degree)
        if ext is not None and fibers:
            entry["f_spread"] = max(float(np.max(np.abs(fb.f_values - fb.f_values[0])))
                                    for fb in fibers if fb.f_values is not None)
        probes.append(entry)
        for k, fb in enumerate(fibers):
            fv = fb.f_values if fb.f_values is not None else np.full(len(fb.t), np.nan)
            for t, z, v in zip(fb.t, fb.zeta, fv):
                rows.append((i, k, float(t), float(z.real), float(z.imag), float(v.real),
                             float(v.imag)))
    return {"probes": probes}, None, EXIT_OK, {"fibers.csv": rows}


def _task_homology(cfg, family):
    family.require_planar("the homology task")
    inter = closure_intersection_empty(family, cfg["grids"]["raster"])
    hom = homology_test(family, cfg["grids"]["circle"], cfg["grids"]["raster"])
    evidence = {
        "closure_intersection_empty": inter.empty,
        "intersection_witness": None if inter.witness is None else _c(inter.witness),
        "intersection_cell": inter.cell,
        "condition_a": hom.condition_a,
        "condition_iii": hom.condition_iii,
        "routes_agree": hom.routes_agree,
        "central_image_winding": [{"b": _c(b), "winding": int(w)}
                                  for b, w in sorted(hom.central_image_winding.items(),
                                                     key=lambda kv: (kv[0].real, kv[0].imag))],
        "probes_used": len(hom.probes_used),
    }
    return evidence, None, EXIT_OK, {}


def _probes(cfg, family):
    if "probes" in cfg:
        return _pairs(cfg["probes"])
    return far_probes(family, cfg["probe_count"], cfg["seed"])


def _task_symmetry(cfg, family):
    family.require_planar("the symmetry task")
    J, _ = _jacobian_for(cfg, family)
    chain = track_zeros(J)
    reports, rows = [], [("b_re", "b_im", "lhs", "rhs", "gap", "admissible")]
    for b in _probes(cfg, family):
        r = symmetry_relation(J, chain, family, b, cfg["grids"]["circle"])
        reports.append({"b": _c(r.b), "lhs": float(r.lhs.real), "rhs": float(r.rhs.real),
                        "abs_gap": float(r.abs_gap) if r.admissible else None,
                        "admissible": bool(r.admissible), "reason": r.reason})
        rows.append((r.b.real, r.b.imag, r.lhs.real, r.rhs.real, r.abs_gap, int(r.admissible)))
    gaps = [r["abs_gap"] for r in reports if r["admissible"]]
    evidence = {"j_max": J.j_max, "zeros": _chain_evidence(chain, family), "probes": reports,
                "max_abs_gap": max(gaps) if gaps else None, "admissible_count": len(gaps)}
    return evidence, None, EXIT_OK, {"symmetry.csv": rows}


def _task_jumps(cfg, family):
    family.require_planar("the jumps task")
    J, _ = _jacobian_for(cfg, family)
    chain = track_zeros(J)
    prof = jump_profile(J, chain, family, _pairs(cfg["path"]), cfg["samples"],
                        cfg["grids"]["circle"])
    rows = [("index", "b_re", "b_im", "chi", "Z", "N")]
    samples = []
    for k, b in enumerate(prof.probes):
        z = prof.Z[k]
        n = prof.N[k]
        samples.append({"b": _c(b), "chi": float(prof.chi[k].real),
                        "Z": None if z is None else float(z),
                        "N": None if n is None else float(n.real)})
        rows.append((k, b.real, b.imag, prof.chi[k].real, np.nan if z is None else z,
                     np.nan if n is None else n.real))
    evidence = {"samples": samples, "path_mesh": prof.path_mesh,
                "jump_events": [{"after_sample": int(k), "jump": float(j)}
                                for k, j in prof.jump_events],
                "admissible_count": int(np.sum(prof.admissible)),
                "zeros": _chain_evidence(chain, family)}
    return evidence, None, EXIT_OK, {"jumps.csv": rows}


def _verdict_config(cfg) -> VerdictConfig:
    tol = cfg["tolerances"]
    return VerdictConfig(size=cfg["grids"]["circle"], raster=cfg["grids"]["raster"],
                         extension_rtol=tol["extension"], degeneracy=tol["degeneracy"],
                         spread=tol["spread"], cr=tol["cr"], fibers=cfg["fibers"],
                         symmetry_probes=cfg["probe_count"], seed=cfg["seed"],
                         surface=_make_surface(cfg["surface"]) if "surface" in cfg else None)


def _task_verdict(cfg, family):
    f = _make_function(cfg["function"])
    rep = run_verdict(f, family, _verdict_config(cfg))
    evidence = rep.to_dict()
    for key in ("verdict", "which", "details"):
        evidence.pop(key)
    verdict = {"label": rep.label(), "verdict": rep.verdict, "which": rep.which,
               "details": rep.details}
    code = {NONDEGENERATE_WITNESS: EXIT_WITNESS, INCONCLUSIVE: EXIT_INCONCLUSIVE}.get(
        rep.verdict, EXIT_OK)
    return evidence, verdict, code, {}


def _task_counterexamples(cfg, family):
    rep = counterexample_suite(cfg["grids"]["circle"], cfg["grids"]["parameter"])
    checks = [{"name": c.name, "passed": c.passed, "value": c.value,
               "expectation": c.expectation} for c in rep.checks]
    verdict = {"passed": rep.passed, "failed": rep.failed()}
    return {"checks": checks}, verdict, EXIT_OK if rep.passed else EXIT_TASK, {}


def _task_hypersurface(cfg, family):
    surface = _make_surface(cfg["surface"])
    f = _make_function(cfg["function"])
    kr = K_mu_reality(family, surface)
    ext = analyze(f, family, 64)
    pts = boundary_samples(family)
    p = pts[: min(len(pts), 64)]
    d12 = dbar_mu_nu(f, surface, p, 1, 2)
    d21 = dbar_mu_nu(f, surface, p, 2, 1)
    evidence = {
        "surface": surface.name,
        "incidence": kr.incidence,
        "K_mu_max_rel_imag": {str(k): v for k, v in kr.max_rel_imag.items()},
        "K_mu_samples": {str(k): v for k, v in kr.samples.items()},
        "extension_residual": ext.residual,
        "extension_holds": ext.holds,
        "trace_constancy": trace_constancy(ext),
        "tangential_cr_residual": tangential_cr_residual(f, surface, pts),
        "antisymmetry_gap": float(np.max(np.abs(d12 + d21))),
    }
    if ext.holds:
        minors = compute_minors(ext, family)
        evidence["minors_relative_max"] = [minors.relative_max(k) for k in range(4)]
        evidence["minors_consistent"] = lemma34_check(minors)
    return evidence, None, EXIT_OK, {}


_TASKS = {"extend": _task_extend, "jacobian": _task_jacobian, "fibers": _task_fibers,
          "homology": _task_homology, "symmetry": _task_symmetry, "jumps": _task_jumps,
          "verdict": _task_verdict, "counterexamples": _task_counterexamples,
          "hypersurface": _task_hypersurface}


# ---------------------------------------------------------------------------
# reports


def jsonable(obj):
    """Plain JSON values: complex as ``[re, im]``, non-finite floats as ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def _write_csv(path: Path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def run(cfg: dict, out_dir) -> tuple[int, dict]:
    """Execute a validated config; writes the report and CSV dumps under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    report = {"config_echo": cfg}
    try:
        family = build_family(cfg["family"]) if "family" in cfg else None
    except ConfigurationError as exc:
        raise ConfigError("family", str(exc)) from None
    try:
        evidence, verdict, code, tables = _TASKS[cfg["task"]](cfg, family)
    except Exception as exc:  # task failures become structured report errors
        evidence, verdict, code, tables = {}, None, EXIT_TASK, {}
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    report["evidence"] = evidence
    if verdict is not None:
        report["verdict"] = verdict
    written = []
    if cfg["outputs"]["csv"]:
        for name, rows in sorted(tables.items()):
            _write_csv(out_dir / name, rows)
            written.append(name)
    report["meta"] = {"tool": "crfolio", "version": __version__, "task": cfg["task"],
                      "seed": cfg["seed"], "schema": SCHEMA, "exit_code": code,
                      "csv": written, "numpy": np.__version__,
                      "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started)),
                      "elapsed_s": round(time.time() - started, 3)}
    (out_dir / cfg["outputs"]["report"]).write_text(dumps(report))
    return code, report


def load_config(path, task: str, seed: int | None = None) -> dict:
    """Read, parse and validate a config file. Raises ``ConfigError``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read config: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"{exc.msg} (column {exc.colno})", exc.lineno) from None
    if seed is not None and isinstance(raw, dict):
        raw["seed"] = seed
    try:
        return normalize_config(raw, task)
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _line_of(text, exc.key)
        raise


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="crfolio",
                                     description="Analytic disc families and CR extension checks.")
    parser.add_argument("task", choices=TASKS + ("catalog",))
    parser.add_argument("--config", help="JSON run config")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--seed", type=_u64, help="override the config seed")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.task == "catalog":
        sys.stdout.write(list_catalog())
        return EXIT_OK
    if not args.config:
        print("crfolio: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.task, args.seed)
        code, report = run(cfg, args.out)
    except ConfigError as exc:
        print(f"crfolio: {exc.render(args.config)}", file=sys.stderr)
        return EXIT_CONFIG
    if "error" in report:
        print(f"crfolio: {args.task} failed: {report['error']['type']}: "
              f"{report['error']['message']}", file=sys.stderr)
    elif "verdict" in report and "label" in report["verdict"]:
        print(report["verdict"]["label"])
    else:
        print(f"{args.task}: ok")
    return code


if __name__ == "__main__":
    sys.exit(main())
