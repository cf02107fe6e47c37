"""Scenario configs: parse, run, check and write artifacts.

A scenario is a JSON object::

    {
      "name": "semicircle",
      "ambient_dim": 2,
      "barrier": {"kind": "flat", "normal": [1, 0], "offset": 0},
      "initial": {"model": "semicircle", "radius": 1.0, "samples": 400,
                  "perturb": {"amplitude": 0.02, "seed": 1}},
      "flow": {"node_count": 256, "cfl": 0.5, "t_end": 1.0, "kappa_cap": 15,
               "len_min": 1e-4, "output_every": 200, "seed": 0},
      "analyses": [{"check": "T_est", "min": 0.49, "max": 0.51}],
      "entropy": {"centers": "auto", "sigma_hats": [0.25, 0.0625], "radii": ["inf"]},
      "output_dir": "out/semicircle"
    }

``initial`` may instead give ``"nodes": [[...], ...]`` and ``"closed"``.
Exit codes: 0 all checks pass, 1 a tolerance failed, 2 schema error,
3 numerical blowup.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis as an
from .barrier import Barrier, FlatBarrier, ProjectionError, make_barrier
from .flow import BlowupError, FlowConfig, RunResult, make_state, rescale_typeI, run, stable_dt
from .geometry import DiscreteCurve, best_fit_plane_deviation
from .kernels import KernelParams, ScanSpec, entropy_scan, gaussian_functional_phi, plain_functional
from .models import MODEL_KINDS, ModelCurve, hausdorff_distance, perturb

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_BLOWUP = 0, 1, 2, 3

CSV_HEADER = ["t", "dt", "length", "max_kappa", "max_kappa_sqrt_T_minus_t",
              "boundary_dist", "boundary_angle", "phi_main"]

CHECKS = (
    "max_displacement", "T_est", "type_flag", "radius_law", "boundary_residual",
    "length_monotone", "evolution_residuals", "endpoint_relations", "phi_constant",
    "phi_monotone", "rescale_semicircle", "tau_kappa", "planarity", "entropy_sup",
)


class SchemaError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    ambient_dim: int
    barrier: Optional[dict]
    initial: dict
    flow: FlowConfig
    analyses: list = field(default_factory=list)
    entropy: Optional[dict] = None
    output_dir: Optional[str] = None


def _require(d, key, where):
    if key not in d:
        raise SchemaError(f"missing required field '{key}' in {where}")
    return d[key]


def parse_scenario(cfg: dict) -> Scenario:
    if not isinstance(cfg, dict):
        raise SchemaError("config must be a JSON object")
    name = _require(cfg, "name", "scenario")
    dim = _require(cfg, "ambient_dim", "scenario")
    if not isinstance(dim, int) or dim < 2:
        raise SchemaError("ambient_dim must be an integer >= 2")
    barrier = _require(cfg, "barrier", "scenario")
    if barrier is not None and (not isinstance(barrier, dict) or "kind" not in barrier):
        raise SchemaError("barrier must be null or an object with a 'kind'")
    if barrier is not None and barrier["kind"] not in ("flat", "sphere", "ellipsoid", "implicit", "none"):
        raise SchemaError(f"unknown barrier kind {barrier['kind']!r}")
    initial = _require(cfg, "initial", "scenario")
    if not isinstance(initial, dict) or not ("model" in initial or "nodes" in initial):
        raise SchemaError("initial needs 'model' or 'nodes'")
    if "model" in initial and initial["model"] not in MODEL_KINDS:
        raise SchemaError(f"unknown model {initial['model']!r}")
    fl = dict(_require(cfg, "flow", "scenario"))
    known = {f.name for f in fields(FlowConfig)}
    extra = set(fl) - known
    if extra:
        raise SchemaError(f"unknown flow fields {sorted(extra)}")
    try:
        flow = FlowConfig(**fl).validate()
    except (TypeError, ValueError) as e:
        raise SchemaError(f"flow: {e}") from None
    analyses = cfg.get("analyses", [])
    for a in analyses:
        if not isinstance(a, dict) or a.get("check") not in CHECKS:
            raise SchemaError(f"unknown analysis {a!r}")
        for k, v in a.items():
            if k in ("tol", "tol_factor", "max", "C_max") and not (isinstance(v, (int, float)) and v > 0):
                raise SchemaError(f"tolerance '{k}' in {a['check']} must be positive")
    return Scenario(name=str(name), ambient_dim=dim, barrier=barrier, initial=initial, flow=flow,
                    analyses=list(analyses), entropy=cfg.get("entropy"), output_dir=cfg.get("output_dir"))


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from None
    return parse_scenario(cfg)


def build_initial(sc: Scenario) -> tuple:
    """(DiscreteCurve, ModelCurve or None)."""
    ini = sc.initial
    model = None
    if "model" in ini:
        params = {k: v for k, v in ini.items() if k not in ("model", "samples", "perturb")}
        model = ModelCurve(ini["model"], params)
        curve = model.sample(int(ini.get("samples", max(400, sc.flow.node_count))))
    else:
        curve = DiscreteCurve(np.asarray(ini["nodes"], dtype=float), bool(ini.get("closed", False)))
    if curve.ambient_dim != sc.ambient_dim:
        raise SchemaError(f"initial curve has dimension {curve.ambient_dim}, expected {sc.ambient_dim}")
    pert = ini.get("perturb")
    if pert:
        seed = int(pert.get("seed", sc.flow.seed))
        curve = perturb(curve, float(pert["amplitude"]), seed, int(pert.get("modes", 4)))
    return curve, model


# ---------------------------------------------------------------------------
# checks

def _fin(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def _main_params(res: RunResult, barrier: Optional[Barrier], sc: Scenario):
    ent = sc.entropy or {}
    T = res.record.T_est
    x0 = ent.get("main_center")
    t0 = ent.get("main_t0")
    if x0 is None:
        x0 = res.record.blowup_point
    if t0 is None:
        t0 = T if math.isfinite(T) else None
    if x0 is None or t0 is None:
        return None
    r = ent.get("main_r", "inf")
    r = math.inf if r in (None, "inf") else float(r)
    if barrier is not None and not isinstance(barrier, FlatBarrier):
        r = min(r, barrier.r_max)
    return KernelParams(np.asarray(x0, dtype=float), float(t0), r)


def _phi(curve, t, params, barrier):
    if params.t0 - t <= 0:
        return math.nan
    if barrier is None:
        return plain_functional(curve, params.center, params.t0 - t)
    return gaussian_functional_phi(curve, t, params, barrier)


def run_check(spec: dict, res: RunResult, barrier, sc: Scenario, model) -> dict:
    c = spec["check"]
    out = {"check": c}
    states = res.states
    T = res.record.T_est
    if c == "max_displacement":
        v = res.max_displacement
        out.update(value=v, passed=v <= spec.get("max", 1e-8))
    elif c == "T_est":
        lo, hi = spec.get("min", -math.inf), spec.get("max", math.inf)
        out.update(value=T, passed=bool(lo <= T <= hi))
    elif c == "type_flag":
        out.update(value=res.record.type_flag, passed=res.record.type_flag == spec["expect"])
    elif c == "radius_law":
        center = np.asarray(spec.get("center", np.zeros(sc.ambient_dim)), dtype=float)
        r0 = float(spec.get("r0", 1.0))
        tmax = float(spec.get("t_max", 0.96 * r0**2 / 2))
        worst = 0.0
        for s in states:
            if s.time <= tmax:
                r = np.linalg.norm(s.curve.nodes - center, axis=1).mean()
                worst = max(worst, abs(r / math.sqrt(r0**2 - 2 * s.time) - 1))
        out.update(value=worst, passed=worst <= spec.get("tol", 5e-3))
    elif c == "boundary_residual":
        d = max(s.boundary_dist for s in states)
        a_ratio = max(s.boundary_angle / s.curve.spacing for s in states)
        out.update(max_dist=d, max_angle_over_h=a_ratio,
                   passed=d <= spec.get("max_dist", 1e-8) and a_ratio <= spec.get("angle_factor", 5.0))
    elif c == "length_monotone":
        L = res.trace["length"]
        inc = float(np.max(np.diff(L) / L[:-1], initial=0.0))
        out.update(value=inc, passed=inc <= spec.get("tol", 1e-10))
    elif c == "evolution_residuals":
        idx = int(spec.get("state", 0))
        s0 = states[idx]
        win = an.fixed_dt_window(s0, barrier, stable_dt(s0.curve, s0.max_kappa_sq, sc.flow.cfl),
                                 resample=sc.flow.resample)
        h, dt = win[1].curve.spacing, win[1].dt_last
        tol = spec.get("tol_factor", 5.0) * (h * h + dt)
        ex = int(spec.get("exclude", 3))
        names = spec.get("identities", ["kappa", "kappa_sq", "commutator", "tau1"])
        fns = {"kappa": an.residual_evolution_kappa, "kappa_sq": an.residual_evolution_kappa_sq,
               "commutator": an.residual_commutator, "tau1": an.residual_evolution_tau1}
        reps = [fns[n](win, ex) for n in names]
        out.update(reports=[r.to_dict() for r in reps], tol=tol,
                   passed=all(r.max_residual <= tol for r in reps))
    elif c == "endpoint_relations":
        t_min = float(spec.get("t_min", 0.0))
        worst, ineq = 0.0, True
        for s in states:
            if s.time < t_min:
                continue
            rep = an.endpoint_relations(s, barrier)
            worst = max(worst, rep.max_residual / s.curve.spacing)
            ineq &= rep.details["ineq_dmu_kappa"] and rep.details["ineq_tau1"]
        out.update(C=worst, inequalities=bool(ineq), passed=worst <= spec.get("C_max", 50.0) and ineq)
    elif c in ("phi_constant", "phi_monotone"):
        params = _main_params(res, barrier, sc)
        if "center" in spec:
            t0 = spec.get("t0", "T_est")
            t0 = T if t0 == "T_est" else float(t0)
            r = spec.get("r", "inf")
            params = KernelParams(np.asarray(spec["center"], dtype=float), t0,
                                  math.inf if r == "inf" else float(r))
        if params is None:
            out.update(passed=False, error="no center")
        else:
            vals = np.array([_phi(s.curve, s.time, params, barrier) for s in states])
            vals = vals[np.isfinite(vals)]
            if c == "phi_constant":
                target = spec.get("target", math.sqrt(2 * math.pi / math.e))
                dev = float(np.max(np.abs(vals - target)))
                out.update(value=dev, passed=dev <= spec.get("tol", 1e-2))
            else:
                inc = float(np.max(np.diff(vals), initial=0.0))
                out.update(value=inc, passed=inc <= spec.get("tol", 1e-4))
    elif c == "rescale_semicircle":
        lo, hi = spec.get("tau_range", [1e-3, 1e-2])
        unit = ModelCurve("semicircle", {k: spec[k] for k in ("normal", "tangent") if k in spec}
                          | {"center": [0.0] * sc.ambient_dim, "radius": 1.0}).sample(2001)
        hs, ratios = [], []
        if math.isfinite(T):
            z = res.record.blowup_point
            for s in states:
                if lo <= T - s.time <= hi:
                    hs.append(hausdorff_distance(rescale_typeI(s, z, T), unit))
                    ratios.append(s.max_kappa * math.sqrt(T - s.time))
        rlo, rhi = spec.get("ratio_range", [0.65, 0.78])
        ok = bool(hs) and max(hs) <= spec.get("max_hausdorff", 0.01) and all(rlo <= r <= rhi for r in ratios)
        out.update(samples=len(hs), max_hausdorff=max(hs, default=None),
                   ratio_min=min(ratios, default=None), ratio_max=max(ratios, default=None), passed=ok)
    elif c == "tau_kappa":
        mon = an.tau_kappa_ratio_monitor(states, barrier)
        out.update(endpoint_bound_holds=mon["endpoint_bound_holds"],
                   interior_ratio_last=mon["interior_ratio"][-1], passed=mon["endpoint_bound_holds"])
    elif c == "planarity":
        dev = best_fit_plane_deviation(states[-1].curve)
        out.update(value=dev, passed=dev <= spec.get("max", 1e-6))
    elif c == "entropy_sup":
        out.update(passed=True)  # filled in after the scan
    return {k: _jsonable(v) for k, v in out.items()}


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (float, int, np.floating, np.integer, np.bool_, bool)):
        return _fin(v)
    return v


# ---------------------------------------------------------------------------
# artifacts

def write_timeseries(path: Path, res: RunResult, barrier, sc: Scenario):
    params = _main_params(res, barrier, sc)
    T = res.record.T_est
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in res.states:
            mk = s.max_kappa
            rat = mk * math.sqrt(T - s.time) if math.isfinite(T) and T > s.time else math.nan
            phi = _phi(s.curve, s.time, params, barrier) if params is not None else math.nan
            w.writerow([repr(float(x)) for x in (s.time, s.dt_last, s.length, mk, rat,
                                                 s.boundary_dist, s.boundary_angle, phi)])


def write_states(dirpath: Path, res: RunResult):
    dirpath.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(res.states):
        with open(dirpath / f"{i:04d}.json", "w") as fh:
            json.dump({"ambient_dim": s.curve.ambient_dim, "t": s.time,
                       "nodes": s.curve.nodes.reshape(-1).tolist()}, fh)


def output_dir_for(sc: Scenario, override: Optional[str] = None) -> Path:
    """Explicit override, then $FBCSF_OUT, then the config's output_dir, then out/<name>."""
    return Path(override or os.environ.get("FBCSF_OUT") or sc.output_dir or os.path.join("out", sc.name))


def execute(sc: Scenario, out_dir: Optional[str] = None, with_entropy: bool = True) -> tuple:
    """Run a parsed scenario.  Returns (exit_code, report dict)."""
    try:
        barrier = make_barrier(sc.barrier, sc.ambient_dim)
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaError(f"barrier: {e}") from None
    curve, model = build_initial(sc)
    report = {"name": sc.name, "ambient_dim": sc.ambient_dim, "barrier": sc.barrier,
              "flow": {f.name: getattr(sc.flow, f.name) for f in fields(FlowConfig)}}
    try:
        res = run(curve, barrier, sc.flow)
    except (BlowupError, ProjectionError) as e:
        report["error"] = f"blowup: {e}"
        return EXIT_BLOWUP, report
    outp = output_dir_for(sc, out_dir)
    outp.mkdir(parents=True, exist_ok=True)
    write_timeseries(outp / "timeseries.csv", res, barrier, sc)
    write_states(outp / "states", res)
    checks = [run_check(a, res, barrier, sc, model) for a in sc.analyses]
    report.update({
        "stop_reason": res.stop_reason,
        "final_time": res.final.time,
        "steps": int(res.final.step_index),
        "max_displacement": res.max_displacement,
        "singularity": res.record.to_dict(),
        "checks": checks,
    })
    if with_entropy and sc.entropy is not None:
        try:
            spec = ScanSpec.from_dict(sc.entropy)
            ent = entropy_scan(res.states, barrier, spec)
            report["entropy"] = ent.to_dict()
            for chk in checks:
                if chk["check"] == "entropy_sup":
                    spec_c = next(a for a in sc.analyses if a["check"] == "entropy_sup")
                    lo, hi = spec_c.get("min", -math.inf), spec_c.get("max", math.inf)
                    chk.update(value=ent.entropy_sup, passed=bool(lo <= ent.entropy_sup <= hi))
        except ValueError as e:
            raise SchemaError(f"entropy: {e}") from None
    report = _jsonable(report)
    with open(outp / "report.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    code = EXIT_OK if all(c.get("passed") for c in checks) else EXIT_FAIL
    return code, report
