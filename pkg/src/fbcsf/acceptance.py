"""The built-in acceptance matrix.

Each criterion is a function returning a ``Criterion`` with a pass flag and
the measured numbers.  Expensive flows shared by several criteria are cached
per process.  ``run_all`` is what ``fbcsf verify`` and the acceptance tests
call.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import analysis as an
from .barrier import FlatBarrier, SphereBarrier
from .flow import FlowConfig, make_state, rescale_typeI, run, stable_dt, step
from .geometry import DiscreteCurve, resample_arclength
from .kernels import KernelParams, gaussian_functional_phi
from .models import ModelCurve, hausdorff_distance, model_entropy, perturb

SQRT_2PI_E = math.sqrt(2.0 * math.pi / math.e)
BURN_IN = 0.02  # time after which endpoint compatibility is checked on perturbed data


@dataclass
class Criterion:
    key: str
    title: str
    passed: bool
    detail: Dict = field(default_factory=dict)
    seconds: float = 0.0
    failed_checks: List[str] = field(default_factory=list)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = ""
        if self.failed_checks:
            extra = " failing: " + ", ".join(self.failed_checks)
        return f"[{flag}] {self.key} {self.title} ({self.seconds:.1f}s){extra}"


@dataclass
class Options:
    torsion_term_sign: float = 1.0  # -1 injects the sign mutation


# ---------------------------------------------------------------------------
# shared runs

FLAT = FlatBarrier(np.array([1.0, 0.0]), 0.0)
SEMI = ModelCurve("semicircle", {"center": [0.0, 0.0], "radius": 1.0, "normal": [1.0, 0.0], "tangent": [0.0, 1.0]})
SPHERE2 = SphereBarrier(np.zeros(3), 2.0)


@functools.lru_cache(maxsize=None)
def semicircle_run(M: int = 256, kappa_cap: float = 15.0, output_every: int = 200):
    cfg = FlowConfig(node_count=M, cfl=0.5, t_end=1.0, kappa_cap=kappa_cap, len_min=1e-4,
                     output_every=output_every)
    return run(SEMI.sample(M), FLAT, cfg)


def sphere_arc(radius: float, amplitude: float, seed: int = 7) -> DiscreteCurve:
    m = ModelCurve("orthogonal_arc", {"sphere_radius": 2.0, "radius": radius, "sphere_center": [0.0, 0.0, 0.0],
                                      "e1": [1.0, 0.0, 0.0], "e2": [0.0, 1.0, 0.0]})
    return perturb(m.sample(400), amplitude, seed)


def _cfl_window(curve: DiscreteCurve, barrier, warm_steps: int = 0):
    s = make_state(curve, barrier)
    for _ in range(warm_steps):
        s = step(s, barrier)
    dt = stable_dt(s.curve, s.max_kappa_sq, 0.5)
    return an.fixed_dt_window(s, barrier, dt)


# ---------------------------------------------------------------------------
# criteria

def c01_chord(opts: Options) -> Criterion:
    B2 = SphereBarrier(np.zeros(2), 2.0)
    chord = ModelCurve("chord", {"p": [-2.0, 0.0], "q": [2.0, 0.0]})
    t0 = time.perf_counter()
    res = run(chord.sample(128), B2, FlowConfig(node_count=128, cfl=0.5, t_end=1.0, output_every=1000))
    el = time.perf_counter() - t0
    checks = {"max_displacement": res.max_displacement <= 1e-8, "runtime": el < 5.0,
              "reached_t_end": abs(res.final.time - 1.0) < 1e-12}
    return _mk("C1", "stationary chord in B2", checks,
               {"max_displacement": res.max_displacement, "runtime_s": el, "type_flag": res.record.type_flag})


def c02_semicircle(opts: Options) -> Criterion:
    res = semicircle_run()
    worst = 0.0
    for s in res.states:
        if s.time <= 0.48:
            r = np.linalg.norm(s.curve.nodes, axis=1).mean()
            worst = max(worst, abs(r / math.sqrt(1 - 2 * s.time) - 1.0))
    T = res.record.T_est
    checks = {"radius_law": worst <= 5e-3, "T_est": abs(T - 0.5) <= 0.01}
    return _mk("C2", "semicircle self-similar collapse", checks,
               {"max_rel_radius_error": worst, "T_est": T, "type_flag": res.record.type_flag})


def c03_typeI_rescaling(opts: Options) -> Criterion:
    res = semicircle_run()
    T, z = res.record.T_est, res.record.blowup_point
    unit = SEMI.sample(2001)
    hs, ratios, used = [], [], 0
    for s in res.states:
        tau = T - s.time
        if 1e-3 <= tau <= 1e-2:
            used += 1
            hs.append(hausdorff_distance(rescale_typeI(s, z, T), unit))
            ratios.append(s.max_kappa * math.sqrt(tau))
    checks = {"samples": used >= 3,
              "hausdorff": bool(hs) and max(hs) <= 0.01,
              "kappa_ratio": bool(ratios) and all(0.65 <= r <= 0.78 for r in ratios)}
    return _mk("C3", "Type I rescaling to the unit semicircle", checks,
               {"samples": used, "max_hausdorff": max(hs, default=math.nan),
                "ratio_range": [min(ratios, default=math.nan), max(ratios, default=math.nan)]})


def c04_evolution_residuals(opts: Options) -> Criterion:
    detail = {}
    checks = {}
    # shrinking circle, M = 256 and 512 with CFL time steps
    reps = {}
    for M in (256, 512):
        w = _cfl_window(ModelCurve("circle", {"radius": 1.0}).sample(M), None)
        h, dt = w[1].curve.spacing, w[1].dt_last
        reps[M] = (h * h + dt, [
            an.residual_evolution_kappa(w, torsion_term_sign=opts.torsion_term_sign),
            an.residual_evolution_kappa_sq(w, torsion_term_sign=opts.torsion_term_sign),
            an.residual_commutator(w),
        ])
    for (rc, rf) in zip(reps[256][1], reps[512][1]):
        name = rc.name
        detail[f"circle/{name}"] = [rc.max_residual, rf.max_residual]
        checks[f"circle/{name}/bound"] = rc.max_residual <= 5 * reps[256][0] and rf.max_residual <= 5 * reps[512][0]
        checks[f"circle/{name}/refinement"] = rf.max_residual * 2.5 <= rc.max_residual
    # helix arc in R^3 with fixed ends, evaluated away from the ends
    hel = ModelCurve("helix", {"a": 1.0, "b": 1.0, "u_range": [-math.pi, math.pi]})
    hr = {}
    for M in (128, 256):
        w = _cfl_window(hel.sample(M), None, warm_steps=10)
        h, dt = w[1].curve.spacing, w[1].dt_last
        ex = M // 4
        hr[M] = (h * h + dt, an.residual_evolution_kappa(w, ex, opts.torsion_term_sign),
                 an.residual_evolution_tau1(w, ex))
    k_c, k_f = hr[128][1], an.with_order(hr[128][1], hr[256][1])
    t_c, t_f = hr[128][2], an.with_order(hr[128][2], hr[256][2])
    detail["helix/residual_evolution_kappa"] = [k_c.max_residual, k_f.max_residual, k_f.order_estimate]
    detail["helix/residual_evolution_tau1"] = [t_c.max_residual, t_f.max_residual, t_f.order_estimate]
    checks["helix/residual_evolution_kappa/bound"] = (k_c.max_residual <= 10 * hr[128][0]
                                                      and k_f.max_residual <= 10 * hr[256][0])
    checks["helix/residual_evolution_kappa/order"] = (k_f.order_estimate or 0) >= 0.9
    checks["helix/residual_evolution_tau1/order"] = (t_f.order_estimate or 0) >= 0.9
    return _mk("C4", "evolution-equation residuals", checks, detail)


def c05_endpoint_relations(opts: Options) -> Criterion:
    curve = sphere_arc(1.0, 0.1)
    Cs = {}
    ineq = True
    for M in (128, 256):
        res = run(curve, SPHERE2, FlowConfig(node_count=M, cfl=0.5, t_end=0.1, output_every=50 * M // 128))
        worst = 0.0
        # incompatible initial data leave a short boundary layer; check after it
        for s in res.states:
            if s.time < BURN_IN:
                continue
            rep = an.endpoint_relations(s, SPHERE2)
            worst = max(worst, rep.max_residual / s.curve.spacing)
            ineq &= rep.details["ineq_dmu_kappa"] and rep.details["ineq_tau1"]
        Cs[M] = worst
    checks = {"C_bounded": Cs[256] <= 2 * Cs[128], "inequalities": bool(ineq)}
    return _mk("C5", "endpoint relations on a sphere barrier", checks, {"C_coarse": Cs[128], "C_fine": Cs[256]})


def c06_monotonicity(opts: Options) -> Criterion:
    res = semicircle_run()
    T, z = res.record.T_est, res.record.blowup_point
    main = KernelParams(np.array(z), T)
    vals = [gaussian_functional_phi(s.curve, s.time, main, FLAT) for s in res.states]
    dev = max(abs(v - SQRT_2PI_E) for v in vals)
    inc = 0.0
    for x0, t0 in (([0.0, 0.3], T), ([0.0, -0.5], T + 0.1), ([0.0, 0.0], T + 0.05)):
        p = KernelParams(np.array(x0), t0)
        v = np.array([gaussian_functional_phi(s.curve, s.time, p, FLAT) for s in res.states])
        inc = max(inc, float(np.max(np.diff(v))))
    checks = {"constant_at_extinction": dev <= 1e-2, "off_center_nonincreasing": inc <= 1e-4}
    return _mk("C6", "reflected Gaussian monotonicity", checks,
               {"max_deviation": dev, "max_increase": inc, "samples": len(vals)})


def c07_scale_invariance(opts: Options) -> Criterion:
    curve = perturb(SEMI.sample(300), 0.05, 3)
    x0 = np.array([0.0, 0.1])
    worst = 0.0
    for lam in (0.3, 2.0, 7.5):
        for sig in (0.1, 0.5, 2.0):
            a = gaussian_functional_phi(curve, 0.0, KernelParams(x0, sig), FLAT)
            scaled = DiscreteCurve(x0 + lam * (curve.nodes - x0))
            b = gaussian_functional_phi(scaled, 0.0, KernelParams(x0, lam**2 * sig), FLAT)
            worst = max(worst, abs(a - b))
    return _mk("C7", "parabolic scale invariance of Phi", {"invariance": worst <= 1e-10}, {"max_abs_diff": worst})


def c08_model_entropy(opts: Options) -> Criterion:
    line = model_entropy("line", 12.0)
    circ = model_entropy("circle", 12.0)
    gr = {W: model_entropy("grim_reaper", W) for W in (6.0, 8.0, 12.0)}
    mono = gr[6.0] <= gr[8.0] <= gr[12.0]
    checks = {"line": abs(line - 1.0) <= 1e-3, "circle": abs(circ - 1.5203) <= 5e-3,
              "grim_reaper": 1.90 <= gr[12.0] <= 2.00, "monotone_in_window": mono}
    return _mk("C8", "model entropies", checks, {"line": line, "circle": circ, "grim_reaper": gr})


def c09_soliton_residuals(opts: Options) -> Criterion:
    M = 256
    s_max = math.asinh(math.tan(1.4))  # |x| <= 1.4 on y = -log cos x
    gr = ModelCurve("grim_reaper", {"s_max": s_max}).sample(M)
    r_gr = an.translator_residual(gr, [0.0, 1.0])
    circ = ModelCurve("circle", {"radius": 1.0}).sample(M)
    r_c = an.shrinker_residual(circ, 0.5)
    semi = SEMI.sample(M)
    r_s = an.shrinker_residual(semi, 0.5)
    checks = {"grim_reaper": r_gr <= 10 * gr.spacing**2, "circle": r_c <= 10 * circ.spacing**2,
              "semicircle": r_s <= 10 * semi.spacing**2}
    return _mk("C9", "translator and shrinker residuals", checks,
               {"grim_reaper": [r_gr, 10 * gr.spacing**2], "circle": [r_c, 10 * circ.spacing**2],
                "semicircle": [r_s, 10 * semi.spacing**2]})


def c10_dilation_monitor(opts: Options) -> Criterion:
    vals = {}
    for M in (256, 512):
        res = run(SEMI.sample(M), FLAT, FlowConfig(node_count=M, cfl=0.5, t_end=0.1, output_every=M * 4))
        vals[M] = [an.dilation_invariant_monitor(res.states, m).max_residual for m in (1, 2)]
    ok = all(0.5 <= vals[512][i] / vals[256][i] <= 2.0 for i in range(2))
    return _mk("C10", "dilation-invariant derivative monitor", {"refinement_factor_2": ok},
               {"m1": [vals[256][0], vals[512][0]], "m2": [vals[256][1], vals[512][1]]})


def c11_tau_kappa(opts: Options) -> Criterion:
    curve = sphere_arc(0.3, 0.03)
    res = run(curve, SPHERE2, FlowConfig(node_count=128, cfl=0.5, t_end=1.0, kappa_cap=60.0, output_every=200))
    mon = an.tau_kappa_ratio_monitor(res.states, SPHERE2)
    t = np.array(mon["t"])
    mk = np.array(mon["max_kappa"])
    bound = np.array(mon["endpoint_bound"])
    ratio = np.array(mon["interior_ratio"])
    # endpoint bound: from the least curved sample (initial wiggles gone) to the first with 10x its curvature
    i0 = int(np.argmin(mk))
    later = i0 + np.flatnonzero(mk[i0:] >= 10 * mk[i0])
    drop = bound[i0] / bound[later[0]] if len(later) else 0.0
    T = res.record.T_est
    tau = T - t
    win = (tau > 0) & (tau <= 10 * tau[tau > 0].min())
    r = ratio[win]
    floor = 1e-6
    trend = bool(np.all(r[1:] <= 1.2 * np.maximum.accumulate(r)[:-1] + floor)) and r[-1] <= r[0] * 1.2 + floor
    checks = {"endpoint_bound_drop_5x": drop >= 5.0, "interior_trend": trend,
              "endpoint_bound_holds": mon["endpoint_bound_holds"]}
    return _mk("C11", "tau1/kappa diagnostic on a pinching arc", checks,
               {"bound_drop": drop, "window_samples": int(win.sum()), "ratio_first": float(r[0]),
                "ratio_last": float(r[-1]), "T_est": T})


def c12_mutation(opts: Options) -> Criterion:
    mutated = c04_evolution_residuals(Options(torsion_term_sign=-opts.torsion_term_sign))
    helix_fail = [k for k in mutated.failed_checks if k.startswith("helix/")]
    return _mk("C12", "mutation sensitivity", {"mutation_detected": (not mutated.passed) and bool(helix_fail)},
               {"failing_under_mutation": mutated.failed_checks})


CRITERIA: Dict[str, Callable[[Options], Criterion]] = {
    "C1 chord": c01_chord,
    "C2 semicircle": c02_semicircle,
    "C3 semicircle rescaling": c03_typeI_rescaling,
    "C4 residuals circle helix": c04_evolution_residuals,
    "C5 endpoint sphere": c05_endpoint_relations,
    "C6 semicircle monotonicity": c06_monotonicity,
    "C7 scale invariance": c07_scale_invariance,
    "C8 entropy": c08_model_entropy,
    "C9 solitons": c09_soliton_residuals,
    "C10 semicircle dilation": c10_dilation_monitor,
    "C11 tau kappa sphere": c11_tau_kappa,
    "C12 mutation helix": c12_mutation,
}


def _mk(key, title, checks: Dict[str, bool], detail) -> Criterion:
    failed = [k for k, v in checks.items() if not v]
    return Criterion(key, title, not failed, {"checks": {k: bool(v) for k, v in checks.items()}, **detail},
                     failed_checks=failed)


def run_one(name: str, opts: Optional[Options] = None) -> Criterion:
    opts = opts or Options()
    t0 = time.perf_counter()
    c = CRITERIA[name](opts)
    c.seconds = time.perf_counter() - t0
    return c


def run_all(filter_substring: Optional[str] = None, opts: Optional[Options] = None,
            echo: Optional[Callable[[str], None]] = None) -> List[Criterion]:
    out = []
    for name in CRITERIA:
        if filter_substring and filter_substring.lower() not in name.lower():
            continue
        c = run_one(name, opts)
        if echo:
            echo(c.line())
        out.append(c)
    return out
