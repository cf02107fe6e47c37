"""Residual checks of the interior evolution identities, the endpoint
relations, scale-invariant derivative monitors and soliton residuals.

Time derivatives are centred differences over three states with equal dt.
Nodes are matched by index, i.e. by arclength fraction u = s/L.  The flow is
normal, so a fixed-u node slides along the curve relative to material points
with tangential speed

    W(s) = int_0^s kappa^2 ds' - u int_0^L kappa^2 ds'

(arclength elements shrink at rate kappa^2).  For any scalar f,
d_t f|material = d_t f|u - W d_s f, and likewise for vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .barrier import Barrier
from .flow import FlowState, make_state, step
from .geometry import DiscreteCurve, FrenetData, compute_frenet, diff1, diff2


@dataclass
class ResidualReport:
    name: str
    max_residual: float
    scale: float
    grid: tuple  # (h, dt)
    order_estimate: Optional[float] = None
    details: Optional[dict] = None

    def to_dict(self):
        out = {
            "name": self.name,
            "max_residual": float(self.max_residual),
            "scale": float(self.scale),
            "grid": [float(self.grid[0]), float(self.grid[1])],
            "order_estimate": None if self.order_estimate is None else float(self.order_estimate),
        }
        if self.details:
            out["details"] = self.details
        return out


def with_order(coarse: ResidualReport, fine: ResidualReport) -> ResidualReport:
    """Attach log(R_coarse/R_fine)/log(dt_coarse/dt_fine) to the fine report."""
    rc, rf = coarse.max_residual, fine.max_residual
    dc, df = coarse.grid[1], fine.grid[1]
    order = None
    if rc > 0 and rf > 0 and dc != df:
        order = math.log(rc / rf) / math.log(dc / df)
    return ResidualReport(fine.name, fine.max_residual, fine.scale, fine.grid, order, fine.details)


def fixed_dt_window(state: FlowState, barrier: Optional[Barrier], dt: float, n: int = 3,
                    resample: str = "cubic") -> List[FlowState]:
    """``n`` consecutive states separated by exactly ``dt``, starting at ``state``."""
    out = [state]
    for _ in range(n - 1):
        out.append(step(out[-1], barrier, dt=dt, resample=resample))
    return out


def _check_window(states):
    if len(states) < 3:
        raise ValueError("need a window of at least 3 states")
    a, b, c = states[-3], states[-2], states[-1]
    if not (a.curve.M == b.curve.M == c.curve.M):
        raise ValueError("mismatched node counts")
    dt1, dt2 = b.time - a.time, c.time - b.time
    if not (dt1 > 0 and abs(dt1 - dt2) <= 1e-9 * max(dt1, dt2)):
        raise ValueError("window states must be equally spaced in time")
    return a, b, c, dt1


def _interior_mask(M: int, closed: bool, exclude: int) -> np.ndarray:
    mask = np.ones(M, dtype=bool)
    if not closed:
        mask[:exclude] = False
        mask[M - exclude:] = False
    return mask


def _tangential_slip(curve: DiscreteCurve, kappa_sq: np.ndarray) -> np.ndarray:
    """W at each node: velocity of the u-parametrisation relative to material points."""
    h = curve.spacing
    M = curve.M
    if curve.is_closed:
        cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (kappa_sq + np.roll(kappa_sq, -1)))])
        total = cum[-1]
        u = np.arange(M) / M
        return cum[:-1] - u * total
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (kappa_sq[1:] + kappa_sq[:-1]))])
    u = np.arange(M) / (M - 1)
    return cum - u * cum[-1]


class _Window:
    """Frenet data at three times plus material time derivatives at the middle one."""

    def __init__(self, states, barrier=None):
        a, b, c, dt = _check_window(states)
        self.dt = dt
        self.curve = b.curve
        self.closed = b.curve.is_closed
        self.h = b.curve.spacing
        self.fa = compute_frenet(a.curve)
        self.fb = compute_frenet(b.curve)
        self.fc = compute_frenet(c.curve)
        self.W = _tangential_slip(b.curve, self.fb.kappa**2)
        self.states = (a, b, c)

    def ds(self, f):
        return diff1(f, self.h, self.closed)

    def dss(self, f):
        return diff2(f, self.h, self.closed)

    def dt_material(self, fa, fb, fc):
        dfu = (fc - fa) / (2.0 * self.dt)
        df_s = self.ds(fb)
        if dfu.ndim == 2:
            return dfu - self.W[:, None] * df_s
        return dfu - self.W * df_s


def residual_evolution_kappa(states: Sequence[FlowState], exclude: int = 3,
                             torsion_term_sign: float = 1.0) -> ResidualReport:
    """d_t kappa = kappa_ss + kappa^3 - tau1^2 kappa, normalised by max(1, max kappa^3).

    ``torsion_term_sign`` multiplies the tau1^2 kappa term; it exists only to
    check that the residual detects a wrong sign (-1 is the mutation).
    """
    w = _Window(states)
    k = w.fb.kappa
    mask = _interior_mask(len(k), w.closed, exclude) & w.fb.defined
    dtk = w.dt_material(w.fa.kappa, w.fb.kappa, w.fc.kappa)
    tau = np.nan_to_num(w.fb.tau1)
    rhs = w.dss(k) + k**3 - torsion_term_sign * tau**2 * k
    res = np.abs(dtk - rhs)[mask]
    scale = max(1.0, float(k[mask].max() ** 3)) if mask.any() else 1.0
    r = float(res.max() / scale) if mask.any() else 0.0
    return ResidualReport("residual_evolution_kappa", r, scale, (w.h, w.dt))


def residual_evolution_kappa_sq(states: Sequence[FlowState], exclude: int = 3,
                                torsion_term_sign: float = 1.0) -> ResidualReport:
    """d_t k^2 = (k^2)_ss - 2 k_s^2 + 2 k^4 - 2 tau1^2 k^2, normalised by max(1, max k^4)."""
    w = _Window(states)
    k = w.fb.kappa
    ksq = k**2
    mask = _interior_mask(len(k), w.closed, exclude)
    dtk2 = w.dt_material(w.fa.kappa**2, ksq, w.fc.kappa**2)
    tau = np.nan_to_num(w.fb.tau1)
    rhs = w.dss(ksq) - 2.0 * w.ds(k) ** 2 + 2.0 * ksq**2 - 2.0 * torsion_term_sign * tau**2 * ksq
    res = np.abs(dtk2 - rhs)[mask]
    scale = max(1.0, float(k[mask].max() ** 4))
    return ResidualReport("residual_evolution_kappa_sq", float(res.max() / scale), scale, (w.h, w.dt))


def residual_evolution_tau1(states: Sequence[FlowState], exclude: int = 3) -> ResidualReport:
    """(d_t - d_s^2) tau1 = 2 (a tau1)_s + 2 tau1 k^2 - tau1 tau2^2 with a = k_s / k.

    Normalised by max(1, max k^3).  Planar curves have tau1 = 0 identically.
    """
    w = _Window(states)
    if w.curve.ambient_dim < 3:
        return ResidualReport("residual_evolution_tau1", 0.0, 1.0, (w.h, w.dt))
    k = w.fb.kappa
    mask = _interior_mask(len(k), w.closed, exclude)
    defined = w.fa.defined & w.fb.defined & w.fc.defined
    if not np.all(defined[mask]):
        raise ValueError("degenerate curvature on the evaluation window")
    tol = 10 * w.fb.kappa_tol
    if np.any(k[mask] <= tol):
        raise ValueError("degenerate curvature on the evaluation window")
    ta, tb, tc = (np.nan_to_num(f.tau1) for f in (w.fa, w.fb, w.fc))
    t2 = np.nan_to_num(w.fb.tau2)
    a = w.ds(k) / np.where(k > 0, k, 1.0)
    lhs = w.dt_material(ta, tb, tc) - w.dss(tb)
    rhs = 2.0 * w.ds(a * tb) + 2.0 * tb * k**2 - tb * t2**2
    res = np.abs(lhs - rhs)[mask]
    scale = max(1.0, float(k[mask].max() ** 3))
    return ResidualReport("residual_evolution_tau1", float(res.max() / scale), scale, (w.h, w.dt))


def residual_commutator(states: Sequence[FlowState], exclude: int = 3) -> ResidualReport:
    """(d_t d_s - d_s d_t) gamma = k^2 d_s gamma at material points, normalised by max(1, max k^2).

    d_t gamma|material is the measured node velocity minus its tangential
    slip, so the check does not presuppose the flow equation.
    """
    w = _Window(states)
    a, b, c = w.states
    vel = w.dt_material(a.curve.nodes, b.curve.nodes, c.curve.nodes)
    dT = w.dt_material(w.fa.T, w.fb.T, w.fc.T)
    ksq = w.fb.kappa**2
    res_vec = dT - w.ds(vel) - ksq[:, None] * w.fb.T
    mask = _interior_mask(len(ksq), w.closed, exclude)
    res = np.linalg.norm(res_vec, axis=1)[mask]
    scale = max(1.0, float(ksq[mask].max()))
    return ResidualReport("residual_commutator", float(res.max() / scale), scale, (w.h, w.dt))


# ---------------------------------------------------------------------------
# endpoint relations

def endpoint_relations(state: FlowState, barrier: Barrier, tol: float = 1e-6) -> ResidualReport:
    """Residuals of k_s = -eps k II(N,N) and tau1 = -eps II(N,B) at both endpoints.

    eps = <T, nu> with T the orientation of the parametrisation.  II is
    evaluated on the projections of N and B to the barrier's tangent space.
    Also records the consequences |d_mu k| <= K |k| + 10 h and |tau1| <= K + 10 h.
    """
    curve = state.curve
    if curve.is_closed:
        raise ValueError("endpoint relations need an open curve")
    fr = compute_frenet(curve)
    h = curve.spacing
    K = barrier.curvature_bound
    ks = diff1(fr.kappa, h, False)
    worst_k = 0.0
    worst_t = 0.0
    ineq_k = True
    ineq_t = True
    ends = {}
    vacuous = []
    for name, i in (("start", 0), ("end", -1)):
        p = curve.nodes[i]
        F = barrier.value(p)
        if abs(F) > max(1e-6, tol) * max(1.0, np.linalg.norm(barrier.grad(p))):
            raise ValueError("endpoint off the barrier")
        nu = barrier.normal(p)
        T = fr.T[i]
        eps = float(T @ nu)
        k = float(fr.kappa[i])
        rec = {"eps": eps, "kappa": k, "kappa_s": float(ks[i])}
        if not fr.defined[i]:
            vacuous.append(name)
            ends[name] = rec
            continue
        P = np.eye(len(p)) - np.outer(nu, nu)
        S = barrier.shape_operator(p)
        N = P @ fr.N[i]
        r_k = abs(ks[i] + eps * k * float(N @ S @ N))
        rec["residual_kappa_s"] = float(r_k)
        worst_k = max(worst_k, r_k)
        if fr.B1 is not None and np.all(np.isfinite(fr.B1[i])):
            B = P @ fr.B1[i]
            tau = float(fr.tau1[i])
            r_t = abs(tau + eps * float(N @ S @ B))
            rec["residual_tau1"] = float(r_t)
            worst_t = max(worst_t, r_t)
            if abs(tau) > K + 10 * h:
                ineq_t = False
        if abs(ks[i]) > K * abs(k) + 10 * h:
            ineq_k = False
        ends[name] = rec
    details = {"ends": ends, "residual_kappa_s": worst_k, "residual_tau1": worst_t,
               "ineq_dmu_kappa": ineq_k, "ineq_tau1": ineq_t, "vacuous": vacuous, "K": K}
    return ResidualReport("endpoint_relations", max(worst_k, worst_t), 1.0, (h, state.dt_last), None, details)


# ---------------------------------------------------------------------------
# scale-invariant monitors

def _ds_m_T(curve: DiscreteCurve, m: int) -> np.ndarray:
    fr = compute_frenet(curve)
    D = fr.kappa_vec
    for _ in range(m - 1):
        D = diff1(D, curve.spacing, curve.is_closed)
    return np.linalg.norm(D, axis=1)


def dilation_invariant_monitor(states: Sequence[FlowState], m: int, c: float = 0.25,
                               exclude: int = 3) -> ResidualReport:
    """sup over the window of |d_s^m T|^2 (t - t0)^(m-1) / M_t0 with t0 the first state's time."""
    if m not in (1, 2, 3):
        raise ValueError("m must be 1, 2 or 3")
    t0 = states[0].time
    M0 = states[0].max_kappa_sq
    h = states[0].curve.spacing
    if M0 <= 0:
        return ResidualReport(f"dilation_invariant_m{m}", 0.0, 0.0, (h, states[-1].dt_last))
    if states[-1].time - t0 > c / M0 * (1 + 1e-9):
        raise ValueError("window longer than c / M_t0")
    best = 0.0
    for st in states:
        v = _ds_m_T(st.curve, m)
        mask = _interior_mask(len(v), st.curve.is_closed, exclude if m > 1 else 0)
        q = float((v[mask] ** 2).max()) * (st.time - t0) ** (m - 1) / M0
        best = max(best, q)
    return ResidualReport(f"dilation_invariant_m{m}", best, M0, (h, states[-1].dt_last))


def tau_kappa_ratio_monitor(states: Sequence[FlowState], barrier: Optional[Barrier] = None,
                            exclude: int = 3, slack: float = 10.0) -> dict:
    """Time series of max |tau1/k| at nodes with k >= 0.9 max k, and the endpoint bound K/|k|."""
    K = barrier.curvature_bound if barrier is not None else math.nan
    times, interior, bound, end_ratio, maxk = [], [], [], [], []
    ok = True
    for st in states:
        fr = compute_frenet(st.curve)
        k = fr.kappa
        mask = _interior_mask(len(k), st.curve.is_closed, exclude)
        kmax = float(k[mask].max())
        hi = mask & (k >= 0.9 * kmax) & fr.defined
        tau = np.nan_to_num(fr.tau1)
        r = float(np.max(np.abs(tau[hi] / k[hi]))) if hi.any() else 0.0
        times.append(st.time)
        interior.append(r)
        maxk.append(float(k.max()))
        if barrier is not None and not st.curve.is_closed:
            kend = min(abs(k[0]), abs(k[-1]))
            b = K / kend if kend > 0 else math.inf
            e = max(abs(tau[0] / k[0]) if fr.defined[0] else 0.0,
                    abs(tau[-1] / k[-1]) if fr.defined[-1] else 0.0)
            bound.append(b)
            end_ratio.append(e)
            # the initial datum need not satisfy the boundary compatibility conditions
            if st is not states[0] and e > b + slack * st.curve.spacing / max(kend, 1e-300):
                ok = False
    return {"t": times, "interior_ratio": interior, "endpoint_bound": bound,
            "endpoint_ratio": end_ratio, "max_kappa": maxk, "endpoint_bound_holds": ok}


# ---------------------------------------------------------------------------
# solitons

def shrinker_residual(curve: DiscreteCurve, sigma_hat: float, center=None) -> float:
    """max |k_vec + x_perp / (2 sigma_hat)| with x measured from ``center``."""
    fr = compute_frenet(curve)
    x = curve.nodes - (0.0 if center is None else np.asarray(center, dtype=float))
    xperp = x - np.einsum("ij,ij->i", x, fr.T)[:, None] * fr.T
    return float(np.linalg.norm(fr.kappa_vec + xperp / (2.0 * sigma_hat), axis=1).max())


def translator_residual(curve: DiscreteCurve, V) -> float:
    """max |k_vec - (V - <V,T> T)|."""
    V = np.asarray(V, dtype=float)
    if not np.linalg.norm(V) > 0:
        raise ValueError("V must be nonzero")
    fr = compute_frenet(curve)
    vperp = V - (fr.T @ V)[:, None] * fr.T
    return float(np.linalg.norm(fr.kappa_vec - vperp, axis=1).max())
