"""Explicit free-boundary curve shortening flow.

Interior nodes move by dt * kappa_vec.  At an endpoint p on the barrier the
neighbour x1 is mirrored across the tangent hyperplane of the barrier at p,

    ghost = x1 - 2 <x1 - p, nu> nu,

which makes the centred tangent at p equal to +-nu (orthogonal contact) and
turns the endpoint stencil into the interior stencil of the doubled curve.
After the update the endpoints are projected back onto the barrier and the
curve is resampled to uniform arclength.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .barrier import Barrier
from .geometry import DiscreteCurve, diff1, resample_arclength, tangent_and_curvature


class BlowupError(FloatingPointError):
    pass


@dataclass
class FlowConfig:
    node_count: int = 128
    cfl: float = 0.5
    t_end: float = 1.0
    kappa_cap: float = 1e3
    len_min: float = 1e-3
    output_every: int = 100
    seed: int = 0
    h_min: float = 0.0
    resample: str = "cubic"

    def validate(self):
        if self.node_count < 16:
            raise ValueError("node_count must be >= 16")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.kappa_cap > 0 or not self.len_min >= 0:
            raise ValueError("kappa_cap must be positive and len_min nonnegative")
        if self.output_every < 1:
            raise ValueError("output_every must be >= 1")
        if self.resample not in ("linear", "cubic"):
            raise ValueError("resample must be 'linear' or 'cubic'")
        return self


@dataclass
class FlowState:
    curve: DiscreteCurve
    time: float = 0.0
    dt_last: float = 0.0
    max_kappa_sq: float = 0.0
    boundary_dist: float = 0.0
    boundary_angle: float = 0.0
    length: float = 0.0
    singular: bool = False
    step_index: int = 0

    @property
    def boundary_residual(self):
        return (self.boundary_dist, self.boundary_angle)

    @property
    def max_kappa(self) -> float:
        return math.sqrt(self.max_kappa_sq)


def _interior_kvec(X: np.ndarray, h: float, closed: bool) -> np.ndarray:
    if closed:
        Xp, Xm = np.roll(X, -1, axis=0), np.roll(X, 1, axis=0)
    else:
        Xp, Xm = X[2:], X[:-2]
        X = X[1:-1]
    D1 = Xp - Xm
    D2 = Xp - 2.0 * X + Xm
    c = np.einsum("ij,ij->i", D2, D1) / np.einsum("ij,ij->i", D1, D1)
    return (D2 - c[:, None] * D1) / h**2


def curvature_vectors(curve: DiscreteCurve, barrier: Optional[Barrier]) -> np.ndarray:
    """kappa_vec at every node with the free-boundary ghost stencil at the ends.

    Without a barrier, open curves have fixed endpoints (zero velocity there).
    """
    X = curve.nodes
    h = curve.spacing
    if curve.is_closed:
        return _interior_kvec(X, h, True)
    kvec = np.zeros_like(X)
    kvec[1:-1] = _interior_kvec(X, h, False)
    if barrier is None:
        return kvec
    for end, nb in ((0, 1), (-1, -2)):
        p, x1 = X[end], X[nb]
        nu = barrier.normal(p)
        # ghost = x1 - 2<x1-p,nu>nu, so x1 + ghost - 2p is twice the tangential part of x1 - p
        v = x1 - p
        kvec[end] = 2.0 * (v - (v @ nu) * nu) / h**2
    return kvec


def boundary_residuals(curve: DiscreteCurve, barrier: Optional[Barrier]):
    """(max endpoint distance to the barrier, max endpoint angle between T and nu).

    The endpoint tangent is the one-sided second order difference.
    """
    if barrier is None or curve.is_closed:
        return 0.0, 0.0
    X = curve.nodes
    dist = 0.0
    ang = 0.0
    for a, b, c in ((0, 1, 2), (-1, -2, -3)):
        p = X[a]
        t = -3.0 * X[a] + 4.0 * X[b] - X[c]
        dist = max(dist, float(np.linalg.norm(p - barrier.project(p))))
        cosang = min(1.0, abs(float(t @ barrier.normal(p))) / float(np.linalg.norm(t)))
        ang = max(ang, math.acos(cosang))
    return dist, ang


def make_state(curve: DiscreteCurve, barrier: Optional[Barrier], time: float = 0.0,
               dt_last: float = 0.0, step_index: int = 0, diagnostics: bool = True) -> FlowState:
    """FlowState with cached curvature vectors; boundary residuals only if ``diagnostics``."""
    kvec = curvature_vectors(curve, barrier)
    ksq = np.einsum("ij,ij->i", kvec, kvec)
    m = float(ksq.max())
    if not math.isfinite(m):
        raise BlowupError("blowup overflow")
    bd, ba = boundary_residuals(curve, barrier) if diagnostics else (math.nan, math.nan)
    st = FlowState(curve=curve, time=time, dt_last=dt_last, max_kappa_sq=m,
                   boundary_dist=bd, boundary_angle=ba, length=curve.spacing * (curve.M if curve.is_closed else curve.M - 1),
                   step_index=step_index)
    st._kvec = kvec
    return st


def stable_dt(curve: DiscreteCurve, max_kappa_sq: float, cfl: float) -> float:
    cap = curve.spacing**2 / 2.0
    if max_kappa_sq > 0:
        cap = min(cap, 1.0 / (4.0 * max_kappa_sq))
    return cfl * cap


def euler_update(curve: DiscreteCurve, barrier: Optional[Barrier], dt: float,
                 kvec: Optional[np.ndarray] = None) -> np.ndarray:
    """Nodes after x += dt kappa_vec and endpoint re-projection, before resampling."""
    if kvec is None:
        kvec = curvature_vectors(curve, barrier)
    X = curve.nodes + dt * kvec
    if not np.all(np.isfinite(X)):
        raise BlowupError("blowup overflow")
    if barrier is not None and not curve.is_closed:
        X[0] = barrier.project(X[0])
        X[-1] = barrier.project(X[-1])
    return X


def step(state: FlowState, barrier: Optional[Barrier], cfl: float = 0.5, *,
         kappa_cap: float = np.inf, dt: Optional[float] = None, h_min: float = 0.0,
         resample: str = "cubic", diagnostics: bool = True) -> FlowState:
    """One explicit Euler step.  ``dt`` overrides the CFL step when given."""
    curve = state.curve
    if dt is None:
        dt = stable_dt(curve, state.max_kappa_sq, cfl)
    X = euler_update(curve, barrier, dt, getattr(state, "_kvec", None))
    M = curve.M
    new = DiscreteCurve._trusted(X, curve.is_closed, curve.spacing)
    if h_min > 0 and curve.spacing < h_min / 2:
        M = max(16, int(round(M * curve.spacing / h_min)))
    new = resample_arclength(new, M, method=resample)
    out = make_state(new, barrier, state.time + dt, dt, state.step_index + 1, diagnostics)
    if math.sqrt(out.max_kappa_sq) > kappa_cap:
        out.singular = True
    return out


# ---------------------------------------------------------------------------
# runs and singularity analysis

@dataclass
class SingularityRecord:
    T_est: float
    type_flag: str
    ratio_history: List[tuple]  # (T_est - t, sup kappa * sqrt(T_est - t))
    blowup_point: Optional[np.ndarray]

    def to_dict(self):
        return {
            "T_est": None if not math.isfinite(self.T_est) else self.T_est,
            "type_flag": self.type_flag,
            "ratio_history": [[float(a), float(b)] for a, b in self.ratio_history],
            "blowup_point": None if self.blowup_point is None else [float(v) for v in self.blowup_point],
        }


@dataclass
class RunResult:
    states: List[FlowState]
    record: SingularityRecord
    trace: dict  # per-step arrays: t, dt, max_kappa_sq, length, boundary_dist, boundary_angle
    stop_reason: str
    max_displacement: float = 0.0

    @property
    def final(self) -> FlowState:
        return self.states[-1]


def estimate_T(t: np.ndarray, max_kappa_sq: np.ndarray, frac: float = 0.25) -> float:
    """Extinction time from a linear fit of 1/M_t against t over the final samples.

    Returns inf when 1/M_t shows no clear downward trend or when the zero
    crossing lies more than four window lengths past the last sample.
    """
    n = len(t)
    if n < 3:
        return math.inf
    k = max(3, int(math.ceil(frac * n)))
    tt = np.asarray(t[-k:], dtype=float)
    mm = np.asarray(max_kappa_sq[-k:], dtype=float)
    if np.any(mm <= 0) or np.ptp(tt) <= 0:
        return math.inf
    inv = 1.0 / mm
    slope, icept = np.polyfit(tt, inv, 1)
    span = float(np.ptp(tt))
    # no trend: the fitted drop over the window is below 1% of 1/M_t
    if not -slope * span >= 0.01 * float(inv.mean()):
        return math.inf
    T = -icept / slope
    # refuse to extrapolate far beyond the fitted window
    if not tt[-1] < T <= tt[-1] + 4.0 * span:
        return math.inf
    return float(T)


def classify_ratios(tau: np.ndarray, ratio: np.ndarray) -> str:
    """TypeI / TypeII / none from samples of sup|kappa| sqrt(T - t) over the last decade of T - t.

    Raises ValueError when fewer than 10 samples span a factor >= 8 in T - t.
    """
    tau = np.asarray(tau, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    ok = tau > 0
    tau, ratio = tau[ok], ratio[ok]
    if len(tau) == 0:
        raise ValueError("insufficient samples")
    tmin = tau.min()
    win = tau <= 10.0 * tmin * (1 + 1e-12)
    tw, rw = tau[win], ratio[win]
    if len(tw) < 10 or tw.max() / tw.min() < 8.0:
        raise ValueError("insufficient samples")
    order = np.argsort(-tw)  # increasing time
    rw = rw[order]
    med = float(np.median(rw))
    if med > 0 and np.all(rw >= 0.8 * med) and np.all(rw <= 1.2 * med):
        return "TypeI"
    if np.all(np.diff(rw) >= 0) and rw[-1] > 1.5 * rw[0]:
        return "TypeII"
    return "none"


def classify_singularity(record: SingularityRecord) -> str:
    if not math.isfinite(record.T_est) or not record.ratio_history:
        return "none"
    tau, ratio = np.array(record.ratio_history, dtype=float).T
    return classify_ratios(tau, ratio)


def _blowup_point(curve: DiscreteCurve, barrier: Optional[Barrier]):
    X = curve.nodes
    z = X.mean(axis=0)
    if barrier is None or curve.is_closed:
        return z
    diam = float(np.linalg.norm(X[:, None, :] - X[None, ::max(1, len(X) // 32), :], axis=2).max())
    try:
        zp = barrier.project(z)
    except ValueError:
        return z
    if np.linalg.norm(zp - z) <= diam:
        return zp
    return z


def build_record(trace: dict, final: FlowState, barrier: Optional[Barrier], singular: bool) -> SingularityRecord:
    t = np.asarray(trace["t"])
    msq = np.asarray(trace["max_kappa_sq"])
    T = estimate_T(t, msq)
    hist = []
    z = None
    flag = "none"
    if math.isfinite(T):
        tau = T - t
        ok = tau > 0
        hist = list(zip(tau[ok].tolist(), (np.sqrt(msq[ok]) * np.sqrt(tau[ok])).tolist()))
        z = _blowup_point(final.curve, barrier)
        try:
            flag = classify_ratios(tau[ok], np.sqrt(msq[ok] * tau[ok]))
        except ValueError:
            flag = "none"
    return SingularityRecord(T_est=T, type_flag=flag, ratio_history=hist, blowup_point=z)


def prepare_initial(curve: DiscreteCurve, barrier: Optional[Barrier], node_count: int,
                    resample: str = "cubic") -> DiscreteCurve:
    X = np.array(curve.nodes, dtype=float)
    if barrier is not None and not curve.is_closed:
        h = curve.spacing
        for end in (0, -1):
            p = barrier.project(X[end])
            if np.linalg.norm(p - X[end]) > h + 1e-12:
                raise ValueError("initial endpoint is not within h of the barrier")
            X[end] = p
    return resample_arclength(DiscreteCurve(X, curve.is_closed), node_count, method=resample)


def run(initial: DiscreteCurve, barrier: Optional[Barrier], config: FlowConfig,
        callback=None) -> RunResult:
    """Iterate ``step`` until t_end, length < len_min or max kappa > kappa_cap."""
    config.validate()
    curve = prepare_initial(initial, barrier, config.node_count, config.resample)
    state = make_state(curve, barrier)
    X0 = curve.nodes.copy()
    states = [state]
    trace = {k: [] for k in ("t", "dt", "max_kappa_sq", "length")}

    def record(s):
        trace["t"].append(s.time)
        trace["dt"].append(s.dt_last)
        trace["max_kappa_sq"].append(s.max_kappa_sq)
        trace["length"].append(s.length)

    def emit(s):
        s.boundary_dist, s.boundary_angle = boundary_residuals(s.curve, barrier)
        states.append(s)

    record(state)
    max_disp = 0.0
    reason = "t_end"
    while state.time < config.t_end * (1 - 1e-12):
        dt = stable_dt(state.curve, state.max_kappa_sq, config.cfl)
        dt = min(dt, config.t_end - state.time)
        try:
            state = step(state, barrier, config.cfl, kappa_cap=config.kappa_cap, dt=dt,
                         h_min=config.h_min, resample=config.resample, diagnostics=False)
        except ValueError as e:
            # collapsed polygon, non-finite nodes or a lost projection mid-run
            raise BlowupError(f"step {state.step_index + 1} at t={state.time:.6g}: {e}") from e
        record(state)
        if state.curve.M == len(X0):
            max_disp = max(max_disp, float(np.abs(state.curve.nodes - X0).max()))
        else:
            max_disp = math.inf
        if callback is not None:
            callback(state)
        if state.singular or state.length < config.len_min:
            reason = "kappa_cap" if state.singular else "len_min"
            break
        if state.step_index % config.output_every == 0:
            emit(state)
    if states[-1] is not state:
        emit(state)
    trace = {k: np.asarray(v) for k, v in trace.items()}
    rec = build_record(trace, state, barrier, state.singular)
    return RunResult(states=states, record=rec, trace=trace, stop_reason=reason,
                     max_displacement=max_disp)


def rescale_typeI(state: FlowState, z, T_est: float) -> DiscreteCurve:
    """Parabolic rescaling (gamma_t - z) / sqrt(2 (T - t))."""
    tau = T_est - state.time
    if not tau > 0:
        raise ValueError("state time must be before T_est")
    X = (state.curve.nodes - np.asarray(z, dtype=float)) / math.sqrt(2.0 * tau)
    return DiscreteCurve(X, state.curve.is_closed)
