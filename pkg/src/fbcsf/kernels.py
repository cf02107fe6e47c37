"""Backward heat kernels, cut-offs and the reflected Gaussian functional.

For a center (x0, t0) and sigma_hat = t0 - t > 0:

    rho(y)  = (4 pi sigma_hat)^(-1/2) exp(-|y|^2 / (4 sigma_hat))
    phi(y)  = eta((r^2/sigma_hat)^(3/4) (|y|^2 - alpha sigma_hat) / r^2),  eta(xi) = (1 - xi)_+^4
    f(x)    = rho(x - x0) phi(x - x0) + rho(x~ - x0) phi(x~ - x0),  x~ = 2 zeta(x) - x

and Phi(t) is the arclength integral of f over the curve.  r = inf switches
the cut-off off (phi = 1), which is only admissible for flat barriers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .barrier import Barrier, FlatBarrier, ProjectionError, SphereBarrier
from .geometry import DiscreteCurve


@dataclass
class KernelParams:
    center: np.ndarray  # x0
    t0: float
    r: float = math.inf
    alpha: float = 0.5

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if not self.alpha >= 0.5:
            raise ValueError("alpha must be >= 1/2")
        if not self.r > 0:
            raise ValueError("cut-off radius must be positive")

    def check_barrier(self, barrier: Optional[Barrier]):
        if barrier is not None and self.r > barrier.r_max * (1 + 1e-12):
            raise ValueError(f"cut-off radius {self.r} exceeds tubular_radius/8 = {barrier.r_max}")

    def sigma_hat(self, t: float) -> float:
        s = self.t0 - t
        if not s > 0:
            raise ValueError("sigma_hat must be positive (t < t0)")
        return s


def gaussian_rho(x, sigma_hat: float, dim_exponent: int = 1):
    """(4 pi sigma_hat)^(-dim_exponent/2) exp(-|x|^2 / (4 sigma_hat)); ``x`` may be (d,) or (M, d)."""
    if not sigma_hat > 0:
        raise ValueError("sigma_hat must be positive")
    x = np.asarray(x, dtype=float)
    sq = np.sum(x * x, axis=-1)
    return (4.0 * math.pi * sigma_hat) ** (-dim_exponent / 2.0) * np.exp(-sq / (4.0 * sigma_hat))


def eta(xi):
    xi = np.asarray(xi, dtype=float)
    return np.where(xi <= 0, 1.0, np.clip(1.0 - xi, 0.0, None) ** 4)


def cutoff_xi(x, sigma_hat: float, r: float, alpha: float = 0.5):
    x = np.asarray(x, dtype=float)
    sq = np.sum(x * x, axis=-1)
    return (r**2 / sigma_hat) ** 0.75 * (sq - alpha * sigma_hat) / r**2


def cutoff_phi(x, sigma_hat: float, params: KernelParams):
    """Compactly supported cut-off evaluated at the displacement ``x`` (already centred)."""
    if not sigma_hat > 0:
        raise ValueError("sigma_hat must be positive")
    if math.isinf(params.r):
        return np.ones(np.shape(x)[:-1]) if np.ndim(x) > 1 else 1.0
    val = eta(cutoff_xi(x, sigma_hat, params.r, params.alpha))
    return val if np.ndim(val) else float(val)


def _reflect_points(X: np.ndarray, barrier: Barrier) -> np.ndarray:
    """Mirror images, NaN where the point lies outside the tube."""
    if isinstance(barrier, FlatBarrier):
        return barrier.reflect_many(X)
    if isinstance(barrier, SphereBarrier):
        Y = X - barrier.center
        d = np.linalg.norm(Y, axis=1)
        out = np.full_like(X, np.nan)
        ok = (np.abs(d - barrier.radius) < barrier.tubular_radius) & (d > 0)
        out[ok] = barrier.center + (2.0 * barrier.radius / d[ok] - 1.0)[:, None] * Y[ok]
        return out
    out = np.full_like(X, np.nan)
    for i, x in enumerate(X):
        try:
            out[i] = barrier.reflect(x)
        except (ProjectionError, ValueError):
            pass
    return out


def reflected_kernel_f(x, t: float, params: KernelParams, barrier: Optional[Barrier]):
    """Direct plus mirrored truncated kernel at point(s) ``x`` and time ``t``."""
    params.check_barrier(barrier)
    sh = params.sigma_hat(t)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    Y = X - params.center
    val = gaussian_rho(Y, sh) * cutoff_phi(Y, sh, params)
    if barrier is not None:
        Xr = _reflect_points(X, barrier)
        ok = np.all(np.isfinite(Xr), axis=1)
        Yr = Xr[ok] - params.center
        refl = np.zeros(len(X))
        if ok.any():
            refl[ok] = gaussian_rho(Yr, sh) * cutoff_phi(Yr, sh, params)
        val = val + refl
    return val if np.ndim(x) > 1 else float(val[0])


def trapezoid_weights(curve: DiscreteCurve) -> np.ndarray:
    seg = curve.segment_lengths
    w = np.zeros(curve.M)
    if curve.is_closed:
        w += 0.5 * seg
        w += 0.5 * np.roll(seg, 1)
    else:
        w[:-1] += 0.5 * seg
        w[1:] += 0.5 * seg
    return w


def gaussian_functional_phi(curve: Optional[DiscreteCurve], t: float, params: KernelParams,
                            barrier: Optional[Barrier]) -> float:
    """Trapezoidal arclength integral of the reflected truncated kernel."""
    if curve is None or curve.length == 0.0:
        return 0.0
    f = reflected_kernel_f(curve.nodes, t, params, barrier)
    return float(trapezoid_weights(curve) @ f)


def plain_functional(curve: DiscreteCurve, x0, sigma_hat: float) -> float:
    """Untruncated, unreflected Gaussian functional (interior density)."""
    f = gaussian_rho(curve.nodes - np.asarray(x0, dtype=float), sigma_hat)
    return float(trapezoid_weights(curve) @ f)


# ---------------------------------------------------------------------------
# entropy scans

@dataclass
class ScanSpec:
    centers: object = "auto"  # "auto" or list of points on the barrier
    sigma_hats: Sequence[float] = (1.0, 0.25, 0.0625, 0.015625)
    radii: Sequence[float] = (math.inf,)
    interior_centers: Sequence = ()
    alpha: float = 0.5

    @classmethod
    def from_dict(cls, d: dict) -> "ScanSpec":
        radii = [math.inf if (r is None or r == "inf") else float(r) for r in d.get("radii", ["inf"])]
        return cls(centers=d.get("centers", "auto"),
                   sigma_hats=[float(s) for s in d.get("sigma_hats", cls.sigma_hats)],
                   radii=radii,
                   interior_centers=d.get("interior_centers", ()),
                   alpha=float(d.get("alpha", 0.5)))


@dataclass
class EntropyReport:
    phi_series: dict  # key -> list of (t, Phi)
    center_grid: list  # (x0, t0, r) triples
    entropy_sup: float
    monotonicity_violation: float
    interior_sup: float = 0.0
    violations: dict = field(default_factory=dict)

    def to_dict(self):
        def fin(v):
            return None if not math.isfinite(v) else float(v)

        return {
            "center_grid": [[list(map(float, x0)), float(t0), fin(r)] for x0, t0, r in self.center_grid],
            "entropy_sup": float(self.entropy_sup),
            "interior_sup": float(self.interior_sup),
            "monotonicity_violation": float(self.monotonicity_violation),
            "phi_series": {k: [[float(a), float(b)] for a, b in v] for k, v in sorted(self.phi_series.items())},
        }


def _tangent_basis(nu: np.ndarray) -> np.ndarray:
    d = len(nu)
    # orthonormal complement of nu via QR of [nu | I]
    Q, _ = np.linalg.qr(np.column_stack([nu, np.eye(d)]))
    return Q[:, 1:d].T


def auto_centers(states, barrier: Barrier, spacing: float) -> List[np.ndarray]:
    """Final endpoint positions plus a 5x5 tangential grid around each, projected to the barrier."""
    final = states[-1].curve.nodes
    centers = []
    for p in (final[0], final[-1]):
        p = barrier.project(p)
        basis = _tangent_basis(barrier.normal(p))
        offs = np.arange(-2, 3) * spacing
        if len(basis) == 1:
            grid = [p + a * basis[0] for a in offs]
        else:
            grid = [p + a * basis[0] + b * basis[1] for a in offs for b in offs]
        for q in grid:
            try:
                centers.append(barrier.project(q))
            except (ProjectionError, ValueError):
                pass
    # endpoints of both ends coincide for a collapsing arc; drop duplicates
    uniq = []
    for c in centers:
        if not any(np.linalg.norm(c - u) < 1e-12 for u in uniq):
            uniq.append(c)
    return uniq


def entropy_scan(states, barrier: Optional[Barrier], spec: ScanSpec) -> EntropyReport:
    """Evaluate Phi over (center, sigma ladder, radius) and record sup and monotonicity violations.

    Each center time is t0 = t_last + sigma for every sigma in the ladder, so
    sigma is the scale at the final state.  Violations are measured along
    each fixed (x0, t0, r) series over the supplied states.
    """
    if not states:
        raise ValueError("no states")
    t_last = states[-1].time
    sig = list(spec.sigma_hats)
    radii = list(spec.radii)
    if barrier is None:
        radii = [math.inf]
    if spec.centers == "auto":
        if barrier is None:
            raise ValueError("auto centers need a barrier")
        finite = [r for r in radii if math.isfinite(r)]
        span = min([math.sqrt(max(sig))] + finite)
        centers = auto_centers(states, barrier, 0.5 * span)
    else:
        centers = [np.asarray(c, dtype=float) for c in spec.centers]
    if not centers or not sig or not radii:
        raise ValueError("empty grid")
    grid = []
    series = {}
    viol = {}
    sup = 0.0
    worst = 0.0
    for ci, x0 in enumerate(centers):
        for s in sig:
            t0 = t_last + s
            for r in radii:
                if barrier is not None and not isinstance(barrier, FlatBarrier):
                    # untruncated kernels are only admissible on flat barriers
                    r = min(r, barrier.r_max)
                params = KernelParams(x0, t0, r, spec.alpha)
                vals = [(st.time, gaussian_functional_phi(st.curve, st.time, params, barrier)) for st in states]
                key = f"c{ci}_s{s:g}_r{r:g}"
                grid.append((x0, t0, r))
                series[key] = vals
                v = np.array([b for _, b in vals])
                inc = float(np.max(np.diff(v), initial=0.0))
                viol[key] = max(0.0, inc)
                worst = max(worst, viol[key])
                sup = max(sup, float(v.max()))
    if not grid:
        raise ValueError("empty grid")
    interior = 0.0
    for x0 in spec.interior_centers:
        for s in sig:
            interior = max(interior, max(plain_functional(st.curve, x0, t_last + s - st.time) for st in states))
    return EntropyReport(phi_series=series, center_grid=grid, entropy_sup=sup,
                         monotonicity_violation=worst, interior_sup=interior, violations=viol)
