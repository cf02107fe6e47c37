"""Closed-form reference curves, exact shrinking/translating states, Hausdorff
distance and numerical entropies of the singularity models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .barrier import Barrier, FlatBarrier, SphereBarrier
from .geometry import DiscreteCurve, resample_arclength
from .kernels import gaussian_rho

MODEL_KINDS = (
    "chord", "line", "circle", "semicircle", "orthogonal_arc",
    "helix", "generalized_helix", "grim_reaper", "half_grim_reaper",
)


def _vec(v, d=None):
    v = np.asarray(v, dtype=float)
    if d is not None and v.shape != (d,):
        raise ValueError(f"expected a vector of length {d}")
    return v


def _unit(v):
    v = _vec(v)
    return v / np.linalg.norm(v)


def _plane(e1, e2):
    e1 = _unit(e1)
    e2 = _vec(e2) - (_vec(e2) @ e1) * e1
    return e1, e2 / np.linalg.norm(e2)


@dataclass
class ModelCurve:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")

    # -- metadata ---------------------------------------------------------
    @property
    def dim(self) -> int:
        p = self.params
        if self.kind in ("helix",):
            return int(p.get("dim", 3))
        if self.kind == "generalized_helix":
            return 4
        for key in ("center", "p", "point", "offset"):
            if key in p:
                return len(p[key])
        return 2

    @property
    def is_closed(self) -> bool:
        return self.kind == "circle"

    @property
    def extinction_time(self) -> float:
        if self.kind in ("circle", "semicircle"):
            return float(self.params.get("radius", 1.0)) ** 2 / 2.0
        return math.inf

    def barrier(self) -> Optional[Barrier]:
        """The barrier the model is meant to meet orthogonally, if any."""
        p = self.params
        d = self.dim
        if self.kind == "semicircle":
            c = _vec(p.get("center", np.zeros(d)))
            n = _unit(p.get("normal", np.eye(d)[0]))
            return FlatBarrier(n, float(n @ c))
        if self.kind == "half_grim_reaper":
            o = _vec(p.get("offset", np.zeros(2)))
            e = _unit(p.get("lateral", [1.0, 0.0]))
            return FlatBarrier(-e, float(-e @ o))
        if self.kind in ("orthogonal_arc", "chord") and "sphere_radius" in p:
            return SphereBarrier(_vec(p.get("sphere_center", np.zeros(d))), float(p["sphere_radius"]))
        return None

    # -- sampling -----------------------------------------------------------
    def points(self, M: int, t: float = 0.0) -> np.ndarray:
        """Exact points at time t; not necessarily arclength uniform."""
        p = self.params
        d = self.dim
        k = self.kind
        if k == "chord":
            a, b = _vec(p["p"]), _vec(p["q"])
            u = np.linspace(0.0, 1.0, M)[:, None]
            return (1 - u) * a + u * b
        if k == "line":
            x0 = _vec(p.get("point", np.zeros(d)))
            v = _unit(p.get("direction", np.eye(d)[0]))
            L = float(p.get("half_length", 10.0))
            u = np.linspace(-L, L, M)[:, None]
            return x0 + u * v
        if k in ("circle", "semicircle"):
            r = self._radius_at(t)
            c = _vec(p.get("center", np.zeros(d)))
            if k == "circle":
                e1, e2 = _plane(p.get("e1", np.eye(d)[0]), p.get("e2", np.eye(d)[1]))
                th = np.linspace(0, 2 * np.pi, M, endpoint=False)
                return c + r * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
            n = _unit(p.get("normal", np.eye(d)[0]))
            e = _vec(p.get("tangent", np.eye(d)[1]))
            e = _unit(e - (e @ n) * n)
            th = np.linspace(0, np.pi, M)
            return c + r * (np.cos(th)[:, None] * e - np.sin(th)[:, None] * n)
        if k == "orthogonal_arc":
            R = float(p.get("sphere_radius", 2.0))
            rho = float(p.get("radius", 1.0))
            c = _vec(p.get("sphere_center", np.zeros(d)))
            e1, e2 = _plane(p.get("e1", np.eye(d)[0]), p.get("e2", np.eye(d)[1]))
            dd = math.hypot(R, rho)
            phi_s = math.acos(rho / dd)
            phi = np.linspace(-phi_s, phi_s, M)
            return c + dd * e1 - rho * (np.cos(phi)[:, None] * e1 - np.sin(phi)[:, None] * e2)
        if k == "helix":
            a, b = float(p.get("a", 1.0)), float(p.get("b", 1.0))
            u0, u1 = p.get("u_range", [0.0, 2 * np.pi])
            u = np.linspace(u0, u1, M)
            X = np.zeros((M, d))
            X[:, 0], X[:, 1], X[:, 2] = a * np.cos(u), a * np.sin(u), b * u
            return X
        if k == "generalized_helix":
            a, b, w = float(p.get("a", 1.0)), float(p.get("b", 0.3)), float(p.get("omega", 3.0))
            u0, u1 = p.get("u_range", [0.0, 2 * np.pi])
            u = np.linspace(u0, u1, M)
            return np.stack([a * np.cos(u), a * np.sin(u), b * np.cos(w * u), b * np.sin(w * u)], axis=1)
        if k in ("grim_reaper", "half_grim_reaper"):
            o = _vec(p.get("offset", np.zeros(2))) + t * _unit(p.get("direction", [0.0, 1.0]))
            V = _unit(p.get("direction", [0.0, 1.0]))
            e = _unit(p.get("lateral", [1.0, 0.0]))
            S = float(p.get("s_max", 3.0))
            s = np.linspace(0.0 if k == "half_grim_reaper" else -S, S, M)
            # arclength parametrisation of y = -log cos x
            x = 2.0 * np.arctan(np.tanh(s / 2.0))
            y = np.log(np.cosh(s))
            return o + x[:, None] * e + y[:, None] * V
        raise ValueError(k)

    def _radius_at(self, t: float) -> float:
        r0 = float(self.params.get("radius", 1.0))
        if t >= r0**2 / 2.0:
            raise ValueError("t is at or past the extinction time")
        return math.sqrt(r0**2 - 2.0 * t)

    def sample(self, M: int, t: float = 0.0) -> DiscreteCurve:
        curve = DiscreteCurve(self.points(M, t), self.is_closed)
        if self.kind in ("helix", "generalized_helix"):
            # not unit speed in u for generalized helices; make the spacing uniform
            curve = resample_arclength(DiscreteCurve(self.points(8 * M, t), False), M, method="cubic")
        return curve

    def to_dict(self) -> dict:
        def conv(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        return {"model": self.kind, **{k: conv(v) for k, v in sorted(self.params.items())}}


def exact_state(model: ModelCurve, t: float, M: int) -> DiscreteCurve:
    """Closed-form solution of the flow at time t."""
    if model.kind in ("circle", "semicircle"):
        return model.sample(M, t)
    if model.kind in ("chord", "line", "grim_reaper", "half_grim_reaper"):
        return DiscreteCurve(model.points(M, t), False)
    raise ValueError(f"no closed-form evolution for {model.kind}")


# ---------------------------------------------------------------------------
# Hausdorff distance

def _points_to_polyline(P: np.ndarray, Q: np.ndarray, closed: bool, chunk: int = 512) -> np.ndarray:
    """Distance from each point in P to the polyline through Q."""
    if closed and len(Q) > 2:
        Q = np.vstack([Q, Q[:1]])
    if len(Q) == 1:
        return np.linalg.norm(P - Q[0], axis=1)
    A, B = Q[:-1], Q[1:]
    D = B - A
    dd = np.einsum("ij,ij->i", D, D)
    dd = np.where(dd > 0, dd, 1.0)
    out = np.empty(len(P))
    for i in range(0, len(P), chunk):
        p = P[i:i + chunk, None, :]
        u = np.clip(np.einsum("kij,ij->ki", p - A, D) / dd, 0.0, 1.0)
        diff = p - (A + u[..., None] * D)
        out[i:i + chunk] = np.sqrt(np.einsum("kij,kij->ki", diff, diff)).min(axis=1)
    return out


def hausdorff_distance(a: DiscreteCurve, b: DiscreteCurve) -> float:
    """Symmetric Hausdorff distance, nodes of each curve against the other's polyline."""
    if a.M == 0 or b.M == 0:
        raise ValueError("empty curve")
    d1 = _points_to_polyline(a.nodes, b.nodes, b.is_closed).max()
    d2 = _points_to_polyline(b.nodes, a.nodes, a.is_closed).max()
    return float(max(d1, d2))


# ---------------------------------------------------------------------------
# model entropies

def _windowed_functional(X, w, x0, sigma, window):
    Y = X - x0
    mask = np.einsum("ij,ij->i", Y, Y) <= window**2 * sigma
    return float(w[mask] @ gaussian_rho(Y[mask], sigma))


def _quadrature_nodes(kind: str, window: float, sigma_max: float):
    """Dense nodes and trapezoid weights covering every window used in the search."""
    if kind == "line":
        L = window * math.sqrt(sigma_max) + 1.0
        s = np.linspace(-L, L, 20001)
        X = np.stack([s, np.zeros_like(s)], axis=1)
    elif kind in ("circle", "semicircle"):
        th = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
        X = np.stack([np.cos(th), np.sin(th)], axis=1)
        w = np.full(len(X), 2 * np.pi / len(X))
        return X, w
    elif kind in ("grim_reaper", "half_grim_reaper"):
        S = 20.0 + window * math.sqrt(sigma_max)
        s = np.linspace(-S, S, 40001)
        X = np.stack([2 * np.arctan(np.tanh(s / 2)), np.log(np.cosh(s))], axis=1)
    else:
        raise ValueError(f"model_entropy does not support {kind!r}")
    seg = np.linalg.norm(np.diff(X, axis=0), axis=1)
    w = np.zeros(len(X))
    w[:-1] += seg / 2
    w[1:] += seg / 2
    return X, w


def model_entropy(kind: str, window: float = 12.0, sigma_max: float = 64.0) -> float:
    """Sup of the Gaussian functional over centers and scales, restricted to |x - x0| <= window sqrt(sigma).

    Half models (semicircle, half Grim Reaper) are evaluated through their
    flat-barrier reflection, which turns them into the full models.  The
    sup is found by a coarse grid followed by a bounded quasi-Newton polish.
    """
    if window < 5:
        raise ValueError("window must be >= 5 for reliable quadrature")
    from scipy.optimize import minimize

    base = kind.replace("half_", "") if kind == "half_grim_reaper" else kind
    if base == "semicircle":
        base = "circle"
    X, w = _quadrature_nodes(base, window, sigma_max)
    log_s = np.linspace(math.log(1e-2), math.log(sigma_max), 25)
    if base == "line":
        cands = [np.array([0.0, 0.0]), np.array([0.0, 0.5])]
    elif base == "circle":
        cands = [np.array([a, b]) for a in np.linspace(-0.5, 0.5, 5) for b in np.linspace(-0.5, 0.5, 5)]
    else:
        cands = [np.array([0.0, y]) for y in np.linspace(-1.0, 30.0, 32)]
    best, arg = -1.0, None
    for c in cands:
        for ls in log_s:
            v = _windowed_functional(X, w, c, math.exp(ls), window)
            if v > best:
                best, arg = v, (c, ls)

    def neg(z):
        return -_windowed_functional(X, w, z[:2], math.exp(z[2]), window)

    z0 = np.array([arg[0][0], arg[0][1], arg[1]])
    bounds = [(None, None), (None, None), (math.log(1e-3), math.log(sigma_max))]
    res = minimize(neg, z0, method="Nelder-Mead", bounds=bounds, options={"xatol": 1e-6, "fatol": 1e-9})
    return float(max(best, -res.fun))


# ---------------------------------------------------------------------------
# seeded perturbations

def perturb(curve: DiscreteCurve, amplitude: float, seed: int, modes: int = 4) -> DiscreteCurve:
    """Add amplitude * sin^2(pi u) * sum_k (a_k cos(k pi u) + b_k sin(k pi u)), normalised to max norm 1.

    a_k, b_k are standard normal vectors drawn in order a_1, b_1, a_2, b_2, ...
    from numpy's PCG64 generator seeded with ``seed``.  The sin^2 envelope
    vanishes to second order at u = 0 and u = 1, so open endpoints and the
    end tangents are unchanged.
    """
    X = curve.nodes
    M, d = X.shape
    gen = np.random.Generator(np.random.PCG64(seed))
    u = np.arange(M) / (M if curve.is_closed else M - 1)
    disp = np.zeros((M, d))
    for k in range(1, modes + 1):
        a = gen.standard_normal(d)
        b = gen.standard_normal(d)
        disp += np.cos(k * np.pi * u)[:, None] * a + np.sin(k * np.pi * u)[:, None] * b
    if not curve.is_closed:
        disp *= (np.sin(np.pi * u) ** 2)[:, None]
    peak = np.linalg.norm(disp, axis=1).max()
    if peak > 0:
        disp *= amplitude / peak
    return DiscreteCurve(X + disp, curve.is_closed)
