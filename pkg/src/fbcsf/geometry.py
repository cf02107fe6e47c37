"""Discrete open/closed curves, arclength resampling and Frenet data.

Curves are stored as an ``(M, d)`` array of nodes that are (after
resampling) equally spaced in polygonal arclength.  All derivatives are
finite differences in that uniform parameter: centered second order in the
interior, one-sided second order at the ends of open curves.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class DiscreteCurve:
    nodes: np.ndarray
    is_closed: bool = False
    spacing: float = field(init=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] < 2:
            raise ValueError("nodes must have shape (M, d) with d >= 2")
        if nodes.shape[0] < 2:
            raise ValueError("a curve needs at least 2 nodes")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("non-finite node coordinates")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        n_seg = len(nodes) if self.is_closed else len(nodes) - 1
        object.__setattr__(self, "spacing", self.length / n_seg)

    @property
    def ambient_dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def M(self) -> int:
        return self.nodes.shape[0]

    @property
    def segment_lengths(self) -> np.ndarray:
        pts = self.nodes
        if self.is_closed:
            pts = np.vstack([pts, pts[:1]])
        return np.linalg.norm(np.diff(pts, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    @classmethod
    def _trusted(cls, nodes: np.ndarray, is_closed: bool, spacing: float) -> "DiscreteCurve":
        # skips validation; callers guarantee finite (M, d) float nodes
        obj = object.__new__(cls)
        nodes.setflags(write=False)
        object.__setattr__(obj, "nodes", nodes)
        object.__setattr__(obj, "is_closed", is_closed)
        object.__setattr__(obj, "spacing", spacing)
        return obj

    def with_nodes(self, nodes) -> "DiscreteCurve":
        return DiscreteCurve(nodes, self.is_closed)

    def to_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "is_closed": self.is_closed,
            "nodes": self.nodes.tolist(),
        }


def _interp_linear(s_old, values, s_new):
    idx = np.searchsorted(s_old, s_new, side="right") - 1
    idx = np.clip(idx, 0, len(s_old) - 2)
    seg = s_old[idx + 1] - s_old[idx]
    w = np.divide(s_new - s_old[idx], seg, out=np.zeros_like(s_new), where=seg > 0)
    return values[idx] + w[:, None] * (values[idx + 1] - values[idx])


def _interp_cubic(s_old, values, s_new, closed):
    """Local 4-point Lagrange interpolation in the cumulative chord parameter."""
    n = len(s_old)  # closed input already has the first node repeated at the end
    idx = np.searchsorted(s_old, s_new, side="right") - 1
    idx = np.clip(idx, 0, n - 2)
    if closed:
        L = s_old[-1]
        base = idx - 1
        m = n - 1
        j = (base[:, None] + np.arange(4)) % m
        # parameter values unwrapped around the stencil
        sj = s_old[j] + L * np.floor_divide(base[:, None] + np.arange(4), m)
        vj = values[j]
    else:
        base = np.clip(idx - 1, 0, n - 4)
        j = base[:, None] + np.arange(4)
        sj = s_old[j]
        vj = values[j]
    d0, d1, d2, d3 = (s_new[:, None] - sj).T
    s0, s1, s2, s3 = sj.T
    w0 = d1 * d2 * d3 / ((s0 - s1) * (s0 - s2) * (s0 - s3))
    w1 = d0 * d2 * d3 / ((s1 - s0) * (s1 - s2) * (s1 - s3))
    w2 = d0 * d1 * d3 / ((s2 - s0) * (s2 - s1) * (s2 - s3))
    w3 = d0 * d1 * d2 / ((s3 - s0) * (s3 - s1) * (s3 - s2))
    return (w0[:, None] * vj[:, 0] + w1[:, None] * vj[:, 1]
            + w2[:, None] * vj[:, 2] + w3[:, None] * vj[:, 3])


def resample_arclength(curve: DiscreteCurve, target_M: int, method: str = "linear") -> DiscreteCurve:
    """Redistribute nodes at uniform arclength along the polygon.

    ``method="linear"`` places the new nodes on the polygon itself.
    ``method="cubic"`` uses local cubic interpolation through the old nodes
    in the chord-length parameter instead; inside a time loop it avoids the
    corner cutting that linear resampling accumulates whenever nodes slide
    along the curve.
    """
    if target_M < 2:
        raise ValueError("target_M must be >= 2")
    pts = curve.nodes
    if curve.is_closed:
        pts = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s_old = np.concatenate([[0.0], np.cumsum(seg)])
    L = s_old[-1]
    if not L > 1e-14:
        raise ValueError("collapsed curve")
    if curve.is_closed:
        s_new = np.linspace(0.0, L, target_M + 1)[:-1]
    else:
        s_new = np.linspace(0.0, L, target_M)

    if method == "linear" or len(pts) < 4:
        new = _interp_linear(s_old, pts, s_new)
    elif method == "cubic":
        keep = np.concatenate([[True], seg > 1e-14 * L])
        if curve.is_closed:
            keep[-1] = True
        new = _interp_cubic(s_old[keep], pts[keep], s_new, curve.is_closed)
    else:
        raise ValueError(f"unknown resampling method {method!r}")

    if not curve.is_closed:
        new[0] = pts[0]
        new[-1] = pts[-1]
    else:
        new[0] = pts[0]
    if not np.all(np.isfinite(new)):
        raise ValueError("non-finite node coordinates")
    n_seg = target_M if curve.is_closed else target_M - 1
    d = np.diff(np.vstack([new, new[:1]]) if curve.is_closed else new, axis=0)
    L_new = float(np.sqrt(np.einsum("ij,ij->i", d, d)).sum())
    return DiscreteCurve._trusted(new, curve.is_closed, L_new / n_seg)


# ---------------------------------------------------------------------------
# finite differences in the uniform parameter

def diff1(f: np.ndarray, h: float, closed: bool) -> np.ndarray:
    """First derivative along axis 0."""
    if closed:
        return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * h)
    return np.gradient(f, h, axis=0, edge_order=2)


def diff2(f: np.ndarray, h: float, closed: bool) -> np.ndarray:
    """Second derivative along axis 0; one-sided 4-point stencil at open ends."""
    if closed:
        return (np.roll(f, -1, axis=0) - 2.0 * f + np.roll(f, 1, axis=0)) / h**2
    out = np.empty_like(f, dtype=float)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    return out


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def tangent_and_curvature(nodes: np.ndarray, h: float, closed: bool):
    """Unit tangent and curvature vector (second derivative minus its tangential part)."""
    dX = diff1(nodes, h, closed)
    T = dX / np.linalg.norm(dX, axis=1)[:, None]
    ddX = diff2(nodes, h, closed)
    kvec = ddX - _dot(ddX, T)[:, None] * T
    return T, kvec


def _complete_frame(dV, basis, defined):
    """Gram-Schmidt ``dV`` against ``basis``; sign chosen by continuity along the curve."""
    comp = dV.copy()
    for E in basis:
        comp = comp - _dot(comp, E)[:, None] * E
    nrm = np.linalg.norm(comp, axis=1)
    ok = defined & np.isfinite(nrm) & (nrm > 1e-12 * np.nanmax(np.abs(dV)) + 1e-300)
    B = np.full_like(dV, np.nan)
    B[ok] = comp[ok] / nrm[ok, None]
    prev = None
    for i in np.flatnonzero(ok):
        if prev is not None and np.dot(B[i], prev) < 0:
            B[i] = -B[i]
        prev = B[i]
    return B, ok


@dataclass
class FrenetData:
    T: np.ndarray
    kappa_vec: np.ndarray
    kappa: np.ndarray
    N: np.ndarray
    B1: Optional[np.ndarray]
    B2: Optional[np.ndarray]
    tau1: np.ndarray
    tau2: np.ndarray
    kappa_tol: float
    defined: np.ndarray  # nodes with kappa > kappa_tol


def compute_frenet(curve: DiscreteCurve, kappa_tol: Optional[float] = None) -> FrenetData:
    """Frenet frame, curvature and the first two torsions at every node.

    N, B1, B2 and the torsions are NaN where ``kappa <= kappa_tol`` (and
    where a neighbour needed by the derivative stencil is undefined).
    In R^3 B1 is ``T x N``; in higher dimensions it comes from
    Gram-Schmidt with its sign propagated along the curve.
    """
    if curve.M < 5:
        raise ValueError("compute_frenet needs at least 5 nodes")
    h = curve.spacing
    closed = curve.is_closed
    d = curve.ambient_dim
    if kappa_tol is None:
        kappa_tol = 1e-8 / h
    X = curve.nodes
    T, kvec = tangent_and_curvature(X, h, closed)
    kappa = np.linalg.norm(kvec, axis=1)
    defined = kappa > kappa_tol
    N = np.full_like(kvec, np.nan)
    N[defined] = kvec[defined] / kappa[defined, None]

    M = len(X)
    B1 = B2 = None
    tau2 = np.zeros(M)
    if d == 2:
        tau1 = np.where(defined, 0.0, np.nan)
    else:
        dN = diff1(N, h, closed)
        if d == 3:
            B1 = np.cross(T, N)
            tau1 = _dot(dN, B1)
        else:
            B1, ok1 = _complete_frame(dN, [T, N], defined)
            tau1 = np.where(ok1, _dot(dN, B1), np.linalg.norm(dN - _dot(dN, T)[:, None] * T - _dot(dN, N)[:, None] * N, axis=1))
            dB1 = diff1(B1, h, closed)
            B2, ok2 = _complete_frame(dB1, [T, N, B1], ok1)
            tau2 = np.where(ok2, _dot(dB1 + tau1[:, None] * N, B2), np.where(ok1, 0.0, np.nan))
    return FrenetData(T=T, kappa_vec=kvec, kappa=kappa, N=N, B1=B1, B2=B2,
                      tau1=tau1, tau2=tau2, kappa_tol=kappa_tol, defined=defined)


def best_fit_plane_deviation(curve: DiscreteCurve) -> float:
    """Largest node distance to the least-squares affine 2-plane."""
    X = curve.nodes
    if len(X) < 3:
        raise ValueError("need at least 3 nodes")
    Xc = X - X.mean(axis=0)
    if curve.ambient_dim <= 2:
        return 0.0
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    P = Vt[:2]
    resid = Xc - (Xc @ P.T) @ P
    return float(np.linalg.norm(resid, axis=1).max())
