"""Implicit barrier hypersurfaces {F = 0} with Omega = {F <= 0}.

Every barrier exposes F, its gradient and Hessian, the nearest-point
projection zeta, the reflection 2 zeta(x) - x and the second fundamental
form.  Sign convention: the outward normal is nu = grad F / |grad F| and

    II(u, v) = -<Hess F u, v> / |grad F|,

so that a round sphere of radius R bounding its interior has II(u, u) =
-|u|^2 / R, i.e. convex domains have negative definite II.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np


class ProjectionError(ValueError):
    pass


class Barrier:
    kind = "abstract"
    tubular_radius: float = np.inf
    curvature_bound: float = 0.0

    # oracles, implemented by subclasses
    def value(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def r_max(self) -> float:
        """Largest admissible cut-off radius for the reflected kernel."""
        return self.tubular_radius / 8.0

    def normal(self, x) -> np.ndarray:
        g = self.grad(np.asarray(x, dtype=float))
        return g / np.linalg.norm(g)

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def project(self, x) -> np.ndarray:
        return _newton_project(self, np.asarray(x, dtype=float))

    def reflect(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 2.0 * self.project(x) - x

    def project_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.array([self.project(x) for x in X])

    def reflect_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return 2.0 * self.project_many(X) - X

    def shape_operator(self, p) -> np.ndarray:
        """Matrix of S(u) = -D_u nu restricted to T_p; II(u,v) = <S u, v>."""
        p = np.asarray(p, dtype=float)
        g = self.grad(p)
        gn = np.linalg.norm(g)
        nu = g / gn
        P = np.eye(len(p)) - np.outer(nu, nu)
        return -P @ self.hess(p) @ P / gn

    def second_fundamental_form(self, p, u, v, tol: float = 1e-8) -> float:
        p = np.asarray(p, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if abs(self.value(p)) > tol * max(1.0, np.linalg.norm(self.grad(p))):
            raise ValueError("point is not on the barrier")
        nu = self.normal(p)
        if abs(u @ nu) > tol or abs(v @ nu) > tol:
            raise ValueError("non-tangent vector passed to second_fundamental_form")
        return float(-(self.hess(p) @ u) @ v / np.linalg.norm(self.grad(p)))

    def to_dict(self) -> dict:
        raise NotImplementedError


def _newton_project(b: Barrier, x: np.ndarray, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Damped Newton on grad_y |y-x|^2/2 + lam F(y) = 0, F(y) = 0."""
    g = b.grad(x)
    y = x - b.value(x) * g / (g @ g)
    d = len(x)
    lam = 0.0

    def residual(y, lam):
        return np.concatenate([y - x + lam * b.grad(y), [b.value(y)]])

    # initial multiplier from the least squares fit of y - x = -lam grad F
    gy = b.grad(y)
    lam = -((y - x) @ gy) / (gy @ gy)
    res = residual(y, lam)
    scale = max(1.0, np.linalg.norm(x))
    for _ in range(max_iter):
        if np.linalg.norm(res) <= tol * scale:
            break
        gy = b.grad(y)
        J = np.zeros((d + 1, d + 1))
        J[:d, :d] = np.eye(d) + lam * b.hess(y)
        J[:d, d] = gy
        J[d, :d] = gy
        try:
            step = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -res, rcond=None)[0]
        t = 1.0
        nres = np.linalg.norm(res)
        while t > 1e-4:
            y_new, lam_new = y + t * step[:d], lam + t * step[d]
            r_new = residual(y_new, lam_new)
            if np.linalg.norm(r_new) < (1 - 1e-4 * t) * nres:
                break
            t *= 0.5
        y, lam, res = y_new, lam_new, r_new
    if np.linalg.norm(res) > 1e-8 * scale:
        raise ProjectionError("projection not unique")
    if np.linalg.norm(x - y) >= b.tubular_radius:
        raise ProjectionError("projection not unique")
    return y


@dataclass(eq=False)
class FlatBarrier(Barrier):
    """Half-space {<n, x> <= c}."""

    normal_vec: np.ndarray
    offset: float = 0.0
    kind = "flat"

    def __post_init__(self):
        n = np.asarray(self.normal_vec, dtype=float)
        self.normal_vec = n / np.linalg.norm(n)
        self.tubular_radius = np.inf
        self.curvature_bound = 0.0

    def value(self, x):
        return float(np.asarray(x) @ self.normal_vec - self.offset)

    def grad(self, x):
        return self.normal_vec.copy()

    def hess(self, x):
        d = len(self.normal_vec)
        return np.zeros((d, d))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return x - self.value(x) * self.normal_vec

    def project_many(self, X):
        X = np.asarray(X, dtype=float)
        return X - (X @ self.normal_vec - self.offset)[:, None] * self.normal_vec

    def to_dict(self):
        return {"kind": "flat", "normal": self.normal_vec.tolist(), "offset": self.offset}


@dataclass(eq=False)
class SphereBarrier(Barrier):
    center: np.ndarray
    radius: float
    kind = "sphere"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        self.tubular_radius = float(self.radius)
        self.curvature_bound = 1.0 / self.radius

    def value(self, x):
        y = np.asarray(x) - self.center
        return float(y @ y - self.radius**2)

    def grad(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.center)

    def hess(self, x):
        return 2.0 * np.eye(len(self.center))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        y = x - self.center
        r = np.linalg.norm(y)
        if abs(r - self.radius) >= self.tubular_radius or r == 0:
            raise ProjectionError("projection not unique")
        return self.center + self.radius * y / r

    def project_many(self, X):
        Y = np.asarray(X, dtype=float) - self.center
        r = np.linalg.norm(Y, axis=1)
        if np.any(np.abs(r - self.radius) >= self.tubular_radius) or np.any(r == 0):
            raise ProjectionError("projection not unique")
        return self.center + self.radius * Y / r[:, None]

    def to_dict(self):
        return {"kind": "sphere", "center": self.center.tolist(), "radius": self.radius}


@dataclass(eq=False)
class EllipsoidBarrier(Barrier):
    """sum ((x_i - c_i)/a_i)^2 <= 1."""

    center: np.ndarray
    semi_axes: np.ndarray
    kind = "ellipsoid"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        a = np.asarray(self.semi_axes, dtype=float)
        if a.shape != self.center.shape or np.any(a <= 0):
            raise ValueError("semi_axes must be positive and match the center")
        self.semi_axes = a
        # smallest radius of curvature / largest normal curvature
        self.tubular_radius = float(a.min() ** 2 / a.max())
        self.curvature_bound = float(a.max() / a.min() ** 2)

    def value(self, x):
        y = (np.asarray(x) - self.center) / self.semi_axes
        return float(y @ y - 1.0)

    def grad(self, x):
        return 2.0 * (np.asarray(x, dtype=float) - self.center) / self.semi_axes**2

    def hess(self, x):
        return np.diag(2.0 / self.semi_axes**2)

    def to_dict(self):
        return {"kind": "ellipsoid", "center": self.center.tolist(), "semi_axes": self.semi_axes.tolist()}


@dataclass(eq=False)
class ImplicitBarrier(Barrier):
    """User supplied F with gradient and Hessian oracles."""

    F: Callable
    gradF: Callable
    hessF: Callable
    tube: float
    K: float
    source: Optional[dict] = None
    kind = "implicit"

    def __post_init__(self):
        if not self.tube > 0:
            raise ValueError("tubular_radius must be positive")
        self.tubular_radius = float(self.tube)
        self.curvature_bound = float(self.K)

    def value(self, x):
        return float(self.F(np.asarray(x, dtype=float)))

    def grad(self, x):
        return np.asarray(self.gradF(np.asarray(x, dtype=float)), dtype=float)

    def hess(self, x):
        return np.asarray(self.hessF(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def from_expression(cls, expr: str, dim: int, tubular_radius: float, curvature_bound: float):
        """Build oracles from a sympy expression in x0, x1, ..."""
        import sympy as sp

        xs = sp.symbols(f"x0:{dim}")
        F = sp.sympify(expr, locals={str(s): s for s in xs})
        grad = [sp.diff(F, s) for s in xs]
        hess = [[sp.diff(g, s) for s in xs] for g in grad]
        f_num = sp.lambdify(xs, F, "numpy")
        g_num = sp.lambdify(xs, grad, "numpy")
        h_num = sp.lambdify(xs, hess, "numpy")
        return cls(
            F=lambda x: f_num(*x),
            gradF=lambda x: np.array(g_num(*x), dtype=float),
            hessF=lambda x: np.array(h_num(*x), dtype=float),
            tube=tubular_radius,
            K=curvature_bound,
            source={"kind": "implicit", "expr": expr, "dim": dim,
                    "tubular_radius": tubular_radius, "curvature_bound": curvature_bound},
        )

    def to_dict(self):
        return dict(self.source) if self.source else {"kind": "implicit"}


def make_barrier(spec: Optional[dict], dim: int) -> Optional[Barrier]:
    """Barrier from a config dict; ``None`` or kind "none" means no barrier."""
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "none":
        return None
    if kind == "flat":
        return FlatBarrier(np.asarray(spec["normal"], dtype=float), float(spec.get("offset", 0.0)))
    if kind == "sphere":
        return SphereBarrier(np.asarray(spec.get("center", np.zeros(dim)), dtype=float), float(spec["radius"]))
    if kind == "ellipsoid":
        return EllipsoidBarrier(np.asarray(spec.get("center", np.zeros(dim)), dtype=float),
                                np.asarray(spec["semi_axes"], dtype=float))
    if kind == "implicit":
        return ImplicitBarrier.from_expression(spec["expr"], dim, float(spec["tubular_radius"]),
                                               float(spec["curvature_bound"]))
    raise ValueError(f"unknown barrier kind {kind!r}")
