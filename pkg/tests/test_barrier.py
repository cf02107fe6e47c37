import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbcsf.barrier import (EllipsoidBarrier, FlatBarrier, ImplicitBarrier, ProjectionError,
                           SphereBarrier, make_barrier)

vec3 = st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(np.array)


@given(vec3, st.floats(0.5, 3.0))
def test_sphere_projection_and_reflection(v, R):
    b = SphereBarrier(np.zeros(3), R)
    n = np.linalg.norm(v)
    if n < 1e-3:
        return
    x = v / n * R * 1.2
    p = b.project(x)
    assert abs(np.linalg.norm(p) - R) < 1e-12
    np.testing.assert_allclose(b.reflect(b.reflect(x)), x, atol=1e-10)
    assert b.distance(x) == pytest.approx(0.2 * R)


@given(vec3, st.floats(-2, 2))
def test_flat_projection(v, off):
    b = FlatBarrier(np.array([0.0, 0.0, 2.0]), off)
    p = b.project(v)
    assert abs(b.value(p)) < 1e-12
    np.testing.assert_allclose(p[:2], v[:2])
    np.testing.assert_allclose(b.reflect(b.reflect(v)), v, atol=1e-12)


def test_ellipse_projection_matches_dense_sampling():
    b = EllipsoidBarrier(np.zeros(2), np.array([2.0, 1.0]))
    x = np.array([2.2, 0.01])
    p = b.project(x)
    th = np.linspace(-0.2, 0.2, 400001)
    pts = np.c_[2 * np.cos(th), np.sin(th)]
    q = pts[np.argmin(np.linalg.norm(pts - x, axis=1))]
    assert np.linalg.norm(p - q) < 1e-6
    assert abs(b.value(p)) < 1e-10


def test_projection_fails_far_away():
    b = SphereBarrier(np.zeros(2), 1.0)
    with pytest.raises(ProjectionError):
        b.project(np.array([0.0, 0.0]))


def test_second_fundamental_form_signs():
    s = SphereBarrier(np.zeros(3), 2.0)
    p = np.array([2.0, 0, 0])
    assert s.second_fundamental_form(p, np.array([0, 1.0, 0]), np.array([0, 1.0, 0])) == pytest.approx(-0.5)
    assert s.second_fundamental_form(p, np.array([0, 1.0, 0]), np.array([0, 0, 1.0])) == pytest.approx(0.0)
    e = EllipsoidBarrier(np.zeros(2), np.array([2.0, 1.0]))
    assert e.second_fundamental_form(np.array([2.0, 0]), np.array([0, 1.0]), np.array([0, 1.0])) == pytest.approx(-2.0)
    f = FlatBarrier(np.array([1.0, 0]), 0.0)
    assert f.second_fundamental_form(np.zeros(2), np.array([0, 1.0]), np.array([0, 1.0])) == 0.0


def test_second_fundamental_form_rejects_bad_input():
    s = SphereBarrier(np.zeros(3), 2.0)
    with pytest.raises(ValueError):
        s.second_fundamental_form(np.array([2.5, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 1.0, 0]))
    with pytest.raises(ValueError):
        s.second_fundamental_form(np.array([2.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))


def test_shape_operator_bound():
    b = EllipsoidBarrier(np.zeros(3), np.array([2.0, 1.0, 1.5]))
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = b.project(rng.normal(size=3) * 0.1 + np.array([1.0, 0.5, 0.5]) * 1.3)
        eig = np.linalg.eigvalsh(b.shape_operator(p))
        assert np.abs(eig).max() <= b.curvature_bound * (1 + 1e-9)


def test_implicit_sphere_agrees():
    imp = ImplicitBarrier.from_expression("x0**2 + x1**2 + x2**2 - 4", 3, 2.0, 0.5)
    sph = SphereBarrier(np.zeros(3), 2.0)
    x = np.array([1.0, 1.5, 0.7])
    np.testing.assert_allclose(imp.project(x), sph.project(x), atol=1e-10)
    np.testing.assert_allclose(imp.normal(sph.project(x)), sph.normal(sph.project(x)), atol=1e-12)


def test_r_max_and_make_barrier():
    b = make_barrier({"kind": "sphere", "radius": 2.0}, 3)
    assert b.r_max == pytest.approx(0.25)
    assert make_barrier(None, 2) is None
    assert make_barrier({"kind": "none"}, 2) is None
    assert math.isinf(make_barrier({"kind": "flat", "normal": [1, 0]}, 2).r_max)
    with pytest.raises(ValueError):
        make_barrier({"kind": "torus"}, 3)
