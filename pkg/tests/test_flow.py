import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbcsf.barrier import FlatBarrier, SphereBarrier
from fbcsf.flow import (FlowConfig, classify_ratios, curvature_vectors, estimate_T, make_state,
                        prepare_initial, rescale_typeI, run, stable_dt, step)
from fbcsf.geometry import DiscreteCurve
from fbcsf.models import ModelCurve, perturb

FLAT = FlatBarrier(np.array([1.0, 0.0]), 0.0)
SEMI = ModelCurve("semicircle", {"radius": 1.0})


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(node_count=8).validate()
    with pytest.raises(ValueError):
        FlowConfig(cfl=0.0).validate()
    FlowConfig().validate()


def test_chord_is_stationary():
    B = SphereBarrier(np.zeros(2), 2.0)
    res = run(ModelCurve("chord", {"p": [-2.0, 0.0], "q": [2.0, 0.0]}).sample(64), B,
              FlowConfig(node_count=64, t_end=0.2))
    assert res.max_displacement <= 1e-12
    assert res.stop_reason == "t_end"
    assert res.record.type_flag == "none"


def test_circle_radius_law_without_barrier():
    th = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    c = DiscreteCurve(np.c_[np.cos(th), np.sin(th)], True)
    res = run(c, None, FlowConfig(node_count=128, t_end=0.3, output_every=50))
    for s in res.states:
        r = np.linalg.norm(s.curve.nodes, axis=1).mean()
        assert r == pytest.approx(math.sqrt(1 - 2 * s.time), rel=2e-3)


def test_ghost_curvature_matches_circle_at_endpoint():
    c = SEMI.sample(257)
    k = curvature_vectors(c, FLAT)
    # the semicircle meets x=0 orthogonally; its curvature vector at the ends is -x/|x|
    np.testing.assert_allclose(k[0], -c.nodes[0], atol=1e-4)
    np.testing.assert_allclose(k[-1], -c.nodes[-1], atol=1e-4)


def test_stable_dt_rule():
    c = SEMI.sample(101)
    h = c.spacing
    assert stable_dt(c, 1.0, 0.5) == pytest.approx(0.5 * min(h * h / 2, 0.25))
    assert stable_dt(c, 1e6, 0.5) == pytest.approx(0.5 * 0.25e-6)


@settings(max_examples=8)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.06))
def test_boundary_conditions_and_length_decrease(seed, amp):
    B = SphereBarrier(np.zeros(2), 2.0)
    arc = ModelCurve("orthogonal_arc", {"sphere_radius": 2.0, "radius": 1.0})
    res = run(perturb(arc.sample(200), amp, seed), B, FlowConfig(node_count=64, t_end=0.02, output_every=25))
    for s in res.states:
        assert s.boundary_dist <= 1e-10
        assert s.boundary_angle <= 5 * s.curve.spacing
    L = np.asarray(res.trace["length"])
    assert np.all(np.diff(L) <= 1e-12 * L[:-1])


def test_endpoints_stay_on_barrier_every_step():
    B = SphereBarrier(np.zeros(2), 2.0)
    s = make_state(ModelCurve("orthogonal_arc", {"sphere_radius": 2.0, "radius": 0.7}).sample(64), B)
    for _ in range(50):
        s = step(s, B)
        for p in (s.curve.nodes[0], s.curve.nodes[-1]):
            assert abs(np.linalg.norm(p) - 2.0) < 1e-12


def test_prepare_initial_rejects_detached_endpoints():
    c = SEMI.sample(64)
    shifted = DiscreteCurve(c.nodes + np.array([0.5, 0.0]), False)
    with pytest.raises(ValueError):
        prepare_initial(shifted, FLAT, 64)


def test_estimate_T_exact_for_linear_inverse():
    t = np.linspace(0, 0.49, 50)
    assert estimate_T(t, 1.0 / (1 - 2 * t)) == pytest.approx(0.5, abs=1e-12)
    assert math.isinf(estimate_T(t, np.ones_like(t)))


def test_classify_ratios():
    tau = np.geomspace(1e-2, 1e-4, 40)
    assert classify_ratios(tau, np.full(40, 0.7071)) == "TypeI"
    assert classify_ratios(tau, 0.7 * (1e-2 / tau) ** 0.2) == "TypeII"
    with pytest.raises(ValueError, match="insufficient"):
        classify_ratios(tau[:5], np.ones(5))


def test_rescale_rejects_past_extinction():
    s = make_state(SEMI.sample(64), FLAT, time=0.6)
    with pytest.raises(ValueError):
        rescale_typeI(s, np.zeros(2), 0.5)


def test_run_is_deterministic():
    c = perturb(SEMI.sample(100), 0.03, 11)
    cfg = FlowConfig(node_count=64, t_end=0.01, output_every=10)
    a, b = run(c, FLAT, cfg), run(c, FLAT, cfg)
    np.testing.assert_array_equal(a.final.curve.nodes, b.final.curve.nodes)
