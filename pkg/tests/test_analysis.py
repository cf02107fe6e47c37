import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbcsf import analysis as an
from fbcsf.barrier import FlatBarrier, SphereBarrier
from fbcsf.flow import FlowConfig, make_state, run, stable_dt
from fbcsf.geometry import DiscreteCurve
from fbcsf.models import ModelCurve, perturb


def circle_window(M, r=1.0):
    th = np.linspace(0, 2 * np.pi, M, endpoint=False)
    s = make_state(DiscreteCurve(np.c_[r * np.cos(th), r * np.sin(th)], True), None)
    return an.fixed_dt_window(s, None, stable_dt(s.curve, s.max_kappa_sq, 0.5))


@pytest.mark.parametrize("fn", [an.residual_evolution_kappa, an.residual_evolution_kappa_sq,
                                an.residual_commutator])
def test_circle_residuals_small_and_converging(fn):
    coarse, fine = fn(circle_window(128)), fn(circle_window(256))
    h, dt = fine.grid
    assert fine.max_residual <= 5 * (h * h + dt)
    assert coarse.max_residual / fine.max_residual >= 2.5
    assert an.with_order(coarse, fine).order_estimate > 0.9


def test_tau1_residual_vanishes_in_plane():
    assert an.residual_evolution_tau1(circle_window(64)).max_residual == 0.0


def test_window_too_short():
    with pytest.raises(ValueError):
        an.residual_evolution_kappa(circle_window(64)[:2])


def test_sign_flip_is_detected_on_helix():
    c = ModelCurve("helix", {"a": 1.0, "b": 0.5, "u_range": [-math.pi, math.pi]}).sample(128)
    s = make_state(c, None)
    win = an.fixed_dt_window(s, None, stable_dt(s.curve, s.max_kappa_sq, 0.5))
    good = an.residual_evolution_kappa(win, exclude=32)
    bad = an.residual_evolution_kappa(win, exclude=32, torsion_term_sign=-1.0)
    assert bad.max_residual > 100 * good.max_residual


def test_endpoint_relations_on_sphere():
    B = SphereBarrier(np.zeros(3), 2.0)
    arc = ModelCurve("orthogonal_arc", {"sphere_radius": 2.0, "radius": 1.0, "sphere_center": [0, 0, 0],
                                        "e1": [1, 0, 0], "e2": [0, 1, 0]})
    res = run(perturb(arc.sample(400), 0.02, 7), B, FlowConfig(node_count=128, t_end=0.05, output_every=100))
    rep = an.endpoint_relations(res.final, B)
    assert rep.max_residual <= 50 * res.final.curve.spacing
    assert rep.details["ineq_dmu_kappa"] and rep.details["ineq_tau1"]
    with pytest.raises(ValueError):
        an.endpoint_relations(make_state(DiscreteCurve(res.final.curve.nodes * 1.1), None), B)


def test_dilation_monitor_window_guard():
    win = circle_window(64)
    rep = an.dilation_invariant_monitor(win, 1)
    assert rep.max_residual == pytest.approx(1.0, rel=1e-2)
    with pytest.raises(ValueError):
        an.dilation_invariant_monitor(win, 4)


@settings(max_examples=10)
@given(st.floats(0.3, 3.0))
def test_shrinker_residual_circle(r):
    th = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    c = DiscreteCurve(np.c_[r * np.cos(th), r * np.sin(th)], True)
    h = c.spacing
    assert an.shrinker_residual(c, r * r / 2) <= 10 * h * h / r**3 + 1e-12


def test_translator_residual_grim_reaper():
    c = ModelCurve("grim_reaper", {"s_max": math.asinh(math.tan(1.4))}).sample(256)
    assert an.translator_residual(c, [0.0, 1.0]) <= 10 * c.spacing**2
    assert an.translator_residual(c, [0.0, -1.0]) > 0.5
    with pytest.raises(ValueError):
        an.translator_residual(c, [0.0, 0.0])


def test_report_serialises():
    rep = an.residual_evolution_kappa(circle_window(64))
    d = rep.to_dict()
    assert d["name"] == rep.name and len(d["grid"]) == 2
