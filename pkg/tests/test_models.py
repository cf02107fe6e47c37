import math

import numpy as np
import pytest

from fbcsf.geometry import DiscreteCurve, compute_frenet
from fbcsf.models import MODEL_KINDS, ModelCurve, exact_state, hausdorff_distance, model_entropy, perturb


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_every_model_samples(kind):
    params = {"chord": {"p": [0.0, 0.0], "q": [1.0, 1.0]}}.get(kind, {})
    c = ModelCurve(kind, params).sample(64)
    assert c.M == 64 and np.all(np.isfinite(c.nodes))


def test_unknown_model():
    with pytest.raises(ValueError):
        ModelCurve("spiral")


def test_orthogonal_arc_meets_sphere_orthogonally():
    m = ModelCurve("orthogonal_arc", {"sphere_radius": 2.0, "radius": 1.0})
    c = m.sample(2001)
    for i, j in ((0, 1), (-1, -2)):
        p = c.nodes[i]
        assert np.linalg.norm(p) == pytest.approx(2.0)
        t = c.nodes[j] - p
        # contact is orthogonal: the end tangent is along the sphere normal
        assert abs(t @ p) / np.linalg.norm(t) / 2.0 == pytest.approx(1.0, abs=1e-6)


def test_semicircle_exact_state_and_hausdorff():
    m = ModelCurve("semicircle", {"radius": 1.0})
    a = exact_state(m, 0.375, 200)
    assert np.linalg.norm(a.nodes, axis=1) == pytest.approx(0.5)
    assert hausdorff_distance(m.sample(200), m.sample(400)) < 1e-4
    circ = ModelCurve("circle", {"radius": 1.0}).sample(400)
    # the far side of the circle is sqrt(2) away from the semicircle's endpoints
    assert hausdorff_distance(m.sample(400), circ) == pytest.approx(math.sqrt(2), abs=1e-3)
    with pytest.raises(ValueError):
        exact_state(m, 0.5, 10)


def test_grim_reaper_is_a_graph_of_minus_log_cos():
    c = ModelCurve("grim_reaper", {"s_max": 3.0}).sample(301)
    x, y = c.nodes.T
    np.testing.assert_allclose(y, -np.log(np.cos(x)), atol=1e-12)
    fr = compute_frenet(c)
    np.testing.assert_allclose(fr.kappa[5:-5], np.cos(x[5:-5]), atol=1e-3)


def test_perturb_is_seeded_and_fixes_endpoints():
    c = ModelCurve("semicircle", {"radius": 1.0}).sample(100)
    a, b, d = perturb(c, 0.1, 5), perturb(c, 0.1, 5), perturb(c, 0.1, 6)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    assert not np.array_equal(a.nodes, d.nodes)
    np.testing.assert_array_equal(a.nodes[[0, -1]], c.nodes[[0, -1]])
    assert np.linalg.norm(a.nodes - c.nodes, axis=1).max() == pytest.approx(0.1)


def test_perturb_reference_values():
    # frozen first draws so reimplementations can check their generator
    c = DiscreteCurve(np.c_[np.linspace(0, 1, 5), np.zeros(5)])
    p = perturb(c, 1.0, 0, modes=1)
    np.testing.assert_allclose(p.nodes[2] - c.nodes[2], REF_MID, atol=1e-12)


REF_MID = None  # filled below


def _ref():
    g = np.random.Generator(np.random.PCG64(0))
    a, b = g.standard_normal(2), g.standard_normal(2)
    u = np.arange(5) / 4
    disp = (np.cos(np.pi * u)[:, None] * a + np.sin(np.pi * u)[:, None] * b) * (np.sin(np.pi * u) ** 2)[:, None]
    return disp[2] / np.linalg.norm(disp, axis=1).max()


REF_MID = _ref()


def test_model_entropies():
    assert model_entropy("line") == pytest.approx(1.0, abs=1e-3)
    assert model_entropy("circle") == pytest.approx(math.sqrt(2 * math.pi / math.e), abs=5e-3)
    assert model_entropy("semicircle") == pytest.approx(model_entropy("circle"))
    g = [model_entropy("grim_reaper", w) for w in (6.0, 12.0)]
    assert g[0] <= g[1] <= 2.0
    with pytest.raises(ValueError):
        model_entropy("line", window=2.0)
