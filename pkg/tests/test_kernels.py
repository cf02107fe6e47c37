import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbcsf.barrier import FlatBarrier, SphereBarrier
from fbcsf.geometry import DiscreteCurve
from fbcsf.kernels import (KernelParams, ScanSpec, cutoff_phi, entropy_scan, eta, gaussian_functional_phi,
                           gaussian_rho, plain_functional, reflected_kernel_f)
from fbcsf.models import ModelCurve, perturb

FLAT = FlatBarrier(np.array([1.0, 0.0]), 0.0)


def test_rho_normalised_on_a_line():
    s = np.linspace(-40, 40, 80001)
    X = np.c_[s, np.zeros_like(s)]
    for sig in (0.3, 1.0, 5.0):
        assert np.trapezoid(gaussian_rho(X, sig), s) == pytest.approx(1.0, rel=1e-9)


def test_eta_and_cutoff():
    np.testing.assert_allclose(eta([-1.0, 0.0, 0.5, 1.0, 2.0]), [1.0, 1.0, 0.0625, 0.0, 0.0])
    p = KernelParams(np.zeros(2), 1.0, r=0.5)
    assert cutoff_phi(np.zeros(2), 0.01, p) == 1.0  # |x|^2 <= alpha sigma
    assert cutoff_phi(np.array([1.0, 0.0]), 0.01, p) == 0.0
    assert cutoff_phi(np.array([3.0, 0.0]), 0.01, KernelParams(np.zeros(2), 1.0)) == 1.0


def test_params_validation():
    with pytest.raises(ValueError):
        KernelParams(np.zeros(2), 1.0, alpha=0.4)
    with pytest.raises(ValueError):
        KernelParams(np.zeros(2), 1.0, r=0.0)
    with pytest.raises(ValueError):
        KernelParams(np.zeros(2), 1.0).sigma_hat(1.0)
    with pytest.raises(ValueError):
        KernelParams(np.zeros(2), 1.0, r=1.0).check_barrier(SphereBarrier(np.zeros(2), 2.0))


def test_semicircle_at_extinction_point():
    semi = ModelCurve("semicircle", {"radius": 1.0}).sample(2001)
    val = gaussian_functional_phi(semi, 0.0, KernelParams(np.zeros(2), 0.5), FLAT)
    assert val == pytest.approx(math.sqrt(2 * math.pi / math.e), rel=1e-6)


def test_reflection_doubles_on_barrier():
    p = KernelParams(np.array([0.0, 0.3]), 1.0)
    x = np.array([0.0, 0.5])
    assert reflected_kernel_f(x, 0.0, p, FLAT) == pytest.approx(2 * gaussian_rho(x - p.center, 1.0))


@given(st.floats(0.2, 8.0), st.floats(0.05, 3.0), st.floats(-0.5, 0.5))
def test_parabolic_scale_invariance(lam, sig, y0):
    curve = perturb(ModelCurve("semicircle", {"radius": 1.0}).sample(200), 0.05, 3)
    x0 = np.array([0.0, y0])
    a = gaussian_functional_phi(curve, 0.0, KernelParams(x0, sig), FLAT)
    b = gaussian_functional_phi(DiscreteCurve(x0 + lam * (curve.nodes - x0)), 0.0,
                                KernelParams(x0, lam * lam * sig), FLAT)
    assert abs(a - b) <= 1e-10


def test_empty_curve_and_plain_functional():
    assert gaussian_functional_phi(None, 0.0, KernelParams(np.zeros(2), 1.0), FLAT) == 0.0
    line = ModelCurve("line", {"half_length": 60.0}).sample(20001)
    assert plain_functional(line, np.zeros(2), 2.0) == pytest.approx(1.0, rel=1e-8)


def test_entropy_scan_grid():
    from fbcsf.flow import FlowConfig, run
    res = run(ModelCurve("semicircle", {"radius": 1.0}).sample(200), FLAT,
              FlowConfig(node_count=64, t_end=0.05, output_every=50))
    rep = entropy_scan(res.states, FLAT, ScanSpec(centers=[[0.0, 0.0], [0.0, 0.2]], sigma_hats=[0.5, 0.1]))
    assert len(rep.center_grid) == 4
    assert rep.entropy_sup < 2.0
    assert rep.monotonicity_violation <= 1e-4
    with pytest.raises(ValueError):
        entropy_scan(res.states, FLAT, ScanSpec(centers=[], sigma_hats=[0.5]))
    auto = entropy_scan(res.states, FLAT, ScanSpec(sigma_hats=[0.5]))
    assert len(auto.center_grid) == 10  # 5 tangential offsets around each endpoint
