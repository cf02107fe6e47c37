"""Frozen reference values from independent quadrature.

The numbers were produced once with scipy.integrate.quad on the exact
parametrisations (adaptive quadrature, tolerance 1e-14) and are kept here
as constants so the check no longer depends on the oracle code:

    semicircle (-sin th, cos th), th in [0, pi], mirrored across x = 0
    Grim Reaper y = -log cos x, |x| <= 1.4, ds = sec x dx
"""
import math

import numpy as np
import pytest

from fbcsf.barrier import FlatBarrier
from fbcsf.geometry import DiscreteCurve
from fbcsf.kernels import KernelParams, gaussian_functional_phi, plain_functional
from fbcsf.models import ModelCurve

FLAT = FlatBarrier(np.array([1.0, 0.0]), 0.0)

SEMICIRCLE_PHI = [
    ((0.0, 0.0), 0.5, 1.520346901066281),
    ((0.0, 0.3), 0.2, 1.1624772034157664),
    ((0.0, -0.5), 1.0, 1.317096020013276),
    ((0.0, 0.9), 0.05, 1.0176038696213723),
]

GRIM_REAPER_PHI = [
    (0.5, 0.3, 1.1033534067700017),
    (2.0, 1.0, 0.6720950720878074),
]


@pytest.mark.parametrize("x0,sigma,ref", SEMICIRCLE_PHI)
def test_reflected_functional_on_semicircle(x0, sigma, ref):
    semi = ModelCurve("semicircle", {"radius": 1.0}).sample(4001)
    val = gaussian_functional_phi(semi, 0.0, KernelParams(np.array(x0), sigma), FLAT)
    assert val == pytest.approx(ref, rel=1e-6)


def test_semicircle_extinction_value_closed_form():
    assert SEMICIRCLE_PHI[0][2] == pytest.approx(math.sqrt(2 * math.pi / math.e), rel=1e-14)


@pytest.mark.parametrize("y0,sigma,ref", GRIM_REAPER_PHI)
def test_plain_functional_on_grim_reaper(y0, sigma, ref):
    x = np.linspace(-1.4, 1.4, 20001)
    c = DiscreteCurve(np.c_[x, -np.log(np.cos(x))])
    assert plain_functional(c, [0.0, y0], sigma) == pytest.approx(ref, rel=1e-6)
