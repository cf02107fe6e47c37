"""Residual convergence of the evolution identities on a circle and a helix.

Each refinement halves h; dt follows the CFL rule, so it drops by 4.
Prints residuals and observed orders in dt.
"""
import math

from fbcsf import analysis as an
from fbcsf.flow import make_state, stable_dt
from fbcsf.models import ModelCurve

CIRCLE = ModelCurve("circle", {"radius": 1.0})
HELIX = ModelCurve("helix", {"a": 1.0, "b": 0.5, "u_range": [-math.pi, math.pi]})


def window(model, M):
    s = make_state(model.sample(M), None)
    return an.fixed_dt_window(s, None, stable_dt(s.curve, s.max_kappa_sq, 0.5))


def table(model, grids, fns, exclude):
    prev = {}
    print(f"{'M':>5} {'identity':>30} {'residual':>12} {'order':>7}")
    for M in grids:
        win = window(model, M)
        ex = exclude(M)
        for fn in fns:
            rep = fn(win, ex)
            order = an.with_order(prev[fn], rep).order_estimate if fn in prev else None
            o = f"{order:7.3f}" if order is not None else "      -"
            print(f"{M:5d} {rep.name:>30} {rep.max_residual:12.4e} {o}")
            prev[fn] = rep


if __name__ == "__main__":
    print("circle")
    table(CIRCLE, (64, 128, 256, 512),
          (an.residual_evolution_kappa, an.residual_evolution_kappa_sq, an.residual_commutator), lambda M: 3)
    print("\nhelix")
    table(HELIX, (64, 128, 256),
          (an.residual_evolution_kappa, an.residual_evolution_tau1), lambda M: M // 4)
