"""Semicircle collapse on a half plane: extinction time, blow-up ratio, rescaled shape."""
import math

import numpy as np

from fbcsf.barrier import FlatBarrier
from fbcsf.flow import FlowConfig, rescale_typeI, run
from fbcsf.models import ModelCurve, hausdorff_distance

FLAT = FlatBarrier(np.array([1.0, 0.0]), 0.0)
SEMI = ModelCurve("semicircle", {"radius": 1.0})

if __name__ == "__main__":
    res = run(SEMI.sample(400), FLAT, FlowConfig(node_count=256, kappa_cap=15.0, output_every=200))
    rec = res.record
    print(f"stop={res.stop_reason} T_est={rec.T_est:.7f} type={rec.type_flag} z={rec.blowup_point}")
    unit = SEMI.sample(2001)
    print(f"{'T-t':>10} {'k*sqrt(T-t)':>12} {'hausdorff':>10}")
    for s in res.states[-12:]:
        tau = rec.T_est - s.time
        if tau <= 0:
            continue
        d = hausdorff_distance(rescale_typeI(s, rec.blowup_point, rec.T_est), unit)
        print(f"{tau:10.3e} {s.max_kappa * math.sqrt(tau):12.6f} {d:10.2e}")
    print(f"target ratio 1/sqrt(2) = {1 / math.sqrt(2):.6f}")
