"""Free-boundary curve shortening flow: solver, geometry and verification tools."""
from .barrier import Barrier, EllipsoidBarrier, FlatBarrier, ImplicitBarrier, SphereBarrier, make_barrier
from .flow import FlowConfig, FlowState, RunResult, run, step
from .geometry import DiscreteCurve, compute_frenet, resample_arclength
from .kernels import KernelParams, gaussian_functional_phi
from .models import ModelCurve, model_entropy

__version__ = "0.1.0"
