__version__ = "0.1"

from CosmoTime.minkowski import lorentz_dot, hyperbolic_distance, hyperbolic_point
from CosmoTime.lamination import Leaf, MeasuredLamination, SpineComplex, build_spine, tree_distance
from CosmoTime.domain import RegularDomain, GradientLine, flow
from CosmoTime.sampling import Sampling
from CosmoTime.levelset import MeshSettings, level_distance, past_sweep, future_sweep
