import os
import numpy as np

from CosmoTime.lamination import Leaf, MeasuredLamination, build_spine, tree_distance
from CosmoTime.domain import RegularDomain
from CosmoTime.levelset import MeshSettings, past_sweep, future_sweep, write_sweep_csv
from CosmoTime.minkowski import normalize_timelike
from CosmoTime.utils import debug_info

dir = os.path.dirname(__file__)
_debug = True

# Check if directory oneLeafConvergence exists if not create it
if not os.path.exists(os.path.join(dir,"oneLeafConvergence")):
    os.makedirs(os.path.join(dir,"oneLeafConvergence"))

##############################################################################################################
# Regular domain dual to a single weighted leaf
##############################################################################################################

# The spine is a segment of length w; the levels of the domain are made of two hyperbolic half planes
# glued to a flat band of width w. As a -> 0 the levels collapse onto the segment, as a -> infinity
# the rescaled levels approach the hyperbolic plane.

w = 1.0
lam = MeasuredLamination([Leaf((-1.2, 1.2), w)], debug=_debug)
graph = lam.validate()
dom = RegularDomain(build_spine(lam, graph, debug=_debug), seed=2, debug=_debug)

debug_info(_debug, f"Tree distance between the two regions: {tree_distance(graph, lam, 0, 1)}")

# Gradient lines through the two spine vertices with normals in the interior of their regions
lines = [dom.gradient_line(dom.spine.vertices[r], normalize_timelike(graph.points[r])) for r in graph.regions]
pairs = [("base-beyond", lines[0], lines[1])]

##############################################################################################################
# Past: the level distance converges to the length of the spine
##############################################################################################################

settings = MeshSettings(h=0.1, refinements=3)
past = past_sweep(dom, pairs, [0.4, 0.2, 0.1, 0.05], settings, debug=_debug)
write_sweep_csv(os.path.join(dir, "oneLeafConvergence/past.csv"), past["rows"])
for s in past["summary"]:
    print(f"{s['pair_id']}: limit {s['limit']:.5f} +- {s['error']:.1e}, oracle {s['oracle']:.5f}, passed {s['passed']}")

##############################################################################################################
# Future: d_a / a converges to the hyperbolic distance of the normals
##############################################################################################################

future = future_sweep(dom, pairs, [5.0, 20.0, 100.0], settings, debug=_debug)
write_sweep_csv(os.path.join(dir, "oneLeafConvergence/future.csv"), future["rows"])
for s in future["summary"]:
    print(f"{s['pair_id']}: d_a/a = {np.round(s['values'], 5)}, target {s['target']:.5f}, passed {s['passed']}")
