"""Cross-check the parametric solver against a graph patch.

Right after the tall tree's junctions collide, the curve near the new
junction is a graph over a short interval.  The graph-patch solver evolves
that piece independently, with the parametric solution supplying boundary
values, and the two are compared node by node.
"""
import math

from netflow.flow import Event, SolverConfig, SymmetricState, cross_validate, network_diameter, prepare, run_until_event
from netflow.presets import tall_tree
from netflow.transitions import standard_transition

n = 200
net = tall_tree(n)
cfg = SolverConfig(n_points=n).resolved(network_diameter(net))

res = run_until_event(prepare(SymmetricState(net), cfg), cfg)
assert res.event is Event.TYPE0
rs = standard_transition(res.state, cfg)
print(f"collision at t = {rs.t_singular:.5f}, restart offset {rs.delta0:.2e}")

for angle in (math.pi / 4, math.pi / 3.5):
    cv = cross_validate(rs.state, cfg, eps=0.1, nodes=41, m=math.tan(angle), steps=1000, dt=1e-5)
    print(f"m = tan({angle:.3f}): max difference {cv.max_error:.2e}, min w {cv.min_w:.3e}")
