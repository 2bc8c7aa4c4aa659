"""Trees settle on a Steiner configuration.

With the anchor at (1.2, 1) the bridge stays on the x1-axis and the
junction converges to the closed-form Steiner point.  With the tall anchor
(0.5, 1.5) no such tree exists: the junctions collide, the bridge flips to
the x2-axis and the flow settles there instead.
"""
from netflow.geometry import NetworkType
from netflow.flow import SolverConfig
from netflow.runner import RunSpec, run_extended
from netflow.transitions import steiner_junction

for anchor in [(1.2, 1.0), (0.5, 1.5)]:
    out = run_extended(RunSpec(preset=NetworkType.TREE, anchor=anchor, solver=SolverConfig(n_points=200)))
    net = out.final.net
    exact = steiner_junction(anchor, net.junction_axis)
    print(f"anchor {anchor}: {out.report.terminal} after {out.report.n_type0} collision(s)")
    print(f"  bridge on {net.junction_axis.name}, junction at {net.junction_distance:.6f}, "
          f"closed form {exact:.6f}, limit {out.report.limit}")
