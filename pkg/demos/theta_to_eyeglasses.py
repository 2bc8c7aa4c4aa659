"""A theta network through its junction collision.

The two junctions of the theta network meet at the origin while both
regions still have positive area.  The run restarts from the expander,
continues as an eyeglasses network and ends when the loops vanish.
"""
import math

from netflow.geometry import NetworkType
from netflow.flow import SolverConfig
from netflow.runner import RunSpec, run_extended

spec = RunSpec(preset=NetworkType.THETA, solver=SolverConfig(n_points=200),
               line_angle=math.pi / 4, extra_angles=(math.pi / 3.5,))
out = run_extended(spec)
rep = out.report

for ev in out.log.events:
    after = ev.net_type_after.value if ev.net_type_after else "-"
    print(f"t = {ev.t:.6f}  {ev.kind.value:<10} {ev.net_type_before.value} -> {after}")

print("\narea loss per phase (measured / expected)")
for r in rep.area_rates:
    print(f"  {r.net_type:<11} {r.rate:.4f} / {r.expected:.4f}  ({r.rel_error:.2%})")

for fit in rep.expander_fits:
    print(f"\njunction after the restart: d ~ {fit.c:.3f} (t - t_k)^{fit.exponent:.3f}")

for c in rep.certificates:
    print(f"i(t) at angle {c.angle:.3f}: {'monotone' if c.passed else 'NOT monotone'}, "
          f"{c.n_samples} samples")
