"""Gaussian densities: the shrinker value at extinction points.

The backward Gaussian density of a static line is 1 at every scale; the
shrinking circle has density sqrt(2 pi / e) = 1.5203... at its extinction
point; the half circle on a flat barrier reproduces the same value at its
extinction corner through the reflected truncated kernel.
"""

import numpy as np

from fbmcf.barrier import Line
from fbmcf.density import (density_at_point, gaussian_density,
                           monotonicity_report)
from fbmcf.flow import (circle_curve, half_circle_curve, run, segment_curve,
                        static_history)
from fbmcf.kernels import KernelParams

target = np.sqrt(2 * np.pi / np.e)
line = Line(normal=(0.0, -1.0), offset=0.0, scale_cap=1e8)
params = KernelParams(kappa=1e7, alpha=8.0, c1=2.0)

print("== static line ==")
hist = static_history(segment_curve((-12, 0), (12, 0), n=1200), -1.0, 0.1, 12)
for r in (0.4, 0.1):
    print(f"  theta(r={r}) = {gaussian_density(hist, (0, 0, 0), r):.9f}")

print("\n== shrinking circle, extinction point (target %.6f) ==" % target)
circ = run(circle_curve(radius=1.0, n=512), t_end=0.4995,
           h_target=2 * np.pi / 512, snapshot_dt=5e-4, vanish_length=0.02)
th, err = density_at_point(circ, None, (0, 0, 0.5),
                           radii=[0.6, 0.3, 0.15, 0.075])
print(f"  extrapolated theta = {th:.6f} +- {err:.1e}")

print("\n== half circle on the barrier, extinction corner ==")
half = run(half_circle_curve(radius=1.0, n=512), t_end=0.4995,
           h_target=np.pi / 512, snapshot_dt=5e-4, barrier=line,
           vanish_length=0.02)
rep = monotonicity_report(half, line, (0, 0, 0.5), params,
                          [0.5, 0.4, 0.3, 0.2, 0.1, 0.05])
print(f"  theta over r in [0.05, 0.5]: "
      f"[{rep.theta_values.min():.5f}, {rep.theta_values.max():.5f}]")
print(f"  fitted monotonicity constant A = {rep.fitted_A}")
print(f"  extrapolated theta at the corner = {rep.theta_at_point:.6f} "
      f"(target {target:.6f})")
