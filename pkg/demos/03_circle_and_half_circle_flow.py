"""Front tracking: the shrinking circle law and its free-boundary half.

The closed unit circle satisfies R(t) = sqrt(1 - 2t); the upper half circle
with its endpoints sliding on the line y = 0 satisfies the same law, being
half of the doubled flow.
"""

import numpy as np

from fbmcf.barrier import Line
from fbmcf.flow import circle_curve, half_circle_curve, orthogonality_residual, run

line = Line(normal=(0.0, -1.0), offset=0.0)

print("evolving the 512-gon circle to t = 0.45 ...")
full = run(circle_curve(radius=1.0, n=512), t_end=0.45,
           h_target=2 * np.pi / 512, snapshot_dt=0.05)
print("evolving the 256-segment half circle on the barrier ...")
half = run(half_circle_curve(radius=1.0, n=256), t_end=0.45,
           h_target=np.pi / 256, snapshot_dt=0.05, barrier=line)

print(f"\n{'t':>6} {'R_exact':>9} {'R_circle':>10} {'R_half':>10} "
      f"{'orth resid':>11}")
for s_full, s_half in zip(full.snapshots, half.snapshots):
    t = s_full.time
    r_exact = np.sqrt(1 - 2 * t)
    r_full = np.linalg.norm(s_full.all_points(), axis=1).mean()
    r_half = np.linalg.norm(s_half.all_points(), axis=1).mean()
    print(f"{t:6.2f} {r_exact:9.6f} {r_full:10.6f} {r_half:10.6f} "
          f"{orthogonality_residual(s_half):11.2e}")

err = max(abs(np.linalg.norm(s.all_points(), axis=1).mean()
              - np.sqrt(1 - 2 * s.time)) for s in full.snapshots)
print(f"\nmax radius-law error (circle): {err:.2e}")
