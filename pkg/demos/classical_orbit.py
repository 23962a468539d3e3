"""Classical orbit from (x, p_x, y, p_y) = (1, 0, 0.5, 0) at lambda = 1/3.

The positive and ghost sectors trade energy without running away.  H and C
drift only at the RK4 truncation level, and halving dt shows the order.
"""
import numpy as np

from ghostbound.ehrenfest import IntegratorConfig, integrate
from ghostbound.model import PhasePoint

start = PhasePoint(1.0, 0.0, 0.5, 0.0)
lam = 1 / 3

traj = integrate(start, IntegratorConfig(dt=0.02, t_final=500.0), lam, sample_every=50)
print(f"|dH| = {traj.drift_h():.3e}   |dC| = {traj.drift_c():.3e}")
print(f"x^2+y^2+p^2 stays in [{traj.moment().min():.3f}, {traj.moment().max():.3f}]")

# %% order of accuracy
prev = None
for dt in (0.04, 0.02, 0.01, 0.005):
    tr = integrate(start, IntegratorConfig(dt=dt, t_final=500.0), lam, sample_every=100)
    cur = np.array([tr.drift_h(), tr.drift_c()])
    ratio = "" if prev is None else f"  ratios H {prev[0] / cur[0]:.1f}  C {prev[1] / cur[1]:.1f}"
    print(f"dt={dt:<6} dH {cur[0]:.2e}  dC {cur[1]:.2e}{ratio}")
    prev = cur
# H follows h^4 (ratio 16); C picks up a faster-decaying term and sits near 25-30.
