"""Wavepacket confinement on a 128 x 128 grid.

Runs the Gaussian packet at (1, 0.5) with lambda = 1/3 and prints the
moments next to the ceilings.  The plain ceiling M(0) + 4|lambda| drops the
initial <K^2>, which is not zero for an off-axis packet, and is crossed.
The ceiling that follows from the Sigma form, M(0) + 2<K^2>(0) + 4|lambda|,
holds with room to spare.

Pass a shorter time as the first argument for a quick look (default 200).
"""
import sys
import time

import numpy as np

from ghostbound.grid import GridSpec, evolve_monitored, init_gaussian
from ghostbound.model import boost_corrected_ceiling, bound_ceiling, sigma_ceiling

t_final = float(sys.argv[1]) if len(sys.argv) > 1 else 200.0
lam = 1 / 3
grid = GridSpec(half_extent=16.0, points_per_axis=128)
psi0 = init_gaussian(grid, center=(1.0, 0.5), width=0.7)

t0 = time.perf_counter()
recs = evolve_monitored(psi0, 5e-3, t_final, lam, sample_every=200, tolerances=None)
print(f"{len(recs)} samples in {time.perf_counter() - t0:.0f} s")

first = recs[0]
r2 = np.array([r.r2 for r in recs])
m = np.array([r.moment for r in recs])
sig = np.array([r.sigma for r in recs])
e = np.array([r.e_mean for r in recs])

print(f"<r^2> in [{r2.min():.3f}, {r2.max():.3f}]")
print(f"max M {m.max():.3f}  plain ceiling {bound_ceiling(first.moment, lam):.3f}"
      f"  corrected {boost_corrected_ceiling(first.moment, first.k2, lam):.3f}")
print(f"max Sigma {sig.max():.4f}  ceiling {sigma_ceiling(first.sigma, lam):.4f}")
print(f"<E> drift {np.max(np.abs(e - e[0])):.2e}, norm drift {max(abs(r.norm - 1) for r in recs):.1e}")
print(f"largest boundary probability {max(r.boundary_prob for r in recs):.1e}")
