"""Spectrum of the 484-state truncated Fock Hamiltonian.

At lambda = 0 it is the integer ladder n_x - n_y with multiplicity 22 - |k|.
Switching on lambda = 1/3 splits each multiplet but leaves every level
within a quarter of its integer.  Inside the multiplets the splittings
repel (Wigner-Dyson); across the spectrum they do not (Poisson).
"""
from collections import Counter

import numpy as np

from ghostbound.fock import FockBasis, build_hamiltonian, diagonalize, sorted_shift, spacing_statistics

basis = FockBasis(21)
free = diagonalize(build_hamiltonian(basis, 0.0))
third = diagonalize(build_hamiltonian(basis, 1 / 3))

counts = Counter(int(k) for k in np.rint(free.eigenvalues))
print("lambda=0 multiplicities:", [counts[k] for k in range(-21, 22)])
print(f"lambda=1/3: max distance to an integer {third.max_label_offset:.3f}")
print(f"largest sorted-level shift from the ladder {np.max(np.abs(sorted_shift(free, third))):.3f}")

for mode in ("intra_multiplet", "global"):
    st = spacing_statistics(third, mode=mode)
    print(f"{mode:>15}: KS Poisson {st.ks_poisson:.3f}  KS Wigner-Dyson {st.ks_wigner:.3f}  -> {st.preferred}")
