"""Does C really commute with H?

Three independent looks: the operator coefficients at random points, the
classical Poisson bracket, and the matrix commutator in a truncated
oscillator basis.
"""
import numpy as np

from ghostbound.commutator import coefficient_triple, fock_commutator_residual, poisson_bracket_ch

rng = np.random.default_rng(0)

# %% operator coefficients on [-10, 10]^2
x, y = rng.uniform(-10, 10, size=(2, 100_000))
for lam in (1 / 3, -0.8):
    tri = coefficient_triple(x, y, lam)
    print(f"lambda={lam:+.3f}  max |A| = {tri.max_abs():.2e}")

# %% classical bracket
z = rng.uniform(-5, 5, size=(4, 10_000))
print(f"max |{{C,H}}| = {np.max(np.abs(poisson_bracket_ch(z, 1 / 3))):.2e}")

# %% Fock basis: the residual is set by quadrature, not by the truncation
for q in (96, 128, 160):
    print(f"quad order {q}: interior residual {fock_commutator_residual(21, 1 / 3, 6, quad_order=q):.2e}")
