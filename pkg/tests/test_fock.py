import numpy as np
import pytest
from numpy.polynomial import hermite as H
from scipy.integrate import trapezoid

from ghostbound.fock import (
    FockBasis,
    FockOperator,
    build_c_operator,
    build_hamiltonian,
    build_potential_blocks,
    c_operator_parts,
    diagonalize,
    eigenstate_density,
    hermite_functions,
    poisson_cdf,
    sorted_shift,
    spacing_statistics,
    wigner_dyson_cdf,
)


@pytest.fixture(scope="module")
def spec_free():
    b = FockBasis(21)
    return diagonalize(build_hamiltonian(b, 0.0))


@pytest.fixture(scope="module")
def spec_third():
    b = FockBasis(21)
    return diagonalize(build_hamiltonian(b, 1 / 3))


def test_basis_indexing():
    b = FockBasis(3)
    assert b.size == 16
    assert b.index(2, 1) == 9
    assert b.quantum_numbers(9) == (2, 1)
    with pytest.raises(IndexError):
        b.index(4, 0)
    with pytest.raises(ValueError):
        b.interior_mask(-1)


def test_hermite_values():
    h = hermite_functions(1, [0.0])
    assert h[0, 0] == pytest.approx(np.pi ** -0.25, rel=1e-15)
    assert h[1, 0] == 0.0


def test_hermite_against_polynomial_form():
    # independent oracle: physicists' Hermite polynomials with explicit norm
    from math import factorial

    x = np.linspace(-6, 6, 41)
    h = hermite_functions(10, x)
    for n in range(11):
        c = np.zeros(n + 1)
        c[n] = 1
        ref = H.hermval(x, c) * np.exp(-x * x / 2) / np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))
        np.testing.assert_allclose(h[n], ref, atol=1e-12)


def test_hermite_orthonormal():
    t, w = H.hermgauss(200)
    h = hermite_functions(21, t) * np.sqrt(w * np.exp(t * t))
    np.testing.assert_allclose(h @ h.T, np.eye(22), atol=1e-10)


def test_free_ladder(spec_free):
    ev = spec_free.eigenvalues
    assert ev.size == 484
    assert np.array_equal(ev, np.rint(ev))
    mult = spec_free.multiplicities()
    assert set(mult) == set(range(-21, 22))
    assert all(mult[k] == 22 - abs(k) for k in mult)


def test_quadrature_convergence_ground_entry():
    b = FockBasis(21)
    v64 = build_potential_blocks(b, 1 / 3, 64)[0][0, 0]
    v96 = build_potential_blocks(b, 1 / 3, 96)[0][0, 0]
    assert abs(v64 - v96) < 1e-8


def test_quadrature_convergence_all_entries():
    b = FockBasis(21)
    a = build_hamiltonian(b, 1 / 3, 96).entries
    c = build_hamiltonian(b, 1 / 3, 128).entries
    assert np.max(np.abs(a - c)) < 1e-8


def test_quadrature_order_guard():
    with pytest.raises(ValueError):
        build_hamiltonian(FockBasis(21), 1 / 3, 61)


def test_parity_selection():
    b = FockBasis(9)
    v = build_potential_blocks(b, 1 / 3, 64)[0]
    dx = (b.n_x[:, None] - b.n_x[None, :]) % 2
    dy = (b.n_y[:, None] - b.n_y[None, :]) % 2
    assert np.max(np.abs(v[(dx == 1) | (dy == 1)])) < 1e-12
    assert np.max(np.abs(v[(dx == 0) & (dy == 0)])) > 1e-3


def test_symmetric_operators():
    b = FockBasis(8)
    assert build_hamiltonian(b, 1 / 3, 64).asymmetry() < 1e-14
    assert build_c_operator(b, 1 / 3, 64).asymmetry() < 1e-13


def test_oscillator_part_ground_entry():
    b = FockBasis(4)
    k2 = c_operator_parts(b) - np.diag(2.0 * b.n_x + 1.0)
    assert (c_operator_parts(b) - k2)[0, 0] == 1.0


def _dh(n_max, x):
    # derivative of normalized Hermite functions from the polynomial form
    from math import factorial

    out = []
    for n in range(n_max + 1):
        c = np.zeros(n + 1)
        c[n] = 1
        norm = 1 / np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))
        out.append(norm * (H.hermval(x, H.hermder(c)) - x * H.hermval(x, c)) * np.exp(-x * x / 2))
    return np.array(out)


def test_k_squared_against_position_grid():
    n_max = 6
    b = FockBasis(n_max)
    k2 = c_operator_parts(b) - np.diag(2.0 * b.n_x + 1.0)
    x = np.linspace(-12, 12, 1601)
    w = x[1] - x[0]
    h, dh = hermite_functions(n_max, x), _dh(n_max, x)
    # (x d_y + y d_x) applied to h_a(x) h_b(y), for every basis state
    kpsi = (
        np.einsum("i,ai,bj->abij", x, h, dh) + np.einsum("j,ai,bj->abij", x, dh, h)
    ).reshape(b.size, -1)
    grid = kpsi @ kpsi.T * w * w
    keep = b.interior_mask(n_max - 2)
    np.testing.assert_allclose(k2[np.ix_(keep, keep)], grid[np.ix_(keep, keep)], atol=1e-8)
    # the one-level-higher assembly makes even boundary entries exact
    np.testing.assert_allclose(k2, grid, atol=1e-8)


def test_c_commutes_with_free_hamiltonian_in_interior():
    b = FockBasis(21)
    c = build_c_operator(b, 0.0).entries
    h0 = build_hamiltonian(b, 0.0).entries
    r = c @ h0 - h0 @ c
    assert np.max(np.abs(r)) == 0.0


def test_diagonalize_two_by_two():
    # the basis only supplies bookkeeping; the solver sees the bare matrix
    r = diagonalize(FockOperator(FockBasis(0), np.array([[0.0, 1.0], [1.0, 0.0]])))
    np.testing.assert_allclose(r.eigenvalues, [-1.0, 1.0], atol=1e-15)
    assert list(r.labels) == [-1, 1]


def test_interacting_multiplets(spec_third):
    assert spec_third.eigenvalues.size == 484
    assert spec_third.labels_reliable
    assert spec_third.max_label_offset < 0.25
    mult = spec_third.multiplicities()
    assert all(mult[k] == 22 - abs(k) for k in range(-21, 22))
    assert any(np.any(g > 1e-6) for g in spec_third.intra_splittings.values())


def test_sorted_shift_is_large(spec_free, spec_third):
    # shifts of the sorted spectra are O(0.1), well above 1e-4
    shift = np.abs(sorted_shift(spec_free, spec_third))
    assert 0.05 < shift.max() < 0.25


def test_cdfs():
    s = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(poisson_cdf(s), 1 - np.exp(-s))
    np.testing.assert_allclose(wigner_dyson_cdf(s), 1 - np.exp(-np.pi * s * s / 4))
    # unit mean of the GOE surmise
    t = np.linspace(0, 12, 200001)
    pdf = np.pi * t / 2 * np.exp(-np.pi * t * t / 4)
    assert trapezoid(t * pdf, t) == pytest.approx(1.0, abs=1e-8)


def _goe_levels(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n // 2):
        a = rng.normal(size=2)
        off = rng.normal() / np.sqrt(2)
        e = np.linalg.eigvalsh([[a[0], off], [off, a[1]]])
        out.append(e[1] - e[0])
    s = np.array(out)
    return np.concatenate([[0.0], np.cumsum(s / s.mean())])


def test_synthetic_poisson():
    rng = np.random.default_rng(4)
    levels = np.cumsum(rng.exponential(size=10_000))
    st = spacing_statistics(levels, mode="global", degree=1)
    assert st.ks_poisson < 0.02
    assert st.ks_wigner > 0.2
    assert st.ks_wigner - st.ks_poisson >= 0.15


def test_synthetic_goe():
    levels = _goe_levels(20_000, 8)
    st = spacing_statistics(levels, mode="global", degree=1)
    assert st.preferred == "wigner"
    assert st.ks_poisson - st.ks_wigner >= 0.15


def test_histogram_normalized(spec_third):
    st = spacing_statistics(spec_third, mode="intra_multiplet", s_max=100.0, bins=400)
    assert np.mean(st.unfolded_spacings) == pytest.approx(1.0)
    assert np.sum(st.density * np.diff(st.bin_edges)) == pytest.approx(1.0)


def test_interacting_spacing_preferences(spec_third):
    intra = spacing_statistics(spec_third, mode="intra_multiplet")
    glob = spacing_statistics(spec_third, mode="global")
    assert intra.ks_wigner < intra.ks_poisson
    assert glob.ks_poisson < glob.ks_wigner


def test_spacing_errors(spec_free):
    with pytest.raises(TypeError):
        spacing_statistics(np.arange(10.0), mode="intra_multiplet")
    with pytest.raises(ValueError):
        spacing_statistics(spec_free, mode="bogus")


def test_free_ground_density(spec_free):
    x = np.linspace(-4, 4, 81)
    rho = eigenstate_density(spec_free, (0, 0), x, x)
    i = np.unravel_index(np.argmax(rho), rho.shape)
    assert (x[i[0]], x[i[1]]) == (0.0, 0.0)
    np.testing.assert_allclose(rho, np.outer(np.exp(-x * x), np.exp(-x * x)) / np.pi, atol=1e-12)


def test_free_first_excited_density_node(spec_free):
    x = np.linspace(-4, 4, 81)
    rho = eigenstate_density(spec_free, (1, 0), x, x)
    assert np.max(rho[40, :]) < 1e-20
    assert np.max(rho) > 0.1


@pytest.mark.parametrize("ref", [(0, 0), (1, 0), (0, 1)])
def test_interacting_densities_localized(spec_third, ref):
    x = np.linspace(-6, 6, 121)
    rho = eigenstate_density(spec_third, ref, x, x)
    w = (x[1] - x[0]) ** 2
    assert np.sum(rho) * w == pytest.approx(1.0, abs=1e-3)
    r = np.hypot(*np.meshgrid(x, x, indexing="ij"))
    assert np.sum(rho[r < 3]) * w > 0.9
