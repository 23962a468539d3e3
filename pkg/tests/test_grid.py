import numpy as np
import pytest
from scipy import linalg

from ghostbound.grid import (
    STENCILS,
    SUBSTEPS,
    BoundViolation,
    GridSpec,
    MomentRecord,
    MonitorTolerances,
    Propagator,
    Wavefunction,
    _Axis,
    cn_step,
    evolve_monitored,
    init_gaussian,
    lambda_scan,
    load_checkpoint,
    measure_moments,
    save_checkpoint,
)

SMALL = GridSpec(8.0, 48)


def test_grid_spec():
    g = GridSpec(10.0, 101)
    assert g.spacing == pytest.approx(0.2)
    assert g.axis[0] == -10.0 and g.axis[-1] == 10.0
    with pytest.raises(ValueError):
        GridSpec(10.0, 15)
    with pytest.raises(ValueError):
        GridSpec(-1.0, 64)
    with pytest.raises(ValueError):
        GridSpec(10.0, 64, boundary="periodic")


def test_gaussian_origin_moments():
    psi = init_gaussian(GridSpec(12.0, 241), (0.0, 0.0), 1.0)
    m = measure_moments(psi, 0.0)
    assert m.x2 == pytest.approx(0.5, abs=1e-4)
    assert m.y2 == pytest.approx(0.5, abs=1e-4)


def test_gaussian_fig2_moments():
    psi = init_gaussian(GridSpec(), (1.0, 0.5), 0.7)
    assert abs(psi.norm() - 1) < 1e-12
    assert measure_moments(psi, 1 / 3).r2 == pytest.approx(1.74, abs=1e-3)


def test_gaussian_preconditions():
    with pytest.raises(ValueError):
        init_gaussian(GridSpec(10.0, 32), (0, 0), 0.5)
    with pytest.raises(ValueError):
        init_gaussian(GridSpec(), (20.0, 0.0), 0.7)


@pytest.mark.parametrize("stencil,grid", [("sinc", GridSpec()), ("fd4", GridSpec()), ("fd2", GridSpec(10.0, 256))])
def test_gaussian_momentum(stencil, grid):
    m = measure_moments(init_gaussian(grid, (0, 0), 1.0), 0.0, stencil)
    assert m.px2 == pytest.approx(0.5, abs=1e-3)
    assert m.py2 == pytest.approx(0.5, abs=1e-3)


def test_k_squared_closed_form():
    # exp(-r^2/2s^2) around (x0, y0): <K^2> = E[(2uv + y0 u + x0 v)^2] / s^4,
    # u, v ~ N(0, s^2/2) measured from the centre
    s, x0, y0 = 0.7, 1.0, 0.5
    var = s * s / 2
    exact = (4 * var * var + y0 * y0 * var + x0 * x0 * var) / s**4
    m = measure_moments(init_gaussian(GridSpec(), (x0, y0), s), 1 / 3)
    assert m.k2 == pytest.approx(exact, rel=1e-9)


def test_real_state_has_zero_mean_boost():
    psi = init_gaussian(GridSpec(), (1.0, 0.5), 0.7)
    ax = _Axis(psi.grid, "sinc")
    xx, yy = psi.grid.mesh()
    a = psi.amplitudes
    k_psi = -1j * (xx * ax.derivative(a.T).T + yy * ax.derivative(a))
    assert abs(np.vdot(a, k_psi)) * psi.grid.spacing**2 < 1e-12


@pytest.mark.parametrize("stencil", STENCILS)
@pytest.mark.parametrize("substep", SUBSTEPS)
def test_single_step_norm_and_reversal(stencil, substep):
    psi = init_gaussian(SMALL, (1.0, 0.5), 0.7)
    one = cn_step(psi, 5e-3, 1 / 3, stencil, substep)
    assert abs(one.norm() - psi.norm()) < 1e-13
    back = cn_step(one, -5e-3, 1 / 3, stencil, substep)
    assert np.max(np.abs(back.amplitudes - psi.amplitudes)) < 1e-10


@pytest.mark.parametrize("stencil", STENCILS)
def test_cayley_factor_matches_dense_oracle(stencil):
    ax = _Axis(SMALL, stencil)
    a = -ax.dense_hamiltonian()
    tau = 0.01
    eye = np.eye(SMALL.points_per_axis)
    u = linalg.solve(eye + 0.5j * tau * a, eye - 0.5j * tau * a)
    p = np.random.default_rng(0).normal(size=(SMALL.points_per_axis, 3)) + 0j
    np.testing.assert_allclose(ax.cayley(-1.0, tau)(p), u @ p, atol=1e-12)


@pytest.mark.parametrize("stencil", STENCILS)
def test_exact_factor_matches_expm(stencil):
    ax = _Axis(SMALL, stencil)
    u = linalg.expm(-0.3j * ax.dense_hamiltonian())
    p = np.random.default_rng(1).normal(size=(SMALL.points_per_axis, 2)) + 0j
    np.testing.assert_allclose(ax.exponential(1.0, 0.3)(p), u @ p, atol=1e-11)


def test_kinetic_matrices_consistent():
    # p^2/2 from the fd2 matrix equals ||D+ psi||^2 / 2 with the forward difference
    g = GridSpec(6.0, 40)
    ax = _Axis(g, "fd2")
    psi = np.random.default_rng(2).normal(size=40)
    psi[0] = psi[-1] = 0
    fwd = np.diff(np.concatenate([[0.0], psi, [0.0]])) / g.spacing
    assert psi @ ax.kinetic(psi) == pytest.approx(0.5 * fwd @ fwd)


def test_sinc_kinetic_spectrum():
    # sinc-DVR eigenvalues of (p^2 + x^2)/2 are the oscillator levels n + 1/2
    ax = _Axis(GridSpec(12.0, 128), "sinc")
    w = linalg.eigvalsh(ax.dense_hamiltonian())
    np.testing.assert_allclose(w[:20], np.arange(20) + 0.5, atol=1e-9)


def test_free_ground_state_stationary():
    g = GridSpec(10.0, 96)
    psi = init_gaussian(g, (0.0, 0.0), 1.0)
    recs = evolve_monitored(psi, 5e-3, 10.0, 0.0, sample_every=100, tolerances=None)
    x2 = np.array([r.x2 for r in recs])
    px2 = np.array([r.px2 for r in recs])
    assert np.ptp(x2) < 1e-6 and np.ptp(px2) < 1e-6


@pytest.mark.parametrize("substep", SUBSTEPS)
def test_free_moment_conserved(substep):
    g = GridSpec(10.0, 96)
    psi = init_gaussian(g, (1.0, -0.7), 0.8)
    recs = evolve_monitored(psi, 5e-3, 50.0, 0.0, sample_every=500, tolerances=None, substep=substep)
    mom = np.array([r.moment for r in recs])
    assert np.ptp(mom) < 1e-4


def test_monitor_raises_with_records():
    psi = init_gaussian(SMALL, (1.0, 0.5), 0.7)
    tol = MonitorTolerances(norm=1e-9, moment=None, sigma=None, energy=0.0, corrected_moment=None)
    with pytest.raises(BoundViolation) as info:
        evolve_monitored(psi, 5e-3, 1.0, 1 / 3, sample_every=20, tolerances=tol)
    assert len(info.value.records) == 2
    assert "<E> drift" in str(info.value)


def test_monitor_returns_final_and_samples():
    psi = init_gaussian(SMALL, (1.0, 0.5), 0.7)
    recs, final = evolve_monitored(psi, 5e-3, 1.0, 1 / 3, sample_every=30, tolerances=None, return_final=True)
    assert [round(r.time, 10) for r in recs] == [0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 1.0]
    direct = Propagator(SMALL, 5e-3, 1 / 3).step(psi, 200)
    np.testing.assert_array_equal(final.amplitudes, direct.amplitudes)
    assert final.time == pytest.approx(1.0)


def test_monitor_arguments():
    psi = init_gaussian(SMALL)
    with pytest.raises(ValueError):
        evolve_monitored(psi, 5e-3, 1.0, 0.1, sample_every=0)
    with pytest.raises(ValueError):
        Propagator(SMALL, 0.0, 0.1)
    with pytest.raises(ValueError):
        Propagator(SMALL, 1e-3, 0.1, substep="rk4")
    with pytest.raises(ValueError):
        Propagator(SMALL, 1e-3, 0.1, stencil="fd6")


def test_moment_record_derived_fields():
    r = MomentRecord(0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 1.0)
    assert r.r2 == 3.0 and r.moment == 10.0 and r.sigma == 10.0
    assert r.as_dict()["sigma"] == 10.0


def test_lambda_scan_small():
    out = lambda_scan([-0.5, 0.0, 0.5], SMALL, dt=1e-2, t_final=2.0, sample_every=20)
    assert [e.lam for e in out] == [-0.5, 0.0, 0.5]
    for e in out:
        assert e.max_r2 < e.ceiling and not e.violated
        assert e.ceiling == pytest.approx(out[1].ceiling + 4 * abs(e.lam))


def test_lambda_scan_guard():
    with pytest.raises(ValueError):
        lambda_scan([1.2], SMALL, t_final=0.1)


def test_checkpoint_roundtrip(tmp_path):
    psi = cn_step(init_gaussian(SMALL), 1e-2, 0.3)
    path = tmp_path / "psi.bin"
    save_checkpoint(psi, path)
    raw = path.read_bytes()
    assert raw[:4] == b"GHWF"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 48
    assert np.frombuffer(raw[16:24], "<f8")[0] == 8.0
    assert len(raw) == 24 + 16 * 48 * 48
    back = load_checkpoint(path)
    assert back.grid == SMALL
    np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)


def test_checkpoint_rejects_bad_files(tmp_path):
    psi = init_gaussian(SMALL)
    path = tmp_path / "psi.bin"
    save_checkpoint(psi, path)
    raw = path.read_bytes()
    for bad in (b"XXXX" + raw[4:], raw[:-8], raw[:10], raw[:4] + (2).to_bytes(4, "little") + raw[8:]):
        path.write_bytes(bad)
        with pytest.raises(ValueError):
            load_checkpoint(path)
