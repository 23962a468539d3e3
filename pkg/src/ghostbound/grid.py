"""Schroedinger-picture propagation on a uniform 2-D grid.

One time step is the Strang splitting

    V/2  ->  H_x/2  ->  H_y  ->  H_x/2  ->  V/2

with ``H_x = (p_x^2 + x^2)/2`` and ``H_y = -(p_y^2 + y^2)/2``.  The
interaction is a diagonal phase.  Each oscillator factor acts along one axis
with a real symmetric matrix ``A`` and is exactly unitary:

``substep="exact"``
    ``exp(-i tau A)`` from the eigendecomposition of ``A``.
``substep="cayley"``
    the Crank-Nicolson factor ``(1 + i tau A/2)^{-1} (1 - i tau A/2)``.  Its
    phase error ``tau^3 w^3 / 12`` per step grows with the oscillator level
    ``w`` and spoils conservation of ``<E>`` once the packet spreads.

Three spatial discretizations of ``p^2`` are available:

``"fd2"``
    3-point Laplacian; Cayley factors are tridiagonal solves.
``"fd4"``
    compact fourth-order (Numerov) Laplacian ``-(1 + d^2/12)^{-1} d^2 / h^2``;
    still tridiagonal, since ``(M + i tau (T + M W)/2)`` is tridiagonal.
``"sinc"``
    Colbert-Miller sinc-DVR kinetic matrix (dense, spectrally accurate).

The second moments are measured with the *same* kinetic matrix the
propagator uses.  Points outside ``[-L, L]`` carry zero amplitude
(Dirichlet).
"""
from __future__ import annotations

import dataclasses
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .model import bound_ceiling, boost_corrected_ceiling, potential, sigma_ceiling

log = logging.getLogger(__name__)

__all__ = [
    "STENCILS",
    "SUBSTEPS",
    "GridSpec",
    "Wavefunction",
    "MomentRecord",
    "BoundViolation",
    "MonitorTolerances",
    "Propagator",
    "init_gaussian",
    "cn_step",
    "measure_moments",
    "evolve_monitored",
    "lambda_scan",
    "ScanEntry",
    "save_checkpoint",
    "load_checkpoint",
]

STENCILS = ("fd2", "fd4", "sinc")
SUBSTEPS = ("exact", "cayley")
DEFAULT_STENCIL = "sinc"
DEFAULT_SUBSTEP = "exact"


@dataclass(frozen=True)
class GridSpec:
    """``points_per_axis`` nodes on ``[-L, L]`` per axis, endpoints included.

    The default box ``L = 16`` keeps the wall far enough out that it does
    not feed into ``<E>``; at ``L = 10`` a packet of the default kind
    reaches the wall within ``t ~ 100``.
    """

    half_extent: float = 16.0
    points_per_axis: int = 128
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.points_per_axis < 16:
            raise ValueError("points_per_axis must be >= 16")
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")
        if self.boundary != "dirichlet":
            raise ValueError("only dirichlet boundaries are supported")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / (self.points_per_axis - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_extent, self.half_extent, self.points_per_axis)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis, self.axis, indexing="ij")


@dataclass
class Wavefunction:
    """Amplitudes ``psi[i, j] = psi(x_i, y_j)``."""

    grid: GridSpec
    amplitudes: np.ndarray
    time: float = 0.0

    def norm(self) -> float:
        h = self.grid.spacing
        return float(np.sum(np.abs(self.amplitudes) ** 2) * h * h)

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes.copy(), self.time)


@dataclass(frozen=True)
class MomentRecord:
    time: float
    x2: float
    y2: float
    px2: float
    py2: float
    k2: float
    h_mean: float
    e_mean: float
    norm: float
    boundary_prob: float = 0.0

    @property
    def r2(self) -> float:
        return self.x2 + self.y2

    @property
    def moment(self) -> float:
        """``<x^2 + y^2 + p_x^2 + p_y^2>``."""
        return self.x2 + self.y2 + self.px2 + self.py2

    @property
    def sigma(self) -> float:
        """``<K^2 + (p_x^2 + x^2)/2 + (p_y^2 + y^2)/2>``."""
        return self.k2 + 0.5 * self.moment

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.update(r2=self.r2, moment=self.moment, sigma=self.sigma)
        return d


class BoundViolation(RuntimeError):
    """A monitored bound failed beyond tolerance; ``records`` holds the run so far."""

    def __init__(self, message: str, records: list[MomentRecord]):
        super().__init__(message)
        self.records = records


# ---------------------------------------------------------------------------
# 1-D operators


def _sinc_kinetic(n: int, h: float) -> np.ndarray:
    """Colbert-Miller ``p^2`` matrix on an equally spaced grid."""
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        t = np.where(diff == 0, np.pi**2 / 3.0, 2.0 * (-1.0) ** diff / np.where(diff == 0, 1, diff) ** 2)
    return t / (h * h)


def _sinc_derivative(n: int, h: float) -> np.ndarray:
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    safe = np.where(diff == 0, 1, diff)
    return np.where(diff == 0, 0.0, (-1.0) ** diff / safe) / h


class _Axis:
    """Kinetic energy ``p^2/2``, first derivative and Cayley factors along one axis."""

    def __init__(self, grid: GridSpec, stencil: str):
        if stencil not in STENCILS:
            raise ValueError(f"unknown stencil {stencil!r}; choose from {STENCILS}")
        self.stencil = stencil
        self.n = n = grid.points_per_axis
        self.h = h = grid.spacing
        self.x = grid.axis
        ones = np.ones(n)
        # T = -d^2/(2h^2) as (sub, diag, super); M is the compact mass matrix
        self._t = (-0.5 / h**2 * ones[:-1], 1.0 / h**2 * ones, -0.5 / h**2 * ones[:-1])
        if stencil == "fd4":
            self._m = (ones[:-1] / 12.0, ones * (10.0 / 12.0), ones[:-1] / 12.0)
            self._m_factor = _tri_factor(*self._m)
        else:
            self._m = (0.0 * ones[:-1], ones, 0.0 * ones[:-1])
            self._m_factor = None
        if stencil == "sinc":
            self._t_dense = _sinc_kinetic(n, h) * 0.5
            self._d_dense = _sinc_derivative(n, h)

    # -- application helpers; `p` has this axis first --
    def kinetic(self, p: np.ndarray) -> np.ndarray:
        if self.stencil == "sinc":
            return self._t_dense @ p
        tp = _tri_mul(*self._t, p)
        if self._m_factor is not None:
            tp = _tri_solve(self._m_factor, tp)
        return tp

    def derivative(self, p: np.ndarray) -> np.ndarray:
        if self.stencil == "sinc":
            return self._d_dense @ p
        q = np.zeros((p.shape[0] + 4,) + p.shape[1:], dtype=p.dtype)
        q[2:-2] = p
        h = self.h
        if self.stencil == "fd4":
            return (q[:-4] - 8.0 * q[1:-3] + 8.0 * q[3:-1] - q[4:]) / (12.0 * h)
        return (q[3:-1] - q[1:-3]) / (2.0 * h)

    def dense_hamiltonian(self) -> np.ndarray:
        """``(p^2 + x^2)/2`` as a dense symmetric matrix."""
        if self.stencil == "sinc":
            t = self._t_dense
        else:
            t = np.diag(self._t[1]) + np.diag(self._t[0], -1) + np.diag(self._t[2], 1)
            if self.stencil == "fd4":
                m = np.diag(self._m[1]) + np.diag(self._m[0], -1) + np.diag(self._m[2], 1)
                t = linalg.solve(m, t, assume_a="sym")
                t = 0.5 * (t + t.T)  # M and T commute; remove round-off asymmetry
        return t + np.diag(0.5 * self.x * self.x)

    def exponential(self, sign: float, tau: float) -> Callable[[np.ndarray], np.ndarray]:
        """Return ``p -> exp(-i tau A) p`` for ``A = sign (p^2 + x^2)/2``."""
        w, q = linalg.eigh(self.dense_hamiltonian())
        u = (q * np.exp(-1j * sign * tau * w)) @ q.T
        return lambda p: u @ p

    def cayley(self, sign: float, tau: float) -> Callable[[np.ndarray], np.ndarray]:
        """Return ``p -> (1 + i tau A/2)^{-1}(1 - i tau A/2) p`` for ``A = sign (p^2 + x^2)/2``."""
        w = 0.5 * self.x * self.x
        if self.stencil == "sinc":
            a = sign * (self._t_dense + np.diag(w))
            eye = np.eye(self.n)
            u = linalg.solve(eye + 0.5j * tau * a, eye - 0.5j * tau * a)
            return lambda p: u @ p
        # (M + i tau s (T + M W)/2) psi' = (M - i tau s (T + M W)/2) psi
        ml, md, mu = self._m
        tl, td, tu = self._t
        al = sign * (tl + ml * w[:-1])
        ad = sign * (td + md * w)
        au = sign * (tu + mu * w[1:])
        plus = (ml + 0.5j * tau * al, md + 0.5j * tau * ad, mu + 0.5j * tau * au)
        minus = (ml - 0.5j * tau * al, md - 0.5j * tau * ad, mu - 0.5j * tau * au)
        factor = _tri_factor(*plus)
        return lambda p: _tri_solve(factor, _tri_mul(*minus, p))


def _tri_factor(dl, d, du):
    dl, d, du, du2, ipiv, info = lapack.zgttrf(
        np.asarray(dl, complex), np.asarray(d, complex), np.asarray(du, complex)
    )
    if info != 0:
        raise linalg.LinAlgError(f"tridiagonal factorization failed (info={info})")
    return dl, d, du, du2, ipiv


def _tri_solve(factor, b: np.ndarray) -> np.ndarray:
    x, info = lapack.zgttrs(*factor, b)
    if info != 0:
        raise linalg.LinAlgError(f"tridiagonal solve failed (info={info})")
    return x


def _tri_mul(dl, d, du, p: np.ndarray) -> np.ndarray:
    shape = (-1,) + (1,) * (p.ndim - 1)
    r = np.reshape(d, shape) * p
    r[1:] += np.reshape(dl, shape) * p[:-1]
    r[:-1] += np.reshape(du, shape) * p[1:]
    return r


# ---------------------------------------------------------------------------
# state preparation and stepping


def init_gaussian(grid: GridSpec, center: Sequence[float] = (1.0, 0.5), width: float = 0.7) -> Wavefunction:
    """Real Gaussian ``exp(-[(x-x0)^2 + (y-y0)^2] / (2 width^2))``, normalized on the grid.

    Per-axis position variance is ``width^2 / 2``; mean momentum is zero.
    """
    x0, y0 = (float(c) for c in center)
    L = grid.half_extent
    if not (abs(x0) < L and abs(y0) < L):
        raise ValueError("Gaussian center must lie inside the domain")
    if width <= 2.0 * grid.spacing:
        raise ValueError(f"width {width} under-resolved by spacing {grid.spacing:.4g}")
    xx, yy = grid.mesh()
    amp = np.exp(-((xx - x0) ** 2 + (yy - y0) ** 2) / (2.0 * width**2)).astype(complex)
    psi = Wavefunction(grid, amp, 0.0)
    psi.amplitudes /= np.sqrt(psi.norm())
    return psi


class Propagator:
    """Cached Strang-split stepper for fixed grid, ``dt``, coupling and discretization."""

    def __init__(
        self,
        grid: GridSpec,
        dt: float,
        lam: float,
        stencil: str = DEFAULT_STENCIL,
        substep: str = DEFAULT_SUBSTEP,
    ):
        if dt == 0 or not np.isfinite(dt):
            raise ValueError("dt must be finite and non-zero")
        if substep not in SUBSTEPS:
            raise ValueError(f"unknown substep {substep!r}; choose from {SUBSTEPS}")
        self.grid = grid
        self.dt = float(dt)
        self.lam = float(lam)
        self.stencil = stencil
        self.substep = substep
        self.axis = _Axis(grid, stencil)
        xx, yy = grid.mesh()
        self.potential = potential(xx, yy, lam)
        self._half_phase = np.exp(-0.5j * dt * self.potential)
        factor = self.axis.exponential if substep == "exact" else self.axis.cayley
        self._ux = factor(+1.0, 0.5 * dt)
        self._uy = factor(-1.0, dt)

    def step_array(self, a: np.ndarray) -> np.ndarray:
        a = self._half_phase * a
        a = self._ux(a)
        a = self._uy(a.T).T
        a = self._ux(a)
        return self._half_phase * a

    def step(self, psi: Wavefunction, n_steps: int = 1) -> Wavefunction:
        a = psi.amplitudes
        for _ in range(n_steps):
            a = self.step_array(a)
        return Wavefunction(psi.grid, a, psi.time + n_steps * self.dt)


def cn_step(
    psi: Wavefunction, dt: float, lam: float, stencil: str = DEFAULT_STENCIL, substep: str = DEFAULT_SUBSTEP
) -> Wavefunction:
    """One Strang-split step.  Negative ``dt`` runs the exact inverse step."""
    return Propagator(psi.grid, dt, lam, stencil, substep).step(psi)


# ---------------------------------------------------------------------------
# observables


def measure_moments(
    psi: Wavefunction,
    lam: float,
    stencil: str = DEFAULT_STENCIL,
    axis: _Axis | None = None,
    pot: np.ndarray | None = None,
) -> MomentRecord:
    """Second moments, ``<K^2>``, ``<H>`` and ``<E>`` of a grid state.

    ``<p^2> = 2 <psi, T psi>`` with the propagator's own kinetic matrix
    ``T`` (positive semi-definite, so the moment is non-negative).
    ``<K^2> = ||(x D_y + y D_x) psi||^2`` with the stencil's first-derivative
    matrix ``D``.
    """
    grid = psi.grid
    if axis is None:
        axis = _Axis(grid, stencil)
    xx, yy = grid.mesh()
    if pot is None:
        pot = potential(xx, yy, lam)
    a = psi.amplitudes
    dA = grid.spacing**2
    rho = np.abs(a) ** 2 * dA
    norm = float(rho.sum())
    x2 = float(np.sum(rho * xx * xx))
    y2 = float(np.sum(rho * yy * yy))
    px2 = 2.0 * float(np.real(np.vdot(a, axis.kinetic(a)))) * dA
    py2 = 2.0 * float(np.real(np.vdot(a.T, axis.kinetic(a.T)))) * dA
    k_psi = xx * axis.derivative(a.T).T + yy * axis.derivative(a)
    k2 = float(np.sum(np.abs(k_psi) ** 2) * dA)
    v_mean = float(np.sum(rho * pot))
    w_mean = float(np.sum(rho * (yy * yy - xx * xx) * pot))
    h_mean = 0.5 * (px2 + x2) - 0.5 * (py2 + y2) + v_mean
    e_mean = k2 + 0.5 * (px2 + x2) + 0.5 * (py2 + y2) + w_mean
    edge = float(rho[0, :].sum() + rho[-1, :].sum() + rho[1:-1, 0].sum() + rho[1:-1, -1].sum())
    return MomentRecord(psi.time, x2, y2, px2, py2, k2, h_mean, e_mean, norm, edge)


@dataclass(frozen=True)
class MonitorTolerances:
    """Slack for on-the-fly checks; ``None`` disables a check."""

    norm: float | None = 1e-9
    moment: float | None = 0.05
    sigma: float | None = 0.05
    energy: float | None = 0.02
    corrected_moment: float | None = 0.05


def evolve_monitored(
    psi0: Wavefunction,
    dt: float,
    t_final: float,
    lam: float,
    sample_every: int = 100,
    stencil: str = DEFAULT_STENCIL,
    tolerances: MonitorTolerances | None = MonitorTolerances(),
    callback: Callable[[MomentRecord], None] | None = None,
    return_final: bool = False,
    substep: str = DEFAULT_SUBSTEP,
):
    """Propagate to ``t_final`` sampling moments every ``sample_every`` steps.

    Checks (each against the record at ``t = 0``, any of them can be
    switched off by setting its tolerance to ``None``): norm drift, the
    plain ceiling ``M(0) + 4|lam|`` on ``M = <x^2+y^2+p_x^2+p_y^2>``, the
    ``Sigma`` ceiling ``Sigma(0) + 2|lam|``, the ceiling that actually
    follows from it, ``M(0) + 2<K^2>(0) + 4|lam|``, and ``<E>``
    conservation.  The plain ceiling assumes ``<K^2>(0) = 0`` and is
    exceeded by packets with ``<K^2>(0) > 0``.  A failed check raises
    :class:`BoundViolation` carrying every record so far.  Pass
    ``tolerances=None`` to only record.

    Returns the list of records, or ``(records, final_wavefunction)`` when
    ``return_final`` is set.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ValueError("t_final must cover at least one step")
    prop = Propagator(psi0.grid, dt, lam, stencil, substep)
    first = measure_moments(psi0, lam, axis=prop.axis, pot=prop.potential)
    records = [first]
    if callback:
        callback(first)
    ceilings = {
        "moment": bound_ceiling(first.moment, lam),
        "sigma": sigma_ceiling(first.sigma, lam),
        "corrected_moment": boost_corrected_ceiling(first.moment, first.k2, lam),
    }
    a = psi0.amplitudes
    t0 = psi0.time
    for i in range(1, n_steps + 1):
        a = prop.step_array(a)
        if i % sample_every and i != n_steps:
            continue
        if not np.all(np.isfinite(a)):
            raise BoundViolation(f"non-finite amplitudes at t={t0 + i * dt:.6g}", records)
        rec = measure_moments(Wavefunction(psi0.grid, a, t0 + i * dt), lam, axis=prop.axis, pot=prop.potential)
        records.append(rec)
        if callback:
            callback(rec)
        if tolerances is not None:
            _check_record(rec, first, ceilings, tolerances, records)
    if return_final:
        return records, Wavefunction(psi0.grid, a, t0 + n_steps * dt)
    return records


def _check_record(rec, first, ceilings, tol: MonitorTolerances, records) -> None:
    problems = []
    if tol.norm is not None and abs(rec.norm - first.norm) > tol.norm:
        problems.append(f"norm drift {abs(rec.norm - first.norm):.3e}")
    if tol.moment is not None and rec.moment > ceilings["moment"] + tol.moment:
        problems.append(f"moment {rec.moment:.6f} > ceiling {ceilings['moment']:.6f}")
    if tol.corrected_moment is not None and rec.moment > ceilings["corrected_moment"] + tol.corrected_moment:
        problems.append(f"moment {rec.moment:.6f} > K^2-corrected ceiling {ceilings['corrected_moment']:.6f}")
    if tol.sigma is not None and rec.sigma > ceilings["sigma"] + tol.sigma:
        problems.append(f"sigma {rec.sigma:.6f} > ceiling {ceilings['sigma']:.6f}")
    if tol.energy is not None and abs(rec.e_mean - first.e_mean) > tol.energy:
        problems.append(f"<E> drift {abs(rec.e_mean - first.e_mean):.3e}")
    if problems:
        raise BoundViolation(f"t={rec.time:.6g}: " + "; ".join(problems), records)


@dataclass(frozen=True)
class ScanEntry:
    lam: float
    max_r2: float
    ceiling: float
    max_moment: float
    corrected_ceiling: float
    max_sigma: float
    sigma_ceiling: float
    max_energy_drift: float

    @property
    def violated(self) -> bool:
        """True when the maximum of ``<x^2 + y^2>`` reaches the ``M(0) + 4|lam|`` ceiling."""
        return self.max_r2 >= self.ceiling


def lambda_scan(
    lambdas: Iterable[float],
    grid: GridSpec = GridSpec(),
    dt: float = 5e-3,
    t_final: float = 200.0,
    center: Sequence[float] = (1.0, 0.5),
    width: float = 0.7,
    sample_every: int = 100,
    stencil: str = DEFAULT_STENCIL,
    max_abs_lambda: float = 1.0,
    tolerances: MonitorTolerances | None = None,
    workers: int = 1,
    substep: str = DEFAULT_SUBSTEP,
) -> list[ScanEntry]:
    """Run :func:`evolve_monitored` for each coupling from the same initial state."""
    lambdas = [float(l) for l in lambdas]
    for lam in lambdas:
        if abs(lam) > max_abs_lambda:
            raise ValueError(f"|lambda|={abs(lam)} exceeds guard {max_abs_lambda}")
    args = [(lam, grid, dt, t_final, tuple(center), width, sample_every, stencil, tolerances, substep)
            for lam in lambdas]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_one, args))
    return [_scan_one(a) for a in args]


def _scan_one(args) -> ScanEntry:
    lam, grid, dt, t_final, center, width, sample_every, stencil, tolerances, substep = args
    psi0 = init_gaussian(grid, center, width)
    recs = evolve_monitored(psi0, dt, t_final, lam, sample_every, stencil, tolerances, substep=substep)
    first = recs[0]
    log.info("lambda=%+.3f done: max r2 %.4f", lam, max(r.r2 for r in recs))
    return ScanEntry(
        lam=lam,
        max_r2=max(r.r2 for r in recs),
        ceiling=bound_ceiling(first.moment, lam),
        max_moment=max(r.moment for r in recs),
        corrected_ceiling=boost_corrected_ceiling(first.moment, first.k2, lam),
        max_sigma=max(r.sigma for r in recs),
        sigma_ceiling=sigma_ceiling(first.sigma, lam),
        max_energy_drift=max(abs(r.e_mean - first.e_mean) for r in recs),
    )


# ---------------------------------------------------------------------------
# checkpoint files

_MAGIC = b"GHWF"
_VERSION = 1
# 16-byte header (magic, version, N, reserved) followed by L as f64
_HEADER = struct.Struct("<4sIII d")


def save_checkpoint(psi: Wavefunction, path: str | Path) -> None:
    """Write a wavefunction as a little-endian binary file.

    ======  =======  ==========================================
    offset  type     content
    ======  =======  ==========================================
    0       4 bytes  magic ``GHWF``
    4       u32      format version (1)
    8       u32      points per axis ``N``
    12      u32      reserved, zero
    16      f64      half extent ``L``
    24      c128     ``N*N`` amplitudes, row-major, ``psi[i, j] = psi(x_i, y_j)``
    ======  =======  ==========================================
    """
    g = psi.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, g.points_per_axis, 0, g.half_extent))
        fh.write(np.ascontiguousarray(psi.amplitudes, dtype="<c16").tobytes())


def load_checkpoint(path: str | Path) -> Wavefunction:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("checkpoint truncated")
    magic, version, n, _, half_extent = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    body = raw[_HEADER.size :]
    if len(body) != 16 * n * n:
        raise ValueError("checkpoint size does not match header")
    amps = np.frombuffer(body, dtype="<c16").reshape(n, n).astype(complex)
    return Wavefunction(GridSpec(half_extent, n), amps, 0.0)
