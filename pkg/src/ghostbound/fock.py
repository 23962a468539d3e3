"""Truncated product-Hermite (Fock) representation and spectral analysis.

Basis states are ``|n_x> (x) |n_y>`` with ``0 <= n_x, n_y <= n_max``, stored
row-major in ``n_x``: ``k = n_x * (n_max + 1) + n_y``.  Every operator here
is real symmetric, so eigenvalues are real by construction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import linalg, stats

from .model import potential

log = logging.getLogger(__name__)

__all__ = [
    "FockBasis",
    "FockOperator",
    "SpectrumResult",
    "SpacingStats",
    "hermite_functions",
    "quadrature_rule",
    "build_potential_blocks",
    "build_hamiltonian",
    "build_c_operator",
    "c_operator_parts",
    "diagonalize",
    "spacing_statistics",
    "poisson_cdf",
    "wigner_dyson_cdf",
    "eigenstate_density",
    "sorted_shift",
]


@dataclass(frozen=True)
class FockBasis:
    n_max: int

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")

    @property
    def size(self) -> int:
        return (self.n_max + 1) ** 2

    def index(self, n_x: int, n_y: int) -> int:
        if not (0 <= n_x <= self.n_max and 0 <= n_y <= self.n_max):
            raise IndexError(f"({n_x}, {n_y}) outside basis with n_max={self.n_max}")
        return n_x * (self.n_max + 1) + n_y

    def quantum_numbers(self, k: int) -> tuple[int, int]:
        return divmod(int(k), self.n_max + 1)

    @property
    def n_x(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_max + 1), self.n_max + 1)

    @property
    def n_y(self) -> np.ndarray:
        return np.tile(np.arange(self.n_max + 1), self.n_max + 1)

    def free_energies(self) -> np.ndarray:
        """Diagonal of the uncoupled Hamiltonian, ``n_x - n_y`` (zero-point terms cancel)."""
        return (self.n_x - self.n_y).astype(float)

    def interior_mask(self, limit: int) -> np.ndarray:
        """States with both quantum numbers ``<= limit``."""
        if limit < 0:
            raise ValueError("empty projector: interior limit below zero")
        return (self.n_x <= limit) & (self.n_y <= limit)


@dataclass
class FockOperator:
    basis: FockBasis
    entries: np.ndarray

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))


@dataclass
class SpectrumResult:
    basis: FockBasis
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    labels: np.ndarray
    intra_splittings: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def max_label_offset(self) -> float:
        """Largest distance of an eigenvalue from its integer label."""
        return float(np.max(np.abs(self.eigenvalues - self.labels)))

    @property
    def labels_reliable(self) -> bool:
        return self.max_label_offset <= 0.25

    def multiplicities(self) -> dict[int, int]:
        labels, counts = np.unique(self.labels, return_counts=True)
        return {int(k): int(c) for k, c in zip(labels, counts)}


@dataclass
class SpacingStats:
    unfolded_spacings: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    ks_poisson: float
    ks_wigner: float
    mode: str

    @property
    def preferred(self) -> str:
        return "poisson" if self.ks_poisson < self.ks_wigner else "wigner"

    @property
    def density(self) -> np.ndarray:
        widths = np.diff(self.bin_edges)
        return self.counts / (self.counts.sum() * widths)


def _scaled_hermite(n_max: int, t: np.ndarray) -> np.ndarray:
    # h_n(t) * exp(t^2/2): same recurrence, no Gaussian factor to underflow
    g = np.empty((n_max + 1, t.size))
    g[0] = np.pi ** -0.25
    if n_max >= 1:
        g[1] = np.sqrt(2.0) * t * g[0]
    for n in range(1, n_max):
        g[n + 1] = t * np.sqrt(2.0 / (n + 1)) * g[n] - np.sqrt(n / (n + 1)) * g[n - 1]
    return g


def hermite_functions(n_max: int, nodes) -> np.ndarray:
    """Normalized Hermite functions ``h_0 .. h_{n_max}`` at ``nodes``, shape ``(n_max+1, len(nodes))``.

    Uses the stable three-term recurrence
    ``h_{n+1} = x sqrt(2/(n+1)) h_n - sqrt(n/(n+1)) h_{n-1}``.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    t = np.atleast_1d(np.asarray(nodes, dtype=float))
    return _scaled_hermite(n_max, t) * np.exp(-0.5 * t * t)


def quadrature_rule(n_max: int, quad_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weighted Hermite functions ``sqrt(w_i e^{t_i^2}) h_n(t_i)``.

    With these, ``sum_i phi[n, i] phi[m, i] f(t_i)`` approximates
    ``int h_n h_m f dx``, exactly when ``f`` is a polynomial of degree
    ``< 2 quad_order - 2 n_max``.
    """
    t, w = hermgauss(quad_order)
    phi = _scaled_hermite(n_max, t) * np.sqrt(w)
    return t, phi


def _check_quad(basis: FockBasis, quad_order: int) -> None:
    if quad_order < 2 * basis.n_max + 20:
        raise ValueError(
            f"quad_order={quad_order} too low for n_max={basis.n_max}; need >= {2 * basis.n_max + 20}"
        )


def _position_matrix(phi: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Matrix of the multiplication operator ``f(x, y)`` sampled on the tensor grid."""
    n = phi.shape[0]
    half = np.einsum("ai,bi,ij->abj", phi, phi, f, optimize=True)
    full = np.einsum("abj,cj,dj->acbd", half, phi, phi, optimize=True)
    mat = full.reshape(n * n, n * n)
    return 0.5 * (mat + mat.T)


def build_potential_blocks(basis: FockBasis, lam: float, quad_order: int = 96) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of ``V`` and ``M = (x^2 - y^2 - 1) V`` by tensor Gauss-Hermite quadrature."""
    _check_quad(basis, quad_order)
    t, phi = quadrature_rule(basis.n_max, quad_order)
    xx, yy = np.meshgrid(t, t, indexing="ij")
    v = potential(xx, yy, lam)
    m = (xx * xx - yy * yy - 1.0) * v
    return _position_matrix(phi, v), _position_matrix(phi, m)


def build_hamiltonian(basis: FockBasis, lam: float, quad_order: int = 96) -> FockOperator:
    _check_quad(basis, quad_order)
    h = np.diag(basis.free_energies())
    if lam != 0:
        h = h + build_potential_blocks(basis, lam, quad_order)[0]
    return FockOperator(basis, h)


def _ladder(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated position and (real) ``i * p`` matrices for one sector."""
    a = np.diag(np.sqrt(np.arange(1.0, n_max + 1)), 1)
    x = (a + a.T) / np.sqrt(2.0)
    # p = i (a^dag - a)/sqrt(2) is purely imaginary; keep the real factor
    ip = (a - a.T) / np.sqrt(2.0)
    return x, ip


def c_operator_parts(basis: FockBasis) -> np.ndarray:
    """Exact matrix of ``K^2 + (p_x^2 + x^2)`` within the truncated basis.

    ``K = x p_y + y p_x`` moves each quantum number by one, so ``K`` is
    assembled one level higher and squared there before restriction;
    ``p_x^2 + x^2 = 2 n_x + 1`` is diagonal.
    """
    n = basis.n_max + 1
    x, ip = _ladder(n)
    # i K = x (i p_y) + y (i p_x); K^2 = -(iK)^2
    ik = np.kron(x, ip) + np.kron(ip, x)
    k2_big = -(ik @ ik)
    keep = np.repeat(np.arange(n + 1) < n, n + 1) & np.tile(np.arange(n + 1) < n, n + 1)
    k2 = k2_big[np.ix_(keep, keep)]
    return k2 + np.diag(2.0 * basis.n_x + 1.0)


def build_c_operator(basis: FockBasis, lam: float, quad_order: int = 96) -> FockOperator:
    """Matrix of ``C = K^2 + (p_x^2 + x^2) - (x^2 - y^2 - 1) V``."""
    _check_quad(basis, quad_order)
    c = c_operator_parts(basis)
    if lam != 0:
        c = c - build_potential_blocks(basis, lam, quad_order)[1]
    return FockOperator(basis, c)


def diagonalize(op: FockOperator) -> SpectrumResult:
    """Full symmetric eigendecomposition with nearest-integer multiplet labels."""
    try:
        w, v = linalg.eigh(op.entries)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(op.entries)
        raise linalg.LinAlgError(f"eigensolver failed (condition number {cond:.3e})") from exc
    labels = np.rint(w).astype(int)
    result = SpectrumResult(op.basis, w, v, labels)
    if not result.labels_reliable:
        log.warning("eigenvalue %.3g from its integer label; multiplet labels unreliable", result.max_label_offset)
    for k in np.unique(labels):
        result.intra_splittings[int(k)] = np.diff(np.sort(w[labels == k]))
    return result


def poisson_cdf(s):
    return -np.expm1(-np.asarray(s, dtype=float))


def wigner_dyson_cdf(s):
    """CDF of the GOE surmise ``(pi s / 2) exp(-pi s^2 / 4)``."""
    s = np.asarray(s, dtype=float)
    return -np.expm1(-0.25 * np.pi * s * s)


def _unfold_global(levels: np.ndarray, degree: int) -> np.ndarray:
    e = np.sort(levels)
    staircase = np.arange(1, e.size + 1)
    fit = np.polynomial.Polynomial.fit(e, staircase, degree)
    u = fit(e)
    mono = np.maximum.accumulate(u)
    if np.any(mono != u):
        log.warning("staircase fit not monotone; %d levels clamped", int(np.sum(mono != u)))
    return np.diff(mono)


def _unfold_intra(spectrum: SpectrumResult) -> np.ndarray:
    pooled = []
    for k, gaps in sorted(spectrum.intra_splittings.items()):
        if gaps.size + 1 < 3:
            log.warning("multiplet %d has %d states; skipped", k, gaps.size + 1)
            continue
        pooled.append(gaps / gaps.mean())
    if not pooled:
        raise ValueError("no multiplet with at least 3 states")
    return np.concatenate(pooled)


def spacing_statistics(
    spectrum: SpectrumResult | np.ndarray,
    mode: str = "intra_multiplet",
    degree: int = 7,
    bins: int | np.ndarray = 30,
    s_max: float = 4.0,
) -> SpacingStats:
    """Unfolded nearest-neighbour spacings and KS distances to Poisson and Wigner-Dyson.

    ``intra_multiplet`` unfolds each degenerate multiplet by its own mean
    splitting and pools them (needs a :class:`SpectrumResult`).
    ``global`` unfolds the whole sorted spectrum with a polynomial fit of
    the level staircase; a plain array of levels is accepted.
    """
    if mode == "intra_multiplet":
        if not isinstance(spectrum, SpectrumResult):
            raise TypeError("intra_multiplet mode needs a SpectrumResult")
        s = _unfold_intra(spectrum)
    elif mode == "global":
        levels = spectrum.eigenvalues if isinstance(spectrum, SpectrumResult) else np.asarray(spectrum, float)
        s = _unfold_global(levels, degree)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    s = s / s.mean()
    edges = np.linspace(0.0, s_max, bins + 1) if np.isscalar(bins) else np.asarray(bins, dtype=float)
    counts, edges = np.histogram(s, bins=edges)
    ks_p = stats.kstest(s, poisson_cdf).statistic
    ks_w = stats.kstest(s, wigner_dyson_cdf).statistic
    return SpacingStats(s, edges, counts, float(ks_p), float(ks_w), mode)


def eigenstate_density(spectrum: SpectrumResult, reference: tuple[int, int], x, y) -> np.ndarray:
    """``|phi(x, y)|^2`` of the eigenvector with the largest overlap on ``|n_x, n_y>``.

    ``x`` and ``y`` are 1-D axes; the result has shape ``(len(x), len(y))``.
    """
    basis = spectrum.basis
    k = basis.index(*reference)
    overlaps = np.abs(spectrum.eigenvectors[k, :])
    best = int(np.argmax(overlaps))
    ties = np.flatnonzero(np.isclose(overlaps, overlaps[best], rtol=1e-10, atol=0.0))
    if ties.size > 1:
        log.warning("degenerate maximum overlap for %s; using eigenvector %d", reference, ties[0])
        best = int(ties[0])
    coeffs = spectrum.eigenvectors[:, best].reshape(basis.n_max + 1, basis.n_max + 1)
    hx = hermite_functions(basis.n_max, x)
    hy = hermite_functions(basis.n_max, y)
    amp = hx.T @ coeffs @ hy
    return amp * amp


def sorted_shift(a: SpectrumResult | np.ndarray, b: SpectrumResult | np.ndarray) -> np.ndarray:
    """Element-wise difference of two sorted spectra of equal size."""
    ea = np.sort(a.eigenvalues if isinstance(a, SpectrumResult) else np.asarray(a))
    eb = np.sort(b.eigenvalues if isinstance(b, SpectrumResult) else np.asarray(b))
    return eb - ea
