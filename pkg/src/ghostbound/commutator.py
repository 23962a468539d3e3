"""Pointwise certificates for the vanishing of [C, H].

Ordering all position functions to the left of the momenta, the commutator
collapses to ``A_x p_x + A_y p_y + A_0`` with three scalar coefficient
functions.  They are evaluated here term by term, with no algebraic
simplification, so any cancellation has to happen numerically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PhasePoint, potential_jet

__all__ = [
    "CoefficientTriple",
    "coefficient_triple",
    "poisson_bracket",
    "poisson_bracket_ch",
    "poisson_bracket_hc",
    "fock_commutator_residual",
    "truncated_commutator_residual",
    "random_sweep",
]


@dataclass(frozen=True)
class CoefficientTriple:
    """``a_x = A_x / (-i)``, ``a_y = A_y / (-i)`` and ``a_0 = A_0`` (all real)."""

    a_x: np.ndarray
    a_y: np.ndarray
    a_0: np.ndarray

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.a_x)), np.max(np.abs(self.a_y)), np.max(np.abs(self.a_0))))


def coefficient_triple(x, y, lam: float) -> CoefficientTriple:
    """Evaluate the three coefficient functions of ``[C, H]`` at ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    j = potential_jet(x, y, lam)
    r = 1.0 + x * x + y * y
    a_x = r * j.dv_dx + 2.0 * x * y * j.dv_dy + 2.0 * x * j.v
    a_y = r * j.dv_dy + 2.0 * x * y * j.dv_dx + 2.0 * y * j.v
    a_0 = (
        -2.0 * j.v
        - 3.0 * x * j.dv_dx
        - 3.0 * y * j.dv_dy
        - 0.5 * r * (j.d2v_dxx + j.d2v_dyy)
        - 2.0 * x * y * j.d2v_dxy
    )
    return CoefficientTriple(a_x, a_y, a_0)


# Analytic gradients of the classical H and C, in (x, px, y, py) order.


def _grad_h(z, lam):
    x, px, y, py = z
    j = potential_jet(x, y, lam)
    return (x + j.dv_dx, px, -y + j.dv_dy, -py)


def _grad_c(z, lam):
    x, px, y, py = z
    j = potential_jet(x, y, lam)
    k = py * x + px * y
    m_x = 2.0 * x * j.v + (x * x - y * y - 1.0) * j.dv_dx
    m_y = -2.0 * y * j.v + (x * x - y * y - 1.0) * j.dv_dy
    return (
        2.0 * k * py + 2.0 * x - m_x,
        2.0 * k * y + 2.0 * px,
        2.0 * k * px - m_y,
        2.0 * k * x,
    )


_GRADIENTS = {"H": _grad_h, "C": _grad_c}


def poisson_bracket(first: str, second: str, point, lam: float):
    """Canonical Poisson bracket ``{first, second}`` for ``first, second`` in ``{"H", "C"}``.

    ``point`` is a :class:`PhasePoint` or an array with leading axis
    ``(x, p_x, y, p_y)``; batches broadcast.
    """
    z = point.as_array() if isinstance(point, PhasePoint) else np.asarray(point, dtype=float)
    ax, apx, ay, apy = _GRADIENTS[first](z, lam)
    bx, bpx, by, bpy = _GRADIENTS[second](z, lam)
    return ax * bpx - apx * bx + ay * bpy - apy * by


def poisson_bracket_ch(point, lam: float):
    """``{C, H}`` from analytic partial derivatives; identically zero."""
    return poisson_bracket("C", "H", point, lam)


def poisson_bracket_hc(point, lam: float):
    return poisson_bracket("H", "C", point, lam)


def random_sweep(n_samples: int, lam: float, seed: int = 0, half_width: float = 10.0) -> float:
    """Max coefficient magnitude over uniform random points in ``[-w, w]^2``."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-half_width, half_width, size=(2, n_samples))
    return coefficient_triple(pts[0], pts[1], lam).max_abs()


def fock_commutator_residual(
    n_max: int,
    lam: float,
    interior_margin: int,
    quad_order: int = 96,
) -> float:
    """Largest entry of ``P [C, H] P`` in the truncated Hermite basis.

    ``P`` projects onto ``n_x, n_y <= n_max - interior_margin``.  The
    polynomial parts of ``C`` (``K^2`` and ``p_x^2 + x^2``) shift each
    quantum number by at most two, so with ``interior_margin >= 2`` their
    products with the potential blocks are exact inside ``P``.  The two
    position-space blocks ``V`` and ``M = (x^2 - y^2 - 1) V`` are *not*
    banded, and a truncated product ``M V - V M`` leaves an O(1e-4)
    residue in the interior.  As multiplication operators they commute, so
    that term is taken as zero (equivalently, the product is formed in the
    full quadrature space).  What remains is limited only by the quadrature
    accuracy of the matrix elements.
    """
    from .fock import FockBasis, c_operator_parts, build_potential_blocks

    if interior_margin < 2:
        raise ValueError("interior_margin must be >= 2 for the banded parts to be exact")
    if n_max < interior_margin + 2:
        raise ValueError("n_max must be at least interior_margin + 2")
    basis = FockBasis(n_max)
    v, m = build_potential_blocks(basis, lam, quad_order)
    h0 = np.diag(basis.free_energies())
    poly = c_operator_parts(basis)
    h = h0 + v
    residual = (poly @ h - h @ poly) - (m @ h0 - h0 @ m)
    keep = basis.interior_mask(n_max - interior_margin)
    return float(np.max(np.abs(residual[np.ix_(keep, keep)])))


def truncated_commutator_residual(n_max: int, lam: float, interior_margin: int, quad_order: int = 96) -> float:
    """Same projection as :func:`fock_commutator_residual` but with every
    product formed by plain truncated matrix multiplication.

    Useful only to exhibit the truncation floor of the non-banded blocks.
    """
    from .fock import FockBasis, build_c_operator, build_hamiltonian

    basis = FockBasis(n_max)
    h = build_hamiltonian(basis, lam, quad_order).entries
    c = build_c_operator(basis, lam, quad_order).entries
    r = c @ h - h @ c
    keep = basis.interior_mask(n_max - interior_margin)
    return float(np.max(np.abs(r[np.ix_(keep, keep)])))
