"""Scalar functions of the ghost-coupled oscillator.

Natural units hbar = omega = m = 1 throughout.  The Hamiltonian is

    H = (p_x**2 + x**2)/2 - (p_y**2 + y**2)/2 + V(x, y),
    V = lam / sqrt((x**2 - y**2 - 1)**2 + 4 x**2),

with the second integral of motion

    C = K**2 + (p_x**2 + x**2) - (x**2 - y**2 - 1) V,   K = p_y x + p_x y.

Every function here accepts scalars or broadcastable numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "PhasePoint",
    "PotentialJet",
    "Observables",
    "delta",
    "delta_geometric",
    "potential",
    "potential_jet",
    "classical_observables",
    "energy_sigma_form",
    "boost",
    "bound_ceiling",
    "sigma_ceiling",
    "boost_corrected_ceiling",
]


@dataclass(frozen=True)
class PhasePoint:
    """Classical state ``(x, p_x, y, p_y)``; ``y`` is the ghost coordinate."""

    x: float
    px: float
    y: float
    py: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.px, self.y, self.py], dtype=float)

    @classmethod
    def from_array(cls, z) -> "PhasePoint":
        x, px, y, py = (float(v) for v in z)
        return cls(x, px, y, py)


@dataclass(frozen=True)
class PotentialJet:
    """Value and closed-form derivatives of the interaction up to second order."""

    v: np.ndarray
    dv_dx: np.ndarray
    dv_dy: np.ndarray
    d2v_dxx: np.ndarray
    d2v_dyy: np.ndarray
    d2v_dxy: np.ndarray
    delta: np.ndarray


class Observables(NamedTuple):
    H: np.ndarray
    C: np.ndarray
    K: np.ndarray
    E: np.ndarray


def delta(x, y):
    """``(x^2 - y^2)^2 + 2(x^2 + y^2) + 1``, the cancellation-free form of Delta."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x * x - y * y
    s = x * x + y * y
    return d * d + 2.0 * s + 1.0


def delta_geometric(x, y):
    """``(x^2 - y^2 - 1)^2 + 4x^2``, the form that appears in the potential."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (x * x - y * y - 1.0) ** 2 + 4.0 * x * x


def potential(x, y, lam: float):
    """Interaction ``lam / sqrt(Delta)``; bounded by ``|lam|`` since ``Delta >= 1``."""
    return lam / np.sqrt(delta(x, y))


def potential_jet(x, y, lam: float) -> PotentialJet:
    """Evaluate the interaction and its closed-form first and second derivatives.

    The derivatives use ``Delta`` and its own derivatives

        d_x Delta = 4x(d + 1),          d_y Delta = 4y(1 - d),
        d_xx Delta = 12x^2 - 4y^2 + 4,  d_yy Delta = 12y^2 - 4x^2 + 4,
        d_xy Delta = -8xy,

    with ``d = x^2 - y^2``, and then the chain rule for ``Delta**-1/2``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x2 = x * x
    y2 = y * y
    d = x2 - y2
    dl = delta(x, y)
    inv_half = dl ** -0.5
    inv_3half = inv_half / dl
    inv_5half = inv_3half / dl

    gx = 4.0 * x * (d + 1.0)
    gy = 4.0 * y * (1.0 - d)
    gxx = 12.0 * x2 - 4.0 * y2 + 4.0
    gyy = 12.0 * y2 - 4.0 * x2 + 4.0

    v = lam * inv_half
    dv_dx = -2.0 * lam * x * (d + 1.0) * inv_3half
    dv_dy = -2.0 * lam * y * (1.0 - d) * inv_3half
    d2v_dxx = -0.5 * lam * gxx * inv_3half + 0.75 * lam * gx * gx * inv_5half
    d2v_dyy = -0.5 * lam * gyy * inv_3half + 0.75 * lam * gy * gy * inv_5half
    s = x2 + y2
    d2v_dxy = -8.0 * lam * x * y * inv_3half + 24.0 * lam * x * y * (s + 1.0) * inv_5half
    return PotentialJet(v, dv_dx, dv_dy, d2v_dxx, d2v_dyy, d2v_dxy, dl)


def boost(x, px, y, py):
    """Hyperbolic boost generator ``K = p_y x + p_x y``."""
    return py * x + px * y


def classical_observables(point: PhasePoint | np.ndarray, lam: float) -> Observables:
    """Return ``(H, C, K, E)`` at a phase point, with ``E = C - H``.

    ``point`` may be a :class:`PhasePoint` or an array whose leading axis
    holds ``(x, p_x, y, p_y)``.
    """
    if isinstance(point, PhasePoint):
        x, px, y, py = point.x, point.px, point.y, point.py
    else:
        x, px, y, py = np.asarray(point, dtype=float)
    v = potential(x, y, lam)
    k = boost(x, px, y, py)
    h = 0.5 * (px * px + x * x) - 0.5 * (py * py + y * y) + v
    c = k * k + (px * px + x * x) - (x * x - y * y - 1.0) * v
    return Observables(h, c, k, c - h)


def energy_sigma_form(point: PhasePoint | np.ndarray, lam: float):
    """``E`` written as ``K^2 + (p_x^2 + x^2)/2 + (p_y^2 + y^2)/2 + (y^2 - x^2) V``.

    Independent of :func:`classical_observables`; the two must agree.
    """
    if isinstance(point, PhasePoint):
        x, px, y, py = point.x, point.px, point.y, point.py
    else:
        x, px, y, py = np.asarray(point, dtype=float)
    k = boost(x, px, y, py)
    sigma = k * k + 0.5 * (px * px + x * x) + 0.5 * (py * py + y * y)
    return sigma + (y * y - x * x) * potential(x, y, lam)


def _check_nonnegative(value: float, name: str) -> None:
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and non-negative, got {value!r}")


def bound_ceiling(initial_moment: float, lam: float) -> float:
    """Ceiling ``<x^2+y^2+p_x^2+p_y^2>(0) + 4|lam|`` on the second moment.

    This is the bound as commonly quoted.  It is only implied by the
    sigma bound when ``<K^2>(0) = 0``; see :func:`boost_corrected_ceiling`.
    """
    _check_nonnegative(initial_moment, "initial_moment")
    return float(initial_moment) + 4.0 * abs(lam)


def sigma_ceiling(initial_sigma: float, lam: float) -> float:
    """Ceiling ``<Sigma>(0) + 2|lam|`` on ``Sigma = K^2 + (p_x^2+x^2)/2 + (p_y^2+y^2)/2``."""
    _check_nonnegative(initial_sigma, "initial_sigma")
    return float(initial_sigma) + 2.0 * abs(lam)


def boost_corrected_ceiling(initial_moment: float, initial_k2: float, lam: float) -> float:
    """Ceiling on the second moment that follows from the sigma bound.

    ``x^2+y^2+p_x^2+p_y^2 = 2 Sigma - 2 K^2 <= 2 Sigma`` gives
    ``<x^2+y^2+p_x^2+p_y^2>(t) <= <...>(0) + 2<K^2>(0) + 4|lam|``.
    """
    _check_nonnegative(initial_moment, "initial_moment")
    _check_nonnegative(initial_k2, "initial_k2")
    return float(initial_moment) + 2.0 * float(initial_k2) + 4.0 * abs(lam)
