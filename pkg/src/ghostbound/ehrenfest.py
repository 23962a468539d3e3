"""Classical (Ehrenfest-limit) orbits of the ghost-coupled oscillator.

Hamilton's equations with the ghost sign convention,

    x' = p_x,   p_x' = -x - dV/dx,
    y' = -p_y,  p_y' = y - dV/dy,

integrated with fixed-step classical RK4.  ``H`` and ``C`` are recorded at
every step so their drift can be inspected directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import PhasePoint, classical_observables, potential_jet

__all__ = ["IntegratorConfig", "Trajectory", "BlowupError", "eom_rhs", "integrate", "free_solution"]

BLOWUP_THRESHOLD = 1e6


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step settings.  A negative ``dt`` integrates backward in time."""

    dt: float = 0.02
    t_final: float = 500.0
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")
        if self.dt == 0 or not np.isfinite(self.dt):
            raise ValueError("dt must be finite and non-zero")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / abs(self.dt)))


class BlowupError(RuntimeError):
    def __init__(self, time: float, state: np.ndarray):
        super().__init__(f"trajectory left the finite region at t={time:.6g}: {state}")
        self.time = time
        self.state = state


@dataclass
class Trajectory:
    """Sampled orbit; ``states[k] = (x, p_x, y, p_y)`` at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    H: np.ndarray
    C: np.ndarray
    lam: float
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> PhasePoint:
        return PhasePoint.from_array(self.states[-1])

    def drift_h(self) -> float:
        return float(np.max(np.abs(self.H - self.H[0])))

    def drift_c(self) -> float:
        return float(np.max(np.abs(self.C - self.C[0])))

    def moment(self) -> np.ndarray:
        """``x^2 + y^2 + p_x^2 + p_y^2`` along the orbit."""
        return np.sum(self.states**2, axis=1)


def eom_rhs(z, lam: float) -> np.ndarray:
    """Time derivative of ``(x, p_x, y, p_y)``.  Batches along trailing axes work."""
    x, px, y, py = np.asarray(z, dtype=float)
    j = potential_jet(x, y, lam)
    return np.array([px, -x - j.dv_dx, -py, y - j.dv_dy])


def _rhs_scalar(x, px, y, py, lam):
    # same forces as eom_rhs, on plain floats (about 20x faster per call)
    d = x * x - y * y
    dl = d * d + 2.0 * (x * x + y * y) + 1.0
    f = 2.0 * lam / (dl * math.sqrt(dl))
    return px, -x + f * x * (d + 1.0), -py, y + f * y * (1.0 - d)


def _rk4_step(z, h, lam):
    x, px, y, py = z
    a = _rhs_scalar(x, px, y, py, lam)
    b = _rhs_scalar(x + 0.5 * h * a[0], px + 0.5 * h * a[1], y + 0.5 * h * a[2], py + 0.5 * h * a[3], lam)
    c = _rhs_scalar(x + 0.5 * h * b[0], px + 0.5 * h * b[1], y + 0.5 * h * b[2], py + 0.5 * h * b[3], lam)
    e = _rhs_scalar(x + h * c[0], px + h * c[1], y + h * c[2], py + h * c[3], lam)
    w = h / 6.0
    return tuple(z[i] + w * (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i]) for i in range(4))


def integrate(start, config: IntegratorConfig, lam: float, sample_every: int = 1) -> Trajectory:
    """RK4 orbit from ``start`` over ``config.t_final``.

    Raises :class:`BlowupError` (with the failure time) if any coordinate
    turns non-finite or exceeds ``1e6`` in magnitude.
    """
    z0 = start.as_array() if isinstance(start, PhasePoint) else np.asarray(start, dtype=float)
    if z0.shape != (4,):
        raise ValueError("start must have four components (x, p_x, y, p_y)")
    z = tuple(float(v) for v in z0)
    lam = float(lam)
    n = config.n_steps
    h = config.dt
    keep = list(range(0, n + 1, sample_every))
    if keep[-1] != n:
        keep.append(n)
    states = np.empty((len(keep), 4))
    states[0] = z
    k = 1
    for i in range(1, n + 1):
        z = _rk4_step(z, h, lam)
        if not max(abs(v) for v in z) <= BLOWUP_THRESHOLD:  # also catches nan
            raise BlowupError(i * h, np.array(z))
        if k < len(keep) and keep[k] == i:
            states[k] = z
            k += 1
    times = np.array(keep, dtype=float) * h
    obs = classical_observables(states.T, lam)
    return Trajectory(times, states, np.asarray(obs.H), np.asarray(obs.C), lam,
                      {"dt": h, "t_final": config.t_final, "method": config.method})


def free_solution(start, t) -> np.ndarray:
    """Exact ``lam = 0`` orbit: the ghost sector rotates the opposite way."""
    x, px, y, py = start.as_array() if isinstance(start, PhasePoint) else np.asarray(start, dtype=float)
    t = np.asarray(t, dtype=float)
    c, s = np.cos(t), np.sin(t)
    return np.stack([x * c + px * s, px * c - x * s, y * c - py * s, py * c + y * s], axis=-1)
