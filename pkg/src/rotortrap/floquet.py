"""Floquet stability of linear periodic systems ``x' = A(t) x`` (2x2).

Hill-type oscillators ``u'' + c u' + (p0 + p1 cos(w t)) u = 0`` run on the
compiled kernel; any other coefficient function is integrated with
``scipy.integrate.solve_ivp``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import kernels
from .errors import BoundaryNotFound, StepFailure
from .model import RigidBody, TrapDrive, pendulum_coupling

RTOL = 1e-12
ATOL = 1e-14
STABILITY_SLACK = 1e-9


@dataclass(frozen=True)
class PeriodicLinearSystem:
    """``x' = A(t) x`` with ``A`` of period ``period``.

    Either ``coefficients`` (a callable ``t -> 2x2 array``) or ``hill``
    (``(p0, p1, w, c)``) must be given; ``hill`` takes precedence.
    """

    period: float
    coefficients: Callable | None = None
    hill: tuple | None = None

    def __post_init__(self):
        if not self.period > 0.0:
            raise ValueError("period must be positive")
        if self.coefficients is None and self.hill is None:
            raise ValueError("need coefficients or hill parameters")

    def matrix(self, t):
        if self.hill is not None:
            p0, p1, w, c = self.hill
            return np.array([[0.0, 1.0], [-(p0 + p1 * math.cos(w * t)), -c]])
        return np.asarray(self.coefficients(t), dtype=float)


def hill_system(p0, p1, omega, damping=0.0) -> PeriodicLinearSystem:
    """``u'' + damping u' + (p0 + p1 cos(omega t)) u = 0``."""
    return PeriodicLinearSystem(2.0 * math.pi / omega, hill=(float(p0), float(p1), float(omega), float(damping)))


def mathieu_system(a, q, damping=0.0) -> PeriodicLinearSystem:
    """``u'' + damping u' + (a - 2 q cos 2 tau) u = 0`` (period pi)."""
    return hill_system(a, -2.0 * q, 2.0, damping)


def constant_system(A, period) -> PeriodicLinearSystem:
    A = np.array(A, dtype=float)
    return PeriodicLinearSystem(float(period), coefficients=lambda t: A)


def monodromy(sys: PeriodicLinearSystem) -> np.ndarray:
    """State-transition matrix over one period."""
    T = sys.period
    if sys.hill is not None:
        y0 = np.array([1.0, 0.0, 0.0, 1.0])
        out, status = kernels.hill_dp5(y0, 0.0, np.array([T]), np.array(sys.hill, dtype=float), T / 64.0, RTOL, ATOL)
        if status != kernels.OK:
            raise StepFailure(f"monodromy integration failed (status {status})")
        xa, va, xb, vb = out[-1]
        return np.array([[xa, xb], [va, vb]])

    def rhs(t, y):
        return (sys.matrix(t) @ y.reshape(2, 2)).ravel()

    sol = solve_ivp(rhs, (0.0, T), np.eye(2).ravel(), method="DOP853", rtol=RTOL, atol=ATOL, max_step=T / 64.0)
    if not sol.success:
        raise StepFailure(f"monodromy integration failed: {sol.message}")
    return sol.y[:, -1].reshape(2, 2)


def floquet_multipliers(sys: PeriodicLinearSystem) -> np.ndarray:
    return np.linalg.eigvals(monodromy(sys))


def spectral_radius(sys: PeriodicLinearSystem) -> float:
    return float(np.max(np.abs(floquet_multipliers(sys))))


def is_stable(sys: PeriodicLinearSystem) -> bool:
    """True iff every Floquet multiplier satisfies ``|mu| <= 1 + 1e-9``."""
    return spectral_radius(sys) <= 1.0 + STABILITY_SLACK


def liouville_determinant(sys: PeriodicLinearSystem, n=2048) -> float:
    """``exp(integral of trace A)`` over one period (reference for ``det M``)."""
    if sys.hill is not None:
        return math.exp(-sys.hill[3] * sys.period)
    t = np.linspace(0.0, sys.period, n + 1)
    tr = np.array([np.trace(sys.matrix(s)) for s in t])
    return float(np.exp(np.sum(0.5 * (tr[1:] + tr[:-1]) * np.diff(t))))


def matrix_exponential(A, T) -> np.ndarray:
    return expm(np.asarray(A, dtype=float) * T)


def mathieu_boundary_q(a: float, damping: float = 0.0, q_max: float = 4.0, scan_step: float = 0.01,
                       tol: float = 1e-4) -> float:
    """Upper edge in ``q`` of the first stability region of the Mathieu equation at ``a``."""
    if not -1.0 <= a <= 1.0:
        raise ValueError("a must lie in [-1, 1]")

    def stable(q):
        return is_stable(mathieu_system(a, q, damping))

    n = int(round(q_max / scan_step))
    prev_q, prev_stable = 0.0, stable(0.0)
    for i in range(1, n + 1):
        q = i * scan_step
        s = stable(q)
        if prev_stable and not s:
            lo, hi = prev_q, q
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if stable(mid):
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        prev_q, prev_stable = q, s
    raise BoundaryNotFound(f"no stable-to-unstable transition for a={a} in q <= {q_max}")


def linearized_pendulum(trap: TrapDrive, body: RigidBody) -> PeriodicLinearSystem:
    """Linearization about ``alpha = 0``: ``u'' + gamma0 u' + 2 k cos(omega_d t) u = 0``."""
    k = pendulum_coupling(trap, body)
    return hill_system(0.0, 2.0 * k, trap.omega_d, body.gamma0)


def pendulum_instability(trap: TrapDrive, body: RigidBody) -> bool:
    """True when the ``alpha = 0`` equilibrium of the pendulum is Floquet-unstable."""
    return not is_stable(linearized_pendulum(trap, body))


def instability_boundary(trap: TrapDrive, body: RigidBody, omega_range, rel_tol: float = 1e-4,
                         step: float = 0.01) -> float:
    """Highest drive frequency in ``omega_range`` at which ``alpha = 0`` is unstable."""
    lo, hi = sorted(float(w) for w in omega_range)

    def unstable(w):
        return pendulum_instability(trap.replace(omega_d=w), body)

    if unstable(hi):
        raise BoundaryNotFound("equilibrium unstable at the top of the frequency range")
    w_prev, w = hi, hi
    while w > lo:
        w = max(w / (1.0 + step), lo)
        if unstable(w):
            a, b = w, w_prev
            while b - a > rel_tol * b:
                mid = math.sqrt(a * b)
                if unstable(mid):
                    a = mid
                else:
                    b = mid
            return math.sqrt(a * b)
        w_prev = w
    raise BoundaryNotFound("no instability inside the frequency range")


def stability_grid(trap: TrapDrive, body: RigidBody, v0_values, omega_values):
    """Rows ``(v0, omega, stable)`` over the product grid (for overlays)."""
    rows = []
    for v0 in v0_values:
        t = trap.replace(V0=float(v0))
        for w in omega_values:
            rows.append((float(v0), float(w), not pendulum_instability(t.replace(omega_d=float(w)), body)))
    return rows
