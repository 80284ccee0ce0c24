"""Physical configuration: trap drive, rigid body and spheroid geometry.

All quantities are SI.  Frequencies are angular (rad/s) unless a name ends
in ``_hz``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConstraintViolation, QuadratureFailure

E_CHARGE = 1.602176634e-19  # C
SILICA_DENSITY = 2200.0  # kg/m^3, fused silica


@dataclass(frozen=True)
class TrapDrive:
    """AC quadrupole drive ``V(r, t) = V0 cos(omega_d t) (a . r^2) / ell0^2``."""

    V0: float
    omega_d: float
    ell0: float
    a_x: float
    a_y: float
    a_z: float

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_d

    @property
    def a(self) -> np.ndarray:
        return np.array([self.a_x, self.a_y, self.a_z])

    def voltage(self, t):
        return self.V0 * np.cos(self.omega_d * t)

    def replace(self, **changes) -> "TrapDrive":
        values = {k: getattr(self, k) for k in ("V0", "omega_d", "ell0", "a_x", "a_y", "a_z")}
        values.update(changes)
        return TrapDrive(**values)


@dataclass(frozen=True)
class RigidBody:
    """Principal inertia and quadrupole eigenvalues in a shared body frame.

    Body axis 3 is the particle's long axis for elongated particles.  The
    dipole moment is kept for completeness but must vanish.
    """

    I1: float
    I2: float
    I3: float
    Q1: float
    Q2: float
    Q3: float
    q_tot: float
    mass: float
    gamma0: float = 0.0
    dipole: tuple = field(default=(0.0, 0.0, 0.0))

    def __post_init__(self):
        if any(d != 0.0 for d in self.dipole):
            raise ConstraintViolation("dipole moment must be zero")
        for name in ("I1", "I2", "I3"):
            if not getattr(self, name) > 0.0:
                raise ConstraintViolation(f"{name} > 0 fails")
        if self.gamma0 < 0.0:
            raise ConstraintViolation("gamma0 >= 0 fails")
        scale = max(abs(self.Q1), abs(self.Q2), abs(self.Q3))
        if abs(self.Q1 + self.Q2 + self.Q3) > 1e-12 * scale:
            raise ConstraintViolation("quadrupole trace Q1 + Q2 + Q3 = 0 fails")

    @property
    def inertia(self) -> np.ndarray:
        return np.array([self.I1, self.I2, self.I3])

    @property
    def quadrupole(self) -> np.ndarray:
        return np.array([self.Q1, self.Q2, self.Q3])

    def replace(self, **changes) -> "RigidBody":
        values = {
            k: getattr(self, k)
            for k in ("I1", "I2", "I3", "Q1", "Q2", "Q3", "q_tot", "mass", "gamma0", "dipole")
        }
        values.update(changes)
        return RigidBody(**values)


@dataclass(frozen=True)
class SpheroidSpec:
    """Prolate spheroid given by its full minor and major axis lengths."""

    a_minor: float
    b_major: float
    q_tot: float
    density: float = SILICA_DENSITY

    def check(self):
        if not (0.0 < self.a_minor <= self.b_major):
            raise ConstraintViolation("0 < a_minor <= b_major fails")
        if not self.density > 0.0:
            raise ConstraintViolation("density > 0 fails")
        return self


def validate_trap(raw: TrapDrive) -> TrapDrive:
    """Return ``raw`` unchanged if it satisfies every trap invariant."""
    if not raw.V0 > 0.0:
        raise ConstraintViolation("V0 > 0 fails")
    if not raw.omega_d > 0.0:
        raise ConstraintViolation("omega_d > 0 fails")
    if not raw.ell0 > 0.0:
        raise ConstraintViolation("ell0 > 0 fails")
    if abs(raw.a_x + raw.a_y + raw.a_z) > 1e-12:
        raise ConstraintViolation("a_x + a_y + a_z = 0 fails")
    if not raw.a_x < raw.a_z:
        raise ConstraintViolation("a_x < a_z fails")
    if not raw.a_z < 0.0:
        raise ConstraintViolation("a_z < 0 fails")
    if not raw.a_y > 0.0:
        raise ConstraintViolation("a_y > 0 fails")
    return raw


def quadrupole_tensor(positions, charges) -> np.ndarray:
    """Quadrupole tensor ``sum q (3 r r^T - r^2 1)`` of point charges."""
    r = np.asarray(positions, dtype=float).reshape(-1, 3)
    q = np.asarray(charges, dtype=float).reshape(-1)
    outer = np.einsum("n,ni,nj->ij", q, r, r)
    tensor = 3.0 * outer - np.trace(outer) * np.eye(3)
    return tensor


def _spheroid_moments(a_s, b_s, charge_model):
    """Per-unit-charge second moments <z^2>, <rho^2> of a spheroid surface charge."""
    if charge_model == "uniform":
        def weight(u):
            return math.sin(u) * math.sqrt((b_s * math.sin(u)) ** 2 + (a_s * math.cos(u)) ** 2)
    elif charge_model == "conductor":
        # equilibrium charge of a conducting spheroid projects uniformly on the axis
        def weight(u):
            return math.sin(u)
    else:
        raise ValueError(f"unknown charge model {charge_model!r}")

    results = []
    for f in (
        weight,
        lambda u: weight(u) * (b_s * math.cos(u)) ** 2,
        lambda u: weight(u) * (a_s * math.sin(u)) ** 2,
    ):
        value, abserr = integrate.quad(f, 0.0, math.pi, epsabs=0.0, epsrel=1e-13, limit=200)
        if not value > 0.0 or abserr > 1e-8 * value:
            raise QuadratureFailure(f"surface integral did not converge (err {abserr:.3g} on {value:.6g})")
        results.append(value)
    norm, z2, rho2 = results
    return z2 / norm, rho2 / norm


def deltaq_approx(spec: SpheroidSpec) -> float:
    """Thin-spheroid estimate ``q b^2 (1 + 2 a^2/b^2) / 4`` with full axis lengths."""
    a, b = spec.a_minor, spec.b_major
    return spec.q_tot * b * b * (1.0 + 2.0 * a * a / (b * b)) / 4.0


def spheroid_quadrupole(spec: SpheroidSpec, charge_model: str = "uniform"):
    """Quadrupole eigenvalues of a charged spheroid and the thin-body estimate.

    Returns ``(Q1, Q2, Q3, deltaq_approx)``.  ``Q3`` belongs to the symmetry
    axis; ``Q1 == Q2 == -Q3/2``.  The surface integral uses semi-axes
    ``a_minor/2`` and ``b_major/2``.  ``charge_model`` selects a uniform
    surface density (default) or the equilibrium charge of a conductor.
    """
    spec.check()
    approx = deltaq_approx(spec)
    if spec.a_minor == spec.b_major:
        return 0.0, 0.0, 0.0, approx
    z2, rho2 = _spheroid_moments(0.5 * spec.a_minor, 0.5 * spec.b_major, charge_model)
    q3 = spec.q_tot * (2.0 * z2 - rho2)
    q1 = -0.5 * q3
    return q1, q1, q3, approx


def spheroid_inertia(spec: SpheroidSpec):
    """``(I1, I2, I3, mass)`` of a uniform solid spheroid, axis 3 = symmetry axis."""
    spec.check()
    a_s, b_s = 0.5 * spec.a_minor, 0.5 * spec.b_major
    mass = spec.density * 4.0 / 3.0 * math.pi * a_s * a_s * b_s
    i_perp = mass * (a_s * a_s + b_s * b_s) / 5.0
    i_axis = 2.0 * mass * a_s * a_s / 5.0
    return i_perp, i_perp, i_axis, mass


def body_from_spheroid(spec: SpheroidSpec, gamma0: float = 0.0, quadrupole: str = "approx") -> RigidBody:
    """Rigid body for a charged spheroid.

    ``quadrupole="approx"`` uses the thin-body ``deltaq_approx`` for
    ``|Q3 - Q2|``; ``"uniform"`` and ``"conductor"`` use the surface integral.
    """
    i1, i2, i3, mass = spheroid_inertia(spec)
    if quadrupole == "approx":
        dq = math.copysign(deltaq_approx(spec), spec.q_tot)
        q3 = 2.0 * dq / 3.0
        q1 = -dq / 3.0
    else:
        q1, _, q3, _ = spheroid_quadrupole(spec, charge_model=quadrupole)
    return RigidBody(I1=i1, I2=i2, I3=i3, Q1=q1, Q2=q1, Q3=q3, q_tot=spec.q_tot, mass=mass, gamma0=gamma0)


def pendulum_coupling(trap: TrapDrive, body: RigidBody) -> float:
    """Signed ``V0 (a_x - a_y)(Q2 - Q3) / (3 ell0^2 I1)``.

    Negative values mean the roles of the alpha = 0 and alpha = pi/2
    equilibria are swapped.
    """
    return trap.V0 * (trap.a_x - trap.a_y) * (body.Q2 - body.Q3) / (3.0 * trap.ell0**2 * body.I1)


def pendulum_omega0(trap: TrapDrive, body: RigidBody) -> float:
    """Parametric pendulum frequency ``omega0`` (rad/s)."""
    return math.sqrt(abs(pendulum_coupling(trap, body)))


# Reference configuration of the numerical phase diagram: rods of 15 um x 4 um,
# 2500 charges, ell0 = 30 um, |a_x - a_y| = 0.103, gamma0 / 2 pi = 1 kHz.
FIG3_SPHEROID = SpheroidSpec(a_minor=4e-6, b_major=15e-6, q_tot=2500 * E_CHARGE, density=SILICA_DENSITY)
FIG3_ELL0 = 30e-6
FIG3_A = (-0.049, 0.054, -0.005)
FIG3_GAMMA0 = 2.0 * math.pi * 1e3


def fig3_trap(V0: float, omega_d: float) -> TrapDrive:
    return validate_trap(TrapDrive(V0, omega_d, FIG3_ELL0, *FIG3_A))


def fig3_body(gamma0: float = FIG3_GAMMA0) -> RigidBody:
    return body_from_spheroid(FIG3_SPHEROID, gamma0=gamma0, quadrupole="approx")
