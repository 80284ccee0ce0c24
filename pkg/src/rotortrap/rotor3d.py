"""Rigid-body rotation in the quadrupole trap.

Orientation is a unit quaternion ``(w, x, y, z)`` mapping body to lab
(``n_k = R e_k``); zy'z'' Euler angles ``R = Rz(alpha) Ry(beta) Rz(gamma)``
are derived for reporting.  The potential energy is

    U = V(t) / (3 ell0^2) Tr[R Q0 R^T A],   A = diag(a_x, a_y, a_z),

and the lab-frame torque ``N = (2 V(t) / 3 ell0^2) sum_j a_j e_j x (Q e_j)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

from . import kernels
from .errors import DegenerateSpectrum, StepFailure
from .model import RigidBody, TrapDrive

RTOL = 1e-10
ATOL = 1e-12
GIMBAL_EPS = 1e-8


# ---------------------------------------------------------------- kinematics

def rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_matrix(alpha, beta, gamma) -> np.ndarray:
    """``Rz(alpha) Ry(beta) Rz(gamma)``."""
    return rot_z(alpha) @ rot_y(beta) @ rot_z(gamma)


def euler_from_matrix(R) -> tuple:
    """zy'z'' angles with ``beta in [0, pi]`` and ``alpha, gamma in (-pi, pi]``.

    When ``|sin beta| < 1e-8`` only ``alpha +/- gamma`` is defined and
    ``gamma`` is set to zero.
    """
    R = np.asarray(R, dtype=float)
    beta = math.acos(min(1.0, max(-1.0, R[2, 2])))
    if math.sin(beta) > GIMBAL_EPS:
        alpha = math.atan2(R[1, 2], R[0, 2])
        gamma = math.atan2(R[2, 1], -R[2, 0])
    else:
        alpha = math.atan2(-R[0, 1], R[1, 1])
        gamma = 0.0
    if alpha == -math.pi:
        alpha = math.pi
    if gamma == -math.pi:
        gamma = math.pi
    return alpha, beta, gamma


def euler_from_matrices(R) -> np.ndarray:
    """Vectorized :func:`euler_from_matrix` for a stack ``(n, 3, 3)``."""
    R = np.asarray(R, dtype=float)
    beta = np.arccos(np.clip(R[:, 2, 2], -1.0, 1.0))
    regular = np.sin(beta) > GIMBAL_EPS
    alpha = np.where(regular, np.arctan2(R[:, 1, 2], R[:, 0, 2]), np.arctan2(-R[:, 0, 1], R[:, 1, 1]))
    gamma = np.where(regular, np.arctan2(R[:, 2, 1], -R[:, 2, 0]), 0.0)
    alpha = np.where(alpha == -np.pi, np.pi, alpha)
    gamma = np.where(gamma == -np.pi, np.pi, gamma)
    return np.stack([alpha, beta, gamma], axis=1)


def euler_rates_to_body_omega(alpha_dot, beta_dot, gamma_dot, beta, gamma) -> np.ndarray:
    """Body-frame angular velocity from zy'z'' Euler rates."""
    sb, cb = math.sin(beta), math.cos(beta)
    sg, cg = math.sin(gamma), math.cos(gamma)
    M = np.array([[-cg * sb, sg, 0.0], [sb * sg, cg, 0.0], [cb, 0.0, 1.0]])
    return M @ np.array([alpha_dot, beta_dot, gamma_dot], dtype=float)


def _quat_from_matrix(R):
    x, y, z, w = Rotation.from_matrix(np.asarray(R, dtype=float)).as_quat()
    q = np.array([w, x, y, z])
    return q if q[0] >= 0.0 else -q


def _quat_to_matrix(q):
    return kernels.quat_to_matrix(np.asarray(q, dtype=float))


def _quats_to_matrices(q):
    q = np.asarray(q, dtype=float)
    return Rotation.from_quat(q[:, [1, 2, 3, 0]]).as_matrix()


def axis_angle_matrix(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return Rotation.from_rotvec(axis / np.linalg.norm(axis) * angle).as_matrix()


class Orientation:
    """Unit quaternion ``(w, x, y, z)``; immutable value type."""

    __slots__ = ("_q",)

    def __init__(self, quaternion):
        q = np.array(quaternion, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if not n > 0.0:
            raise ValueError("zero quaternion")
        q = q / n
        q.setflags(write=False)
        self._q = q

    @classmethod
    def identity(cls):
        return cls((1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_euler(cls, alpha, beta, gamma):
        return cls.from_matrix(rotation_matrix(alpha, beta, gamma))

    @classmethod
    def from_matrix(cls, R):
        return cls(_quat_from_matrix(R))

    @classmethod
    def from_axis_angle(cls, axis, angle):
        return cls.from_matrix(axis_angle_matrix(axis, angle))

    @property
    def quaternion(self) -> np.ndarray:
        return self._q

    @property
    def matrix(self) -> np.ndarray:
        return _quat_to_matrix(self._q)

    @property
    def euler(self) -> tuple:
        return euler_from_matrix(self.matrix)

    def axis(self, k) -> np.ndarray:
        """Lab-frame body axis ``n_k`` (``k`` in 1..3)."""
        return self.matrix[:, k - 1].copy()

    def compose(self, other: "Orientation") -> "Orientation":
        """``self * other`` (apply ``other`` first)."""
        return Orientation.from_matrix(self.matrix @ other.matrix)

    def __repr__(self):
        return "Orientation(euler=({:.6g}, {:.6g}, {:.6g}))".format(*self.euler)


@dataclass(frozen=True)
class BodyState:
    orientation: Orientation
    omega_body: tuple
    t: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.omega_body, dtype=float).reshape(3)
        if not np.all(np.isfinite(w)) or not math.isfinite(self.t):
            raise ValueError("body state must be finite")
        object.__setattr__(self, "omega_body", tuple(float(v) for v in w))

    @classmethod
    def from_euler(cls, alpha, beta, gamma, alpha_dot=0.0, beta_dot=0.0, gamma_dot=0.0, t=0.0):
        w = euler_rates_to_body_omega(alpha_dot, beta_dot, gamma_dot, beta, gamma)
        return cls(Orientation.from_euler(alpha, beta, gamma), tuple(w), t)

    def angular_momentum_body(self, body: RigidBody) -> np.ndarray:
        return body.inertia * np.asarray(self.omega_body)


@dataclass
class Trajectory3D:
    t: np.ndarray
    quat: np.ndarray
    omega: np.ndarray

    CSV_HEADER = ("t_s", "qw", "qx", "qy", "qz", "alpha_rad", "beta_rad", "gamma_rad", "w1", "w2", "w3")

    def matrices(self) -> np.ndarray:
        return _quats_to_matrices(self.quat)

    def euler(self) -> np.ndarray:
        return euler_from_matrices(self.matrices())

    def body_axis(self, k) -> np.ndarray:
        """Lab-frame ``n_k(t)`` as an ``(n, 3)`` array."""
        return self.matrices()[:, :, k - 1]

    def state(self, i=-1) -> BodyState:
        return BodyState(Orientation(self.quat[i]), tuple(self.omega[i]), float(self.t[i]))

    def rows(self):
        eul = self.euler()
        for i in range(len(self.t)):
            yield (self.t[i], *self.quat[i], *eul[i], *self.omega[i])


# ---------------------------------------------------------------- potential

def _lab_quadrupole(R, body):
    return R @ np.diag(body.quadrupole) @ R.T


def _as_matrix(orientation):
    if isinstance(orientation, Orientation):
        return orientation.matrix
    arr = np.asarray(orientation, dtype=float)
    if arr.shape == (3,):
        return rotation_matrix(*arr)
    return arr


def potential_energy(orientation, trap: TrapDrive, body: RigidBody, t: float) -> float:
    R = _as_matrix(orientation)
    v = trap.voltage(t)
    return float(v / (3.0 * trap.ell0**2) * np.trace(_lab_quadrupole(R, body) @ np.diag(trap.a)))


def torque(orientation, trap: TrapDrive, body: RigidBody, t: float) -> np.ndarray:
    """Lab-frame quadrupole torque (N m)."""
    R = _as_matrix(orientation)
    M = _lab_quadrupole(R, body) @ np.diag(trap.a)
    pref = 2.0 * trap.voltage(t) / (3.0 * trap.ell0**2)
    return pref * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])


def kinetic_energy(omega_body, body: RigidBody) -> float:
    w = np.asarray(omega_body, dtype=float)
    return float(0.5 * np.sum(body.inertia * w * w))


# ---------------------------------------------------------------- integration

def _params(trap, body, static):
    return np.array(
        [body.I1, body.I2, body.I3, body.Q1, body.Q2, body.Q3, trap.a_x, trap.a_y, trap.a_z,
         trap.V0, trap.omega_d, trap.ell0, body.gamma0, 1.0 if static else 0.0]
    )


def integrate_rigid(trap: TrapDrive, body: RigidBody, state0: BodyState, t_end: float,
                    dt_max: float | None = None, sample_dt: float | None = None, static: bool = False,
                    rtol: float = RTOL, atol: float = ATOL) -> Trajectory3D:
    """Euler equations with isotropic damping plus quaternion kinematics.

    ``static=True`` freezes the voltage at ``V0`` (conservative reference
    problem).  Output is sampled every ``sample_dt`` (default ``dt_max``).
    """
    limit = trap.period / 200.0
    if dt_max is None:
        dt_max = limit
    elif not 0.0 < dt_max <= limit * (1 + 1e-12):
        raise ValueError(f"dt_max must lie in (0, T_drive/200 = {limit:.3e} s]")
    if not t_end > state0.t:
        raise ValueError("t_end must exceed the initial time")
    dt = sample_dt or dt_max
    n = int(math.ceil((t_end - state0.t) / dt - 1e-9))
    grid = state0.t + dt * np.arange(n + 1)
    grid[-1] = t_end
    y0 = np.concatenate([state0.orientation.quaternion, np.asarray(state0.omega_body, dtype=float)])
    out, status = kernels.rigid_dp5(y0, float(state0.t), grid, _params(trap, body, static), float(dt_max),
                                    float(rtol), float(atol))
    if status != kernels.OK:
        raise StepFailure(f"rigid-body integration failed (status {status})")
    return Trajectory3D(grid, out[:, :4].copy(), out[:, 4:].copy())


def total_energy(traj: Trajectory3D, trap: TrapDrive, body: RigidBody, static: bool = False) -> np.ndarray:
    R = traj.matrices()
    w = traj.omega
    kin = 0.5 * np.sum(body.inertia * w * w, axis=1)
    A = np.diag(trap.a)
    Q0 = np.diag(body.quadrupole)
    tr = np.einsum("nij,jk,nlk,li->n", R, Q0, R, A)
    v = trap.V0 if static else trap.voltage(traj.t)
    return kin + v / (3.0 * trap.ell0**2) * tr


def lab_angular_momentum(traj: Trajectory3D, body: RigidBody) -> np.ndarray:
    return np.einsum("nij,nj->ni", traj.matrices(), traj.omega * body.inertia)


# ---------------------------------------------------------------- equilibria

@dataclass(frozen=True)
class Equilibrium:
    orientation: Orientation
    assignment: tuple  # lab axis index carrying body axis 1, 2, 3
    stable: bool
    frequencies: tuple  # secular normal-mode frequencies (rad/s)


class EquilibriumSet(list):
    """The six axis-aligned equilibria (list of :class:`Equilibrium`)."""


def secular_potential(orientation, trap: TrapDrive, body: RigidBody) -> float:
    """Ponderomotive potential ``N^T I^-1 N / (4 omega_d^2)`` of the torque amplitude."""
    R = _as_matrix(orientation)
    n_lab = torque(R, trap, body, 0.0)
    n_body = R.T @ n_lab
    return float(np.sum(n_body * n_body / body.inertia) / (4.0 * trap.omega_d**2))


def _perturbed(R, delta):
    return R @ Rotation.from_rotvec(delta).as_matrix()


def secular_gradient(orientation, trap, body, h=1e-6) -> np.ndarray:
    R = _as_matrix(orientation)
    g = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = (secular_potential(_perturbed(R, e), trap, body) - secular_potential(_perturbed(R, -e), trap, body)) / (2 * h)
    return g


def secular_hessian(orientation, trap, body, h=1e-4) -> np.ndarray:
    R = _as_matrix(orientation)
    H = np.empty((3, 3))
    f0 = secular_potential(R, trap, body)
    for i in range(3):
        for j in range(i, 3):
            if i == j:
                e = np.zeros(3)
                e[i] = h
                val = (secular_potential(_perturbed(R, e), trap, body) - 2 * f0
                       + secular_potential(_perturbed(R, -e), trap, body)) / (h * h)
            else:
                vals = []
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    e = np.zeros(3)
                    e[i] = si * h
                    e[j] = sj * h
                    vals.append(si * sj * secular_potential(_perturbed(R, e), trap, body))
                val = sum(vals) / (4 * h * h)
            H[i, j] = H[j, i] = val
    return H


def _distinct(values, scale):
    v = sorted(values)
    return all(abs(v[i + 1] - v[i]) > 1e-12 * scale for i in range(len(v) - 1))


def equilibria(trap: TrapDrive, body: RigidBody) -> EquilibriumSet:
    """Orientations with every body axis along a lab axis.

    Stability and the local secular frequencies come from the Hessian of
    :func:`secular_potential` in body-fixed small rotations.
    """
    qs = body.quadrupole
    if not _distinct(qs, np.max(np.abs(qs))):
        raise DegenerateSpectrum("quadrupole eigenvalues coincide; equilibria form continua")
    if not _distinct(trap.a, np.max(np.abs(trap.a))):
        raise DegenerateSpectrum("trap coefficients coincide; equilibria form continua")
    out = EquilibriumSet()
    inv_sqrt_i = 1.0 / np.sqrt(body.inertia)
    for perm in itertools.permutations(range(3)):
        R = np.zeros((3, 3))
        for k, lab in enumerate(perm):
            R[lab, k] = 1.0
        if np.linalg.det(R) < 0:
            R[:, 2] *= -1.0
        H = secular_hessian(R, trap, body)
        K = inv_sqrt_i[:, None] * H * inv_sqrt_i[None, :]
        eig = np.linalg.eigvalsh(K)
        scale = max(np.max(np.abs(eig)), 1e-300)
        stable = bool(np.all(eig > 1e-6 * scale))
        freqs = tuple(float(math.sqrt(max(e, 0.0))) for e in eig)
        out.append(Equilibrium(Orientation.from_matrix(R), tuple(perm), stable, freqs))
    return out


# ---------------------------------------------------------------- closed forms

class LibrationFrequencies(NamedTuple):
    alpha: float
    beta: float
    gamma: float
    validity_parameter: float
    valid: bool


def libration_frequencies(trap: TrapDrive, body: RigidBody) -> LibrationFrequencies:
    """Closed-form secular frequencies about ``alpha = 0, beta = pi/2, gamma = 0``.

    ``w_a = (2/I1) (V0 / 3 ell0^2 omega_d) |(a_x - a_y)(Q2 - Q3)|`` and the
    analogous ``w_b`` (I2; x-z, Q1-Q3) and ``w_g`` (I3; y-z, Q1-Q2).  The
    flag reports whether ``max V0 |Qi - Qj| / (I_k omega_d^2 ell0^2) < 0.1``.
    """
    pref = 2.0 * trap.V0 / (3.0 * trap.ell0**2 * trap.omega_d)
    w_a = pref / body.I1 * abs((trap.a_x - trap.a_y) * (body.Q2 - body.Q3))
    w_b = pref / body.I2 * abs((trap.a_x - trap.a_z) * (body.Q1 - body.Q3))
    w_g = pref / body.I3 * abs((trap.a_y - trap.a_z) * (body.Q1 - body.Q2))
    p = validity_parameter(trap, body)
    return LibrationFrequencies(w_a, w_b, w_g, p, p < 0.1)


def validity_parameter(trap: TrapDrive, body: RigidBody) -> float:
    q = body.quadrupole
    dq = max(abs(q[i] - q[j]) for i in range(3) for j in range(3))
    return trap.V0 * dq / (min(body.inertia) * trap.omega_d**2 * trap.ell0**2)


class ModeFrequencies(NamedTuple):
    alpha: float
    beta: float
    gamma: float
    stable: tuple


def rotating_frame_frequencies(trap: TrapDrive, body: RigidBody, omega_d: float | None = None) -> ModeFrequencies:
    """Small-oscillation frequencies about the locked rotation (co-rotating frame).

    The expressions are linearized about the stable co-rotating phase: for
    ``(a_x - a_y)(Q2 - Q3) > 0`` that is ``alpha = 0`` and the sign of the
    ``(a_x - a_y)`` terms is flipped relative to the ``alpha = pi/2`` form.
    A mode whose squared frequency is negative is reported as NaN with its
    ``stable`` flag cleared.
    """
    w = trap.omega_d if omega_d is None else float(omega_d)
    dax = trap.a_x - trap.a_y
    k_sign = dax * (body.Q2 - body.Q3)
    d = dax if k_sign < 0.0 else -dax
    c = trap.V0 / trap.ell0**2
    half = 0.5 * w
    sq = (
        -c * (body.Q2 - body.Q3) * d / (3.0 * body.I1),
        body.I1 / body.I2 * half**2 - c * (body.Q1 - body.Q3) * d / (6.0 * body.I2),
        body.I1 / body.I3 * (body.I1 / body.I2 - 1.0) * half**2 - c * (body.Q2 - body.Q1) * d / (6.0 * body.I3),
    )
    vals, flags = [], []
    for s in sq:
        ok = s >= 0.0
        flags.append(ok)
        vals.append(math.sqrt(s) if ok else math.nan)
    return ModeFrequencies(vals[0], vals[1], vals[2], tuple(flags))


def corotating_potential_decomposition(orientation, trap: TrapDrive, body: RigidBody):
    """``(U0, u1, u2, u3)`` of the potential seen in the frame rotating at ``omega_d/2``.

    ``U(alpha + omega_d t / 2, beta, gamma, t) = U0 + u1 cos(w t) + u2 cos(2 w t) + u3 sin(2 w t)``.
    ``orientation`` is an :class:`Orientation` or an ``(alpha, beta, gamma)`` triple.
    """
    if isinstance(orientation, Orientation):
        alpha, beta, gamma = orientation.euler
    else:
        alpha, beta, gamma = (float(v) for v in orientation)
    Q1, Q2, Q3 = body.Q1, body.Q2, body.Q3
    ax, ay, az = trap.a_x, trap.a_y, trap.a_z
    cb2, sb2 = math.cos(beta) ** 2, math.sin(beta) ** 2
    cg2, sg2 = math.cos(gamma) ** 2, math.sin(gamma) ** 2
    c2a, s2a = math.cos(2 * alpha), math.sin(2 * alpha)
    cross = (Q2 - Q1) * math.cos(beta) * math.sin(2 * gamma)
    bracket = Q3 * sb2 + (Q2 * sg2 + Q1 * cg2) * cb2 - (Q1 * sg2 + Q2 * cg2)
    z_part = Q3 * cb2 + (Q1 * cg2 + Q2 * sg2) * sb2
    p_part = (Q1 * sg2 + Q2 * cg2) + Q3 * sb2 + (Q1 * cg2 + Q2 * sg2) * cb2
    scale = trap.V0 / trap.ell0**2
    U0 = scale * (ax - ay) / 12.0 * (bracket * c2a + cross * s2a)
    u1 = scale / 3.0 * (az * z_part + 0.5 * (ax + ay) * p_part)
    u2 = scale / 6.0 * (ax - ay) / 2.0 * (bracket * c2a + cross * s2a)
    u3 = -scale / 6.0 * (ax - ay) / 2.0 * (bracket * s2a - cross * c2a)
    return U0, u1, u2, u3


class ComFrequencies(NamedTuple):
    x: float
    y: float
    z: float
    q: tuple
    valid: bool


def com_secular_frequencies(trap: TrapDrive, charge: float, mass: float) -> ComFrequencies:
    """Lowest-order Paul-trap secular frequencies ``q_u omega_d / (2 sqrt 2)``."""
    qs = tuple(4.0 * abs(charge * trap.V0 * a) / (mass * trap.ell0**2 * trap.omega_d**2) for a in trap.a)
    w = tuple(q * trap.omega_d / (2.0 * math.sqrt(2.0)) for q in qs)
    return ComFrequencies(w[0], w[1], w[2], qs, max(qs) < 0.4)
