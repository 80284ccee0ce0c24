"""Hot integration kernels.

Every kernel is an explicit Dormand-Prince 5(4) pair with error control,
step-size clipping to ``h_max`` and exact landing on requested output
times (the output grid doubles as dense output).  Kernels return a status
code instead of raising so they stay numba-compilable; the Python wrappers
translate codes into exceptions.
"""
import numpy as np

from ._jit import USING_NUMBA, njit

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2
NOT_FINITE = 3

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

MAX_STEPS_DEFAULT = 50_000_000


HILL = 0
RIGID = 1


@njit
def _clip_step(h, h_max, remaining):
    # land exactly on output times without leaving rounding slivers
    hh = min(h, h_max)
    if hh >= remaining * (1.0 - 1e-9):
        return remaining, True
    if remaining - hh < 0.01 * hh:
        return 0.5 * remaining, False
    return hh, False


@njit
def _pend_rhs(t, a, b, c0, c1, omega, gamma, force):
    return b, -gamma * b - (c0 + c1 * np.cos(omega * t)) * np.sin(2.0 * a) - force


@njit
def pendulum_dp5(c0, c1, omega, gamma, force, a0, b0, t0, t_out, h_max, rtol, atol):
    """Integrate a'' = -gamma a' - (c0 + c1 cos(omega t)) sin(2a) - force.

    Returns ``(alpha, alpha_dot, status)`` sampled at ``t_out``.
    """
    n = t_out.shape[0]
    out_a = np.empty(n)
    out_b = np.empty(n)
    t = t0
    a = a0
    b = b0
    h = h_max
    k1a, k1b = _pend_rhs(t, a, b, c0, c1, omega, gamma, force)
    steps = 0
    i = 0
    while i < n and t_out[i] <= t:
        out_a[i] = a
        out_b[i] = b
        i += 1
    while i < n:
        target = t_out[i]
        hh, landing = _clip_step(h, h_max, target - t)
        if hh <= 1e-15 * max(abs(t), 1e-300) or hh <= 0.0:
            return out_a, out_b, STEP_UNDERFLOW
        if steps > MAX_STEPS_DEFAULT:
            return out_a, out_b, MAX_STEPS
        steps += 1
        k2a, k2b = _pend_rhs(t + C2 * hh, a + hh * A21 * k1a, b + hh * A21 * k1b, c0, c1, omega, gamma, force)
        k3a, k3b = _pend_rhs(
            t + C3 * hh, a + hh * (A31 * k1a + A32 * k2a), b + hh * (A31 * k1b + A32 * k2b),
            c0, c1, omega, gamma, force,
        )
        k4a, k4b = _pend_rhs(
            t + C4 * hh,
            a + hh * (A41 * k1a + A42 * k2a + A43 * k3a),
            b + hh * (A41 * k1b + A42 * k2b + A43 * k3b),
            c0, c1, omega, gamma, force,
        )
        k5a, k5b = _pend_rhs(
            t + C5 * hh,
            a + hh * (A51 * k1a + A52 * k2a + A53 * k3a + A54 * k4a),
            b + hh * (A51 * k1b + A52 * k2b + A53 * k3b + A54 * k4b),
            c0, c1, omega, gamma, force,
        )
        k6a, k6b = _pend_rhs(
            t + hh,
            a + hh * (A61 * k1a + A62 * k2a + A63 * k3a + A64 * k4a + A65 * k5a),
            b + hh * (A61 * k1b + A62 * k2b + A63 * k3b + A64 * k4b + A65 * k5b),
            c0, c1, omega, gamma, force,
        )
        an = a + hh * (B1 * k1a + B3 * k3a + B4 * k4a + B5 * k5a + B6 * k6a)
        bn = b + hh * (B1 * k1b + B3 * k3b + B4 * k4b + B5 * k5b + B6 * k6b)
        k7a, k7b = _pend_rhs(t + hh, an, bn, c0, c1, omega, gamma, force)
        ea = hh * (E1 * k1a + E3 * k3a + E4 * k4a + E5 * k5a + E6 * k6a + E7 * k7a)
        eb = hh * (E1 * k1b + E3 * k3b + E4 * k4b + E5 * k5b + E6 * k6b + E7 * k7b)
        sa = atol + rtol * max(abs(a), abs(an))
        sb = atol + rtol * max(abs(b), abs(bn))
        err = max(abs(ea) / sa, abs(eb) / sb)
        if not (err == err):
            return out_a, out_b, NOT_FINITE
        if err <= 1.0:
            t = target if landing else t + hh
            a = an
            b = bn
            k1a = k7a
            k1b = k7b
            while i < n and t_out[i] <= t:
                out_a[i] = a
                out_b[i] = b
                i += 1
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            if not landing:
                h = hh * fac
            else:
                h = max(h, hh * fac)
        else:
            h = hh * max(0.2, 0.9 * err ** -0.2)
    return out_a, out_b, OK




@njit
def _hill_rhs(t, y, p):
    # p = (p0, p1, omega, damping); y = (x_a, v_a, x_b, v_b)
    k = p[0] + p[1] * np.cos(p[2] * t)
    out = np.empty(4)
    out[0] = y[1]
    out[1] = -p[3] * y[1] - k * y[0]
    out[2] = y[3]
    out[3] = -p[3] * y[3] - k * y[2]
    return out


@njit
def quat_to_matrix(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    r = np.empty((3, 3))
    r[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    r[0, 1] = 2.0 * (x * y - w * z)
    r[0, 2] = 2.0 * (x * z + w * y)
    r[1, 0] = 2.0 * (x * y + w * z)
    r[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    r[1, 2] = 2.0 * (y * z - w * x)
    r[2, 0] = 2.0 * (x * z - w * y)
    r[2, 1] = 2.0 * (y * z + w * x)
    r[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return r


@njit
def body_torque(r, pref, inertia_q, a_diag):
    """Body-frame quadrupole torque for lab tensor A = diag(a_diag)."""
    # M = Q0 (R^T A R);  N_i = pref * eps_ijl M_lj
    m = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += r[k, i] * a_diag[k] * r[k, j]
            m[i, j] = inertia_q[i] * s
    n = np.empty(3)
    n[0] = pref * (m[2, 1] - m[1, 2])
    n[1] = pref * (m[0, 2] - m[2, 0])
    n[2] = pref * (m[1, 0] - m[0, 1])
    return n


@njit
def _rigid_rhs(t, y, p):
    # p = (I1, I2, I3, Q1, Q2, Q3, ax, ay, az, V0, omega_d, ell0, gamma0, static)
    r = quat_to_matrix(y[:4])
    if p[13] != 0.0:
        v = p[9]
    else:
        v = p[9] * np.cos(p[10] * t)
    pref = 2.0 * v / (3.0 * p[11] * p[11])
    n = body_torque(r, pref, p[3:6], p[6:9])
    w1, w2, w3 = y[4], y[5], y[6]
    i1, i2, i3 = p[0], p[1], p[2]
    g = p[12]
    out = np.empty(7)
    qw, qx, qy, qz = y[0], y[1], y[2], y[3]
    out[0] = -0.5 * (qx * w1 + qy * w2 + qz * w3)
    out[1] = 0.5 * (qw * w1 + qy * w3 - qz * w2)
    out[2] = 0.5 * (qw * w2 + qz * w1 - qx * w3)
    out[3] = 0.5 * (qw * w3 + qx * w2 - qy * w1)
    out[4] = ((i2 - i3) * w2 * w3 + n[0]) / i1 - g * w1
    out[5] = ((i3 - i1) * w3 * w1 + n[1]) / i2 - g * w2
    out[6] = ((i1 - i2) * w1 * w2 + n[2]) / i3 - g * w3
    return out


@njit
def _system_rhs(system, t, y, p):
    if system == HILL:
        return _hill_rhs(t, y, p)
    return _rigid_rhs(t, y, p)


@njit
def _dp5(system, y0, t0, t_out, p, h_max, rtol, atol):
    """Array-state DP5 integrator for the system selected by ``system``."""
    m = y0.shape[0]
    n = t_out.shape[0]
    out = np.empty((n, m))
    y = y0.copy()
    t = t0
    h = h_max
    k1 = _system_rhs(system, t, y, p)
    steps = 0
    i = 0
    tmp = np.empty(m)
    while i < n and t_out[i] <= t:
        out[i, :] = y
        i += 1
    while i < n:
        target = t_out[i]
        hh, landing = _clip_step(h, h_max, target - t)
        if hh <= 1e-15 * max(abs(t), 1e-300) or hh <= 0.0:
            return out, STEP_UNDERFLOW
        if steps > MAX_STEPS_DEFAULT:
            return out, MAX_STEPS
        steps += 1
        for j in range(m):
            tmp[j] = y[j] + hh * A21 * k1[j]
        k2 = _system_rhs(system, t + C2 * hh, tmp, p)
        for j in range(m):
            tmp[j] = y[j] + hh * (A31 * k1[j] + A32 * k2[j])
        k3 = _system_rhs(system, t + C3 * hh, tmp, p)
        for j in range(m):
            tmp[j] = y[j] + hh * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        k4 = _system_rhs(system, t + C4 * hh, tmp, p)
        for j in range(m):
            tmp[j] = y[j] + hh * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        k5 = _system_rhs(system, t + C5 * hh, tmp, p)
        for j in range(m):
            tmp[j] = y[j] + hh * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j])
        k6 = _system_rhs(system, t + hh, tmp, p)
        yn = np.empty(m)
        for j in range(m):
            yn[j] = y[j] + hh * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j] + B5 * k5[j] + B6 * k6[j])
        k7 = _system_rhs(system, t + hh, yn, p)
        err = 0.0
        for j in range(m):
            e = hh * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j])
            sc = atol + rtol * max(abs(y[j]), abs(yn[j]))
            r = abs(e) / sc
            if r > err or not (r == r):
                err = r
        if not (err == err):
            return out, NOT_FINITE
        if err <= 1.0:
            t = target if landing else t + hh
            if system == RIGID:
                nrm = np.sqrt(yn[0] ** 2 + yn[1] ** 2 + yn[2] ** 2 + yn[3] ** 2)
                for j in range(4):
                    yn[j] /= nrm
                k7 = _system_rhs(system, t, yn, p)
            y = yn
            k1 = k7
            while i < n and t_out[i] <= t:
                out[i, :] = y
                i += 1
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            if not landing:
                h = hh * fac
            else:
                h = max(h, hh * fac)
        else:
            h = hh * max(0.2, 0.9 * err ** -0.2)
    return out, OK



@njit
def hill_dp5(y0, t0, t_out, p, h_max, rtol, atol):
    return _dp5(HILL, y0, t0, t_out, p, h_max, rtol, atol)


@njit
def rigid_dp5(y0, t0, t_out, p, h_max, rtol, atol):
    return _dp5(RIGID, y0, t0, t_out, p, h_max, rtol, atol)

__all__ = [
    "OK",
    "STEP_UNDERFLOW",
    "MAX_STEPS",
    "NOT_FINITE",
    "USING_NUMBA",
    "pendulum_dp5",
    "hill_dp5",
    "rigid_dp5",
    "quat_to_matrix",
    "body_torque",
]
