import math

import numpy as np
import pytest

from rotortrap import model, rotor3d as r3
from rotortrap.errors import DegenerateSpectrum

BODY = model.RigidBody(3e-24, 2.2e-24, 1e-24, -1e-22, -0.3e-22, 1.3e-22, q_tot=1e-16, mass=1e-12)


@pytest.fixture(scope="module")
def trap():
    return model.fig3_trap(800.0, 2 * math.pi * 20000.0)


def test_euler_roundtrip():
    for a, b, g in [(0.3, 1.1, -0.7), (-2.0, 0.2, 3.0), (1.0, math.pi - 0.1, 0.0)]:
        R = r3.rotation_matrix(a, b, g)
        np.testing.assert_allclose(r3.euler_from_matrix(R), (a, b, g), atol=1e-12)
        np.testing.assert_allclose(r3.rotation_matrix(*r3.euler_from_matrix(R)), R, atol=1e-12)


def test_euler_gimbal_lock_reconstructs_matrix():
    R = r3.rotation_matrix(0.4, 0.0, 0.3)
    a, b, g = r3.euler_from_matrix(R)
    assert g == 0.0 and b == 0.0
    np.testing.assert_allclose(r3.rotation_matrix(a, b, g), R, atol=1e-12)


def test_vectorized_euler_matches_scalar():
    Rs = np.stack([r3.rotation_matrix(0.1 * k, 0.3 + 0.2 * k, -0.5 * k) for k in range(6)])
    np.testing.assert_allclose(r3.euler_from_matrices(Rs), [r3.euler_from_matrix(R) for R in Rs], atol=1e-12)


def test_orientation_value_type():
    o = r3.Orientation.from_euler(0.3, 1.0, -0.2)
    assert abs(np.linalg.norm(o.quaternion) - 1) < 1e-15
    with pytest.raises(ValueError):
        o.quaternion[0] = 2.0
    np.testing.assert_allclose(o.axis(3), o.matrix[:, 2])
    np.testing.assert_allclose(o.compose(r3.Orientation.identity()).matrix, o.matrix, atol=1e-14)


def test_body_rates_from_euler_rates():
    # a pure alpha rotation at beta = pi/2 spins about the lab z axis = body x axis at gamma = 0
    st = r3.BodyState.from_euler(0.0, math.pi / 2, 0.0, 10.0, 0.0, 0.0)
    lab = st.orientation.matrix @ np.asarray(st.omega_body)
    np.testing.assert_allclose(lab, [0.0, 0.0, 10.0], atol=1e-12)


def test_torque_is_minus_gradient(trap):
    from scipy.spatial.transform import Rotation

    rng = np.random.default_rng(1)
    for _ in range(10):
        R = Rotation.random(random_state=rng).as_matrix()
        N = r3.torque(R, trap, BODY, 1e-5)
        g = []
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1e-6
            up = r3.potential_energy(Rotation.from_rotvec(e).as_matrix() @ R, trap, BODY, 1e-5)
            dn = r3.potential_energy(Rotation.from_rotvec(-e).as_matrix() @ R, trap, BODY, 1e-5)
            g.append(-(up - dn) / 2e-6)
        np.testing.assert_allclose(N, g, rtol=1e-6, atol=1e-9 * np.linalg.norm(N))


def test_static_field_conserves_energy():
    trap = model.fig3_trap(800.0, 2 * math.pi * 4500.0)
    body = model.fig3_body(0.0).replace(I2=0.8 * model.fig3_body().I1)
    st = r3.BodyState.from_euler(0.3, 1.2, -0.4, 500.0, 300.0, -800.0)
    tr = r3.integrate_rigid(trap, body, st, 500 * trap.period, sample_dt=trap.period, static=True, rtol=1e-12)
    E = r3.total_energy(tr, trap, body, static=True)
    assert np.max(np.abs(E / E[0] - 1)) < 1e-8


def test_quaternion_stays_normalized(trap):
    st = r3.BodyState.from_euler(0.3, 1.2, -0.4, 500.0, 300.0, -800.0)
    tr = r3.integrate_rigid(trap, BODY, st, 100 * trap.period, sample_dt=trap.period)
    assert np.max(np.abs(np.linalg.norm(tr.quat, axis=1) - 1)) < 1e-12


def test_sample_dt_and_rows(trap):
    st = r3.BodyState.from_euler(0.01, math.pi / 2, 0.0)
    tr = r3.integrate_rigid(trap, BODY, st, 4 * trap.period, sample_dt=trap.period / 2)
    assert len(tr.t) == 9
    row = next(iter(tr.rows()))
    assert len(row) == len(tr.CSV_HEADER)
    with pytest.raises(ValueError):
        r3.integrate_rigid(trap, BODY, st, trap.period, dt_max=trap.period)


def test_equilibria_six_assignments(trap):
    # the cycle-averaged potential is a positive quadratic form in the torque, so
    # every torque-free orientation is one of its minima (with different curvatures)
    eq = r3.equilibria(trap, BODY)
    assert len(eq) == 6 and all(q.stable for q in eq)
    assert len({q.assignment for q in eq}) == 6
    R = r3.rotation_matrix(0.3, 1.0, 0.2)
    probe = r3.secular_potential(R, trap, BODY)
    n_scale = np.linalg.norm(r3.torque(R, trap, BODY, 0.0))
    for q in eq:
        assert np.linalg.norm(r3.torque(q.orientation, trap, BODY, 0.0)) < 1e-9 * n_scale
        assert abs(r3.secular_potential(q.orientation, trap, BODY)) < 1e-12 * probe
        assert np.all(np.asarray(q.frequencies) > 0)


def test_equilibria_degenerate(trap):
    sym = BODY.replace(Q1=-0.65e-22, Q2=-0.65e-22)
    with pytest.raises(DegenerateSpectrum):
        r3.equilibria(trap, sym)


def test_libration_closed_form_scaling(trap):
    f = r3.libration_frequencies(trap, BODY)
    g = r3.libration_frequencies(trap.replace(V0=3 * trap.V0, omega_d=2 * trap.omega_d), BODY)
    np.testing.assert_allclose(np.array(g[:3]) / np.array(f[:3]), 1.5, rtol=1e-14)
    assert f.validity_parameter == pytest.approx(r3.validity_parameter(trap, BODY))


def test_rotating_modes_flag_instability():
    trap = model.fig3_trap(800.0, 2 * math.pi * 12000.0)
    body = model.fig3_body(0.0)  # I1 == I2: the gamma mode has zero restoring term
    m = r3.rotating_frame_frequencies(trap, body)
    assert m.stable[0] and m.stable[1]
    dq = body.Q3 - body.Q1
    unstable = body.replace(I2=1.02 * body.I1, Q2=body.Q2 + 0.02 * dq, Q1=body.Q1 - 0.02 * dq)
    m = r3.rotating_frame_frequencies(trap, unstable)
    assert not m.stable[2] and math.isnan(m.gamma)


def test_corotating_decomposition_identity(trap):
    rng = np.random.default_rng(4)
    W = trap.omega_d
    for _ in range(50):
        a, b, c = rng.uniform(-3, 3, 3)
        t = rng.uniform(0, 1e-3)
        U0, u1, u2, u3 = r3.corotating_potential_decomposition((a, b, c), trap, BODY)
        lhs = U0 + u1 * math.cos(W * t) + u2 * math.cos(2 * W * t) + u3 * math.sin(2 * W * t)
        rhs = r3.potential_energy((a + W * t / 2, b, c), trap, BODY, t)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12 * (abs(U0) + abs(u1) + abs(u2) + abs(u3)))


def test_com_frequencies():
    trap = model.fig3_trap(800.0, 2 * math.pi * 4500.0)
    c = r3.com_secular_frequencies(trap, 1e-16, 1e-12)
    assert c.valid
    assert c.y / c.x == pytest.approx(0.054 / 0.049)
    assert c.x == pytest.approx(c.q[0] * trap.omega_d / (2 * math.sqrt(2)))
