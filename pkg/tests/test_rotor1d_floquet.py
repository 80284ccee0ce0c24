import math

import numpy as np
import pytest

from rotortrap import floquet, model, rotor1d as r1
from rotortrap.errors import BoundaryNotFound, WindowOutOfRange


@pytest.fixture(scope="module")
def setup():
    return model.fig3_trap(800.0, 2 * math.pi * 4500.0), model.fig3_body()


def test_regime_from_eta():
    assert r1.RegimeLabel.from_eta(0.005).regime is r1.Regime.LIBRATING
    assert r1.RegimeLabel.from_eta(0.99).regime is r1.Regime.LOCKED_POSITIVE
    assert r1.RegimeLabel.from_eta(-1.01).regime is r1.Regime.LOCKED_NEGATIVE
    assert r1.RegimeLabel.from_eta(0.5).regime is r1.Regime.UNCLASSIFIED


def test_eta_window_checks(setup):
    trap, body = setup
    tr = r1.integrate_pendulum(trap, body, r1.librating_state(trap.omega_d), 10 * trap.period)
    with pytest.raises(WindowOutOfRange):
        r1.eta_rot(tr, 5 * trap.period, 10 * trap.period, trap.omega_d)
    with pytest.raises(WindowOutOfRange):
        r1.eta_rot(tr, 0.0, -1.0, trap.omega_d)


def test_dt_max_cap(setup):
    trap, body = setup
    with pytest.raises(ValueError):
        r1.integrate_pendulum(trap, body, r1.librating_state(trap.omega_d), trap.period, dt_max=trap.period / 10)


def test_free_damped_pendulum_decay():
    # tiny drive: alpha_dot decays as exp(-gamma t)
    body = model.fig3_body(2 * math.pi * 50.0)
    trap = model.fig3_trap(1e-9, 2 * math.pi * 4500.0)
    st = r1.PendulumState(0.0, 100.0)
    T = trap.period
    tr = r1.integrate_pendulum(trap, body, st, 20 * T, sample_dt=T)
    np.testing.assert_allclose(tr.alpha_dot, 100.0 * np.exp(-body.gamma0 * tr.t), rtol=1e-6)


def test_hermite_interpolation_exact_on_grid(setup):
    trap, body = setup
    tr = r1.integrate_pendulum(trap, body, r1.librating_state(trap.omega_d), 5 * trap.period)
    np.testing.assert_allclose(tr.at(tr.t[3:7]), tr.alpha[3:7], rtol=0, atol=1e-15)


def test_sweep_hysteresis_at_800V(setup):
    trap, body = setup
    w_lr, w_rl = r1.sweep_hysteresis(trap, body, 800.0, (2 * math.pi * 1500, 2 * math.pi * 12000))
    assert w_lr / (2 * math.pi) == pytest.approx(3953, rel=5e-3)
    assert w_rl / (2 * math.pi) == pytest.approx(5959, rel=5e-3)


def test_sweep_reports_missing_boundary(setup):
    trap, body = setup
    with pytest.raises(BoundaryNotFound):
        r1.sweep_hysteresis(trap, body, 800.0, (2 * math.pi * 8000, 2 * math.pi * 12000))


def test_one_point_phase_diagram_matches_sweep(setup):
    trap, body = setup
    rng = (2 * math.pi * 1500, 2 * math.pi * 12000)
    d = r1.phase_diagram(trap, body, [700.0], rng, floquet=False)
    assert (d.omega_lr[0], d.omega_rl[0]) == r1.sweep_hysteresis(trap, body, 700.0, rng)


def test_corotating_fixed_point_and_omega_max():
    w0, g0, wd = 2 * math.pi * 3000, 2 * math.pi * 1000, 2 * math.pi * 4000
    assert r1.omega_max(w0, g0) == pytest.approx(w0**2 / g0)
    fp = r1.corotating_fixed_point(w0, g0, wd)
    assert fp is not None
    assert r1.corotating_fixed_point(w0, g0, 2 * r1.omega_max(w0, g0) * 1.1) is None


# ---------------------------------------------------------------- floquet

def test_mathieu_boundary_a0():
    assert floquet.mathieu_boundary_q(0.0) == pytest.approx(0.908, abs=5e-3)


def test_mathieu_range():
    with pytest.raises(ValueError):
        floquet.mathieu_boundary_q(1.5)


def test_constant_system_matches_expm():
    A = np.array([[0.0, 1.0], [-4.0, -0.3]])
    sys = floquet.constant_system(A, 0.7)
    np.testing.assert_allclose(floquet.monodromy(sys), floquet.matrix_exponential(A, 0.7), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("q,damping", [(0.3, 0.0), (1.2, 0.0), (0.5, 0.2)])
def test_liouville(q, damping):
    sys = floquet.mathieu_system(0.1, q, damping)
    assert np.linalg.det(floquet.monodromy(sys)) == pytest.approx(floquet.liouville_determinant(sys), rel=1e-9)


def test_callable_path_agrees_with_hill_kernel():
    hill = floquet.mathieu_system(0.2, 0.6)
    gen = floquet.PeriodicLinearSystem(hill.period, coefficients=hill.matrix)
    np.testing.assert_allclose(floquet.monodromy(gen), floquet.monodromy(hill), rtol=1e-8, atol=1e-10)


def test_damped_boundary_at_800V(setup):
    trap, body = setup
    w = floquet.instability_boundary(trap, body, (2 * math.pi * 1500, 2 * math.pi * 12000))
    assert w / (2 * math.pi) == pytest.approx(4918, rel=2e-3)


def test_undamped_onset():
    # u'' + 2k cos(w t) u = 0 loses stability at w = 2.0989 sqrt(k)
    trap = model.fig3_trap(800.0, 1.0)
    body = model.fig3_body(0.0)
    w0 = model.pendulum_omega0(trap, body)
    w = floquet.instability_boundary(trap, body, (0.5 * w0, 10 * w0))
    assert w / w0 == pytest.approx(2.0989, rel=1e-3)
