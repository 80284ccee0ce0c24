import math

import numpy as np
from hypothesis import given, settings, strategies as st

from rotortrap import model, nvspin as nv, rotor3d as r3, signal as sg
from rotortrap.config import apply_overrides, parse_config

angles = st.floats(-math.pi, math.pi, allow_nan=False)
polar = st.floats(1e-3, math.pi - 1e-3)
field = st.lists(st.floats(-0.1, 0.1, allow_nan=False), min_size=3, max_size=3)
unit = st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-2)


@settings(deadline=None)
@given(angles, polar, angles)
def test_euler_roundtrip(a, b, g):
    R = r3.rotation_matrix(a, b, g)
    np.testing.assert_allclose(r3.rotation_matrix(*r3.euler_from_matrix(R)), R, atol=1e-10)


@settings(deadline=None)
@given(angles, polar, angles)
def test_orientation_matrix_is_rotation(a, b, g):
    R = r3.Orientation.from_euler(a, b, g).matrix
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) > 0


@given(field, unit)
def test_transitions_symmetric_under_field_reversal(B, n):
    B = np.asarray(B)
    f1 = nv.transition_frequencies(B, n)
    f2 = nv.transition_frequencies(-B, n)
    np.testing.assert_allclose(f1, f2, rtol=1e-10)
    assert f1[0] <= f1[1]


@given(field, unit)
def test_transitions_match_full_hamiltonian(B, n):
    from test_nvspin import _hamiltonian_transitions

    B = np.asarray(B)
    np.testing.assert_allclose(nv.transition_frequencies(B, n), _hamiltonian_transitions(B, np.asarray(n)),
                               rtol=1e-10)


@given(angles, polar, angles, st.floats(0, 1e-3))
def test_corotating_identity(a, b, g, t):
    trap = model.fig3_trap(800.0, 2 * math.pi * 4500.0)
    body = model.RigidBody(3e-24, 2.2e-24, 1e-24, -1e-22, -0.3e-22, 1.3e-22, 1e-16, 1e-12)
    W = trap.omega_d
    U0, u1, u2, u3 = r3.corotating_potential_decomposition((a, b, g), trap, body)
    lhs = U0 + u1 * math.cos(W * t) + u2 * math.cos(2 * W * t) + u3 * math.sin(2 * W * t)
    rhs = r3.potential_energy((a + W * t / 2, b, g), trap, body, t)
    assert abs(lhs - rhs) <= 1e-10 * (abs(U0) + abs(u1) + abs(u2) + abs(u3))


@settings(max_examples=30, deadline=None)
@given(st.integers(64, 4096), st.integers(0, 2**32 - 1))
def test_psd_parseval(n, seed):
    x = np.random.default_rng(seed).normal(size=n) + 0.5
    p = sg.psd(x, 1000.0, n)  # one segment: Hann-weighted mean square
    w = np.hanning(n + 1)[:-1]
    ref = np.sum((w * x) ** 2) / np.sum(w * w)
    assert abs(p.total_power() / ref - 1) < 0.05


@given(st.dictionaries(st.from_regex(r"[a-z][a-z0-9_]{0,6}(\.[a-z0-9_]{1,6}){0,2}", fullmatch=True),
                       st.from_regex(r"[A-Za-z0-9.,+-]{1,10}", fullmatch=True), max_size=8))
def test_config_roundtrip(values):
    text = "".join(f"{k} = {v}\n" for k, v in values.items())
    cfg = parse_config(text)
    assert {k: cfg.values[k] for k in cfg.keys()} == values
    again = parse_config(cfg.snapshot())
    assert again.values == cfg.values
    apply_overrides(cfg, [f"{k}=x" for k in values])
    assert all(cfg.values[k] == "x" for k in values)


@given(st.floats(100.0, 2000.0), st.floats(2 * math.pi * 1e3, 2 * math.pi * 4e4))
def test_libration_scaling_exact(v0, w):
    body = model.RigidBody(3e-24, 2.2e-24, 1e-24, -1e-22, -0.3e-22, 1.3e-22, 1e-16, 1e-12)
    base = model.fig3_trap(v0, w)
    f = np.array(r3.libration_frequencies(base, body)[:3])
    g = np.array(r3.libration_frequencies(base.replace(V0=2 * v0, omega_d=2 * w), body)[:3])
    np.testing.assert_allclose(g, f, rtol=1e-14)
