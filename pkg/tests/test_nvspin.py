import math
import warnings

import numpy as np
import pytest

from rotortrap import nvspin as nv
from rotortrap.errors import PulseTooLong
from rotortrap.rotor3d import Orientation

M = nv.NvModel()


def _hamiltonian_transitions(B, n, model=M):
    """Reference: diagonalize the full S=1 Hamiltonian in the NV frame."""
    n = np.asarray(n) / np.linalg.norm(n)
    sz = np.diag([1.0, 0.0, -1.0])
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / math.sqrt(2)
    sy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]) / math.sqrt(2)
    e1 = np.cross(n, [1.0, 0.0, 0.0] if abs(n[0]) < 0.9 else [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    b = np.array([B @ e1, B @ e2, B @ n])
    H = model.D * sz @ sz + model.gamma_e * (b[0] * sx + b[1] * sy + b[2] * sz)
    w, v = np.linalg.eigh(H)
    k0 = np.argmax(np.abs(v[1, :]) ** 2)
    return np.sort(np.delete(w, k0) - w[k0])


def test_zero_field():
    assert nv.transition_frequencies(np.zeros(3), (0, 0, 1)) == (M.D, M.D)


def test_parallel_field_closed_form():
    n = np.array(nv.NV_AXES[2])
    fm, fp = nv.transition_frequencies(0.01 * n, n)
    assert fm == pytest.approx(M.D - M.gamma_e * 0.01, rel=1e-12)
    assert fp == pytest.approx(M.D + M.gamma_e * 0.01, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_cubic_solver_matches_hamiltonian(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=3)
    B *= rng.uniform(1e-4, 0.2) / np.linalg.norm(B)
    n = rng.normal(size=3)
    np.testing.assert_allclose(nv.transition_frequencies(B, n), _hamiltonian_transitions(B, n), rtol=1e-11)


def test_perpendicular_field_shifts_both_up():
    n = np.array([0.0, 0.0, 1.0])
    fm, fp = nv.transition_frequencies(np.array([0.02, 0.0, 0.0]), n)
    assert fm > M.D and fp > fm


def test_field_limit():
    with pytest.raises(ValueError):
        nv.transition_frequencies(np.array([0.0, 0.0, 0.3]), (0, 0, 1))


def test_model_validation():
    with pytest.raises(ValueError):
        nv.NvModel(axes0=((0, 0, 1),) * 4)
    with pytest.raises(ValueError):
        nv.NvModel(contrast=1.5)
    assert nv.NvModel.with_fwhm(6.5e6).linewidth_sigma == pytest.approx(6.5e6 / (2 * math.sqrt(2 * math.log(2))))


def test_static_spectrum_eight_dips():
    from scipy.signal import find_peaks

    f = np.arange(2.5e9, 3.25e9, 0.25e6)
    B = 0.01 * np.array([0.3, 0.5, 0.81]) / np.linalg.norm([0.3, 0.5, 0.81])
    pl = nv.odmr_spectrum_static(Orientation.identity(), B, M, f)
    dips, _ = find_peaks(1 - pl, prominence=0.005)
    assert len(dips) == 8
    lines = np.sort(nv.all_transitions(Orientation.identity(), B, M).ravel())
    np.testing.assert_allclose(np.sort(f[dips]), lines, atol=0.5e6)
    assert pl.min() >= nv.PL_FLOOR and pl.max() <= 1.0


def test_theta_law_is_sinusoid():
    k = np.array([0.3, -0.5, 0.81])
    rot = nv.RotationModel(tuple(k / np.linalg.norm(k)), 2 * math.pi * 1000, Orientation.from_euler(0.4, 1.0, -0.3))
    tr = nv.theta_trace(rot, (1.0, 0.0, 0.0))
    t = np.linspace(0, rot.period, 50)
    for i in range(4):
        np.testing.assert_allclose(tr.cos_theta(i, rot.omega_rot, t), np.cos(nv.theta_angle(rot, i, (1, 0, 0), t)),
                                   atol=1e-12)


def test_theta_rejects_non_unit_field():
    rot = nv.RotationModel((0, 0, 1), 1.0)
    with pytest.raises(ValueError):
        nv.theta_angle(rot, 0, (1.0, 1.0, 0.0), 0.0)


def test_rotation_model_checks():
    with pytest.raises(ValueError):
        nv.RotationModel((0.0, 0.0, 2.0), 1.0)
    rot = nv.RotationModel((0.0, 0.0, 1.0), 2 * math.pi * 10)
    np.testing.assert_allclose(rot.matrix(rot.period), rot.matrix(0.0), atol=1e-12)


def test_continuous_average_bounds():
    rot = nv.RotationModel((0.0, 0.0, 1.0), 2 * math.pi * 1000)
    f = np.arange(2.7e9, 3.05e9, 1e6)
    pl = nv.odmr_continuous_rotating(rot, np.array([0.005, 0.0, 0.0]), M, f)
    assert np.all((pl > 1 - 8 * M.contrast) & (pl <= 1.0))
    with pytest.raises(ValueError):
        nv.odmr_continuous_rotating(rot, np.zeros(3), M, f, samples_per_period=64)


def test_strobe_duty_cycle_limit():
    rot = nv.RotationModel((0.0, 0.0, 1.0), 2 * math.pi * 1000)
    f = np.arange(2.8e9, 2.95e9, 1e6)
    with pytest.raises(PulseTooLong):
        nv.strobe_map(rot, np.array([0.01, 0, 0]), M, [0.0], f, tau=2e-5)
    smap = nv.strobe_map(rot, np.array([0.01, 0, 0]), M, [0.0, 1e-4], f, tau=1e-6, label="B1")
    rows = list(smap.rows())
    assert rows[0][0] == "delay_s" and len(rows) == 3
    np.testing.assert_allclose(smap.pl[0], nv.odmr_spectrum_static(rot.matrix(0.0), np.array([0.01, 0, 0]), M, f))


def test_band_edges_split():
    f = np.linspace(2.5e9, 3.2e9, 701)
    pl = 1 - 0.01 * ((np.abs(f - 2.7e9) < 0.05e9) | (np.abs(f - 3.0e9) < 0.05e9))
    (lo, hi) = nv.band_edges(f, pl)
    assert lo[0] == pytest.approx(2.651e9, rel=1e-3) and hi[1] == pytest.approx(3.049e9, rel=1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert nv.band_edges(f, pl, split=3.5e9)[1] is None


def test_parallel_field_beyond_level_crossing():
    # gamma_e B > D: |-1> drops below |0>; the f_minus transition becomes negative
    n = np.array(nv.NV_AXES[0])
    fm, fp = nv.transition_frequencies(0.115 * n, n)
    assert fm == pytest.approx(M.D - M.gamma_e * 0.115, rel=1e-12) and fm < 0
    assert fp == pytest.approx(M.D + M.gamma_e * 0.115, rel=1e-12)
