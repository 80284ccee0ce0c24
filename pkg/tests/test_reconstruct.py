import math
import warnings

import numpy as np
import pytest

from rotortrap import nvspin as nv, reconstruct as rc
from rotortrap.errors import AmbiguousAssignment, DegenerateGeometry, NonConvergence, TooFewLines
from rotortrap.rotor3d import Orientation

M = nv.NvModel()
OMEGA = 2 * math.pi * 1000.0
K = np.array([0.3, -0.5, 0.81]) / np.linalg.norm([0.3, -0.5, 0.81])
TRUTH = nv.RotationModel(tuple(K), OMEGA, Orientation.from_euler(0.4, 1.0, -0.3))
B1, B2 = np.array([0.01, 0.0, 0.0]), np.array([0.0, 0.01, 0.0])
FREQ = np.arange(2.55e9, 2.905e9, 0.25e6)


@pytest.fixture(scope="module")
def traces():
    delays = np.arange(24) * TRUTH.period / 24
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TooFewLines)
        t1 = rc.extract_resonances(nv.strobe_map(TRUTH, B1, M, delays, FREQ, 1e-6), 4)
        t2 = rc.extract_resonances(nv.strobe_map(TRUTH, B2, M, delays, FREQ, 1e-6), 4)
    return t1, t2


def test_extraction_accuracy(traces):
    t1, _ = traces
    lines = rc.predicted_lines(K, TRUTH.orientation0.matrix, 0.0, B1, M, OMEGA, t1.delays)[:, :, 0]
    for j, c in enumerate(t1.centers):
        if j in t1.flagged or np.any(t1.merged_mask(j)):
            continue
        assert np.max(np.min(np.abs(np.asarray(c)[:, None] - lines[j][None, :]), axis=1)) < 1e3


def test_too_few_lines_warns():
    rot = nv.RotationModel((0.0, 0.0, 1.0), OMEGA, Orientation.identity())
    smap = nv.strobe_map(rot, np.array([0.0, 0.0, 0.01]), M, [0.0], FREQ, 1e-6)
    with pytest.warns(TooFewLines):
        rc.extract_resonances(smap, 4)


def test_center_noise_is_seeded(traces):
    t1, _ = traces
    a, b = t1.with_center_noise(1e5, seed=3), t1.with_center_noise(1e5, seed=3)
    for x, y in zip(a.centers, b.centers):
        np.testing.assert_array_equal(x, y)
    assert np.all(np.concatenate(a.sigmas) == 1e5)


def test_lm_on_rosenbrock():
    fun = lambda p: np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])  # noqa: E731
    res = rc.levenberg_marquardt(fun, [-1.2, 1.0])
    np.testing.assert_allclose(res.p, [1.0, 1.0], atol=1e-8)
    assert res.converged and np.all(np.diff(res.history) < 0)


def test_fit_with_known_start(traces):
    t1, t2 = traces
    start = [(K + 0.05 * np.array([1.0, 0.0, 0.0]), TRUTH.orientation0.matrix)]
    fit = rc.fit_rotation(t1, B1, t2, B2, M, OMEGA, starts=start)
    assert rc.axis_error(fit.axis, K, B1, B2) < 1e-6
    assert rc.orientation_error(fit, TRUTH, B1, B2) < 1e-5
    assert np.all(np.diff(fit.history) <= 0)
    assert dict(fit.report())["converged"] is True


def test_geometry_guards(traces):
    t1, t2 = traces
    with pytest.raises(DegenerateGeometry):
        rc.fit_rotation(t1, B1, t2, B1 + 1e-4 * B2, M, OMEGA, n_starts=1)
    tiny = rc.ResonanceTraces(t1.delays[:1], [np.asarray(t1.centers[0])[:2]], [np.full(2, 1e5)],
                              f_window=t1.f_window)
    with pytest.raises(NonConvergence):
        rc.fit_rotation(tiny, B1, None, None, M, OMEGA, n_starts=1)


def test_symmetry_groups():
    G = rc.cube_group()
    assert len(G) == 24
    axes = np.array(nv.NV_AXES)
    for g in G:
        img = axes @ g.T
        assert all(np.any(np.isclose(np.abs(img @ a), 1.0)) for a in axes)
    S = rc.field_symmetries(B1, B2)
    assert len(S) == 4
    for s in S:
        n = np.random.default_rng(0).normal(size=3)
        for B in (B1, B2):
            assert abs(B @ (s @ n)) == pytest.approx(abs(B @ n))
    assert rc.axis_error(S[1] @ K, K, B1, B2) < 1e-12


def test_class_assignment_labels_truth(traces):
    t1, _ = traces
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AmbiguousAssignment)
        a = rc.class_assignment(t1, TRUTH, B1, M)
    assert len(a.labels) == len(t1)
    clean = [j for j in range(len(t1)) if j not in a.ambiguous_columns and len(a.labels[j]) == 4]
    assert clean and all(sorted(a.labels[j]) == [0, 1, 2, 3] for j in clean)
