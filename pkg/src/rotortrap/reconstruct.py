"""Inverse problem: line centers from stroboscopic maps, then a rotation fit.

Stage one fits Gaussians to every delay column of a :class:`StroboMap`.
Stage two adjusts a uniform single-axis rotation (axis, initial
orientation, phase) so that the predicted NV transitions match the
measured centers for two non-parallel fields.

Two exact symmetries of the data are worth keeping in mind:

* the four [111] axes are mapped onto themselves (as lines) by the 24
  proper rotations of the cube, so the body frame is only defined modulo
  that group;
* a field enters only through ``|B . n|``, so a rotation by pi about
  ``B1``, about ``B2`` or (for orthogonal fields) about ``B1 x B2`` maps
  one exact solution onto another.

:func:`equivalent_axes` enumerates the second family for error metrics.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import curve_fit, linear_sum_assignment
from scipy.signal import find_peaks, peak_widths
from scipy.spatial.transform import Rotation
from scipy.stats import qmc

from .errors import AmbiguousAssignment, DegenerateGeometry, NonConvergence, TooFewLines
from .nvspin import FWHM_TO_SIGMA, NvModel, RotationModel, _transitions
from .rotor3d import Orientation

MIN_FIELD_ANGLE = math.radians(10.0)
N_STARTS = 32
MAX_ITER = 200
SIGMA_FLOOR_REL = 1e-2  # of the grid step
NULL_RATIO = 1e-9
MERGE_WIDTH = 1.5


# ---------------------------------------------------------------- extraction

@dataclass
class ResonanceTraces:
    """Measured line centers per delay column (Hz) with 1-sigma errors."""

    delays: np.ndarray
    centers: list
    sigmas: list
    widths: list = field(default_factory=list)
    f_window: tuple = (0.0, math.inf)
    flagged: tuple = ()
    labels: list | None = None

    def __post_init__(self):
        if not self.widths:
            self.widths = [np.full(len(c), np.nan) for c in self.centers]
        for c, s in zip(self.centers, self.sigmas):
            if np.any(np.asarray(s) <= 0):
                raise ValueError("uncertainties must be positive")
            if np.any((np.asarray(c) < self.f_window[0]) | (np.asarray(c) > self.f_window[1])):
                raise ValueError("line centers must lie inside the frequency window")

    def __len__(self):
        return len(self.delays)

    @property
    def n_lines(self) -> int:
        return sum(len(c) for c in self.centers)

    def merged_mask(self, column) -> np.ndarray:
        """Lines fitted markedly wider than the column median (unresolved pairs)."""
        w = np.asarray(self.widths[column])
        if len(w) == 0 or np.all(np.isnan(w)):
            return np.zeros(len(w), dtype=bool)
        ref = np.nanmedian(np.concatenate([np.asarray(x) for x in self.widths if len(x)]))
        return w > MERGE_WIDTH * ref

    def with_center_noise(self, sigma_hz: float, seed=0) -> "ResonanceTraces":
        """Copy with Gaussian noise added to every center (errors set to ``sigma_hz``)."""
        rng = np.random.default_rng(seed)
        centers = [np.clip(np.asarray(c) + rng.normal(0.0, sigma_hz, len(c)), *self.f_window) for c in self.centers]
        sigmas = [np.full(len(c), float(sigma_hz)) for c in self.centers]
        return ResonanceTraces(self.delays.copy(), centers, sigmas, [w.copy() for w in self.widths], self.f_window,
                               self.flagged)


def _gauss_sum(f, *p):
    base = p[0]
    out = np.full_like(f, base)
    for k in range(1, len(p), 3):
        out -= p[k] * np.exp(-0.5 * ((f - p[k + 1]) / p[k + 2]) ** 2)
    return out


def _fit_column(f, pl, n_lines, prominence, smooth):
    dip = 1.0 - pl
    sm = gaussian_filter1d(dip, smooth) if smooth > 0 else dip
    peaks, props = find_peaks(sm, prominence=prominence)
    if len(peaks) == 0:
        return np.empty(0), np.empty(0), np.empty(0)
    order = np.argsort(props["prominences"])[::-1][:n_lines]
    peaks = np.sort(peaks[order])
    widths = peak_widths(sm, peaks, rel_height=0.5)[0] * (f[1] - f[0])
    df = f[1] - f[0]
    sig = np.maximum(widths / FWHM_TO_SIGMA, 2 * df)
    span = 6.0 * float(np.max(sig))
    # fit clusters of overlapping lines independently
    groups, cur = [], [0]
    for i in range(1, len(peaks)):
        if f[peaks[i]] - f[peaks[i - 1]] < 2 * span:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    groups.append(cur)
    popt = np.empty(1 + 3 * len(peaks))
    perr = np.empty_like(popt)
    for grp in groups:
        p0, lo, hi = [1.0], [0.5], [1.5]
        for i in grp:
            pk, s = peaks[i], sig[i]
            p0 += [max(dip[pk], 1e-6), f[pk], s]
            lo += [0.0, f[pk] - 4 * s, df / 2]
            hi += [1.0, f[pk] + 4 * s, 20 * s]
        sel = (f > f[peaks[grp[0]]] - span) & (f < f[peaks[grp[-1]]] + span)
        try:
            g_opt, g_cov = curve_fit(_gauss_sum, f[sel], pl[sel], p0=p0, bounds=(lo, hi), maxfev=20000,
                                     ftol=1e-14, xtol=1e-14)
            g_err = np.sqrt(np.clip(np.diag(g_cov), 0.0, np.inf))
        except (RuntimeError, ValueError):
            g_opt, g_err = np.asarray(p0), np.full(len(p0), df)
        for n_i, i in enumerate(grp):
            popt[1 + 3 * i:4 + 3 * i] = g_opt[1 + 3 * n_i:4 + 3 * n_i]
            perr[1 + 3 * i:4 + 3 * i] = g_err[1 + 3 * n_i:4 + 3 * n_i]
    centers = popt[2::3]
    errs = np.nan_to_num(perr[2::3], nan=df, posinf=df)
    errs = np.maximum(errs, SIGMA_FLOOR_REL * df)
    inside = (centers >= f[0]) & (centers <= f[-1])
    return centers[inside], errs[inside], popt[3::3][inside] * FWHM_TO_SIGMA


def extract_resonances(smap, n_lines: int, prominence: float | None = None) -> ResonanceTraces:
    """Gaussian line centers per delay column of a stroboscopic map.

    Dips are located on a lightly smoothed copy (``prominence`` defaults to a
    quarter of the deepest dip in the map) and refined by a joint
    multi-Gaussian least-squares fit of the raw column.  Columns with fewer
    than ``n_lines`` resolved dips raise a :class:`TooFewLines` warning and
    keep the lines that were found.
    """
    if n_lines < 1:
        raise ValueError("n_lines must be >= 1")
    f = np.asarray(smap.freq_hz, dtype=float)
    df = f[1] - f[0]
    if prominence is None:
        prominence = 0.25 * float(np.max(1.0 - smap.pl))
    smooth = 1.0
    centers, sigmas, widths, flagged = [], [], [], []
    for j, col in enumerate(smap.pl):
        c, s, w = _fit_column(f, np.asarray(col, dtype=float), n_lines, prominence, smooth)
        if len(c) < n_lines:
            flagged.append(j)
            warnings.warn(f"column {j}: {len(c)} of {n_lines} lines resolved", TooFewLines, stacklevel=2)
        centers.append(c)
        sigmas.append(s)
        widths.append(w)
    window = (float(f[0] - 0.5 * df), float(f[-1] + 0.5 * df))
    return ResonanceTraces(np.asarray(smap.delays, dtype=float).copy(), centers, sigmas, widths, window, tuple(flagged))


# ---------------------------------------------------------------- forward model

def _branch(window, model):
    lo, hi = window
    if hi <= model.D * (1.0 + 0.02):
        return 0
    if lo >= model.D * (1.0 - 0.02):
        return 1
    return None


def _rodrigues(k, angles, v):
    """Rotate ``v`` (m, 3) about unit ``k`` by each angle; returns (n, m, 3)."""
    c = np.cos(angles)[:, None, None]
    s = np.sin(angles)[:, None, None]
    par = (v @ k)[None, :, None] * k[None, None, :]
    perp = v[None] - par
    cross = np.cross(k, v)[None]
    return par + c * perp + s * cross


def predicted_lines(axis, R0, phase, B, model: NvModel, omega_rot, delays, window=None) -> np.ndarray:
    """Transition frequencies ``(n_delays, 4, 2)`` of the rotating diamond."""
    k = np.asarray(axis, dtype=float)
    n0 = model.axes @ np.asarray(R0).T
    n = _rodrigues(k, omega_rot * np.asarray(delays) + phase, n0)
    B = np.asarray(B, dtype=float)
    b_par = n @ B
    b_perp = np.sqrt(np.maximum(B @ B - b_par * b_par, 0.0))
    return _transitions(b_par, b_perp, model)


def _select(lines, window, model):
    """Predicted lines per column restricted to the measured branch/window."""
    br = _branch(window, model)
    if br is not None:
        return np.sort(lines[:, :, br], axis=1)
    flat = np.sort(lines.reshape(len(lines), -1), axis=1)
    return flat


def _blend(pred, n, window):
    """Predicted lines as the detector sees them: inside ``window``, closest pairs merged down to ``n``."""
    lo, hi = window
    vals = sorted(float(v) for v in pred if lo <= v <= hi)
    wts = [1.0] * len(vals)
    while len(vals) > max(n, 1):
        gaps = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
        i = gaps.index(min(gaps))
        w = wts[i] + wts[i + 1]
        vals[i:i + 2] = [(wts[i] * vals[i] + wts[i + 1] * vals[i + 1]) / w]
        wts[i:i + 2] = [w]
    return np.asarray(vals)


def _match(meas, pred):
    """Indices into ``pred`` matched to each entry of ``meas`` (1-D, minimal total |diff|)."""
    if len(meas) == len(pred):
        order_m = np.argsort(meas)
        order_p = np.argsort(pred)
        idx = np.empty(len(meas), dtype=int)
        idx[order_m] = order_p
        return idx
    cost = np.abs(meas[:, None] - pred[None, :])
    r, c = linear_sum_assignment(cost)
    idx = np.zeros(len(meas), dtype=int)
    idx[r] = c
    return idx


def _column_residuals(m, pred, window):
    """Residuals of sorted measured centers ``m`` against the blended prediction."""
    p = _blend(pred, len(m), window)
    if len(p) == 0:
        return np.full(len(m), window[1] - window[0])
    if len(p) == len(m):
        return m - p
    return m - p[_match(m, p)]


@dataclass
class _Dataset:
    traces: ResonanceTraces
    B: np.ndarray
    meas: np.ndarray  # (n_delays, L) sorted per column, NaN padded
    weight: np.ndarray
    count: np.ndarray
    valid: np.ndarray


def _datasets(pairs, model):
    out = []
    for tr, B in pairs:
        n = len(tr)
        width = max([len(c) for c in tr.centers] + [1])
        meas = np.full((n, width), np.nan)
        wts = np.zeros((n, width))
        count = np.zeros(n, dtype=int)
        for j in range(n):
            c = np.asarray(tr.centers[j], dtype=float)
            order = np.argsort(c)
            meas[j, :len(c)] = c[order]
            wts[j, :len(c)] = 1.0 / np.asarray(tr.sigmas[j], dtype=float)[order]
            count[j] = len(c)
        valid = np.arange(width)[None, :] < count[:, None]
        out.append(_Dataset(tr, np.asarray(B, dtype=float), meas, wts, count, valid))
    return out


def _dataset_residuals(ds, pred):
    """Weighted residuals in a fixed order (sorted measured lines, column by column)."""
    lo, hi = ds.traces.f_window
    n_pred = pred.shape[1]
    R = np.zeros(ds.meas.shape)
    inside = np.all((pred >= lo) & (pred <= hi), axis=1)
    fast = inside & (ds.count == n_pred)
    if n_pred <= ds.meas.shape[1]:
        R[fast, :n_pred] = ds.meas[fast, :n_pred] - pred[fast]
    for j in np.nonzero(~fast & (ds.count > 0))[0]:
        c = ds.count[j]
        R[j, :c] = _column_residuals(ds.meas[j, :c], pred[j], (lo, hi))
    return R[ds.valid], (R * ds.weight)[ds.valid]


# ---------------------------------------------------------------- parametrization

def _sph(theta, phi):
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def _frame_for(axis):
    """Rotation taking e_x to ``axis`` (deterministic)."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    y = np.cross(helper, a)
    y /= np.linalg.norm(y)
    z = np.cross(a, y)
    return np.stack([a, y, z], axis=1)


@dataclass
class _Param:
    frame: np.ndarray
    R0s: np.ndarray

    def unpack(self, p):
        axis = self.frame @ _sph(p[0], p[1])
        R0 = Rotation.from_rotvec(p[2:5]).as_matrix() @ self.R0s
        return axis, R0, p[5]

    @staticmethod
    def centered(axis, R0, phase):
        par = _Param(_frame_for(axis), np.asarray(R0, dtype=float))
        return par, np.array([math.pi / 2, 0.0, 0.0, 0.0, 0.0, float(phase)])


def _residuals(p, par, data, model, omega_rot, weighted=True):
    axis, R0, phase = par.unpack(p)
    out = []
    for ds in data:
        lines = predicted_lines(axis, R0, phase, ds.B, model, omega_rot, ds.traces.delays)
        raw, w = _dataset_residuals(ds, _select(lines, ds.traces.f_window, model))
        out.append(w if weighted else raw)
    return np.concatenate(out) if out else np.empty(0)


def _jacobian(fun, p, r0, h=1e-7, central=False):
    J = np.empty((len(r0), len(p)))
    for i in range(len(p)):
        dp = np.zeros_like(p)
        dp[i] = h
        if central:
            J[:, i] = (fun(p + dp) - fun(p - dp)) / (2 * h)
        else:
            J[:, i] = (fun(p + dp) - r0) / h
    return J


@dataclass
class LmResult:
    p: np.ndarray
    cost: float
    history: list
    iterations: int
    converged: bool


def levenberg_marquardt(fun, p0, max_iter=MAX_ITER, xtol=1e-12, ftol=1e-15, lam0=1e-3) -> LmResult:
    """Damped Gauss-Newton; ``history`` holds the cost after every accepted step."""
    p = np.asarray(p0, dtype=float).copy()
    r = fun(p)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = lam0
    for it in range(1, max_iter + 1):
        J = _jacobian(fun, p, r)
        g = J.T @ r
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-12 * max(np.max(np.diag(A)), 1e-300))
        accepted = False
        while lam < 1e16:
            step = np.linalg.solve(A + lam * np.diag(diag), -g)
            r_new = fun(p + step)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            return LmResult(p, cost, history, it, True)
        rel_drop = (cost - cost_new) / max(cost, 1e-300)
        p = p + step
        r, cost = r_new, cost_new
        history.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if np.max(np.abs(step)) < xtol or rel_drop < ftol:
            return LmResult(p, cost, history, it, True)
    return LmResult(p, cost, history, max_iter, False)


# ---------------------------------------------------------------- fit

@dataclass
class FitResult:
    axis: np.ndarray
    orientation0: Orientation
    phase: float
    omega_rot: float
    rms_hz: float
    covariance: np.ndarray  # parameters (theta, phi, r1, r2, r3, phase) about the solution
    mode_variances: np.ndarray
    modes: np.ndarray  # columns: eigenvectors of the normal matrix (gauge removed)
    unconstrained_modes: list
    converged: bool
    iterations: int
    best_start: int
    n_starts: int
    history: list
    axis_theta: float = 0.0
    axis_phi: float = 0.0

    @property
    def rotation(self) -> RotationModel:
        return RotationModel(tuple(self.axis), self.omega_rot, self.orientation0, self.phase)

    def orientation_at(self, t) -> np.ndarray:
        return self.rotation.matrix(t)

    def axis_unconstrained(self, tol=1e-3) -> bool:
        """True if some unconstrained mode moves the rotation axis."""
        return any(np.linalg.norm(m[:2]) > tol for m in self.unconstrained_modes)

    def report(self):
        q = self.orientation0.quaternion
        yield ("axis_x", float(self.axis[0]))
        yield ("axis_y", float(self.axis[1]))
        yield ("axis_z", float(self.axis[2]))
        yield ("orientation0_qw", float(q[0]))
        yield ("orientation0_qx", float(q[1]))
        yield ("orientation0_qy", float(q[2]))
        yield ("orientation0_qz", float(q[3]))
        yield ("phase_rad", float(self.phase))
        yield ("omega_rot_rad_s", float(self.omega_rot))
        yield ("rms_hz", float(self.rms_hz))
        yield ("converged", bool(self.converged))
        yield ("iterations", int(self.iterations))
        yield ("best_start", int(self.best_start))
        yield ("n_starts", int(self.n_starts))
        yield ("unconstrained_modes", len(self.unconstrained_modes))


def _gauge_fix(axis, R0, phase, B1, model):
    """Re-split ``Rot(axis, phase) R0`` so class 1 is farthest from ``B1`` at zero phase."""
    k = np.asarray(axis)
    Reff = Rotation.from_rotvec(k * phase).as_matrix() @ R0
    n = Reff @ model.axes[0]
    b = np.asarray(B1) / np.linalg.norm(B1)
    # cos theta(psi) = const + cos(psi) (n_perp . b) + sin(psi) ((k x n) . b)
    cc = (n - (k @ n) * k) @ b
    ss = np.cross(k, n) @ b
    psi = math.atan2(-ss, -cc) if math.hypot(cc, ss) > 1e-12 else 0.0
    new_phase = (-psi + math.pi) % (2 * math.pi) - math.pi
    return Rotation.from_rotvec(-k * new_phase).as_matrix() @ Reff, new_phase


def _starts(n, seed):
    sob = qmc.Sobol(d=5, scramble=True, seed=seed).random(n)
    out = []
    for u in sob:
        z = 2.0 * u[0] - 1.0
        ph = 2.0 * math.pi * u[1]
        r = math.sqrt(max(0.0, 1.0 - z * z))
        axis = np.array([r * math.cos(ph), r * math.sin(ph), z])
        u1, u2, u3 = u[2], u[3], u[4]
        q = np.array([
            math.sqrt(1 - u1) * math.sin(2 * math.pi * u2),
            math.sqrt(1 - u1) * math.cos(2 * math.pi * u2),
            math.sqrt(u1) * math.sin(2 * math.pi * u3),
            math.sqrt(u1) * math.cos(2 * math.pi * u3),
        ])
        out.append((axis, Rotation.from_quat(q).as_matrix()))
    return out


def _angle(B1, B2):
    c = abs(np.dot(B1, B2)) / (np.linalg.norm(B1) * np.linalg.norm(B2))
    return math.acos(min(1.0, c))


def fit_rotation(traces1: ResonanceTraces, B1, traces2: ResonanceTraces | None, B2, model: NvModel, omega_rot: float,
                 n_starts: int = N_STARTS, seed: int = 0, starts=None) -> FitResult:
    """Least-squares fit of a uniform single-axis rotation to measured line centers.

    ``traces2`` may be ``None`` (or empty) for a single-field fit; the
    rotation about ``B1`` is then unconstrained and shows up in
    :attr:`FitResult.unconstrained_modes`.
    """
    pairs = [(traces1, B1)]
    if traces2 is not None and len(traces2) > 0 and traces2.n_lines > 0:
        if _angle(np.asarray(B1, float), np.asarray(B2, float)) < MIN_FIELD_ANGLE:
            raise DegenerateGeometry("fields closer than 10 degrees: rotation about B is undetermined")
        pairs.append((traces2, B2))
    data = _datasets(pairs, model)
    n_obs = int(sum(ds.count.sum() for ds in data))
    if n_obs < 6:
        raise NonConvergence(f"only {n_obs} line centers for 6 parameters")

    best = None
    start_list = starts if starts is not None else _starts(n_starts, seed)
    for i, (axis0, R0s) in enumerate(start_list):
        par, p0 = _Param.centered(axis0, R0s, 0.0)
        res = levenberg_marquardt(lambda p: _residuals(p, par, data, model, omega_rot), p0, max_iter=60)
        if best is None or res.cost < best[0].cost - 1e-12 * max(best[0].cost, 1e-300):
            best = (res, par, i)
    res, par, best_i = best
    # polish in a parametrization centred on the solution
    axis, R0, phase = par.unpack(res.p)
    par, p0 = _Param.centered(axis, R0, phase)
    fun = lambda p: _residuals(p, par, data, model, omega_rot)  # noqa: E731
    polish = levenberg_marquardt(fun, p0)
    history = res.history + polish.history[1:]
    axis, R0, phase = par.unpack(polish.p)
    axis = axis / np.linalg.norm(axis)
    R0, phase = _gauge_fix(axis, R0, phase, B1, model)

    par, p = _Param.centered(axis, R0, phase)
    fun = lambda q: _residuals(q, par, data, model, omega_rot)  # noqa: E731
    r = fun(p)
    J = _jacobian(fun, p, r, h=1e-6, central=True)
    # remove the gauge direction (rotate R0 about the axis, shift phase back)
    g = np.array([0.0, 0.0, *axis, -1.0])
    g /= np.linalg.norm(g)
    P = np.eye(6) - np.outer(g, g)
    A = P @ (J.T @ J) @ P
    lam, vec = np.linalg.eigh(A)
    keep = np.abs(vec.T @ g) < 0.5
    lam, vec = lam[keep], vec[:, keep]
    lam_max = max(float(np.max(lam)), 1e-300)
    null = lam < NULL_RATIO * lam_max
    variances = np.where(null, np.inf, 1.0 / np.where(null, 1.0, lam))
    cov = (vec[:, ~null] / lam[~null]) @ vec[:, ~null].T
    raw = _residuals(p, par, data, model, omega_rot, weighted=False)
    rms = float(np.sqrt(np.mean(raw * raw)))
    theta = math.acos(max(-1.0, min(1.0, axis[2])))
    phi = math.atan2(axis[1], axis[0])
    return FitResult(
        axis=axis,
        orientation0=Orientation.from_matrix(R0),
        phase=float(phase),
        omega_rot=float(omega_rot),
        rms_hz=rms,
        covariance=cov,
        mode_variances=variances,
        modes=vec,
        unconstrained_modes=[vec[:, i] for i in np.nonzero(null)[0]],
        converged=bool(polish.converged),
        iterations=res.iterations + polish.iterations,
        best_start=best_i,
        n_starts=len(start_list),
        history=history,
        axis_theta=theta,
        axis_phi=phi,
    )


# ---------------------------------------------------------------- symmetry and metrics

def field_symmetries(B1, B2=None) -> list:
    """Lab rotations leaving every ``|B . n|`` unchanged for the given fields."""
    b1 = np.asarray(B1, dtype=float) / np.linalg.norm(B1)
    out = [np.eye(3), Rotation.from_rotvec(math.pi * b1).as_matrix()]
    if B2 is None:
        return out
    b2 = np.asarray(B2, dtype=float) / np.linalg.norm(B2)
    if abs(b1 @ b2) < 1e-9:
        out.append(Rotation.from_rotvec(math.pi * b2).as_matrix())
        n = np.cross(b1, b2)
        out.append(Rotation.from_rotvec(math.pi * n / np.linalg.norm(n)).as_matrix())
    else:
        out = out[:1]
    return out


def equivalent_axes(axis, B1, B2=None) -> list:
    return [S @ np.asarray(axis, dtype=float) for S in field_symmetries(B1, B2)]


def axis_error(fitted_axis, true_axis, B1, B2=None) -> float:
    """Smallest angle between ``fitted_axis`` and any symmetry image of ``true_axis``."""
    f = np.asarray(fitted_axis) / np.linalg.norm(fitted_axis)
    return min(math.acos(max(-1.0, min(1.0, f @ a))) for a in equivalent_axes(true_axis, B1, B2))


def cube_group() -> list:
    """The 24 proper rotations permuting the [111] lines."""
    mats = []
    for perm in ((0, 1, 2), (1, 2, 0), (2, 0, 1), (1, 0, 2), (0, 2, 1), (2, 1, 0)):
        for signs in np.ndindex(2, 2, 2):
            M = np.zeros((3, 3))
            for r, c in enumerate(perm):
                M[r, c] = -1.0 if signs[r] else 1.0
            if np.linalg.det(M) > 0:
                mats.append(M)
    return mats


def orientation_error(fit: FitResult, truth: RotationModel, B1, B2=None, t: float = 0.0) -> float:
    """Rotation angle between fitted and true orientations at ``t``, modulo the data symmetries."""
    Rf = fit.orientation_at(t)
    Rt = truth.matrix(t)
    best = math.inf
    for S in field_symmetries(B1, B2):
        for G in cube_group():
            D = Rf.T @ S @ Rt @ G
            ang = math.acos(max(-1.0, min(1.0, 0.5 * (np.trace(D) - 1.0))))
            best = min(best, ang)
    return best


# ---------------------------------------------------------------- assignment

@dataclass
class Assignment:
    labels: list  # per column: class index (0..3) of each measured line, -1 if unmatched
    hypotheses: list  # alternative label lists for ambiguous crossings
    ambiguous_columns: tuple


def class_assignment(traces: ResonanceTraces, rotation: RotationModel, B, model: NvModel,
                     continuity: float = 0.5, n_sigma: float = 2.0) -> Assignment:
    """Label measured lines with NV classes using a candidate rotation.

    Cost = |measured - predicted| + ``continuity`` x |measured - extrapolated
    track position|; solved per column by linear assignment.  Where two
    predicted class lines come within ``n_sigma`` joint uncertainties, an
    :class:`AmbiguousAssignment` warning is issued and the swapped labeling
    is added as an extra hypothesis.
    """
    br = _branch(traces.f_window, model)
    lines = predicted_lines(rotation.axis, rotation.orientation0.matrix, rotation.phase, B, model, rotation.omega_rot,
                            traces.delays)
    labels, ambiguous = [], []
    hypotheses = []
    track = {}
    for j in range(len(traces)):
        m = np.asarray(traces.centers[j])
        s = np.asarray(traces.sigmas[j])
        if br is None:
            pred = lines[j].reshape(-1)
            cls = np.repeat(np.arange(4), 2)
        else:
            pred = lines[j, :, br]
            cls = np.arange(4)
        if len(m) == 0:
            labels.append(np.empty(0, dtype=int))
            continue
        cost = np.abs(m[:, None] - pred[None, :])
        for col, c in enumerate(cls):
            if c in track and j >= 2:
                cost[:, col] += continuity * np.abs(m - track[c])
        r, c = linear_sum_assignment(cost)
        lab = np.full(len(m), -1, dtype=int)
        lab[r] = cls[c]
        labels.append(lab)
        for i_m, i_p in zip(r, c):
            prev = track.get(cls[i_p])
            track[cls[i_p]] = m[i_m] if prev is None else 2 * m[i_m] - prev
        tol = n_sigma * math.sqrt(2.0) * (float(np.max(s)) if len(s) else 0.0) + model.linewidth_sigma
        close = [(a, b) for a in range(len(pred)) for b in range(a + 1, len(pred))
                 if abs(pred[a] - pred[b]) < tol and cls[a] != cls[b]]
        if close:
            ambiguous.append(j)
            for a, b in close:
                alt = [x.copy() for x in labels]
                swap = alt[-1]
                ia, ib = swap == cls[a], swap == cls[b]
                swap[ia], swap[ib] = cls[b], cls[a]
                hypotheses.append(alt)
    if ambiguous:
        warnings.warn(f"crossing class lines in columns {ambiguous}", AmbiguousAssignment, stacklevel=2)
    return Assignment(labels, hypotheses, tuple(ambiguous))
