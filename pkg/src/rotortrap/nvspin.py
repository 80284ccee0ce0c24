"""NV- ensemble spin model for a rotating diamond.

Each of the four [111] classes is a spin-1 ground state

    H = D Sz^2 + gamma_e (B_par Sz + B_perp Sx)

in its own frame.  In the basis ``(|+1>, |0>, |-1>)`` the matrix is real
and tridiagonal; its eigenvalues are found with the trigonometric solution
of the characteristic cubic (LAPACK is used only when the cubic is
ill-conditioned, i.e. near a double root).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ClampWarning, PulseTooLong
from .rotor3d import Orientation, axis_angle_matrix

D_ZFS = 2.87e9  # Hz
GAMMA_E = 28.024e9  # Hz/T, standard NV electron value
FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
DEFAULT_FWHM = 6.5e6
DEFAULT_CONTRAST = 0.02
MAX_FIELD = 0.3  # T
PL_FLOOR = 1e-6
MAX_DUTY = 0.01
_ILL_CONDITIONED = 1e-12

NV_AXES = tuple(
    tuple(v / math.sqrt(3.0) for v in vec)
    for vec in ((1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0))
)


@dataclass(frozen=True)
class NvModel:
    D: float = D_ZFS
    gamma_e: float = GAMMA_E
    axes0: tuple = NV_AXES
    linewidth_sigma: float = DEFAULT_FWHM / FWHM_TO_SIGMA
    contrast: float = DEFAULT_CONTRAST

    def __post_init__(self):
        ax = np.asarray(self.axes0, dtype=float)
        if ax.shape != (4, 3):
            raise ValueError("axes0 must hold four 3-vectors")
        if np.max(np.abs(np.linalg.norm(ax, axis=1) - 1.0)) > 1e-9:
            raise ValueError("NV axes must be unit vectors")
        for i in range(4):
            for j in range(i + 1, 4):
                if abs(abs(ax[i] @ ax[j]) - 1.0 / 3.0) > 1e-9:
                    raise ValueError("NV axes must form a [111] family")
        if not 0.0 < self.contrast < 1.0:
            raise ValueError("contrast must lie in (0, 1)")
        if not self.linewidth_sigma > 0.0:
            raise ValueError("linewidth must be positive")

    @classmethod
    def with_fwhm(cls, fwhm_hz, **kwargs):
        return cls(linewidth_sigma=fwhm_hz / FWHM_TO_SIGMA, **kwargs)

    @property
    def axes(self) -> np.ndarray:
        return np.asarray(self.axes0, dtype=float)


# ---------------------------------------------------------------- spectrum

def _hamiltonian_parts(b_par, b_perp, model):
    """Diagonal (d_plus, 0, d_minus) and off-diagonal coupling of H (Hz)."""
    zp = model.gamma_e * b_par
    c = model.gamma_e * b_perp / math.sqrt(2.0)
    return model.D + zp, model.D - zp, c


def _cubic_eigenvalues(d1, d2, c):
    """Sorted eigenvalues of [[d1, c, 0], [c, 0, c], [0, c, d2]] (arrays)."""
    d1, d2, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (d1, d2, c)))
    shape = d1.shape
    d1, d2, c = d1.ravel(), d2.ravel(), c.ravel()
    q = (d1 + d2) / 3.0
    a11, a22, a33 = d1 - q, -q, d2 - q
    p2 = a11 * a11 + a22 * a22 + a33 * a33 + 4.0 * c * c
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0.0, p, 1.0)
    b11, b22, b33, bc = a11 / safe, a22 / safe, a33 / safe, c / safe
    r = 0.5 * (b11 * b22 * b33 - b11 * bc * bc - b33 * bc * bc)
    ill = (1.0 - r * r < _ILL_CONDITIONED) | (p == 0.0)
    phi = np.arccos(np.clip(r, -1.0, 1.0)) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    mid = d1 + d2 - hi - lo
    out = np.stack([lo, mid, hi], axis=-1)
    if np.any(ill):
        H = np.zeros((int(ill.sum()), 3, 3))
        H[:, 0, 0] = d1[ill]
        H[:, 2, 2] = d2[ill]
        H[:, 0, 1] = H[:, 1, 0] = c[ill]
        H[:, 1, 2] = H[:, 2, 1] = c[ill]
        out[ill] = np.linalg.eigvalsh(H)
    return out.reshape(shape + (3,))


def _zero_weight(lam, d1, d2, c):
    """``|<0|psi>|^2`` of the eigenvector with eigenvalue ``lam``."""
    # eigenvalues within rounding of d1 / d2 belong to the pure |+-1> states
    tol = 64.0 * np.finfo(float).eps * np.maximum(np.maximum(np.abs(d1), np.abs(d2)), np.abs(c))
    e1 = np.where(np.abs(lam - d1) <= tol, 0.0, lam - d1)
    e2 = np.where(np.abs(lam - d2) <= tol, 0.0, lam - d2)
    u, v = e1 * e1, e2 * e2
    num = u * v
    den = num + c * c * (u + v)
    # uncoupled limit: |0> is the eigenvalue closest to 0 rather than to d1 or d2
    pure = np.where(np.abs(lam) < np.minimum(np.abs(e1), np.abs(e2)), 1.0, 0.0)
    return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), pure)


def _transitions(b_par, b_perp, model):
    d1, d2, c = _hamiltonian_parts(b_par, b_perp, model)
    d1, d2, c = np.broadcast_arrays(d1, d2, c)
    ev = _cubic_eigenvalues(d1, d2, c)
    w = _zero_weight(ev, d1[..., None], d2[..., None], c[..., None])
    k0 = np.argmax(w, axis=-1)
    e0 = np.take_along_axis(ev, k0[..., None], axis=-1)[..., 0]
    others = np.where(np.arange(3) == k0[..., None], np.inf, ev)
    others = np.sort(others, axis=-1)[..., :2]
    f = others - e0[..., None]
    return np.sort(f, axis=-1)


def _field_components(B_lab, axis):
    B = np.asarray(B_lab, dtype=float)
    n = np.asarray(axis, dtype=float)
    b_par = B @ n if B.ndim == 1 else np.einsum("...i,...i->...", B, n)
    b2 = np.sum(B * B, axis=-1)
    b_perp = np.sqrt(np.maximum(b2 - b_par * b_par, 0.0))
    return b_par, b_perp


def transition_frequencies(B_lab, axis, model: NvModel = NvModel()):
    """``(f_minus, f_plus)`` in Hz for an NV axis (lab frame) in field ``B_lab`` (T)."""
    B = np.asarray(B_lab, dtype=float)
    if np.linalg.norm(B) >= MAX_FIELD:
        raise ValueError(f"|B| must stay below {MAX_FIELD} T")
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    b_par, b_perp = _field_components(B, n)
    f = _transitions(b_par, b_perp, model)
    return float(f[0]), float(f[1])


def class_axes(orientation, model: NvModel) -> np.ndarray:
    """Lab-frame class axes ``(4, 3)`` for an orientation (or rotation matrix)."""
    R = orientation.matrix if isinstance(orientation, Orientation) else np.asarray(orientation, dtype=float)
    return model.axes @ R.T


def all_transitions(orientation, B_lab, model: NvModel) -> np.ndarray:
    """Transition frequencies ``(4, 2)``: class x (f_minus, f_plus)."""
    axes = class_axes(orientation, model)
    B = np.asarray(B_lab, dtype=float)
    b_par = axes @ B
    b_perp = np.sqrt(np.maximum(B @ B - b_par * b_par, 0.0))
    return _transitions(b_par, b_perp, model)


def lines_to_pl(centers, model: NvModel, freq_grid) -> np.ndarray:
    f = np.asarray(freq_grid, dtype=float)
    centers = np.asarray(centers, dtype=float).ravel()
    s = model.linewidth_sigma
    dip = model.contrast * np.exp(-0.5 * ((f[:, None] - centers[None, :]) / s) ** 2).sum(axis=1)
    return np.clip(1.0 - dip, PL_FLOOR, 1.0)


def odmr_spectrum_static(orientation, B_lab, model: NvModel, freq_grid) -> np.ndarray:
    """Normalized PL with eight Gaussian dips (four classes x two transitions)."""
    return lines_to_pl(all_transitions(orientation, B_lab, model), model, freq_grid)


# ---------------------------------------------------------------- rotation

@dataclass(frozen=True)
class RotationModel:
    """Uniform rotation ``R(t) = Rot(axis, omega_rot t + phase) R0``."""

    axis: tuple
    omega_rot: float
    orientation0: Orientation = field(default_factory=Orientation.identity)
    phase: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError("rotation axis must be a unit vector")
        object.__setattr__(self, "axis", tuple(float(v) for v in a))

    @property
    def period(self) -> float:
        return 2.0 * math.pi / abs(self.omega_rot)

    def matrix(self, t) -> np.ndarray:
        return axis_angle_matrix(self.axis, self.omega_rot * t + self.phase) @ self.orientation0.matrix

    def orientation(self, t) -> Orientation:
        return Orientation.from_matrix(self.matrix(t))


def theta_angle(rot: RotationModel, class_i: int, B_dir, t) -> np.ndarray:
    """Angle between class ``class_i`` (0..3) and the field direction at times ``t``."""
    b = np.asarray(B_dir, dtype=float)
    if abs(np.linalg.norm(b) - 1.0) > 1e-9:
        raise ValueError("B_dir must be a unit vector")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    n0 = rot.orientation0.matrix @ np.asarray(NV_AXES[class_i])
    k = np.asarray(rot.axis)
    # Rodrigues' formula, vectorized over time
    ang = rot.omega_rot * ts + rot.phase
    par = k * (k @ n0)
    perp = n0 - par
    cross = np.cross(k, n0)
    n = par[None, :] + np.cos(ang)[:, None] * perp[None, :] + np.sin(ang)[:, None] * cross[None, :]
    c = n @ b
    excess = np.max(np.abs(c)) - 1.0
    if excess > 1e-9:
        warnings.warn(f"|cos theta| exceeded 1 by {excess:.2e}", ClampWarning, stacklevel=2)
    th = np.arccos(np.clip(c, -1.0, 1.0))
    return th if np.ndim(t) else float(th[0])


@dataclass(frozen=True)
class ThetaFit:
    """``cos theta(t) = a + b cos(omega t + phi)`` with ``b >= 0``."""

    a: float
    b: float
    phi: float
    residual: float


@dataclass(frozen=True)
class ThetaTrace:
    a: tuple
    b: tuple
    phi: tuple

    def __post_init__(self):
        for a, b in zip(self.a, self.b):
            if abs(a) + abs(b) > 1.0 + 1e-9:
                raise ValueError("cos theta model exceeds the unit interval")

    def cos_theta(self, class_i, omega, t):
        return self.a[class_i] + self.b[class_i] * np.cos(omega * np.asarray(t) + self.phi[class_i])


def fit_theta_sinusoid(t, cos_theta, omega_rot) -> ThetaFit:
    """Linear least squares of ``cos theta`` on ``{1, cos wt, sin wt}``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(cos_theta, dtype=float)
    X = np.stack([np.ones_like(t), np.cos(omega_rot * t), np.sin(omega_rot * t)], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = float(np.max(np.abs(X @ coef - y))) if len(y) else 0.0
    a, c, s = coef
    return ThetaFit(float(a), float(math.hypot(c, s)), float(math.atan2(-s, c)), res)


def theta_trace(rot: RotationModel, B_dir, n_samples: int = 64) -> ThetaTrace:
    """Fit the four class traces over one rotation period."""
    t = np.arange(n_samples) * rot.period / n_samples
    fits = [fit_theta_sinusoid(t, np.cos(theta_angle(rot, i, B_dir, t)), rot.omega_rot) for i in range(4)]
    return ThetaTrace(tuple(f.a for f in fits), tuple(f.b for f in fits), tuple(f.phi for f in fits))


def rotating_transitions(rot: RotationModel, B_lab, model: NvModel, t) -> np.ndarray:
    """Transition frequencies ``(len(t), 4, 2)`` along the rotation."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    B = np.asarray(B_lab, dtype=float)
    out = np.empty((len(ts), 4, 2))
    for j, tj in enumerate(ts):
        out[j] = all_transitions(rot.matrix(tj), B, model)
    return out


def odmr_continuous_rotating(rot: RotationModel, B_lab, model: NvModel, freq_grid, samples_per_period: int = 256,
                             periods: int = 1) -> np.ndarray:
    """PL averaged uniformly over ``periods`` full rotation periods."""
    if samples_per_period < 256:
        raise ValueError("need at least 256 samples per period")
    n = samples_per_period * periods
    t = np.arange(n) * (rot.period * periods / n)
    f = np.asarray(freq_grid, dtype=float)
    acc = np.zeros_like(f)
    for lines in rotating_transitions(rot, B_lab, model, t):
        acc += lines_to_pl(lines, model, f)
    return acc / n


def band_edges(freq_grid, pl, rel_threshold: float = 0.05, split: float | None = None):
    """Outer frequencies of the regions where the dip exceeds ``rel_threshold`` of its maximum.

    Returns ``(lower_band, upper_band)`` split at ``split`` (default: the
    zero-field splitting); each band is ``(f_lo, f_hi)`` or ``None``.
    """
    f = np.asarray(freq_grid, dtype=float)
    dip = 1.0 - np.asarray(pl, dtype=float)
    mask = dip > rel_threshold * np.max(dip)
    split = D_ZFS if split is None else split
    bands = []
    for sel in (f < split, f >= split):
        m = mask & sel
        bands.append((float(f[m].min()), float(f[m].max())) if np.any(m) else None)
    return tuple(bands)


# ---------------------------------------------------------------- strobe maps

@dataclass(frozen=True)
class StroboMap:
    delays: np.ndarray  # s
    freq_hz: np.ndarray
    pl: np.ndarray  # (n_delays, n_freq)
    tau: float
    label: str = ""

    def rows(self):
        """Header row of frequencies, then ``(delay, PL...)`` per delay."""
        yield ("delay_s", *(float(f) for f in self.freq_hz))
        for d, row in zip(self.delays, self.pl):
            yield (float(d), *(float(v) for v in row))


def strobe_map(rot: RotationModel, B_lab, model: NvModel, delays, freq_grid, tau: float, label: str = "") -> StroboMap:
    """Stroboscopic ODMR: the static spectrum at each delay (instantaneous sampling)."""
    if tau > MAX_DUTY * rot.period:
        raise PulseTooLong(f"pulse {tau:.3g} s exceeds {MAX_DUTY:.0%} of the rotation period {rot.period:.3g} s")
    d = np.asarray(delays, dtype=float)
    f = np.asarray(freq_grid, dtype=float)
    pl = np.stack([odmr_spectrum_static(rot.matrix(dt), B_lab, model, f) for dt in d])
    return StroboMap(d, f, pl, float(tau), label)
