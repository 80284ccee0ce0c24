"""Synthetic detection signal, Welch PSD and regime signatures.

The detector is modelled as the squared projection of a body-fixed marker
(by default the long axis ``n3``) on a fixed lab axis, which is symmetric
under ``n -> -n`` like a shadow.  The mapping to real optical power is not
known; this is a stand-in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import InsufficientData

DEFAULT_THRESHOLD_DB = 10.0


def detection_signal(traj, axis, body_vector=(0.0, 0.0, 1.0), noise_std: float = 0.0, seed=None) -> np.ndarray:
    """``s(t) = (axis . R(t) body_vector)^2`` plus optional white detector noise.

    Parameters
    ----------
    traj : Trajectory3D
    axis : unit 3-vector (lab frame)
    body_vector : unit 3-vector in the body frame; ``(0, 0, 1)`` is the long axis.
    noise_std : standard deviation of additive Gaussian noise.
    seed : seed for the noise generator.
    """
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("axis must be a unit vector")
    v = np.asarray(body_vector, dtype=float)
    v = v / np.linalg.norm(v)
    marker = np.einsum("nij,j->ni", traj.matrices(), v)
    s = (marker @ axis) ** 2
    if noise_std > 0.0:
        s = s + np.random.default_rng(seed).normal(0.0, noise_std, size=s.shape)
    return s


@dataclass(frozen=True)
class Psd:
    """One-sided power spectral density (units^2 / Hz)."""

    freq_hz: np.ndarray
    power: np.ndarray
    rbw_hz: float
    df_hz: float = field(default=0.0)

    CSV_HEADER = ("f_hz", "power_db")

    def __post_init__(self):
        if np.any(self.power < 0) or np.any(np.diff(self.freq_hz) <= 0):
            raise ValueError("invalid PSD")

    def total_power(self) -> float:
        return float(np.sum(self.power) * self.df_hz)

    def power_db(self, floor=1e-300) -> np.ndarray:
        return 10.0 * np.log10(np.maximum(self.power, floor))

    def rows(self):
        for f, p in zip(self.freq_hz, self.power_db()):
            yield (float(f), float(p))


def psd(series, sample_rate_hz: float, segment_length: int | None = None, overlap: float = 0.5,
        detrend: bool = False) -> Psd:
    """Hann-windowed Welch estimate.

    ``overlap`` is the fractional segment overlap.  With ``detrend=False`` the
    integral of the PSD equals the mean square of the series; with
    ``detrend=True`` (per-segment mean removed) it equals the variance.
    The resolution bandwidth is the Hann equivalent-noise bandwidth
    ``1.5 fs / N``.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if segment_length is None:
        segment_length = n
    segment_length = int(segment_length)
    if segment_length < 8 or segment_length > n:
        raise InsufficientData(f"segment length {segment_length} incompatible with {n} samples")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    f, p = sps.welch(
        x,
        fs=sample_rate_hz,
        window="hann",
        nperseg=segment_length,
        noverlap=int(round(overlap * segment_length)),
        detrend="constant" if detrend else False,
        scaling="density",
        return_onesided=True,
    )
    df = sample_rate_hz / segment_length
    return Psd(f, np.maximum(p, 0.0), 1.5 * df, df)


@dataclass(frozen=True)
class PsdClassification:
    has_half_harmonic: bool
    has_micromotion: bool
    peaks: list  # (f_hz, power_db) above threshold, strongest first


def classify_psd(spec: Psd, omega_d: float, threshold_db: float = DEFAULT_THRESHOLD_DB) -> PsdClassification:
    """Peaks exceeding the median floor by ``threshold_db``.

    ``has_half_harmonic`` is true iff a peak lies within one resolution
    bandwidth of ``omega_d / (2 * 2 pi)``; ``has_micromotion`` likewise at
    ``omega_d / 2 pi``.  The zero-frequency bin is ignored.
    """
    f_d = omega_d / (2.0 * math.pi)
    if spec.rbw_hz > f_d / 20.0:
        raise ValueError("PSD resolution must be finer than the drive frequency / 20")
    p = spec.power[1:]
    f = spec.freq_hz[1:]
    floor = float(np.median(p))
    if floor <= 0.0:
        floor = float(np.min(p[p > 0])) if np.any(p > 0) else 1e-300
    height = floor * 10.0 ** (threshold_db / 10.0)
    idx, _ = sps.find_peaks(p, height=height)
    order = idx[np.argsort(p[idx])[::-1]]
    peaks = [(float(f[i]), float(10.0 * np.log10(p[i]))) for i in order]

    def near(target):
        return any(abs(fp - target) <= spec.rbw_hz for fp, _ in peaks)

    return PsdClassification(near(0.5 * f_d), near(f_d), peaks)
