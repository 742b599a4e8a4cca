"""Hand-crafted vibration features and Morlet wavelet scalograms.

Per channel the 1-D feature vector holds 11 time-domain statistics followed
by 3 spectral ones (``FEATURE_NAMES``); a two-channel block gives a 2 x 14
matrix. Kurtosis is the fourth standardised moment and the clearance factor
uses the squared mean root amplitude, which keeps it distinct from the
impulse factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .config import ConfigError

TIME_FEATURES = (
    "rms", "variance", "peak_value", "crest_factor", "kurtosis", "clearance_factor",
    "shape_factor", "line_integral", "peak_to_peak", "skewness", "impulse_factor",
)
FREQ_FEATURES = ("fft_peak", "fft_energy", "fft_psd")
FEATURE_NAMES = TIME_FEATURES + FREQ_FEATURES
N_FEATURES = len(FEATURE_NAMES)


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def time_features(x, return_flag=False):
    """The 11 time-domain features of a 1-D signal.

    Ratios with a zero denominator, and kurtosis/skewness of a constant
    signal, are reported as 0. With ``return_flag`` the function also
    returns True when that fallback was used.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("time_features needs a 1-D signal of length >= 2")
    n = x.size
    absx = np.abs(x)
    rms = math.sqrt(float(np.mean(x * x)))
    centred = x - x.mean()
    var = float(np.mean(centred ** 2))
    peak = float(absx.max())
    mean_abs = float(absx.mean())
    mean_sqrt = float(np.mean(np.sqrt(absx)))
    degenerate = var * var == 0.0  # also catches var^2 underflow
    if degenerate:
        kurt = skew = 0.0
    else:
        kurt = float(np.sum(centred ** 4)) / (n * var * var)
        skew = float(np.mean(centred ** 3)) / var ** 1.5
    feats = np.array([
        rms,
        var,
        peak,
        _ratio(peak, rms),
        kurt,
        _ratio(peak, mean_sqrt * mean_sqrt),
        _ratio(rms, mean_abs),
        float(np.sum(np.abs(np.diff(x)))),
        float(x.max() - x.min()),
        skew,
        _ratio(peak, mean_abs),
    ])
    degenerate = degenerate or rms == 0.0
    return (feats, degenerate) if return_flag else feats


def magnitude_spectrum(x):
    """|X_k| for k = 0..n-1 (no zero padding)."""
    return np.abs(np.fft.fft(np.asarray(x, dtype=np.float64)))


def freq_features(x):
    """[peak-to-peak of |X_k|, sum |X_k|^2, mean power sum |X_k|^2 / n]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("freq_features needs a 1-D signal of length >= 2")
    mag = magnitude_spectrum(x)
    energy = float(np.sum(mag * mag))
    return np.array([float(mag.max() - mag.min()), energy, energy / x.size])


def feature_vector(block):
    """(2, 14) matrix for a (2, n) array; also returns per-channel degenerate flags."""
    block = np.asarray(block, dtype=np.float64)
    rows, flags = [], []
    for ch in block:
        tf, flag = time_features(ch, return_flag=True)
        rows.append(np.concatenate([tf, freq_features(ch)]))
        flags.append(flag)
    return np.stack(rows), np.array(flags)


# ---------------------------------------------------------------------------
# continuous wavelet transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CwtConfig:
    """Morlet CWT settings.

    The mother wavelet is ``exp(-beta t^2 / 2) exp(1j omega0 t)`` with
    ``beta = omega0**2`` unless ``beta`` is given, and the normalising
    constant is ``c_psi = sqrt(pi / beta)``. Scales are in samples on a
    geometric grid. ``truncate`` is the kernel half-width in Gaussian
    standard deviations (``scale / sqrt(beta)``).
    """

    omega0: float = 6.0
    min_scale: float = 2.0
    max_scale: float = 512.0
    n_scales: int = 64
    output_size: tuple = (64, 64)
    beta: float | None = None
    truncate: float = 6.0

    def __post_init__(self):
        if self.min_scale <= 0:
            raise ConfigError("min_scale must be positive")
        if self.n_scales < 2:
            raise ConfigError("need at least 2 scales")
        if self.max_scale <= self.min_scale:
            raise ConfigError("max_scale must exceed min_scale")
        if self.omega0 <= 0:
            raise ConfigError("omega0 must be positive")
        object.__setattr__(self, "output_size", tuple(int(v) for v in self.output_size))

    @property
    def beta_value(self):
        return self.omega0 ** 2 if self.beta is None else float(self.beta)

    @property
    def c_psi(self):
        return math.sqrt(math.pi / self.beta_value)

    def scales(self):
        return np.geomspace(self.min_scale, self.max_scale, self.n_scales)

    def half_width(self, scale):
        return int(math.ceil(self.truncate * scale / math.sqrt(self.beta_value)))

    def support(self, scale=None):
        """Kernel length in samples at ``scale`` (default: the largest)."""
        return 2 * self.half_width(self.max_scale if scale is None else scale) + 1

    def validate_for(self, n):
        if self.support() > n:
            raise ConfigError(f"largest wavelet ({self.support()} samples at scale "
                              f"{self.max_scale}) does not fit a signal of {n} samples")
        if self.omega0 / self.min_scale > math.pi:
            raise ConfigError(f"min_scale {self.min_scale} puts the wavelet centre above Nyquist")
        rows, cols = self.output_size
        if not (1 <= rows <= self.n_scales and 1 <= cols <= n):
            raise ConfigError(f"output_size {self.output_size} incompatible with "
                              f"{self.n_scales} scales x {n} samples")


def morlet(t, omega0=6.0, beta=None):
    beta = omega0 ** 2 if beta is None else beta
    return np.exp(-beta * t * t / 2.0) * np.exp(1j * omega0 * t)


def center_frequencies(scales, omega0=6.0, dt=1.0):
    """Display mapping scale -> frequency, omega0 / (2 pi a dt)."""
    return omega0 / (2 * np.pi * np.asarray(scales, dtype=float) * dt)


def cwt(x, config=CwtConfig(), scales=None):
    """Complex CWT coefficients, shape (n_scales, n).

    ``W[a, b] = 1/sqrt(c_psi a) * sum_t x[t] psi((t - b) / a)`` with the
    signal taken as zero outside ``[0, n)``.
    """
    x = np.asarray(x, dtype=np.float64)
    scales = config.scales() if scales is None else np.asarray(scales, dtype=float)
    beta = config.beta_value
    out = np.empty((scales.size, x.size), dtype=np.complex128)
    for i, a in enumerate(scales):
        K = config.half_width(a)
        k = np.arange(-K, K + 1)
        psi = morlet(k / a, config.omega0, beta)
        out[i] = fftconvolve(x, psi[::-1], mode="same") / math.sqrt(config.c_psi * a)
    return out


def _block_mean(arr, n_out, axis):
    edges = np.linspace(0, arr.shape[axis], n_out + 1).round().astype(int)
    parts = [np.take(arr, np.arange(lo, hi), axis=axis).mean(axis=axis)
             for lo, hi in zip(edges[:-1], edges[1:])]
    return np.stack(parts, axis=axis)


def downsample(values, shape):
    """Average-pool a 2-D map into ``shape`` using near-equal contiguous bins."""
    rows, cols = shape
    out = values if values.shape[0] == rows else _block_mean(values, rows, 0)
    return out if out.shape[1] == cols else _block_mean(out, cols, 1)


@dataclass(frozen=True)
class Scalogram:
    values: np.ndarray
    scales: np.ndarray
    omega0: float
    channel: str = "horizontal"


def cwt_scalogram(x, config=CwtConfig(), channel="horizontal"):
    x = np.asarray(x, dtype=np.float64)
    config.validate_for(x.size)
    mag = np.abs(cwt(x, config))
    return Scalogram(downsample(mag, config.output_size), config.scales(), config.omega0, channel)


# ---------------------------------------------------------------------------
# bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureSet:
    """Inputs of the three network branches for one snapshot."""

    waveform: np.ndarray      # (2, block_len)
    features: np.ndarray      # (2, 14)
    scalograms: np.ndarray    # (2, n_scales_out, n_time_out)
    index: int = 0
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=bool))


def extract_all(block, cwt_config=CwtConfig()):
    """Compute the FeatureSet of a two-channel block (Sample- or DenoisedBlock)."""
    wave = np.stack([np.asarray(block.horizontal, float), np.asarray(block.vertical, float)])
    feats, flags = feature_vector(wave)
    scal = np.stack([cwt_scalogram(wave[0], cwt_config, "horizontal").values,
                     cwt_scalogram(wave[1], cwt_config, "vertical").values])
    return FeatureSet(wave, feats, scal, int(getattr(block, "index", 0)), flags)
