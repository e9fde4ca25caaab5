"""Feature preparation: normalization, support-point resampling, MFCC.

Everything here turns raw recordings into the fixed-form inputs the
reservoir consumes.  Channel normalization is min-max fitted on the
training split only.  Resampling reduces a variable-length series to k
support points on normalized time, either by a least-squares polynomial
fit or by piecewise-linear interpolation.  The MFCC front end converts
mono PCM audio into cepstral coefficient series.
"""

import wave
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from .errors import (
    BadDegreeError,
    ChannelMismatchError,
    EmptyInputError,
    NonFiniteError,
    NonPowerOfTwoFrameError,
    ParseError,
    TooShortError,
)

RESAMPLE_MODES = ("polynomial", "linear", "none")


@dataclass(frozen=True)
class LabeledSeries:
    """Multivariate time series: one row per channel, one column per step."""

    values: np.ndarray
    label: int | None = None
    sample_rate_hz: float | None = None
    id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ChannelMismatchError("series values must be channels x steps")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError(f"series {self.id!r} contains NaN or Inf")
        object.__setattr__(self, "values", values)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalizationParams:
    """Per-channel affine map v -> (v + shift) * scale."""

    shift: np.ndarray
    scale: np.ndarray


def fit_normalization(train: list[LabeledSeries]) -> NormalizationParams:
    """Min-max parameters pooled over all training series.

    Each channel's observed range maps onto [0, 1]; a constant channel
    (range below 1e-12) gets scale 1 and maps onto 0.
    """
    if not train:
        raise EmptyInputError("need at least one series to fit normalization")
    channels = train[0].channels
    for s in train:
        if s.channels != channels:
            raise ChannelMismatchError(
                f"series {s.id!r} has {s.channels} channels, expected {channels}")
    lo = np.full(channels, np.inf)
    hi = np.full(channels, -np.inf)
    for s in train:
        lo = np.minimum(lo, s.values.min(axis=1))
        hi = np.maximum(hi, s.values.max(axis=1))
    span = hi - lo
    degenerate = span < 1e-12
    scale = np.where(degenerate, 1.0, 1.0 / np.where(degenerate, 1.0, span))
    return NormalizationParams(shift=-lo, scale=scale)


def apply_normalization(params: NormalizationParams,
                        series: LabeledSeries) -> LabeledSeries:
    """Apply fitted parameters; values outside the fit range may leave [0, 1]."""
    if series.channels != params.shift.shape[0]:
        raise ChannelMismatchError(
            f"series {series.id!r} has {series.channels} channels,"
            f" normalization expects {params.shift.shape[0]}")
    scaled = (series.values + params.shift[:, np.newaxis]) \
        * params.scale[:, np.newaxis]
    return replace(series, values=scaled)


def resample(series: LabeledSeries, k_points: int, mode: str = "polynomial",
             degree: int = 3) -> LabeledSeries:
    """Reduce a series to k support points on normalized time [0, 1].

    polynomial: least-squares fit of the given degree per channel,
    evaluated at k equidistant points (degree is capped at steps - 1 so
    the fit is always determined).  linear: piecewise-linear
    interpolation at the same points.  none: the series is returned
    unchanged.
    """
    if mode not in RESAMPLE_MODES:
        raise ValueError(f"mode must be one of {RESAMPLE_MODES}, got {mode!r}")
    if series.steps < 2:
        raise TooShortError(f"series {series.id!r} has fewer than 2 steps")
    if mode == "none":
        return series
    if k_points < 2:
        raise TooShortError("k_points must be >= 2")
    t_in = np.linspace(0.0, 1.0, series.steps)
    t_out = np.linspace(0.0, 1.0, k_points)
    if mode == "linear":
        out = np.vstack([np.interp(t_out, t_in, ch) for ch in series.values])
    else:
        if degree < 1:
            raise BadDegreeError(f"polynomial degree must be >= 1, got {degree}")
        deg = min(degree, series.steps - 1)
        coeffs = np.polynomial.polynomial.polyfit(t_in, series.values.T, deg)
        out = np.polynomial.polynomial.polyval(t_out, coeffs)
        if out.ndim == 1:
            out = out[np.newaxis, :]
    return replace(series, values=out, sample_rate_hz=None)


@dataclass(frozen=True)
class MfccConfig:
    """Front-end settings; frame_length must be a power of two."""

    frame_length: int = 512
    hop_length: int = 128
    n_mels: int = 26
    n_coeffs: int = 12
    fmin_hz: float = 0.0
    fmax_hz: float | None = None
    log_floor: float = 1e-10
    keep_c0: bool = False


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: MfccConfig, sample_rate: float) -> np.ndarray:
    """Triangular filters with unit peaks, equally spaced on the mel scale."""
    fmax = cfg.fmax_hz if cfg.fmax_hz is not None else sample_rate / 2.0
    mel_points = np.linspace(_hz_to_mel(cfg.fmin_hz), _hz_to_mel(fmax),
                             cfg.n_mels + 2)
    hz_points = _mel_to_hz(mel_points)
    n_bins = cfg.frame_length // 2 + 1
    bin_freqs = np.arange(n_bins) * sample_rate / cfg.frame_length
    bank = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        left, center, right = hz_points[i], hz_points[i + 1], hz_points[i + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def mfcc(samples: np.ndarray, sample_rate: float,
         cfg: MfccConfig = MfccConfig()) -> LabeledSeries:
    """Mel frequency cepstral coefficients of a mono waveform.

    Per Hann-windowed frame: power spectrum, triangular mel filterbank,
    log energies, orthonormal DCT-II.  The constant coefficient c0 is
    dropped unless ``keep_c0`` is set, so the output has ``n_coeffs``
    channels starting at c1 (or c0), one time step per frame.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if cfg.frame_length < 2 or cfg.frame_length & (cfg.frame_length - 1):
        raise NonPowerOfTwoFrameError(
            f"frame_length must be a power of two, got {cfg.frame_length}")
    if cfg.n_coeffs > cfg.n_mels:
        raise ValueError("n_coeffs must not exceed n_mels")
    if samples.size < cfg.frame_length:
        raise TooShortError(
            f"need at least {cfg.frame_length} samples, got {samples.size}")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    n_frames = (samples.size - cfg.frame_length) // cfg.hop_length + 1
    window = 0.5 - 0.5 * np.cos(
        2.0 * np.pi * np.arange(cfg.frame_length) / cfg.frame_length)
    starts = np.arange(n_frames) * cfg.hop_length
    frames = np.stack([samples[s:s + cfg.frame_length] * window
                       for s in starts])
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    bank = mel_filterbank(cfg, sample_rate)
    log_energy = np.log(power @ bank.T + cfg.log_floor)
    coeffs = scipy.fft.dct(log_energy, type=2, axis=1, norm="ortho")
    first = 0 if cfg.keep_c0 else 1
    kept = coeffs[:, first:first + cfg.n_coeffs]
    return LabeledSeries(values=kept.T,
                         sample_rate_hz=sample_rate / cfg.hop_length)


def read_wav(path: str) -> tuple[np.ndarray, float]:
    """Load a RIFF PCM wav file as float samples in [-1, 1].

    Only 16-bit signed PCM is accepted; stereo is downmixed by
    averaging the channels.
    """
    try:
        with wave.open(path, "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ParseError(f"unsupported wav file: {exc}", path=path) from exc
    if width != 2:
        raise ParseError(f"expected 16-bit PCM, got {8 * width}-bit",
                         path=path)
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return data, float(rate)
