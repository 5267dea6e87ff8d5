"""Framed frequency-domain analysis for 48 kHz audio.

Covers the whole window-level feature chain: Hann STFT magnitudes, an
HTK-scale triangular mel filterbank, max-referenced log-mel spectrograms,
orthonormal-DCT MFCCs, per-frame spectral/time descriptors, and their
aggregation into the fixed 41-dimensional window vector (layout "v1").
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft

from .errors import ConfigError, InferenceError
from .wav import AudioBuffer

LOG_FLOOR = 1e-10
FEATURE_LAYOUT_V1 = "v1"


@dataclass(frozen=True)
class DspConfig:
    """Analysis parameters; every tunable of the feature chain lives here."""

    sample_rate_hz: int = 48_000
    n_fft: int = 2048
    hop: int = 512
    window: str = "hann"
    n_mels: int = 64
    fmin_hz: float = 50.0
    fmax_hz: float = 24_000.0
    n_mfcc: int = 13
    rolloff_fraction: float = 0.85
    contrast_fmin_hz: float = 200.0
    n_contrast_bands: int = 6
    window_s: float = 2.0

    def __post_init__(self):
        if self.n_fft & (self.n_fft - 1) != 0:
            raise ConfigError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise ConfigError("hop must be in (0, n_fft]")
        if not 0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate_hz / 2:
            raise ConfigError(
                f"need 0 <= fmin < fmax <= Nyquist, got [{self.fmin_hz}, {self.fmax_hz}]"
            )
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")
        if self.n_mfcc > self.n_mels:
            raise ConfigError("n_mfcc cannot exceed n_mels")
        if self.window_s <= 0:
            raise ConfigError("window_s must be positive")

    @property
    def window_samples(self) -> int:
        return round(self.window_s * self.sample_rate_hz)

    def to_json_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "n_fft": self.n_fft,
            "hop": self.hop,
            "window": self.window,
            "n_mels": self.n_mels,
            "fmin_hz": self.fmin_hz,
            "fmax_hz": self.fmax_hz,
            "n_mfcc": self.n_mfcc,
            "rolloff_fraction": self.rolloff_fraction,
            "contrast_fmin_hz": self.contrast_fmin_hz,
            "n_contrast_bands": self.n_contrast_bands,
            "window_s": self.window_s,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DspConfig":
        return cls(**obj)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window: 0.5 - 0.5 cos(2 pi k / n)."""
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


def fft_frequencies(sample_rate_hz: int, n_fft: int) -> np.ndarray:
    return np.linspace(0.0, sample_rate_hz / 2.0, n_fft // 2 + 1)


def hz_to_mel(freq_hz):
    """HTK mel scale: m = 2595 log10(1 + f / 700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def frame_signal(samples: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Centered frames with reflect padding, shape (n_frames, n_fft).

    n_frames = 1 + floor(len / hop). Inputs shorter than n_fft are
    zero-padded at the tail to one full frame first.
    """
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < n_fft:
        x = np.concatenate([x, np.zeros(n_fft - len(x))])
    n_frames = 1 + len(x) // hop
    pad = n_fft // 2
    # odd reflection keeps slope continuous at the edges, so edge frames of
    # smooth signals stay spectrally clean
    padded = np.pad(x, pad, mode="reflect", reflect_type="odd")
    need = (n_frames - 1) * hop + n_fft
    if need > len(padded):
        padded = np.concatenate([padded, np.zeros(need - len(padded))])
    view = np.lib.stride_tricks.sliding_window_view(padded, n_fft)
    return view[:: hop][:n_frames].copy()


def stft_magnitude(
    buffer: AudioBuffer, n_fft: int = 2048, hop: int = 512, window: str = "hann"
) -> np.ndarray:
    """One-sided STFT magnitudes, shape (n_fft//2 + 1, n_frames)."""
    if window != "hann":
        raise ConfigError(f"unsupported window {window!r}")
    frames = frame_signal(buffer.samples, n_fft, hop)
    spectra = np.fft.rfft(frames * hann_window(n_fft), axis=1)
    return np.abs(spectra).T


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters on the HTK mel scale, rows area-normalized."""

    weights: np.ndarray  # (n_mels, n_fft//2 + 1)
    n_fft: int
    sample_rate_hz: int
    fmin_hz: float
    fmax_hz: float

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    def apply(self, power: np.ndarray) -> np.ndarray:
        return self.weights @ power


def mel_filterbank(
    sample_rate_hz: int,
    n_fft: int,
    n_mels: int,
    fmin_hz: float,
    fmax_hz: float,
) -> MelFilterbank:
    """Build n_mels triangles with centers equally spaced in mel.

    Rows are scaled by 2 / (f_hi - f_lo) so each filter integrates to
    roughly constant energy across the band.
    """
    if not 0 <= fmin_hz < fmax_hz <= sample_rate_hz / 2:
        raise ConfigError(
            f"need 0 <= fmin < fmax <= Nyquist, got [{fmin_hz}, {fmax_hz}]"
        )
    if n_mels < 1:
        raise ConfigError("n_mels must be >= 1")
    freqs = fft_frequencies(sample_rate_hz, n_fft)
    anchors_hz = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    weights = np.zeros((n_mels, len(freqs)))
    for i in range(n_mels):
        lo, mid, hi = anchors_hz[i], anchors_hz[i + 1], anchors_hz[i + 2]
        rising = (freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - freqs) / max(hi - mid, 1e-12)
        weights[i] = np.maximum(0.0, np.minimum(rising, falling)) * (2.0 / (hi - lo))
    return MelFilterbank(
        weights=weights,
        n_fft=n_fft,
        sample_rate_hz=sample_rate_hz,
        fmin_hz=fmin_hz,
        fmax_hz=fmax_hz,
    )


@dataclass(frozen=True)
class LogMelSpectrogram:
    """Log-power mel spectrogram, max-referenced to 0 dB per call."""

    values: np.ndarray  # (n_mels, n_frames)
    frame_hop_s: float
    window_origin_s: float = 0.0

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def log_mel(
    buffer: AudioBuffer,
    config: DspConfig = DspConfig(),
    filterbank: MelFilterbank | None = None,
    window_origin_s: float = 0.0,
) -> LogMelSpectrogram:
    """10 log10(mel power), floored at 1e-10, shifted so the max is 0 dB.

    The max-reference makes the output invariant to input gain, which is
    what an on-device detector wants; silence comes out as a uniform
    all-zero matrix.
    """
    if buffer.sample_rate_hz != config.sample_rate_hz:
        raise ConfigError(
            f"buffer rate {buffer.sample_rate_hz} != configured {config.sample_rate_hz}; "
            "resample first"
        )
    if filterbank is None:
        filterbank = mel_filterbank(
            config.sample_rate_hz, config.n_fft, config.n_mels, config.fmin_hz, config.fmax_hz
        )
    magnitudes = stft_magnitude(buffer, config.n_fft, config.hop, config.window)
    mel_power = filterbank.apply(magnitudes**2)
    values = 10.0 * np.log10(np.maximum(mel_power, LOG_FLOOR))
    values -= values.max()
    return LogMelSpectrogram(
        values=values,
        frame_hop_s=config.hop / config.sample_rate_hz,
        window_origin_s=window_origin_s,
    )


def mfcc(logmel: LogMelSpectrogram, n_coeffs: int = 13) -> np.ndarray:
    """First n_coeffs rows of the orthonormal DCT-II along the mel axis."""
    if n_coeffs > logmel.n_mels:
        raise ConfigError("n_coeffs cannot exceed n_mels")
    return scipy.fft.dct(logmel.values, type=2, axis=0, norm="ortho")[:n_coeffs]


@dataclass(frozen=True)
class FrameDescriptors:
    """Per-frame spectral and time-domain descriptors (arrays over frames)."""

    centroid_hz: np.ndarray
    bandwidth_hz: np.ndarray
    rolloff_hz: np.ndarray
    contrast: np.ndarray  # (n_bands, n_frames)
    chroma: np.ndarray  # (12, n_frames)
    zcr: np.ndarray
    rmse: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.centroid_hz)


def frame_descriptors(
    magnitudes: np.ndarray,
    time_frames: np.ndarray,
    config: DspConfig = DspConfig(),
) -> FrameDescriptors:
    """Compute all per-frame descriptors from aligned spectra and raw frames.

    Silent frames yield 0 for centroid/bandwidth/rolloff rather than NaN so
    downstream classifiers always see finite inputs.
    """
    freqs = fft_frequencies(config.sample_rate_hz, config.n_fft)
    mag_sum = magnitudes.sum(axis=0)
    safe = np.where(mag_sum > 0, mag_sum, 1.0)

    centroid = (freqs[:, None] * magnitudes).sum(axis=0) / safe
    spread = ((freqs[:, None] - centroid[None, :]) ** 2 * magnitudes).sum(axis=0) / safe
    bandwidth = np.sqrt(spread)
    silent = mag_sum <= 0
    centroid[silent] = 0.0
    bandwidth[silent] = 0.0

    power = magnitudes**2
    cumulative = np.cumsum(power, axis=0)
    total = cumulative[-1]
    threshold = config.rolloff_fraction * total
    reached = cumulative >= threshold[None, :]
    rolloff_idx = np.argmax(reached, axis=0)
    rolloff = freqs[rolloff_idx]
    rolloff[total <= 0] = 0.0

    contrast = _spectral_contrast(magnitudes, freqs, config)
    chroma = _chroma_fold(magnitudes, freqs, config)

    signbit = np.signbit(time_frames)
    zcr = np.abs(np.diff(signbit.astype(np.int8), axis=1)).sum(axis=1) / time_frames.shape[1]
    rmse = np.sqrt(np.mean(time_frames**2, axis=1))

    return FrameDescriptors(
        centroid_hz=centroid,
        bandwidth_hz=bandwidth,
        rolloff_hz=rolloff,
        contrast=contrast,
        chroma=chroma,
        zcr=zcr.astype(np.float64),
        rmse=rmse,
    )


def _spectral_contrast(magnitudes, freqs, config) -> np.ndarray:
    """ln(peak/valley) of magnitudes per octave band above contrast_fmin_hz."""
    n_frames = magnitudes.shape[1]
    out = np.zeros((config.n_contrast_bands, n_frames))
    for band in range(config.n_contrast_bands):
        lo = config.contrast_fmin_hz * 2.0**band
        hi = config.contrast_fmin_hz * 2.0 ** (band + 1)
        mask = (freqs >= lo) & (freqs < hi)
        if not mask.any():
            continue
        band_mag = magnitudes[mask]
        peak = band_mag.max(axis=0)
        valley = band_mag.min(axis=0)
        out[band] = np.log((peak + LOG_FLOOR) / (valley + LOG_FLOOR))
    return out


def _chroma_fold(magnitudes, freqs, config) -> np.ndarray:
    """Sum magnitudes onto 12 pitch classes (class 0 = C, A4 = 440 Hz)."""
    out = np.zeros((12, magnitudes.shape[1]))
    usable = (freqs >= max(config.fmin_hz, 1.0)) & (freqs <= config.fmax_hz)
    midi = 69.0 + 12.0 * np.log2(freqs[usable] / 440.0)
    pitch_class = np.round(midi).astype(int) % 12
    usable_mag = magnitudes[usable]
    for cls in range(12):
        rows = pitch_class == cls
        if rows.any():
            out[cls] = usable_mag[rows].sum(axis=0)
    return out


# ---------------------------------------------------------------------------
# 41-dimensional aggregated window vector
# ---------------------------------------------------------------------------

FEATURE_NAMES_V1: tuple[str, ...] = tuple(
    [f"mfcc_mean_{i:02d}" for i in range(13)]
    + [f"chroma_mean_{i:02d}" for i in range(12)]
    + [
        "centroid_mean",
        "centroid_sd",
        "bandwidth_mean",
        "bandwidth_sd",
        "rolloff_mean",
        "rolloff_sd",
        "zcr_mean",
        "zcr_sd",
        "rmse_mean",
        "rmse_sd",
    ]
    + [f"contrast_mean_{i}" for i in range(6)]
)

N_FEATURES_V1 = len(FEATURE_NAMES_V1)
assert N_FEATURES_V1 == 41


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-layout aggregated window features."""

    values: np.ndarray
    layout_version: str = FEATURE_LAYOUT_V1

    def __post_init__(self):
        if self.layout_version == FEATURE_LAYOUT_V1 and len(self.values) != N_FEATURES_V1:
            raise InferenceError(
                f"layout {FEATURE_LAYOUT_V1} expects {N_FEATURES_V1} values, "
                f"got {len(self.values)}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InferenceError("feature vector contains non-finite values")


def aggregate_features(
    logmel: LogMelSpectrogram,
    mfccs: np.ndarray,
    descriptors: FrameDescriptors,
) -> FeatureVector:
    """Aggregate per-frame data over one window into the 41-dim "v1" vector.

    Layout: 13 MFCC means, 12 chroma means, mean+sd of centroid, bandwidth,
    rolloff, zcr and rmse, then 6 contrast-band means. Ordering is fixed and
    must stay bit-stable across releases for a given layout tag.
    """
    if mfccs.shape[0] != 13:
        raise InferenceError(f"layout v1 expects 13 MFCC rows, got {mfccs.shape[0]}")
    parts = [mfccs.mean(axis=1), descriptors.chroma.mean(axis=1)]
    for series in (
        descriptors.centroid_hz,
        descriptors.bandwidth_hz,
        descriptors.rolloff_hz,
        descriptors.zcr,
        descriptors.rmse,
    ):
        parts.append(np.array([series.mean(), series.std()]))
    parts.append(descriptors.contrast.mean(axis=1))
    values = np.concatenate(parts)
    return FeatureVector(values=values, layout_version=FEATURE_LAYOUT_V1)


def descriptor_summary(
    descriptors: FrameDescriptors,
    aggregators: Sequence[str] = ("mean", "sd", "min", "max", "median"),
) -> dict[str, np.ndarray]:
    """Full aggregator table over the scalar descriptor series.

    Experimental surface for feature studies; the supported classifier
    contract is the "v1" layout from :func:`aggregate_features`.
    """
    fns = {
        "mean": np.mean,
        "sd": np.std,
        "min": np.min,
        "max": np.max,
        "median": np.median,
    }
    unknown = set(aggregators) - set(fns)
    if unknown:
        raise ConfigError(f"unknown aggregators {sorted(unknown)}")
    series = {
        "centroid_hz": descriptors.centroid_hz,
        "bandwidth_hz": descriptors.bandwidth_hz,
        "rolloff_hz": descriptors.rolloff_hz,
        "zcr": descriptors.zcr,
        "rmse": descriptors.rmse,
    }
    return {
        f"{name}_{agg}": np.asarray(fns[agg](values))
        for name, values in series.items()
        for agg in aggregators
    }


@dataclass(frozen=True)
class WindowAnalysis:
    logmel: LogMelSpectrogram
    mfccs: np.ndarray
    descriptors: FrameDescriptors
    feature_vector: FeatureVector


def analyze_window(
    buffer: AudioBuffer,
    config: DspConfig = DspConfig(),
    filterbank: MelFilterbank | None = None,
    window_origin_s: float = 0.0,
) -> WindowAnalysis:
    """Run the full feature chain over one already-cut window of audio."""
    if filterbank is None:
        filterbank = mel_filterbank(
            config.sample_rate_hz, config.n_fft, config.n_mels, config.fmin_hz, config.fmax_hz
        )
    magnitudes = stft_magnitude(buffer, config.n_fft, config.hop, config.window)
    time_frames = frame_signal(buffer.samples, config.n_fft, config.hop)
    mel_power = filterbank.apply(magnitudes**2)
    values = 10.0 * np.log10(np.maximum(mel_power, LOG_FLOOR))
    values -= values.max()
    logmel = LogMelSpectrogram(
        values=values,
        frame_hop_s=config.hop / config.sample_rate_hz,
        window_origin_s=window_origin_s,
    )
    mfccs = mfcc(logmel, config.n_mfcc)
    descriptors = frame_descriptors(magnitudes, time_frames, config)
    return WindowAnalysis(
        logmel=logmel,
        mfccs=mfccs,
        descriptors=descriptors,
        feature_vector=aggregate_features(logmel, mfccs, descriptors),
    )
