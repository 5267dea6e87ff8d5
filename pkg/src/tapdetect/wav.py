"""RIFF/WAVE decoding, encoding, and sample-rate conversion.

Supports the two encodings found in practice for this kind of corpus:
16-bit PCM and 32-bit IEEE float, mono or stereo. Stereo is mixed down to
mono by channel averaging; integer samples are scaled by 1/32768 so that
full-scale positive PCM maps just below +1.0.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AudioDecodeError, ConfigError

CANONICAL_RATE_HZ = 48_000


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ConfigError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.samples.ndim != 1:
            raise ConfigError("AudioBuffer holds mono data; got multi-dim array")
        if len(self.samples) and not np.all(np.isfinite(self.samples)):
            raise AudioDecodeError("audio contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)


def _read_exact(stream, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise AudioDecodeError(f"truncated WAV: expected {n} bytes for {what}")
    return data


def load_wav(source: bytes | str | Path) -> AudioBuffer:
    """Decode a RIFF/WAVE payload (bytes) or file path into an AudioBuffer."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source
    stream = io.BytesIO(data)

    riff, _size, wave = struct.unpack("<4sI4s", _read_exact(stream, 12, "RIFF header"))
    if riff != b"RIFF" or wave != b"WAVE":
        raise AudioDecodeError("not a RIFF/WAVE stream")

    fmt = None
    frames = None
    while True:
        chunk_header = stream.read(8)
        if len(chunk_header) == 0:
            break
        if len(chunk_header) < 8:
            raise AudioDecodeError("truncated WAV: incomplete chunk header")
        chunk_id, chunk_size = struct.unpack("<4sI", chunk_header)
        body = _read_exact(stream, chunk_size, f"chunk {chunk_id!r}")
        if chunk_size % 2 == 1:  # RIFF chunks are word-aligned
            stream.read(1)
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise AudioDecodeError("fmt chunk too small")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif chunk_id == b"data":
            frames = body

    if fmt is None or frames is None:
        raise AudioDecodeError("missing fmt or data chunk")

    audio_format, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if n_channels not in (1, 2):
        raise AudioDecodeError(f"unsupported channel count {n_channels}")

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(frames[: len(frames) - len(frames) % (2 * n_channels)], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(frames[: len(frames) - len(frames) % (4 * n_channels)], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise AudioDecodeError(
            f"unsupported codec: format tag {audio_format}, {bits}-bit "
            "(supported: 16-bit PCM, 32-bit IEEE float)"
        )

    if n_channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    samples = np.clip(samples, -1.0, 1.0)
    return AudioBuffer(samples=samples, sample_rate_hz=int(sample_rate))


def wav_bytes(buffer: AudioBuffer, bits: int = 16) -> bytes:
    """Encode a buffer as a mono WAV payload (16-bit PCM or 32-bit float)."""
    if bits == 16:
        payload = (
            np.clip(np.round(buffer.samples * 32768.0), -32768, 32767)
            .astype("<i2")
            .tobytes()
        )
        audio_format, block = 1, 2
    elif bits == 32:
        payload = buffer.samples.astype("<f4").tobytes()
        audio_format, block = 3, 4
    else:
        raise ConfigError(f"unsupported bit depth {bits}")
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        audio_format,
        1,
        buffer.sample_rate_hz,
        buffer.sample_rate_hz * block,
        block,
        bits,
        b"data",
        len(payload),
    )
    return header + payload


def write_wav(path: str | Path, buffer: AudioBuffer, bits: int = 16) -> None:
    Path(path).write_bytes(wav_bytes(buffer, bits=bits))


def resample_to(buffer: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Linear-interpolation resampling; duration kept within one sample period."""
    if target_hz <= 0:
        raise ConfigError(f"target sample rate must be positive, got {target_hz}")
    if target_hz == buffer.sample_rate_hz:
        return buffer
    n_in = len(buffer.samples)
    n_out = round(n_in * target_hz / buffer.sample_rate_hz)
    if n_in == 0 or n_out == 0:
        return AudioBuffer(samples=np.zeros(n_out), sample_rate_hz=target_hz)
    t_out = np.arange(n_out) / target_hz
    t_in = np.arange(n_in) / buffer.sample_rate_hz
    samples = np.interp(t_out, t_in, buffer.samples)
    return AudioBuffer(samples=samples, sample_rate_hz=target_hz)


def sine(
    freq_hz: float,
    duration_s: float,
    sample_rate_hz: int = CANONICAL_RATE_HZ,
    amplitude: float = 0.5,
    phase: float = 0.0,
) -> AudioBuffer:
    """Test/demo tone generator."""
    n = round(duration_s * sample_rate_hz)
    t = np.arange(n) / sample_rate_hz
    return AudioBuffer(
        samples=amplitude * np.sin(2 * math.pi * freq_hz * t + phase),
        sample_rate_hz=sample_rate_hz,
    )
