"""Binary interchange formats.

All multi-byte values are little-endian. Layout tags are 8 ASCII bytes,
NUL-padded.

Feature file ("TAPF"):
    magic 4s | format version u16 | layout tag 8s | vector length u16 |
    count u64 | count * length float32

Spectrogram tensor file ("TAPS"):
    magic 4s | format version u16 | n_windows u64 | n_mels u16 |
    n_frames u16 | n_windows * n_mels * n_frames float32

Model envelope ("TAPM"):
    magic 4s | format version u16 | section tag 4s ("FRST" or "CNN1") |
    dsp-config JSON length u32 | JSON bytes | layout tag 8s |
    payload length u64 | payload | CRC32 u32 over every preceding byte

The CRC gate runs before any payload is parsed, so a corrupt model can
never reach inference. Spectrogram images export as binary PGM (P5), one
pixel per (mel band, frame) cell, each image min-max scaled to 0..255,
low frequencies at the bottom row.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import DspConfig
from .errors import ModelFormatError

FORMAT_VERSION = 1
FEATURE_MAGIC = b"TAPF"
SPECTROGRAM_MAGIC = b"TAPS"
MODEL_MAGIC = b"TAPM"
SECTION_FOREST = "FRST"
SECTION_CNN = "CNN1"


def _pack_tag(tag: str) -> bytes:
    raw = tag.encode("ascii")
    if len(raw) > 8:
        raise ModelFormatError(f"layout tag too long: {tag!r}")
    return raw.ljust(8, b"\x00")


def _unpack_tag(raw: bytes) -> str:
    return raw.rstrip(b"\x00").decode("ascii")


# ---------------------------------------------------------------------------
# TAPF features
# ---------------------------------------------------------------------------


def feature_file_bytes(vectors: np.ndarray, layout_version: str) -> bytes:
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise ModelFormatError(f"expected (count, length) matrix, got shape {vectors.shape}")
    count, length = vectors.shape
    header = struct.pack(
        "<4sH8sHQ", FEATURE_MAGIC, FORMAT_VERSION, _pack_tag(layout_version), length, count
    )
    return header + vectors.astype("<f4").tobytes()


def parse_feature_file(data: bytes) -> tuple[np.ndarray, str]:
    """-> (float32 matrix (count, length), layout tag)."""
    head_size = struct.calcsize("<4sH8sHQ")
    if len(data) < head_size:
        raise ModelFormatError("feature file too short for header")
    magic, version, tag, length, count = struct.unpack_from("<4sH8sHQ", data, 0)
    if magic != FEATURE_MAGIC:
        raise ModelFormatError(f"bad feature magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported feature format version {version}")
    expected = head_size + count * length * 4
    if len(data) != expected:
        raise ModelFormatError(f"feature file size {len(data)} != expected {expected}")
    matrix = np.frombuffer(data, dtype="<f4", count=count * length, offset=head_size)
    return matrix.reshape(count, length).astype(np.float32), _unpack_tag(tag)


def write_feature_file(path: str | Path, vectors: np.ndarray, layout_version: str) -> None:
    Path(path).write_bytes(feature_file_bytes(vectors, layout_version))


def read_feature_file(path: str | Path) -> tuple[np.ndarray, str]:
    return parse_feature_file(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# TAPS spectrogram tensors
# ---------------------------------------------------------------------------


def spectrogram_file_bytes(tensors: np.ndarray) -> bytes:
    tensors = np.asarray(tensors, dtype=np.float32)
    if tensors.ndim != 3:
        raise ModelFormatError(
            f"expected (n_windows, n_mels, n_frames) tensor, got shape {tensors.shape}"
        )
    n_windows, n_mels, n_frames = tensors.shape
    header = struct.pack(
        "<4sHQHH", SPECTROGRAM_MAGIC, FORMAT_VERSION, n_windows, n_mels, n_frames
    )
    return header + tensors.astype("<f4").tobytes()


def parse_spectrogram_file(data: bytes) -> np.ndarray:
    head_size = struct.calcsize("<4sHQHH")
    if len(data) < head_size:
        raise ModelFormatError("spectrogram file too short for header")
    magic, version, n_windows, n_mels, n_frames = struct.unpack_from("<4sHQHH", data, 0)
    if magic != SPECTROGRAM_MAGIC:
        raise ModelFormatError(f"bad spectrogram magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported spectrogram format version {version}")
    expected = head_size + n_windows * n_mels * n_frames * 4
    if len(data) != expected:
        raise ModelFormatError(f"spectrogram file size {len(data)} != expected {expected}")
    tensor = np.frombuffer(data, dtype="<f4", offset=head_size)
    return tensor.reshape(n_windows, n_mels, n_frames).astype(np.float32)


def write_spectrogram_file(path: str | Path, tensors: np.ndarray) -> None:
    Path(path).write_bytes(spectrogram_file_bytes(tensors))


def read_spectrogram_file(path: str | Path) -> np.ndarray:
    return parse_spectrogram_file(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# PGM image export
# ---------------------------------------------------------------------------


def spectrogram_to_pgm(values: np.ndarray) -> bytes:
    """Render one (n_mels, n_frames) matrix as binary PGM (P5).

    Per image: minimum maps to 0, maximum to 255 (a constant image renders
    as black). Row order is flipped so mel band 0 sits at the bottom.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ModelFormatError(f"expected 2-d matrix, got shape {values.shape}")
    lo = values.min()
    hi = values.max()
    if hi > lo:
        pixels = np.round((values - lo) / (hi - lo) * 255.0)
    else:
        pixels = np.zeros_like(values)
    pixels = pixels.astype(np.uint8)[::-1, :]
    n_mels, n_frames = values.shape
    header = f"P5\n{n_frames} {n_mels}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    Path(path).write_bytes(spectrogram_to_pgm(values))


# ---------------------------------------------------------------------------
# TAPM model envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelEnvelope:
    """Self-describing model container: payload plus the DSP config it
    expects, guarded by a trailing CRC32."""

    section: str  # SECTION_FOREST | SECTION_CNN
    dsp_config: DspConfig
    layout_version: str
    payload: bytes

    def to_bytes(self) -> bytes:
        import json

        if self.section not in (SECTION_FOREST, SECTION_CNN):
            raise ModelFormatError(f"unknown section tag {self.section!r}")
        dsp_json = json.dumps(self.dsp_config.to_json_dict(), sort_keys=True).encode()
        body = struct.pack("<4sH4s", MODEL_MAGIC, FORMAT_VERSION, self.section.encode())
        body += struct.pack("<I", len(dsp_json)) + dsp_json
        body += _pack_tag(self.layout_version)
        body += struct.pack("<Q", len(self.payload)) + self.payload
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def from_bytes(cls, data: bytes) -> "ModelEnvelope":
        import json

        if len(data) < 4 + struct.calcsize("<4sH4s"):
            raise ModelFormatError("model file too short")
        body, (stored_crc,) = data[:-4], struct.unpack("<I", data[-4:])
        if zlib.crc32(body) != stored_crc:
            raise ModelFormatError("model checksum mismatch: file is corrupt")
        magic, version, section = struct.unpack_from("<4sH4s", body, 0)
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"bad model magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {version}")
        offset = struct.calcsize("<4sH4s")
        (json_len,) = struct.unpack_from("<I", body, offset)
        offset += 4
        try:
            dsp_config = DspConfig.from_json_dict(json.loads(body[offset : offset + json_len]))
        except (ValueError, TypeError, KeyError) as exc:
            raise ModelFormatError(f"bad dsp-config snapshot: {exc}") from None
        offset += json_len
        tag = _unpack_tag(body[offset : offset + 8])
        offset += 8
        (payload_len,) = struct.unpack_from("<Q", body, offset)
        offset += 8
        payload = body[offset : offset + payload_len]
        if len(payload) != payload_len or offset + payload_len != len(body):
            raise ModelFormatError("model payload length mismatch")
        return cls(
            section=section.decode("ascii"),
            dsp_config=dsp_config,
            layout_version=tag,
            payload=payload,
        )


def write_model(path: str | Path, envelope: ModelEnvelope) -> None:
    Path(path).write_bytes(envelope.to_bytes())


def read_model(path: str | Path) -> ModelEnvelope:
    return ModelEnvelope.from_bytes(Path(path).read_bytes())
