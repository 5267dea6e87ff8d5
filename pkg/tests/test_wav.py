import struct

import numpy as np
import pytest

from tapdetect.errors import AudioDecodeError
from tapdetect.wav import AudioBuffer, load_wav, resample_to, sine, wav_bytes


def pcm16_wav(samples_i16, sample_rate=48_000, channels=1):
    payload = np.asarray(samples_i16, dtype="<i2").tobytes()
    return (
        struct.pack(
            "<4sI4s4sIHHIIHH4sI",
            b"RIFF",
            36 + len(payload),
            b"WAVE",
            b"fmt ",
            16,
            1,
            channels,
            sample_rate,
            sample_rate * 2 * channels,
            2 * channels,
            16,
            b"data",
            len(payload),
        )
        + payload
    )


def test_full_scale_positive_sample():
    buf = load_wav(pcm16_wav([32767] * 100))
    assert np.allclose(buf.samples, 32767 / 32768)
    assert buf.samples.max() == pytest.approx(0.99997, abs=1e-5)


def test_stereo_mixdown_cancels():
    interleaved = np.empty(200, dtype=np.int16)
    interleaved[0::2] = 1000
    interleaved[1::2] = -1000
    buf = load_wav(pcm16_wav(interleaved, channels=2))
    assert len(buf) == 100
    assert np.all(buf.samples == 0.0)


def test_one_second_sample_count():
    buf = load_wav(pcm16_wav([0] * 48_000, sample_rate=48_000))
    assert len(buf) == 48_000
    assert buf.duration_s == 1.0


def test_float32_wav_round_trip():
    original = sine(440.0, 0.1, amplitude=0.25)
    buf = load_wav(wav_bytes(original, bits=32))
    assert buf.sample_rate_hz == 48_000
    assert np.allclose(buf.samples, original.samples, atol=1e-7)


def test_pcm16_round_trip_quantizes():
    original = sine(440.0, 0.05, amplitude=0.5)
    buf = load_wav(wav_bytes(original, bits=16))
    assert np.allclose(buf.samples, original.samples, atol=1.0 / 32768)


def test_not_riff_rejected():
    with pytest.raises(AudioDecodeError):
        load_wav(b"OggS" + b"\x00" * 64)


def test_truncated_data_chunk_rejected():
    data = pcm16_wav([0] * 100)
    with pytest.raises(AudioDecodeError):
        load_wav(data[:-50])


def test_unsupported_bit_depth_rejected():
    data = bytearray(pcm16_wav([0] * 10))
    data[34:36] = struct.pack("<H", 24)  # claim 24-bit PCM
    with pytest.raises(AudioDecodeError):
        load_wav(bytes(data))


def test_unsupported_codec_rejected():
    data = bytearray(pcm16_wav([0] * 10))
    data[20:22] = struct.pack("<H", 85)  # mp3 format tag
    with pytest.raises(AudioDecodeError):
        load_wav(bytes(data))


def test_extra_chunks_skipped():
    base = pcm16_wav([100] * 10)
    # splice a LIST chunk between fmt and data
    head, tail = base[:36], base[36:]
    listchunk = b"LIST" + struct.pack("<I", 4) + b"INFO"
    data = head + listchunk + tail
    data = data[:4] + struct.pack("<I", len(data) - 8) + data[8:]
    buf = load_wav(data)
    assert len(buf) == 10


def test_odd_sized_chunk_word_aligned():
    base = pcm16_wav([7] * 10)
    head, tail = base[:36], base[36:]
    # 3-byte chunk bodies are padded to a word boundary in RIFF
    oddchunk = b"note" + struct.pack("<I", 3) + b"abc" + b"\x00"
    data = head + oddchunk + tail
    data = data[:4] + struct.pack("<I", len(data) - 8) + data[8:]
    buf = load_wav(data)
    assert len(buf) == 10
    assert buf.samples[0] == pytest.approx(7 / 32768)


def test_resample_identity():
    buf = sine(100.0, 0.5)
    out = resample_to(buf, buf.sample_rate_hz)
    assert out is buf


def test_resample_preserves_rms():
    buf = sine(100.0, 1.0, sample_rate_hz=44_100, amplitude=0.5)
    out = resample_to(buf, 48_000)
    rms_in = np.sqrt(np.mean(buf.samples**2))
    rms_out = np.sqrt(np.mean(out.samples**2))
    # analytic RMS of an amplitude-a sine is a/sqrt(2)
    assert rms_in == pytest.approx(0.5 / np.sqrt(2), rel=1e-3)
    assert rms_out == pytest.approx(rms_in, rel=0.01)


def test_resample_sample_count():
    buf = AudioBuffer(samples=np.zeros(24_000), sample_rate_hz=24_000)
    out = resample_to(buf, 48_000)
    assert abs(len(out) - 48_000) <= 1
    assert abs(out.duration_s - buf.duration_s) <= 1.0 / 24_000


def test_resample_duration_preserved_random_rates():
    rng = np.random.default_rng(9)
    for _ in range(25):
        src = int(rng.integers(8_000, 96_000))
        dst = int(rng.integers(8_000, 96_000))
        n = int(rng.integers(100, 50_000))
        buf = AudioBuffer(samples=rng.uniform(-1, 1, n), sample_rate_hz=src)
        out = resample_to(buf, dst)
        assert abs(out.duration_s - buf.duration_s) <= 1.0 / min(src, dst)


def test_wav_round_trip_random_signals():
    rng = np.random.default_rng(10)
    for _ in range(10):
        n = int(rng.integers(1, 10_000))
        samples = rng.uniform(-1, 1, n)
        buf = AudioBuffer(samples=samples, sample_rate_hz=48_000)
        back16 = load_wav(wav_bytes(buf, bits=16))
        assert len(back16) == n
        assert np.abs(back16.samples - samples).max() <= 1.0 / 32768
        back32 = load_wav(wav_bytes(buf, bits=32))
        assert np.abs(back32.samples - samples).max() <= 1e-7
