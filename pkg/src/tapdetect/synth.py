"""Seeded synthetic corpus: tap-like noise bursts against distractors.

Nine synthetic participants, each with their own tap timbre (band edges,
spectral tilt, level). Positive events are sustained 1-8 kHz band-limited
noise bursts over a room-noise floor; negatives are mains hums with
harmonics, short white-noise clicks, low-band splashes, and plain silence.
Annotations mirror the two-class scheme: "tap water" spans the bursts,
"water" additionally includes widened spans and the splash events.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import AnnotationRecord, format_annotations_csv
from .seeding import named_rng
from .wav import AudioBuffer, write_wav


@dataclass(frozen=True)
class SynthConfig:
    n_participants: int = 9
    recording_s: float = 60.0
    sample_rate_hz: int = 48_000
    seed: int = 0
    window_s: float = 2.0
    second_tap_probability: float = 0.4


@dataclass
class SyntheticRecording:
    participant_id: str
    recording_id: str
    buffer: AudioBuffer
    annotations: list[AnnotationRecord] = field(default_factory=list)


def _band_noise(rng, n, sample_rate, lo_hz, hi_hz, tilt=0.0):
    """White noise restricted to [lo, hi] Hz with an optional spectral tilt."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    mask = (freqs >= lo_hz) & (freqs <= hi_hz)
    spectrum[~mask] = 0.0
    if tilt != 0.0:
        shaped = np.ones_like(freqs)
        inside = freqs > 0
        shaped[inside] = (freqs[inside] / max(lo_hz, 1.0)) ** tilt
        spectrum *= shaped
    x = np.fft.irfft(spectrum, n)
    peak = np.abs(x).max()
    return x / peak if peak > 0 else x


def _fade(x, sample_rate, fade_s=0.05):
    n_fade = min(len(x) // 2, round(fade_s * sample_rate))
    if n_fade > 0:
        ramp = np.linspace(0.0, 1.0, n_fade)
        x[:n_fade] *= ramp
        x[-n_fade:] *= ramp[::-1]
    return x


def _place_events(rng, duration_s, lengths, min_gap_s=1.0, occupied=None):
    """Pick non-overlapping (start, end) spans for the given lengths."""
    spans = list(occupied or [])
    placed = []
    for length in lengths:
        for _ in range(200):
            start = float(rng.uniform(0.5, duration_s - length - 0.5))
            end = start + length
            if all(end + min_gap_s <= s or start - min_gap_s >= e for s, e in spans):
                spans.append((start, end))
                placed.append((start, end))
                break
    return placed


def _place_taps(rng, config: SynthConfig):
    """Tap spans shaped around the window grid.

    Each tap leads into its first window by 1.25-1.85 s, covers one or two
    full windows, and trails 0.15-0.7 s into the last, so every window is
    either clearly inside or clearly outside the majority-overlap rule;
    total durations land at a realistic 3.4-6.5 s.
    """
    w = config.window_s
    n_windows = int(config.recording_s // w)
    n_taps = 1 + (1 if rng.uniform() < config.second_tap_probability else 0)
    blocked: set[int] = set()
    taps = []
    for _ in range(n_taps):
        m = int(rng.integers(1, 3))  # full windows covered
        lead = float(rng.uniform(1.25, 1.85))
        tail = float(rng.uniform(0.15, 0.7))
        for _ in range(200):
            k = int(rng.integers(0, n_windows - m - 1))
            span = set(range(k - 1, k + m + 3))
            if span & blocked:
                continue
            blocked |= span
            start = w * (k + 1) - lead
            end = w * (k + 1) + w * m + tail
            taps.append((start, end))
            break
    return taps


def _add_event(samples, sample_rate, start_s, waveform):
    lo = round(start_s * sample_rate)
    hi = min(lo + len(waveform), len(samples))
    samples[lo:hi] += waveform[: hi - lo]


def generate_recording(participant_index: int, config: SynthConfig) -> SyntheticRecording:
    pid = f"P{participant_index + 1:02d}"
    rid = "r01"
    sr = config.sample_rate_hz
    rng = named_rng(config.seed, f"synth-{pid}-{rid}")
    n = round(config.recording_s * sr)
    samples = 0.004 * rng.standard_normal(n)  # room-noise floor

    # participant-specific tap timbre
    lo_hz = float(rng.uniform(900.0, 1600.0))
    hi_hz = float(rng.uniform(6000.0, 8000.0))
    tilt = float(rng.uniform(-0.6, 0.1))
    level = float(rng.uniform(0.15, 0.3))

    taps = _place_taps(rng, config)

    annotations = []
    for start, end in taps:
        burst = _band_noise(rng, round((end - start) * sr), sr, lo_hz, hi_hz, tilt)
        _add_event(samples, sr, start, _fade(level * burst, sr))
        annotations.append(AnnotationRecord(pid, rid, "tap water", round(start, 3), round(end, 3)))
        # original coarse label: the tap span plus a little slack
        slack_lo = round(max(0.0, start - float(rng.uniform(0.0, 0.4))), 3)
        slack_hi = round(min(config.recording_s, end + float(rng.uniform(0.0, 0.4))), 3)
        annotations.append(AnnotationRecord(pid, rid, "water", slack_lo, slack_hi))

    occupied = list(taps)

    hum_lengths = [float(rng.uniform(3.0, 6.0)) for _ in range(2)]
    for start, end in _place_events(rng, config.recording_s, hum_lengths, occupied=occupied):
        occupied.append((start, end))
        base = float(rng.choice([50.0, 60.0]))
        t = np.arange(round((end - start) * sr)) / sr
        hum = (
            0.05 * np.sin(2 * np.pi * base * t)
            + 0.02 * np.sin(2 * np.pi * 2 * base * t)
            + 0.01 * np.sin(2 * np.pi * 3 * base * t)
        )
        _add_event(samples, sr, start, _fade(hum, sr))

    splash_lengths = [float(rng.uniform(0.6, 1.5)) for _ in range(2)]
    for start, end in _place_events(rng, config.recording_s, splash_lengths, occupied=occupied):
        occupied.append((start, end))
        splash = _band_noise(rng, round((end - start) * sr), sr, 200.0, 1200.0)
        _add_event(samples, sr, start, _fade(0.1 * splash, sr))
        annotations.append(
            AnnotationRecord(pid, rid, "water", round(start, 3), round(end, 3))
        )

    n_clicks = int(rng.integers(4, 9))
    click_lengths = [float(rng.uniform(0.03, 0.1)) for _ in range(n_clicks)]
    for start, end in _place_events(
        rng, config.recording_s, click_lengths, min_gap_s=0.5, occupied=occupied
    ):
        click = rng.standard_normal(round((end - start) * sr))
        peak = np.abs(click).max()
        if peak > 0:
            click = click / peak
        _add_event(samples, sr, start, 0.15 * click)

    samples = np.clip(samples, -1.0, 1.0)
    return SyntheticRecording(
        participant_id=pid,
        recording_id=rid,
        buffer=AudioBuffer(samples=samples, sample_rate_hz=sr),
        annotations=annotations,
    )


def generate_corpus(config: SynthConfig = SynthConfig()) -> list[SyntheticRecording]:
    return [generate_recording(i, config) for i in range(config.n_participants)]


def write_corpus(recordings, root: str | Path) -> tuple[Path, Path]:
    """Write WAVs under <root>/audio/<participant>/<recording>.wav plus one
    annotations.csv; returns (annotations_path, audio_root)."""
    root = Path(root)
    audio_root = root / "audio"
    records = []
    for rec in recordings:
        directory = audio_root / rec.participant_id
        directory.mkdir(parents=True, exist_ok=True)
        write_wav(directory / f"{rec.recording_id}.wav", rec.buffer)
        records.extend(rec.annotations)
    annotations_path = root / "annotations.csv"
    annotations_path.write_text(format_annotations_csv(records), encoding="utf-8")
    return annotations_path, audio_root
