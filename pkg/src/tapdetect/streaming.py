"""Streaming window-by-window detection with majority-vote smoothing.

Audio is consumed in consecutive non-overlapping windows (2 s by default).
Each window gets a raw score/label from the loaded model; the smoothed
label is a centered majority vote over k consecutive raw decisions,
emitted with a delay of floor(k/2) windows. At the stream edges the vote
window truncates and ties fall back to the window's own raw label, so the
first and last decisions are never flipped by missing context.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from .dsp import DspConfig, analyze_window, mel_filterbank
from .errors import ModelFormatError
from .fileformats import SECTION_CNN, SECTION_FOREST, ModelEnvelope
from .forest import forest_from_bytes, predict_forest
from .neural import cnn_from_bytes, predict_cnn
from .wav import AudioBuffer


def majority_smooth(raw: list[bool], k: int = 3) -> list[bool]:
    """Centered majority vote with edge truncation; ties keep the raw label."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be odd and >= 1, got {k}")
    h = k // 2
    n = len(raw)
    out = []
    for i in range(n):
        votes = raw[max(0, i - h) : min(n, i + h + 1)]
        ayes = sum(votes)
        noes = len(votes) - ayes
        if ayes > noes:
            out.append(True)
        elif noes > ayes:
            out.append(False)
        else:
            out.append(raw[i])
    return out


@dataclass(frozen=True)
class StreamEvent:
    t_start: float
    t_end: float
    score: float
    raw_label: bool
    smoothed_label: bool

    def to_json_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "score": self.score,
            "raw_label": self.raw_label,
            "smoothed_label": self.smoothed_label,
        }


class WindowScorer:
    """Scores one window of audio using the model inside an envelope."""

    def __init__(self, envelope: ModelEnvelope):
        self.dsp_config = envelope.dsp_config
        self._filterbank = mel_filterbank(
            self.dsp_config.sample_rate_hz,
            self.dsp_config.n_fft,
            self.dsp_config.n_mels,
            self.dsp_config.fmin_hz,
            self.dsp_config.fmax_hz,
        )
        if envelope.section == SECTION_FOREST:
            model = forest_from_bytes(envelope.payload)
            self._score: Callable = lambda analysis: predict_forest(
                model, analysis.feature_vector
            )
        elif envelope.section == SECTION_CNN:
            model = cnn_from_bytes(envelope.payload)
            self._score = lambda analysis: predict_cnn(model, analysis.logmel)
        else:
            raise ModelFormatError(f"unknown model section {envelope.section!r}")

    @property
    def window_samples(self) -> int:
        return self.dsp_config.window_samples

    def score_window(self, samples: np.ndarray) -> tuple[float, bool]:
        w = self.window_samples
        if len(samples) < w:
            samples = np.concatenate([samples, np.zeros(w - len(samples))])
        buffer = AudioBuffer(
            samples=np.asarray(samples, dtype=np.float64),
            sample_rate_hz=self.dsp_config.sample_rate_hz,
        )
        analysis = analyze_window(buffer, self.dsp_config, filterbank=self._filterbank)
        return self._score(analysis)


@dataclass
class StreamResult:
    events: list[StreamEvent]
    audio_duration_s: float
    processing_s: float

    @property
    def real_time_factor(self) -> float:
        if self.audio_duration_s <= 0:
            return 0.0
        return self.processing_s / self.audio_duration_s


def _window_chunks(source: Iterable[np.ndarray], window_samples: int) -> Iterator[np.ndarray]:
    """Regroup an arbitrary chunk stream into exact windows (last one short)."""
    pending: list[np.ndarray] = []
    have = 0
    for chunk in source:
        pending.append(np.asarray(chunk, dtype=np.float64))
        have += len(pending[-1])
        while have >= window_samples:
            flat = np.concatenate(pending)
            yield flat[:window_samples]
            rest = flat[window_samples:]
            pending = [rest] if len(rest) else []
            have = len(rest)
    if have > 0:
        yield np.concatenate(pending)


def run_stream(
    envelope: ModelEnvelope,
    source: Iterable[np.ndarray],
    smoothing_k: int = 3,
    on_event: Callable[[StreamEvent], None] | None = None,
) -> StreamResult:
    """Consume a chunked sample stream and emit smoothed window events.

    Events surface in order with floor(k/2) windows of latency;
    ``on_event`` fires as each becomes final. Wall-clock processing time
    versus audio duration is reported as the real-time factor.
    """
    scorer = WindowScorer(envelope)
    window_s = scorer.window_samples / envelope.dsp_config.sample_rate_hz
    h = smoothing_k // 2
    raw: list[bool] = []
    scores: list[float] = []
    events: list[StreamEvent] = []
    emitted = 0
    n_samples = 0
    processing = 0.0

    def emit_through(last_final: int):
        nonlocal emitted
        smoothed = majority_smooth(raw, smoothing_k)
        while emitted <= last_final:
            i = emitted
            event = StreamEvent(
                t_start=i * window_s,
                t_end=(i + 1) * window_s,
                score=scores[i],
                raw_label=raw[i],
                smoothed_label=smoothed[i],
            )
            events.append(event)
            if on_event is not None:
                on_event(event)
            emitted += 1

    for chunk in _window_chunks(source, scorer.window_samples):
        n_samples += len(chunk)
        t0 = time.perf_counter()
        score, label = scorer.score_window(chunk)
        processing += time.perf_counter() - t0
        scores.append(score)
        raw.append(label)
        # window i is final once raw[i + h] exists; recompute over the
        # prefix (truncated votes at the left edge are stable)
        if len(raw) - 1 - h >= emitted:
            emit_through(len(raw) - 1 - h)
    if raw:
        emit_through(len(raw) - 1)
    return StreamResult(
        events=events,
        audio_duration_s=n_samples / envelope.dsp_config.sample_rate_hz,
        processing_s=processing,
    )
