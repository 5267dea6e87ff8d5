"""Windowing recordings into labeled samples and building evaluation splits.

Recordings are cut into consecutive non-overlapping windows (2 s by
default). A window is positive when at least half of it lies inside the
merged positive intervals; the threshold is configurable. Two split
protocols are provided: a stratified random train/test split over windows
and leave-one-participant-out folds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dsp import DspConfig, FeatureVector, LogMelSpectrogram, MelFilterbank, analyze_window
from .errors import TrainingError
from .intervals import NS_PER_S, IntervalSet
from .wav import AudioBuffer

KIND_RANDOM_70_30 = "random_70_30"
KIND_LOPO = "lopo"


@dataclass
class WindowSample:
    """One classification unit: a 2 s window with label and features."""

    participant_id: str
    recording_id: str
    window_index: int
    window_start_s: float
    label: bool
    feature_vector: FeatureVector | None = None
    logmel: LogMelSpectrogram | None = None
    padded: bool = False

    @property
    def sample_id(self) -> str:
        return f"{self.participant_id}/{self.recording_id}/{self.window_index}"


def window_count(duration_s: float, window_s: float = 2.0) -> int:
    """Number of consecutive windows covering a recording: ceil(d / w)."""
    return max(0, math.ceil(round(duration_s / window_s, 9)))


def label_windows(
    duration_s: float,
    positive: IntervalSet,
    window_s: float = 2.0,
    overlap_threshold: float = 0.5,
) -> list[tuple[int, float, bool]]:
    """Label every window of a recording: (index, start_s, is_positive).

    Positive iff overlap(window, positive) / window_s >= threshold. The
    comparison runs on the nanosecond grid, so grid-aligned inputs are
    labeled exactly. Overlap for the final partial window is measured
    against the true recording span.
    """
    n = window_count(duration_s, window_s)
    threshold_ns = round(overlap_threshold * window_s * NS_PER_S)
    out = []
    for i in range(n):
        start = i * window_s
        end = min(start + window_s, duration_s)
        overlap_ns = positive.span_overlap_ns(start, end)
        out.append((i, start, overlap_ns >= threshold_ns))
    return out


def window_and_label(
    buffer: AudioBuffer,
    positive: IntervalSet,
    participant_id: str,
    recording_id: str,
    config: DspConfig = DspConfig(),
    overlap_threshold: float = 0.5,
    filterbank: MelFilterbank | None = None,
    with_features: bool = True,
    with_logmel: bool = True,
) -> list[WindowSample]:
    """Cut one recording into labeled windows with computed features.

    The last partial window is zero-padded to full window length and kept,
    flagged via ``padded``.
    """
    window_s = config.window_s
    w = config.window_samples
    labels = label_windows(buffer.duration_s, positive, window_s, overlap_threshold)
    samples: list[WindowSample] = []
    for index, start_s, is_positive in labels:
        lo = index * w
        hi = min(lo + w, len(buffer.samples))
        chunk = buffer.samples[lo:hi]
        padded = len(chunk) < w
        if padded:
            chunk = np.concatenate([chunk, np.zeros(w - len(chunk))])
        sample = WindowSample(
            participant_id=participant_id,
            recording_id=recording_id,
            window_index=index,
            window_start_s=start_s,
            label=is_positive,
            padded=padded,
        )
        if with_features or with_logmel:
            analysis = analyze_window(
                AudioBuffer(samples=chunk, sample_rate_hz=buffer.sample_rate_hz),
                config,
                filterbank=filterbank,
                window_origin_s=start_s,
            )
            if with_features:
                sample.feature_vector = analysis.feature_vector
            if with_logmel:
                sample.logmel = analysis.logmel
        samples.append(sample)
    return samples


def canonical_order(samples: Sequence[WindowSample]) -> list[WindowSample]:
    """Deterministic (participant, recording, window index) ordering."""
    return sorted(samples, key=lambda s: (s.participant_id, s.recording_id, s.window_index))


def prevalence(samples: Sequence[WindowSample]) -> float:
    if not samples:
        return 0.0
    return sum(1 for s in samples if s.label) / len(samples)


# ---------------------------------------------------------------------------
# split plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitFold:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    held_out: str | None = None  # participant id for LOPO folds


@dataclass(frozen=True)
class SplitPlan:
    kind: str
    seed: int
    folds: tuple[SplitFold, ...] = field(default=())

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "seed": self.seed,
            "folds": [
                {
                    "held_out": f.held_out,
                    "train": list(f.train_ids),
                    "test": list(f.test_ids),
                }
                for f in self.folds
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        obj = json.loads(text)
        return cls(
            kind=obj["kind"],
            seed=obj["seed"],
            folds=tuple(
                SplitFold(
                    train_ids=tuple(f["train"]),
                    test_ids=tuple(f["test"]),
                    held_out=f.get("held_out"),
                )
                for f in obj["folds"]
            ),
        )


def split_task_a(
    samples: Sequence[WindowSample],
    train_fraction: float = 0.7,
    seed: int = 0,
) -> SplitPlan:
    """Stratified random window split: each class pool shuffled and cut.

    Both classes keep their train share, so label prevalence matches
    between train and test up to rounding.
    """
    if not samples:
        raise TrainingError("cannot split an empty sample list")
    positives = sorted(s.sample_id for s in samples if s.label)
    negatives = sorted(s.sample_id for s in samples if not s.label)
    if len(positives) < 2 or len(negatives) < 2:
        raise TrainingError(
            f"need >= 2 samples per class to split, got {len(positives)} positive / "
            f"{len(negatives)} negative"
        )
    rng = np.random.default_rng(seed)
    train: list[str] = []
    test: list[str] = []
    for pool in (negatives, positives):
        order = rng.permutation(len(pool))
        n_train = min(max(int(round(len(pool) * train_fraction)), 1), len(pool) - 1)
        shuffled = [pool[i] for i in order]
        train.extend(shuffled[:n_train])
        test.extend(shuffled[n_train:])
    fold = SplitFold(train_ids=tuple(sorted(train)), test_ids=tuple(sorted(test)))
    return SplitPlan(kind=KIND_RANDOM_70_30, seed=seed, folds=(fold,))


def split_lopo(samples: Sequence[WindowSample]) -> SplitPlan:
    """One fold per participant: test on them, train on everyone else."""
    by_participant: dict[str, list[str]] = {}
    for s in samples:
        by_participant.setdefault(s.participant_id, []).append(s.sample_id)
    participants = sorted(by_participant)
    if len(participants) < 2:
        raise TrainingError(
            f"LOPO needs >= 2 participants, got {len(participants)}"
        )
    folds = []
    for held_out in participants:
        test = tuple(sorted(by_participant[held_out]))
        train = tuple(
            sorted(
                sid
                for pid, ids in by_participant.items()
                if pid != held_out
                for sid in ids
            )
        )
        folds.append(SplitFold(train_ids=train, test_ids=test, held_out=held_out))
    return SplitPlan(kind=KIND_LOPO, seed=0, folds=tuple(folds))


def index_samples(samples: Sequence[WindowSample]) -> dict[str, WindowSample]:
    index = {s.sample_id: s for s in samples}
    if len(index) != len(samples):
        raise TrainingError("duplicate sample ids; check participant/recording naming")
    return index


def resolve_fold(
    fold: SplitFold, index: dict[str, WindowSample]
) -> tuple[list[WindowSample], list[WindowSample]]:
    missing = [sid for sid in (*fold.train_ids, *fold.test_ids) if sid not in index]
    if missing:
        raise TrainingError(f"split references unknown sample ids, e.g. {missing[0]}")
    train = [index[sid] for sid in fold.train_ids]
    test = [index[sid] for sid in fold.test_ids]
    return train, test
