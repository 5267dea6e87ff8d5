import numpy as np
import pytest

from tapdetect.dataset import (
    WindowSample,
    canonical_order,
    index_samples,
    label_windows,
    prevalence,
    resolve_fold,
    split_lopo,
    split_task_a,
    SplitPlan,
    window_and_label,
    window_count,
)
from tapdetect.dsp import DspConfig
from tapdetect.errors import TrainingError
from tapdetect.intervals import IntervalSet
from tapdetect.wav import AudioBuffer

from .oracles import rasterize_ms


def make_samples(n, n_positive, participants=("P01",)):
    samples = []
    for i in range(n):
        samples.append(
            WindowSample(
                participant_id=participants[i % len(participants)],
                recording_id="v01",
                window_index=i,
                window_start_s=2.0 * i,
                label=i < n_positive,
                padded=False,
            )
        )
    return samples


# ---------------------------------------------------------------------------
# window labeling
# ---------------------------------------------------------------------------


def test_all_positive_recording():
    positive = IntervalSet.from_pairs([(0, 10)])
    labels = label_windows(10.0, positive)
    assert len(labels) == 5
    assert all(flag for _, _, flag in labels)


def test_sub_threshold_window_negative():
    positive = IntervalSet.from_pairs([(0, 0.9)])
    labels = label_windows(2.0, positive)
    assert labels == [(0, 0.0, False)]  # 0.45 coverage < 0.5


def test_exact_threshold_positive():
    positive = IntervalSet.from_pairs([(0, 1.0)])
    labels = label_windows(2.0, positive)
    assert labels[0][2] is True  # coverage exactly 0.5


def test_window_count_ceil():
    assert window_count(10.0) == 5
    assert window_count(10.5) == 6
    assert window_count(0.1) == 1
    assert window_count(0.0) == 0


def test_label_oracle_equivalence():
    rng = np.random.default_rng(99)
    for _ in range(300):
        duration_ms = int(rng.integers(2_000, 60_000))
        n_intervals = int(rng.integers(0, 6))
        pairs = []
        for _ in range(n_intervals):
            s = int(rng.integers(0, duration_ms - 1))
            e = int(rng.integers(s + 1, duration_ms + 1))
            pairs.append((s / 1000.0, e / 1000.0))
        positive = IntervalSet.from_pairs(pairs)
        duration_s = duration_ms / 1000.0
        labels = label_windows(duration_s, positive, 2.0, 0.5)

        grid = rasterize_ms(pairs, duration_ms)
        for index, _start, flag in labels:
            lo = index * 2000
            overlap_ms = int(grid[lo : lo + 2000].sum())
            assert flag == (overlap_ms >= 1000)


def test_window_and_label_attaches_features():
    cfg = DspConfig()
    rng = np.random.default_rng(1)
    buf = AudioBuffer(samples=rng.uniform(-0.4, 0.4, 5 * 48_000), sample_rate_hz=48_000)
    positive = IntervalSet.from_pairs([(0, 3.2)])
    samples = window_and_label(buf, positive, "P01", "v01", cfg)
    assert len(samples) == 3
    assert [s.label for s in samples] == [True, True, False]  # overlaps 2.0, 1.2, 0.0
    assert samples[-1].padded is True
    assert samples[0].padded is False
    for s in samples:
        assert s.feature_vector is not None and s.logmel is not None
        assert s.logmel.values.shape == (64, 188)
        assert s.window_start_s == s.window_index * 2.0


def test_window_and_label_logmel_only():
    buf = AudioBuffer(samples=np.zeros(2 * 48_000), sample_rate_hz=48_000)
    samples = window_and_label(
        buf, IntervalSet.from_pairs([]), "P01", "v01", with_features=False
    )
    assert samples[0].feature_vector is None
    assert samples[0].logmel is not None


# ---------------------------------------------------------------------------
# task A split
# ---------------------------------------------------------------------------


def test_task_a_stratified_counts():
    samples = make_samples(100, 10)
    plan = split_task_a(samples, 0.7, seed=5)
    fold = plan.folds[0]
    assert len(fold.train_ids) == 70
    assert len(fold.test_ids) == 30
    index = index_samples(samples)
    train, test = resolve_fold(fold, index)
    assert sum(s.label for s in train) == 7
    assert sum(s.label for s in test) == 3


def test_task_a_partition_property():
    samples = make_samples(57, 13)
    plan = split_task_a(samples, 0.7, seed=2)
    fold = plan.folds[0]
    all_ids = set(fold.train_ids) | set(fold.test_ids)
    assert len(fold.train_ids) + len(fold.test_ids) == 57
    assert all_ids == {s.sample_id for s in samples}
    assert not set(fold.train_ids) & set(fold.test_ids)


def test_task_a_deterministic():
    samples = make_samples(100, 10)
    a = split_task_a(samples, 0.7, seed=42)
    b = split_task_a(samples, 0.7, seed=42)
    assert a == b
    assert a.to_json() == b.to_json()


def test_task_a_seeds_differ():
    samples = make_samples(1000, 100)
    a = split_task_a(samples, 0.7, seed=1)
    b = split_task_a(samples, 0.7, seed=2)
    assert a.folds[0].train_ids != b.folds[0].train_ids


def test_task_a_single_class_rejected():
    samples = make_samples(10, 0)
    with pytest.raises(TrainingError):
        split_task_a(samples, 0.7, seed=0)
    with pytest.raises(TrainingError):
        split_task_a(make_samples(10, 9), 0.7, seed=0)  # one negative only


def test_task_a_json_round_trip():
    samples = make_samples(40, 8)
    plan = split_task_a(samples, 0.7, seed=3)
    assert SplitPlan.from_json(plan.to_json()) == plan


# ---------------------------------------------------------------------------
# LOPO split
# ---------------------------------------------------------------------------


def test_lopo_one_fold_per_participant():
    participants = tuple(f"P{i:02d}" for i in range(1, 10))
    samples = make_samples(90, 20, participants)
    plan = split_lopo(samples)
    assert len(plan.folds) == 9
    assert [f.held_out for f in plan.folds] == sorted(participants)


def test_lopo_each_sample_tested_once():
    participants = ("P01", "P02", "P03")
    samples = make_samples(30, 6, participants)
    plan = split_lopo(samples)
    seen = [sid for fold in plan.folds for sid in fold.test_ids]
    assert sorted(seen) == sorted(s.sample_id for s in samples)
    for fold in plan.folds:
        assert not set(fold.train_ids) & set(fold.test_ids)
        assert set(fold.train_ids) | set(fold.test_ids) == {s.sample_id for s in samples}


def test_lopo_two_participants_complementary():
    samples = make_samples(10, 4, ("P01", "P02"))
    plan = split_lopo(samples)
    assert len(plan.folds) == 2
    assert set(plan.folds[0].test_ids) == set(plan.folds[1].train_ids)


def test_lopo_single_participant_rejected():
    with pytest.raises(TrainingError):
        split_lopo(make_samples(10, 4, ("P01",)))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def test_canonical_order():
    samples = make_samples(6, 2, ("P02", "P01"))
    ordered = canonical_order(samples)
    keys = [(s.participant_id, s.recording_id, s.window_index) for s in ordered]
    assert keys == sorted(keys)


def test_prevalence():
    assert prevalence(make_samples(10, 3)) == pytest.approx(0.3)
    assert prevalence([]) == 0.0


def test_index_samples_rejects_duplicates():
    s = make_samples(3, 1)
    with pytest.raises(TrainingError):
        index_samples(s + [s[0]])
