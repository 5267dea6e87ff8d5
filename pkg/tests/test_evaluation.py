import numpy as np
import pytest

from tapdetect.dataset import WindowSample, split_lopo, split_task_a
from tapdetect.evaluation import (
    ConfusionCounts,
    confusion,
    evaluate_split,
    metrics,
    ratio_to_baseline,
    uniform_baseline,
    with_baseline,
)
from tapdetect.significance import (
    PairedComparison,
    exact_wilcoxon_distribution,
    paired_comparison,
    paired_t_test,
    wilcoxon_signed_rank,
)

from .oracles import t_sf_by_quadrature, wilcoxon_exact_by_enumeration


# ---------------------------------------------------------------------------
# confusion
# ---------------------------------------------------------------------------


def test_confusion_perfect():
    labels = np.array([True, False, True, False])
    counts = confusion(labels, labels)
    assert (counts.tp, counts.fp, counts.tn, counts.fn) == (2, 0, 2, 0)


def test_confusion_inverted():
    labels = np.array([True, False, True])
    counts = confusion(~labels, labels)
    assert counts.tp == 0 and counts.tn == 0
    assert counts.fp == 1 and counts.fn == 2


def test_confusion_matches_counting_loop():
    rng = np.random.default_rng(0)
    predictions = rng.uniform(size=1000) < 0.4
    labels = rng.uniform(size=1000) < 0.2
    counts = confusion(predictions, labels)
    # second, independently coded counting pass
    tp = fp = tn = fn = 0
    for p, y in zip(predictions, labels):
        if p and y:
            tp += 1
        elif p and not y:
            fp += 1
        elif not p and y:
            fn += 1
        else:
            tn += 1
    assert (counts.tp, counts.fp, counts.tn, counts.fn) == (tp, fp, tn, fn)
    assert counts.total == 1000


def test_confusion_length_mismatch():
    with pytest.raises(ValueError):
        confusion([True], [True, False])
    with pytest.raises(ValueError):
        confusion([], [])


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def test_metrics_arithmetic():
    report = metrics(ConfusionCounts(tp=3, fp=1, tn=95, fn=1))
    assert report.precision == pytest.approx(0.75)
    assert report.recall == pytest.approx(0.75)
    assert report.f1 == pytest.approx(0.75)
    assert report.accuracy == pytest.approx(0.98)
    assert report.degenerate == ()


def test_metrics_degenerate_flags():
    report = metrics(ConfusionCounts(tp=0, fp=0, tn=10, fn=0))
    assert report.precision == 0.0 and report.recall == 0.0 and report.f1 == 0.0
    assert set(report.degenerate) == {"precision", "recall", "f1"}


def test_f1_between_precision_and_recall():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        tp, fp, tn, fn = rng.integers(0, 40, size=4)
        if tp + fp + tn + fn == 0:
            continue
        report = metrics(ConfusionCounts(int(tp), int(fp), int(tn), int(fn)))
        if not report.degenerate:
            assert min(report.precision, report.recall) - 1e-12 <= report.f1
            assert report.f1 <= max(report.precision, report.recall) + 1e-12


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(2)
    predictions = rng.uniform(size=500) < 0.3
    labels = rng.uniform(size=500) < 0.1
    base = metrics(confusion(predictions, labels))
    perm = rng.permutation(500)
    shuffled = metrics(confusion(predictions[perm], labels[perm]))
    assert base == shuffled


# ---------------------------------------------------------------------------
# uniform baseline
# ---------------------------------------------------------------------------


def test_baseline_closed_form_low_prevalence():
    labels = np.zeros(100_000, dtype=bool)
    labels[:6000] = True
    report = uniform_baseline(labels, seed=3, trials=8)
    assert report.expected_f1 == pytest.approx(0.06 / 0.56, abs=1e-12)
    assert report.f1 == pytest.approx(0.1071, abs=0.01)
    assert report.precision == pytest.approx(0.06, abs=0.01)
    assert report.recall == pytest.approx(0.5, abs=0.02)


def test_baseline_prevalence_ten_percent():
    labels = np.zeros(50_000, dtype=bool)
    labels[:5000] = True
    report = uniform_baseline(labels, seed=4, trials=8)
    assert report.expected_f1 == pytest.approx(1 / 6, abs=1e-12)
    assert report.f1 == pytest.approx(0.1667, abs=0.01)


def test_baseline_zero_prevalence():
    report = uniform_baseline(np.zeros(1000, dtype=bool), seed=5, trials=4)
    assert report.expected_f1 == 0.0
    assert report.f1 == 0.0


def test_baseline_deterministic():
    labels = np.array([True] * 10 + [False] * 90)
    a = uniform_baseline(labels, seed=6, trials=16)
    b = uniform_baseline(labels, seed=6, trials=16)
    assert a == b


# ---------------------------------------------------------------------------
# ratio to baseline
# ---------------------------------------------------------------------------


def test_ratio_values():
    assert ratio_to_baseline(0.75, 0.1122) == pytest.approx(668.4, abs=0.5)
    assert ratio_to_baseline(0.5, 0.5) == 100.0
    assert ratio_to_baseline(0.0, 0.2) == 0.0
    assert ratio_to_baseline(0.5, 0.0) is None
    assert ratio_to_baseline(0.5, None) is None


def test_with_baseline_attaches_ratio():
    report = with_baseline(metrics(ConfusionCounts(tp=5, fp=5, tn=85, fn=5)), 0.25)
    assert report.baseline_f1 == 0.25
    assert report.ratio_to_baseline_pct == pytest.approx(100 * report.f1 / 0.25)


# ---------------------------------------------------------------------------
# evaluate_split
# ---------------------------------------------------------------------------


class MajorityStub:
    """Predicts the majority training label for everything."""

    def __init__(self, train):
        labels = [s.label for s in train]
        self.vote = sum(labels) * 2 >= len(labels)


def stub_train(train):
    return MajorityStub(train)


def stub_predict(model, test):
    return np.full(len(test), model.vote, dtype=bool)


def fold_samples(participants=("P01", "P02", "P03"), per=10, positive_rate=0.3):
    samples = []
    for pid in participants:
        for i in range(per):
            samples.append(
                WindowSample(
                    participant_id=pid,
                    recording_id="v01",
                    window_index=i,
                    window_start_s=2.0 * i,
                    label=i < per * positive_rate,
                )
            )
    return samples


def test_single_fold_reduces_to_metrics():
    samples = fold_samples(("P01",), per=40)
    plan = split_task_a(samples, 0.7, seed=1)
    result = evaluate_split(plan, samples, stub_train, stub_predict, baseline_seed=2)
    assert len(result.folds) == 1
    fold = result.folds[0]
    # stub predicts all-negative (majority), so recompute directly
    labels = np.array(
        [s.label for s in (s for s in samples if s.sample_id in set(plan.folds[0].test_ids))]
    )
    expected = metrics(confusion(np.zeros(len(labels), dtype=bool), labels))
    assert fold.report.counts == expected.counts
    assert result.pooled.counts == expected.counts
    assert result.mean_of_folds_f1 == fold.report.f1


def test_lopo_nine_folds_and_aggregate():
    participants = tuple(f"P{i:02d}" for i in range(1, 10))
    samples = fold_samples(participants, per=6)
    plan = split_lopo(samples)
    result = evaluate_split(plan, samples, stub_train, stub_predict, baseline_seed=3)
    assert len(result.folds) == 9
    assert result.pooled is not None and result.mean_of_folds_f1 is not None
    pooled = ConfusionCounts()
    for fold in result.folds:
        pooled = pooled + fold.report.counts
    assert result.pooled.counts == pooled  # pooled counts are additive
    assert result.pooled.counts.total == len(samples)


def test_evaluate_split_json_round_trips():
    import json

    samples = fold_samples(per=8)
    plan = split_lopo(samples)
    result = evaluate_split(plan, samples, stub_train, stub_predict)
    payload = result.to_json_dict()
    assert json.loads(json.dumps(payload)) == payload


# ---------------------------------------------------------------------------
# paired t-test
# ---------------------------------------------------------------------------


def test_t_test_zero_variance_sentinel():
    result = paired_t_test([2.0, 2.0, 2.0, 2.0])
    assert not result.defined


def test_t_test_symmetric_pairs():
    result = paired_t_test([1.0, -1.0, 2.0, -2.0])
    assert result.statistic == pytest.approx(0.0, abs=1e-12)
    assert result.p_value == pytest.approx(1.0, abs=1e-12)


def test_t_test_known_case():
    result = paired_t_test([1.0, 2.0, 3.0, 4.0, 5.0])
    assert result.statistic == pytest.approx(3 / (np.std([1, 2, 3, 4, 5], ddof=1) / np.sqrt(5)))
    assert result.statistic == pytest.approx(4.2426, abs=1e-4)
    assert result.p_value == pytest.approx(0.0132, abs=0.0005)


def test_t_test_matches_quadrature_oracle():
    result = paired_t_test([1.0, 2.0, 3.0, 4.0, 5.0])
    oracle_p = 2 * t_sf_by_quadrature(abs(result.statistic), df=4)
    assert result.p_value == pytest.approx(oracle_p, abs=1e-6)


def test_t_test_short_input():
    assert not paired_t_test([1.0]).defined


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank
# ---------------------------------------------------------------------------


def test_wilcoxon_nine_positive():
    result = wilcoxon_signed_rank([1, 2, 3, 4, 5, 6, 7, 8, 9])
    assert result.statistic == 0.0
    assert result.p_value == pytest.approx(2 / 512, abs=1e-12)
    assert result.detail == "exact"


def test_wilcoxon_single_pair():
    result = wilcoxon_signed_rank([1.0])
    assert result.p_value == pytest.approx(1.0)


def test_wilcoxon_mirrored_identical():
    d = [0.3, -1.2, 2.2, 0.7, -0.4]
    a = wilcoxon_signed_rank(d)
    b = wilcoxon_signed_rank([-x for x in d])
    assert a.statistic == b.statistic
    assert a.p_value == b.p_value


def test_wilcoxon_all_zero_sentinel():
    assert not wilcoxon_signed_rank([0.0, 0.0]).defined


def test_wilcoxon_drops_zeros():
    with_zeros = wilcoxon_signed_rank([0.0, 1.0, 2.0, 0.0, 3.0])
    without = wilcoxon_signed_rank([1.0, 2.0, 3.0])
    assert with_zeros.statistic == without.statistic
    assert with_zeros.p_value == without.p_value


def test_wilcoxon_distribution_sums_to_one():
    for n in (3, 7, 12):
        pmf = exact_wilcoxon_distribution(n)
        assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
        assert len(pmf) == n * (n + 1) // 2 + 1


def test_wilcoxon_matches_enumeration_oracle():
    rng = np.random.default_rng(8)
    for _ in range(25):
        n = int(rng.integers(2, 11))
        d = np.round(rng.normal(size=n) * 4, 1)
        d = d[d != 0]
        if len(d) == 0:
            continue
        result = wilcoxon_signed_rank(d)
        w_oracle, p_oracle = wilcoxon_exact_by_enumeration(d)
        assert result.statistic == pytest.approx(w_oracle)
        assert result.p_value == pytest.approx(p_oracle, abs=1e-12)


def test_wilcoxon_with_ties_matches_oracle():
    d = [1.0, 1.0, -1.0, 2.0, 2.0, -3.0, 4.0]
    result = wilcoxon_signed_rank(d)
    w_oracle, p_oracle = wilcoxon_exact_by_enumeration(d)
    assert result.statistic == pytest.approx(w_oracle)
    assert result.p_value == pytest.approx(p_oracle, abs=1e-12)


# ---------------------------------------------------------------------------
# paired comparison wrapper
# ---------------------------------------------------------------------------


def test_paired_comparison():
    a = [500.0, 620.0, 410.0, 388.0, 702.0, 455.0, 390.0, 601.0, 577.0]
    b = [300.0, 310.0, 305.0, 312.0, 355.0, 290.0, 315.0, 341.0, 322.0]
    result = paired_comparison(a, b)
    assert isinstance(result, PairedComparison)
    assert result.t_test.defined and result.wilcoxon.defined
    assert result.wilcoxon.p_value == pytest.approx(2 / 512, abs=1e-12)
    assert result.t_test.p_value < 0.01


def test_paired_comparison_shape_mismatch():
    with pytest.raises(ValueError):
        paired_comparison([1.0, 2.0], [1.0])
