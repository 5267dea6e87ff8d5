"""Binary detection metrics, the uniform dummy baseline, and fold evaluation.

Reports follow one scheme everywhere: accuracy, precision, recall, F1, the
uniform-baseline F1 for the same label distribution, and the classifier's
F1 as a percentage of that baseline. Cross-fold aggregation reports both
pooled confusion counts and the mean of per-fold F1 scores, since the two
can legitimately disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataset import SplitPlan, WindowSample, index_samples, resolve_fold
from .seeding import named_rng


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


def confusion(predictions: Sequence[bool], labels: Sequence[bool]) -> ConfusionCounts:
    predictions = np.asarray(predictions, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    if predictions.shape != labels.shape:
        raise ValueError(
            f"predictions and labels differ in shape: {predictions.shape} vs {labels.shape}"
        )
    if predictions.size == 0:
        raise ValueError("cannot build a confusion matrix from zero samples")
    return ConfusionCounts(
        tp=int(np.sum(predictions & labels)),
        fp=int(np.sum(predictions & ~labels)),
        tn=int(np.sum(~predictions & ~labels)),
        fn=int(np.sum(~predictions & labels)),
    )


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    accuracy: float
    precision: float
    recall: float
    f1: float
    # metric names whose denominator was zero (value reported as 0)
    degenerate: tuple[str, ...] = ()
    baseline_f1: float | None = None
    ratio_to_baseline_pct: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "tn": self.counts.tn,
            "fn": self.counts.fn,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": list(self.degenerate),
            "baseline_f1": self.baseline_f1,
            "ratio_to_baseline_pct": self.ratio_to_baseline_pct,
        }


def metrics(counts: ConfusionCounts) -> MetricsReport:
    """Standard binary metrics; zero-denominator cases score 0 and are flagged."""
    degenerate = []
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if counts.tp + counts.fn > 0:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.append("f1")
    accuracy = (counts.tp + counts.tn) / counts.total if counts.total else 0.0
    return MetricsReport(
        counts=counts,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        degenerate=tuple(degenerate),
    )


def with_baseline(report: MetricsReport, baseline_f1: float | None) -> MetricsReport:
    return MetricsReport(
        counts=report.counts,
        accuracy=report.accuracy,
        precision=report.precision,
        recall=report.recall,
        f1=report.f1,
        degenerate=report.degenerate,
        baseline_f1=baseline_f1,
        ratio_to_baseline_pct=ratio_to_baseline(report.f1, baseline_f1),
    )


def ratio_to_baseline(f1: float, baseline_f1: float | None) -> float | None:
    """100 * f1 / baseline_f1; None when the baseline is zero or missing."""
    if baseline_f1 is None or baseline_f1 <= 0:
        return None
    return 100.0 * f1 / baseline_f1


@dataclass(frozen=True)
class BaselineReport:
    """Uniform dummy (predict positive with probability 0.5).

    ``f1``/``accuracy``/``precision``/``recall`` are means over seeded
    trials; the expected_* fields are the closed forms: precision -> label
    prevalence p, recall -> 0.5, f1 -> p / (p + 0.5).
    """

    f1: float
    accuracy: float
    precision: float
    recall: float
    expected_f1: float
    expected_precision: float
    expected_recall: float
    trials: int
    prevalence: float

    def to_json_dict(self) -> dict:
        return {
            "f1": self.f1,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "expected_f1": self.expected_f1,
            "expected_precision": self.expected_precision,
            "expected_recall": self.expected_recall,
            "trials": self.trials,
            "prevalence": self.prevalence,
        }


def uniform_baseline(labels: Sequence[bool], seed: int = 0, trials: int = 32) -> BaselineReport:
    labels = np.asarray(labels, dtype=bool)
    if labels.size == 0:
        raise ValueError("baseline needs at least one label")
    if trials < 1:
        raise ValueError("baseline needs at least one trial")
    p = float(labels.mean())
    rng = named_rng(seed, "uniform-baseline")
    rows = []
    for _ in range(trials):
        predictions = rng.uniform(size=labels.size) < 0.5
        m = metrics(confusion(predictions, labels))
        rows.append((m.f1, m.accuracy, m.precision, m.recall))
    mean = np.mean(rows, axis=0)
    return BaselineReport(
        f1=float(mean[0]),
        accuracy=float(mean[1]),
        precision=float(mean[2]),
        recall=float(mean[3]),
        expected_f1=p / (p + 0.5) if p > 0 else 0.0,
        expected_precision=p,
        expected_recall=0.5,
        trials=trials,
        prevalence=p,
    )


# ---------------------------------------------------------------------------
# split evaluation
# ---------------------------------------------------------------------------


@dataclass
class FoldReport:
    held_out: str | None
    n_test: int
    report: MetricsReport
    baseline: BaselineReport


@dataclass
class SplitEvaluation:
    kind: str
    folds: list[FoldReport] = field(default_factory=list)
    pooled: MetricsReport | None = None
    pooled_baseline: BaselineReport | None = None
    mean_of_folds_f1: float | None = None
    skipped_folds: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "folds": [
                {
                    "held_out": f.held_out,
                    "n_test": f.n_test,
                    "metrics": f.report.to_json_dict(),
                    "baseline": f.baseline.to_json_dict(),
                }
                for f in self.folds
            ],
            "pooled": self.pooled.to_json_dict() if self.pooled else None,
            "pooled_baseline": (
                self.pooled_baseline.to_json_dict() if self.pooled_baseline else None
            ),
            "mean_of_folds_f1": self.mean_of_folds_f1,
            "skipped_folds": self.skipped_folds,
        }


def evaluate_split(
    plan: SplitPlan,
    samples: Sequence[WindowSample],
    train_fn: Callable[[list[WindowSample]], object],
    predict_fn: Callable[[object, list[WindowSample]], np.ndarray],
    baseline_seed: int = 0,
    baseline_trials: int = 32,
) -> SplitEvaluation:
    """Train and score each fold of a split plan.

    For LOPO plans a fresh model is trained per fold, so the held-out
    participant is never seen. Empty test folds are skipped and recorded.
    Aggregation reports pooled confusion counts plus mean-of-folds F1.
    """
    index = index_samples(samples)
    out = SplitEvaluation(kind=plan.kind)
    pooled_counts = ConfusionCounts()
    pooled_labels: list[np.ndarray] = []
    fold_f1: list[float] = []
    for fold in plan.folds:
        if not fold.test_ids:
            out.skipped_folds.append(fold.held_out or "(unnamed)")
            continue
        train, test = resolve_fold(fold, index)
        model = train_fn(train)
        predictions = np.asarray(predict_fn(model, test), dtype=bool)
        labels = np.array([s.label for s in test], dtype=bool)
        counts = confusion(predictions, labels)
        baseline = uniform_baseline(labels, seed=baseline_seed, trials=baseline_trials)
        report = with_baseline(metrics(counts), baseline.f1)
        out.folds.append(
            FoldReport(
                held_out=fold.held_out,
                n_test=len(test),
                report=report,
                baseline=baseline,
            )
        )
        pooled_counts = pooled_counts + counts
        pooled_labels.append(labels)
        fold_f1.append(report.f1)
    if pooled_labels:
        all_labels = np.concatenate(pooled_labels)
        out.pooled_baseline = uniform_baseline(
            all_labels, seed=baseline_seed, trials=baseline_trials
        )
        out.pooled = with_baseline(metrics(pooled_counts), out.pooled_baseline.f1)
        out.mean_of_folds_f1 = float(np.mean(fold_f1))
    return out
