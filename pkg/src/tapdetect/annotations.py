"""Temporal audio-event annotations: parsing, filtering, and validation metrics.

The canonical interchange schema is a CSV with header
``participant_id,recording_id,class_label,start_s,end_s`` (UTF-8, decimal
point, LF or CRLF), or the JSON-lines equivalent with identical keys.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .errors import AnnotationParseError, ConfigError
from .intervals import IntervalSet, coverage, iou, pooled_coverage, pooled_iou

CSV_HEADER = ("participant_id", "recording_id", "class_label", "start_s", "end_s")


@dataclass(frozen=True)
class AnnotationRecord:
    """One labeled time span in one recording."""

    participant_id: str
    recording_id: str
    class_label: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not math.isfinite(self.start_s) or not math.isfinite(self.end_s):
            raise ValueError("annotation endpoints must be finite")
        if self.start_s < 0:
            raise ValueError(f"negative start time {self.start_s}")
        if self.end_s <= self.start_s:
            raise ValueError(
                f"annotation must have positive duration, got [{self.start_s}, {self.end_s}]"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def _parse_row(values: dict[str, str], line: int) -> AnnotationRecord:
    try:
        start_s = float(values["start_s"])
        end_s = float(values["end_s"])
    except (ValueError, TypeError) as exc:
        raise AnnotationParseError(f"non-numeric time value ({exc})", line) from None
    try:
        return AnnotationRecord(
            participant_id=values["participant_id"],
            recording_id=values["recording_id"],
            class_label=values["class_label"],
            start_s=start_s,
            end_s=end_s,
        )
    except ValueError as exc:
        raise AnnotationParseError(str(exc), line) from None


def parse_annotations(text: str | TextIO, format: str = "csv") -> list[AnnotationRecord]:
    """Parse an annotation stream into records, in input order.

    Records are returned as written: not sorted, not merged. Malformed rows
    raise :class:`AnnotationParseError` naming the 1-based line number.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    if format == "csv":
        return _parse_csv(text)
    if format in ("jsonl", "json-lines"):
        return _parse_jsonl(text)
    raise ConfigError(f"unknown annotation format {format!r} (expected csv or jsonl)")


def _parse_csv(stream: TextIO) -> list[AnnotationRecord]:
    reader = csv.reader(stream)
    records: list[AnnotationRecord] = []
    header: Sequence[str] | None = None
    for line, row in enumerate(reader, start=1):
        if not row:
            continue
        if header is None:
            header = tuple(cell.strip() for cell in row)
            if header != CSV_HEADER:
                raise AnnotationParseError(
                    f"unexpected header {header}, expected {CSV_HEADER}", line
                )
            continue
        if len(row) != len(CSV_HEADER):
            raise AnnotationParseError(
                f"expected {len(CSV_HEADER)} columns, got {len(row)}", line
            )
        records.append(_parse_row(dict(zip(CSV_HEADER, row)), line))
    if header is None:
        raise AnnotationParseError("empty input: missing header row", 1)
    return records


def _parse_jsonl(stream: TextIO) -> list[AnnotationRecord]:
    records: list[AnnotationRecord] = []
    for line, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise AnnotationParseError(f"invalid JSON ({exc.msg})", line) from None
        missing = [k for k in CSV_HEADER if k not in obj]
        if missing:
            raise AnnotationParseError(f"missing keys {missing}", line)
        records.append(_parse_row({k: obj[k] for k in CSV_HEADER}, line))
    return records


def format_annotations_csv(records: Iterable[AnnotationRecord]) -> str:
    """Serialize records to the canonical CSV schema."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(
            [r.participant_id, r.recording_id, r.class_label, repr(r.start_s), repr(r.end_s)]
        )
    return out.getvalue()


def filter_min_duration(
    records: Sequence[AnnotationRecord], min_s: float
) -> list[AnnotationRecord]:
    """Keep records lasting at least ``min_s`` seconds (inclusive), order preserved."""
    if min_s < 0:
        raise ConfigError(f"min_s must be non-negative, got {min_s}")
    return [r for r in records if r.duration_s >= min_s]


def merge_to_interval_set(
    records: Iterable[AnnotationRecord],
    class_label: str,
    scope: tuple[str, str] | None = None,
) -> IntervalSet:
    """Union of all matching annotation spans as a canonical interval set.

    ``scope`` is a (participant_id, recording_id) pair; None takes every
    record of the class (caller guarantees a shared timeline).
    """
    selected = (
        r
        for r in records
        if r.class_label == class_label
        and (scope is None or (r.participant_id, r.recording_id) == scope)
    )
    return IntervalSet.from_pairs((r.start_s, r.end_s) for r in selected)


# ---------------------------------------------------------------------------
# duration report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassStats:
    """Duration/count totals for one class, before and after the cutoff."""

    total_s: float = 0.0
    total_s_kept: float = 0.0
    count: int = 0
    count_kept: int = 0

    @property
    def kept_fraction(self) -> float | None:
        if self.total_s == 0:
            return None
        return self.total_s_kept / self.total_s


@dataclass(frozen=True)
class DurationReport:
    """Per-participant and aggregate duration statistics for two classes.

    Ratios follow the convention numerator class / denominator class
    (``ratio_classes``), computed once over all labels and once over the
    kept (>= min_s) subset. A participant missing the denominator class
    yields None ratios.
    """

    min_s: float
    ratio_classes: tuple[str, str]
    per_participant: dict[str, dict[str, ClassStats]]
    aggregate: dict[str, ClassStats]

    def stats(self, participant_id: str | None, class_label: str) -> ClassStats:
        table = self.aggregate if participant_id is None else self.per_participant.get(
            participant_id, {}
        )
        return table.get(class_label, ClassStats())

    def ratio(self, participant_id: str | None = None) -> tuple[float | None, float | None]:
        """(all-labels ratio, kept-subset ratio) of numerator/denominator durations."""
        num = self.stats(participant_id, self.ratio_classes[0])
        den = self.stats(participant_id, self.ratio_classes[1])
        ratio_all = num.total_s / den.total_s if den.total_s > 0 else None
        ratio_kept = num.total_s_kept / den.total_s_kept if den.total_s_kept > 0 else None
        return ratio_all, ratio_kept

    @property
    def participants(self) -> list[str]:
        return sorted(self.per_participant)


def duration_report(
    records: Sequence[AnnotationRecord],
    min_s: float = 3.0,
    ratio_classes: tuple[str, str] = ("tap water", "water"),
) -> DurationReport:
    """Tabulate raw label durations per participant/class plus derived ratios.

    Durations sum individual records as annotated, without merging overlaps;
    the cutoff keeps records with duration >= ``min_s``.
    """
    per: dict[str, dict[str, list[float]]] = {}
    for r in records:
        per.setdefault(r.participant_id, {}).setdefault(r.class_label, []).append(
            r.duration_s
        )

    def build(durations: list[float]) -> ClassStats:
        kept = [d for d in durations if d >= min_s]
        return ClassStats(
            total_s=sum(durations),
            total_s_kept=sum(kept),
            count=len(durations),
            count_kept=len(kept),
        )

    per_participant = {
        pid: {cls: build(durs) for cls, durs in classes.items()}
        for pid, classes in per.items()
    }
    all_classes = sorted({cls for classes in per.values() for cls in classes})
    aggregate = {
        cls: build(
            [
                d
                for classes in per.values()
                for c, durs in classes.items()
                if c == cls
                for d in durs
            ]
        )
        for cls in all_classes
    }
    return DurationReport(
        min_s=min_s,
        ratio_classes=ratio_classes,
        per_participant=per_participant,
        aggregate=aggregate,
    )


# ---------------------------------------------------------------------------
# cross-class agreement (IoU / coverage)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgreementRow:
    iou: float
    coverage: float | None


@dataclass(frozen=True)
class AgreementReport:
    """IoU and coverage of class_a against class_b, per participant and pooled.

    Pooling sums intersections, unions, and durations across recordings
    before dividing, so aggregates are duration-weighted.
    """

    class_a: str
    class_b: str
    per_participant: dict[str, AgreementRow]
    aggregate: AgreementRow

    @property
    def participants(self) -> list[str]:
        return sorted(self.per_participant)


def agreement_report(
    records: Sequence[AnnotationRecord],
    class_a: str = "tap water",
    class_b: str = "water",
) -> AgreementReport:
    """Compare two classes' merged interval sets over every recording."""
    scopes: dict[tuple[str, str], dict[str, list[AnnotationRecord]]] = {}
    for r in records:
        if r.class_label in (class_a, class_b):
            key = (r.participant_id, r.recording_id)
            scopes.setdefault(key, {}).setdefault(r.class_label, []).append(r)

    by_participant: dict[str, list[tuple[IntervalSet, IntervalSet]]] = {}
    for (pid, _rid), classes in scopes.items():
        set_a = IntervalSet.from_pairs(
            (r.start_s, r.end_s) for r in classes.get(class_a, [])
        )
        set_b = IntervalSet.from_pairs(
            (r.start_s, r.end_s) for r in classes.get(class_b, [])
        )
        by_participant.setdefault(pid, []).append((set_a, set_b))

    per_participant = {
        pid: AgreementRow(iou=pooled_iou(pairs), coverage=pooled_coverage(pairs))
        for pid, pairs in by_participant.items()
    }
    all_pairs = [pair for pairs in by_participant.values() for pair in pairs]
    aggregate = AgreementRow(iou=pooled_iou(all_pairs), coverage=pooled_coverage(all_pairs))
    return AgreementReport(
        class_a=class_a,
        class_b=class_b,
        per_participant=per_participant,
        aggregate=aggregate,
    )


# ---------------------------------------------------------------------------
# validation findings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OverlapFinding:
    participant_id: str
    recording_id: str
    class_label: str
    first: tuple[float, float]
    second: tuple[float, float]
    kind: str  # "overlap" | "containment"


@dataclass
class ValidationReport:
    """Labeling inconsistencies: overlaps, containments, short fragments."""

    overlaps: list[OverlapFinding] = field(default_factory=list)
    containments: list[OverlapFinding] = field(default_factory=list)
    short_fragments: list[AnnotationRecord] = field(default_factory=list)
    class_counts: dict[str, int] = field(default_factory=dict)
    min_s: float = 3.0

    @property
    def n_findings(self) -> int:
        return len(self.overlaps) + len(self.containments) + len(self.short_fragments)

    def to_json_dict(self) -> dict:
        def span(finding: OverlapFinding) -> dict:
            return {
                "participant_id": finding.participant_id,
                "recording_id": finding.recording_id,
                "class_label": finding.class_label,
                "first": list(finding.first),
                "second": list(finding.second),
            }

        return {
            "min_s": self.min_s,
            "class_counts": dict(sorted(self.class_counts.items())),
            "n_overlaps": len(self.overlaps),
            "n_containments": len(self.containments),
            "n_short_fragments": len(self.short_fragments),
            "overlaps": [span(f) for f in self.overlaps],
            "containments": [span(f) for f in self.containments],
            "short_fragments": [
                {
                    "participant_id": r.participant_id,
                    "recording_id": r.recording_id,
                    "class_label": r.class_label,
                    "start_s": r.start_s,
                    "end_s": r.end_s,
                }
                for r in self.short_fragments
            ],
        }


def validate_annotations(
    records: Sequence[AnnotationRecord], min_s: float = 3.0
) -> ValidationReport:
    """Find same-class overlapping/contained labels and sub-cutoff fragments."""
    report = ValidationReport(min_s=min_s)
    groups: dict[tuple[str, str, str], list[AnnotationRecord]] = {}
    for r in records:
        report.class_counts[r.class_label] = report.class_counts.get(r.class_label, 0) + 1
        if r.duration_s < min_s:
            report.short_fragments.append(r)
        groups.setdefault((r.participant_id, r.recording_id, r.class_label), []).append(r)

    for (pid, rid, cls), group in sorted(groups.items()):
        ordered = sorted(group, key=lambda r: (r.start_s, r.end_s))
        active: list[AnnotationRecord] = []
        for r in ordered:
            active = [a for a in active if a.end_s > r.start_s]
            for a in active:
                contained = (a.start_s <= r.start_s and r.end_s <= a.end_s) or (
                    r.start_s <= a.start_s and a.end_s <= r.end_s
                )
                finding = OverlapFinding(
                    participant_id=pid,
                    recording_id=rid,
                    class_label=cls,
                    first=(a.start_s, a.end_s),
                    second=(r.start_s, r.end_s),
                    kind="containment" if contained else "overlap",
                )
                if contained:
                    report.containments.append(finding)
                else:
                    report.overlaps.append(finding)
            active.append(r)
    return report


__all__ = [
    "AnnotationRecord",
    "AgreementReport",
    "AgreementRow",
    "ClassStats",
    "CSV_HEADER",
    "DurationReport",
    "IntervalSet",
    "OverlapFinding",
    "ValidationReport",
    "agreement_report",
    "coverage",
    "duration_report",
    "filter_min_duration",
    "format_annotations_csv",
    "iou",
    "merge_to_interval_set",
    "parse_annotations",
    "validate_annotations",
]
