"""Interval annotation metrics: durations, IoU, coverage, validation.

Builds a tiny hand-written annotation set for two participants, then walks
through the statistics the toolkit computes over it: per-class duration
tables with a 3 s cutoff, duration-weighted IoU/coverage agreement between
a fine class and its coarse superclass, and labeling-consistency findings.

Run:  python demos/01_annotation_metrics.py
"""

from tapdetect.annotations import (
    AnnotationRecord,
    agreement_report,
    duration_report,
    filter_min_duration,
    merge_to_interval_set,
    validate_annotations,
)
from tapdetect.intervals import IntervalSet, coverage, iou

records = [
    # P01: one long tap inside a slightly wider "water" span, plus a
    # water-only splash and a fragment too short to matter
    AnnotationRecord("P01", "kitchen_a", "water", 10.0, 26.5),
    AnnotationRecord("P01", "kitchen_a", "tap water", 11.0, 25.0),
    AnnotationRecord("P01", "kitchen_a", "water", 40.0, 43.5),
    AnnotationRecord("P01", "kitchen_a", "water", 50.0, 51.2),
    # P02: two taps; the second water label overlaps the first (an
    # annotation inconsistency) and one tap leaks past its water span
    AnnotationRecord("P02", "kitchen_b", "water", 5.0, 14.0),
    AnnotationRecord("P02", "kitchen_b", "water", 12.0, 20.0),
    AnnotationRecord("P02", "kitchen_b", "tap water", 6.0, 13.0),
    AnnotationRecord("P02", "kitchen_b", "tap water", 30.0, 36.0),
    AnnotationRecord("P02", "kitchen_b", "water", 30.5, 36.0),
]

print("=== duration table (cutoff 3 s) ===")
report = duration_report(records, min_s=3.0)
for pid in report.participants + [None]:
    label = pid or "Agg."
    tap = report.stats(pid, "tap water")
    water = report.stats(pid, "water")
    ratio_all, ratio_kept = report.ratio(pid)
    print(
        f"{label:>5}  tap {tap.total_s:6.1f}s ({tap.count} labels)   "
        f"water {water.total_s:6.1f}s ({water.count} labels)   "
        f"tap/water {ratio_all:.2f} (all) {ratio_kept:.2f} (>=3s)"
    )

kept = filter_min_duration(records, 3.0)
print(f"\n{len(records) - len(kept)} label(s) below the 3 s cutoff dropped")

print("\n=== merged interval sets for P02 ===")
scope = ("P02", "kitchen_b")
tap = merge_to_interval_set(records, "tap water", scope)
water = merge_to_interval_set(records, "water", scope)
print("tap   ->", tap.intervals)
print("water ->", water.intervals, "(the two overlapping labels coalesced)")
print(f"iou(tap, water)      = {iou(tap, water):.3f}")
print(f"coverage(tap, water) = {coverage(tap, water):.3f}  (fraction of tap inside water)")

print("\n=== corpus-level agreement, duration-weighted pooling ===")
agreement = agreement_report(records, "tap water", "water")
for pid in agreement.participants:
    row = agreement.per_participant[pid]
    print(f"{pid}: iou={row.iou:.3f} coverage={row.coverage:.3f}")
agg = agreement.aggregate
print(f"All: iou={agg.iou:.3f} coverage={agg.coverage:.3f}")
print("(aggregates sum intersections/unions across recordings before dividing;")
print(" they are not means of the per-participant ratios)")

print("\n=== validation findings ===")
findings = validate_annotations(records, min_s=3.0)
print(f"overlapping same-class labels: {len(findings.overlaps)}")
for f in findings.overlaps:
    print(f"  {f.participant_id}/{f.recording_id} {f.class_label}: {f.first} vs {f.second}")
print(f"contained labels:              {len(findings.containments)}")
print(f"fragments shorter than 3 s:    {len(findings.short_fragments)}")

print("\n=== edge conventions ===")
empty = IntervalSet.from_pairs([])
print(f"iou(empty, empty)      = {iou(empty, empty)}  (two empty sets agree)")
print(f"coverage(empty, water) = {coverage(empty, water)}  (undefined, not 0 or 1)")
touch = IntervalSet.from_pairs([(0, 2), (2, 4)])
print(f"touching [0,2)+[2,4)   -> {touch.intervals}  (half-open spans merge)")
