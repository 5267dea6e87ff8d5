"""Command-line frontend.

Commands: stats, validate, featurize, train, evaluate, stream,
export-spectrogram. Global flags (--config, --seed, --target-class, --out)
may appear after the command name. Exit codes: 0 ok, 2 missing input,
3 schema/config error, 4 training or split error, 5 model/shape mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import annotations as anno
from .config import RunConfig, apply_overrides, load_config
from .dataset import (
    WindowSample,
    canonical_order,
    prevalence,
    split_lopo,
    split_task_a,
    window_and_label,
)
from .dsp import (
    DspConfig,
    FeatureVector,
    LogMelSpectrogram,
    log_mel,
    mel_filterbank,
)
from .errors import ConfigError, InferenceError, MissingInputError, TapDetectError
from .evaluation import evaluate_split
from .fileformats import (
    ModelEnvelope,
    SECTION_CNN,
    SECTION_FOREST,
    read_feature_file,
    read_model,
    read_spectrogram_file,
    write_feature_file,
    write_model,
    write_pgm,
    write_spectrogram_file,
)
from .forest import forest_from_bytes, forest_to_bytes, predict_scores, train_forest
from .neural import (
    CnnConfig,
    cnn_from_bytes,
    cnn_to_bytes,
    predict_cnn_scores,
    train_cnn,
)
from .seeding import sub_seed_int
from .streaming import StreamEvent, run_stream
from .wav import AudioBuffer, load_wav, resample_to

MANIFEST_NAME = "manifest.json"


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_annotations(config: RunConfig) -> list[anno.AnnotationRecord]:
    if config.annotations is None:
        raise MissingInputError("no annotations file configured (set annotations=...)")
    path = Path(config.annotations)
    if not path.exists():
        raise MissingInputError(f"annotations file not found: {path}")
    fmt = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"
    return anno.parse_annotations(path.read_text(encoding="utf-8"), format=fmt)


def _fmt(value, width=9, digits=3):
    if value is None:
        return "-".rjust(width)
    return f"{value:.{digits}f}".rjust(width)


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------


def cmd_stats(config: RunConfig, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    records = _read_annotations(config)
    report = anno.duration_report(
        records, min_s=3.0, ratio_classes=(config.target_class, config.reference_class)
    )
    agreement = anno.agreement_report(records, config.target_class, config.reference_class)

    target, reference = config.target_class, config.reference_class
    print(f"durations (s) for {target!r} vs {reference!r}, cutoff {report.min_s:g} s", file=stdout)
    header = (
        f"{'participant':>12} {'tap_total':>10} {'ref_total':>10} {'tap>=3s':>10} "
        f"{'ref>=3s':>10} {'kept_ref':>9} {'kept_tap':>9} {'ratio':>9} {'ratio>=3s':>9}"
    )
    print(header, file=stdout)
    rows = [(pid, report) for pid in report.participants] + [(None, report)]
    for pid, rep in rows:
        t = rep.stats(pid, target)
        r = rep.stats(pid, reference)
        ratio_all, ratio_kept = rep.ratio(pid)
        label = pid if pid is not None else "Agg."
        print(
            f"{label:>12} {t.total_s:>10.2f} {r.total_s:>10.2f} {t.total_s_kept:>10.2f} "
            f"{r.total_s_kept:>10.2f} {_fmt(r.kept_fraction)} {_fmt(t.kept_fraction)} "
            f"{_fmt(ratio_all)} {_fmt(ratio_kept)}",
            file=stdout,
        )

    print(f"\nagreement of {target!r} against {reference!r}", file=stdout)
    print(f"{'participant':>12} {'iou':>9} {'coverage':>9}", file=stdout)
    for pid in agreement.participants:
        row = agreement.per_participant[pid]
        print(f"{pid:>12} {_fmt(row.iou)} {_fmt(row.coverage)}", file=stdout)
    print(
        f"{'All':>12} {_fmt(agreement.aggregate.iou)} {_fmt(agreement.aggregate.coverage)}",
        file=stdout,
    )

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "durations.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["participant_id", "class_label", "total_s", "total_s_kept", "count", "count_kept"]
        )
        for pid in report.participants + [None]:
            table = report.per_participant[pid] if pid else report.aggregate
            for cls in sorted(table):
                s = table[cls]
                writer.writerow(
                    [pid or "Agg.", cls, s.total_s, s.total_s_kept, s.count, s.count_kept]
                )
    with (out_dir / "agreement.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["participant_id", "iou", "coverage"])
        for pid in agreement.participants:
            row = agreement.per_participant[pid]
            writer.writerow([pid, row.iou, row.coverage])
        writer.writerow(["All", agreement.aggregate.iou, agreement.aggregate.coverage])
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(config: RunConfig, out_file: Path | None = None, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    records = _read_annotations(config)
    report = anno.validate_annotations(records, min_s=3.0)
    payload = report.to_json_dict()
    if out_file is not None:
        _write_json(Path(out_file), payload)
    else:
        print(json.dumps(payload, sort_keys=True, indent=2), file=stdout)
    print(
        f"{report.n_findings} findings: {len(report.overlaps)} overlaps, "
        f"{len(report.containments)} containments, "
        f"{len(report.short_fragments)} fragments shorter than {report.min_s:g} s",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------


def _recording_stem(participant_id: str, recording_id: str) -> str:
    return f"{participant_id}_{recording_id}"


def cmd_featurize(
    config: RunConfig, workers: int = 1, audio_manifest: Path | None = None
) -> Path:
    """Extract windows for every recording named in the annotations.

    WAV files are discovered at <audio_root>/<participant>/<recording>.wav;
    an optional audio manifest (JSON mapping "participant/recording" to a
    WAV path) overrides that layout.
    """
    if config.audio_root is None and audio_manifest is None:
        raise MissingInputError("no audio root configured (set audio_root=...)")
    overrides: dict[str, str] = {}
    if audio_manifest is not None:
        manifest_file = Path(audio_manifest)
        if not manifest_file.exists():
            raise MissingInputError(f"audio manifest not found: {manifest_file}")
        overrides = json.loads(manifest_file.read_text(encoding="utf-8"))
    audio_root = Path(config.audio_root) if config.audio_root else None
    if audio_root is not None and not audio_root.exists():
        raise MissingInputError(f"audio root not found: {audio_root}")
    records = _read_annotations(config)
    scopes = sorted({(r.participant_id, r.recording_id) for r in records})
    if not scopes:
        raise MissingInputError("annotation file names no recordings")

    out_dir = Path(config.out_dir) / "features"
    out_dir.mkdir(parents=True, exist_ok=True)
    filterbank = mel_filterbank(
        config.dsp.sample_rate_hz,
        config.dsp.n_fft,
        config.dsp.n_mels,
        config.dsp.fmin_hz,
        config.dsp.fmax_hz,
    )

    def featurize_one(scope):
        pid, rid = scope
        if f"{pid}/{rid}" in overrides:
            wav_path = Path(overrides[f"{pid}/{rid}"])
        elif audio_root is not None:
            wav_path = audio_root / pid / f"{rid}.wav"
        else:
            return scope, None
        if not wav_path.exists():
            return scope, None
        buffer = resample_to(load_wav(wav_path), config.dsp.sample_rate_hz)
        positive = anno.merge_to_interval_set(records, config.target_class, scope)
        samples = window_and_label(
            buffer,
            positive,
            pid,
            rid,
            config.dsp,
            overlap_threshold=config.overlap_threshold,
            filterbank=filterbank,
        )
        return scope, samples

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(featurize_one, scopes))
    else:
        results = [featurize_one(scope) for scope in scopes]

    manifest_recordings = []
    n_windows = 0
    n_positive = 0
    skipped = []
    for (pid, rid), samples in results:
        if samples is None:
            skipped.append(f"{pid}/{rid}")
            print(f"warning: missing WAV for {pid}/{rid}, skipped", file=sys.stderr)
            continue
        stem = _recording_stem(pid, rid)
        vectors = np.stack([s.feature_vector.values for s in samples])
        write_feature_file(out_dir / f"{stem}.tapf", vectors, "v1")
        tensors = np.stack([s.logmel.values for s in samples])
        write_spectrogram_file(out_dir / f"{stem}.taps", tensors)
        manifest_recordings.append(
            {
                "participant_id": pid,
                "recording_id": rid,
                "feature_file": f"{stem}.tapf",
                "spectrogram_file": f"{stem}.taps",
                "n_windows": len(samples),
                "windows": [
                    {
                        "index": s.window_index,
                        "start_s": s.window_start_s,
                        "label": s.label,
                        "padded": s.padded,
                    }
                    for s in samples
                ],
            }
        )
        n_windows += len(samples)
        n_positive += sum(s.label for s in samples)

    if not manifest_recordings:
        raise MissingInputError(f"no WAV decoded for any of {len(scopes)} recordings")

    _write_feature_csv(out_dir / "features.csv", results)

    manifest = {
        "dsp": config.dsp.to_json_dict(),
        "target_class": config.target_class,
        "overlap_threshold": config.overlap_threshold,
        "layout_version": "v1",
        "recordings": manifest_recordings,
        "n_windows": n_windows,
        "n_positive": n_positive,
        "prevalence": n_positive / n_windows if n_windows else 0.0,
        "skipped": skipped,
    }
    manifest_path = out_dir / MANIFEST_NAME
    _write_json(manifest_path, manifest)
    return manifest_path


def _write_feature_csv(path: Path, results) -> None:
    """One window per row: identity columns, label, then the v1 features."""
    from .dsp import FEATURE_NAMES_V1

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["participant_id", "recording_id", "window_index", "window_start_s", "label"]
            + list(FEATURE_NAMES_V1)
        )
        for (_pid, _rid), samples in results:
            if samples is None:
                continue
            for s in samples:
                writer.writerow(
                    [
                        s.participant_id,
                        s.recording_id,
                        s.window_index,
                        s.window_start_s,
                        int(s.label),
                    ]
                    + [repr(v) for v in s.feature_vector.values.tolist()]
                )


def load_featurized(features_dir: str | Path) -> tuple[list[WindowSample], dict]:
    """Rebuild window samples from a featurize output directory."""
    features_dir = Path(features_dir)
    manifest_path = features_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingInputError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    dsp = DspConfig.from_json_dict(manifest["dsp"])
    hop_s = dsp.hop / dsp.sample_rate_hz
    samples: list[WindowSample] = []
    for rec in manifest["recordings"]:
        vectors, layout = read_feature_file(features_dir / rec["feature_file"])
        tensors = read_spectrogram_file(features_dir / rec["spectrogram_file"])
        if len(vectors) != rec["n_windows"] or len(tensors) != rec["n_windows"]:
            raise MissingInputError(
                f"feature files for {rec['participant_id']}/{rec['recording_id']} "
                "do not match the manifest"
            )
        for meta, vec, tensor in zip(rec["windows"], vectors, tensors):
            samples.append(
                WindowSample(
                    participant_id=rec["participant_id"],
                    recording_id=rec["recording_id"],
                    window_index=meta["index"],
                    window_start_s=meta["start_s"],
                    label=meta["label"],
                    padded=meta.get("padded", False),
                    feature_vector=FeatureVector(
                        values=vec.astype(np.float64), layout_version=layout
                    ),
                    logmel=LogMelSpectrogram(
                        values=tensor.astype(np.float64),
                        frame_hop_s=hop_s,
                        window_origin_s=meta["start_s"],
                    ),
                )
            )
    return canonical_order(samples), manifest


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def cmd_train(
    config: RunConfig, model_kind: str, features_dir: Path, model_out: Path
) -> Path:
    samples, manifest = load_featurized(features_dir)
    dsp = DspConfig.from_json_dict(manifest["dsp"])
    log: dict = {
        "model": model_kind,
        "n_samples": len(samples),
        "prevalence": prevalence(samples),
        "seed": config.seed,
    }
    if model_kind == "forest":
        timings: list[float] = []
        forest_config = replace(config.forest, seed=sub_seed_int(config.seed, "forest"))
        model = train_forest(samples, forest_config, per_tree_seconds=timings)
        payload = forest_to_bytes(model)
        section = SECTION_FOREST
        log["per_tree_seconds"] = timings
        log["mean_tree_seconds"] = float(np.mean(timings)) if timings else 0.0
    elif model_kind == "cnn":
        result = train_cnn(
            samples,
            config.cnn,
            epochs=config.epochs,
            batch_size=config.batch_size,
            seed=sub_seed_int(config.seed, "cnn"),
            learning_rate=config.learning_rate,
        )
        payload = cnn_to_bytes(result.model)
        section = SECTION_CNN
        log["loss_curve"] = result.loss_curve
        log["pos_weight"] = result.pos_weight
    else:
        raise ConfigError(f"unknown model kind {model_kind!r} (expected forest or cnn)")

    envelope = ModelEnvelope(
        section=section,
        dsp_config=dsp,
        layout_version=manifest.get("layout_version", "v1"),
        payload=payload,
    )
    model_out = Path(model_out)
    model_out.parent.mkdir(parents=True, exist_ok=True)
    write_model(model_out, envelope)
    _write_json(model_out.with_suffix(".log.json"), log)
    return model_out


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _fold_trainers(config: RunConfig, envelope: ModelEnvelope):
    """Per-fold train/predict functions reusing the envelope's model configs."""
    if envelope.section == SECTION_FOREST:
        base = forest_from_bytes(envelope.payload).config

        def train_fn(train):
            return train_forest(
                train, replace(base, seed=sub_seed_int(config.seed, "forest"))
            )

        def predict_fn(model, test):
            X = np.stack([s.feature_vector.values for s in test])
            return predict_scores(model, X) >= 0.5

    elif envelope.section == SECTION_CNN:
        base_cnn = cnn_from_bytes(envelope.payload).config

        def train_fn(train):
            return train_cnn(
                train,
                base_cnn,
                epochs=config.epochs,
                batch_size=config.batch_size,
                seed=sub_seed_int(config.seed, "cnn"),
                learning_rate=config.learning_rate,
            ).model

        def predict_fn(model, test):
            return predict_cnn_scores(model, [s.logmel for s in test]) >= 0.5

    else:
        raise InferenceError(f"unknown model section {envelope.section!r}")
    return train_fn, predict_fn


def cmd_evaluate(
    config: RunConfig, model_path: Path, task: str, features_dir: Path
) -> dict:
    """Retrains per fold with the envelope's configs and reports metrics.

    Stored weights are never scored against their own training windows;
    the envelope supplies the architecture/hyperparameters only.
    """
    if task not in ("a", "lopo"):
        raise ConfigError(f"unknown task {task!r} (expected 'a' or 'lopo')")
    envelope = read_model(Path(model_path))
    samples, _manifest = load_featurized(features_dir)
    if task == "a":
        plan = split_task_a(samples, config.train_fraction, sub_seed_int(config.seed, "split"))
    else:
        plan = split_lopo(samples)
    train_fn, predict_fn = _fold_trainers(config, envelope)
    result = evaluate_split(
        plan,
        samples,
        train_fn,
        predict_fn,
        baseline_seed=sub_seed_int(config.seed, "baseline"),
        baseline_trials=config.baseline_trials,
    )
    payload = result.to_json_dict()
    payload["task"] = task
    payload["model"] = envelope.section
    payload["target_class"] = config.target_class
    notes = [
        "baseline f1 is the seeded empirical mean of the uniform dummy; "
        "the closed form appears alongside it in each baseline block",
        "normality testing (e.g. Shapiro-Wilk) is out of scope; use the "
        "paired t and Wilcoxon helpers for significance",
    ]
    if task == "a":
        notes.append(
            "task A splits windows, not recordings: windows of one recording "
            "may appear on both sides of the split"
        )
    payload["notes"] = notes

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"eval_{task}_{envelope.section.lower()}"
    (out_dir / f"{stem}_split.json").write_text(plan.to_json() + "\n", encoding="utf-8")
    _write_json(out_dir / f"{stem}.json", payload)

    with (out_dir / f"{stem}.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "row",
                "f1",
                "accuracy",
                "precision",
                "recall",
                "baseline_f1",
                "ratio_to_baseline_pct",
            ]
        )
        for fold in result.folds:
            r = fold.report
            writer.writerow(
                [
                    fold.held_out or "test",
                    r.f1,
                    r.accuracy,
                    r.precision,
                    r.recall,
                    r.baseline_f1,
                    r.ratio_to_baseline_pct,
                ]
            )
        pooled = result.pooled
        writer.writerow(
            [
                "pooled",
                pooled.f1,
                pooled.accuracy,
                pooled.precision,
                pooled.recall,
                pooled.baseline_f1,
                pooled.ratio_to_baseline_pct,
            ]
        )
        writer.writerow(["mean_of_folds", result.mean_of_folds_f1, "", "", "", "", ""])
    return payload


# ---------------------------------------------------------------------------
# stream
# ---------------------------------------------------------------------------


def _chunk_reader_wav(path: Path, target_hz: int):
    buffer = resample_to(load_wav(path), target_hz)
    chunk = target_hz // 2
    for lo in range(0, len(buffer.samples), chunk):
        yield buffer.samples[lo : lo + chunk]


def _chunk_reader_stdin(stdin, chunk_bytes=65536):
    """Raw little-endian 16-bit PCM mono at the model's sample rate."""
    while True:
        raw = stdin.read(chunk_bytes)
        if not raw:
            return
        usable = len(raw) - len(raw) % 2
        yield np.frombuffer(raw[:usable], dtype="<i2").astype(np.float64) / 32768.0


def cmd_stream(
    config: RunConfig,
    model_path: Path,
    source: str,
    stdout=None,
    stdin=None,
) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    envelope = read_model(Path(model_path))
    if config.dsp != DspConfig() and config.dsp != envelope.dsp_config:
        raise InferenceError(
            "configured dsp parameters do not match the model envelope; "
            "re-featurize or drop the dsp overrides"
        )
    if source == "-":
        chunks = _chunk_reader_stdin(stdin or sys.stdin.buffer)
    else:
        path = Path(source)
        if not path.exists():
            raise MissingInputError(f"audio source not found: {path}")
        chunks = _chunk_reader_wav(path, envelope.dsp_config.sample_rate_hz)

    def emit(event: StreamEvent):
        print(json.dumps(event.to_json_dict(), sort_keys=True), file=stdout, flush=True)

    result = run_stream(envelope, chunks, smoothing_k=config.smoothing_k, on_event=emit)
    print(
        f"processed {result.audio_duration_s:.1f} s in {result.processing_s:.2f} s "
        f"(real-time factor {result.real_time_factor:.3f})",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# export-spectrogram
# ---------------------------------------------------------------------------


def cmd_export_spectrogram(
    config: RunConfig, wav_path: Path, per_window: bool = False
) -> list[Path]:
    wav_path = Path(wav_path)
    if not wav_path.exists():
        raise MissingInputError(f"WAV file not found: {wav_path}")
    buffer = resample_to(load_wav(wav_path), config.dsp.sample_rate_hz)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if per_window:
        w = config.dsp.window_samples
        n = max(1, -(-len(buffer.samples) // w))
        for i in range(n):
            chunk = buffer.samples[i * w : (i + 1) * w]
            if len(chunk) < w:
                chunk = np.concatenate([chunk, np.zeros(w - len(chunk))])
            lm = log_mel(
                AudioBuffer(samples=chunk, sample_rate_hz=buffer.sample_rate_hz),
                config.dsp,
            )
            path = out_dir / f"{wav_path.stem}_w{i:04d}.pgm"
            write_pgm(path, lm.values)
            written.append(path)
    else:
        lm = log_mel(buffer, config.dsp)
        path = out_dir / f"{wav_path.stem}.pgm"
        write_pgm(path, lm.values)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="root random seed override")
    common.add_argument("--target-class", default=None, help="positive class name")
    common.add_argument("--out", default=None, help="output directory override")

    parser = argparse.ArgumentParser(
        prog="tapdetect", description="tap-water audio event detection toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="annotation duration and agreement tables")
    p.add_argument("--annotations", default=None, help="annotation CSV/JSONL path")

    p = sub.add_parser("validate", parents=[common], help="report labeling inconsistencies")
    p.add_argument("--annotations", default=None)
    p.add_argument("--report", default=None, help="write findings JSON here instead of stdout")

    p = sub.add_parser("featurize", parents=[common], help="extract window features per recording")
    p.add_argument("--annotations", default=None)
    p.add_argument("--audio-root", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument(
        "--audio-manifest",
        default=None,
        help='JSON mapping "participant/recording" to a WAV path, overriding audio-root layout',
    )

    p = sub.add_parser("train", parents=[common], help="train a detector on featurized windows")
    p.add_argument("model", choices=["forest", "cnn"])
    p.add_argument("--features", required=True, help="featurize output directory")
    p.add_argument("--model-out", default=None, help="model file path (.tapm)")

    p = sub.add_parser("evaluate", parents=[common], help="evaluate with retraining per fold")
    p.add_argument("--model", required=True, help="model envelope (.tapm)")
    p.add_argument("--task", choices=["a", "lopo"], required=True)
    p.add_argument("--features", required=True)

    p = sub.add_parser("stream", parents=[common], help="streaming detection over windows")
    p.add_argument("--model", required=True)
    p.add_argument("source", help="WAV file path, or '-' for raw s16le PCM on stdin")
    p.add_argument("--smoothing-k", type=int, default=None)

    p = sub.add_parser(
        "export-spectrogram", parents=[common], help="write grayscale PGM spectrograms"
    )
    p.add_argument("wav", help="input WAV file")
    p.add_argument("--per-window", action="store_true")
    return parser


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    config = apply_overrides(
        config,
        seed=args.seed,
        target_class=getattr(args, "target_class", None),
        out_dir=args.out,
    )
    if getattr(args, "annotations", None):
        config = replace(config, annotations=Path(args.annotations))
    if getattr(args, "audio_root", None):
        config = replace(config, audio_root=Path(args.audio_root))
    if getattr(args, "smoothing_k", None):
        config = replace(config, smoothing_k=args.smoothing_k)
    return config


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = _resolve_config(args)
    if args.command == "stats":
        return cmd_stats(config)
    if args.command == "validate":
        return cmd_validate(config, Path(args.report) if args.report else None)
    if args.command == "featurize":
        cmd_featurize(
            config,
            workers=args.workers,
            audio_manifest=Path(args.audio_manifest) if args.audio_manifest else None,
        )
        return 0
    if args.command == "train":
        default_out = Path(config.out_dir) / f"model_{args.model}.tapm"
        cmd_train(
            config,
            args.model,
            Path(args.features),
            Path(args.model_out) if args.model_out else default_out,
        )
        return 0
    if args.command == "evaluate":
        cmd_evaluate(config, Path(args.model), args.task, Path(args.features))
        return 0
    if args.command == "stream":
        return cmd_stream(config, Path(args.model), args.source)
    if args.command == "export-spectrogram":
        cmd_export_spectrogram(config, Path(args.wav), per_window=args.per_window)
        return 0
    raise ConfigError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    try:
        return run(argv)
    except TapDetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        # downstream closed the pipe (e.g. | head); hand stdout to devnull so
        # interpreter shutdown does not complain about the final flush
        import os

        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
