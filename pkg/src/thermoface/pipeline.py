"""End-to-end batch runs: manifest in, aligned features, LOSO report out.

Stage order: sequences are aligned onto their first frame (when a
subject/emotion group has more than one frame), regions or landmark
windows are extracted from the aligned frames, signatures or LPQ feature
vectors are built per record, and a leave-one-subject-out evaluation
produces the accuracy, per-class precision/recall and the confusion
matrix. Per-record failures are recorded and skipped unless more than
half the records fail.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dne, klt
from .covmatch import ConfusionMatrix, CovarianceSignature, FpsConfig, loso_evaluate, signature_from_frame
from .errors import (
    ManifestInvalid,
    ThermofaceError,
    TooFewSubjects,
    TooManyRecordFailures,
)
from .imaging import (
    EMOTIONS,
    LandmarkSet,
    SubjectRecord,
    ThermalFrame,
    load_frame,
    load_landmarks,
    load_manifest,
)
from .lpq import LpqConfig, lpq_histogram
from .roi import RoiSpec, builtin_specs, extract_patch

FEATURE_MODES = ("covariance", "lpq-dne")


@dataclass(frozen=True)
class DneSettings:
    k: int = 3
    d: int | None = None


@dataclass(frozen=True)
class PipelineConfig:
    tracker: klt.TrackerConfig = klt.TrackerConfig()
    fps: FpsConfig = FpsConfig()
    roi: tuple = tuple(s.name for s in builtin_specs())
    dne: DneSettings = DneSettings()
    lpq: LpqConfig = LpqConfig()
    seed: int = 0
    output_dir: str = "."
    features: str = "covariance"
    threads: int = 1

    def __post_init__(self):
        if self.features not in FEATURE_MODES:
            raise ValueError(f"features must be one of {FEATURE_MODES}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    def roi_specs(self) -> list[RoiSpec]:
        by_name = {s.name: s for s in builtin_specs()}
        specs = []
        for entry in self.roi:
            if isinstance(entry, RoiSpec):
                specs.append(entry)
            elif entry in by_name:
                specs.append(by_name[entry])
            else:
                raise ValueError(f"unknown region {entry!r}")
        return specs


_CONFIG_KEYS = {
    "tracker": klt.TrackerConfig,
    "fps": FpsConfig,
    "dne": DneSettings,
    "lpq": LpqConfig,
}


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build a PipelineConfig from parsed JSON; unknown keys are an error."""
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    known = set(_CONFIG_KEYS) | {"roi", "seed", "output_dir", "features", "threads"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, cls in _CONFIG_KEYS.items():
        if key in raw:
            sub = raw[key]
            if not isinstance(sub, dict):
                raise ValueError(f"config key {key!r} must be an object")
            fields = {f for f in cls.__dataclass_fields__}
            bad = set(sub) - fields
            if bad:
                raise ValueError(f"unknown {key} config keys: {sorted(bad)}")
            kwargs[key] = cls(**sub)
    for key in ("seed", "output_dir", "features", "threads"):
        if key in raw:
            kwargs[key] = raw[key]
    if "roi" in raw:
        entries = raw["roi"]
        if not isinstance(entries, list):
            raise ValueError("config key 'roi' must be an array")
        parsed = []
        for e in entries:
            if isinstance(e, str):
                parsed.append(e)
            elif isinstance(e, dict):
                bad = set(e) - {"name", "vertex_path", "target_size"}
                if bad:
                    raise ValueError(f"unknown roi spec keys: {sorted(bad)}")
                parsed.append(
                    RoiSpec(
                        e["name"],
                        tuple(e["vertex_path"]),
                        tuple(e.get("target_size", (32, 32))),
                    )
                )
            else:
                raise ValueError(f"bad roi entry: {e!r}")
        kwargs["roi"] = tuple(parsed)
    return PipelineConfig(**kwargs)


def config_to_dict(config: PipelineConfig) -> dict:
    out = {
        "tracker": {k: getattr(config.tracker, k) for k in klt.TrackerConfig.__dataclass_fields__},
        "fps": {k: getattr(config.fps, k) for k in FpsConfig.__dataclass_fields__},
        "dne": {"k": config.dne.k, "d": config.dne.d},
        "lpq": {"window": config.lpq.window},
        "roi": [
            e if isinstance(e, str) else {
                "name": e.name, "vertex_path": list(e.vertex_path),
                "target_size": list(e.target_size),
            }
            for e in config.roi
        ],
        "seed": config.seed,
        "output_dir": str(config.output_dir),
        "features": config.features,
        "threads": config.threads,
    }
    return out


@dataclass(frozen=True)
class RunReport:
    accuracy: float
    per_class: dict
    confusion: ConfusionMatrix
    timing_ms: dict
    config_echo: dict
    n_records: int
    failures: tuple = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "confusion": {
                "labels": [str(l.value) for l in self.confusion.labels],
                "mode": self.confusion.mode,
                "values": self.confusion.values.tolist(),
            },
            "timing": self.timing_ms,
            "config_echo": self.config_echo,
            "n_records": self.n_records,
            "failures": list(self.failures),
        }


def per_class_stats(confusion: ConfusionMatrix) -> dict:
    """Precision/recall per label from a count-mode confusion (rows true,
    columns predicted); absent classes report 0."""
    v = confusion.values
    out = {}
    for i, label in enumerate(confusion.labels):
        row = v[i].sum()
        col = v[:, i].sum()
        out[str(label.value)] = {
            "precision": float(v[i, i] / col) if col > 0 else 0.0,
            "recall": float(v[i, i] / row) if row > 0 else 0.0,
        }
    return out


@dataclass(frozen=True)
class _Loaded:
    record: SubjectRecord
    frame: ThermalFrame
    landmarks: LandmarkSet


def _align_group(items: list[_Loaded], tracker: klt.TrackerConfig) -> list[_Loaded]:
    """Align a same-subject same-emotion sequence onto its first frame."""
    if len(items) < 2:
        return items
    frames = [it.frame for it in items]
    seeds = klt.detect_features(frames[0], None, tracker, max_count=40)
    tracked = klt.track_sequence(frames, seeds, tracker)
    ref_positions = np.array([pt.position for pt in tracked[0]])
    aligned = [items[0]]
    for t in range(1, len(items)):
        ok = [
            i
            for i, pt in enumerate(tracked[t])
            if pt.status == klt.TRACKED and tracked[0][i].status == klt.TRACKED
        ]
        transform = klt.align_to_reference(
            ref_positions[ok], np.array([tracked[t][i].position for i in ok])
        )
        warped = klt.warp_frame(items[t].frame, transform)
        moved = LandmarkSet(transform.apply(items[t].landmarks.points))
        aligned.append(replace(items[t], frame=warped, landmarks=moved))
    return aligned


def _lpq_features(item: _Loaded, specs: list[RoiSpec], lpq_cfg: LpqConfig) -> np.ndarray:
    parts = [
        lpq_histogram(extract_patch(item.frame, spec, item.landmarks).patch, lpq_cfg)
        for spec in specs
    ]
    return np.concatenate(parts)


def _loso_dne(
    features: np.ndarray, labels: list, subjects: list[str], settings: DneSettings
) -> tuple[float, ConfusionMatrix]:
    unique_subjects = sorted(set(subjects))
    if len(unique_subjects) < 2:
        raise TooFewSubjects(f"{len(unique_subjects)} subject(s); need >= 2")
    index = {lab.value: i for i, lab in enumerate(EMOTIONS)}
    counts = np.zeros((len(EMOTIONS), len(EMOTIONS)))
    subjects_arr = np.array(subjects)
    labels_arr = np.array([l.value for l in labels])
    correct = 0
    for subject in unique_subjects:
        hold = subjects_arr == subject
        train = dne.LabeledDataset(features[:, ~hold], labels_arr[~hold])
        model = dne.dne_fit(train, k=settings.k, d=settings.d)
        train_emb = dne.embed(model, train.X)
        query_emb = dne.embed(model, features[:, hold])
        predicted = dne.nn_classify(train_emb, labels_arr[~hold], query_emb)
        for true_lab, pred_lab in zip(labels_arr[hold], np.atleast_1d(predicted)):
            counts[index[true_lab], index[pred_lab]] += 1
            correct += pred_lab == true_lab
    confusion = ConfusionMatrix(labels=EMOTIONS, values=counts, mode="count")
    return correct / len(labels), confusion


def run_pipeline(config: PipelineConfig, manifest_path) -> RunReport:
    """Execute the batch pipeline over a manifest and return the report."""
    timing: dict[str, float] = {}
    t0 = time.perf_counter()
    records = load_manifest(manifest_path)
    if not records:
        raise ManifestInvalid("empty manifest")

    failures: list[str] = []
    loaded: list[_Loaded] = []
    for rec in records:
        try:
            frame = load_frame(rec.frame_path)
            marks = load_landmarks(rec.landmarks_path, frame)
            loaded.append(_Loaded(rec, frame, marks))
        except ThermofaceError as exc:
            failures.append(f"{rec.frame_path.name}: {type(exc).__name__}: {exc}")
    _check_failures(failures, len(records))
    timing["load"] = _ms_since(t0)

    t0 = time.perf_counter()
    groups: dict[tuple[str, str], list[_Loaded]] = {}
    for item in loaded:
        groups.setdefault((item.record.subject_id, item.record.emotion.value), []).append(item)
    aligned: list[_Loaded] = []
    for key, items in groups.items():
        try:
            aligned.extend(_align_group(items, config.tracker))
        except ThermofaceError as exc:
            failures.extend(
                f"{it.record.frame_path.name}: {type(exc).__name__}: {exc}" for it in items
            )
    _check_failures(failures, len(records))
    timing["track_align"] = _ms_since(t0)

    t0 = time.perf_counter()
    if config.features == "covariance":
        def build(item: _Loaded) -> CovarianceSignature:
            return signature_from_frame(
                item.frame, item.landmarks, item.record.emotion,
                item.record.subject_id, config.fps,
            )

        signatures = []
        results = _map_records(build, aligned, config.threads)
        for item, result in zip(aligned, results):
            if isinstance(result, Exception):
                failures.append(
                    f"{item.record.frame_path.name}: {type(result).__name__}: {result}"
                )
            else:
                signatures.append(result)
        _check_failures(failures, len(records))
        timing["signatures"] = _ms_since(t0)

        t0 = time.perf_counter()
        accuracy, confusion = loso_evaluate(signatures, config.fps)
        n_used = len(signatures)
    else:
        specs = config.roi_specs()

        def build(item: _Loaded) -> np.ndarray:
            return _lpq_features(item, specs, config.lpq)

        feats, labels, subjects = [], [], []
        results = _map_records(build, aligned, config.threads)
        for item, result in zip(aligned, results):
            if isinstance(result, Exception):
                failures.append(
                    f"{item.record.frame_path.name}: {type(result).__name__}: {result}"
                )
            else:
                feats.append(result)
                labels.append(item.record.emotion)
                subjects.append(item.record.subject_id)
        _check_failures(failures, len(records))
        timing["features"] = _ms_since(t0)

        t0 = time.perf_counter()
        accuracy, confusion = _loso_dne(
            np.column_stack(feats), labels, subjects, config.dne
        )
        n_used = len(labels)
    timing["evaluate"] = _ms_since(t0)

    return RunReport(
        accuracy=float(accuracy),
        per_class=per_class_stats(confusion),
        confusion=confusion,
        timing_ms=timing,
        config_echo=config_to_dict(config),
        n_records=n_used,
        failures=tuple(failures),
    )


def _ms_since(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


def _check_failures(failures: list[str], total: int) -> None:
    if len(failures) > 0.5 * total:
        raise TooManyRecordFailures(
            f"{len(failures)}/{total} records failed: " + "; ".join(failures[:5])
        )


def _map_records(fn, items, threads: int):
    def safe(item):
        try:
            return fn(item)
        except Exception as exc:  # propagated as data, merged in order
            return exc

    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(safe, items))
    return [safe(item) for item in items]


def write_report(report: RunReport, out_dir) -> Path:
    """Write report.json (stable key order) and confusion.csv; returns the
    JSON path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    lines = ["label," + ",".join(str(l.value) for l in report.confusion.labels)]
    for i, label in enumerate(report.confusion.labels):
        row = ",".join(repr(float(x)) for x in report.confusion.values[i])
        lines.append(f"{label.value},{row}")
    (out / "confusion.csv").write_text("\n".join(lines) + "\n")
    return path
