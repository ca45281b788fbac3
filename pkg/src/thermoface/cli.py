"""Batch command-line front end.

Every subcommand exits 0 on success; failures print a machine-readable
JSON object {"error": {"type", "message"}} on stderr and exit 1.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import sys
from pathlib import Path

import numpy as np

from . import dne, klt
from .covmatch import FpsConfig, least_distance_label, match_probe, signature_from_frame
from .errors import ManifestInvalid, ThermofaceError
from .imaging import Emotion, load_frame, load_landmarks, load_manifest, save_frame
from .lpq import LpqConfig, lpq_histogram
from .pipeline import (
    PipelineConfig,
    config_from_dict,
    per_class_stats,
    run_pipeline,
    write_report,
)
from .roi import RoiSpec, builtin_specs, extract_patch
from .synth import synth_generate


def _load_config(args) -> PipelineConfig:
    raw = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
    config = config_from_dict(raw)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        config = config_from_dict({**raw, **overrides})
    return config


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- subcommand implementations ---

def _cmd_track_align(args, config: PipelineConfig) -> int:
    paths = sorted(glob.glob(args.frames))
    if not paths:
        raise ManifestInvalid(f"no frames match {args.frames!r}")
    frames = [load_frame(p) for p in paths]
    if not 0 <= args.ref < len(frames):
        raise ManifestInvalid(f"--ref {args.ref} outside 0..{len(frames) - 1}")
    roi = tuple(int(v) for v in args.bbox.split(",")) if args.bbox else None
    if roi is not None and len(roi) != 4:
        raise ManifestInvalid("--bbox wants x,y,w,h")

    tracker = config.tracker
    seeds = klt.detect_features(frames[args.ref], roi, tracker, args.max_features)

    # track from the reference outward in both directions
    forward = klt.track_sequence(frames[args.ref :], seeds, tracker) if len(frames) - args.ref >= 2 else [
        [klt.TrackPoint(s.id, s.center) for s in seeds]
    ]
    backward = (
        klt.track_sequence(frames[args.ref :: -1], seeds, tracker) if args.ref >= 1 else None
    )
    per_frame: dict[int, list[klt.TrackPoint]] = {}
    for offset, points in enumerate(forward):
        per_frame[args.ref + offset] = points
    if backward is not None:
        for offset, points in enumerate(backward):
            per_frame.setdefault(args.ref - offset, points)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ref_positions = np.array([pt.position for pt in per_frame[args.ref]])
    rows = []
    for idx, path in enumerate(paths):
        points = per_frame[idx]
        ok = [
            i
            for i, pt in enumerate(points)
            if pt.status == klt.TRACKED and per_frame[args.ref][i].status == klt.TRACKED
        ]
        if idx == args.ref:
            transform = klt.SimilarityTransform.identity()
        else:
            transform = klt.align_to_reference(
                ref_positions[ok], np.array([points[i].position for i in ok])
            )
        save_frame(klt.warp_frame(frames[idx], transform), out / f"aligned_{idx:04d}.pgm")
        for pt in points:
            x, y = pt.position
            rows.append((idx, pt.id, x, y, pt.status, pt.residual))

    with open(out / "tracks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "point_id", "x", "y", "status", "residual"])
        writer.writerows(rows)
    return 0


def _cmd_extract_roi(args, config: PipelineConfig) -> int:
    frame = load_frame(args.frame)
    landmarks = load_landmarks(args.landmarks, frame)
    specs = {s.name: s for s in builtin_specs()}
    if args.spec_file:
        for raw in json.loads(Path(args.spec_file).read_text()):
            spec = RoiSpec(raw["name"], tuple(raw["vertex_path"]),
                           tuple(raw.get("target_size", (32, 32))))
            specs[spec.name] = spec
    names = [n for n in args.regions.split(",") if n]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        if name not in specs:
            raise ManifestInvalid(f"unknown region {name!r}")
        patch = extract_patch(frame, specs[name], landmarks)
        clipped = np.clip(np.rint(patch.patch), 0, frame.maxval)
        save_frame(
            type(frame)(clipped.shape[1], clipped.shape[0], frame.bit_depth, clipped),
            out / f"{name}.pgm",
        )
        mask_lines = [f"P1\n{patch.mask.shape[1]} {patch.mask.shape[0]}"]
        mask_lines += [" ".join("1" if v else "0" for v in row) for row in patch.mask]
        (out / f"{name}.pbm").write_text("\n".join(mask_lines) + "\n")
    return 0


def _cmd_cov_match(args, config: PipelineConfig) -> int:
    fps = FpsConfig(window=args.window, measure=args.measure)
    records = load_manifest(args.manifest)
    gallery = []
    for rec in records:
        frame = load_frame(rec.frame_path)
        marks = load_landmarks(rec.landmarks_path, frame)
        gallery.append(signature_from_frame(frame, marks, rec.emotion, rec.subject_id, fps))

    if args.mode == "loso":
        from .covmatch import loso_evaluate

        accuracy, confusion = loso_evaluate(gallery, fps)
        payload = {
            "accuracy": accuracy,
            "per_class": per_class_stats(confusion),
            "confusion": {
                "labels": [l.value for l in confusion.labels],
                "values": confusion.values.tolist(),
            },
        }
    else:
        if not args.probe or len(args.probe) != 2:
            raise ManifestInvalid("--probe wants FRAME LANDMARKS")
        frame = load_frame(args.probe[0])
        marks = load_landmarks(args.probe[1], frame)
        probe = signature_from_frame(frame, marks, Emotion.HAPPINESS, "probe", fps)
        predicted, distances = match_probe(probe, gallery, fps)
        payload = {
            "predicted": predicted.value,
            "distances": [
                {"subject_id": g.subject_id, "emotion": g.label.value, "distance": d}
                for g, d in zip(gallery, distances.tolist())
            ],
        }
    _write_json(args.out, payload)
    if args.mode == "loso":
        _write_confusion_csv(Path(args.out).with_suffix(".confusion.csv"), payload["confusion"])
    return 0


def _write_confusion_csv(path, confusion: dict) -> None:
    lines = ["label," + ",".join(confusion["labels"])]
    for label, row in zip(confusion["labels"], confusion["values"]):
        lines.append(label + "," + ",".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    return np.array([[float(v) for v in row] for row in rows])


def _read_labels_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([r[0] for r in csv.reader(fh) if r])


def _cmd_dne_train(args, config: PipelineConfig) -> int:
    samples = _read_matrix_csv(args.features)  # rows are samples
    labels = _read_labels_csv(args.labels)
    dataset = dne.LabeledDataset(samples.T, labels)
    model = dne.dne_fit(dataset, k=args.k, d=args.d)
    _write_json(
        args.model_out,
        {
            "n": model.n_dims,
            "d": model.d,
            "k": model.k,
            "eigenvalues": model.eigenvalues.tolist(),
            "training_objective": model.training_objective,
            "n_nonnegative": model.n_nonnegative,
            "P_column_major": model.P.flatten(order="F").tolist(),
        },
    )
    return 0


def _load_model(path) -> dne.DneModel:
    raw = json.loads(Path(path).read_text())
    P = np.array(raw["P_column_major"]).reshape((raw["n"], raw["d"]), order="F")
    return dne.DneModel(
        P=P,
        eigenvalues=np.array(raw["eigenvalues"]),
        k=raw["k"],
        training_objective=raw["training_objective"],
        n_nonnegative=raw.get("n_nonnegative", 0),
    )


def _loo_nn_accuracy(X: np.ndarray, labels: np.ndarray) -> float:
    """Leave-one-out 1-NN accuracy over columns of X."""
    n = X.shape[1]
    sq = np.sum(X * X, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    np.fill_diagonal(d2, np.inf)
    nearest = np.argmin(d2, axis=1)
    return float(np.mean(labels[nearest] == labels))


def _cmd_dne_eval(args, config: PipelineConfig) -> int:
    samples = _read_matrix_csv(args.features)
    labels = _read_labels_csv(args.labels)
    X = samples.T
    model = _load_model(args.model)
    payload = {
        "raw_accuracy": _loo_nn_accuracy(X, labels),
        "dne_accuracy": _loo_nn_accuracy(dne.embed(model, X), labels),
        "d": model.d,
    }
    if args.baseline == "pca":
        P = dne.pca_fit(X, model.d)
        payload["pca_accuracy"] = _loo_nn_accuracy(P.T @ X, labels)
    _write_json(args.report, payload)
    return 0


def _cmd_lpq(args, config: PipelineConfig) -> int:
    frame = load_frame(args.patch)
    hist = lpq_histogram(frame.pixels, LpqConfig(window=args.window))
    Path(args.out).write_text("\n".join(repr(float(v)) for v in hist) + "\n")
    return 0


def _cmd_synth_gen(args, config: PipelineConfig) -> int:
    manifest = synth_generate(
        args.out_dir,
        seed=config.seed,
        n_subjects=args.subjects,
        frames_per_subject=args.frames_per_subject,
    )
    print(manifest)
    return 0


def _cmd_run(args, config: PipelineConfig) -> int:
    report = run_pipeline(config, args.manifest)
    path = write_report(report, args.out_dir)
    print(path)
    return 0


# --- parser wiring ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermoface",
        description="Thermal-face emotion recognition pipeline",
    )
    parser.add_argument("--config", help="pipeline config JSON (unknown keys rejected)")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--threads", type=int, default=None, help="worker threads")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track-align", help="track features and align a frame sequence")
    p.add_argument("--frames", required=True, help="glob of PGM frames (sorted)")
    p.add_argument("--ref", type=int, default=0, help="reference frame index")
    p.add_argument("--bbox", help="face box x,y,w,h restricting detection")
    p.add_argument("--max-features", type=int, default=40)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_track_align)

    p = sub.add_parser("extract-roi", help="rasterize region patches from landmarks")
    p.add_argument("--frame", required=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--regions", default="left_cheek,right_cheek,nose")
    p.add_argument("--spec-file", help="JSON array of custom region specs")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_extract_roi)

    p = sub.add_parser("cov-match", help="covariance signature matching / LOSO")
    p.add_argument("--manifest", required=True)
    p.add_argument("--measure", default="jkld", choices=["jkld", "airm", "lerm", "chol", "jbld"])
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--mode", default="loso", choices=["loso", "probe"])
    p.add_argument("--probe", nargs=2, metavar=("FRAME", "LANDMARKS"))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_cov_match)

    p = sub.add_parser("dne-train", help="fit a discriminant embedding")
    p.add_argument("--features", required=True, help="CSV, one sample per row")
    p.add_argument("--labels", required=True, help="CSV, one label per row")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--model-out", required=True)
    p.set_defaults(fn=_cmd_dne_train)

    p = sub.add_parser("dne-eval", help="evaluate an embedding via 1-NN")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--baseline", default="none", choices=["pca", "none"])
    p.add_argument("--report", required=True)
    p.set_defaults(fn=_cmd_dne_eval)

    p = sub.add_parser("lpq", help="256-bin local phase quantization histogram")
    p.add_argument("--patch", required=True)
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_lpq)

    p = sub.add_parser("synth-gen", help="generate a synthetic labeled dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--subjects", type=int, default=4)
    p.add_argument("--frames-per-subject", type=int, default=1)
    p.set_defaults(fn=_cmd_synth_gen)

    p = sub.add_parser("run", help="full pipeline over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        return args.fn(args, config)
    except (ThermofaceError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
