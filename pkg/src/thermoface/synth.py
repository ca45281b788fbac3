"""Deterministic synthetic thermal-face dataset generator.

Renders face-like frames (a warm ellipse with smooth per-subject texture
on a dark background), lays 68 landmarks analytically on the ellipse so
the built-in region paths are valid without a detector, and adds a
per-emotion intensity offset inside the nose/cheek polygons. Frames of a
sequence drift by a smooth translation so tracking has something to do.
Everything derives from one seed; identical inputs give byte-identical
files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OutputDirNotWritable
from .imaging import EMOTIONS, Emotion, LandmarkSet, ThermalFrame, save_frame, save_landmarks
from .roi import builtin_specs, polygon_from_landmarks, rasterize_mask

FRAME_WIDTH = 160
FRAME_HEIGHT = 192

# unit-face landmark template: x in [-1, 1], y downward, scaled by the
# ellipse semi-axes at render time
def _unit_face() -> np.ndarray:
    pts = np.zeros((68, 2))
    alpha = np.pi * (1.0 + np.arange(17) / 16.0)  # jaw arc, left ear -> chin -> right ear
    pts[0:17, 0] = np.cos(alpha)
    pts[0:17, 1] = -np.sin(alpha) * 1.25
    brow_x = np.array([0.65, 0.54, 0.42, 0.31, 0.20])
    brow_y = np.array([-0.52, -0.56, -0.58, -0.56, -0.52])
    pts[17:22] = np.column_stack([-brow_x, brow_y])
    pts[22:27] = np.column_stack([brow_x[::-1], brow_y[::-1]])
    pts[27:31] = [(0.0, -0.35), (0.0, -0.20), (0.0, -0.05), (0.0, 0.10)]
    pts[31:36] = [(-0.18, 0.22), (-0.09, 0.25), (0.0, 0.27), (0.09, 0.25), (0.18, 0.22)]
    pts[36:42] = [(-0.58, -0.35), (-0.50, -0.40), (-0.34, -0.40),
                  (-0.26, -0.35), (-0.34, -0.30), (-0.50, -0.30)]
    pts[42:48] = [(0.26, -0.35), (0.34, -0.40), (0.50, -0.40),
                  (0.58, -0.35), (0.50, -0.30), (0.34, -0.30)]
    pts[48:60] = [(-0.28, 0.62), (-0.17, 0.55), (-0.07, 0.52), (0.00, 0.53),
                  (0.07, 0.52), (0.17, 0.55), (0.28, 0.62), (0.17, 0.70),
                  (0.07, 0.73), (0.00, 0.74), (-0.07, 0.73), (-0.17, 0.70)]
    pts[60:68] = [(-0.22, 0.62), (-0.07, 0.60), (0.00, 0.61), (0.07, 0.60),
                  (0.22, 0.62), (0.07, 0.65), (0.00, 0.66), (-0.07, 0.65)]
    return pts


UNIT_FACE = _unit_face()

DEFAULT_EMOTION_PROFILE: dict[Emotion, dict[str, float]] = {
    Emotion.HAPPINESS: {"left_cheek": 60.0, "right_cheek": 60.0},
    Emotion.DISGUST: {"nose": 70.0},
    Emotion.FEAR: {"nose": 55.0, "left_cheek": 40.0},
    Emotion.SURPRISE: {"right_cheek": 70.0},
    Emotion.ANGER: {"nose": 40.0, "right_cheek": 55.0},
    Emotion.SADNESS: {"left_cheek": 70.0},
}


@dataclass(frozen=True)
class SubjectStyle:
    """Per-subject appearance: ellipse size and a smooth cosine texture.

    The texture mixes a population component shared by every subject of a
    dataset with a weaker personal component, so subjects look related but
    distinguishable."""

    semi_axes: tuple[float, float]
    drift: tuple[float, float]  # px per frame
    tex_freq: np.ndarray  # (k, 2)
    tex_phase: np.ndarray  # (k,)
    tex_amp: np.ndarray  # (k,)


def _draw_waves(rng: np.random.Generator, k: int, amp_lo: float, amp_hi: float):
    freq = rng.uniform(1.0 / 40.0, 1.0 / 15.0, size=(k, 2)) * np.where(
        rng.random((k, 2)) < 0.5, -1.0, 1.0
    )
    return freq, rng.uniform(0, 2 * np.pi, size=k), rng.uniform(amp_lo, amp_hi, size=k)


def _draw_style(rng: np.random.Generator, shared) -> SubjectStyle:
    a = 52.0 * (1.0 + rng.uniform(-0.04, 0.04))
    b = 72.0 * (1.0 + rng.uniform(-0.04, 0.04))
    angle = rng.uniform(0, 2 * np.pi)
    drift = (0.9 * np.cos(angle), 0.9 * np.sin(angle))
    own = _draw_waves(rng, 3, 1.0, 2.0)
    return SubjectStyle(
        semi_axes=(a, b),
        drift=drift,
        tex_freq=np.vstack([shared[0], own[0]]),
        tex_phase=np.concatenate([shared[1], own[1]]),
        tex_amp=np.concatenate([shared[2], own[2]]),
    )


def _render_frame(
    style: SubjectStyle,
    emotion: Emotion,
    frame_index: int,
    profile: dict[Emotion, dict[str, float]],
) -> tuple[ThermalFrame, LandmarkSet]:
    cx = FRAME_WIDTH / 2.0 + style.drift[0] * frame_index
    cy = FRAME_HEIGHT / 2.0 + style.drift[1] * frame_index
    a, b = style.semi_axes
    landmarks = LandmarkSet(UNIT_FACE * (a, b) + (cx, cy))

    ys, xs = np.mgrid[0:FRAME_HEIGHT, 0:FRAME_WIDTH].astype(np.float64)
    fx = xs - cx
    fy = ys - cy
    r2 = (fx / a) ** 2 + (fy / b) ** 2
    face = r2 <= 1.0

    img = np.full((FRAME_HEIGHT, FRAME_WIDTH), 30.0)
    warm = 130.0 - 25.0 * r2
    texture = np.zeros_like(img)
    for (ux, uy), phase, amp in zip(style.tex_freq, style.tex_phase, style.tex_amp):
        # texture rides in face coordinates so it moves with the drift
        texture += amp * np.cos(2 * np.pi * (ux * fx + uy * fy) + phase)
    img[face] = warm[face] + texture[face]

    bounds = ThermalFrame.from_array(np.zeros((FRAME_HEIGHT, FRAME_WIDTH)))
    offsets = profile.get(emotion, {})
    if offsets:
        for spec in builtin_specs():
            delta = offsets.get(spec.name, 0.0)
            if not delta:
                continue
            poly = polygon_from_landmarks(spec, landmarks)
            mask, (x0, y0, w, h) = rasterize_mask(poly, bounds)
            img[y0 : y0 + h, x0 : x0 + w][mask] += delta

    return ThermalFrame.from_array(np.clip(np.rint(img), 0, 255)), landmarks


def synth_generate(
    out_dir,
    seed: int,
    n_subjects: int = 4,
    frames_per_subject: int = 1,
    emotion_profile: dict[Emotion, dict[str, float]] | None = None,
    emotions: tuple[Emotion, ...] = EMOTIONS,
) -> Path:
    """Write frames, landmark CSVs and manifest.json; returns the manifest path.

    One manifest record per (subject, emotion, frame). Raises ValueError
    for fewer than 2 subjects or fewer than 1 frame, OutputDirNotWritable
    when the target cannot be created or written.
    """
    if n_subjects < 2:
        raise ValueError(f"n_subjects must be >= 2, got {n_subjects}")
    if frames_per_subject < 1:
        raise ValueError(f"frames_per_subject must be >= 1, got {frames_per_subject}")
    profile = DEFAULT_EMOTION_PROFILE if emotion_profile is None else emotion_profile

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OutputDirNotWritable(f"{out}: {exc}") from None

    rng = np.random.default_rng(seed)
    shared_waves = _draw_waves(rng, 5, 3.0, 5.0)
    manifest = []
    for si in range(n_subjects):
        style = _draw_style(rng, shared_waves)
        subject_id = f"s{si:02d}"
        for emotion in emotions:
            for t in range(frames_per_subject):
                frame, landmarks = _render_frame(style, emotion, t, profile)
                stem = f"{subject_id}_{emotion.value}_f{t:02d}"
                save_frame(frame, out / f"{stem}.pgm")
                save_landmarks(landmarks, out / f"{stem}.csv")
                manifest.append(
                    {
                        "subject_id": subject_id,
                        "emotion": emotion.value,
                        "frame": f"{stem}.pgm",
                        "landmarks": f"{stem}.csv",
                    }
                )
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
