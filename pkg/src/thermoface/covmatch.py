"""Fiducial-point covariance signatures and least-distance emotion matching.

Each face is summarized by the covariance of its 68 landmark-window
intensity vectors (one w x w window per landmark, bilinear-sampled, so
L = w*w). Probes match the gallery signature at minimum distance under a
configurable SPD measure; evaluation is leave-one-subject-out.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpectraWarning,
    DimMismatch,
    EmptyGallery,
    SingleClass,
    TooFewSubjects,
    WindowOutOfBounds,
)
from .imaging import EMOTIONS, Emotion, LandmarkSet, ThermalFrame, sample_bilinear_grid
from .spd import MEASURES, SpdMatrix, ridge_scale

N_POINTS = 68


@dataclass(frozen=True)
class FpsConfig:
    """Window size per landmark, ridge strength and the distance measure."""

    window: int = 7
    ridge: float = 1e-6
    measure: str = "jkld"

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.measure not in MEASURES:
            raise ValueError(f"measure must be one of {sorted(MEASURES)}")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")


@dataclass(frozen=True)
class CovarianceSignature:
    cov: SpdMatrix
    label: Emotion
    subject_id: str


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square label-indexed matrix, either inter-class mean distances
    (zero diagonal, symmetric) or classification counts (true x predicted)."""

    labels: tuple
    values: np.ndarray = field(repr=False)
    mode: str = "count"  # "count" | "distance"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if v.shape != (n, n):
            raise ValueError(f"values shape {v.shape} for {n} labels")
        if (v < 0).any():
            raise ValueError("entries must be non-negative")
        if self.mode not in ("count", "distance"):
            raise ValueError(f"mode {self.mode!r}")
        if self.mode == "distance":
            if np.abs(np.diag(v)).max(initial=0.0) != 0.0:
                raise ValueError("distance mode requires a zero diagonal")
            if not np.array_equal(v, v.T):
                raise ValueError("distance mode requires symmetry")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def total(self) -> float:
        return float(self.values.sum())


def build_fps(
    frame: ThermalFrame, landmarks: LandmarkSet, config: FpsConfig = FpsConfig()
) -> np.ndarray:
    """68 x w^2 matrix; row i is landmark i's window, row-major.

    Windows are bilinear-sampled at subpixel centers. Sample positions are
    clamped to the frame, which tolerates landmarks overhanging the border
    by up to w/2; beyond that raises WindowOutOfBounds.
    """
    w = config.window
    half = w // 2
    d = np.arange(-half, half + 1, dtype=np.float64)
    dx, dy = np.meshgrid(d, d)
    xs = landmarks.points[:, 0:1] + dx.ravel()[None, :]
    ys = landmarks.points[:, 1:2] + dy.ravel()[None, :]
    cx = np.clip(xs, 0.0, frame.width - 1.0)
    cy = np.clip(ys, 0.0, frame.height - 1.0)
    overhang = max(np.abs(xs - cx).max(), np.abs(ys - cy).max())
    if overhang > w / 2:
        raise WindowOutOfBounds(f"window overhangs frame by {overhang:.2f} px (> {w / 2})")
    return sample_bilinear_grid(frame.pixels, cx.ravel(), cy.ravel()).reshape(
        N_POINTS, w * w
    )


def raw_covariance(fps: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance of the rows (rows are observations)."""
    fps = np.asarray(fps, dtype=np.float64)
    centered = fps - fps.mean(axis=0, keepdims=True)
    return (centered.T @ centered) / (fps.shape[0] - 1)


def covariance_of_fps(fps: np.ndarray, config: FpsConfig = FpsConfig()) -> SpdMatrix:
    """Ridge-stabilized SPD covariance of the point spectra.

    The ridge is config.ridge times the mean eigenvalue of the raw
    covariance (times 1.0 when the scatter is all-zero). An all-identical
    spectra matrix is flagged with DegenerateSpectraWarning; its result is
    the pure ridge eps * I.
    """
    fps = np.asarray(fps, dtype=np.float64)
    if fps.ndim != 2 or fps.shape[0] < 2:
        raise ValueError(f"need >= 2 spectra rows, got shape {fps.shape}")
    if not np.all(np.isfinite(fps)):
        raise ValueError("non-finite spectra entries")
    cov = raw_covariance(fps)
    if not cov.any():
        warnings.warn(
            "all point spectra identical; covariance is pure ridge",
            DegenerateSpectraWarning,
            stacklevel=2,
        )
    eps = config.ridge * ridge_scale(float(np.trace(cov)), cov.shape[0])
    return SpdMatrix(cov + eps * np.eye(cov.shape[0]), repair=True, ridge=config.ridge)


def signature_from_frame(
    frame: ThermalFrame,
    landmarks: LandmarkSet,
    label: Emotion,
    subject_id: str,
    config: FpsConfig = FpsConfig(),
) -> CovarianceSignature:
    cov = covariance_of_fps(build_fps(frame, landmarks, config), config)
    return CovarianceSignature(cov=cov, label=label, subject_id=subject_id)


def least_distance_label(labels, distances):
    """Label at the minimum distance; ties break toward the earlier entry."""
    distances = np.asarray(distances, dtype=np.float64)
    if distances.size == 0:
        raise EmptyGallery("no distances to compare")
    return labels[int(np.argmin(distances))]


def match_probe(
    probe: CovarianceSignature,
    gallery: list[CovarianceSignature],
    config: FpsConfig = FpsConfig(),
) -> tuple[Emotion, np.ndarray]:
    """Distance of the probe to every gallery signature, and the label of
    the nearest one."""
    if not gallery:
        raise EmptyGallery("empty gallery")
    dims = {g.cov.dim for g in gallery} | {probe.cov.dim}
    if len(dims) > 1:
        raise DimMismatch(f"signature dims differ: {sorted(dims)}")
    measure = MEASURES[config.measure]
    distances = np.array([measure(probe.cov, g.cov) for g in gallery])
    return least_distance_label([g.label for g in gallery], distances), distances


def class_distance_matrix(
    gallery: list[CovarianceSignature], config: FpsConfig = FpsConfig()
) -> ConfusionMatrix:
    """Mean pairwise distance between the signatures of each class pair;
    diagonal forced to zero."""
    labels = [lab for lab in EMOTIONS if any(g.label == lab for g in gallery)]
    if len(labels) < 2:
        raise SingleClass(f"{len(labels)} class(es) present; need >= 2")
    measure = MEASURES[config.measure]
    groups = {lab: [g for g in gallery if g.label == lab] for lab in labels}
    n = len(labels)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            pairs = [
                measure(a.cov, b.cov) for a in groups[labels[i]] for b in groups[labels[j]]
            ]
            out[i, j] = out[j, i] = float(np.mean(pairs))
    return ConfusionMatrix(labels=tuple(labels), values=out, mode="distance")


def loso_evaluate(
    signatures: list[CovarianceSignature], config: FpsConfig = FpsConfig()
) -> tuple[float, ConfusionMatrix]:
    """Leave-one-subject-out accuracy and the true x predicted count matrix.

    For each subject every signature is matched against the gallery of all
    other subjects' signatures."""
    subjects = sorted({s.subject_id for s in signatures})
    if len(subjects) < 2:
        raise TooFewSubjects(f"{len(subjects)} subject(s); need >= 2")
    index = {lab: i for i, lab in enumerate(EMOTIONS)}
    counts = np.zeros((len(EMOTIONS), len(EMOTIONS)))
    correct = 0
    for subject in subjects:
        gallery = [s for s in signatures if s.subject_id != subject]
        for probe in (s for s in signatures if s.subject_id == subject):
            predicted, _ = match_probe(probe, gallery, config)
            counts[index[probe.label], index[predicted]] += 1
            correct += predicted == probe.label
    confusion = ConfusionMatrix(labels=EMOTIONS, values=counts, mode="count")
    return correct / len(signatures), confusion
