"""Inverse-compositional point tracking and similarity alignment of sequences.

Features are corners ranked by the smaller structure-tensor eigenvalue.
Each feature registers a template window once, with its gradient Jacobian
and 2x2 Gauss-Newton Hessian H = sum J^T J precomputed; tracking a frame
then iterates

    dp = H^-1 sum J^T [I(x + p) - T(x)],    p <- p - dp

until |dp| falls below the convergence threshold. The warp model is pure
translation, so composing with the inverse of the increment reduces to
the subtraction above. Sequences are tracked coarse-to-fine over an image
pyramid, each frame seeding the next; a least-squares similarity fit over
the tracked correspondences aligns every frame onto the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AllSeedsSingular,
    DegenerateConfiguration,
    EmptySequence,
    NoFeaturesFound,
    NonPositiveScale,
    SingularHessian,
    TooFewCorrespondences,
    WindowOutOfBounds,
)
from .imaging import ThermalFrame, gradient_grids, sample_bilinear_grid

TRACKED = "tracked"
LOST = "lost"

# responses at or below this (scaled by dynamic range squared) count as no texture
_FLAT_RESPONSE_REL = 1e-12
_MAX_HESSIAN_CONDITION = 1e12


@dataclass(frozen=True)
class TrackerConfig:
    window_half: int = 7
    max_iterations: int = 30
    epsilon: float = 0.01
    pyramid_levels: int = 3
    min_eigen_quality: float = 0.01
    max_residual_frac: float = 0.05  # rms error (in units of dynamic range) that loses a point

    def __post_init__(self):
        if self.window_half < 2:
            raise ValueError("window_half must be >= 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not 0 < self.min_eigen_quality <= 1:
            raise ValueError("min_eigen_quality must be in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class TrackPoint:
    """A feature with translation parameter p relative to its registration
    center; its position in the current frame is center + p."""

    id: int
    center: tuple[float, float]
    p: np.ndarray = field(default_factory=lambda: np.zeros(2))
    status: str = TRACKED
    residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64).reshape(2))

    @property
    def position(self) -> tuple[float, float]:
        return (self.center[0] + float(self.p[0]), self.center[1] + float(self.p[1]))


@dataclass(frozen=True)
class TemplatePatch:
    """Registered window: values, per-pixel gradient Jacobian and Hessian."""

    center: tuple[float, float]
    window_half: int
    template_values: np.ndarray = field(repr=False)  # (npix,)
    jacobian: np.ndarray = field(repr=False)  # (npix, 2)
    hessian: np.ndarray = field(repr=False)  # (2, 2)
    offsets: np.ndarray = field(repr=False)  # (npix, 2)


@dataclass(frozen=True)
class SimilarityTransform:
    """x -> scale * R(rotation) @ x + translation."""

    scale: float
    rotation: float
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(2)
        )

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, 0.0, np.zeros(2))

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix().T + self.translation

    def inverse(self) -> "SimilarityTransform":
        if self.scale <= 0:
            raise NonPositiveScale(f"scale {self.scale}")
        inv_t = -np.linalg.solve(self.matrix(), self.translation)
        return SimilarityTransform(1.0 / self.scale, -self.rotation, inv_t)


# --- feature detection ---

def _box_sum(grid: np.ndarray, half: int) -> np.ndarray:
    """Sum over the (2*half+1)^2 window; only valid where the window fits."""
    h, w = grid.shape
    ii = np.zeros((h + 1, w + 1))
    np.cumsum(np.cumsum(grid, axis=0), axis=1, out=ii[1:, 1:])
    out = np.zeros_like(grid)
    k = 2 * half + 1
    inner = (
        ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]
    )
    out[half : h - half, half : w - half] = inner
    return out


def min_eigen_response(frame: ThermalFrame, window_half: int) -> np.ndarray:
    """Smaller eigenvalue of the windowed 2x2 structure tensor, per pixel.

    Zero outside the band where the window fits in the frame.
    """
    gx, gy = gradient_grids(frame.pixels)
    sxx = _box_sum(gx * gx, window_half)
    sxy = _box_sum(gx * gy, window_half)
    syy = _box_sum(gy * gy, window_half)
    tr = sxx + syy
    det_root = np.sqrt(np.maximum((sxx - syy) ** 2 + 4.0 * sxy**2, 0.0))
    return 0.5 * (tr - det_root)


def detect_features(
    frame: ThermalFrame,
    roi: tuple[int, int, int, int] | None = None,
    config: TrackerConfig = TrackerConfig(),
    max_count: int = 50,
) -> list[TrackPoint]:
    """Corners ranked by minimum-eigenvalue response.

    Keeps responses above min_eigen_quality times the best one, with
    non-maximum suppression of radius window_half; equal responses order
    by (row, column). Raises NoFeaturesFound on textureless input.
    """
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    half = config.window_half
    response = min_eigen_response(frame, half)

    valid = np.zeros_like(response, dtype=bool)
    valid[half : frame.height - half, half : frame.width - half] = True
    if roi is not None:
        rx, ry, rw, rh = roi
        if rx < 0 or ry < 0 or rx + rw > frame.width or ry + rh > frame.height:
            raise ValueError(f"roi {roi} outside frame {frame.width}x{frame.height}")
        roi_mask = np.zeros_like(valid)
        roi_mask[ry : ry + rh, rx : rx + rw] = True
        valid &= roi_mask

    response = np.where(valid, response, 0.0)
    best = response.max() if response.size else 0.0
    if best <= _FLAT_RESPONSE_REL * frame.maxval**2:
        raise NoFeaturesFound("no textured window in the search region")

    rows, cols = np.nonzero(response >= config.min_eigen_quality * best)
    resp = response[rows, cols]
    order = np.lexsort((cols, rows, -resp))
    rows, cols, resp = rows[order], cols[order], resp[order]

    points: list[TrackPoint] = []
    kept = np.empty((0, 2))
    for r, c in zip(rows, cols):
        if kept.size and np.min(np.hypot(kept[:, 0] - c, kept[:, 1] - r)) <= half:
            continue
        points.append(TrackPoint(id=len(points), center=(float(c), float(r))))
        kept = np.vstack([kept, (c, r)])
        if len(points) == max_count:
            break
    if not points:
        raise NoFeaturesFound("all candidates suppressed")
    return points


# --- template registration and single-step tracking ---

def _window_offsets(half: int) -> np.ndarray:
    d = np.arange(-half, half + 1, dtype=np.float64)
    dx, dy = np.meshgrid(d, d)
    return np.column_stack([dx.ravel(), dy.ravel()])


def _precompute_on_grid(
    grid: np.ndarray,
    gx: np.ndarray,
    gy: np.ndarray,
    center: tuple[float, float],
    half: int,
) -> TemplatePatch:
    h, w = grid.shape
    cx, cy = center
    if cx - half < 0 or cy - half < 0 or cx + half > w - 1 or cy + half > h - 1:
        raise WindowOutOfBounds(f"window at {center} exceeds {w}x{h} grid")
    offsets = _window_offsets(half)
    xs = cx + offsets[:, 0]
    ys = cy + offsets[:, 1]
    values = sample_bilinear_grid(grid, xs, ys)
    jac = np.column_stack(
        [sample_bilinear_grid(gx, xs, ys), sample_bilinear_grid(gy, xs, ys)]
    )
    hess = jac.T @ jac
    eigs = np.linalg.eigvalsh(hess)
    if eigs[0] <= 0 or eigs[1] / eigs[0] > _MAX_HESSIAN_CONDITION:
        raise SingularHessian(f"Hessian eigenvalues {eigs}")
    return TemplatePatch(
        center=(float(cx), float(cy)),
        window_half=half,
        template_values=values,
        jacobian=jac,
        hessian=hess,
        offsets=offsets,
    )


def precompute_template(
    frame: ThermalFrame, center: tuple[float, float], config: TrackerConfig = TrackerConfig()
) -> TemplatePatch:
    """Register a feature: window values, Jacobian and invertible Hessian.

    Raises WindowOutOfBounds or SingularHessian (flat or one-directional
    texture)."""
    gx, gy = gradient_grids(frame.pixels)
    return _precompute_on_grid(frame.pixels, gx, gy, center, config.window_half)


def _track_on_grid(
    template: TemplatePatch,
    grid: np.ndarray,
    maxval: float,
    p_init: np.ndarray,
    config: TrackerConfig,
    point_id: int = -1,
) -> TrackPoint:
    h, w = grid.shape
    cx, cy = template.center
    offsets = template.offsets
    half = template.window_half
    hess_inv = np.linalg.inv(template.hessian)
    p = np.asarray(p_init, dtype=np.float64).reshape(2).copy()

    def in_bounds(px: float, py: float) -> bool:
        return (
            px - half >= 0 and py - half >= 0 and px + half <= w - 1 and py + half <= h - 1
        )

    for _ in range(config.max_iterations):
        if not in_bounds(cx + p[0], cy + p[1]):
            return TrackPoint(point_id, template.center, p, LOST, math.inf)
        values = sample_bilinear_grid(grid, cx + p[0] + offsets[:, 0], cy + p[1] + offsets[:, 1])
        err = values - template.template_values
        dp = hess_inv @ (template.jacobian.T @ err)
        p -= dp
        if float(np.hypot(dp[0], dp[1])) < config.epsilon:
            break

    if not in_bounds(cx + p[0], cy + p[1]):
        return TrackPoint(point_id, template.center, p, LOST, math.inf)
    values = sample_bilinear_grid(grid, cx + p[0] + offsets[:, 0], cy + p[1] + offsets[:, 1])
    residual = float(np.mean((values - template.template_values) ** 2))
    if math.sqrt(residual) > config.max_residual_frac * maxval:
        return TrackPoint(point_id, template.center, p, LOST, residual)
    return TrackPoint(point_id, template.center, p, TRACKED, residual)


def track_step(
    template: TemplatePatch,
    next_frame: ThermalFrame,
    p_init=(0.0, 0.0),
    config: TrackerConfig = TrackerConfig(),
) -> TrackPoint:
    """One Gauss-Newton track of a registered template into a frame.

    Iteration failure is reported as status 'lost', never raised: the
    point is lost when its window leaves the frame or the final rms error
    exceeds max_residual_frac of the dynamic range.
    """
    return _track_on_grid(
        template, next_frame.pixels, float(next_frame.maxval), np.asarray(p_init), config
    )


# --- pyramidal sequence tracking ---

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _smooth5(grid: np.ndarray) -> np.ndarray:
    h, w = grid.shape
    padded = np.pad(grid, ((2, 2), (0, 0)), mode="edge")
    out = np.zeros_like(grid)
    for i, wgt in enumerate(_BINOMIAL5):
        out += wgt * padded[i : i + h, :]
    padded = np.pad(out, ((0, 0), (2, 2)), mode="edge")
    out = np.zeros_like(grid)
    for i, wgt in enumerate(_BINOMIAL5):
        out += wgt * padded[:, i : i + w]
    return out


def build_pyramid(grid: np.ndarray, levels: int, min_size: int) -> list[np.ndarray]:
    """Level 0 is the input; each level halves resolution after 5-tap
    binomial smoothing. Stops early when a level would drop below min_size."""
    pyr = [grid]
    for _ in range(1, levels):
        nxt = _smooth5(pyr[-1])[::2, ::2]
        if min(nxt.shape) < min_size:
            break
        pyr.append(nxt)
    return pyr


def track_sequence(
    frames: list[ThermalFrame],
    seeds: list[TrackPoint],
    config: TrackerConfig = TrackerConfig(),
) -> list[list[TrackPoint]]:
    """Track seed points through an ordered sequence, frame by frame.

    Templates are registered once on the first frame (per pyramid level);
    each frame's translations seed the next frame's coarse-to-fine solve.
    Lost points stay lost. Returns one list of points per frame, the first
    echoing the seeds.
    """
    if len(frames) < 2:
        raise EmptySequence(f"{len(frames)} frame(s); need at least 2")
    if not seeds:
        raise AllSeedsSingular("no seed points")
    min_size = 2 * config.window_half + 1
    maxval = float(frames[0].maxval)

    ref_pyr = build_pyramid(frames[0].pixels, config.pyramid_levels, min_size)
    grads = [gradient_grids(g) for g in ref_pyr]
    templates: list[list[TemplatePatch | None]] = []
    usable = 0
    for seed in seeds:
        per_level: list[TemplatePatch | None] = []
        for lvl, g in enumerate(ref_pyr):
            scale = 2.0**lvl
            center = (seed.center[0] / scale, seed.center[1] / scale)
            try:
                per_level.append(
                    _precompute_on_grid(g, *grads[lvl], center, config.window_half)
                )
            except (WindowOutOfBounds, SingularHessian):
                per_level.append(None)
        templates.append(per_level)
        if per_level[0] is not None:
            usable += 1
    if usable == 0:
        raise AllSeedsSingular("no seed survives template registration")

    results = [
        [
            replace(seed, p=np.zeros(2), status=TRACKED if templates[i][0] else LOST,
                    residual=0.0 if templates[i][0] else math.inf)
            for i, seed in enumerate(seeds)
        ]
    ]
    for frame in frames[1:]:
        pyr = build_pyramid(frame.pixels, config.pyramid_levels, min_size)
        current: list[TrackPoint] = []
        for i, prev in enumerate(results[-1]):
            if prev.status == LOST:
                current.append(prev)
                continue
            p = prev.p.copy()
            point = None
            for lvl in range(len(pyr) - 1, -1, -1):
                tmpl = templates[i][lvl] if lvl < len(templates[i]) else None
                if tmpl is None or lvl >= len(pyr):
                    continue
                scale = 2.0**lvl
                step = _track_on_grid(tmpl, pyr[lvl], maxval, p / scale, config, prev.id)
                if lvl > 0:
                    if step.status == TRACKED:
                        p = step.p * scale
                else:
                    point = step
            current.append(point if point is not None else replace(prev, status=LOST, residual=math.inf))
        results.append(current)
    return results


# --- similarity alignment ---

def align_to_reference(ref_points: np.ndarray, cur_points: np.ndarray) -> SimilarityTransform:
    """Least-squares similarity transform mapping current points onto
    reference points.

    Inputs are (n, 2) position arrays of corresponding tracked points.
    Raises TooFewCorrespondences (n < 2) or DegenerateConfiguration (all
    current points coincident)."""
    ref = np.asarray(ref_points, dtype=np.float64).reshape(-1, 2)
    cur = np.asarray(cur_points, dtype=np.float64).reshape(-1, 2)
    if ref.shape != cur.shape:
        raise TooFewCorrespondences(f"{ref.shape[0]} reference vs {cur.shape[0]} current points")
    if ref.shape[0] < 2:
        raise TooFewCorrespondences(f"{ref.shape[0]} pair(s); need at least 2")
    mu_r = ref.mean(axis=0)
    mu_c = cur.mean(axis=0)
    x = cur - mu_c
    y = ref - mu_r
    denom = float(np.sum(x * x))
    if denom <= 1e-12 * max(1.0, float(np.sum(y * y))):
        raise DegenerateConfiguration("current points are coincident")
    a = float(np.sum(x * y))
    b = float(np.sum(x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]))
    scale = math.hypot(a, b) / denom
    if scale <= 0:
        raise DegenerateConfiguration("zero optimal scale")
    rotation = math.atan2(b, a)
    t = SimilarityTransform(scale, rotation, np.zeros(2))
    translation = mu_r - t.apply(mu_c[None, :])[0]
    return SimilarityTransform(scale, rotation, translation)


def warp_frame(frame: ThermalFrame, transform: SimilarityTransform) -> ThermalFrame:
    """Render the frame under the transform (output pixel o samples the
    source at transform^-1(o), bilinear); uncovered pixels become 0."""
    if not (
        math.isfinite(transform.scale)
        and math.isfinite(transform.rotation)
        and np.all(np.isfinite(transform.translation))
    ):
        raise NonPositiveScale("non-finite transform")
    if transform.scale <= 0:
        raise NonPositiveScale(f"scale {transform.scale}")
    inv = transform.inverse()
    xs, ys = np.meshgrid(
        np.arange(frame.width, dtype=np.float64), np.arange(frame.height, dtype=np.float64)
    )
    src = inv.apply(np.column_stack([xs.ravel(), ys.ravel()]))
    sx, sy = src[:, 0], src[:, 1]
    inside = (sx >= 0) & (sx <= frame.width - 1) & (sy >= 0) & (sy <= frame.height - 1)
    values = np.zeros(sx.shape)
    values[inside] = sample_bilinear_grid(
        frame.pixels, sx[inside], sy[inside]
    )
    out = np.clip(np.rint(values), 0, frame.maxval).reshape(frame.height, frame.width)
    return ThermalFrame(frame.width, frame.height, frame.bit_depth, out)
