"""Landmark-driven region-of-interest polygons, masks and normalized patches.

Three named regions ship built in: left cheek, right cheek and nose, each
as a closed path of 1-based landmark indices. Pixel membership uses the
even-odd rule at pixel centers (integer coordinates are centers); centers
exactly on an edge count as inside. Cropped regions are resized to a
consistent target size so signatures stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePolygon, EmptyIntersection
from .imaging import N_LANDMARKS, LandmarkSet, ThermalFrame

DEFAULT_TARGET_SIZE = (32, 32)

LEFT_CHEEK_PATH = (2, 37, 42, 41, 40, 32, 50, 49, 6, 5, 4, 3, 2)
RIGHT_CHEEK_PATH = (16, 46, 47, 48, 43, 36, 64, 65, 12, 13, 14, 15, 16)
NOSE_PATH = (40, 28, 43, 36, 35, 34, 33, 32, 40)


@dataclass(frozen=True)
class RoiSpec:
    """A named region: closed landmark-index path plus normalization size."""

    name: str
    vertex_path: tuple[int, ...]
    target_size: tuple[int, int] = DEFAULT_TARGET_SIZE  # (width, height)

    def __post_init__(self):
        path = tuple(int(i) for i in self.vertex_path)
        if len(path) < 4:
            raise ValueError(f"path of {len(path)} indices is too short")
        if path[0] != path[-1]:
            raise ValueError("path must repeat its first index last")
        if any(not 1 <= i <= N_LANDMARKS for i in path):
            raise ValueError(f"indices must lie in 1..{N_LANDMARKS}")
        tw, th = self.target_size
        if tw < 1 or th < 1:
            raise ValueError(f"bad target size {self.target_size}")
        object.__setattr__(self, "vertex_path", path)
        object.__setattr__(self, "target_size", (int(tw), int(th)))


@dataclass(frozen=True)
class RoiPatch:
    """Rasterized region: boolean mask over its bbox plus the resized patch."""

    name: str
    mask: np.ndarray = field(repr=False)  # bool, (bbox_h, bbox_w)
    patch: np.ndarray = field(repr=False)  # float64, (target_h, target_w)
    bbox: tuple[int, int, int, int]  # x0, y0, width, height in frame coords


def builtin_specs(target_size: tuple[int, int] = DEFAULT_TARGET_SIZE) -> list[RoiSpec]:
    """The three built-in regions. Forehead/maxillary have no canonical
    vertex paths and must be supplied as custom specs."""
    return [
        RoiSpec("left_cheek", LEFT_CHEEK_PATH, target_size),
        RoiSpec("right_cheek", RIGHT_CHEEK_PATH, target_size),
        RoiSpec("nose", NOSE_PATH, target_size),
    ]


def shoelace_area(polygon: np.ndarray) -> float:
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


def polygon_from_landmarks(spec: RoiSpec, landmarks: LandmarkSet) -> np.ndarray:
    """Landmark coordinates along the spec path, closing vertex dropped.

    Raises DegeneratePolygon when the enclosed area is below 1 px^2.
    """
    idx = np.array(spec.vertex_path[:-1]) - 1
    poly = landmarks.points[idx]
    if shoelace_area(poly) < 1.0:
        raise DegeneratePolygon(f"region {spec.name!r} has area < 1 px^2")
    return poly


def _points_in_polygon(px: np.ndarray, py: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule, boundary-inclusive, for flat arrays of query points."""
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        # points exactly on the segment count as inside
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        seg2 = (x2 - x1) ** 2 + (y2 - y1) ** 2
        if seg2 > 0:
            t = ((px - x1) * (x2 - x1) + (py - y1) * (y2 - y1)) / seg2
            on_edge |= (np.abs(cross) <= 1e-9 * max(1.0, np.sqrt(seg2))) & (t >= 0) & (t <= 1)
        # even-odd ray cast toward +x
        crosses = (y1 > py) != (y2 > py)
        if crosses.any():
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (px < xint)
    return inside | on_edge


def rasterize_mask(
    polygon: np.ndarray, frame: ThermalFrame
) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    """Boolean membership mask over the polygon's frame-clipped bbox.

    Returns (mask, bbox) with bbox = (x0, y0, w, h). Raises
    EmptyIntersection when no pixel center falls inside.
    """
    poly = np.asarray(polygon, dtype=np.float64)
    x0 = max(int(np.ceil(poly[:, 0].min())), 0)
    y0 = max(int(np.ceil(poly[:, 1].min())), 0)
    x1 = min(int(np.floor(poly[:, 0].max())), frame.width - 1)
    y1 = min(int(np.floor(poly[:, 1].max())), frame.height - 1)
    if x0 > x1 or y0 > y1:
        raise EmptyIntersection("polygon bbox does not intersect the frame")
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    mask = _points_in_polygon(
        xs.ravel().astype(np.float64), ys.ravel().astype(np.float64), poly
    ).reshape(xs.shape)
    if not mask.any():
        raise EmptyIntersection("no pixel center inside the polygon")
    return mask, (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def resize_bilinear(grid: np.ndarray, target_size: tuple[int, int]) -> np.ndarray:
    """Resample to (width, height) with corner-aligned bilinear interpolation."""
    tw, th = target_size
    h, w = grid.shape
    sx = np.linspace(0.0, w - 1.0, tw) if tw > 1 else np.zeros(1)
    sy = np.linspace(0.0, h - 1.0, th) if th > 1 else np.zeros(1)
    x0 = np.clip(np.floor(sx).astype(np.intp), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(np.intp), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[None, :]
    fy = (sy - y0)[:, None]
    top = grid[np.ix_(y0, x0)] * (1 - fx) + grid[np.ix_(y0, x1)] * fx
    bot = grid[np.ix_(y1, x0)] * (1 - fx) + grid[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def extract_patch(frame: ThermalFrame, spec: RoiSpec, landmarks: LandmarkSet) -> RoiPatch:
    """Crop the region bbox, zero outside-mask pixels, resize to target size."""
    poly = polygon_from_landmarks(spec, landmarks)
    mask, bbox = rasterize_mask(poly, frame)
    x0, y0, w, h = bbox
    crop = frame.pixels[y0 : y0 + h, x0 : x0 + w] * mask
    patch = resize_bilinear(crop, spec.target_size)
    return RoiPatch(name=spec.name, mask=mask, patch=patch, bbox=bbox)
