"""Frames, landmarks and the pixel-level primitives every other module builds on.

Images are grayscale PGM files (P2 or P5, maxval 255 or 65535, 16-bit
samples big-endian). Landmark files are CSV ``index,x,y`` with 68 rows in
a 1-based indexing scheme; the origin is the top-left pixel, x grows
rightward and y downward. Intensities are promoted to float64 once at
load; all downstream math is real-valued.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateIndex,
    FrameTooSmall,
    IndexOutOfRange,
    MalformedHeader,
    ManifestInvalid,
    NonNumericCoordinate,
    OutOfBounds,
    TruncatedData,
    UnsupportedMaxval,
    WrongRowCount,
)

N_LANDMARKS = 68


class Emotion(str, enum.Enum):
    """The six emotion classes, in their canonical order."""

    HAPPINESS = "happiness"
    DISGUST = "disgust"
    FEAR = "fear"
    SURPRISE = "surprise"
    ANGER = "anger"
    SADNESS = "sadness"


EMOTIONS = tuple(Emotion)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ThermalFrame:
    """A 2-D grayscale intensity grid.

    ``pixels`` is a (height, width) float64 array holding integral values
    in [0, 2**bit_depth - 1]. Instances are immutable; the array is marked
    read-only so frames can be shared across threads.
    """

    width: int
    height: int
    bit_depth: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.bit_depth not in (8, 16):
            raise ValueError(f"bit_depth must be 8 or 16, got {self.bit_depth}")
        px = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel grid {px.shape} does not match {self.height}x{self.width}"
            )
        if px.size and (px.min() < 0 or px.max() > self.maxval):
            raise ValueError("intensities outside [0, maxval]")
        if px.size and not np.array_equal(px, np.floor(px)):
            raise ValueError("intensities must be integral")
        object.__setattr__(self, "pixels", _readonly(px))

    @property
    def maxval(self) -> int:
        return (1 << self.bit_depth) - 1

    @classmethod
    def from_array(cls, pixels, bit_depth: int = 8) -> "ThermalFrame":
        a = np.asarray(pixels, dtype=np.float64)
        return cls(width=a.shape[1], height=a.shape[0], bit_depth=bit_depth, pixels=a)


@dataclass(frozen=True)
class LandmarkSet:
    """68 subpixel points, indexed 1..68 like the annotation scheme."""

    points: np.ndarray = field(repr=False)  # (68, 2) float64, columns x, y

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.shape != (N_LANDMARKS, 2):
            raise ValueError(f"expected ({N_LANDMARKS}, 2) points, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        object.__setattr__(self, "points", _readonly(pts))

    def xy(self, index: int) -> tuple[float, float]:
        """Coordinates of landmark ``index`` (1-based)."""
        if not 1 <= index <= N_LANDMARKS:
            raise IndexOutOfRange(f"landmark index {index} outside 1..{N_LANDMARKS}")
        x, y = self.points[index - 1]
        return float(x), float(y)

    def translated(self, dx: float, dy: float) -> "LandmarkSet":
        return LandmarkSet(self.points + np.array([dx, dy]))


@dataclass(frozen=True)
class SubjectRecord:
    """One dataset entry: a labeled frame with its landmark file."""

    subject_id: str
    emotion: Emotion
    frame_path: Path
    landmarks_path: Path


# --- PGM I/O ---

_TOKEN_RE = re.compile(rb"\S+")


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated tokens, skipping # comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens = []
    pos = 0
    while len(tokens) < count:
        m = _TOKEN_RE.search(data, pos)
        if m is None:
            raise MalformedHeader("incomplete header")
        tok = m.group()
        if tok.startswith(b"#"):
            nl = data.find(b"\n", m.start())
            if nl < 0:
                raise MalformedHeader("unterminated comment")
            pos = nl + 1
            continue
        tokens.append(tok)
        pos = m.end()
    if pos >= len(data):
        raise TruncatedData("no data after header")
    return tokens, pos + 1  # past the single whitespace separator


def _int_token(tok: bytes, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise MalformedHeader(f"non-numeric {what}: {tok!r}") from None


def load_frame(path) -> ThermalFrame:
    """Decode a P2 or P5 PGM file into a :class:`ThermalFrame`.

    Only maxval 255 and 65535 are accepted; 16-bit P5 samples are
    big-endian per the format. Raises MalformedHeader, UnsupportedMaxval
    or TruncatedData.
    """
    data = Path(path).read_bytes()
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise MalformedHeader(f"bad magic in {path}")
    magic = data[:2]
    tokens, body_at = _pgm_tokens(data[2:], 3)
    width, height, maxval = (
        _int_token(tokens[0], "width"),
        _int_token(tokens[1], "height"),
        _int_token(tokens[2], "maxval"),
    )
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if maxval not in (255, 65535):
        raise UnsupportedMaxval(f"maxval {maxval} not supported")
    bit_depth = 8 if maxval == 255 else 16
    n = width * height

    body = data[2 + body_at :]
    if magic == b"P5":
        dtype = np.dtype(">u2") if bit_depth == 16 else np.dtype("u1")
        need = n * dtype.itemsize
        if len(body) < need:
            raise TruncatedData(f"need {need} payload bytes, have {len(body)}")
        samples = np.frombuffer(body[:need], dtype=dtype).astype(np.float64)
    else:
        raw = [t for t in _TOKEN_RE.findall(body) if not t.startswith(b"#")]
        if len(raw) < n:
            raise TruncatedData(f"need {n} samples, have {len(raw)}")
        if len(raw) > n:
            raise MalformedHeader(f"{len(raw) - n} trailing samples")
        try:
            samples = np.array([int(t) for t in raw[:n]], dtype=np.float64)
        except ValueError:
            raise MalformedHeader("non-numeric sample") from None
    if samples.size and samples.max() > maxval:
        raise MalformedHeader("sample exceeds maxval")
    return ThermalFrame(
        width=width,
        height=height,
        bit_depth=bit_depth,
        pixels=samples.reshape(height, width),
    )


def save_frame(frame: ThermalFrame, path) -> None:
    """Write ``frame`` as binary P5; reloading reproduces it bit-exactly."""
    dtype = np.dtype(">u2") if frame.bit_depth == 16 else np.dtype("u1")
    header = f"P5\n{frame.width} {frame.height}\n{frame.maxval}\n".encode()
    Path(path).write_bytes(header + frame.pixels.astype(dtype).tobytes())


# --- landmark I/O ---

def load_landmarks(path, frame: ThermalFrame | None = None) -> LandmarkSet:
    """Parse a 68-row ``index,x,y`` CSV (header row optional).

    When ``frame`` is given, every point must lie inside its bounds.
    Raises WrongRowCount, DuplicateIndex, IndexOutOfRange,
    NonNumericCoordinate or OutOfBounds.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        first = rows[0][0].strip()
        try:
            float(first)
        except ValueError:
            rows = rows[1:]  # header row
    if len(rows) != N_LANDMARKS:
        raise WrongRowCount(f"expected {N_LANDMARKS} data rows, got {len(rows)}")

    pts = np.full((N_LANDMARKS, 2), np.nan)
    seen = set()
    for row in rows:
        if len(row) != 3:
            raise NonNumericCoordinate(f"expected index,x,y: {row!r}")
        try:
            idx = int(row[0])
            x, y = float(row[1]), float(row[2])
        except ValueError:
            raise NonNumericCoordinate(f"bad row {row!r}") from None
        if not 1 <= idx <= N_LANDMARKS:
            raise IndexOutOfRange(f"landmark index {idx} outside 1..{N_LANDMARKS}")
        if idx in seen:
            raise DuplicateIndex(f"landmark index {idx} repeated")
        seen.add(idx)
        pts[idx - 1] = (x, y)

    if frame is not None:
        xs, ys = pts[:, 0], pts[:, 1]
        bad = (xs < 0) | (xs > frame.width - 1) | (ys < 0) | (ys > frame.height - 1)
        if bad.any():
            i = int(np.argmax(bad))
            raise OutOfBounds(f"landmark {i + 1} at {tuple(pts[i])} outside frame")
    return LandmarkSet(pts)


def save_landmarks(landmarks: LandmarkSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x", "y"])
        for i, (x, y) in enumerate(landmarks.points, start=1):
            w.writerow([i, repr(float(x)), repr(float(y))])


# --- sampling and gradients ---

def sample_bilinear(frame: ThermalFrame, x: float, y: float) -> float:
    """Bilinear blend of the four pixels enclosing (x, y).

    Integer coordinates return the exact pixel value. Raises OutOfBounds
    outside [0, width-1] x [0, height-1].
    """
    if not (0.0 <= x <= frame.width - 1 and 0.0 <= y <= frame.height - 1):
        raise OutOfBounds(f"({x}, {y}) outside frame {frame.width}x{frame.height}")
    return float(sample_bilinear_grid(frame.pixels, np.array([x]), np.array([y]))[0])


def sample_bilinear_grid(grid: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized bilinear lookup on a raw (h, w) grid; no bounds check."""
    h, w = grid.shape
    x0 = np.clip(np.floor(xs).astype(np.intp), 0, w - 1)
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = grid[y0, x0] * (1.0 - fx) + grid[y0, x1] * fx
    bot = grid[y1, x0] * (1.0 - fx) + grid[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def gradient(frame: ThermalFrame) -> tuple[np.ndarray, np.ndarray]:
    """Spatial gradient (d/dx, d/dy): central differences inside, one-sided
    at the borders. Requires at least a 3x3 frame."""
    if frame.width < 3 or frame.height < 3:
        raise FrameTooSmall(f"{frame.width}x{frame.height} frame, need >= 3x3")
    gy, gx = np.gradient(frame.pixels, edge_order=1)
    return gx, gy


def gradient_grids(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Same scheme as :func:`gradient`, for raw float grids."""
    gy, gx = np.gradient(grid, edge_order=1)
    return gx, gy


# --- dataset manifest ---

def load_manifest(path) -> list[SubjectRecord]:
    """Load a JSON manifest: array of {subject_id, emotion, frame, landmarks}.

    Paths are resolved relative to the manifest file. Raises ManifestInvalid
    on schema violations, unknown emotions or unresolvable paths.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestInvalid(f"cannot read manifest {path}: {exc}") from None
    if not isinstance(entries, list) or not entries:
        raise ManifestInvalid("manifest must be a non-empty JSON array")

    base = path.parent
    records = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict):
            raise ManifestInvalid(f"entry {i} is not an object")
        missing = {"subject_id", "emotion", "frame", "landmarks"} - set(e)
        if missing:
            raise ManifestInvalid(f"entry {i} missing keys {sorted(missing)}")
        if not str(e["subject_id"]):
            raise ManifestInvalid(f"entry {i} has empty subject_id")
        try:
            emotion = Emotion(e["emotion"])
        except ValueError:
            raise ManifestInvalid(f"entry {i}: unknown emotion {e['emotion']!r}") from None
        frame_path = base / e["frame"]
        lm_path = base / e["landmarks"]
        for p in (frame_path, lm_path):
            if not p.is_file():
                raise ManifestInvalid(f"entry {i}: missing file {p}")
        records.append(
            SubjectRecord(
                subject_id=str(e["subject_id"]),
                emotion=emotion,
                frame_path=frame_path,
                landmarks_path=lm_path,
            )
        )
    return records
