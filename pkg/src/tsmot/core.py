"""Geometric and detection/trajectory types shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

DEFAULT_FEATURE_DIM = 16

ModelTag = Literal["teacher", "student"]


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box in MOTChallenge left-top-width-height form (pixels)."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self) -> None:
        vals = (self.left, self.top, self.width, self.height)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates: {vals}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"box extents must be positive, got w={self.width} h={self.height}")

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float) -> BoundingBox:
        return cls(cx - width / 2.0, cy - height / 2.0, width, height)

    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def aspect(self) -> float:
        return self.width / self.height

    def as_tlwh(self) -> np.ndarray:
        return np.array([self.left, self.top, self.width, self.height], dtype=float)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, symmetric and in [0, 1]."""
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # Areas from the same edge differences as the intersection, so iou(a, a) == 1 exactly.
    area_a = (a.right - a.left) * (a.bottom - a.top)
    area_b = (b.right - b.left) * (b.bottom - b.top)
    return min(1.0, inter / (area_a + area_b - inter))


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (n, 4) tlwh array."""
    if not boxes:
        return np.zeros((0, 4))
    return np.array([[b.left, b.top, b.width, b.height] for b in boxes], dtype=float)


def iou_matrix(a: Sequence[BoundingBox] | np.ndarray, b: Sequence[BoundingBox] | np.ndarray) -> np.ndarray:
    """Pairwise IoU between two box collections as an (len(a), len(b)) array.

    Entry-for-entry this matches :func:`iou`; the vectorized form keeps the
    per-frame association and evaluation loops cheap.
    """
    A = a if isinstance(a, np.ndarray) else boxes_to_array(a)
    B = b if isinstance(b, np.ndarray) else boxes_to_array(b)
    if len(A) == 0 or len(B) == 0:
        return np.zeros((len(A), len(B)))
    al, at = A[:, 0:1], A[:, 1:2]
    ar, ab = al + A[:, 2:3], at + A[:, 3:4]
    bl, bt = B[:, 0], B[:, 1]
    br, bb = bl + B[:, 2], bt + B[:, 3]
    iw = np.minimum(ar, br) - np.maximum(al, bl)
    ih = np.minimum(ab, bb) - np.maximum(at, bt)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = (ar - al) * (ab - at)
    area_b = (br - bl) * (bb - bt)
    union = area_a + area_b - inter
    return np.minimum(1.0, inter / union)


def as_feature(values: Sequence[float] | np.ndarray, dim: int | None = None) -> np.ndarray:
    """Validate and freeze a re-ID feature vector."""
    f = np.array(values, dtype=float)
    if f.ndim != 1:
        raise ValueError(f"feature must be one-dimensional, got shape {f.shape}")
    if dim is not None and f.shape[0] != dim:
        raise ValueError(f"feature dimension {f.shape[0]} != configured {dim}")
    if not np.all(np.isfinite(f)):
        raise ValueError("feature contains non-finite entries")
    f.setflags(write=False)
    return f


@dataclass(frozen=True, slots=True)
class Detection:
    rect: BoundingBox
    feature: np.ndarray
    score: float
    source: ModelTag

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True, slots=True)
class FrameDetections:
    frame_index: int
    detections: tuple[Detection, ...] = ()

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"frame index must be non-negative, got {self.frame_index}")


@dataclass(frozen=True, slots=True)
class TrackedBox:
    """One hypothesis box emitted by the tracker for a frame."""

    track_id: int
    box: BoundingBox
    score: float = 1.0


TrackedFrames = list[list[TrackedBox]]


@dataclass
class Track:
    """A trajectory: id, detected-box history, smoothed appearance, motion state.

    ``state`` holds the track's :class:`tsmot.motion.KalmanState`.
    """

    id: int
    boxes: dict[int, BoundingBox]
    feature: np.ndarray
    state: object
    status: Literal["active", "lost", "terminated"] = "active"
    frames_since_update: int = 0
    scores: dict[int, float] = field(default_factory=dict)

    def add_box(self, frame: int, box: BoundingBox) -> None:
        last = next(reversed(self.boxes), None)
        if last is not None and frame <= last:
            raise ValueError(f"track {self.id}: frame {frame} not after {last}")
        self.boxes[frame] = box

    def centers(self, last: int | None = None) -> tuple[list[int], list[tuple[float, float]]]:
        """Frame indices and box centers, optionally only the ``last`` entries."""
        frames = list(self.boxes)  # insertion order is frame order
        if last is not None:
            frames = frames[-last:]
        return frames, [self.boxes[f].center() for f in frames]
