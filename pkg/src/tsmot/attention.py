"""Object-center heatmaps, the keyframe attention snapshot, and its forward extrapolation."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import BoundingBox

Point = tuple[float, float]

# Splat window half-width in standard deviations; beyond it exp(-r^2/2) < 1e-13.
_WINDOW_SIGMAS = 8.0


@dataclass(frozen=True, slots=True)
class GridSpec:
    """Image extent in pixels and the heatmap stride."""

    width: float
    height: float
    cell_size: int = 4

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid extent must be positive")
        if self.cell_size < 1:
            raise ValueError("cell_size must be >= 1")

    @property
    def cols(self) -> int:
        return max(1, math.ceil(self.width / self.cell_size))

    @property
    def rows(self) -> int:
        return max(1, math.ceil(self.height / self.cell_size))

    def cell_of(self, point: Point) -> tuple[int, int]:
        """(col, row) of the cell containing ``point``, clamped onto the grid."""
        col = min(max(int(math.floor(point[0] / self.cell_size)), 0), self.cols - 1)
        row = min(max(int(math.floor(point[1] / self.cell_size)), 0), self.rows - 1)
        return col, row


@dataclass(frozen=True, eq=False)
class Heatmap:
    grid: np.ndarray  # rows x cols, values in [0, 1]
    cell_size: int = 4

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Heatmap):
            return NotImplemented
        return self.cell_size == other.cell_size and np.array_equal(self.grid, other.grid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def peak_cell(self) -> tuple[int, int]:
        """(col, row) of the maximum cell."""
        row, col = np.unravel_index(int(np.argmax(self.grid)), self.grid.shape)
        return int(col), int(row)


@dataclass(frozen=True, slots=True)
class AttentionObject:
    center: Point
    extent: BoundingBox
    velocity: Point  # pixels per frame
    track_id: int


@dataclass(frozen=True)
class AttentionSnapshot:
    keyframe_index: int
    heatmap: Heatmap
    objects: tuple[AttentionObject, ...]
    grid: GridSpec


def splat_sigma(extent: BoundingBox, cell_size: int) -> float:
    """Gaussian std in cells for an object of the given extent."""
    return max(1.0, min(extent.width, extent.height) / (8.0 * cell_size))


def render_heatmap(objects: Iterable[tuple[Point, BoundingBox]], grid: GridSpec) -> Heatmap:
    """Render unnormalized Gaussian splats, peak 1.0 at each object's center cell.

    Overlapping splats combine by elementwise max, so every cell stays in [0, 1].
    Centers off the grid are clamped to the nearest boundary cell.
    """
    out = np.zeros((grid.rows, grid.cols))
    for center, extent in objects:
        col, row = grid.cell_of(center)
        sigma = splat_sigma(extent, grid.cell_size)
        r = int(math.ceil(_WINDOW_SIGMAS * sigma))
        c0, c1 = max(0, col - r), min(grid.cols, col + r + 1)
        r0, r1 = max(0, row - r), min(grid.rows, row + r + 1)
        gx = np.exp(-((np.arange(c0, c1) - col) ** 2) / (2.0 * sigma * sigma))
        gy = np.exp(-((np.arange(r0, r1) - row) ** 2) / (2.0 * sigma * sigma))
        np.maximum(out[r0:r1, c0:c1], np.outer(gy, gx), out=out[r0:r1, c0:c1])
    out.setflags(write=False)
    return Heatmap(out, grid.cell_size)


def build_snapshot(keyframe_index: int, objects: Sequence[AttentionObject], grid: GridSpec) -> AttentionSnapshot:
    hm = render_heatmap(((o.center, o.extent) for o in objects), grid)
    return AttentionSnapshot(keyframe_index, hm, tuple(objects), grid)


def displaced_center(obj: AttentionObject, offset: int, grid: GridSpec) -> Point:
    """Constant-velocity position ``offset`` frames ahead, clamped to the image."""
    x = obj.center[0] + obj.velocity[0] * offset
    y = obj.center[1] + obj.velocity[1] * offset
    return (min(max(x, 0.0), grid.width), min(max(y, 0.0), grid.height))


def extrapolate_attention(snapshot: AttentionSnapshot, offset: int) -> Heatmap:
    """Keyframe attention moved ``offset`` frames forward.

    Objects are displaced along their velocities and re-rendered; extents are
    held constant. ``offset == 0`` returns the keyframe heatmap itself.
    """
    if offset < 0:
        raise ValueError(f"frame offset must be >= 0, got {offset}")
    if offset == 0:
        return snapshot.heatmap
    moved = ((displaced_center(o, offset, snapshot.grid), o.extent) for o in snapshot.objects)
    return render_heatmap(moved, snapshot.grid)


def attention_at(heatmap: Heatmap, point: Point) -> float:
    """Value of the cell containing ``point``; 0 outside the grid."""
    x, y = point
    if not (math.isfinite(x) and math.isfinite(y)) or x < 0 or y < 0:
        return 0.0
    col = int(x // heatmap.cell_size)
    row = int(y // heatmap.cell_size)
    rows, cols = heatmap.grid.shape
    if row >= rows or col >= cols:
        return 0.0
    return float(heatmap.grid[row, col])


def heatmap_to_csv(heatmap: Heatmap) -> str:
    """Dense row-major CSV dump, 6-decimal fixed point (debugging aid)."""
    buf = io.StringIO()
    for row in heatmap.grid:
        buf.write(",".join(f"{v:.6f}" for v in row))
        buf.write("\n")
    return buf.getvalue()


def heatmap_from_csv(text: str, cell_size: int = 4) -> Heatmap:
    rows = [[float(v) for v in line.split(",")] for line in text.splitlines() if line.strip()]
    grid = np.array(rows, dtype=float)
    grid.setflags(write=False)
    return Heatmap(grid, cell_size)
