"""MOTChallenge text format: ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z``.

Frames are 1-based in files and 0-based in memory. Numbers are written in a
canonical form: integral values without a decimal point, others as the
shortest repr that round-trips, so canonical files survive parse/format
byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .core import DEFAULT_FEATURE_DIM, BoundingBox, TrackedBox, TrackedFrames
from .rng import keyed_rng
from .simworld import GroundTruthSequence, GtObject, random_unit

N_FIELDS = 10
MIN_FIELDS = 6


class MotFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, slots=True)
class MotRecord:
    frame: int  # 1-based
    id: int
    left: float
    top: float
    width: float
    height: float
    conf: float = 1.0
    x: float = -1.0
    y: float = -1.0
    z: float = -1.0


def fmt_number(v: float) -> str:
    if math.isfinite(v) and float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def format_record(r: MotRecord) -> str:
    return ",".join([str(r.frame), str(r.id)] + [fmt_number(v) for v in (
        r.left, r.top, r.width, r.height, r.conf, r.x, r.y, r.z)])


def _int_field(tok: str, name: str, lineno: int) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise MotFormatError(lineno, f"{name} is not a number: {tok!r}") from None
    if not v.is_integer():
        raise MotFormatError(lineno, f"{name} must be an integer, got {tok!r}")
    return int(v)


def parse_line(line: str, lineno: int) -> MotRecord:
    toks = [t.strip() for t in line.strip().split(",")]
    if not MIN_FIELDS <= len(toks) <= N_FIELDS:
        raise MotFormatError(lineno, f"expected {MIN_FIELDS}-{N_FIELDS} comma-separated fields, got {len(toks)}")
    frame = _int_field(toks[0], "frame", lineno)
    oid = _int_field(toks[1], "id", lineno)
    if frame < 1:
        raise MotFormatError(lineno, f"frame index must be >= 1, got {frame}")
    vals = []
    for name, tok in zip(("bb_left", "bb_top", "bb_width", "bb_height", "conf", "x", "y", "z"), toks[2:]):
        try:
            v = float(tok)
        except ValueError:
            raise MotFormatError(lineno, f"{name} is not a number: {tok!r}") from None
        if not math.isfinite(v):
            raise MotFormatError(lineno, f"{name} is not finite: {tok!r}")
        vals.append(v)
    vals += [1.0, -1.0, -1.0, -1.0][len(vals) - 4:]
    for name, v, tok in (("bb_width", vals[2], toks[4]), ("bb_height", vals[3], toks[5])):
        if v <= 0:
            raise MotFormatError(lineno, f"{name} must be positive, got {tok}")
    return MotRecord(frame, oid, *vals)


def parse_mot_lines(text: str | Iterable[str]) -> list[MotRecord]:
    lines = text.splitlines() if isinstance(text, str) else text
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        out.append(parse_line(line, lineno))
    return out


def format_mot_lines(records: Iterable[MotRecord]) -> str:
    return "".join(format_record(r) + "\n" for r in records)


def identity_embedding(object_id: int, dim: int = DEFAULT_FEATURE_DIM, seed: int = 0) -> np.ndarray:
    """Deterministic unit-norm latent embedding for a file-supplied identity."""
    return random_unit(keyed_rng(seed, "identity", 0, object_id), dim)


def load_mot_ground_truth(stream: str | TextIO, *, feature_dim: int = DEFAULT_FEATURE_DIM,
                          embedding_seed: int = 0, occlusion_rate: float = 0.0,
                          width: float | None = None, height: float | None = None) -> GroundTruthSequence:
    """Read a ground-truth file into a sequence.

    Latent embeddings are synthesized per id. Occlusion flags are drawn per
    (frame, id) at ``occlusion_rate`` since files carry no such column.
    """
    text = stream if isinstance(stream, str) else stream.read()
    records = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        r = parse_line(line, lineno)
        if (r.frame, r.id) in seen:
            raise MotFormatError(lineno, f"duplicate id {r.id} in frame {r.frame} (first at line {seen[(r.frame, r.id)]})")
        seen[(r.frame, r.id)] = lineno
        records.append(r)
    if not records:
        return GroundTruthSequence([], width or 1.0, height or 1.0)
    n_frames = max(r.frame for r in records)
    frames: list[list[GtObject]] = [[] for _ in range(n_frames)]
    embs: dict[int, np.ndarray] = {}
    for r in records:
        if r.id not in embs:
            embs[r.id] = identity_embedding(r.id, feature_dim, embedding_seed)
        occluded = False
        if occlusion_rate > 0:
            occluded = bool(keyed_rng(embedding_seed, "occlusion", r.frame, r.id).random() < occlusion_rate)
        frames[r.frame - 1].append(GtObject(
            r.id, BoundingBox(r.left, r.top, r.width, r.height), embs[r.id], occluded,
            (r.conf, r.x, r.y, r.z)))
    W = width if width is not None else max(r.left + r.width for r in records)
    H = height if height is not None else max(r.top + r.height for r in records)
    return GroundTruthSequence(frames, W, H)


def ground_truth_records(seq: GroundTruthSequence) -> list[MotRecord]:
    out = []
    for t, frame in enumerate(seq.frames):
        for o in frame:
            b = o.box
            out.append(MotRecord(t + 1, o.object_id, b.left, b.top, b.width, b.height, *o.mot_tail))
    return out


def save_mot_ground_truth(seq: GroundTruthSequence) -> str:
    return format_mot_lines(ground_truth_records(seq))


def result_records(tracked: TrackedFrames) -> list[MotRecord]:
    out = []
    for t, frame in enumerate(tracked):
        for tb in frame:
            b = tb.box
            out.append(MotRecord(t + 1, tb.track_id, b.left, b.top, b.width, b.height, tb.score))
    return out


def save_mot_results(tracked: TrackedFrames) -> str:
    """Tracker output as MOTChallenge result lines (conf = detection score)."""
    return format_mot_lines(result_records(tracked))


def load_mot_results(stream: str | TextIO, n_frames: int | None = None) -> TrackedFrames:
    text = stream if isinstance(stream, str) else stream.read()
    records = parse_mot_lines(text)
    total = max([r.frame for r in records], default=0)
    if n_frames is not None:
        if total > n_frames:
            raise ValueError(f"results reference frame {total} beyond sequence length {n_frames}")
        total = n_frames
    frames: TrackedFrames = [[] for _ in range(total)]
    for r in records:
        frames[r.frame - 1].append(TrackedBox(r.id, BoundingBox(r.left, r.top, r.width, r.height),
                                              min(max(r.conf, 0.0), 1.0)))
    return frames
