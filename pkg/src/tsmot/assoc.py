"""Two-stage detection-to-track association and track lifecycle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Detection, FrameDetections, Track, TrackedBox, iou_matrix
from .motion import KalmanConfig, kalman_init, kalman_predict, kalman_update

# Cost assigned to forbidden pairs before solving.
FORBIDDEN = 1e6


@dataclass(frozen=True, slots=True)
class AssociationConfig:
    appearance_threshold: float = 0.4  # max cosine distance
    iou_threshold: float = 0.5
    max_age: int = 30
    feature_smoothing: float = 0.9  # EMA weight on the track's previous feature

    def __post_init__(self) -> None:
        for name in ("appearance_threshold", "iou_threshold", "feature_smoothing"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.max_age < 1:
            raise ValueError(f"max_age must be >= 1, got {self.max_age}")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"feature dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_distance_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """1 - cosine similarity for every row pair; zero rows give distance 1."""
    if len(A) == 0 or len(B) == 0:
        return np.zeros((len(A), len(B)))
    na = np.linalg.norm(A, axis=1, keepdims=True)
    nb = np.linalg.norm(B, axis=1, keepdims=True)
    An = np.divide(A, na, out=np.zeros_like(A), where=na > 0)
    Bn = np.divide(B, nb, out=np.zeros_like(B), where=nb > 0)
    return 1.0 - np.clip(An @ Bn.T, -1.0, 1.0)


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment of min(n, m) (row, col) pairs."""
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite; use a large sentinel for forbidden pairs")
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


def _gated_assignment(cost: np.ndarray, gate: float) -> list[tuple[int, int]]:
    masked = np.where(cost <= gate, cost, FORBIDDEN)
    return [(r, c) for r, c in hungarian(masked) if masked[r, c] < FORBIDDEN]


@dataclass
class AssociationResult:
    matches: list[tuple[int, int]]  # (track index, detection index)
    unmatched_tracks: list[int]
    unmatched_detections: list[int]


def associate(tracks: list[Track], detections: list[Detection] | tuple[Detection, ...],
              config: AssociationConfig, predicted=None) -> AssociationResult:
    """Appearance-first matching with an IoU confirmation, then IoU-only fallback.

    ``predicted`` holds each track's predicted box; by default it is read from
    the track's Kalman state.
    """
    nt, nd = len(tracks), len(detections)
    if nt == 0 or nd == 0:
        return AssociationResult([], list(range(nt)), list(range(nd)))
    if predicted is None:
        predicted = [t.state.box() for t in tracks]
    ious = iou_matrix(predicted, [d.rect for d in detections])
    app = cosine_distance_matrix(np.stack([t.feature for t in tracks]),
                                 np.stack([d.feature for d in detections]))

    matches: list[tuple[int, int]] = []
    for r, c in _gated_assignment(app, config.appearance_threshold):
        # Appearance proposes, IoU against the predicted box confirms.
        if ious[r, c] >= config.iou_threshold:
            matches.append((r, c))

    left_t = [i for i in range(nt) if i not in {m[0] for m in matches}]
    left_d = [j for j in range(nd) if j not in {m[1] for m in matches}]
    if left_t and left_d:
        sub = 1.0 - ious[np.ix_(left_t, left_d)]
        for r, c in _gated_assignment(sub, 1.0 - config.iou_threshold):
            matches.append((left_t[r], left_d[c]))

    matched_t = {m[0] for m in matches}
    matched_d = {m[1] for m in matches}
    return AssociationResult(
        sorted(matches),
        [i for i in range(nt) if i not in matched_t],
        [j for j in range(nd) if j not in matched_d],
    )


@dataclass
class TrackerState:
    config: AssociationConfig = field(default_factory=AssociationConfig)
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    tracks: list[Track] = field(default_factory=list)
    next_id: int = 1
    last_frame: int | None = None


def step_tracker(state: TrackerState, frame: FrameDetections) -> tuple[TrackerState, list[TrackedBox]]:
    """Advance the tracker by one frame.

    The state is updated in place and returned alongside the boxes emitted
    for this frame (matched and newly spawned tracks, ordered by id).
    """
    if state.last_frame is not None and frame.frame_index <= state.last_frame:
        raise ValueError(f"frame {frame.frame_index} is not after frame {state.last_frame}")
    state.last_frame = frame.frame_index
    cfg = state.config

    for t in state.tracks:
        t.state = kalman_predict(t.state, state.kalman)

    dets = frame.detections
    res = associate(state.tracks, dets, cfg)
    out: list[TrackedBox] = []
    alpha = cfg.feature_smoothing
    for ti, di in res.matches:
        t, d = state.tracks[ti], dets[di]
        t.state = kalman_update(t.state, d.rect, state.kalman)
        t.feature = alpha * t.feature + (1.0 - alpha) * np.asarray(d.feature, dtype=float)
        t.add_box(frame.frame_index, d.rect)
        t.scores[frame.frame_index] = d.score
        t.status = "active"
        t.frames_since_update = 0
        out.append(TrackedBox(t.id, d.rect, d.score))

    for ti in res.unmatched_tracks:
        t = state.tracks[ti]
        t.frames_since_update += 1
        t.status = "lost"
        if t.frames_since_update > cfg.max_age:
            t.status = "terminated"
    state.tracks = [t for t in state.tracks if t.status != "terminated"]

    for di in res.unmatched_detections:
        d = dets[di]
        t = Track(
            id=state.next_id,
            boxes={frame.frame_index: d.rect},
            feature=np.array(d.feature, dtype=float),
            state=kalman_init(d, state.kalman),
            scores={frame.frame_index: d.score},
        )
        state.next_id += 1
        state.tracks.append(t)
        out.append(TrackedBox(t.id, d.rect, d.score))

    out.sort(key=lambda b: b.track_id)
    return state, out
