"""Keyframe policies and the interleaved teacher/student tracking pipeline."""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from .align import AlignmentMap, PivotMap, apply_alignment, fit_alignment, fit_pivots, pivot_project
from .assoc import AssociationConfig, TrackerState, hungarian, step_tracker
from .attention import (AttentionObject, AttentionSnapshot, GridSpec, Heatmap, build_snapshot,
                        extrapolate_attention)
from .core import Detection, FrameDetections, TrackedFrames, iou_matrix
from .motfile import save_mot_results
from .motion import KalmanConfig, estimate_velocity
from .simworld import DetectorProfile, GroundTruthSequence, GtObject, detect

ModelChoice = Literal["teacher", "student"]
AlignmentMode = Literal["off", "on", "efm"]

# Minimum IoU between a detection and a ground-truth box for calibration pairing.
PAIRING_IOU = 0.7


class PolicyKind(str, enum.Enum):
    TEACHER_ONLY = "TeacherOnly"
    STUDENT_ONLY = "StudentOnly"
    NAIVE_MIX = "NaiveMix"
    ATTTRACK_NO_UPDATE = "AttTrackNoUpdate"
    ATTTRACK = "AttTrack"

    @property
    def interleaved(self) -> bool:
        return self not in (PolicyKind.TEACHER_ONLY, PolicyKind.STUDENT_ONLY)

    @property
    def uses_attention(self) -> bool:
        return self in (PolicyKind.ATTTRACK, PolicyKind.ATTTRACK_NO_UPDATE)


@dataclass(frozen=True, slots=True)
class SchedulerPolicy:
    kind: PolicyKind
    K: int = 1
    alignment: AlignmentMode = "off"

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.alignment not in ("off", "on", "efm"):
            raise ValueError(f"alignment must be off, on or efm, got {self.alignment!r}")


def plan(policy: SchedulerPolicy, frame_index: int) -> ModelChoice:
    if frame_index < 0:
        raise ValueError("frame_index must be >= 0")
    if policy.kind is PolicyKind.TEACHER_ONLY:
        return "teacher"
    if policy.kind is PolicyKind.STUDENT_ONLY:
        return "student"
    return "teacher" if frame_index % policy.K == 0 else "student"


def simulated_throughput(cost_teacher: float, cost_student: float, K: int) -> float:
    """Frames per second when one teacher frame is followed by K-1 student frames (costs in ms)."""
    if cost_teacher <= 0 or cost_student <= 0:
        raise ValueError("costs must be positive")
    if K < 1:
        raise ValueError("K must be >= 1")
    return 1000.0 * K / (cost_teacher + (K - 1) * cost_student)


@dataclass(eq=False)
class PipelineResult:
    frames: TrackedFrames
    choices: list[ModelChoice]
    elapsed_ms: float
    wall_ms: float
    alignment_map: AlignmentMap | None = None
    pivots: PivotMap | None = None
    calibration_keyframes: list[int] = field(default_factory=list)

    @property
    def fps_simulated(self) -> float:
        return 1000.0 * len(self.frames) / self.elapsed_ms if self.elapsed_ms > 0 else float("inf")

    def mot_text(self) -> str:
        return save_mot_results(self.frames)

    def timing(self) -> dict:
        return {
            "frames": len(self.frames),
            "teacher_frames": self.choices.count("teacher"),
            "student_frames": self.choices.count("student"),
            "elapsed_ms_simulated": self.elapsed_ms,
            "fps_simulated": self.fps_simulated,
            "wall_ms": self.wall_ms,
        }


def export_pipeline_result(result: PipelineResult, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.txt`` (MOTChallenge results) and ``<stem>.timing.json``."""
    stem = Path(stem)
    mot = stem.with_name(stem.name + ".txt")
    side = stem.with_name(stem.name + ".timing.json")
    mot.write_text(result.mot_text())
    side.write_text(json.dumps(result.timing(), indent=2, sort_keys=True) + "\n")
    return mot, side


def match_to_ground_truth(objects: list[GtObject], dets: tuple[Detection, ...],
                          min_iou: float = PAIRING_IOU) -> dict[int, Detection]:
    """One-to-one detection assignment to ground-truth ids by IoU."""
    if not objects or not dets:
        return {}
    ious = iou_matrix([o.box for o in objects], [d.rect for d in dets])
    out = {}
    for r, c in hungarian(1.0 - ious):
        if ious[r, c] > min_iou:
            out[objects[r].object_id] = dets[c]
    return out


def calibration_pairs(gt: GroundTruthSequence, teacher: DetectorProfile, student: DetectorProfile,
                      frames: list[int], seed: int) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """(gt id, student feature, teacher feature) for objects both models detect on ``frames``."""
    arena = (gt.width, gt.height)
    out = []
    for t in frames:
        objs = gt.frames[t]
        td = match_to_ground_truth(objs, detect(teacher, objs, t, seed=seed, arena=arena).detections)
        sd = match_to_ground_truth(objs, detect(student, objs, t, seed=seed, arena=arena).detections)
        for oid in sorted(td.keys() & sd.keys()):
            out.append((oid, np.asarray(sd[oid].feature), np.asarray(td[oid].feature)))
    return out


FeatureMapper = Callable[[ModelChoice, np.ndarray], np.ndarray]


def _calibrate(gt, policy, teacher, student, seed):
    """Fit the cross-model feature mapping on the leading keyframes.

    Starts with ceil(d / objects-per-frame) + 2 keyframes and extends the set
    if that yields too few or degenerate pairs.
    """
    keyframes = list(range(0, len(gt.frames), policy.K))
    dim = len(next(o.embedding for f in gt.frames for o in f))
    n = math.ceil(dim / max(1.0, gt.mean_objects_per_frame())) + 2
    pairs: list = []
    used = 0
    last_err: Exception | None = None
    while used < len(keyframes):
        take = keyframes[used:max(n, used + 1)]
        pairs += calibration_pairs(gt, teacher, student, take, seed)
        used += len(take)
        n = used + 1
        try:
            if policy.alignment == "on":
                return fit_alignment([(s, t) for _, s, t in pairs]), None, keyframes[:used]
            labeled = [(oid, "student", s) for oid, s, _ in pairs] + [(oid, "teacher", t) for oid, _, t in pairs]
            if len({oid for oid, _, _ in pairs}) >= 2:
                return None, fit_pivots(labeled), keyframes[:used]
        except ValueError as exc:
            last_err = exc
    raise ValueError(f"feature alignment could not be calibrated from {used} keyframes: {last_err}")


def run_pipeline(gt: GroundTruthSequence, policy: SchedulerPolicy, teacher: DetectorProfile,
                 student: DetectorProfile, assoc: AssociationConfig = AssociationConfig(), *,
                 seed: int = 0, cell_size: int = 4, velocity_window: int = 3,
                 kalman: KalmanConfig = KalmanConfig()) -> PipelineResult:
    """Track ``gt`` with detections from the model chosen per frame by ``policy``.

    Teacher frames refresh the attention snapshot; student frames receive the
    extrapolated snapshot (AttTrack), the stale keyframe heatmap
    (AttTrackNoUpdate) or nothing. All detections feed one tracker.
    """
    if not gt.frames:
        raise ValueError("ground truth sequence has no frames")
    wall0 = time.perf_counter()
    grid = GridSpec(gt.width, gt.height, cell_size)
    arena = (gt.width, gt.height)
    profiles = {"teacher": teacher, "student": student}

    amap = pivots = None
    cal_frames: list[int] = []
    mixed = policy.kind.interleaved and policy.K > 1
    if mixed and policy.alignment != "off":
        amap, pivots, cal_frames = _calibrate(gt, policy, teacher, student, seed)

    def map_feature(model: ModelChoice, f: np.ndarray) -> np.ndarray:
        if amap is not None and model == "student":
            return apply_alignment(amap, f)
        if pivots is not None:
            return pivot_project(pivots, model, f)
        return f

    state = TrackerState(config=assoc, kalman=kalman)
    snapshot: AttentionSnapshot | None = None
    frames: TrackedFrames = []
    choices: list[ModelChoice] = []
    elapsed = 0.0
    for t, objs in enumerate(gt.frames):
        model = plan(policy, t)
        attention: Heatmap | None = None
        if model == "student" and snapshot is not None:
            if policy.kind is PolicyKind.ATTTRACK:
                attention = extrapolate_attention(snapshot, t - snapshot.keyframe_index)
            elif policy.kind is PolicyKind.ATTTRACK_NO_UPDATE:
                attention = snapshot.heatmap
        fd = detect(profiles[model], objs, t, seed=seed, arena=arena, attention=attention)
        if amap is not None or pivots is not None:
            fd = FrameDetections(t, tuple(
                Detection(d.rect, map_feature(model, np.asarray(d.feature)), d.score, d.source)
                for d in fd.detections))
        state, boxes = step_tracker(state, fd)
        if model == "teacher" and policy.kind.uses_attention:
            by_id = {tr.id: tr for tr in state.tracks}
            objects = []
            for tb in boxes:
                fr, centers = by_id[tb.track_id].centers(last=velocity_window)
                objects.append(AttentionObject(tb.box.center(), tb.box,
                                               estimate_velocity(fr, centers, velocity_window), tb.track_id))
            snapshot = build_snapshot(t, objects, grid)
        frames.append(boxes)
        choices.append(model)
        elapsed += profiles[model].cost_per_frame
    wall = (time.perf_counter() - wall0) * 1000.0
    return PipelineResult(frames, choices, elapsed, wall, amap, pivots, cal_frames)
