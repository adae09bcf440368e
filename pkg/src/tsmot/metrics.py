"""CLEAR-MOT accounting (MOTA, FP, FN, IDSW) and IDF1."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assoc import FORBIDDEN, hungarian
from .core import BoundingBox, TrackedBox, TrackedFrames, iou_matrix
from .simworld import GroundTruthSequence


@dataclass
class MotReport:
    mota: float
    idf1: float
    fp: int
    fn: int
    idsw: int
    gt_total: int
    matches: int = 0
    per_frame_fp: list[int] = field(default_factory=list)
    per_frame_fn: list[int] = field(default_factory=list)
    per_frame_idsw: list[int] = field(default_factory=list)
    fps_simulated: float | None = None

    def __post_init__(self) -> None:
        if self.gt_total > 0:
            expected = 1.0 - (self.fp + self.fn + self.idsw) / self.gt_total
            assert self.mota == expected, "MOTA inconsistent with its counters"


def _check_inputs(gt: GroundTruthSequence, hyp: TrackedFrames) -> None:
    if gt.total_boxes == 0:
        raise ValueError("ground truth is empty; MOTA is undefined")
    if len(hyp) != len(gt.frames):
        raise ValueError(f"hypothesis covers {len(hyp)} frames, ground truth {len(gt.frames)}")


def _frame_arrays(gt_frame, hyp_frame):
    g_ids = [o.object_id for o in gt_frame]
    h_ids = [h.track_id for h in hyp_frame]
    ious = iou_matrix([o.box for o in gt_frame], [h.box for h in hyp_frame])
    return g_ids, h_ids, ious


def clear_mot(gt: GroundTruthSequence, hyp: TrackedFrames, iou_gate: float = 0.5) -> MotReport:
    """Frame-by-frame CLEAR protocol with correspondence persistence.

    A ground-truth object keeps its last matched hypothesis while the two
    still overlap by at least ``iou_gate``; the rest are matched by Hungarian
    on 1 - IoU. An identity switch is counted when an object is matched to a
    hypothesis id different from the one it was last matched to.
    """
    _check_inputs(gt, hyp)
    last_match: dict[int, int] = {}
    fp = fn = idsw = matches = 0
    pf_fp, pf_fn, pf_sw = [], [], []
    for gt_frame, hyp_frame in zip(gt.frames, hyp):
        g_ids, h_ids, ious = _frame_arrays(gt_frame, hyp_frame)
        g_index = {g: i for i, g in enumerate(g_ids)}
        h_index = {h: j for j, h in enumerate(h_ids)}
        pairs: list[tuple[int, int]] = []
        used_g: set[int] = set()
        used_h: set[int] = set()
        for g, h in last_match.items():
            i, j = g_index.get(g), h_index.get(h)
            if i is None or j is None or j in used_h:
                continue
            if ious[i, j] >= iou_gate:
                pairs.append((i, j))
                used_g.add(i)
                used_h.add(j)
        rest_g = [i for i in range(len(g_ids)) if i not in used_g]
        rest_h = [j for j in range(len(h_ids)) if j not in used_h]
        switches = 0
        if rest_g and rest_h:
            sub = ious[np.ix_(rest_g, rest_h)]
            cost = np.where(sub >= iou_gate, 1.0 - sub, FORBIDDEN)
            for r, c in hungarian(cost):
                if cost[r, c] >= FORBIDDEN:
                    continue
                i, j = rest_g[r], rest_h[c]
                g, h = g_ids[i], h_ids[j]
                if g in last_match and last_match[g] != h:
                    switches += 1
                pairs.append((i, j))
        for i, j in pairs:
            last_match[g_ids[i]] = h_ids[j]
        n_fp = len(h_ids) - len(pairs)
        n_fn = len(g_ids) - len(pairs)
        fp += n_fp
        fn += n_fn
        idsw += switches
        matches += len(pairs)
        pf_fp.append(n_fp)
        pf_fn.append(n_fn)
        pf_sw.append(switches)
    gt_total = gt.total_boxes
    mota = 1.0 - (fp + fn + idsw) / gt_total
    return MotReport(mota, float("nan"), fp, fn, idsw, gt_total, matches, pf_fp, pf_fn, pf_sw)


def idf1(gt: GroundTruthSequence, hyp: TrackedFrames, iou_gate: float = 0.5) -> float:
    """Identity F1 from the global gt-id to hyp-id matching that maximizes IDTP."""
    _check_inputs(gt, hyp)
    g_all = sorted({o.object_id for f in gt.frames for o in f})
    h_all = sorted({h.track_id for f in hyp for h in f})
    n_gt = gt.total_boxes
    n_hyp = sum(len(f) for f in hyp)
    if not h_all:
        return 0.0
    gi = {g: i for i, g in enumerate(g_all)}
    hi = {h: j for j, h in enumerate(h_all)}
    overlap = np.zeros((len(g_all), len(h_all)))
    for gt_frame, hyp_frame in zip(gt.frames, hyp):
        if not gt_frame or not hyp_frame:
            continue
        g_ids, h_ids, ious = _frame_arrays(gt_frame, hyp_frame)
        rows, cols = np.nonzero(ious >= iou_gate)
        for r, c in zip(rows, cols):
            overlap[gi[g_ids[r]], hi[h_ids[c]]] += 1
    idtp = sum(overlap[r, c] for r, c in hungarian(-overlap))
    idfp = n_hyp - idtp
    idfn = n_gt - idtp
    return float(2 * idtp / (2 * idtp + idfp + idfn))


def evaluate(gt: GroundTruthSequence, hyp: TrackedFrames, iou_gate: float = 0.5,
             fps_simulated: float | None = None) -> MotReport:
    rep = clear_mot(gt, hyp, iou_gate)
    rep.idf1 = idf1(gt, hyp, iou_gate)
    rep.fps_simulated = fps_simulated
    return rep


def ground_truth_as_hypothesis(gt: GroundTruthSequence) -> TrackedFrames:
    return [[TrackedBox(o.object_id, o.box) for o in frame] for frame in gt.frames]
