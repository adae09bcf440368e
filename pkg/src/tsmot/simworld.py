"""Synthetic ground truth and parametric teacher/student detector simulation.

Detectors are not neural networks here. A :class:`DetectorProfile` states how
well a model sees (recall, occluded recall, clutter, localization noise), how
it embeds identities (a linear transform of each object's latent embedding plus
noise) and what it costs per frame.

Attention fusion is modeled by its effect. The teacher's extrapolated
attention raises the student's chance of detecting an object:

    p = clamp(recall(o) + attention_gain * attention_at(heatmap, center(o)), 0, 1)

Keep decisions compare ``p`` against a uniform draw keyed by
(seed, model, frame, object), so the draws are identical with and without
attention. Only the threshold moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .attention import Heatmap, attention_at
from .core import DEFAULT_FEATURE_DIM, BoundingBox, Detection, FrameDetections, ModelTag
from .rng import CLUTTER_SLOT, keyed_rng


@dataclass(frozen=True)
class WorldConfig:
    width: float = 1088.0
    height: float = 608.0
    n_objects: int = 20
    frames: int = 600
    speed_range: tuple[float, float] = (0.5, 3.0)  # pixels per frame
    accel_std: float = 0.05
    birth_rate: float = 0.04
    death_rate: float = 0.002
    occlusion_rate: float = 0.25
    box_width_range: tuple[float, float] = (24.0, 48.0)
    aspect: float = 0.41  # width / height
    feature_dim: int = DEFAULT_FEATURE_DIM
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("birth_rate", "death_rate", "occlusion_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("arena must have positive extent")
        lo, hi = self.speed_range
        if lo < 0 or hi < lo:
            raise ValueError(f"speed_range must satisfy 0 <= lo <= hi, got {self.speed_range}")
        wlo, whi = self.box_width_range
        if wlo <= 0 or whi < wlo:
            raise ValueError(f"box_width_range must satisfy 0 < lo <= hi, got {self.box_width_range}")
        if whi >= self.width or whi / self.aspect >= self.height:
            raise ValueError("boxes do not fit in the arena")
        if self.n_objects < 0 or self.frames < 1 or self.feature_dim < 1:
            raise ValueError("n_objects >= 0, frames >= 1 and feature_dim >= 1 required")
        if self.accel_std < 0 or self.aspect <= 0:
            raise ValueError("accel_std must be >= 0 and aspect > 0")


@dataclass(frozen=True, eq=False)
class GtObject:
    object_id: int
    box: BoundingBox
    embedding: np.ndarray
    occluded: bool = False
    # conf, x, y, z columns of a MOTChallenge line, kept for faithful re-export.
    mot_tail: tuple[float, float, float, float] = (1.0, -1.0, -1.0, -1.0)


@dataclass(eq=False)
class GroundTruthSequence:
    frames: list[list[GtObject]]
    width: float
    height: float

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def total_boxes(self) -> int:
        return sum(len(f) for f in self.frames)

    def mean_objects_per_frame(self) -> float:
        return self.total_boxes / len(self.frames) if self.frames else 0.0


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.eye(dim)[0]


def generate_world(config: WorldConfig) -> GroundTruthSequence:
    """Constant-velocity objects with small acceleration noise, reflecting at the walls."""
    root = np.random.SeedSequence(config.seed)
    motion_ss, occl_ss = root.spawn(2)
    rng = np.random.default_rng(motion_ss)
    occl = np.random.default_rng(occl_ss)
    W, H = config.width, config.height
    next_id = 1
    alive: list[dict] = []

    def spawn() -> dict:
        nonlocal next_id
        w = rng.uniform(*config.box_width_range)
        h = w / config.aspect
        cx = rng.uniform(w / 2, W - w / 2)
        cy = rng.uniform(h / 2, H - h / 2)
        speed = rng.uniform(*config.speed_range)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        obj = {"id": next_id, "cx": cx, "cy": cy, "w": w, "h": h,
               "vx": speed * math.cos(ang), "vy": speed * math.sin(ang),
               "emb": random_unit(rng, config.feature_dim)}
        next_id += 1
        return obj

    for _ in range(config.n_objects):
        alive.append(spawn())

    frames: list[list[GtObject]] = []
    for t in range(config.frames):
        if t > 0:
            survivors = []
            for o in alive:
                if rng.random() < config.death_rate:
                    continue
                if config.accel_std > 0:
                    o["vx"] += rng.normal(0.0, config.accel_std)
                    o["vy"] += rng.normal(0.0, config.accel_std)
                o["cx"], o["vx"] = _reflect(o["cx"] + o["vx"], o["vx"], o["w"] / 2, W - o["w"] / 2)
                o["cy"], o["vy"] = _reflect(o["cy"] + o["vy"], o["vy"], o["h"] / 2, H - o["h"] / 2)
                survivors.append(o)
            alive = survivors
            if rng.random() < config.birth_rate:
                alive.append(spawn())
        frame = []
        for o in alive:
            box = BoundingBox(o["cx"] - o["w"] / 2, o["cy"] - o["h"] / 2, o["w"], o["h"])
            frame.append(GtObject(o["id"], box, o["emb"], bool(occl.random() < config.occlusion_rate)))
        frames.append(frame)
    return GroundTruthSequence(frames, W, H)


def _reflect(pos: float, vel: float, lo: float, hi: float) -> tuple[float, float]:
    if pos < lo:
        return min(2 * lo - pos, hi), abs(vel)
    if pos > hi:
        return max(2 * hi - pos, lo), -abs(vel)
    return pos, vel


def rotation_transform(dim: int, angle: float, seed: int = 0) -> np.ndarray:
    """Orthogonal map rotating every vector by ``angle`` radians.

    Built from planar rotations in a seeded random orthonormal basis, so that
    cos(x, Rx) = cos(angle) for all x when ``dim`` is even.
    """
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    B = np.eye(dim)
    c, s = math.cos(angle), math.sin(angle)
    for k in range(0, dim - 1, 2):
        B[k:k + 2, k:k + 2] = [[c, -s], [s, c]]
    return Q @ B @ Q.T


@dataclass(frozen=True, eq=False)
class DetectorProfile:
    name: ModelTag
    base_recall: float
    occluded_recall: float
    clutter_rate: float
    localization_std: float
    cost_per_frame: float  # milliseconds
    attention_gain: float = 0.0
    feature_transform: np.ndarray | None = None  # None means identity
    feature_noise: float = 0.0
    clutter_width_range: tuple[float, float] = (20.0, 60.0)

    def __post_init__(self) -> None:
        for nm in ("base_recall", "occluded_recall", "attention_gain"):
            v = getattr(self, nm)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{nm} must lie in [0, 1], got {v}")
        if self.occluded_recall > self.base_recall:
            raise ValueError("occluded_recall must not exceed base_recall")
        if self.cost_per_frame <= 0:
            raise ValueError("cost_per_frame must be > 0")
        if self.clutter_rate < 0 or self.localization_std < 0 or self.feature_noise < 0:
            raise ValueError("clutter_rate, localization_std and feature_noise must be >= 0")
        T = self.feature_transform
        if T is not None and (T.ndim != 2 or T.shape[0] != T.shape[1] or not np.all(np.isfinite(T))):
            raise ValueError(f"feature_transform must be a finite square matrix, got shape {T.shape}")

    def keep_probability(self, occluded: bool, attention: float = 0.0) -> float:
        recall = self.occluded_recall if occluded else self.base_recall
        return min(max(recall + self.attention_gain * attention, 0.0), 1.0)

    def observe(self, embedding: np.ndarray, noise: np.ndarray) -> np.ndarray:
        f = embedding if self.feature_transform is None else self.feature_transform @ embedding
        return f + self.feature_noise * noise


# Streams within one (seed, model, frame, object) address.
_KEEP_STREAM = 0


def detect(profile: DetectorProfile, objects: Sequence[GtObject], frame_index: int, *,
           seed: int, arena: tuple[float, float], attention: Heatmap | None = None) -> FrameDetections:
    """Simulated detector output for one frame of ground truth."""
    dim = len(objects[0].embedding) if objects else _clutter_dim(profile)
    dets: list[Detection] = []
    for o in objects:
        rng = keyed_rng(seed, profile.name, frame_index, o.object_id, _KEEP_STREAM)
        u = rng.random()
        jitter = rng.standard_normal(4)
        noise = rng.standard_normal(len(o.embedding))
        a = attention_at(attention, o.box.center()) if attention is not None else 0.0
        p = profile.keep_probability(o.occluded, a)
        if not u < p:
            continue
        dets.append(Detection(_jitter_box(o.box, jitter, profile.localization_std),
                              profile.observe(o.embedding, noise), p, profile.name))
    dets.extend(_clutter(profile, frame_index, seed, arena, dim))
    return FrameDetections(frame_index, tuple(dets))


def _clutter_dim(profile: DetectorProfile) -> int:
    T = profile.feature_transform
    return T.shape[0] if T is not None else DEFAULT_FEATURE_DIM


def _jitter_box(box: BoundingBox, z: np.ndarray, std: float) -> BoundingBox:
    if std == 0.0:
        return box
    dw = 0.5 * std * z[2]
    dh = 0.5 * std * z[3]
    w = max(1.0, box.width + dw)
    h = max(1.0, box.height + dh)
    # Center shifts by std * z[:2]; the size change is applied about the center.
    left = box.left + std * z[0] - (w - box.width) / 2
    top = box.top + std * z[1] - (h - box.height) / 2
    return BoundingBox(left, top, w, h)


def _clutter(profile: DetectorProfile, frame_index: int, seed: int,
             arena: tuple[float, float], dim: int) -> list[Detection]:
    if profile.clutter_rate <= 0:
        return []
    rng = keyed_rng(seed, profile.name, frame_index, CLUTTER_SLOT)
    W, H = arena
    out = []
    for _ in range(int(rng.poisson(profile.clutter_rate))):
        w = rng.uniform(*profile.clutter_width_range)
        h = w / 0.41
        cx, cy = rng.uniform(0, W), rng.uniform(0, H)
        out.append(Detection(BoundingBox.from_center(cx, cy, w, h), random_unit(rng, dim),
                             float(rng.uniform(0.05, 0.6)), profile.name))
    return out
