"""Cross-model re-ID feature alignment and loss arithmetic.

Two ways to close the gap between the teacher's and the student's feature
domains, both fitted in closed form from paired keyframe detections:

* an affine map from student features onto teacher features (least squares);
* per-identity pivot centroids in each domain, onto which any feature is
  projected as a vector of cosine similarities, making the representation
  domain independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .assoc import cosine_distance_matrix


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AlignmentMap:
    matrix: np.ndarray  # d x d
    bias: np.ndarray  # d
    fit_residual: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "matrix": self.matrix.tolist(),
            "bias": self.bias.tolist(),
            "fit_residual": self.fit_residual,
        })

    @classmethod
    def from_json(cls, text: str) -> AlignmentMap:
        doc = json.loads(text)
        m = np.array(doc["matrix"], dtype=float)
        b = np.array(doc["bias"], dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or b.shape != (m.shape[0],):
            raise ValueError(f"inconsistent alignment map shapes {m.shape}, {b.shape}")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
            raise ValueError("alignment map has non-finite entries")
        return cls(m, b, float(doc["fit_residual"]))

    @classmethod
    def identity(cls, dim: int) -> AlignmentMap:
        return cls(np.eye(dim), np.zeros(dim), 0.0)


def fit_alignment(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> AlignmentMap:
    """Least-squares affine map M, b minimizing sum ||M fs + b - ft||^2."""
    if not pairs:
        raise ValueError("no feature pairs to fit")
    S = np.array([p[0] for p in pairs], dtype=float)
    T = np.array([p[1] for p in pairs], dtype=float)
    n, d = S.shape
    if T.shape != (n, d):
        raise ValueError(f"teacher features shape {T.shape} does not match student {S.shape}")
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} pairs for a {d}-dim affine fit, got {n}")
    X = np.hstack([S, np.ones((n, 1))])
    rank = int(np.linalg.matrix_rank(X))
    if rank < d + 1:
        raise RankDeficientError(
            f"student feature samples are rank deficient: rank {rank} < {d + 1} (features plus bias)")
    W, *_ = np.linalg.lstsq(X, T, rcond=None)
    resid = X @ W - T
    rms = math.sqrt(float(np.sum(resid**2)) / n)
    return AlignmentMap(W[:d].T.copy(), W[d].copy(), rms)


def apply_alignment(amap: AlignmentMap, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (amap.dim,):
        raise ValueError(f"feature dimension {f.shape} does not match map dimension {amap.dim}")
    return amap.matrix @ f + amap.bias


def alignment_residual(amap: AlignmentMap, pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """RMS error of ``amap`` on arbitrary (e.g. held-out) pairs."""
    S = np.array([p[0] for p in pairs], dtype=float)
    T = np.array([p[1] for p in pairs], dtype=float)
    resid = S @ amap.matrix.T + amap.bias - T
    return math.sqrt(float(np.sum(resid**2)) / len(pairs))


@dataclass(frozen=True, eq=False)
class PivotMap:
    identities: tuple[Hashable, ...]
    pivots: dict[str, np.ndarray]  # domain -> (n_identities, d) centroids

    @property
    def n_identities(self) -> int:
        return len(self.identities)


def fit_pivots(labeled: Iterable[tuple[Hashable, str, np.ndarray]]) -> PivotMap:
    """Per-identity, per-domain centroids of labeled features."""
    sums: dict[tuple[Hashable, str], np.ndarray] = {}
    counts: dict[tuple[Hashable, str], int] = {}
    for ident, domain, f in labeled:
        key = (ident, domain)
        f = np.asarray(f, dtype=float)
        sums[key] = sums[key] + f if key in sums else f.copy()
        counts[key] = counts.get(key, 0) + 1
    if not sums:
        raise ValueError("no labeled features")
    identities = tuple(sorted({k[0] for k in sums}, key=repr))
    domains = sorted({k[1] for k in sums})
    pivots = {}
    for dom in domains:
        missing = [i for i in identities if (i, dom) not in sums]
        if missing:
            raise ValueError(f"identities {missing!r} have no samples in domain {dom!r}")
        pivots[dom] = np.stack([sums[(i, dom)] / counts[(i, dom)] for i in identities])
    return PivotMap(identities, pivots)


def pivot_project(pm: PivotMap, domain: str, f: np.ndarray) -> np.ndarray:
    """Cosine similarity of ``f`` to each identity pivot of ``domain``."""
    if domain not in pm.pivots:
        raise KeyError(f"unknown domain {domain!r}; have {sorted(pm.pivots)}")
    f = np.asarray(f, dtype=float)[None, :]
    return 1.0 - cosine_distance_matrix(f, pm.pivots[domain])[0]


@dataclass(frozen=True, slots=True)
class LossComponents:
    heatmap_loss: float
    box_loss: float
    identity_loss: float

    def __post_init__(self) -> None:
        for name in ("heatmap_loss", "box_loss", "identity_loss"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True, slots=True)
class LossWeights:
    omega1: float = 0.0
    omega2: float = 0.0


def combined_loss(c: LossComponents, w: LossWeights) -> float:
    """Uncertainty-weighted detection + identity loss."""
    return 0.5 * (math.exp(-w.omega1) * (c.heatmap_loss + c.box_loss)
                  + math.exp(-w.omega2) * c.identity_loss + w.omega1 + w.omega2)


def id_attention_loss(student_feats: Sequence[np.ndarray], teacher_feats: Sequence[np.ndarray]) -> float:
    """Mean squared Euclidean distance between paired re-ID features."""
    if len(student_feats) != len(teacher_feats):
        raise ValueError(f"{len(student_feats)} student features vs {len(teacher_feats)} teacher features")
    if not student_feats:
        raise ValueError("no feature pairs")
    S = np.array(student_feats, dtype=float)
    T = np.array(teacher_feats, dtype=float)
    if S.shape != T.shape:
        raise ValueError(f"feature dimension mismatch {S.shape} vs {T.shape}")
    return float(np.mean(np.sum((S - T) ** 2, axis=1)))


def total_mimic_loss(c: LossComponents, w: LossWeights,
                     student_feats: Sequence[np.ndarray], teacher_feats: Sequence[np.ndarray]) -> float:
    """Student loss plus the feature-mimicry term."""
    return combined_loss(c, w) + id_attention_loss(student_feats, teacher_feats)
