"""Constant-velocity Kalman filtering of box state, and velocity estimation.

State is the 8-vector (cx, cy, aspect, height, vcx, vcy, vaspect, vheight).
Noise terms are expressed as multiples of box height, so they adapt to scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BoundingBox, Detection

_NDIM = 4


@dataclass(frozen=True, slots=True)
class KalmanConfig:
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    # Noise switches; the init covariance always uses the weights above.
    process_noise: bool = True
    measurement_noise: bool = True

    @classmethod
    def noiseless(cls) -> KalmanConfig:
        return cls(process_noise=False, measurement_noise=False)


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def box(self) -> BoundingBox:
        cx, cy, a, h = (float(v) for v in self.mean[:4])
        h = max(h, 1e-6)
        w = max(a * h, 1e-6)
        return BoundingBox.from_center(cx, cy, w, h)


_F = np.eye(2 * _NDIM)
_F[:_NDIM, _NDIM:] = np.eye(_NDIM)
_H = np.eye(_NDIM, 2 * _NDIM)
_DIAG = np.diag_indices(2 * _NDIM)


def _measure(box: BoundingBox) -> np.ndarray:
    cx, cy = box.center()
    return np.array([cx, cy, box.width / box.height, box.height])


def kalman_init(det: Detection | BoundingBox, config: KalmanConfig = KalmanConfig()) -> KalmanState:
    box = det.rect if isinstance(det, Detection) else det
    z = _measure(box)
    mean = np.concatenate([z, np.zeros(_NDIM)])
    h = z[3]
    sp, sv = config.std_weight_position, config.std_weight_velocity
    std = np.array([2 * sp * h, 2 * sp * h, 1e-2, 2 * sp * h,
                    10 * sv * h, 10 * sv * h, 1e-5, 10 * sv * h])
    return KalmanState(mean, np.diag(std**2))


def kalman_predict(state: KalmanState, config: KalmanConfig = KalmanConfig()) -> KalmanState:
    mean = _F @ state.mean
    cov = _F @ state.covariance @ _F.T
    if config.process_noise:
        h = state.mean[3]
        sp, sv = config.std_weight_position, config.std_weight_velocity
        std = np.array([sp * h, sp * h, 1e-2, sp * h, sv * h, sv * h, 1e-5, sv * h])
        cov = cov + np.diag(std**2)
    return KalmanState(mean, 0.5 * (cov + cov.T))


def kalman_update(state: KalmanState, measurement: BoundingBox,
                  config: KalmanConfig = KalmanConfig()) -> KalmanState:
    z = _measure(measurement)
    if not np.all(np.isfinite(z)):
        raise ValueError(f"non-finite measurement {z}")
    P = state.covariance
    S = _H @ P @ _H.T
    if config.measurement_noise:
        h = state.mean[3]
        sp = config.std_weight_position
        S = S + np.diag(np.array([sp * h, sp * h, 1e-1, sp * h]) ** 2)
    PHt = P @ _H.T
    try:
        gain = np.linalg.solve(S, PHt.T).T
    except np.linalg.LinAlgError:
        # Collapsed covariance (noiseless filter after convergence).
        gain = PHt @ np.linalg.pinv(S)
    innovation = z - _H @ state.mean
    mean = state.mean + gain @ innovation
    cov = P - gain @ S @ gain.T
    cov = 0.5 * (cov + cov.T)
    # Clip round-off that would make a variance slightly negative.
    cov[_DIAG] = np.maximum(cov[_DIAG], 0.0)
    return KalmanState(mean, cov)


def estimate_velocity(frames: Sequence[int], centers: Sequence[tuple[float, float]],
                      window: int = 3) -> tuple[float, float]:
    """Least-squares slope of the last ``window`` centers against frame index.

    A single sample yields zero velocity.
    """
    if len(frames) != len(centers):
        raise ValueError("frames and centers differ in length")
    if not centers:
        raise ValueError("velocity needs at least one position")
    n = min(window, len(centers))
    if n < 2:
        return (0.0, 0.0)
    t = np.asarray(frames[-n:], dtype=float)
    p = np.asarray(centers[-n:], dtype=float)
    dt = t - t.mean()
    denom = float(dt @ dt)
    if denom == 0.0:
        return (0.0, 0.0)
    slope = dt @ (p - p.mean(axis=0)) / denom
    vx, vy = float(slope[0]), float(slope[1])
    if not (math.isfinite(vx) and math.isfinite(vy)):
        return (0.0, 0.0)
    return (vx, vy)
