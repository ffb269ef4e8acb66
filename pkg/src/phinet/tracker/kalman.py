"""Constant-velocity Kalman filter over (u, v, s, r) box measurements.

State layout: center u, v; scale s (box area); aspect ratio r = w / h; and the
velocities of u, v, s. The aspect ratio is modelled as constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

DIM_X, DIM_Z = 7, 4
MIN_ASPECT = 1e-6

F = np.eye(DIM_X)
F[0, 4] = F[1, 5] = F[2, 6] = 1.0
H = np.eye(DIM_Z, DIM_X)


@dataclass(frozen=True)
class KalmanConfig:
    measurement_noise: tuple = (1.0, 1.0, 10.0, 10.0)
    process_noise: tuple = (1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4)
    initial_position_var: float = 10.0
    initial_velocity_var: float = 10000.0

    @property
    def R(self):
        return np.diag(self.measurement_noise)

    @property
    def Q(self):
        return np.diag(self.process_noise)


DEFAULT_KALMAN = KalmanConfig()


def bbox_to_z(bbox) -> np.ndarray:
    left, top, w, h = bbox
    return np.array([left + w / 2.0, top + h / 2.0, w * h, w / float(h)])


def x_to_bbox(x) -> tuple:
    s = max(float(x[2]), 0.0)
    r = max(float(x[3]), MIN_ASPECT)
    w = np.sqrt(s * r)
    h = s / w if w > 0 else 0.0
    return (float(x[0] - w / 2.0), float(x[1] - h / 2.0), float(w), float(h))


@dataclass(frozen=True)
class Track:
    id: int
    x: np.ndarray
    P: np.ndarray
    hits: int = 1
    hit_streak: int = 1
    age: int = 0
    age_since_update: int = 0
    status: str = "tentative"
    # Last matched detection box; the IoU tracker associates against it.
    last_bbox: Optional[tuple] = None
    scale_clamped: bool = field(default=False)

    @property
    def bbox(self) -> tuple:
        return x_to_bbox(self.x)


def new_track(track_id: int, bbox, config: KalmanConfig = DEFAULT_KALMAN) -> Track:
    x = np.zeros(DIM_X)
    x[:4] = bbox_to_z(bbox)
    P = np.eye(DIM_X) * config.initial_position_var
    P[4:, 4:] = np.eye(3) * config.initial_velocity_var
    return Track(id=track_id, x=x, P=P, last_bbox=tuple(float(v) for v in bbox))


def kalman_predict(track: Track, config: KalmanConfig = DEFAULT_KALMAN) -> Track:
    x = F @ track.x
    clamped = False
    if x[2] < 0:
        # Area cannot go negative: stop shrinking.
        x[2] = 0.0
        x[6] = 0.0
        clamped = True
    P = F @ track.P @ F.T + config.Q
    P = 0.5 * (P + P.T)
    return replace(track, x=x, P=P, scale_clamped=clamped)


def kalman_update(track: Track, bbox, config: KalmanConfig = DEFAULT_KALMAN) -> Track:
    """Linear measurement update with the Joseph-form covariance."""
    z = bbox_to_z(bbox)
    R = config.R
    y = z - H @ track.x
    S = H @ track.P @ H.T + R
    K = np.linalg.solve(S, H @ track.P).T  # P H^T S^-1 (S, P symmetric)
    x = track.x + K @ y
    x[3] = max(x[3], MIN_ASPECT)
    x[2] = max(x[2], 0.0)
    IKH = np.eye(DIM_X) - K @ H
    P = IKH @ track.P @ IKH.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    return replace(track, x=x, P=P, last_bbox=tuple(float(v) for v in bbox))
