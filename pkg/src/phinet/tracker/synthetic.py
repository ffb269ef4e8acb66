"""Seeded synthetic tracking sequences with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .boxes import Detection


@dataclass
class Sequence:
    ground_truth: List[Tuple[int, int, tuple]]  # (frame, id, bbox)
    detections: List[Detection]
    num_frames: int


def _emit(gt, dets, rng, frame, oid, box, dropout, jitter):
    gt.append((frame, oid, box))
    if dropout and rng.random() < dropout:
        return
    if jitter:
        l, t, w, h = box
        n = rng.normal(0.0, jitter, 4)
        box = (l + n[0], t + n[1], max(w + n[2], 1.0), max(h + n[3], 1.0))
    dets.append(Detection(frame=frame, bbox=tuple(float(v) for v in box), confidence=1.0))


def linear_sequence(
    num_objects: int = 5,
    num_frames: int = 100,
    seed: int = 0,
    box_size: Tuple[float, float] = (24.0, 48.0),
    max_speed: float = 3.0,
    dropout: float = 0.0,
    jitter: float = 0.0,
) -> Sequence:
    """Objects in separate horizontal lanes moving at constant velocity.

    Lanes are three box heights apart, so boxes never come within twice their
    size of each other.
    """
    rng = np.random.default_rng(seed)
    w, h = box_size
    lane = 3.0 * h
    starts = rng.uniform(50.0, 150.0, num_objects)
    vx = rng.uniform(0.5, max_speed, num_objects)
    vy = rng.uniform(-0.1, 0.1, num_objects)
    gt, dets = [], []
    for f in range(1, num_frames + 1):
        for k in range(num_objects):
            box = (starts[k] + vx[k] * (f - 1), 20.0 + k * lane + vy[k] * (f - 1), w, h)
            _emit(gt, dets, rng, f, k + 1, box, dropout, jitter)
    return Sequence(gt, dets, num_frames)


def crossing_sequence(
    num_frames: int = 40,
    speed: float = 8.0,
    box_size: Tuple[float, float] = (24.0, 48.0),
    vertical_offset: float = 6.0,
    phase: float = 0.3,
    seed: int = 0,
    dropout: float = 0.0,
    jitter: float = 0.0,
) -> Sequence:
    """Two objects on near-identical rows moving toward each other.

    ``phase`` shifts the crossing instant between frames so the boxes are never
    exactly coincident.
    """
    rng = np.random.default_rng(seed)
    w, h = box_size
    mid = num_frames / 2.0 + phase
    center = 200.0 + speed * mid
    gt, dets = [], []
    for f in range(1, num_frames + 1):
        dx = speed * (f - 1 - mid)
        _emit(gt, dets, rng, f, 1, (center + dx - w / 2, 100.0, w, h), dropout, jitter)
        _emit(gt, dets, rng, f, 2, (center - dx - w / 2, 100.0 + vertical_offset, w, h), dropout, jitter)
    return Sequence(gt, dets, num_frames)
