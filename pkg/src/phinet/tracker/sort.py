"""Online trackers: SORT (Kalman + Hungarian on IoU) and a plain IoU tracker."""

from __future__ import annotations

from dataclasses import replace
from typing import List, Sequence, Tuple

import numpy as np

from .assignment import hungarian
from .boxes import Detection, iou_matrix
from .kalman import DEFAULT_KALMAN, KalmanConfig, Track, kalman_predict, kalman_update, new_track

Emitted = Tuple[int, Tuple[float, float, float, float]]


class _TrackerBase:
    """Shared track lifecycle.

    Each frame: age every track, associate, update matched tracks, open new
    tentative tracks for unmatched detections, drop tracks unseen for more
    than ``max_age`` frames and emit confirmed tracks that were updated this
    frame. During the first ``min_hits`` frames of a sequence fresh tracks are
    emitted immediately, so objects present from the start are not missed.
    """

    def __init__(self, max_age: int = 1, min_hits: int = 3, iou_threshold: float = 0.3):
        self.max_age = max_age
        self.min_hits = min_hits
        self.iou_threshold = iou_threshold
        self.tracks: List[Track] = []
        self.frame_count = 0
        self._next_id = 1

    def _advance(self, track: Track) -> Track:
        raise NotImplementedError

    def _associate(self, tracks: Sequence[Track], boxes: np.ndarray) -> List[Tuple[int, int]]:
        raise NotImplementedError

    def _absorb(self, track: Track, bbox) -> Track:
        raise NotImplementedError

    def _spawn(self, bbox) -> Track:
        raise NotImplementedError

    def step(self, detections: Sequence[Detection]) -> List[Emitted]:
        self.frame_count += 1
        tracks = []
        for t in self.tracks:
            t = self._advance(t)
            tracks.append(
                replace(
                    t,
                    age=t.age + 1,
                    hit_streak=0 if t.age_since_update > 0 else t.hit_streak,
                    age_since_update=t.age_since_update + 1,
                )
            )

        boxes = np.array([d.bbox for d in detections], dtype=float).reshape(-1, 4)
        matches = self._associate(tracks, boxes)

        matched_dets = set()
        for ti, di in matches:
            t = self._absorb(tracks[ti], boxes[di])
            tracks[ti] = replace(t, hits=t.hits + 1, hit_streak=t.hit_streak + 1, age_since_update=0)
            matched_dets.add(di)
        for di in range(len(boxes)):
            if di not in matched_dets:
                tracks.append(self._spawn(boxes[di]))

        emitted: List[Emitted] = []
        alive = []
        for t in tracks:
            if t.age_since_update > self.max_age:
                continue
            if t.age_since_update == 0 and (t.hit_streak >= self.min_hits or self.frame_count <= self.min_hits):
                t = replace(t, status="confirmed")
                emitted.append((t.id, self._emit_box(t)))
            alive.append(t)
        self.tracks = alive
        return emitted

    def _emit_box(self, track: Track):
        return track.bbox

    def _new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i


class SortTracker(_TrackerBase):
    def __init__(self, max_age=1, min_hits=3, iou_threshold=0.3, kalman: KalmanConfig = DEFAULT_KALMAN):
        super().__init__(max_age, min_hits, iou_threshold)
        self.kalman = kalman

    def _advance(self, track):
        return kalman_predict(track, self.kalman)

    def _absorb(self, track, bbox):
        return kalman_update(track, bbox, self.kalman)

    def _spawn(self, bbox):
        return new_track(self._new_id(), bbox, self.kalman)

    def _associate(self, tracks, boxes):
        if not tracks or len(boxes) == 0:
            return []
        pred = np.array([t.bbox for t in tracks], dtype=float)
        ious = _safe_iou(pred, boxes)
        pairs = hungarian(1.0 - ious)
        return [(ti, di) for ti, di in pairs if ious[ti, di] >= self.iou_threshold]


class IouTracker(_TrackerBase):
    """Greedy IoU association against each track's last observed box.

    No motion model: cheapest per frame, but identities break whenever
    objects move far between frames or pass close to each other.
    """

    def _advance(self, track):
        return track

    def _absorb(self, track, bbox):
        return replace(track, last_bbox=tuple(float(v) for v in bbox))

    def _spawn(self, bbox):
        return new_track(self._new_id(), bbox)

    def _emit_box(self, track):
        return track.last_bbox

    def _associate(self, tracks, boxes):
        if not tracks or len(boxes) == 0:
            return []
        last = np.array([t.last_bbox for t in tracks], dtype=float)
        ious = _safe_iou(last, boxes)
        order = sorted(
            ((ious[ti, di], ti, di) for ti in range(len(tracks)) for di in range(len(boxes))),
            key=lambda e: (-e[0], e[1], e[2]),
        )
        used_t, used_d, out = set(), set(), []
        for score, ti, di in order:
            if score < self.iou_threshold:
                break
            if ti in used_t or di in used_d:
                continue
            used_t.add(ti)
            used_d.add(di)
            out.append((ti, di))
        return sorted(out)


def _safe_iou(a, b):
    with np.errstate(invalid="ignore", divide="ignore"):
        m = iou_matrix(a, b)
    return np.nan_to_num(m, nan=0.0)


def run_tracker(tracker: _TrackerBase, detections: Sequence[Detection], num_frames: int | None = None):
    """Feed frame-indexed detections through ``tracker``.

    Returns hypothesis rows ``(frame, id, bbox)``. Frames without detections
    still advance the tracker.
    """
    by_frame: dict[int, list] = {}
    for d in detections:
        by_frame.setdefault(d.frame, []).append(d)
    if num_frames is None:
        last = max(by_frame) if by_frame else 0
        frames = range(1, last + 1)
    else:
        frames = range(1, num_frames + 1)
    out = []
    for f in frames:
        for tid, bbox in tracker.step(by_frame.get(f, [])):
            out.append((f, tid, bbox))
    return out
