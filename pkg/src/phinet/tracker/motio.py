"""MOT-challenge text format: ``frame,id,left,top,width,height,conf,-1,-1,-1``."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, List, Tuple

from .boxes import Detection


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def format_detections(detections: Iterable[Detection]) -> str:
    lines = [
        ",".join([str(d.frame), "-1", *map(_fmt, d.bbox), f"{d.confidence:.4f}", "-1", "-1", "-1"])
        for d in detections
    ]
    return "".join(line + "\n" for line in lines)


def format_tracks(rows: Iterable[Tuple[int, int, tuple]], confidence: float = 1.0) -> str:
    lines = [
        ",".join([str(f), str(tid), *map(_fmt, bbox), f"{confidence:.4f}", "-1", "-1", "-1"])
        for f, tid, bbox in rows
    ]
    return "".join(line + "\n" for line in lines)


def parse_mot(text: str) -> List[Tuple[int, int, tuple, float]]:
    """Parse MOT lines into ``(frame, id, bbox, conf)`` tuples."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 6:
            raise ValueError(f"line {lineno}: expected at least 6 fields, got {len(parts)}")
        try:
            frame, oid = int(float(parts[0])), int(float(parts[1]))
            bbox = tuple(float(p) for p in parts[2:6])
            conf = float(parts[6]) if len(parts) > 6 else 1.0
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        rows.append((frame, oid, bbox, conf))
    return rows


def read_detections(path) -> List[Detection]:
    rows = parse_mot(Path(path).read_text())
    return [Detection(frame=f, bbox=b, confidence=min(max(c, 0.0), 1.0)) for f, _, b, c in rows]


def read_tracks(path) -> List[Tuple[int, int, tuple]]:
    return [(f, i, b) for f, i, b, _ in parse_mot(Path(path).read_text())]
