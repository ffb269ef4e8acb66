"""CLEAR-MOT scoring (MOTA, MOTP, identity switches)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .assignment import hungarian
from .boxes import iou_matrix

Row = Tuple[int, int, Tuple[float, float, float, float]]  # (frame, id, bbox)


@dataclass
class MotScore:
    mota: float
    motp: float  # mean (1 - IoU) over matches
    id_switches: int
    false_positives: int
    misses: int
    matches: int
    num_gt: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _group(rows: Iterable[Row]) -> dict:
    out: dict = {}
    for frame, oid, bbox in rows:
        out.setdefault(int(frame), []).append((int(oid), tuple(bbox)))
    return out


def score(hypotheses: Iterable[Row], ground_truth: Iterable[Row], iou_match_threshold: float = 0.5) -> MotScore:
    """Frame-by-frame CLEAR-MOT accumulation.

    A ground-truth object keeps its previous hypothesis when that pairing is
    still above the IoU threshold; the remaining objects are matched by
    Hungarian assignment on ``1 - IoU``. A match whose hypothesis differs from
    the object's last matched hypothesis counts as an identity switch.
    """
    gt_by = _group(ground_truth)
    hy_by = _group(hypotheses)
    last_match: dict = {}
    fp = fn = idsw = nmatch = ngt = 0
    dist = 0.0

    for f in sorted(set(gt_by) | set(hy_by)):
        gts = gt_by.get(f, [])
        hys = hy_by.get(f, [])
        gt_ids = [g for g, _ in gts]
        if len(set(gt_ids)) != len(gt_ids):
            raise ValueError(f"frame {f}: duplicate ground-truth ids")
        ngt += len(gts)
        if not gts or not hys:
            fn += len(gts)
            fp += len(hys)
            continue

        with np.errstate(invalid="ignore", divide="ignore"):
            ious = np.nan_to_num(iou_matrix([b for _, b in gts], [b for _, b in hys]))
        valid = ious >= iou_match_threshold
        hyp_col = {h: j for j, (h, _) in enumerate(hys)}

        pairs = []
        taken_g, taken_h = set(), set()
        for gi, (g, _) in enumerate(gts):
            j = hyp_col.get(last_match.get(g))
            if j is not None and valid[gi, j] and j not in taken_h:
                pairs.append((gi, j))
                taken_g.add(gi)
                taken_h.add(j)

        rest_g = [i for i in range(len(gts)) if i not in taken_g]
        rest_h = [j for j in range(len(hys)) if j not in taken_h]
        if rest_g and rest_h:
            sub = np.where(valid[np.ix_(rest_g, rest_h)], 1.0 - ious[np.ix_(rest_g, rest_h)], 2.0)
            for r, c in hungarian(sub):
                gi, j = rest_g[r], rest_h[c]
                if valid[gi, j]:
                    pairs.append((gi, j))

        for gi, j in pairs:
            g, h = gts[gi][0], hys[j][0]
            if g in last_match and last_match[g] != h:
                idsw += 1
            last_match[g] = h
            dist += max(0.0, 1.0 - float(ious[gi, j]))
        nmatch += len(pairs)
        fn += len(gts) - len(pairs)
        fp += len(hys) - len(pairs)

    mota = 1.0 - (fn + fp + idsw) / ngt if ngt else float("nan")
    motp = dist / nmatch if nmatch else float("nan")
    return MotScore(
        mota=mota,
        motp=motp,
        id_switches=idsw,
        false_positives=fp,
        misses=fn,
        matches=nmatch,
        num_gt=ngt,
    )


def format_table(rows: Iterable[Tuple[str, MotScore]]) -> str:
    """Text table with the columns IDs, MOTA %, MOTP."""
    lines = [f"{'':<10} {'IDs':>5} {'MOTA %':>8} {'MOTP':>7} {'FP':>6} {'FN':>6}"]
    for name, s in rows:
        lines.append(
            f"{name:<10} {s.id_switches:>5d} {100 * s.mota:>8.1f} {s.motp:>7.3f} {s.false_positives:>6d} {s.misses:>6d}"
        )
    return "\n".join(lines)
