"""Minimum-cost linear assignment (Hungarian / shortest augmenting path)."""

from __future__ import annotations

from typing import List, Tuple

import numpy as np


def hungarian(cost) -> List[Tuple[int, int]]:
    """Optimal assignment of min(n, m) pairs for an n x m cost matrix.

    Rows are inserted in index order and the column scan takes the first
    minimum, so equal-cost alternatives resolve toward lower row, then lower
    column indices. Returns ``(row, col)`` pairs sorted by row.
    """
    a = np.asarray(cost, dtype=float)
    if a.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if a.size == 0:
        return []
    if not np.all(np.isfinite(a)):
        raise ValueError("cost matrix has non-finite entries")
    if a.shape[0] > a.shape[1]:
        return sorted((r, c) for c, r in hungarian(a.T))

    n, m = a.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)  # p[j]: row (1-based) owning column j
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return sorted((int(p[j]) - 1, j - 1) for j in range(1, m + 1) if p[j])


def assignment_cost(cost, pairs) -> float:
    a = np.asarray(cost, dtype=float)
    return float(sum(a[r, c] for r, c in pairs))
