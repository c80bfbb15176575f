"""Dynamic time warping over cosine frame distances.

The alignment minimizes the summed cosine distance with steps
{(1,0), (0,1), (1,1)} and both endpoints anchored; the returned value is
that optimal path's summed distance divided by its length in matched
pairs.  Among equal-cost predecessors the diagonal is preferred, then
advancing the first sequence, then the second.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .core import FrameSequence


def _as_frames(s) -> np.ndarray:
    if isinstance(s, FrameSequence):
        return s.frames
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _unit_rows(f: np.ndarray) -> tuple:
    norms = np.linalg.norm(f, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    return f / np.where(norms == 0.0, 1.0, norms), zero


def cosine_distance(u, v) -> float:
    """1 - cos(u, v), in [0, 2].  A zero vector is at distance 1 from
    everything (maximally uninformative).

    Evaluated as half the squared distance between the unit-normalized
    vectors, which equals 1 - cos exactly and makes the self-distance of
    identical inputs exactly zero.
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 1.0
    diff = u / nu - v / nv
    return float(min(2.0, 0.5 * float(diff @ diff)))


def cosine_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine distances between the rows of a (T1 x D) and b (T2 x D).

    Rows with zero norm get distance 1 to everything.  Same evaluation as
    cosine_distance: squared euclidean between unit rows, halved.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    ua, za = _unit_rows(a)
    ub, zb = _unit_rows(b)
    d = cdist(ua, ub, "sqeuclidean")
    d *= 0.5
    d[za, :] = 1.0
    d[:, zb] = 1.0
    return np.clip(d, 0.0, 2.0, out=d)


def dtw_distance(s1, s2) -> float:
    """Mean cosine distance along the optimal (sum-minimizing) DTW path."""
    f1 = _as_frames(s1)
    f2 = _as_frames(s2)
    if f1.shape[0] == 0 or f2.shape[0] == 0:
        raise ValueError("empty input sequence")
    d = cosine_distance_matrix(f1, f2)
    t1, t2 = d.shape
    if t1 == 1 and t2 == 1:
        return float(d[0, 0])

    rows = d.tolist()
    inf = float("inf")
    # cost[j], plen[j] hold the current DP row; predecessors are
    # (i-1,j-1), (i-1,j), (i,j-1), checked in that preference order.
    cost = [inf] * t2
    plen = [0] * t2
    row0 = rows[0]
    acc = 0.0
    for j in range(t2):
        acc += row0[j]
        cost[j] = acc
        plen[j] = j + 1
    for i in range(1, t1):
        row = rows[i]
        prev_cost = cost
        prev_len = plen
        cost = [inf] * t2
        plen = [0] * t2
        cost[0] = prev_cost[0] + row[0]
        plen[0] = prev_len[0] + 1
        for j in range(1, t2):
            best = prev_cost[j - 1]
            blen = prev_len[j - 1]
            if prev_cost[j] < best:
                best = prev_cost[j]
                blen = prev_len[j]
            if cost[j - 1] < best:
                best = cost[j - 1]
                blen = plen[j - 1]
            cost[j] = best + row[j]
            plen[j] = blen + 1
    return cost[t2 - 1] / plen[t2 - 1]
