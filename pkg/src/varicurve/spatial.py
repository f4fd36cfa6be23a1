"""Exact fixed-radius neighbor queries over an immutable point snapshot.

A uniform grid of cubic buckets with edge equal to the query-radius hint;
queries with a different radius stay exact, they just scan more buckets.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import EmptyCloud


class FixedRadiusIndex:
    """Uniform-grid bucket index; build once, query from any thread."""

    def __init__(self, points, radius_hint: float):
        points = np.ascontiguousarray(points, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise EmptyCloud("index needs an (N, n) array with N >= 1")
        if not radius_hint > 0:
            raise ValueError("radius_hint must be positive")
        self.points = points.copy()
        self.points.flags.writeable = False
        self.cell = float(radius_hint)
        keys = np.floor(self.points / self.cell).astype(np.int64)
        # lexsort is stable, so each bucket keeps ascending point indices
        order = np.lexsort(keys.T[::-1])
        sk = keys[order]
        if len(sk) == 1:
            starts = np.array([0])
        else:
            change = np.flatnonzero(np.any(sk[1:] != sk[:-1], axis=1)) + 1
            starts = np.concatenate(([0], change))
        ends = np.concatenate((starts[1:], [len(sk)]))
        self._order = order
        self._buckets = {tuple(sk[s]): (s, e) for s, e in zip(starts, ends)}

    def __len__(self):
        return self.points.shape[0]

    def query(self, x, eps: float) -> np.ndarray:
        """Indices j with |points[j] - x| < eps (strict), ascending."""
        if not eps > 0:
            raise ValueError("eps must be positive")
        x = np.asarray(x, dtype=float)
        lo = np.floor((x - eps) / self.cell).astype(np.int64)
        hi = np.floor((x + eps) / self.cell).astype(np.int64)
        buckets = self._buckets
        order = self._order
        parts = []
        for key in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
            se = buckets.get(key)
            if se is not None:
                parts.append(order[se[0]:se[1]])
        if not parts:
            return np.empty(0, dtype=np.int64)
        cand = parts[0] if len(parts) == 1 else np.concatenate(parts)
        diff = self.points[cand] - x
        inside = np.einsum("ij,ij->i", diff, diff) < eps * eps
        return np.sort(cand[inside])

    def count(self, x, eps: float) -> int:
        """Number of points strictly inside the open eps-ball around x."""
        return int(self.query(x, eps).size)

    def iter_blocks(self, eps: float):
        """Per-bucket batches for field evaluation over all points at once.

        Yields (members, candidates): the points of one bucket (ascending
        indices) and a sorted superset of every eps-neighbor of any member.
        Buckets come out in lexicographic key order, so iteration is
        deterministic for a fixed build.
        """
        reach = int(math.floor(eps / self.cell)) + 1
        order = self._order
        buckets = self._buckets
        for key in sorted(buckets):
            s, e = buckets[key]
            parts = []
            for nb in itertools.product(*(range(c - reach, c + reach + 1) for c in key)):
                se = buckets.get(nb)
                if se is not None:
                    parts.append(order[se[0]:se[1]])
            yield order[s:e], np.sort(np.concatenate(parts))


def radius_query(index: FixedRadiusIndex, x, eps: float) -> np.ndarray:
    return index.query(x, eps)


def brute_force_query(points, x, eps: float) -> np.ndarray:
    """Reference O(N) scan with the same strict comparison as the index."""
    points = np.asarray(points, dtype=float)
    diff = points - np.asarray(x, dtype=float)
    return np.flatnonzero(np.einsum("ij,ij->i", diff, diff) < eps * eps)
