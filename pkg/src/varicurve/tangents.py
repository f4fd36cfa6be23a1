"""Tangent-plane estimation by local covariance regression.

At each point, the neighbors inside an open ball of radius R are centered
at their mean and the span of the top-d eigenvectors of the covariance
matrix is taken as the tangent plane (for codimension one this discards
the smallest-eigenvalue direction, i.e. the estimated normal).
"""

from __future__ import annotations

import numpy as np

from .geometry import Plane, fix_sign
from .spatial import FixedRadiusIndex


class TangentField:
    """Stacked regression output: projectors, bases and validity flags."""

    def __init__(self, planes, bases, valid, d):
        self.planes = planes
        self.bases = bases
        self.valid = valid
        self.d = d

    def __len__(self):
        return len(self.planes)

    def plane(self, i) -> Plane:
        return Plane(self.planes[i], self.d)


def estimate_planes(points, R: float, d: int, index: FixedRadiusIndex | None = None) -> TangentField:
    """Covariance-regression tangent planes at every point.

    Points with fewer than d+1 neighbors in their R-ball (self included), or
    with a fully degenerate neighborhood, are flagged invalid; the caller
    decides whether to skip them or abort.
    """
    points = np.ascontiguousarray(points, dtype=float)
    n_pts, n = points.shape
    if not R > 0:
        raise ValueError("regression radius must be positive")
    if not 1 <= d < n:
        raise ValueError(f"plane dimension {d} invalid for ambient dimension {n}")
    if index is None:
        index = FixedRadiusIndex(points, R)

    planes = np.zeros((n_pts, n, n))
    bases = np.zeros((n_pts, d, n))
    valid = np.zeros(n_pts, dtype=bool)
    query = index.query
    eigh = np.linalg.eigh
    for i in range(n_pts):
        idx = query(points[i], R)
        if idx.size < d + 1:
            continue
        nb = points[idx]
        centered = nb - nb.mean(axis=0)
        cov = centered.T @ centered
        evals, evecs = eigh(cov)
        if evals[-1] <= 1e-30:
            continue  # all neighbors coincide
        top = evecs[:, ::-1][:, :d].T
        for k in range(d):
            top[k] = fix_sign(top[k])
        planes[i] = top.T @ top
        bases[i] = top
        valid[i] = True
    return TangentField(planes, bases, valid, d)
