"""Bounded-Lipschitz distance as a finite LP, and grid discretizers.

The distance between two atomic measures with merged support {a_1..a_M} and
signed weight vector c = mu - nu is the optimum of

    maximize  c . phi
    subject to  |phi_k| <= 1,   |phi_k - phi_l| <= D_kl  for all pairs,

which compares measures of different total mass (unlike Wasserstein-1).
The LP is solved exactly by HiGHS via scipy with explicit feasibility and
duality-gap certificates; the O(M^2) pair constraints cap the support at
desk scale.

Varifold distances use the product metric |x - y| + ||P - S||_op on
position x plane atoms (any bi-Lipschitz-equivalent product metric changes
values by bounded factors only; the sum is the documented choice).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import TooLarge
from .geometry import PointCloudVarifold, VolumetricVarifold, fix_sign

MAX_SUPPORT = 2000
FEASIBILITY_TOL = 1e-9
GAP_TOL = 1e-8


class DiscreteMeasure:
    """Finitely many weighted atoms with a precomputed distance matrix."""

    def __init__(self, atoms, weights, dist_matrix=None, validate=True):
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float)) if np.size(atoms) else \
            np.zeros((0, 1))
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("atoms and weights lengths differ")
        if validate and np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if dist_matrix is None:
            diff = atoms[:, None, :] - atoms[None, :, :]
            dist_matrix = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        dist_matrix = np.asarray(dist_matrix, dtype=float)
        if validate:
            _check_metric(dist_matrix)
        self.atoms = atoms
        self.weights = weights
        self.dist = dist_matrix

    def __len__(self):
        return self.weights.shape[0]


def _check_metric(D, tol=1e-9):
    m = D.shape[0]
    if D.shape != (m, m):
        raise ValueError("distance matrix must be square")
    if m == 0:
        return
    if np.max(np.abs(D - D.T)) > tol or np.max(np.abs(np.diag(D))) > tol:
        raise ValueError("distance matrix must be symmetric with zero diagonal")
    # triangle inequality; full scan at small sizes, hub sampling beyond
    hubs = range(m) if m <= 400 else np.random.default_rng(0).choice(m, 60, replace=False)
    for k in hubs:
        if np.min(D[:, k, None] + D[None, k, :] - D) < -tol:
            raise ValueError("distance matrix violates the triangle inequality")


def _bl_lp(D, c):
    """Exact optimum of the bounded-Lipschitz LP over the given support."""
    m = len(c)
    if m == 0:
        return 0.0
    if m > MAX_SUPPORT:
        raise TooLarge(f"support of {m} atoms exceeds the cap of {MAX_SUPPORT}; subsample")
    if m == 1:
        return abs(float(c[0]))  # phi = sign(c)
    iu, ju = np.triu_indices(m, 1)
    npairs = iu.size
    pair_rows = np.concatenate([np.arange(npairs)] * 2)
    pair_cols = np.concatenate([iu, ju])
    b = np.concatenate([D[iu, ju], D[iu, ju]])
    A = sp.vstack([
        sp.csr_matrix((np.concatenate([np.ones(npairs), -np.ones(npairs)]),
                       (pair_rows, pair_cols)), shape=(npairs, m)),
        sp.csr_matrix((np.concatenate([-np.ones(npairs), np.ones(npairs)]),
                       (pair_rows, pair_cols)), shape=(npairs, m)),
    ]).tocsr()
    res = linprog(-c, A_ub=A, b_ub=b, bounds=(-1.0, 1.0), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP solve failed: {res.message}")
    phi = res.x
    value = float(c @ phi)
    # primal feasibility certificate
    viol = max(float(np.max(np.abs(phi)) - 1.0),
               float(np.max(np.abs(phi[iu] - phi[ju]) - D[iu, ju])))
    if viol > FEASIBILITY_TOL:
        raise RuntimeError(f"LP solution infeasible by {viol:.3e}")
    # duality-gap certificate from the HiGHS marginals
    dual = float(b @ res.ineqlin.marginals
                 + (-1.0) * np.sum(res.lower.marginals)
                 + 1.0 * np.sum(res.upper.marginals))
    if abs(res.fun - dual) > GAP_TOL * max(1.0, abs(res.fun)):
        raise RuntimeError(f"duality gap {abs(res.fun - dual):.3e} above tolerance")
    return value


def _merge_atoms(keys_a, w_a, keys_b, w_b):
    """Merge bitwise-identical atoms into one support with signed weights."""
    support = {}
    order = []
    c = []
    for keys, weights, sign in ((keys_a, w_a, 1.0), (keys_b, w_b, -1.0)):
        for key, w in zip(keys, weights):
            k = support.get(key)
            if k is None:
                support[key] = len(order)
                order.append(key)
                c.append(sign * w)
            else:
                c[k] += sign * w
    return order, np.array(c)


def bl_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Bounded-Lipschitz distance between two Euclidean atomic measures."""
    if len(mu) and len(nu) and mu.atoms.shape[1] != nu.atoms.shape[1]:
        raise ValueError("measures live in different ambient dimensions")
    keys_a = [a.tobytes() for a in mu.atoms]
    keys_b = [a.tobytes() for a in nu.atoms]
    order, c = _merge_atoms(keys_a, mu.weights, keys_b, nu.weights)
    if not order:
        return 0.0
    dim = mu.atoms.shape[1] if len(mu) else nu.atoms.shape[1]
    pts = np.array([np.frombuffer(k) for k in order]).reshape(len(order), dim)
    diff = pts[:, None, :] - pts[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return _bl_lp(D, c)


def _varifold_atoms(V: PointCloudVarifold):
    keys = [p.tobytes() + q.tobytes() for p, q in zip(V.points, V.planes)]
    return keys, V.points, V.planes, V.masses


def bl_distance_varifolds(V: PointCloudVarifold, W: PointCloudVarifold) -> float:
    """Bounded-Lipschitz distance on the product space of positions and planes.

    Product metric: d((x,P), (y,S)) = |x - y| + ||P - S||_op.
    """
    if V.n != W.n:
        raise ValueError("varifolds live in different ambient dimensions")
    keys_a, pa, qa, wa = _varifold_atoms(V)
    keys_b, pb, qb, wb = _varifold_atoms(W)
    order, c = _merge_atoms(keys_a, wa, keys_b, wb)
    lookup = {}
    for keys, pts, planes in ((keys_a, pa, qa), (keys_b, pb, qb)):
        for k, x, p in zip(keys, pts, planes):
            lookup.setdefault(k, (x, p))
    pts = np.array([lookup[k][0] for k in order])
    planes = np.array([lookup[k][1] for k in order])
    m = len(order)
    if m > MAX_SUPPORT:
        raise TooLarge(f"support of {m} atoms exceeds the cap of {MAX_SUPPORT}; subsample")
    diff = pts[:, None, :] - pts[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    pd = planes[:, None] - planes[None, :]
    D = D + np.max(np.abs(np.linalg.eigvalsh(pd)), axis=-1)
    return _bl_lp(D, c)


def bl_distance_masses(V: PointCloudVarifold, W: PointCloudVarifold) -> float:
    """Bounded-Lipschitz distance between the position-space mass measures."""
    return bl_distance(DiscreteMeasure(V.points, V.masses, validate=False),
                       DiscreteMeasure(W.points, W.masses, validate=False))


# ---------------------------------------------------------------------------
# grid discretizers


@dataclass(frozen=True)
class Grid:
    """Half-open cubic cells of diameter `delta` covering a box."""

    lo: np.ndarray
    edge: float
    ncells: np.ndarray
    delta: float

    def cell_of(self, points) -> np.ndarray:
        """Integer cell coordinates; boundary hits clamp into the last cell."""
        idx = np.floor((np.atleast_2d(points) - self.lo) / self.edge).astype(np.int64)
        return np.clip(idx, 0, self.ncells - 1)

    def cell_box(self, idx):
        lo = self.lo + np.asarray(idx) * self.edge
        return lo, lo + self.edge

    @property
    def n_total(self) -> int:
        return int(np.prod(self.ncells))


def build_grid(bbox, delta: float) -> Grid:
    """Cubic mesh of cell diameter `delta` (edge delta/sqrt(n)) over a box."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    n = len(lo)
    if np.any(hi <= lo):
        raise ValueError("bbox must have positive extent")
    edge = delta / math.sqrt(n)
    ncells = np.maximum(np.ceil((hi - lo) / edge - 1e-12).astype(np.int64), 1)
    return Grid(lo, edge, ncells, delta)


def _group_by_cell(V: PointCloudVarifold, grid: Grid):
    cells = grid.cell_of(V.points)
    order = np.lexsort(cells.T[::-1])
    sorted_cells = cells[order]
    if len(order) == 1:
        starts = np.array([0])
    else:
        change = np.flatnonzero(np.any(sorted_cells[1:] != sorted_cells[:-1], axis=1)) + 1
        starts = np.concatenate(([0], change))
    ends = np.concatenate((starts[1:], [len(order)]))
    for s, e in zip(starts, ends):
        yield tuple(sorted_cells[s]), order[s:e]


def _cell_summary(V, members, d):
    m_k = float(np.sum(V.masses[members]))
    x_k = (V.masses[members] @ V.points[members]) / m_k
    avg = np.einsum("k,kij->ij", V.masses[members], V.planes[members]) / m_k
    _, vecs = np.linalg.eigh(avg)
    top = vecs[:, ::-1][:, :d].T
    top = np.array([fix_sign(b) for b in top])
    return m_k, x_k, top


def to_volumetric(V: PointCloudVarifold, grid: Grid) -> VolumetricVarifold:
    """Bin a cloud into per-cell mass and a rank-d average plane.

    The cell plane is the spectral truncation of the mass-weighted mean of
    the member projectors (a Frobenius surrogate of the operator-norm
    minimizer; a near-minimizer is all the comparison bound needs).
    Empty cells are dropped; total mass is conserved.
    """
    lo, hi, masses, planes = [], [], [], []
    for cell, members in _group_by_cell(V, grid):
        m_k, _, top = _cell_summary(V, members, V.d)
        box_lo, box_hi = grid.cell_box(cell)
        lo.append(box_lo)
        hi.append(box_hi)
        masses.append(m_k)
        planes.append(top.T @ top)
    return VolumetricVarifold(np.array(lo), np.array(hi), np.array(masses),
                              np.array(planes), V.d, validate=False)


def to_pointcloud(V: PointCloudVarifold, grid: Grid) -> PointCloudVarifold:
    """One point per occupied cell: mass centroid, summed mass, average plane."""
    pts, masses, bases = [], [], []
    for _, members in _group_by_cell(V, grid):
        m_k, x_k, top = _cell_summary(V, members, V.d)
        pts.append(x_k)
        masses.append(m_k)
        bases.append(top)
    bases = np.array(bases)
    planes = np.einsum("nki,nkj->nij", bases, bases)
    return PointCloudVarifold(np.array(pts), np.array(masses), planes, V.d,
                              bases=bases, validate=False)


def volumetric_as_subsampled_cloud(V: VolumetricVarifold, per_axis: int) -> PointCloudVarifold:
    """Replace each cell by a uniform per_axis^n sub-grid of equal atoms.

    Used to represent a volumetric varifold inside the finite-support LP;
    refining per_axis converges to the continuous distance value.
    """
    n = V.n
    offsets = (np.arange(per_axis) + 0.5) / per_axis
    grids = np.stack([g.ravel() for g in np.meshgrid(*([offsets] * n), indexing="ij")],
                     axis=1)
    pts, masses, planes = [], [], []
    for k in range(len(V)):
        span = V.cells_hi[k] - V.cells_lo[k]
        sub = V.cells_lo[k] + grids * span
        pts.append(sub)
        masses.append(np.full(len(sub), V.masses[k] / len(sub)))
        planes.append(np.tile(V.planes[k], (len(sub), 1, 1)))
    return PointCloudVarifold(np.concatenate(pts), np.concatenate(masses),
                              np.concatenate(planes), V.d, validate=False)
