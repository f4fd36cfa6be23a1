"""Planes as orthogonal projectors, and the discrete measure containers.

Every container here is immutable after construction (the backing numpy
arrays are marked read-only), so instances can be shared freely between
worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasis, DimensionMismatch

SYMMETRY_TOL = 1e-12
IDEMPOTENCE_TOL = 1e-10
TRACE_TOL = 1e-10
FACE_AREA_TOL = 1e-14


def _readonly(a, dtype=float):
    out = np.array(a, dtype=dtype, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Plane:
    """An unoriented d-plane through the origin in R^n.

    Stored as the n x n orthogonal projection matrix onto the plane; this
    removes any orientation or basis-ordering ambiguity.
    """

    proj: np.ndarray
    dim: int

    def __post_init__(self):
        proj = _readonly(self.proj)
        object.__setattr__(self, "proj", proj)
        if proj.ndim != 2 or proj.shape[0] != proj.shape[1]:
            raise ValueError("projection matrix must be square")
        n = proj.shape[0]
        if not 1 <= self.dim < n:
            raise ValueError(f"plane dimension {self.dim} invalid for ambient dimension {n}")
        if np.max(np.abs(proj - proj.T)) > SYMMETRY_TOL:
            raise ValueError("projection matrix is not symmetric")
        if np.max(np.abs(proj @ proj - proj)) > IDEMPOTENCE_TOL:
            raise ValueError("projection matrix is not idempotent")
        if abs(float(np.trace(proj)) - self.dim) > TRACE_TOL:
            raise ValueError("projector trace does not match the plane dimension")

    @property
    def n(self) -> int:
        return self.proj.shape[0]

    def basis(self) -> np.ndarray:
        """A deterministic orthonormal basis of the plane, rows of shape (dim, n)."""
        return projector_basis(self.proj, self.dim)


def projector_basis(proj, dim):
    """Extract `dim` orthonormal rows spanning the range of a projector.

    Deterministic: eigenvectors ordered by descending eigenvalue, each with
    its first non-negligible component made positive.
    """
    _, vecs = np.linalg.eigh(proj)
    basis = vecs[:, ::-1][:, :dim].T
    return np.array([fix_sign(b) for b in basis])


def fix_sign(v, tol=1e-9):
    """Flip `v` so its first component larger than `tol` in modulus is positive."""
    idx = np.flatnonzero(np.abs(v) > tol)
    j = idx[0] if idx.size else 0
    return -v if v[j] < 0 else v


def plane_from_basis(vectors) -> Plane:
    """Orthogonal projector onto the span of the given vectors.

    Raises DegenerateBasis when the vectors are numerically rank deficient
    (smallest singular value below 1e-10).
    """
    B = np.atleast_2d(np.asarray(vectors, dtype=float))
    k, n = B.shape
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= 1e-10:
        raise DegenerateBasis(f"smallest singular value {sv[-1]:.3e} <= 1e-10")
    if k >= n:
        raise ValueError("a proper plane needs fewer spanning vectors than the ambient dimension")
    q, _ = np.linalg.qr(B.T)
    proj = q @ q.T
    return Plane((proj + proj.T) / 2.0, k)


def plane_distance(p: Plane, s: Plane) -> float:
    """Operator-norm distance between two planes (their projectors)."""
    if p.n != s.n:
        raise DimensionMismatch(f"ambient dimensions differ: {p.n} vs {s.n}")
    ev = np.linalg.eigvalsh(p.proj - s.proj)
    return float(np.max(np.abs(ev)))


def project(p: Plane, v) -> np.ndarray:
    """Orthogonal projection of v onto the plane."""
    v = np.asarray(v, dtype=float)
    if v.shape != (p.n,):
        raise DimensionMismatch(f"vector of length {v.shape} vs ambient {p.n}")
    return p.proj @ v


def project_orth(p: Plane, v) -> np.ndarray:
    """Component of v orthogonal to the plane; project + project_orth == v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (p.n,):
        raise DimensionMismatch(f"vector of length {v.shape} vs ambient {p.n}")
    return v - p.proj @ v


def _validate_plane_stack(planes, d, what):
    """Vectorized projector checks for an (N, n, n) stack."""
    asym = np.max(np.abs(planes - np.transpose(planes, (0, 2, 1))))
    if asym > SYMMETRY_TOL:
        raise ValueError(f"{what}: plane stack not symmetric (max {asym:.3e})")
    idem = np.max(np.abs(np.einsum("kij,kjl->kil", planes, planes) - planes))
    if idem > IDEMPOTENCE_TOL:
        raise ValueError(f"{what}: plane stack not idempotent (max {idem:.3e})")
    traces = np.einsum("kii->k", planes)
    if np.max(np.abs(traces - d)) > TRACE_TOL:
        raise ValueError(f"{what}: some plane has trace != {d}")


def _stack_planes(planes, n, d):
    """Accept an (N, n, n) array, a list of Plane, or (N, d, n) bases."""
    if isinstance(planes, np.ndarray) and planes.ndim == 3 and planes.shape[1:] == (n, n):
        return planes
    if len(planes) and isinstance(planes[0], Plane):
        for p in planes:
            if p.n != n or p.dim != d:
                raise DimensionMismatch("plane ambient/dimension mismatch in stack")
        return np.stack([p.proj for p in planes])
    raise ValueError("planes must be an (N, n, n) array or a sequence of Plane")


class PointCloudVarifold:
    """Weighted points with one unoriented tangent d-plane per point.

    Encodes the atomic measure sum_j m_j * delta_{x_j} (x) delta_{P_j} on
    position x plane space.  `planes` is the (N, n, n) projector stack;
    `bases` optionally keeps an explicit orthonormal tangent basis per point
    (rows), which file round-trips and generators preserve bit-for-bit.
    """

    def __init__(self, points, masses, planes, d, bases=None, validate=True):
        points = _readonly(np.atleast_2d(points))
        masses = _readonly(masses).reshape(-1)
        if points.ndim != 2:
            raise ValueError("points must be an (N, n) array")
        npts, n = points.shape
        if npts < 1:
            raise ValueError("a point cloud varifold needs at least one point")
        if masses.shape != (npts,):
            raise ValueError("masses and points lengths differ")
        if not 1 <= d < n:
            raise ValueError(f"plane dimension {d} invalid for ambient dimension {n}")
        stack = _readonly(_stack_planes(planes, n, d))
        if stack.shape != (npts, n, n):
            raise ValueError("plane stack and points lengths differ")
        if bases is not None:
            bases = _readonly(bases)
            if bases.shape != (npts, d, n):
                raise ValueError("bases must have shape (N, d, n)")
        if validate:
            if np.any(masses <= 0):
                raise ValueError("all masses must be positive")
            _validate_plane_stack(stack, d, "point cloud varifold")
        self.points = points
        self.masses = masses
        self.planes = stack
        self.bases = bases
        self.n = n
        self.d = d

    def __len__(self):
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def plane(self, i) -> Plane:
        return Plane(self.planes[i], self.d)

    def tangent_basis(self, i) -> np.ndarray:
        if self.bases is not None:
            return self.bases[i]
        return projector_basis(self.planes[i], self.d)

    def scaled(self, factor) -> "PointCloudVarifold":
        """Same cloud with all masses multiplied by `factor` > 0."""
        return PointCloudVarifold(self.points, self.masses * factor, self.planes,
                                  self.d, bases=self.bases, validate=False)


class VolumetricVarifold:
    """Axis-aligned cells, each carrying a mass and one unoriented d-plane.

    The associated measure spreads m_K uniformly over the cell K and couples
    it with delta_{P_K} in plane space.
    """

    def __init__(self, cells_lo, cells_hi, masses, planes, d, validate=True):
        lo = _readonly(np.atleast_2d(cells_lo))
        hi = _readonly(np.atleast_2d(cells_hi))
        masses = _readonly(masses).reshape(-1)
        k, n = lo.shape
        if hi.shape != (k, n) or masses.shape != (k,):
            raise ValueError("cells_lo, cells_hi and masses must agree in length")
        if not 1 <= d < n:
            raise ValueError(f"plane dimension {d} invalid for ambient dimension {n}")
        stack = _readonly(_stack_planes(planes, n, d))
        if stack.shape != (k, n, n):
            raise ValueError("plane stack and cells lengths differ")
        if validate:
            if np.any(hi <= lo):
                raise ValueError("every cell must have positive volume")
            if np.any(masses < 0):
                raise ValueError("cell masses must be nonnegative")
            _validate_plane_stack(stack, d, "volumetric varifold")
            _check_disjoint(lo, hi)
        self.cells_lo = lo
        self.cells_hi = hi
        self.masses = masses
        self.planes = stack
        self.n = n
        self.d = d

    def __len__(self):
        return self.cells_lo.shape[0]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def volumes(self) -> np.ndarray:
        return np.prod(self.cells_hi - self.cells_lo, axis=1)


def _check_disjoint(lo, hi):
    # Boxes overlap iff they overlap on every axis with positive measure.
    k = lo.shape[0]
    if k > 4000:
        return  # O(K^2) scan is only worthwhile at desk scale
    for i in range(k):
        inter_lo = np.maximum(lo[i], lo[i + 1:])
        inter_hi = np.minimum(hi[i], hi[i + 1:])
        if np.any(np.all(inter_hi - inter_lo > 1e-12, axis=1)):
            raise ValueError("cells overlap beyond their boundaries")


class TriMesh:
    """Triangle mesh: (V, 3) vertex coordinates, (F, 3) vertex-index faces."""

    def __init__(self, vertices, faces, validate=True):
        vertices = _readonly(np.atleast_2d(vertices))
        faces = _readonly(np.atleast_2d(faces), dtype=np.int64)
        if vertices.shape[1] != 3 or faces.shape[1] != 3:
            raise ValueError("vertices must be (V, 3) and faces (F, 3)")
        if validate:
            if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
                raise ValueError("face index out of range")
            areas = self._areas(vertices, faces)
            if np.any(areas <= FACE_AREA_TOL):
                raise ValueError("degenerate face (area below tolerance)")
        self.vertices = vertices
        self.faces = faces

    @staticmethod
    def _areas(vertices, faces):
        p = vertices[faces]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def face_areas(self) -> np.ndarray:
        return self._areas(self.vertices, self.faces)


class CurvatureField:
    """Per-point curvature vectors with validity flags and magnitudes."""

    def __init__(self, vectors, valid=None, validate=True):
        vectors = _readonly(np.atleast_2d(vectors))
        if valid is None:
            valid = np.ones(len(vectors), dtype=bool)
        valid = _readonly(valid, dtype=bool).reshape(-1)
        if valid.shape[0] != vectors.shape[0]:
            raise ValueError("valid flags and vectors lengths differ")
        magnitudes = _readonly(np.linalg.norm(vectors, axis=1))
        if validate and np.any(valid):
            err = np.max(np.abs(magnitudes[valid] - np.linalg.norm(vectors[valid], axis=1)))
            if err > 1e-12:
                raise ValueError("magnitudes inconsistent with vectors")
        self.vectors = vectors
        self.magnitudes = magnitudes
        self.valid = valid

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]
