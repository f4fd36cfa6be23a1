"""Cotangent curvature on triangle meshes and its first-variation twin.

Two genuinely independent implementations of the same vertex quantity:

* `cotangent_curvature` sums (cot a + cot b)(w - v)/2 over the one-ring,
  with the angles read off the face geometry;
* `first_variation_nodal` integrates the (constant) tangential gradient of
  the vertex hat function over each star face, the gradient computed
  geometrically from the altitude foot, never from cotangents.

The two agree up to sign: first_variation_nodal == -cotangent_curvature.
Dividing by a third of the star area turns the sum into a vertex mean
curvature estimate that converges to the smooth value under refinement.
"""

from __future__ import annotations

import numpy as np

from .errors import BoundaryVertex, DegenerateFace, DegenerateStar
from .geometry import TriMesh

MIN_ANGLE = 1e-6  # radians; faces with a smaller angle are rejected


def vertex_star(mesh: TriMesh, v: int) -> np.ndarray:
    """Faces incident to v; raises BoundaryVertex unless every incident
    edge has exactly two incident faces among them."""
    star = np.flatnonzero(np.any(mesh.faces == v, axis=1))
    if star.size == 0:
        raise BoundaryVertex(f"vertex {v} has no incident faces")
    edge_count = {}
    for f in mesh.faces[star]:
        for w in f:
            if w != v:
                edge_count[w] = edge_count.get(w, 0) + 1
    if any(c != 2 for c in edge_count.values()):
        raise BoundaryVertex(f"vertex {v} is not interior to a manifold patch")
    return star


def _check_angles(p0, p1, p2):
    for a, b, c in ((p0, p1, p2), (p1, p2, p0), (p2, p0, p1)):
        u, w = b - a, c - a
        cross = np.linalg.norm(np.cross(u, w))
        dot = float(u @ w)
        if np.arctan2(cross, dot) < MIN_ANGLE:
            raise DegenerateFace("face angle below tolerance")


def _cot(u, w):
    return float(u @ w) / np.linalg.norm(np.cross(u, w))


def cotangent_curvature(mesh: TriMesh, v: int) -> np.ndarray:
    """(1/2) sum over ring neighbors w of (cot a_vw + cot b_vw)(w - v)."""
    star = vertex_star(mesh, v)
    verts = mesh.vertices
    acc = np.zeros(3)
    for f in mesh.faces[star]:
        i = int(np.flatnonzero(f == v)[0])
        w1, w2 = verts[f[(i + 1) % 3]], verts[f[(i + 2) % 3]]
        p = verts[v]
        _check_angles(p, w1, w2)
        # angle at w2 is opposite the edge (v, w1) and vice versa
        acc += _cot(p - w2, w1 - w2) * (w1 - p)
        acc += _cot(p - w1, w2 - w1) * (w2 - p)
    return 0.5 * acc


def first_variation_nodal(mesh: TriMesh, v: int) -> np.ndarray:
    """First variation of the mesh measure paired with the hat function at v.

    Per star face the hat-function gradient is the constant in-plane vector
    of modulus 1/h pointing from the opposite edge's altitude foot to v,
    so the integral is  sum_F area(F) * (-1/h_F) (y_F - v)/|y_F - v|.
    """
    star = vertex_star(mesh, v)
    verts = mesh.vertices
    acc = np.zeros(3)
    for f in mesh.faces[star]:
        i = int(np.flatnonzero(f == v)[0])
        a, b = verts[f[(i + 1) % 3]], verts[f[(i + 2) % 3]]
        p = verts[v]
        _check_angles(p, a, b)
        edge = b - a
        foot = a + (float((p - a) @ edge) / float(edge @ edge)) * edge
        h = np.linalg.norm(p - foot)
        area = 0.5 * np.linalg.norm(np.cross(a - p, b - p))
        acc += area * (-1.0 / h) * (foot - p) / h
    return acc


def vertex_mean_curvature(mesh: TriMesh, v: int) -> np.ndarray:
    """Cotangent sum normalized by a third of the star area.

    Equals (3/2) sum (cot a + cot b)(w - v) / sum_F area(F); on refined
    sphere meshes of radius R the modulus approaches 2/R.
    """
    star = vertex_star(mesh, v)
    areas = mesh.face_areas()[star]
    total = float(np.sum(areas))
    if total <= 0.0:
        raise DegenerateStar(f"vertex {v} has zero star area")
    return cotangent_curvature(mesh, v) / (total / 3.0)
