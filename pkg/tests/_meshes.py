"""Mesh builders shared by the cotangent and CLI tests."""

import numpy as np

from varicurve.geometry import TriMesh


def fan_mesh(ring, apex=(0.0, 0.0, 0.0)):
    """Closed triangle fan: apex is vertex 0, ring vertices cycle around it."""
    verts = np.vstack([np.asarray(apex, float)[None, :], np.asarray(ring, float)])
    k = len(ring)
    faces = [[0, 1 + i, 1 + (i + 1) % k] for i in range(k)]
    return TriMesh(verts, faces)


def regular_fan(k=6, radius=1.0, height=0.0):
    angles = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False)
    ring = np.stack([radius * np.cos(angles), radius * np.sin(angles),
                     np.zeros(k)], axis=1)
    return fan_mesh(ring, apex=(0.0, 0.0, height))


def random_star(rng, min_ring=3, max_ring=9):
    """Random valid vertex star (resampled until far from degenerate)."""
    while True:
        k = int(rng.integers(min_ring, max_ring + 1))
        angles = np.sort(rng.uniform(0, 2 * np.pi, k))
        if np.min(np.diff(angles, append=angles[0] + 2 * np.pi)) < 0.15:
            continue
        radii = rng.uniform(0.5, 1.6, k)
        ring = np.stack([radii * np.cos(angles), radii * np.sin(angles),
                         rng.normal(0.0, 0.3, k)], axis=1)
        apex = np.array([0.0, 0.0, float(rng.normal(0.0, 0.4))])
        try:
            return fan_mesh(ring, apex)
        except ValueError:
            continue


def icosahedron(radius=1.0):
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            verts += [[0.0, a, b], [a, b, 0.0], [b, 0.0, a]]
    verts = np.array(verts)
    verts *= radius / np.linalg.norm(verts[0])
    from scipy.spatial import ConvexHull

    faces = ConvexHull(verts).simplices
    return TriMesh(verts, faces)


def icosphere(radius=1.0, levels=0):
    """Icosahedron subdivided `levels` times, vertices projected to the sphere."""
    mesh = icosahedron(radius)
    verts = [v for v in mesh.vertices]
    faces = [tuple(f) for f in mesh.faces]
    for _ in range(levels):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = 0.5 * (verts[i] + verts[j])
                m *= radius / np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(np.array(verts), np.array(faces))
