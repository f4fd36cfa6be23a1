import numpy as np
import pytest

from varicurve.errors import DegenerateBasis, DimensionMismatch
from varicurve.geometry import (
    CurvatureField,
    Plane,
    PointCloudVarifold,
    TriMesh,
    VolumetricVarifold,
    plane_distance,
    plane_from_basis,
    project,
    project_orth,
)


def random_orthonormal(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q.T


def test_axis_projector():
    p = plane_from_basis([[1.0, 0.0]])
    assert np.allclose(p.proj, np.diag([1.0, 0.0]))
    assert p.dim == 1


def test_diagonal_projector():
    v = np.array([1.0, 1.0]) / np.sqrt(2.0)
    p = plane_from_basis([v])
    assert np.allclose(p.proj, np.full((2, 2), 0.5), atol=1e-14)


def test_rank_deficiency_raises():
    with pytest.raises(DegenerateBasis):
        plane_from_basis([[1.0, 0.0], [1.0, 0.0]])


def test_plane_invariants_random_bases():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n))
        basis = random_orthonormal(rng, n, k)
        p = plane_from_basis(basis)
        assert np.max(np.abs(p.proj - p.proj.T)) <= 1e-12
        assert np.max(np.abs(p.proj @ p.proj - p.proj)) <= 1e-10
        assert abs(np.trace(p.proj) - k) <= 1e-10


def test_basis_rotation_invariance():
    # the projector only depends on the span, not the basis presentation
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(3, 6))
        k = int(rng.integers(2, n))
        basis = random_orthonormal(rng, n, k)
        q, _ = np.linalg.qr(rng.standard_normal((k, k)))
        p1 = plane_from_basis(basis)
        p2 = plane_from_basis(q @ basis)
        assert np.max(np.abs(p1.proj - p2.proj)) <= 1e-12


def test_plane_distance_identity_and_axes():
    x_axis = plane_from_basis([[1.0, 0.0]])
    y_axis = plane_from_basis([[0.0, 1.0]])
    assert plane_distance(x_axis, x_axis) == 0.0
    assert plane_distance(x_axis, y_axis) == pytest.approx(1.0, abs=1e-14)


def test_plane_distance_angle_grid():
    # analytic value |sin(theta)|, cross-checked by a brute-force sup over
    # unit vectors (independent of the eigensolver route)
    x_axis = plane_from_basis([[1.0, 0.0]])
    phis = np.linspace(0.0, 2 * np.pi, 481)
    probe = np.stack([np.cos(phis), np.sin(phis)], axis=1)
    for theta in np.linspace(0.0, np.pi, 37):
        line = plane_from_basis([[np.cos(theta), np.sin(theta)]])
        got = plane_distance(x_axis, line)
        assert got == pytest.approx(abs(np.sin(theta)), abs=1e-12)
        brute = np.max(np.linalg.norm((x_axis.proj - line.proj) @ probe.T, axis=0))
        assert got >= brute - 1e-12
        assert got == pytest.approx(brute, abs=1e-4)


def test_plane_distance_metric_axioms():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n))
        ps = [plane_from_basis(random_orthonormal(rng, n, k)) for _ in range(3)]
        d01 = plane_distance(ps[0], ps[1])
        d10 = plane_distance(ps[1], ps[0])
        d12 = plane_distance(ps[1], ps[2])
        d02 = plane_distance(ps[0], ps[2])
        assert d01 == pytest.approx(d10, abs=1e-15)
        assert d02 <= d01 + d12 + 1e-12
        assert 0.0 <= d01 <= 1.0 + 1e-12


def test_plane_distance_dimension_mismatch():
    p2 = plane_from_basis([[1.0, 0.0]])
    p3 = plane_from_basis([[1.0, 0.0, 0.0]])
    with pytest.raises(DimensionMismatch):
        plane_distance(p2, p3)


def test_projection_split():
    p = plane_from_basis([[1.0, 0.0]])
    v = np.array([3.0, 4.0])
    assert np.allclose(project(p, v), [3.0, 0.0])
    assert np.allclose(project_orth(p, v), [0.0, 4.0])
    with pytest.raises(DimensionMismatch):
        project(p, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(DimensionMismatch):
        project_orth(p, np.array([1.0, 2.0, 3.0]))


def test_projection_of_range_vector_is_identity():
    v = np.array([1.0, 2.0, -1.0])
    p = plane_from_basis([v / np.linalg.norm(v)])
    assert np.max(np.abs(project(p, v) - v)) <= 1e-12


def test_projection_decomposition_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n))
        p = plane_from_basis(random_orthonormal(rng, n, k))
        v = rng.standard_normal(n)
        a, b = project(p, v), project_orth(p, v)
        assert np.max(np.abs(a + b - v)) <= 1e-14
        assert np.max(np.abs(project(p, b))) <= 1e-13


def test_point_cloud_varifold_validation():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    planes = np.tile(np.diag([1.0, 0.0]), (2, 1, 1))
    cloud = PointCloudVarifold(pts, [1.0, 2.0], planes, d=1)
    assert cloud.total_mass == 3.0
    assert cloud.plane(0).dim == 1
    with pytest.raises(ValueError):
        PointCloudVarifold(pts, [1.0, -1.0], planes, d=1)
    with pytest.raises(ValueError):
        PointCloudVarifold(pts, [1.0], planes, d=1)


def test_point_cloud_immutable():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    planes = np.tile(np.diag([1.0, 0.0]), (2, 1, 1))
    cloud = PointCloudVarifold(pts, [1.0, 2.0], planes, d=1)
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 5.0


def test_volumetric_disjointness():
    planes = np.tile(np.diag([1.0, 0.0]), (2, 1, 1))
    VolumetricVarifold([[0, 0], [1, 0]], [[1, 1], [2, 1]], [1.0, 1.0], planes, d=1)
    with pytest.raises(ValueError):
        VolumetricVarifold([[0, 0], [0.5, 0]], [[1, 1], [1.5, 1]],
                           [1.0, 1.0], planes, d=1)


def test_trimesh_validation():
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    mesh = TriMesh(verts, [[0, 1, 2]])
    assert mesh.face_areas()[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        TriMesh(verts, [[0, 1, 3]])
    degenerate = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        TriMesh(degenerate, [[0, 1, 2]])


def test_curvature_field_magnitudes():
    vecs = np.array([[3.0, 4.0], [0.0, 0.0]])
    f = CurvatureField(vecs, [True, False])
    assert f.magnitudes[0] == pytest.approx(5.0, abs=1e-12)
    assert not f.valid[1]
