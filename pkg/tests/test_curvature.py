import math

import numpy as np
import pytest
from scipy.integrate import quad

from varicurve.curvature import (
    CurvatureRequest,
    amc,
    amc_field,
    amc_orth,
    average_field,
    fv_l1_norm,
    neighbor_counts,
    regularized_first_variation,
    regularized_mass,
)
from varicurve.errors import StepTooCoarse
from varicurve.geometry import CurvatureField, PointCloudVarifold, VolumetricVarifold
from varicurve.kernels import KernelPair, KernelProfile, kernel_constants, make_pair, \
    make_profile, nkp
from varicurve.shapes import SamplingSpec, circle, flower, sample


def single_point_cloud(p, plane_dir, mass=1.0):
    t = np.asarray(plane_dir, float)
    t = t / np.linalg.norm(t)
    basis = t[None, None, :]
    planes = np.einsum("nki,nkj->nij", basis, basis)
    return PointCloudVarifold([p], [mass], planes, d=1, bases=basis)


def exp_nkp_12():
    return make_pair("exp-nkp", 1, 2)


def test_first_variation_outside_support_is_zero():
    cloud = single_point_cloud([1.0, 1.0], [1.0, 0.0], mass=3.0)
    rho = make_profile("exp")
    fv = regularized_first_variation(cloud, rho, 0.5, np.array([3.0, 3.0]))
    assert np.all(fv == 0.0)


def test_first_variation_single_term_closed_form():
    p = np.array([0.3, 0.1])
    x = np.array([0.0, 0.0])
    t = np.array([1.0, 2.0]) / math.sqrt(5.0)
    mass, eps = 1.7, 0.8
    cloud = single_point_cloud(p, t, mass)
    rho = make_profile("exp")
    got = regularized_first_variation(cloud, rho, eps, x)
    u = (p - x) / np.linalg.norm(p - x)
    expect = (mass / eps ** 3 * float(rho.derivative(np.linalg.norm(p - x) / eps))
              * (t * float(t @ u)))
    assert np.allclose(got, expect, rtol=1e-12)


def test_first_variation_symmetric_pair_cancels():
    pts = np.array([[-0.2, 0.0], [0.2, 0.0]])
    basis = np.tile(np.array([1.0, 0.0])[None, None, :], (2, 1, 1))
    planes = np.einsum("nki,nkj->nij", basis, basis)
    cloud = PointCloudVarifold(pts, [1.0, 1.0], planes, d=1, bases=basis)
    fv = regularized_first_variation(cloud, make_profile("exp"), 0.5, np.zeros(2))
    assert np.allclose(fv, 0.0, atol=1e-15)


def test_regularized_mass_single_point():
    mass, eps = 2.5, 0.3
    cloud = single_point_cloud([0.5, -0.2], [0.0, 1.0], mass)
    xi = make_profile("exp")
    got = regularized_mass(cloud, xi, eps, np.array([0.5, -0.2]))
    assert got == pytest.approx(mass * eps ** -2 * math.exp(-1.0), rel=1e-14)
    assert regularized_mass(cloud, xi, eps, np.array([5.0, 5.0])) == 0.0


def test_regularized_mass_circle_continuum_limit():
    # oracle: adaptive quadrature of the continuum convolution over the
    # circle, and the density limit C_xi * theta from the mass expansion
    radius, n_pts, eps = 0.5, 100_000, 0.01
    res = sample(circle(radius), SamplingSpec(N=n_pts, seed=0))
    pair = exp_nkp_12()
    x = np.array([radius, 0.0])
    got = eps * regularized_mass(res.cloud, pair.xi, eps, x)  # eps^{n-d} scaling
    theta = n_pts / (2 * math.pi * radius)

    def integrand(t):
        dist = np.linalg.norm(radius * np.array([math.cos(t), math.sin(t)]) - x)
        return float(pair.xi.value(dist / eps)) * radius * theta / eps

    half = 2.5 * eps / radius
    continuum, _ = quad(integrand, -half, half, epsabs=1e-12, limit=200)
    assert got == pytest.approx(continuum, rel=2e-3)
    assert got == pytest.approx(pair.C_xi * theta, rel=2e-2)


def test_amc_circle_inward_value():
    res = sample(circle(0.5), SamplingSpec(N=10_000, seed=1))
    req = CurvatureRequest(eps=0.01, pair=exp_nkp_12())
    h = amc(res.cloud, req, res.cloud.points[0])
    assert np.linalg.norm(h) == pytest.approx(2.0, rel=2e-2)
    assert h @ res.cloud.points[0] < 0  # points toward the center


def test_amc_empty_ball_invalid():
    res = sample(circle(0.5), SamplingSpec(N=100, seed=1))
    req = CurvatureRequest(eps=0.01, pair=exp_nkp_12())
    assert amc(res.cloud, req, np.array([10.0, 10.0])) is None


def test_amc_field_isolated_points_with_positive_self_term():
    # far-apart points with the plain exp pair: numerator empty but the
    # denominator keeps the self term xi(0) > 0, so vectors are 0 and valid
    pts = np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]])
    basis = np.tile(np.array([1.0, 0.0])[None, None, :], (3, 1, 1))
    planes = np.einsum("nki,nkj->nij", basis, basis)
    cloud = PointCloudVarifold(pts, np.ones(3), planes, d=1, bases=basis)
    fld = amc_field(cloud, CurvatureRequest(eps=0.5, pair=make_pair("exp", 1, 2)))
    assert fld.valid.all()
    assert np.all(fld.vectors == 0.0)
    # with a companion pair xi(0) = 0, so the same cloud is all-invalid
    fld = amc_field(cloud, CurvatureRequest(eps=0.5, pair=exp_nkp_12()))
    assert not fld.valid.any()


def test_amc_field_matches_pointwise_ops():
    res = sample(flower(), SamplingSpec(N=1500, seed=2))
    for orth in (False, True):
        req = CurvatureRequest(eps=0.05, pair=exp_nkp_12(), orth=orth)
        fld = amc_field(res.cloud, req)
        assert len(fld) == len(res.cloud)
        for j in (0, 123, 777, 1499):
            ref = (amc_orth(res.cloud, req, j) if orth
                   else amc(res.cloud, req, res.cloud.points[j]))
            assert np.allclose(fld.vectors[j], ref, atol=1e-10)


def test_segment_tangential_drift_vs_orthogonal():
    # asymmetric sampling of a straight segment: the plain value drifts
    # along the line, the orthogonal one vanishes identically
    xs = np.array([-0.9, -0.7, -0.52, -0.33, -0.18, -0.05, 0.0, 0.3, 0.8])
    pts = np.stack([xs, np.zeros_like(xs)], axis=1)
    planes = np.tile(np.diag([1.0, 0.0]), (len(xs), 1, 1))
    cloud = PointCloudVarifold(pts, np.ones(len(xs)), planes, d=1)
    req = CurvatureRequest(eps=0.6, pair=make_pair("exp", 1, 2))
    j0 = int(np.flatnonzero(xs == 0.0)[0])
    plain = amc(cloud, req, pts[j0])
    ortho = amc_orth(cloud, req, j0)
    assert np.linalg.norm(plain) > 1e-3
    assert np.all(ortho == 0.0)


def test_orth_perpendicularity():
    res = sample(flower(), SamplingSpec(N=2000, seed=3))
    req = CurvatureRequest(eps=0.03, pair=exp_nkp_12(), orth=True)
    fld = amc_field(res.cloud, req)
    for j in range(0, 2000, 79):
        if not fld.valid[j] or fld.magnitudes[j] == 0:
            continue
        tangent = res.cloud.bases[j][0]
        assert abs(tangent @ fld.vectors[j]) <= 1e-12 * fld.magnitudes[j]


def test_kernel_scale_invariance():
    res = sample(circle(0.5), SamplingSpec(N=600, seed=4))
    base_req = CurvatureRequest(eps=0.06, pair=exp_nkp_12())
    base = amc_field(res.cloud, base_req)
    rho, xi = make_profile("exp"), nkp(make_profile("exp"), 2)
    a, b = 2.0, 0.125  # powers of two keep the comparison at full precision
    rho_s = KernelProfile("r", lambda r: a * np.asarray(rho.value(r)),
                          lambda r: a * np.asarray(rho.derivative(r)))
    xi_s = KernelProfile("x", lambda r: b * np.asarray(xi.value(r)),
                         lambda r: b * np.asarray(xi.derivative(r)))
    cr, cx = kernel_constants(rho_s, xi_s, 1)
    pair = KernelPair(rho_s, xi_s, cr, cx, 1, 2)
    scaled = amc_field(res.cloud, CurvatureRequest(eps=0.06, pair=pair))
    assert np.max(np.abs(scaled.vectors - base.vectors)) <= 1e-10


def test_rigid_motion_equivariance():
    rng = np.random.default_rng(5)
    res = sample(flower(), SamplingSpec(N=800, seed=5))
    req = CurvatureRequest(eps=0.05, pair=exp_nkp_12(), orth=True)
    base = amc_field(res.cloud, req)
    theta = rng.uniform(0, 2 * np.pi)
    q = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    shift = rng.uniform(-3, 3, 2)
    moved = PointCloudVarifold(res.cloud.points @ q.T + shift, res.cloud.masses,
                               np.einsum("ij,njk,lk->nil", q, res.cloud.planes, q),
                               d=1, validate=False)
    fld = amc_field(moved, req)
    assert np.max(np.abs(fld.vectors - base.vectors @ q.T)) <= 1e-9


def test_mass_scaling_invariance():
    res = sample(circle(0.5), SamplingSpec(N=500, seed=6))
    req = CurvatureRequest(eps=0.06, pair=exp_nkp_12())
    base = amc_field(res.cloud, req)
    doubled = amc_field(res.cloud.scaled(2.0), req)
    assert np.array_equal(base.vectors, doubled.vectors)
    odd = amc_field(res.cloud.scaled(3.7), req)
    assert np.max(np.abs(odd.vectors - base.vectors)) <= 1e-12 * np.max(base.magnitudes)


def test_collinear_exactness():
    xs = np.linspace(-1.0, 1.0, 11) ** 3  # uneven spacing
    pts = np.stack([xs, np.zeros_like(xs)], axis=1)
    planes = np.tile(np.diag([1.0, 0.0]), (11, 1, 1))
    cloud = PointCloudVarifold(pts, np.ones(11), planes, d=1)
    req = CurvatureRequest(eps=0.7, pair=make_pair("exp", 1, 2))
    for j0 in range(11):
        v = amc_orth(cloud, req, j0)
        assert np.all(v == 0.0)


def test_include_constants_toggle():
    res = sample(circle(0.5), SamplingSpec(N=400, seed=7))
    pair = exp_nkp_12()
    with_c = amc(res.cloud, CurvatureRequest(eps=0.08, pair=pair), res.cloud.points[3])
    without = amc(res.cloud, CurvatureRequest(eps=0.08, pair=pair,
                                              include_constants=False), res.cloud.points[3])
    assert np.allclose(without * pair.C_xi / pair.C_rho, with_c, rtol=1e-14)


def test_average_field_constant_unchanged():
    res = sample(circle(0.5), SamplingSpec(N=200, seed=8))
    const = CurvatureField(np.tile([1.5, -0.5], (200, 1)))
    out = average_field(const, res.cloud, 0.2)
    assert np.allclose(out.vectors, const.vectors, atol=1e-14)


def test_average_field_small_radius_unchanged():
    res = sample(circle(0.5), SamplingSpec(N=100, seed=9))
    fld = amc_field(res.cloud, CurvatureRequest(eps=0.2, pair=exp_nkp_12()))
    spacing = np.linalg.norm(res.cloud.points[1] - res.cloud.points[0])
    out = average_field(fld, res.cloud, 0.5 * spacing)
    assert np.array_equal(out.vectors, fld.vectors)


def test_average_field_skips_invalid_sources():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0]])
    planes = np.tile(np.diag([1.0, 0.0]), (3, 1, 1))
    cloud = PointCloudVarifold(pts, np.ones(3), planes, d=1)
    fld = CurvatureField(np.array([[1.0, 0.0], [9.0, 9.0], [3.0, 0.0]]),
                         [True, False, True])
    out = average_field(fld, cloud, 0.5)
    assert np.allclose(out.vectors[0], [2.0, 0.0])
    assert not out.valid[1]


# ---------------------------------------------------------------------------
# volumetric varifolds


def box_varifold(lo, hi, mass, direction):
    t = np.asarray(direction, float)
    t = t / np.linalg.norm(t)
    plane = np.outer(t, t)
    return VolumetricVarifold([lo], [hi], [mass], plane[None], d=1)


def dense_cell_integral(lo, hi, x, eps, rho, samples=160):
    """Brute-force midpoint quadrature oracle for one cell."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    g0 = lo[0] + (np.arange(samples) + 0.5) * (hi[0] - lo[0]) / samples
    g1 = lo[1] + (np.arange(samples) + 0.5) * (hi[1] - lo[1]) / samples
    xx, yy = np.meshgrid(g0, g1, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    z = pts - x
    dist = np.linalg.norm(z, axis=1)
    good = (dist > 0) & (dist < eps)
    grad = np.zeros_like(z)
    grad[good] = np.atleast_1d(rho.derivative(dist[good] / eps))[:, None] \
        * z[good] / dist[good, None]
    cellvol = np.prod(hi - lo)
    return grad.sum(axis=0) * cellvol / samples ** 2 / eps ** 3


def test_volumetric_first_variation_vs_dense_quadrature():
    # 3-point Gauss with one subdivision on straddling cells: about 0.5%
    # relative accuracy for cells a third of the kernel width and a couple
    # of percent for straddling cells as large as the kernel itself
    rho = make_profile("exp")
    t = np.array([1.0, 1.0]) / math.sqrt(2.0)
    proj = np.outer(t, t)
    cases = [
        ([0.0, 0.0], [0.35, 0.35], np.array([0.1, 0.05]), 0.5, 5e-3),
        ([0.0, 0.0], [0.35, 0.35], np.array([-0.2, 0.1]), 0.4, 2.5e-2),
        ([0.0, 0.0], [0.35, 0.35], np.array([0.17, 0.18]), 0.3, 2.5e-2),
        ([0.0, 0.0], [0.06, 0.06], np.array([-0.15, 0.03]), 0.2, 5e-3),
    ]
    for lo, hi, x, eps, rtol in cases:
        vol = box_varifold(lo, hi, 2.0, [1.0, 1.0])
        got = regularized_first_variation(vol, rho, eps, x)
        area = np.prod(np.asarray(hi) - np.asarray(lo))
        expect = 2.0 / area * proj @ dense_cell_integral(lo, hi, x, eps, rho)
        assert np.allclose(got, expect, rtol=rtol, atol=1e-9)


def test_volumetric_mass_nonnegative_and_far_zero():
    vol = box_varifold([0, 0], [0.2, 0.2], 1.0, [1, 0])
    xi = make_profile("exp")
    assert regularized_mass(vol, xi, 0.5, np.array([0.1, 0.1])) > 0
    assert regularized_mass(vol, xi, 0.1, np.array([5.0, 5.0])) == 0.0
    assert amc(vol, CurvatureRequest(eps=0.5, pair=make_pair("exp", 1, 2)),
               np.array([0.1, 0.1])) is not None


# ---------------------------------------------------------------------------
# L1 diagnostic


def test_fv_l1_scaling_law():
    cloud = single_point_cloud([0.0, 0.0], [1.0, 0.0])
    rho = make_profile("exp")
    values = []
    for eps in (0.05, 0.1, 0.2):
        bbox = ([-1.3 * eps, -1.3 * eps], [1.3 * eps, 1.3 * eps])
        values.append(eps * fv_l1_norm(cloud, rho, eps, bbox, eps / 40))
    spread = (max(values) - min(values)) / np.mean(values)
    assert spread <= 0.02


def test_fv_l1_zero_mass():
    pts = np.array([[0.0, 0.0]])
    planes = np.tile(np.diag([1.0, 0.0]), (1, 1, 1))
    vol = VolumetricVarifold([[0, 0]], [[0.1, 0.1]], [0.0], planes, d=1)
    assert fv_l1_norm(vol, make_profile("exp"), 0.2, ([-1, -1], [1, 1]), 0.05) == 0.0


def test_fv_l1_step_too_coarse():
    cloud = single_point_cloud([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(StepTooCoarse):
        fv_l1_norm(cloud, make_profile("exp"), 0.1, ([-1, -1], [1, 1]), 0.1)


def test_fv_l1_stable_under_refinement():
    rho = make_profile("exp")
    eps = 0.1
    values = []
    for n_pts in (2000, 4000):
        res = sample(circle(0.5), SamplingSpec(N=n_pts, seed=3))
        cloud = res.cloud.scaled(1.0 / n_pts)  # fixed total mass
        bbox = ([-0.75, -0.75], [0.75, 0.75])
        values.append(fv_l1_norm(cloud, rho, eps, bbox, eps / 6))
    assert abs(values[1] - values[0]) <= 0.05 * values[0]


def test_neighbor_counts():
    res = sample(circle(0.5), SamplingSpec(N=1000, seed=0))
    counts = neighbor_counts(res.cloud.points, 0.05)
    # arc length 0.1 over circumference pi at N=1000 => about 32 points
    assert counts.mean() == pytest.approx(1000 * 0.1 / math.pi, rel=0.05)


def test_amc_rejects_orth_request():
    res = sample(circle(0.5), SamplingSpec(N=100, seed=0))
    req = CurvatureRequest(eps=0.1, pair=exp_nkp_12(), orth=True)
    with pytest.raises(ValueError):
        amc(res.cloud, req, res.cloud.points[0])


def test_threaded_field_matches_serial():
    res = sample(flower(), SamplingSpec(N=3000, seed=10))
    req = CurvatureRequest(eps=0.04, pair=exp_nkp_12(), orth=True)
    serial = amc_field(res.cloud, req, threads=1)
    threaded = amc_field(res.cloud, req, threads=3)
    assert np.array_equal(serial.vectors, threaded.vectors)
    assert np.array_equal(serial.valid, threaded.valid)
