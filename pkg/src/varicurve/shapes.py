"""Parametric test shapes, exact curvature oracles, and sampling models.

2D curves are sampled at parameters j*h (h = 2*pi/N), optionally with
Gaussian parameter jitter and/or Gaussian position noise; composite shapes
(two circles, double bubbles) distribute points over their arcs or caps
proportionally to length or area.  Every generator can attach exact tangent
planes from the parametrization or regression planes recomputed from the
(possibly noisy) positions.

Randomness comes from numpy's PCG64 generator seeded with the 64-bit seed
in the sampling spec, so clouds are bit-reproducible across machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BadShape, JunctionPoint
from .geometry import PointCloudVarifold
from .tangents import estimate_planes

PARAMETRIC_KINDS = ("circle", "ellipse", "flower", "eight")
COMPOSITE_KINDS = ("two_circles", "double_bubble_2d", "double_bubble_3d")


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PARAMETRIC_KINDS + COMPOSITE_KINDS:
            raise BadShape(f"unknown shape kind {self.kind!r}")
        for key, val in self.params.items():
            if key.startswith("r") and not val > 0 and not math.isinf(val):
                raise BadShape(f"shape parameter {key}={val} must be positive")


def circle(radius: float = 0.5) -> ShapeSpec:
    if not radius > 0:
        raise BadShape("circle radius must be positive")
    return ShapeSpec("circle", {"radius": radius})


def ellipse(a: float = 1.0, b: float = 0.5) -> ShapeSpec:
    if not (a > 0 and b > 0):
        raise BadShape("ellipse semi-axes must be positive")
    return ShapeSpec("ellipse", {"a": a, "b": b})


def flower(base: float = 0.5, amplitude: float = 0.5, petals: int = 6,
           phase: float = math.pi / 2) -> ShapeSpec:
    if not base > 0 or not 0 <= amplitude < 1:
        raise BadShape("flower needs base > 0 and 0 <= amplitude < 1")
    return ShapeSpec("flower", {"base": base, "amplitude": amplitude,
                                "petals": float(petals), "phase": phase})


def eight(scale: float = 0.5) -> ShapeSpec:
    if not scale > 0:
        raise BadShape("eight scale must be positive")
    return ShapeSpec("eight", {"scale": scale})


def two_circles(radius: float = 0.5, separation: Optional[float] = None) -> ShapeSpec:
    """Union of two circles of equal radius with centers on the x-axis.

    The default separation equals the radius, which places each center on
    the other circle and makes the crossing-point curvature average have
    modulus sqrt(3)/(2*radius).
    """
    if separation is None:
        separation = radius
    if not radius > 0 or not 0 < separation < 2 * radius:
        raise BadShape("two_circles needs 0 < separation < 2 * radius")
    return ShapeSpec("two_circles", {"radius": radius, "separation": separation})


def double_bubble(dim: int, r_outer_1: float = 1.0, r_outer_2: float = 0.6) -> ShapeSpec:
    """Standard double bubble: two outer caps and an interface meeting at 120 deg.

    Requires r_outer_1 >= r_outer_2 > 0.  The interface radius satisfies
    1/r0 = 1/r2 - 1/r1 (flat interface when the outer radii are equal).
    Derived construction data (junction offset, centers, angles) is stored
    in the params for reproducibility.
    """
    if dim not in (2, 3):
        raise BadShape("double bubble dimension must be 2 or 3")
    r1, r2 = float(r_outer_1), float(r_outer_2)
    if not r1 >= r2 > 0:
        raise BadShape("double bubble needs r_outer_1 >= r_outer_2 > 0")
    geo = _bubble_geometry(r1, r2)
    kind = "double_bubble_2d" if dim == 2 else "double_bubble_3d"
    return ShapeSpec(kind, {"r1": r1, "r2": r2, **geo})


def _bubble_geometry(r1: float, r2: float) -> dict:
    # Junctions at (0, +-a); centers on the x-axis.  The half-angles seen
    # from each center satisfy a1 + a2 = 120 deg and a0 = 60 deg - a1, which
    # is exactly the 120-degree meeting condition at the junctions.
    alpha1 = math.atan2(math.sqrt(3.0) * r2, 2.0 * r1 - r2)
    alpha2 = 2.0 * math.pi / 3.0 - alpha1
    alpha0 = math.pi / 3.0 - alpha1
    a = r1 * math.sin(alpha1)
    flat = alpha0 < 1e-12
    r0 = math.inf if flat else a / math.sin(alpha0)
    return {
        "interface_radius": r0,
        "junction_offset": a,
        "alpha1": alpha1,
        "alpha2": alpha2,
        "alpha0": alpha0,
        "c1x": -r1 * math.cos(alpha1),
        "c2x": r2 * math.cos(alpha2),
        "c0x": 0.0 if flat else r0 * math.cos(alpha0),
    }


@dataclass(frozen=True)
class SamplingSpec:
    N: int
    mode: str = "uniform_parameter"
    tangent_mode: str = "exact"
    noise_variance: Optional[float] = None
    noise_as_std: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.N < 4:
            raise ValueError("need at least 4 sample points")
        if self.mode not in ("uniform_parameter", "nonuniform_gaussian"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.tangent_mode not in ("exact", "regression"):
            raise ValueError(f"unknown tangent mode {self.tangent_mode!r}")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")


class SampleResult:
    """A sampled cloud plus the exact per-point curvature oracle."""

    def __init__(self, cloud, oracle, t, arc, arc_counts, h, shape, spec):
        self.cloud = cloud
        self.oracle = oracle
        self.t = t
        self.arc = arc
        self.arc_counts = arc_counts
        self.h = h
        self.shape = shape
        self.spec = spec


# ---------------------------------------------------------------------------
# parametric curves


def _flower_radial(shape, theta):
    p = shape.params
    u = p["petals"] * theta + p["phase"]
    r = p["base"] * (1.0 + p["amplitude"] * np.sin(u))
    rp = p["base"] * p["amplitude"] * p["petals"] * np.cos(u)
    rpp = -p["base"] * p["amplitude"] * p["petals"] ** 2 * np.sin(u)
    return r, rp, rpp


def curve_point(shape: ShapeSpec, t):
    t = np.asarray(t, dtype=float)
    p = shape.params
    if shape.kind == "circle":
        r = p["radius"]
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    if shape.kind == "ellipse":
        return np.stack([p["a"] * np.cos(t), p["b"] * np.sin(t)], axis=-1)
    if shape.kind == "flower":
        r, _, _ = _flower_radial(shape, t)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    if shape.kind == "eight":
        s = p["scale"]
        return np.stack([s * np.sin(t) * (np.cos(t) + 1.0),
                         s * np.sin(t) * (np.cos(t) - 1.0)], axis=-1)
    raise BadShape(f"{shape.kind} is not a single-parameter curve")


def curve_velocity(shape: ShapeSpec, t):
    t = np.asarray(t, dtype=float)
    p = shape.params
    if shape.kind == "circle":
        r = p["radius"]
        return np.stack([-r * np.sin(t), r * np.cos(t)], axis=-1)
    if shape.kind == "ellipse":
        return np.stack([-p["a"] * np.sin(t), p["b"] * np.cos(t)], axis=-1)
    if shape.kind == "flower":
        r, rp, _ = _flower_radial(shape, t)
        c, s = np.cos(t), np.sin(t)
        return np.stack([rp * c - r * s, rp * s + r * c], axis=-1)
    if shape.kind == "eight":
        s = p["scale"]
        return np.stack([s * (np.cos(2 * t) + np.cos(t)),
                         s * (np.cos(2 * t) - np.cos(t))], axis=-1)
    raise BadShape(f"{shape.kind} is not a single-parameter curve")


def _curve_acceleration(shape: ShapeSpec, t):
    t = np.asarray(t, dtype=float)
    p = shape.params
    if shape.kind == "circle":
        r = p["radius"]
        return np.stack([-r * np.cos(t), -r * np.sin(t)], axis=-1)
    if shape.kind == "ellipse":
        return np.stack([-p["a"] * np.cos(t), -p["b"] * np.sin(t)], axis=-1)
    if shape.kind == "flower":
        r, rp, rpp = _flower_radial(shape, t)
        c, s = np.cos(t), np.sin(t)
        return np.stack([(rpp - r) * c - 2 * rp * s, (rpp - r) * s + 2 * rp * c], axis=-1)
    if shape.kind == "eight":
        s = p["scale"]
        return np.stack([s * (-2 * np.sin(2 * t) - np.sin(t)),
                         s * (-2 * np.sin(2 * t) + np.sin(t))], axis=-1)
    raise BadShape(f"{shape.kind} is not a single-parameter curve")


def _curvature_vector_parametric(shape: ShapeSpec, t):
    """Curvature vector from the normal acceleration: (g'' - (g''.T)T)/|g'|^2."""
    if shape.kind == "flower":
        # polar formula: kappa = (r^2 + 2 r'^2 - r r'') / (r^2 + r'^2)^{3/2}
        t = np.asarray(t, dtype=float)
        r, rp, rpp = _flower_radial(shape, t)
        denom = (r * r + rp * rp) ** 1.5
        kappa = (r * r + 2 * rp * rp - r * rpp) / denom
        vel = curve_velocity(shape, t)
        speed = np.linalg.norm(vel, axis=-1, keepdims=True)
        tang = vel / speed
        left_normal = np.stack([-tang[..., 1], tang[..., 0]], axis=-1)
        return kappa[..., None] * left_normal
    vel = curve_velocity(shape, t)
    acc = _curve_acceleration(shape, t)
    speed2 = np.einsum("...i,...i->...", vel, vel)
    tang = vel / np.sqrt(speed2)[..., None]
    acc_t = np.einsum("...i,...i->...", acc, tang)
    return (acc - acc_t[..., None] * tang) / speed2[..., None]


def exact_curvature(shape: ShapeSpec, t, arc: Optional[int] = None):
    """Exact curvature vector(s) of the shape at parameter t.

    For composite shapes `arc` addresses the smooth piece and t is the angle
    on it; asking exactly at a junction raises JunctionPoint because the
    pointwise value there is only defined as a branch average.
    """
    if shape.kind in PARAMETRIC_KINDS:
        return _curvature_vector_parametric(shape, t)
    if shape.kind == "two_circles":
        if arc is None:
            raise BadShape("two_circles needs an arc index")
        r = shape.params["radius"]
        sep = shape.params["separation"]
        center = np.array([-sep / 2 if arc == 0 else sep / 2, 0.0])
        junction_angles = _two_circle_junction_angles(shape, arc)
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(np.min(np.abs(_angdiff(t_arr[:, None], junction_angles[None, :])), axis=1) < 1e-12):
            raise JunctionPoint("curvature at a circle intersection is a branch average")
        pos = center + r * np.stack([np.cos(t_arr), np.sin(t_arr)], axis=-1)
        out = (center - pos) / r ** 2
        return out[0] if np.ndim(t) == 0 else out
    if shape.kind == "double_bubble_2d":
        arcs = _bubble2d_arcs(shape)
        if arc is None or not 0 <= arc < len(arcs):
            raise BadShape("double bubble needs an arc index in {0, 1, 2}")
        return _arc_curvature(arcs[arc], t)
    if shape.kind == "double_bubble_3d":
        caps = _bubble3d_caps(shape)
        if arc is None or not 0 <= arc < len(caps):
            raise BadShape("double bubble needs a cap index in {0, 1, 2}")
        return _cap_curvature(caps[arc], t)
    raise BadShape(f"no exact curvature for {shape.kind!r}")


def _angdiff(a, b):
    return (a - b + math.pi) % (2 * math.pi) - math.pi


def _two_circle_junction_angles(shape, arc):
    r, sep = shape.params["radius"], shape.params["separation"]
    h = math.sqrt(r * r - sep * sep / 4.0)
    cx = -sep / 2 if arc == 0 else sep / 2
    return np.array([math.atan2(h, -cx), math.atan2(-h, -cx)])


# ---------------------------------------------------------------------------
# composite 2D pieces


class _Arc:
    """Circular arc (or straight segment when radius is inf)."""

    def __init__(self, center, radius, phi0, phi1, closed=False, segment=None):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.phi0 = phi0
        self.phi1 = phi1
        self.closed = closed
        self.segment = segment  # (start, end) for the flat-interface case

    @property
    def length(self):
        if self.segment is not None:
            return float(np.linalg.norm(self.segment[1] - self.segment[0]))
        return self.radius * (self.phi1 - self.phi0)

    def points(self, count, params):
        if self.segment is not None:
            a, b = self.segment
            return a + (b - a) * params[:, None]
        phis = params
        return self.center + self.radius * np.stack([np.cos(phis), np.sin(phis)], axis=-1)

    def parameters(self, count):
        if self.segment is not None:
            return (np.arange(count) + 0.5) / count
        span = self.phi1 - self.phi0
        if self.closed:
            return self.phi0 + span * np.arange(count) / count
        return self.phi0 + span * (np.arange(count) + 0.5) / count

    def tangents(self, params):
        if self.segment is not None:
            a, b = self.segment
            t = (b - a) / np.linalg.norm(b - a)
            return np.tile(t, (len(params), 1))
        return np.stack([-np.sin(params), np.cos(params)], axis=-1)

    def curvature(self, pos):
        if self.segment is not None:
            return np.zeros_like(pos)
        return (self.center - pos) / self.radius ** 2


def _arc_curvature(arc: _Arc, t):
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if arc.segment is None and not arc.closed:
        if np.any(np.abs(t_arr - arc.phi0) < 1e-12) or np.any(np.abs(t_arr - arc.phi1) < 1e-12):
            raise JunctionPoint("curvature at an arc junction is a branch average")
    pos = arc.points(len(t_arr), t_arr)
    out = arc.curvature(pos)
    return out[0] if np.ndim(t) == 0 else out


def _two_circle_arcs(shape) -> list[_Arc]:
    r, sep = shape.params["radius"], shape.params["separation"]
    return [_Arc([-sep / 2, 0.0], r, 0.0, 2 * math.pi, closed=True),
            _Arc([sep / 2, 0.0], r, 0.0, 2 * math.pi, closed=True)]


def _bubble2d_arcs(shape) -> list[_Arc]:
    p = shape.params
    a1, a2, a0 = p["alpha1"], p["alpha2"], p["alpha0"]
    a = p["junction_offset"]
    arcs = [
        _Arc([p["c1x"], 0.0], p["r1"], a1, 2 * math.pi - a1),
        _Arc([p["c2x"], 0.0], p["r2"], a2 - math.pi, math.pi - a2),
    ]
    if math.isinf(p["interface_radius"]):
        arcs.append(_Arc([0.0, 0.0], math.inf, 0.0, 0.0,
                         segment=(np.array([0.0, -a]), np.array([0.0, a]))))
    else:
        arcs.append(_Arc([p["c0x"], 0.0], p["interface_radius"],
                         math.pi - a0, math.pi + a0))
    return arcs


# ---------------------------------------------------------------------------
# composite 3D pieces (spherical caps about the x-axis)


class _Cap:
    """Spherical cap (polar angle from +x) or a flat disk at x = 0."""

    def __init__(self, center_x, radius, th0, th1, disk_radius=None):
        self.center = np.array([center_x, 0.0, 0.0])
        self.radius = float(radius)
        self.th0 = th0
        self.th1 = th1
        self.disk_radius = disk_radius

    @property
    def area(self):
        if self.disk_radius is not None:
            return math.pi * self.disk_radius ** 2
        return 2 * math.pi * self.radius ** 2 * (math.cos(self.th0) - math.cos(self.th1))


def _bubble3d_caps(shape) -> list[_Cap]:
    p = shape.params
    a1, a2, a0 = p["alpha1"], p["alpha2"], p["alpha0"]
    caps = [
        _Cap(p["c1x"], p["r1"], a1, math.pi),
        _Cap(p["c2x"], p["r2"], 0.0, math.pi - a2),
    ]
    if math.isinf(p["interface_radius"]):
        caps.append(_Cap(0.0, math.inf, 0.0, 0.0, disk_radius=p["junction_offset"]))
    else:
        caps.append(_Cap(p["c0x"], p["interface_radius"], math.pi - a0, math.pi))
    return caps


def _cap_curvature(cap: _Cap, t):
    # t = (theta, phi) address on the cap; disks have zero curvature
    if cap.disk_radius is not None:
        return np.zeros(3)
    theta, phi = t
    if abs(theta - cap.th0) < 1e-12 or abs(theta - cap.th1) < 1e-12:
        raise JunctionPoint("curvature on the junction circle is a branch average")
    u = np.array([math.cos(theta), math.sin(theta) * math.cos(phi),
                  math.sin(theta) * math.sin(phi)])
    return -2.0 * u / cap.radius


# ---------------------------------------------------------------------------
# sampling


def _allocate(total, weights):
    """Largest-remainder allocation of `total` items proportional to weights."""
    w = np.asarray(weights, dtype=float)
    exact = w / w.sum() * total
    base = np.floor(exact).astype(int)
    short = total - int(base.sum())
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def _planes_from_unit_tangents(tangents):
    bases = tangents[:, None, :]
    planes = np.einsum("nki,nkj->nij", bases, bases)
    return planes, bases


def sample(shape: ShapeSpec, spec: SamplingSpec,
           regression_radius: Optional[float] = None) -> SampleResult:
    """Sample a shape into a point cloud varifold plus its curvature oracle.

    The oracle is evaluated at the sampled parameters, so noisy positions
    are still compared against the curvature of the underlying shape.  With
    tangent_mode == "regression" the planes are recomputed from the (noisy)
    positions in a ball of `regression_radius`.
    """
    if spec.tangent_mode == "regression" and regression_radius is None:
        raise ValueError("regression tangents need a regression_radius")
    if shape.kind in PARAMETRIC_KINDS:
        return _sample_parametric(shape, spec, regression_radius)
    if spec.mode != "uniform_parameter":
        raise BadShape("nonuniform sampling is only defined for single-parameter curves")
    if shape.kind in ("two_circles", "double_bubble_2d"):
        return _sample_arcs(shape, spec, regression_radius)
    return _sample_bubble3d(shape, spec, regression_radius)


def _finish(shape, spec, pos, unit_tangents, oracle, t, arc, arc_counts, h,
            regression_radius, d, exact_bases=None):
    if spec.tangent_mode == "exact":
        if exact_bases is None:
            planes, bases = _planes_from_unit_tangents(unit_tangents)
        else:
            bases = exact_bases
            planes = np.einsum("nki,nkj->nij", bases, bases)
    else:
        tf = estimate_planes(pos, regression_radius, d)
        if not np.all(tf.valid):
            bad = int(np.flatnonzero(~tf.valid)[0])
            raise BadShape(
                f"regression failed at point {bad}: fewer than {d + 1} neighbors "
                f"in radius {regression_radius}; enlarge the radius")
        planes, bases = tf.planes, tf.bases
    cloud = PointCloudVarifold(pos, np.ones(len(pos)), planes, d=d,
                               bases=bases, validate=False)
    return SampleResult(cloud, oracle, t, arc, arc_counts, h, shape, spec)


def _sample_parametric(shape, spec, regression_radius):
    n_pts = spec.N
    h = 2 * math.pi / n_pts
    rng = np.random.default_rng(spec.seed)
    j = np.arange(n_pts)
    if spec.mode == "uniform_parameter":
        ts = j * h
    else:
        # parameter jitter with unit-variance offsets, wrapped but unsorted
        ts = ((j + rng.standard_normal(n_pts)) * h) % (2 * math.pi)
    pos = curve_point(shape, ts)
    vel = curve_velocity(shape, ts)
    tang = vel / np.linalg.norm(vel, axis=1, keepdims=True)
    oracle = _curvature_vector_parametric(shape, ts)
    if spec.noise_variance:
        sigma = spec.noise_variance if spec.noise_as_std else math.sqrt(spec.noise_variance)
        pos = pos + rng.normal(0.0, sigma, size=pos.shape)
    return _finish(shape, spec, pos, tang, oracle, ts, np.zeros(n_pts, dtype=int),
                   np.array([n_pts]), h, regression_radius, d=1)


def _sample_arcs(shape, spec, regression_radius):
    arcs = _two_circle_arcs(shape) if shape.kind == "two_circles" else _bubble2d_arcs(shape)
    counts = _allocate(spec.N, [a.length for a in arcs])
    pos_parts, tan_parts, orc_parts, t_parts, arc_ids = [], [], [], [], []
    for i, (arc, count) in enumerate(zip(arcs, counts)):
        if count == 0:
            continue
        params = arc.parameters(count)
        pts = arc.points(count, params)
        pos_parts.append(pts)
        tan_parts.append(arc.tangents(params))
        orc_parts.append(arc.curvature(pts))
        t_parts.append(params)
        arc_ids.append(np.full(count, i, dtype=int))
    pos = np.concatenate(pos_parts)
    tang = np.concatenate(tan_parts)
    oracle = np.concatenate(orc_parts)
    ts = np.concatenate(t_parts)
    arc_id = np.concatenate(arc_ids)
    if spec.noise_variance:
        rng = np.random.default_rng(spec.seed)
        sigma = spec.noise_variance if spec.noise_as_std else math.sqrt(spec.noise_variance)
        pos = pos + rng.normal(0.0, sigma, size=pos.shape)
    h = sum(a.length for a in arcs) / spec.N
    return _finish(shape, spec, pos, tang, oracle, ts, arc_id, counts, h,
                   regression_radius, d=1)


def _sample_cap(cap: _Cap, count, rng):
    """Area-uniform stratified latitude (or radius) bands, seeded azimuths."""
    if cap.disk_radius is not None:
        R = cap.disk_radius
        spacing = math.sqrt(cap.area / count)
        nb = max(1, round(R / spacing))
        edges = np.linspace(0.0, R, nb + 1)
        band_w = edges[1:] ** 2 - edges[:-1] ** 2
    else:
        spacing = math.sqrt(cap.area / count)
        nb = max(1, round(cap.radius * (cap.th1 - cap.th0) / spacing))
        edges = np.linspace(cap.th0, cap.th1, nb + 1)
        band_w = np.cos(edges[:-1]) - np.cos(edges[1:])
    band_counts = _allocate(count, np.maximum(band_w, 1e-300))
    pts, normals, t_addr = [], [], []
    for k in range(nb):
        m = int(band_counts[k])
        if m == 0:
            continue
        mid = 0.5 * (edges[k] + edges[k + 1])
        phi = 2 * math.pi * (np.arange(m) + rng.random()) / m
        if cap.disk_radius is not None:
            ring = np.stack([np.zeros(m), mid * np.cos(phi), mid * np.sin(phi)], axis=-1)
            pts.append(ring)
            normals.append(np.tile([1.0, 0.0, 0.0], (m, 1)))
        else:
            u = np.stack([np.full(m, math.cos(mid)),
                          math.sin(mid) * np.cos(phi),
                          math.sin(mid) * np.sin(phi)], axis=-1)
            pts.append(cap.center + cap.radius * u)
            normals.append(u)
        t_addr.append(np.stack([np.full(m, mid), phi], axis=-1))
    return np.concatenate(pts), np.concatenate(normals), np.concatenate(t_addr)


def _sample_bubble3d(shape, spec, regression_radius):
    caps = _bubble3d_caps(shape)
    counts = _allocate(spec.N, [c.area for c in caps])
    rng = np.random.default_rng(spec.seed)
    pos_parts, base_parts, orc_parts, t_parts, arc_ids = [], [], [], [], []
    for i, (cap, count) in enumerate(zip(caps, counts)):
        if count == 0:
            continue
        pts, normals, t_addr = _sample_cap(cap, count, rng)
        pos_parts.append(pts)
        if cap.disk_radius is not None:
            orc_parts.append(np.zeros_like(pts))
        else:
            orc_parts.append(-2.0 * normals / cap.radius)
        base_parts.append(_sphere_tangent_bases(normals))
        t_parts.append(t_addr)
        arc_ids.append(np.full(len(pts), i, dtype=int))
    pos = np.concatenate(pos_parts)
    bases = np.concatenate(base_parts)
    oracle = np.concatenate(orc_parts)
    ts = np.concatenate(t_parts)
    arc_id = np.concatenate(arc_ids)
    if spec.noise_variance:
        sigma = spec.noise_variance if spec.noise_as_std else math.sqrt(spec.noise_variance)
        pos = pos + rng.normal(0.0, sigma, size=pos.shape)
    h = math.sqrt(sum(c.area for c in caps) / spec.N)
    return _finish(shape, spec, pos, None, oracle, ts, arc_id, counts, h,
                   regression_radius, d=2, exact_bases=bases)


def _sphere_tangent_bases(normals):
    """Orthonormal tangent pairs for unit normals (axis handled separately)."""
    n_pts = len(normals)
    bases = np.zeros((n_pts, 2, 3))
    # theta direction and phi direction of the x-axis spherical frame
    sin_t = np.sqrt(np.maximum(normals[:, 1] ** 2 + normals[:, 2] ** 2, 0.0))
    polar = sin_t < 1e-12
    reg = ~polar
    cphi = np.where(reg, normals[:, 1] / np.where(reg, sin_t, 1.0), 1.0)
    sphi = np.where(reg, normals[:, 2] / np.where(reg, sin_t, 1.0), 0.0)
    cos_t = normals[:, 0]
    bases[reg, 0] = np.stack([-sin_t[reg], cos_t[reg] * cphi[reg],
                              cos_t[reg] * sphi[reg]], axis=-1)
    bases[reg, 1] = np.stack([np.zeros(reg.sum()), -sphi[reg], cphi[reg]], axis=-1)
    bases[polar, 0] = [0.0, 1.0, 0.0]
    bases[polar, 1] = [0.0, 0.0, 1.0]
    return bases


# ---------------------------------------------------------------------------
# shape-level summaries used by the experiment harness


def shape_hmax(shape: ShapeSpec) -> float:
    """Analytic sup of |H| over the shape (branch values on smooth pieces)."""
    p = shape.params
    if shape.kind == "circle":
        return 1.0 / p["radius"]
    if shape.kind == "ellipse":
        a, b = max(p["a"], p["b"]), min(p["a"], p["b"])
        return a / b ** 2
    if shape.kind in ("flower", "eight"):
        t = np.linspace(0.0, 2 * math.pi, 1 << 18, endpoint=False)
        mags = np.linalg.norm(_curvature_vector_parametric(shape, t), axis=1)
        k = int(np.argmax(mags))
        # parabolic refinement around the best grid node
        tt = np.linspace(t[k - 1], t[(k + 1) % len(t)], 2001)
        mags2 = np.linalg.norm(_curvature_vector_parametric(shape, tt), axis=1)
        return float(max(mags.max(), mags2.max()))
    if shape.kind == "two_circles":
        return 1.0 / p["radius"]
    if shape.kind == "double_bubble_2d":
        return 1.0 / p["r2"]
    if shape.kind == "double_bubble_3d":
        return 2.0 / p["r2"]
    raise BadShape(f"no curvature bound for {shape.kind!r}")


def singular_points(shape: ShapeSpec) -> np.ndarray:
    """Junction / crossing points of a composite or self-intersecting shape."""
    p = shape.params
    if shape.kind == "eight":
        return np.zeros((1, 2))
    if shape.kind == "two_circles":
        r, sep = p["radius"], p["separation"]
        h = math.sqrt(r * r - sep * sep / 4.0)
        return np.array([[0.0, h], [0.0, -h]])
    if shape.kind == "double_bubble_2d":
        a = p["junction_offset"]
        return np.array([[0.0, a], [0.0, -a]])
    raise BadShape(f"{shape.kind!r} has no point singularities")


def singular_distance(shape: ShapeSpec, points) -> np.ndarray:
    """Distance from each point to the singular set of the shape."""
    points = np.atleast_2d(points)
    if shape.kind == "double_bubble_3d":
        a = shape.params["junction_offset"]
        rad = np.sqrt(points[:, 1] ** 2 + points[:, 2] ** 2)
        return np.sqrt(points[:, 0] ** 2 + (rad - a) ** 2)
    sp = singular_points(shape)
    d = np.linalg.norm(points[:, None, :] - sp[None, :, :], axis=2)
    return d.min(axis=1)


def junction_average_curvature(shape: ShapeSpec) -> np.ndarray:
    """Average of the branch curvature vectors at the (upper) junction.

    This is the value the regularized curvature recovers near a singular
    point, since the measure-level curvature there is the branch average.
    """
    p = shape.params
    if shape.kind == "two_circles":
        r, sep = p["radius"], p["separation"]
        h = math.sqrt(r * r - sep * sep / 4.0)
        pt = np.array([0.0, h])
        centers = np.array([[-sep / 2, 0.0], [sep / 2, 0.0]])
        return np.mean((centers - pt) / r ** 2, axis=0)
    if shape.kind == "double_bubble_2d":
        a = p["junction_offset"]
        pt = np.array([0.0, a])
        arcs = _bubble2d_arcs(shape)
        vecs = [arc.curvature(pt[None, :])[0] for arc in arcs]
        return np.mean(vecs, axis=0)
    if shape.kind == "double_bubble_3d":
        a = p["junction_offset"]
        pt = np.array([0.0, a, 0.0])
        caps = _bubble3d_caps(shape)
        vecs = []
        for cap in caps:
            if cap.disk_radius is not None:
                vecs.append(np.zeros(3))
            else:
                u = (pt - cap.center)
                u = u / np.linalg.norm(u)
                vecs.append(-2.0 * u / cap.radius)
        return np.mean(vecs, axis=0)
    raise BadShape(f"{shape.kind!r} has no junction")
