"""Experiment orchestration: error metric, scale schedules, sweeps, CSVs.

A convergence run samples a shape at increasing point counts, evaluates the
regularized curvature at every cloud point under a scale schedule, and
reports the relative average error against the analytic oracle,

    E_rel = (1/N) * sum_j |H_eps(x_j) - H(t_j)| / Hmax,

with Hmax the analytic sup of |H| over the shape (never the sample max).
Invalid points are charged their full normalized oracle modulus so silent
denominators cannot fake convergence.  Rows carry wall time in memory; the
CSV omits it by default so identical configs and seeds yield byte-identical
files.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curvature import CurvatureRequest, amc_field, neighbor_counts
from .errors import BadData, NoValidPoints
from .geometry import CurvatureField
from .kernels import make_pair
from .shapes import SamplingSpec, ShapeSpec, sample, shape_hmax


@dataclass(frozen=True)
class EpsSchedule:
    """Scale schedule: inv100 (100/N), pow34 ((10/N)^(3/4)), or fixed."""

    kind: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("inv100", "pow34", "fixed"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "fixed" and (self.value is None or not self.value > 0):
            raise ValueError("fixed schedule needs a positive value")

    def eps(self, n_points: int) -> float:
        if self.kind == "inv100":
            return 100.0 / n_points
        if self.kind == "pow34":
            return (10.0 / n_points) ** 0.75
        return float(self.value)

    @property
    def label(self) -> str:
        return self.kind if self.kind != "fixed" else f"fixed:{self.value:g}"

    @staticmethod
    def parse(token: str) -> "EpsSchedule":
        token = token.strip().lower()
        if token in ("inv100", "100/n"):
            return EpsSchedule("inv100")
        if token in ("pow34", "(10/n)^(3/4)", "(10/n)^0.75"):
            return EpsSchedule("pow34")
        if token.startswith("fixed:"):
            return EpsSchedule("fixed", float(token.split(":", 1)[1]))
        try:
            return EpsSchedule("fixed", float(token))
        except ValueError:
            raise ValueError(f"cannot parse schedule {token!r}") from None


def parse_radius_expr(token: str, eps: float) -> float:
    """Regression-radius expressions: eps/2, eps, eps^0.9, or a literal."""
    token = token.strip().lower()
    if token == "eps/2":
        return eps / 2.0
    if token == "eps":
        return eps
    if token == "eps^0.9":
        return eps ** 0.9
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"cannot parse radius expression {token!r}") from None


@dataclass(frozen=True)
class ConvergenceConfig:
    shape: ShapeSpec
    Ns: tuple
    schedule: EpsSchedule
    pairs: tuple = ("exp-nkp",)
    tangent_mode: str = "exact"
    regression_radius: str = "eps/2"
    orth: bool = True
    avg: bool = False
    nonuniform: bool = False
    noise_variance: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        ns = tuple(int(n) for n in self.Ns)
        object.__setattr__(self, "Ns", ns)
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if any(b <= a for a, b in zip(ns, ns[1:])) or not ns:
            raise ValueError("Ns must be nonempty and strictly increasing")
        for n in ns:
            if not self.schedule.eps(n) > 0:
                raise ValueError(f"schedule not positive at N={n}")

    @property
    def mode_label(self) -> str:
        bits = [self.tangent_mode,
                "orth" if self.orth else "plain",
                "nonuniform" if self.nonuniform else "uniform"]
        if self.avg:
            bits.append("avg2eps")
        if self.noise_variance:
            bits.append(f"noise{self.noise_variance:g}")
        return "+".join(bits)


@dataclass(frozen=True)
class ResultRow:
    N: int
    eps: float
    n_neigh_avg: float
    pair: str
    mode: str
    e_rel: float
    wall_time: float


def rel_error(fld: CurvatureField, oracle, hmax: float) -> float:
    """Mean normalized deviation from the oracle over all points.

    Invalid points contribute |oracle|/hmax, i.e. the error of reporting
    nothing at all.
    """
    oracle = np.atleast_2d(oracle)
    if len(oracle) != len(fld):
        raise ValueError("field and oracle lengths differ")
    if not hmax > 0:
        raise ValueError("hmax must be positive")
    if not np.any(fld.valid):
        raise NoValidPoints("every field point is invalid")
    err = np.linalg.norm(fld.vectors - oracle, axis=1)
    err[~fld.valid] = np.linalg.norm(oracle[~fld.valid], axis=1)
    return float(np.mean(err)) / hmax


def slope(rows, x: str = "N") -> float:
    """Least-squares slope of log(e_rel) against log of the chosen abscissa.

    `rows` is a list of ResultRow (or (x, y) pairs when x == "xy").
    Abscissas: "N" or "1/(N*eps)".
    """
    if x == "xy":
        xs = np.array([r[0] for r in rows], dtype=float)
        ys = np.array([r[1] for r in rows], dtype=float)
    else:
        if x == "N":
            xs = np.array([r.N for r in rows], dtype=float)
        elif x == "1/(N*eps)":
            xs = np.array([1.0 / (r.N * r.eps) for r in rows], dtype=float)
        else:
            raise ValueError(f"unknown abscissa {x!r}")
        ys = np.array([r.e_rel for r in rows], dtype=float)
    if len(xs) < 3:
        raise BadData("need at least 3 rows for a slope")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise BadData("slope needs positive abscissas and errors")
    lx, ly = np.log(xs), np.log(ys)
    lx = lx - lx.mean()
    return float((lx @ (ly - ly.mean())) / (lx @ lx))


def _sub_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(index,))
               .generate_state(1)[0])


def run_convergence(cfg: ConvergenceConfig, threads: int = 1) -> list:
    """One ResultRow per (N, pair); clouds are shared across pairs."""
    hmax = shape_hmax(cfg.shape)
    rows = []
    for i_n, n_points in enumerate(cfg.Ns):
        eps = cfg.schedule.eps(n_points)
        spec = SamplingSpec(
            N=n_points,
            mode="nonuniform_gaussian" if cfg.nonuniform else "uniform_parameter",
            tangent_mode=cfg.tangent_mode,
            noise_variance=cfg.noise_variance,
            seed=_sub_seed(cfg.seed, i_n),
        )
        radius = parse_radius_expr(cfg.regression_radius, eps)
        result = sample(cfg.shape, spec, regression_radius=radius)
        counts = neighbor_counts(result.cloud.points, eps)
        for pair_token in cfg.pairs:
            start = time.perf_counter()
            pair = make_pair(pair_token, d=result.cloud.d, n=result.cloud.n)
            req = CurvatureRequest(eps=eps, pair=pair, orth=cfg.orth,
                                   average_radius=2 * eps if cfg.avg else None)
            fld = amc_field(result.cloud, req, threads=threads)
            e = rel_error(fld, result.oracle, hmax)
            rows.append(ResultRow(n_points, eps, float(counts.mean()), pair_token,
                                  cfg.mode_label, e, time.perf_counter() - start))
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_rows_csv(path, rows, cfg: ConvergenceConfig = None,
                   include_timing: bool = False) -> None:
    """CSV with the full config embedded in '#' header lines.

    Timing is omitted by default: without it the bytes depend only on the
    config and seed.
    """
    with open(path, "w", encoding="ascii") as fh:
        if cfg is not None:
            fh.write(f"# shape={cfg.shape.kind}\n")
            for key in sorted(cfg.shape.params):
                fh.write(f"# shape.{key}={_fmt(cfg.shape.params[key])}\n")
            fh.write(f"# Ns={','.join(str(n) for n in cfg.Ns)}\n")
            fh.write(f"# schedule={cfg.schedule.label}\n")
            fh.write(f"# pairs={','.join(cfg.pairs)}\n")
            fh.write(f"# tangents={cfg.tangent_mode}\n")
            fh.write(f"# regression_radius={cfg.regression_radius}\n")
            fh.write(f"# orth={int(cfg.orth)} avg={int(cfg.avg)} "
                     f"nonuniform={int(cfg.nonuniform)}\n")
            if cfg.noise_variance:
                fh.write(f"# noise_variance={_fmt(cfg.noise_variance)}\n")
            fh.write(f"# seed={cfg.seed}\n")
        cols = "N,eps,n_neigh_avg,pair,mode,e_rel"
        if include_timing:
            cols += ",wall_time"
        fh.write(cols + "\n")
        for r in rows:
            line = (f"{r.N},{_fmt(r.eps)},{_fmt(r.n_neigh_avg)},{r.pair},"
                    f"{r.mode},{_fmt(r.e_rel)}")
            if include_timing:
                line += f",{_fmt(r.wall_time)}"
            fh.write(line + "\n")


# ---------------------------------------------------------------------------
# selftest: the quick property suites behind `varicurve selftest`


def _random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def selftest(verbose: bool = True) -> bool:
    """Fast property checks; prints one line per suite, True when all pass."""
    from .curvature import amc, amc_orth
    from .geometry import PointCloudVarifold
    from .metrics import DiscreteMeasure, bl_distance
    from .shapes import circle, sample as sample_shape
    from .spatial import FixedRadiusIndex, brute_force_query

    rng = np.random.default_rng(20240917)
    checks = []

    def report(name, ok, detail=""):
        checks.append(ok)
        if verbose:
            print(f"{'ok  ' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))

    # spatial index vs brute force, 500 random queries
    ok = True
    for _ in range(10):
        pts = rng.uniform(-1, 1, size=(rng.integers(5, 5000), rng.integers(2, 4)))
        idx = FixedRadiusIndex(pts, 0.3)
        for _ in range(50):
            x = rng.uniform(-1.2, 1.2, size=pts.shape[1])
            eps = rng.uniform(0.05, 0.6)
            if not np.array_equal(idx.query(x, eps), np.sort(brute_force_query(pts, x, eps))):
                ok = False
    report("spatial index matches brute force (500 queries)", ok)

    # bounded-Lipschitz metric axioms on random supports
    ok = True
    worst = 0.0
    for _ in range(20):
        pts = rng.uniform(-1, 1, size=(rng.integers(2, 12), 2))
        w = [rng.uniform(0.1, 1, size=len(pts)) for _ in range(3)]
        meas = [DiscreteMeasure(pts, wk, validate=False) for wk in w]
        dab = bl_distance(meas[0], meas[1])
        dba = bl_distance(meas[1], meas[0])
        dbc = bl_distance(meas[1], meas[2])
        dac = bl_distance(meas[0], meas[2])
        worst = max(worst, abs(dab - dba), dac - (dab + dbc))
        if abs(dab - dba) > 1e-10 or dac > dab + dbc + 1e-8:
            ok = False
        if bl_distance(meas[0], meas[0]) != 0.0:
            ok = False
    report("bounded-Lipschitz metric axioms", ok, f"worst slack {worst:.2e}")

    # a small reference cloud on the half-unit circle
    res = sample_shape(circle(0.5), SamplingSpec(N=400, seed=3))
    cloud, eps = res.cloud, 0.08

    def request(pair_token="exp-nkp", **kw):
        return CurvatureRequest(eps=eps, pair=make_pair(pair_token, 1, 2), **kw)

    base = amc(cloud, request(), cloud.points[7])

    # kernel-scale invariance: (a*rho, b*xi) leaves the value put
    from .kernels import KernelPair, KernelProfile, kernel_constants, make_profile, nkp

    rho = make_profile("exp")
    xi = nkp(rho, 2)
    a_s, b_s = 3.7, 0.25
    rho_s = KernelProfile("s", lambda r: a_s * np.asarray(rho.value(r)),
                          lambda r: a_s * np.asarray(rho.derivative(r)))
    xi_s = KernelProfile("s", lambda r: b_s * np.asarray(xi.value(r)),
                         lambda r: b_s * np.asarray(xi.derivative(r)))
    cr, cx = kernel_constants(rho_s, xi_s, 1)
    scaled_pair = KernelPair(rho_s, xi_s, cr, cx, 1, 2)
    scaled = amc(cloud, CurvatureRequest(eps=eps, pair=scaled_pair), cloud.points[7])
    drift = float(np.max(np.abs(scaled - base)))
    report("kernel-scale invariance of the curvature", drift <= 1e-10, f"drift {drift:.2e}")

    # rigid-motion equivariance
    q = _random_rotation(rng, 2)
    t = rng.uniform(-2, 2, size=2)
    moved = PointCloudVarifold(cloud.points @ q.T + t, cloud.masses,
                               np.einsum("ij,njk,lk->nil", q, cloud.planes, q),
                               cloud.d, validate=False)
    h_moved = amc(moved, request(), moved.points[7])
    equiv = float(np.max(np.abs(h_moved - q @ base)))
    report("rigid-motion equivariance", equiv <= 1e-9, f"drift {equiv:.2e}")

    # mass-scaling invariance
    h2 = amc(cloud.scaled(2.0), request(), cloud.points[7])
    h37 = amc(cloud.scaled(3.7), request(), cloud.points[7])
    m_drift = max(float(np.max(np.abs(h2 - base))),
                  float(np.max(np.abs(h37 - base))))
    report("mass-scaling invariance", m_drift <= 1e-12, f"drift {m_drift:.2e}")

    # perpendicularity of the orthogonal variant
    worst = 0.0
    for j0 in (0, 11, 123):
        v = amc_orth(cloud, request(), j0)
        tangent = cloud.tangent_basis(j0)[0]
        worst = max(worst, abs(float(tangent @ v)) / np.linalg.norm(v))
    report("orthogonal variant is perpendicular", worst <= 1e-12, f"ratio {worst:.2e}")

    # collinear exactness: exact-zero cancellation when the shared plane
    # has exact 0/1 entries and the points lie inside it
    xs = np.array([-0.9, -0.5, -0.2, 0.0, 0.11, 0.35, 0.8])
    seg_pts = np.stack([xs, np.zeros_like(xs)], axis=1)
    seg_planes = np.tile(np.diag([1.0, 0.0]), (len(xs), 1, 1))
    seg = PointCloudVarifold(seg_pts, np.ones(len(xs)), seg_planes, 1, validate=False)
    v = amc_orth(seg, CurvatureRequest(eps=0.5, pair=make_pair("exp", 1, 2)), 3)
    plain = amc(seg, CurvatureRequest(eps=0.5, pair=make_pair("exp", 1, 2)), seg_pts[3])
    ok = np.all(v == 0.0) and np.linalg.norm(plain) > 0
    report("collinear exactness of the orthogonal variant", bool(ok))

    return all(checks)
