"""Command-line interface.

Subcommands: generate, curvature, converge, bl, discretize, cotan, selftest.
Exit codes: 0 success, 2 parse/usage error, 3 numeric failure, 4 selftest
failure.  CSV files are the contract; `--plot` additionally renders a PNG
next to the delimited output.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fileio, shapes
from .curvature import CurvatureRequest, amc_field
from .errors import ParseError, VaricurveError
from .harness import ConvergenceConfig, EpsSchedule, parse_radius_expr, run_convergence, \
    selftest, write_rows_csv
from .kernels import PAIR_TOKENS, make_pair
from .metrics import bl_distance_varifolds, build_grid, to_pointcloud, to_volumetric


def _shape_from_args(args) -> shapes.ShapeSpec:
    kind = args.shape.replace("-", "_")
    radii = [float(v) for v in args.radii.split(",")] if args.radii else []
    if kind == "circle":
        return shapes.circle(*(radii or [0.5]))
    if kind == "ellipse":
        return shapes.ellipse(*(radii or [1.0, 0.5]))
    if kind == "flower":
        return shapes.flower()
    if kind == "eight":
        return shapes.eight()
    if kind == "two_circles":
        return shapes.two_circles(*(radii or [0.5]))
    if kind == "double_bubble_2d":
        r1, r2 = radii or [1.0, 0.6]
        return shapes.double_bubble(2, r1, r2)
    if kind == "double_bubble_3d":
        r1, r2 = radii or [1.0, 0.7]
        return shapes.double_bubble(3, r1, r2)
    raise ParseError(f"unknown shape {args.shape!r}")


def _eps_for(args, n_points: int) -> float:
    return EpsSchedule.parse(args.eps).eps(n_points)


def _cmd_generate(args) -> int:
    shape = _shape_from_args(args)
    spec = shapes.SamplingSpec(
        N=args.n,
        mode="nonuniform_gaussian" if args.mode == "nonuniform" else "uniform_parameter",
        tangent_mode=args.tangents,
        noise_variance=args.noise,
        seed=args.seed,
    )
    radius = None
    if args.tangents == "regression":
        eps = _eps_for(args, args.n) if args.eps else None
        if args.regression_radius is None:
            raise ParseError("regression tangents need --regression-radius")
        try:
            radius = float(args.regression_radius)
        except ValueError:
            if eps is None:
                raise ParseError("radius expressions need --eps at generate time") from None
            radius = parse_radius_expr(args.regression_radius, eps)
    result = shapes.sample(shape, spec, regression_radius=radius)
    fileio.write_cloud(args.out, result.cloud)
    print(f"wrote {len(result.cloud)} points to {args.out} "
          f"(arc counts: {','.join(str(c) for c in result.arc_counts)})")
    if args.oracle:
        from .geometry import CurvatureField

        fileio.write_field_csv(args.oracle, result.cloud.points,
                               CurvatureField(result.oracle, validate=False))
        print(f"wrote exact curvature oracle to {args.oracle}")
    return 0


def _cmd_curvature(args) -> int:
    cloud = fileio.read_cloud(args.infile)
    eps = _eps_for(args, len(cloud))
    pair = make_pair(args.pair, d=cloud.d, n=cloud.n)
    avg = None
    if args.avg and args.avg != "off":
        avg = 2 * eps if args.avg == "2eps" else float(args.avg)
    req = CurvatureRequest(eps=eps, pair=pair, orth=args.orth, average_radius=avg,
                           include_constants=(args.constants == "on"))
    fld = amc_field(cloud, req, threads=args.threads)
    fileio.write_field_csv(args.out, cloud.points, fld)
    print(f"wrote curvature field for N={len(cloud)} at eps={eps:g} to {args.out}")
    if args.plot:
        from .report import plot_field

        png = str(Path(args.out).with_suffix(".png"))
        plot_field(cloud.points, fld, png)
        print(f"wrote figure to {png}")
    return 0


def _cmd_converge(args) -> int:
    cfg = ConvergenceConfig(
        shape=_shape_from_args(args),
        Ns=tuple(int(v) for v in args.ns.split(",")),
        schedule=EpsSchedule.parse(args.schedule),
        pairs=tuple(args.pairs.split(",")),
        tangent_mode=args.tangents,
        regression_radius=args.regression_radius or "eps/2",
        orth=args.orth,
        avg=args.avg,
        nonuniform=args.nonuniform,
        noise_variance=args.noise,
        seed=args.seed,
    )
    rows = run_convergence(cfg, threads=args.threads)
    write_rows_csv(args.out, rows, cfg, include_timing=args.timing)
    for r in rows:
        print(f"N={r.N:>8d} eps={r.eps:.6g} pair={r.pair:<9s} "
              f"neigh={r.n_neigh_avg:8.1f} e_rel={r.e_rel:.6g}")
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.plot:
        from .report import plot_convergence

        png = str(Path(args.out).with_suffix(".png"))
        plot_convergence(rows, png, x=args.x)
        print(f"wrote figure to {png}")
    return 0


def _cmd_bl(args) -> int:
    a = fileio.read_cloud(args.a)
    b = fileio.read_cloud(args.b)
    value = bl_distance_varifolds(a, b)
    print(format(value, ".12g"))
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(format(value, ".17g") + "\n")
    return 0


def _cmd_discretize(args) -> int:
    cloud = fileio.read_cloud(args.infile)
    lo = cloud.points.min(axis=0) - 1e-9
    hi = cloud.points.max(axis=0) + 1e-9
    grid = build_grid((lo, hi), args.delta)
    if args.kind == "volumetric":
        vol = to_volumetric(cloud, grid)
        fileio.write_volumetric(args.out, vol)
        print(f"wrote {len(vol)} occupied cells to {args.out}")
    else:
        out = to_pointcloud(cloud, grid)
        fileio.write_cloud(args.out, out)
        print(f"wrote {len(out)} cell points to {args.out}")
    return 0


def _cmd_cotan(args) -> int:
    from .cotangent import vertex_mean_curvature, vertex_star
    from .errors import BoundaryVertex

    mesh = fileio.read_off(args.mesh)
    rows = []
    for v in range(len(mesh.vertices)):
        try:
            vertex_star(mesh, v)
        except BoundaryVertex:
            continue
        rows.append((v, vertex_mean_curvature(mesh, v)))
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("index,H_x,H_y,H_z,H_norm\n")
        for v, h in rows:
            fh.write(f"{v}," + ",".join(format(x, ".17g") for x in h)
                     + f",{format(np.linalg.norm(h), '.17g')}\n")
    print(f"wrote curvature at {len(rows)} interior vertices to {args.out}")
    if args.plot and rows:
        from .report import plot_vertex_curvature

        png = str(Path(args.out).with_suffix(".png"))
        plot_vertex_curvature(mesh, [v for v, _ in rows],
                              np.array([h for _, h in rows]), png)
        print(f"wrote figure to {png}")
    return 0


def _cmd_selftest(args) -> int:
    return 0 if selftest(verbose=True) else 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit PCG64 seed")
    common.add_argument("--threads", type=int, default=1)

    parser = argparse.ArgumentParser(prog="varicurve",
                                     description="kernel-regularized curvature toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    shape_opts = argparse.ArgumentParser(add_help=False)
    shape_opts.add_argument("--shape", required=True,
                            help="circle|ellipse|flower|eight|two-circles|"
                                 "double-bubble-2d|double-bubble-3d")
    shape_opts.add_argument("--radii", default=None,
                            help="comma-separated shape radii (shape dependent)")

    p = sub.add_parser("generate", parents=[common, shape_opts],
                       help="sample a shape into a .vc cloud")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=("uniform", "nonuniform"), default="uniform")
    p.add_argument("--tangents", choices=("exact", "regression"), default="exact")
    p.add_argument("--regression-radius", default=None)
    p.add_argument("--eps", default=None, help="only needed for radius expressions")
    p.add_argument("--noise", type=float, default=None, help="Gaussian position variance")
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", default=None, help="also write the exact curvature CSV")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("curvature", parents=[common],
                       help="evaluate the curvature field of a .vc cloud")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--eps", required=True, help="value, 100/N, or (10/N)^(3/4)")
    p.add_argument("--pair", choices=PAIR_TOKENS, default="exp-nkp")
    p.add_argument("--orth", action="store_true")
    p.add_argument("--avg", default="off", help="off, 2eps, or a radius")
    p.add_argument("--constants", choices=("on", "off"), default="on")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_curvature)

    p = sub.add_parser("converge", parents=[common, shape_opts],
                       help="error sweep over increasing point counts")
    p.add_argument("--ns", required=True, help="comma-separated point counts")
    p.add_argument("--schedule", default="pow34", help="inv100|pow34|fixed:<v>")
    p.add_argument("--pairs", default="exp-nkp")
    p.add_argument("--tangents", choices=("exact", "regression"), default="exact")
    p.add_argument("--regression-radius", default="eps/2")
    p.add_argument("--orth", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--avg", action="store_true", help="average at radius 2*eps")
    p.add_argument("--nonuniform", action="store_true")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--timing", action="store_true", help="include wall_time in the CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.add_argument("--x", choices=("N", "1/(N*eps)"), default="N")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("bl", parents=[common],
                       help="bounded-Lipschitz distance between two clouds")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bl)

    p = sub.add_parser("discretize", parents=[common],
                       help="bin a cloud onto a cubic grid")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--delta", type=float, required=True, help="cell diameter")
    p.add_argument("--kind", choices=("volumetric", "pointcloud"), default="pointcloud")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_discretize)

    p = sub.add_parser("cotan", parents=[common],
                       help="cotangent curvature at interior mesh vertices")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_cotan)

    p = sub.add_parser("selftest", parents=[common],
                       help="run the quick property suites")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"varicurve: parse error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"varicurve: {exc}", file=sys.stderr)
        return 2
    except (VaricurveError, ValueError) as exc:
        print(f"varicurve: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
