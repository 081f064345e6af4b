"""Command-line interface.

Subcommands: synth, filter, upsample, pipeline, eval, sweep, octree, report.
Flags mirror the filter parameter names (r, b, l, h, u_r, u_sz, u_s, d,
s_vs, d_i). Exit codes: 0 success, 1 usage error, 2 data error, 3
degenerate-input error.
"""

import argparse
import json
import sys

import numpy as np

from .align import ScaleFactor
from .errors import CloudpostError, DataError, DegenerateInputError, InvalidParams
from .io_formats import read_cloud, read_trajectory, write_cloud, write_trajectory
from .octree import build_octree
from .pipeline import (
    EvalRecord,
    FilterSpec,
    PipelineSpec,
    default_pipeline,
    emit_plot_data,
    emit_report,
    evaluate,
    load_pipeline_config,
    load_sweep_config,
    run_pipeline,
    sweep,
)
from .synth import SceneSpec, generate_scene, write_labels

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGENERATE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_(EXIT_USAGE, f"{self.prog}: error: {message}")


class SystemExit_(Exception):
    def __init__(self, code, message):
        self.code = code
        self.message = message
        super().__init__(message)


def _add_mls_flags(p):
    p.add_argument("--search-radius", type=float, default=None,
                   help="MLS neighborhood radius (default: 3x median spacing)")
    p.add_argument("--order", type=int, default=1, choices=(1, 2),
                   help="MLS polynomial order")


def _build_parser():
    parser = _Parser(prog="cloudpost", description=__doc__)
    parser.add_argument("--fixed-timing", action="store_true",
                        help="report all runtimes as 0 for reproducible output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gt-density", type=float, default=800.0)
    p.add_argument("--sparse-fraction", type=float, default=0.115)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.add_argument("--outlier-fraction", type=float, default=0.05)
    p.add_argument("--outlier-scale", type=float, default=0.5)
    p.add_argument("--scale", type=float, nargs=3, default=(1.0, 1.0, 1.0),
                   metavar=("SX", "SY", "SZ"),
                   help="true per-axis scale applied to the estimated map")

    p = sub.add_parser("filter", help="run one outlier-removal filter")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True, choices=("radius", "statistical"))
    p.add_argument("--r", type=float, help="radius filter: search radius")
    p.add_argument("--b", type=int, help="radius filter: min neighbor count")
    p.add_argument("--l", type=int, default=50, help="statistical: neighbor count")
    p.add_argument("--h", type=float, default=1.8, help="statistical: stddev multiplier")

    p = sub.add_parser("upsample", help="run one MLS upsampler")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True,
                   choices=("sample-local-plane", "random-uniform-density",
                            "voxel-grid-dilation"))
    _add_mls_flags(p)
    p.add_argument("--u-r", type=float, help="sample-local-plane: upsampling radius")
    p.add_argument("--u-sz", type=float, help="sample-local-plane: step size")
    p.add_argument("--u-s", type=int, help="sample-local-plane: max steps")
    p.add_argument("--d", type=int, help="random-uniform-density: target density")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--s-vs", type=float, help="voxel-grid-dilation: voxel size")
    p.add_argument("--d-i", type=int, help="voxel-grid-dilation: iterations")

    p = sub.add_parser("pipeline", help="run a composed filter pipeline")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="YAML pipeline config (default: reference pipeline)")
    p.add_argument("--stages-json", help="JSON stage list overriding the config")

    p = sub.add_parser("eval", help="scale-align and score a map vs ground truth")
    p.add_argument("--estimated", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--est-traj", required=True)
    p.add_argument("--gt-traj", required=True)
    p.add_argument("--max-dist", type=float, default=None)
    p.add_argument("--csv", help="append-style single-row CSV output")

    p = sub.add_parser("sweep", help="run a parameter-sweep benchmark")
    p.add_argument("--config", required=True, help="YAML sweep config")
    p.add_argument("--estimated", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--est-traj", required=True)
    p.add_argument("--gt-traj", required=True)
    p.add_argument("--out-json", required=True, help="records output (JSON)")
    p.add_argument("--parallelism", type=int, default=None,
                   help="override the config's worker count")

    p = sub.add_parser("octree", help="convert a cloud to an occupancy octree")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--resolution", type=float, default=0.1)
    p.add_argument("--leaf-list", help="write occupied-leaf text list here")
    p.add_argument("--centers-ply", help="write leaf centers as PLY here")

    p = sub.add_parser("report", help="emit CSV (+ plot data) from sweep records")
    p.add_argument("--in", dest="inp", required=True, help="records JSON from sweep")
    p.add_argument("--csv", required=True)
    p.add_argument("--plot-data", help="raw-vs-processed pairs CSV")

    return parser


def _cmd_synth(args):
    import os

    spec = SceneSpec(
        gt_density=args.gt_density,
        sparse_fraction=args.sparse_fraction,
        noise_sigma=args.noise_sigma,
        outlier_fraction=args.outlier_fraction,
        outlier_scale=args.outlier_scale,
        true_scale=ScaleFactor(*args.scale),
        seed=args.seed,
    )
    bundle = generate_scene(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    write_cloud(bundle.ground_truth, os.path.join(args.out_dir, "ground_truth.xyz"))
    write_cloud(bundle.estimated, os.path.join(args.out_dir, "estimated.xyz"))
    write_trajectory(bundle.gt_traj, os.path.join(args.out_dir, "gt_traj.txt"))
    write_trajectory(bundle.est_traj, os.path.join(args.out_dir, "est_traj.txt"))
    write_labels(bundle.labels, os.path.join(args.out_dir, "labels.txt"))
    print(
        f"scene written to {args.out_dir}: "
        f"{len(bundle.ground_truth)} ground-truth points, "
        f"{len(bundle.estimated)} estimated points "
        f"({int(bundle.labels.sum())} outliers)"
    )
    return EXIT_OK


def _cmd_filter(args):
    cloud = read_cloud(args.inp)
    if args.kind == "radius":
        if args.r is None or args.b is None:
            raise SystemExit_(EXIT_USAGE, "radius filter needs --r and --b")
        stage = FilterSpec("radius", {"r": args.r, "b": args.b})
    else:
        stage = FilterSpec("statistical", {"l": args.l, "h": args.h})
    spec = PipelineSpec(stages=(stage,))
    out, records = run_pipeline(cloud, spec, fixed_timing=args.fixed_timing)
    write_cloud(out, args.out)
    rec = records[0]
    print(f"{rec.kind}: {rec.points_in} -> {rec.points_out} points")
    return EXIT_OK


def _cmd_upsample(args):
    cloud = read_cloud(args.inp)
    params = {}
    if args.kind == "sample-local-plane":
        for name, v in (("u_r", args.u_r), ("u_sz", args.u_sz), ("u_s", args.u_s)):
            if v is not None:
                params[name] = v
    elif args.kind == "random-uniform-density":
        if args.d is not None:
            params["d"] = args.d
        params["seed"] = args.seed
    else:
        for name, v in (("s_vs", args.s_vs), ("d_i", args.d_i)):
            if v is not None:
                params[name] = v
    if args.search_radius is not None:
        params["search_radius"] = args.search_radius
    params["polynomial_order"] = args.order
    spec = PipelineSpec(stages=(FilterSpec(args.kind, params),), seed=args.seed)
    out, records = run_pipeline(cloud, spec, fixed_timing=args.fixed_timing)
    write_cloud(out, args.out)
    rec = records[0]
    print(f"{rec.kind}: {rec.points_in} -> {rec.points_out} points")
    return EXIT_OK


def _cmd_pipeline(args):
    cloud = read_cloud(args.inp)
    if args.stages_json:
        raw = json.loads(args.stages_json)
        spec = PipelineSpec(
            stages=tuple(
                FilterSpec(e["kind"], {k: v for k, v in e.items() if k != "kind"})
                for e in raw
            )
        )
    elif args.config:
        spec = load_pipeline_config(args.config)
    else:
        spec = default_pipeline()
    out, records = run_pipeline(cloud, spec, fixed_timing=args.fixed_timing)
    write_cloud(out, args.out)
    for rec in records:
        print(
            f"{rec.kind}: {rec.points_in} -> {rec.points_out} points "
            f"({rec.time_s:.3f} s)"
        )
    return EXIT_OK


def _cmd_eval(args):
    estimated = read_cloud(args.estimated)
    ground_truth = read_cloud(args.ground_truth)
    est_traj = read_trajectory(args.est_traj)
    gt_traj = read_trajectory(args.gt_traj)
    result = evaluate(estimated, ground_truth, est_traj, gt_traj, args.max_dist)
    print(f"scale: {result.scale.s_x:.9g} {result.scale.s_y:.9g} {result.scale.s_z:.9g}")
    print(f"mean_error: {result.mean_error:.9f}")
    print(f"deviation_percent: {result.deviation_percent:.6f}")
    print(f"matched_fraction: {result.matched_fraction:.6f}")
    if args.csv:
        record = EvalRecord(
            index=0,
            pipeline="(input)",
            parameters="",
            deviation_percent=result.deviation_percent,
            mean_error=result.mean_error,
            matched_fraction=result.matched_fraction,
            time_s=0.0,
            points_in=len(estimated),
            points_out=len(estimated),
        )
        emit_report([record], args.csv)
    return EXIT_OK


def _records_to_json(records):
    return [
        {
            "index": r.index,
            "pipeline": r.pipeline,
            "parameters": r.parameters,
            "deviation_percent": r.deviation_percent,
            "mean_error": r.mean_error,
            "matched_fraction": r.matched_fraction,
            "time_s": r.time_s,
            "points_in": r.points_in,
            "points_out": r.points_out,
            "status": r.status,
        }
        for r in records
    ]


def _records_from_json(data):
    return [EvalRecord(**entry) for entry in data]


def _cmd_sweep(args):
    spec = load_sweep_config(args.config)
    if args.parallelism is not None:
        from dataclasses import replace

        spec = replace(spec, parallelism=args.parallelism)
    estimated = read_cloud(args.estimated)
    ground_truth = read_cloud(args.ground_truth)
    est_traj = read_trajectory(args.est_traj)
    gt_traj = read_trajectory(args.gt_traj)
    records = sweep(
        estimated, ground_truth, est_traj, gt_traj, spec,
        fixed_timing=args.fixed_timing,
    )
    with open(args.out_json, "w", newline="\n") as f:
        json.dump(_records_to_json(records), f, indent=2)
        f.write("\n")
    best = records[0]
    print(f"{len(records)} combinations; best: {best.parameters} "
          f"(deviation {best.deviation_percent:.6f}%)")
    return EXIT_OK


def _cmd_octree(args):
    cloud = read_cloud(args.inp)
    tree = build_octree(cloud, args.resolution)
    occupied, free_fraction = tree.occupancy_stats()
    print(f"depth: {tree.depth}, leaf edge: {tree.leaf_edge:.9g}")
    print(f"occupied_leaves: {occupied}")
    print(f"free_volume_fraction: {free_fraction:.9f}")
    if args.leaf_list:
        tree.write_leaf_list(args.leaf_list)
    if args.centers_ply:
        tree.write_centers_ply(args.centers_ply)
    return EXIT_OK


def _cmd_report(args):
    with open(args.inp) as f:
        records = _records_from_json(json.load(f))
    emit_report(records, args.csv)
    if args.plot_data:
        pairs = [
            (r.parameters or r.pipeline, r.deviation_percent, r.deviation_percent)
            for r in records
            if r.deviation_percent is not None
        ]
        emit_plot_data(pairs, args.plot_data)
    print(f"report written to {args.csv}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "filter": _cmd_filter,
    "upsample": _cmd_upsample,
    "pipeline": _cmd_pipeline,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "octree": _cmd_octree,
    "report": _cmd_report,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit_ as exc:
        print(exc.message, file=sys.stderr)
        return exc.code
    except InvalidParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except CloudpostError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
