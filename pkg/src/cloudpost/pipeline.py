"""Filter composition, evaluation records and the parameter-sweep harness.

A pipeline is an ordered list of filter stages applied to a cloud; the
sweep harness expands per-parameter grids into their Cartesian product,
runs every combination (optionally across worker processes) and reports
Table-style CSV rows sorted by deviation.

Parameters given as "auto" are resolved from the stage-input cloud:
search_radius = 3x and s_vs = 1x the median nearest-neighbor spacing.
"""

import csv
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import mls as mls_mod
from .align import apply_scale, default_max_dist, estimate_scale, map_error
from .errors import CloudpostError, InvalidSpec
from .outliers import (
    RadiusFilterParams,
    StatFilterParams,
    radius_filter,
    statistical_filter,
)
from .spatial import KdTree

FILTER_KINDS = (
    "radius",
    "statistical",
    "sample-local-plane",
    "random-uniform-density",
    "voxel-grid-dilation",
)

_STAGE_PARAM_NAMES = {
    "radius": {"r", "b"},
    "statistical": {"l", "h"},
    "sample-local-plane": {"u_r", "u_sz", "u_s"},
    "random-uniform-density": {"d", "seed"},
    "voxel-grid-dilation": {"s_vs", "d_i"},
}
_MLS_PARAM_NAMES = {"search_radius", "polynomial_order", "gaussian_bandwidth"}


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise InvalidSpec(f"unknown filter kind {self.kind!r}")
        allowed = _STAGE_PARAM_NAMES[self.kind] | _MLS_PARAM_NAMES
        unknown = set(self.params) - allowed
        if unknown:
            raise InvalidSpec(f"unknown parameters for {self.kind}: {sorted(unknown)}")


@dataclass(frozen=True)
class PipelineSpec:
    stages: tuple
    mls: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if len(self.stages) < 1:
            raise InvalidSpec("pipeline needs at least one stage")
        object.__setattr__(self, "stages", tuple(self.stages))

    def describe(self):
        return " | ".join(s.kind for s in self.stages)


@dataclass
class StageRecord:
    kind: str
    params: dict
    time_s: float
    points_in: int
    points_out: int


@dataclass
class EvalRecord:
    """One benchmark row: pipeline, accuracy, runtime and point counts."""

    index: int
    pipeline: str
    parameters: str
    deviation_percent: float | None
    mean_error: float | None
    matched_fraction: float | None
    time_s: float
    points_in: int
    points_out: int
    status: str = "ok"


def median_nn_spacing(cloud):
    """Median distance from each point to its nearest other point."""
    if len(cloud) < 2:
        raise InvalidSpec("median_nn_spacing needs >= 2 points")
    tree = KdTree(cloud)
    _, dist, _ = tree.knn_batch(cloud.points, 2)
    return float(np.median(dist[:, 1]))


def _resolve(value, auto_value):
    if value in (None, "auto"):
        return auto_value
    return value


def _stage_mls(stage, defaults, spacing):
    get = lambda name: stage.params.get(name, defaults.get(name))
    radius = _resolve(get("search_radius"), 3.0 * spacing)
    order = _resolve(get("polynomial_order"), 1)
    bw = get("gaussian_bandwidth")
    if bw == "auto":
        bw = None
    return mls_mod.MlsParams(
        search_radius=float(radius),
        polynomial_order=int(order),
        gaussian_bandwidth=None if bw is None else float(bw),
    )


def apply_stage(cloud, stage, mls_defaults=None, seed=0):
    """Apply one filter stage; returns (cloud, resolved parameter dict)."""
    mls_defaults = mls_defaults or {}
    p = stage.params
    if stage.kind == "radius":
        params = RadiusFilterParams(r=float(p["r"]), b=int(p["b"]))
        out, _ = radius_filter(cloud, params)
        return out, {"r": params.r, "b": params.b}
    if stage.kind == "statistical":
        params = StatFilterParams(l=int(p.get("l", 50)), h=float(p.get("h", 1.8)))
        out, _ = statistical_filter(cloud, params)
        return out, {"l": params.l, "h": params.h}

    spacing = median_nn_spacing(cloud)
    mls = _stage_mls(stage, mls_defaults, spacing)
    resolved = {"search_radius": mls.search_radius, "order": mls.polynomial_order}
    if stage.kind == "sample-local-plane":
        params = mls_mod.SampleLocalPlaneParams(
            u_r=float(_resolve(p.get("u_r"), 2.0 * spacing)),
            u_sz=float(_resolve(p.get("u_sz"), spacing)),
            u_s=int(p.get("u_s", 5)),
        )
        out = mls_mod.upsample_sample_local_plane(cloud, mls, params)
        resolved.update(u_r=params.u_r, u_sz=params.u_sz, u_s=params.u_s)
    elif stage.kind == "random-uniform-density":
        params = mls_mod.RandomUniformDensityParams(
            d=int(p.get("d", 13)), seed=int(p.get("seed", seed))
        )
        out = mls_mod.upsample_random_uniform_density(cloud, mls, params)
        resolved.update(d=params.d, seed=params.seed)
    elif stage.kind == "voxel-grid-dilation":
        params = mls_mod.VoxelGridDilationParams(
            s_vs=float(_resolve(p.get("s_vs"), spacing)),
            d_i=int(p.get("d_i", 3)),
        )
        out = mls_mod.upsample_voxel_grid_dilation(cloud, mls, params)
        resolved.update(s_vs=params.s_vs, d_i=params.d_i)
    else:  # pragma: no cover - guarded by FilterSpec
        raise InvalidSpec(f"unknown filter kind {stage.kind!r}")
    return out, resolved


def run_pipeline(cloud, spec, fixed_timing=False):
    """Apply all stages in order; returns (cloud, [StageRecord])."""
    records = []
    current = cloud
    for i, stage in enumerate(spec.stages):
        t0 = time.perf_counter()
        try:
            out, resolved = apply_stage(current, stage, spec.mls, spec.seed)
        except CloudpostError as exc:
            raise type(exc)(f"stage {i} ({stage.kind}): {exc}") from exc
        dt = 0.0 if fixed_timing else time.perf_counter() - t0
        records.append(
            StageRecord(
                kind=stage.kind,
                params=resolved,
                time_s=dt,
                points_in=len(current),
                points_out=len(out),
            )
        )
        current = out
    return current, records


def default_pipeline():
    """The reference pipeline: statistical(h=1.8) then voxel-grid-dilation."""
    return PipelineSpec(
        stages=(
            FilterSpec("statistical", {"l": 50, "h": 1.8}),
            FilterSpec("voxel-grid-dilation", {"s_vs": "auto", "d_i": 3}),
        )
    )


@dataclass(frozen=True)
class EvalResult:
    mean_error: float
    deviation_percent: float
    matched_fraction: float
    scale: object
    scaled: object


def evaluate(estimated, ground_truth, est_traj, gt_traj, max_dist=None):
    """Scale-align the estimated map and score it against ground truth.

    The map is scaled about the first estimated-trajectory translation with
    the per-axis scale recovered from the trajectories, then matched against
    ground truth within max_dist (default: 2x median ground-truth spacing).
    """
    s = estimate_scale(est_traj, gt_traj)
    anchor = est_traj[0].translation
    scaled = apply_scale(estimated, s, anchor)
    if max_dist is None:
        max_dist = default_max_dist(ground_truth)
    err = map_error(scaled, ground_truth, max_dist)
    return EvalResult(
        mean_error=err.mean_error,
        deviation_percent=err.percent_error,
        matched_fraction=err.matched_fraction,
        scale=s,
        scaled=scaled,
    )


@dataclass(frozen=True)
class SweepSpec:
    """Pipeline template whose list-valued parameters form the sweep grid."""

    stages: tuple  # FilterSpec instances; list-valued params are swept
    mls: dict = field(default_factory=dict)
    seed: int = 0
    parallelism: int = 1
    max_dist: float | None = None

    def __post_init__(self):
        if len(self.stages) < 1:
            raise InvalidSpec("sweep needs at least one stage")
        if self.parallelism < 1:
            raise InvalidSpec("parallelism must be >= 1")
        object.__setattr__(self, "stages", tuple(self.stages))

    def combinations(self):
        """All pipelines in the Cartesian product of list-valued params."""
        axes = []
        for si, stage in enumerate(self.stages):
            for name, value in sorted(stage.params.items()):
                if isinstance(value, (list, tuple)):
                    if len(value) == 0:
                        raise InvalidSpec(f"empty grid for {stage.kind}.{name}")
                    axes.append((si, name, list(value)))
        combos = []
        for values in itertools.product(*(a[2] for a in axes)):
            stages = [FilterSpec(s.kind, dict(s.params)) for s in self.stages]
            for (si, name, _), v in zip(axes, values):
                stages[si] = FilterSpec(
                    stages[si].kind, {**stages[si].params, name: v}
                )
            combos.append(
                PipelineSpec(stages=tuple(stages), mls=dict(self.mls), seed=self.seed)
            )
        return combos


def _param_string(stage_records):
    parts = []
    for rec in stage_records:
        kv = ", ".join(f"{k}={_short(v)}" for k, v in rec.params.items())
        parts.append(f"{rec.kind}({kv})")
    return " | ".join(parts)


def _short(v):
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def _run_combo(args):
    (index, pspec, est_pts, gt_pts, est_traj, gt_traj, max_dist, fixed) = args
    from .geometry import PointCloud

    estimated = PointCloud(est_pts)
    ground_truth = PointCloud(gt_pts)
    try:
        out, stage_records = run_pipeline(estimated, pspec, fixed_timing=fixed)
        result = evaluate(out, ground_truth, est_traj, gt_traj, max_dist)
        return EvalRecord(
            index=index,
            pipeline=pspec.describe(),
            parameters=_param_string(stage_records),
            deviation_percent=result.deviation_percent,
            mean_error=result.mean_error,
            matched_fraction=result.matched_fraction,
            time_s=sum(r.time_s for r in stage_records),
            points_in=len(estimated),
            points_out=len(out),
            status="ok",
        )
    except CloudpostError as exc:
        return EvalRecord(
            index=index,
            pipeline=pspec.describe(),
            parameters=" | ".join(s.kind for s in pspec.stages),
            deviation_percent=None,
            mean_error=None,
            matched_fraction=None,
            time_s=0.0,
            points_in=len(estimated),
            points_out=0,
            status=f"error: {exc}",
        )


def sweep(estimated, ground_truth, est_traj, gt_traj, spec, fixed_timing=False):
    """Evaluate every parameter combination; failures become failed rows.

    Results are identical for any parallelism degree: rows are collected by
    combination index and sorted by (deviation, runtime, index), failed rows
    last.
    """
    combos = spec.combinations()
    tasks = [
        (
            i,
            pspec,
            estimated.points,
            ground_truth.points,
            est_traj,
            gt_traj,
            spec.max_dist,
            fixed_timing,
        )
        for i, pspec in enumerate(combos)
    ]
    if spec.parallelism == 1 or len(tasks) == 1:
        records = [_run_combo(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.parallelism) as pool:
            records = list(pool.map(_run_combo, tasks))
    records.sort(key=lambda r: r.index)
    ok = [r for r in records if r.status == "ok"]
    failed = [r for r in records if r.status != "ok"]
    ok.sort(key=lambda r: (r.deviation_percent, r.time_s, r.index))
    return ok + failed


CSV_COLUMNS = (
    "index",
    "pipeline",
    "parameters",
    "deviation_percent",
    "mean_error",
    "matched_fraction",
    "time_s",
    "points_in",
    "points_out",
    "status",
)


def emit_report(records, csv_path):
    """Write benchmark rows as CSV (deterministic formatting)."""
    if not records:
        raise InvalidSpec("emit_report needs at least one record")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.index,
                    r.pipeline,
                    r.parameters,
                    "" if r.deviation_percent is None else f"{r.deviation_percent:.6f}",
                    "" if r.mean_error is None else f"{r.mean_error:.9f}",
                    "" if r.matched_fraction is None else f"{r.matched_fraction:.6f}",
                    f"{r.time_s:.3f}",
                    r.points_in,
                    r.points_out,
                    r.status,
                ]
            )


def emit_plot_data(pairs, path):
    """Raw-vs-processed deviation pairs per sequence (bar-chart data)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["sequence", "raw_deviation_percent", "processed_deviation_percent"])
        for name, raw, processed in pairs:
            writer.writerow([name, f"{raw:.6f}", f"{processed:.6f}"])


def _parse_stages(raw_stages):
    stages = []
    for entry in raw_stages:
        if "kind" not in entry:
            raise InvalidSpec("every pipeline stage needs a 'kind'")
        params = {k: v for k, v in entry.items() if k != "kind"}
        stages.append(FilterSpec(entry["kind"], params))
    return tuple(stages)


def _load_config(path):
    with open(path) as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise InvalidSpec(f"{path}: config must be a mapping")
    if data.get("version", 1) != 1:
        raise InvalidSpec(f"{path}: unsupported config version {data.get('version')}")
    if "pipeline" not in data:
        raise InvalidSpec(f"{path}: missing 'pipeline' section")
    return data


def load_pipeline_config(path):
    data = _load_config(path)
    return PipelineSpec(
        stages=_parse_stages(data["pipeline"]),
        mls=data.get("mls", {}) or {},
        seed=int(data.get("seed", 0)),
    )


def load_sweep_config(path):
    data = _load_config(path)
    return SweepSpec(
        stages=_parse_stages(data["pipeline"]),
        mls=data.get("mls", {}) or {},
        seed=int(data.get("seed", 0)),
        parallelism=int(data.get("parallelism", 1)),
        max_dist=None if data.get("max_dist") is None else float(data["max_dist"]),
    )
