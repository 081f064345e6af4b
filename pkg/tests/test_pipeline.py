import numpy as np
import pytest

from cloudpost.errors import InvalidSpec, TooFewPoints
from cloudpost.geometry import PointCloud, Pose, Trajectory
from cloudpost.pipeline import (
    FilterSpec,
    PipelineSpec,
    SweepSpec,
    default_pipeline,
    emit_report,
    evaluate,
    load_pipeline_config,
    load_sweep_config,
    median_nn_spacing,
    run_pipeline,
    sweep,
)


def circle(n, r, center, z):
    th = 2 * np.pi * np.arange(n) / n
    return np.column_stack(
        [center[0] + r * np.cos(th), center[1] + r * np.sin(th), np.full(n, z)]
    )


def straight_traj():
    return Trajectory([Pose(0, (0.0, 0, 0)), Pose(1, (10.0, 0, 0))])


@pytest.fixture(scope="module")
def ring_scene():
    """Three isolated rings with uniform per-ring mean-knn distances.

    A: dense ring lifted 0.08 off the reference surface (moderate error).
    B: sparse clean ring (near-zero error, removed only by aggressive h).
    O: very sparse ring far off-surface (outliers, kept only by lax h).
    """
    est = PointCloud(
        np.vstack(
            [
                circle(340, 3.73, (0, 0), 0.08),
                circle(105, 2.40, (12, 0), 0.0),
                circle(55, 2.05, (6, 8), 1.5),
            ]
        )
    )
    gt = PointCloud(
        np.vstack(
            [circle(340 * 20, 3.73, (0, 0), 0.0), circle(105 * 20, 2.40, (12, 0), 0.0)]
        )
    )
    return est, gt


class TestSpecs:
    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidSpec):
            FilterSpec("median")

    def test_unknown_param_rejected(self):
        with pytest.raises(InvalidSpec):
            FilterSpec("radius", {"r": 1.0, "bogus": 2})

    def test_mls_params_allowed_on_upsamplers(self):
        FilterSpec("voxel-grid-dilation", {"s_vs": 0.1, "search_radius": 0.5})

    def test_empty_pipeline_rejected(self):
        with pytest.raises(InvalidSpec):
            PipelineSpec(stages=())

    def test_describe(self):
        spec = default_pipeline()
        assert spec.describe() == "statistical | voxel-grid-dilation"


class TestRunPipeline:
    def test_permissive_statistical_is_identity(self, rng):
        cloud = PointCloud(rng.random((200, 3)))
        spec = PipelineSpec(stages=(FilterSpec("statistical", {"l": 20, "h": 1e12}),))
        out, records = run_pipeline(cloud, spec)
        assert np.array_equal(out.points, cloud.points)
        assert records[0].points_in == records[0].points_out == 200

    def test_staging_composes(self, rng):
        # running both stages at once equals running them one at a time
        pts = np.vstack([rng.random((300, 3)), rng.uniform(5, 6, (10, 3))])
        cloud = PointCloud(pts)
        s1 = FilterSpec("statistical", {"l": 20, "h": 1.0})
        s2 = FilterSpec("radius", {"r": 0.3, "b": 3})
        full, _ = run_pipeline(cloud, PipelineSpec(stages=(s1, s2)))
        mid, _ = run_pipeline(cloud, PipelineSpec(stages=(s1,)))
        two, _ = run_pipeline(mid, PipelineSpec(stages=(s2,)))
        assert np.array_equal(full.points, two.points)

    def test_stage_error_names_stage(self, rng):
        cloud = PointCloud(rng.random((10, 3)))
        spec = PipelineSpec(stages=(FilterSpec("statistical", {"l": 50}),))
        with pytest.raises(TooFewPoints, match="stage 0"):
            run_pipeline(cloud, spec)

    def test_fixed_timing_zeroes_times(self, rng):
        cloud = PointCloud(rng.random((200, 3)))
        spec = PipelineSpec(stages=(FilterSpec("statistical", {"l": 20}),))
        _, records = run_pipeline(cloud, spec, fixed_timing=True)
        assert all(r.time_s == 0.0 for r in records)

    def test_auto_parameters_resolved(self, rng):
        pts = np.zeros((150, 3))
        pts[:, :2] = rng.uniform(0, 3, (150, 2))
        cloud = PointCloud(pts)
        spacing = median_nn_spacing(cloud)
        spec = PipelineSpec(
            stages=(FilterSpec("voxel-grid-dilation", {"s_vs": "auto", "d_i": 1}),)
        )
        out, records = run_pipeline(cloud, spec)
        assert records[0].params["s_vs"] == pytest.approx(spacing)
        assert records[0].params["search_radius"] == pytest.approx(3 * spacing)
        assert len(out) > len(cloud)

    def test_default_pipeline_runs(self, rng):
        pts = np.zeros((400, 3))
        pts[:, :2] = rng.uniform(0, 4, (400, 2))
        out, records = run_pipeline(PointCloud(pts), default_pipeline())
        assert [r.kind for r in records] == ["statistical", "voxel-grid-dilation"]
        assert len(out) > 400


class TestEvaluate:
    def test_perfect_map_scores_zero(self, rng):
        gt = PointCloud(rng.random((100, 3)) * 10)
        traj = straight_traj()
        result = evaluate(gt, gt, traj, traj, max_dist=1.0)
        assert result.mean_error == 0.0
        assert result.deviation_percent == 0.0
        assert result.matched_fraction == 1.0
        assert np.allclose(result.scale.as_array(), 1.0)

    def test_scale_recovered_before_matching(self, rng):
        gt_pts = rng.random((200, 3)) * 10
        gt = PointCloud(gt_pts)
        gt_traj = straight_traj()
        # estimate is the ground truth shrunk 2x about the first pose
        est = PointCloud(gt_pts / 2.0)
        est_traj = Trajectory([Pose(0, (0.0, 0, 0)), Pose(1, (5.0, 0, 0))])
        result = evaluate(est, gt, est_traj, gt_traj, max_dist=0.5)
        assert result.scale.s_x == pytest.approx(2.0, abs=1e-12)
        assert result.mean_error == pytest.approx(0.0, abs=1e-9)


class TestSweep:
    def make_spec(self, **kw):
        defaults = dict(
            stages=(
                FilterSpec("statistical", {"l": 20, "h": [0.5, 1.0, 1.8, 3.0]}),
            ),
            max_dist=10.0,
        )
        defaults.update(kw)
        return SweepSpec(**defaults)

    def test_combinations_cartesian(self):
        spec = SweepSpec(
            stages=(
                FilterSpec("statistical", {"l": [10, 20], "h": [1.0, 1.8, 3.0]}),
            )
        )
        combos = spec.combinations()
        assert len(combos) == 6
        seen = {
            (c.stages[0].params["l"], c.stages[0].params["h"]) for c in combos
        }
        assert seen == {(l, h) for l in (10, 20) for h in (1.0, 1.8, 3.0)}

    def test_single_combo_matches_direct_run(self, ring_scene):
        est, gt = ring_scene
        traj = straight_traj()
        spec = SweepSpec(
            stages=(FilterSpec("statistical", {"l": 20, "h": [1.8]}),),
            max_dist=10.0,
        )
        records = sweep(est, gt, traj, traj, spec, fixed_timing=True)
        assert len(records) == 1
        out, _ = run_pipeline(
            est, PipelineSpec(stages=(FilterSpec("statistical", {"l": 20, "h": 1.8}),))
        )
        direct = evaluate(out, gt, traj, traj, max_dist=10.0)
        assert records[0].deviation_percent == direct.deviation_percent
        assert records[0].points_out == len(out)

    def test_best_h_is_interior(self, ring_scene):
        # too-aggressive h drops the clean sparse ring; too-permissive h
        # keeps the off-surface ring: the best threshold is strictly inside
        # the grid, and re-running the winner standalone confirms its score
        est, gt = ring_scene
        traj = straight_traj()
        records = sweep(est, gt, traj, traj, self.make_spec(), fixed_timing=True)
        assert all(r.status == "ok" for r in records)
        best = records[0]
        best_h = float(best.parameters.split("h=")[1].split(")")[0])
        assert best_h in (1.0, 1.8)
        worst = records[len(records) - 1]
        assert "h=3" in worst.parameters
        out, _ = run_pipeline(
            est,
            PipelineSpec(
                stages=(FilterSpec("statistical", {"l": 20, "h": best_h}),)
            ),
        )
        direct = evaluate(out, gt, traj, traj, max_dist=10.0)
        assert best.deviation_percent == direct.deviation_percent

    def test_parallelism_does_not_change_records(self, ring_scene):
        est, gt = ring_scene
        traj = straight_traj()
        serial = sweep(
            est, gt, traj, traj, self.make_spec(parallelism=1), fixed_timing=True
        )
        parallel = sweep(
            est, gt, traj, traj, self.make_spec(parallelism=4), fixed_timing=True
        )
        assert serial == parallel

    def test_failed_combos_sort_last(self, ring_scene):
        est, gt = ring_scene
        traj = straight_traj()
        spec = SweepSpec(
            stages=(FilterSpec("statistical", {"l": [20, 100000], "h": [1.8]}),),
            max_dist=10.0,
        )
        records = sweep(est, gt, traj, traj, spec, fixed_timing=True)
        assert len(records) == 2
        assert records[0].status == "ok"
        assert records[1].status.startswith("error:")

    def test_empty_grid_rejected(self):
        spec = SweepSpec(stages=(FilterSpec("statistical", {"h": []}),))
        with pytest.raises(InvalidSpec):
            spec.combinations()


class TestReports:
    def test_csv_deterministic(self, tmp_path, ring_scene):
        est, gt = ring_scene
        traj = straight_traj()
        spec = SweepSpec(
            stages=(FilterSpec("statistical", {"l": 20, "h": [1.0, 3.0]}),),
            max_dist=10.0,
        )
        records = sweep(est, gt, traj, traj, spec, fixed_timing=True)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_report(records, p1)
        emit_report(records, p2)
        assert p1.read_bytes() == p2.read_bytes()
        lines = p1.read_text().splitlines()
        assert lines[0].startswith("index,pipeline,parameters,deviation_percent")
        assert len(lines) == 3

    def test_empty_report_rejected(self, tmp_path):
        with pytest.raises(InvalidSpec):
            emit_report([], tmp_path / "empty.csv")


class TestConfig:
    def test_pipeline_config(self, tmp_path):
        cfg = tmp_path / "p.yaml"
        cfg.write_text(
            "version: 1\n"
            "seed: 7\n"
            "mls:\n  search_radius: 0.4\n"
            "pipeline:\n"
            "  - kind: statistical\n    l: 30\n    h: 1.8\n"
            "  - kind: voxel-grid-dilation\n    s_vs: auto\n    d_i: 2\n"
        )
        spec = load_pipeline_config(cfg)
        assert spec.seed == 7
        assert spec.mls == {"search_radius": 0.4}
        assert [s.kind for s in spec.stages] == ["statistical", "voxel-grid-dilation"]
        assert spec.stages[0].params == {"l": 30, "h": 1.8}

    def test_sweep_config(self, tmp_path):
        cfg = tmp_path / "s.yaml"
        cfg.write_text(
            "version: 1\n"
            "parallelism: 2\n"
            "max_dist: 0.5\n"
            "pipeline:\n"
            "  - kind: statistical\n    h: [1.0, 1.8]\n"
        )
        spec = load_sweep_config(cfg)
        assert spec.parallelism == 2
        assert spec.max_dist == 0.5
        assert len(spec.combinations()) == 2

    def test_bad_version_rejected(self, tmp_path):
        cfg = tmp_path / "v.yaml"
        cfg.write_text("version: 2\npipeline:\n  - kind: statistical\n")
        with pytest.raises(InvalidSpec):
            load_pipeline_config(cfg)

    def test_missing_pipeline_rejected(self, tmp_path):
        cfg = tmp_path / "m.yaml"
        cfg.write_text("version: 1\n")
        with pytest.raises(InvalidSpec):
            load_pipeline_config(cfg)

    def test_stage_without_kind_rejected(self, tmp_path):
        cfg = tmp_path / "k.yaml"
        cfg.write_text("version: 1\npipeline:\n  - l: 30\n")
        with pytest.raises(InvalidSpec):
            load_pipeline_config(cfg)
