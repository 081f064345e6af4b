import numpy as np
import pytest

from cloudpost.align import (
    ScaleFactor,
    apply_scale,
    default_max_dist,
    estimate_scale,
    find_correspondences,
    map_error,
)
from cloudpost.errors import (
    DegenerateTrajectory,
    EmptyCloud,
    InvalidParams,
    NoCorrespondences,
    TooFewPoses,
)
from cloudpost.geometry import PointCloud, Pose, Trajectory


def make_traj(translations, t0=0):
    return Trajectory(
        [Pose(t0 + i, tuple(tr)) for i, tr in enumerate(translations)]
    )


def helix(n=50):
    t = np.linspace(0, 4 * np.pi, n)
    return np.column_stack([np.cos(t), np.sin(t), 0.1 * t])


class TestCorrespondences:
    def test_identical_clouds(self, rng):
        pts = rng.random((100, 3))
        c = find_correspondences(PointCloud(pts), PointCloud(pts), 0.5)
        assert np.array_equal(c.est_indices, np.arange(100))
        assert np.array_equal(c.gt_indices, np.arange(100))
        assert np.all(c.distances == 0.0)
        assert np.all(c.deviations == 0.0)

    def test_deviation_sign(self):
        est = PointCloud([[0.0, 0, 0]])
        gt = PointCloud([[0.1, 0, 0]])
        c = find_correspondences(est, gt, 1.0)
        assert np.allclose(c.deviations, [[0.1, 0, 0]], atol=1e-15)

    def test_matches_brute_force(self, rng):
        est = PointCloud(rng.random((200, 3)))
        gt = PointCloud(rng.random((150, 3)))
        max_dist = 0.15
        c = find_correspondences(est, gt, max_dist)
        matched = dict(zip(c.est_indices.tolist(), c.gt_indices.tolist()))
        for i, p in enumerate(est.points):
            d = np.sqrt(((gt.points - p) ** 2).sum(axis=1))
            j = np.lexsort((np.arange(len(d)), d))[0]
            if d[j] <= max_dist:
                assert matched[i] == j
            else:
                assert i not in matched

    def test_gate_excludes(self):
        est = PointCloud([[0.0, 0, 0], [5.0, 0, 0]])
        gt = PointCloud([[0.1, 0, 0]])
        c = find_correspondences(est, gt, 1.0)
        assert list(c.est_indices) == [0]

    def test_no_matches_raises(self):
        with pytest.raises(NoCorrespondences):
            find_correspondences(
                PointCloud([[0.0, 0, 0]]), PointCloud([[10.0, 0, 0]]), 1.0
            )

    def test_empty_raises(self):
        with pytest.raises(EmptyCloud):
            find_correspondences(
                PointCloud(np.zeros((0, 3))), PointCloud([[0.0, 0, 0]]), 1.0
            )


class TestScale:
    def test_identity(self):
        gt = make_traj(helix())
        s = estimate_scale(gt, gt)
        assert np.allclose(s.as_array(), 1.0, atol=1e-14)

    def test_uniform_half_scale(self):
        pts = helix()
        gt = make_traj(pts)
        est = make_traj(pts * 0.5)
        s = estimate_scale(est, gt)
        assert np.allclose(s.as_array(), 2.0, atol=1e-12)

    def test_per_axis_recovery_with_noise(self, rng):
        true = np.array([0.3, 0.7, 2.0])
        gt_pts = helix(200) * 5
        est_pts = gt_pts / true + rng.normal(0, 1e-3, size=gt_pts.shape)
        est_pts -= est_pts[0]  # keep the anchor shared
        s = estimate_scale(make_traj(est_pts), make_traj(gt_pts))
        assert np.allclose(s.as_array(), true, atol=1e-2)

    def test_least_squares_oracle(self, rng):
        est_pts = rng.normal(size=(40, 3))
        gt_pts = est_pts * [1.3, 0.6, 2.5] + rng.normal(0, 0.05, size=(40, 3))
        s = estimate_scale(make_traj(est_pts), make_traj(gt_pts))
        e = est_pts - est_pts[0]
        g = gt_pts - gt_pts[0]
        for a in range(3):
            # least-squares ratio through the origin
            want = (g[:, a] * e[:, a]).sum() / (e[:, a] ** 2).sum()
            assert s.as_array()[a] == pytest.approx(want, rel=1e-12)

    def test_flat_axis_falls_back(self):
        # z never moves in the estimate: fallback to geomean of x/y scales
        pts = helix(60)
        est = pts.copy()
        est[:, :2] /= 2.0
        est[:, 2] = 0.0
        s = estimate_scale(make_traj(est), make_traj(pts))
        assert s.s_x == pytest.approx(2.0, abs=1e-9)
        assert s.s_y == pytest.approx(2.0, abs=1e-9)
        assert s.s_z == pytest.approx(2.0, abs=1e-9)

    def test_too_few_shared_poses(self):
        gt = make_traj(helix(10))
        est = make_traj(helix(10), t0=100)
        with pytest.raises(TooFewPoses):
            estimate_scale(est, gt)

    def test_degenerate_trajectory(self):
        pts = np.zeros((5, 3))
        with pytest.raises(DegenerateTrajectory):
            estimate_scale(make_traj(pts), make_traj(helix(5)))

    def test_scale_factor_validation(self):
        with pytest.raises(InvalidParams):
            ScaleFactor(1.0, -1.0, 1.0)
        with pytest.raises(InvalidParams):
            ScaleFactor(1.0, np.inf, 1.0)

    def test_inverse(self):
        s = ScaleFactor(0.5, 2.0, 4.0)
        assert np.allclose(s.inverse().as_array(), [2.0, 0.5, 0.25])


class TestApplyScale:
    def test_anchor_fixed(self):
        cloud = PointCloud([[1.0, 1, 1], [2.0, 2, 2]])
        out = apply_scale(cloud, ScaleFactor(2, 2, 2), anchor=(1, 1, 1))
        assert np.array_equal(out.points, [[1, 1, 1], [3, 3, 3]])

    def test_roundtrip(self, rng):
        cloud = PointCloud(rng.normal(size=(50, 3)))
        s = ScaleFactor(0.3, 1.7, 4.0)
        back = apply_scale(apply_scale(cloud, s), s.inverse())
        assert np.allclose(back.points, cloud.points, atol=1e-12)

    def test_recover_then_align(self, rng):
        # full loop: scaled estimate + recovered scale aligns the cloud
        gt_pts = rng.uniform(0, 10, size=(80, 3))
        traj_gt = helix(30) * 3
        true = np.array([0.25, 0.5, 1.5])
        anchor = traj_gt[0]
        est_cloud = PointCloud(anchor + (gt_pts - anchor) / true)
        est_traj = anchor + (traj_gt - anchor) / true
        s = estimate_scale(make_traj(est_traj), make_traj(traj_gt))
        aligned = apply_scale(est_cloud, s, anchor=anchor)
        assert np.allclose(aligned.points, gt_pts, atol=1e-9)


class TestMapError:
    def test_zero_for_identical(self, rng):
        pts = PointCloud(rng.random((50, 3)))
        e = map_error(pts, pts, 1.0)
        assert e.mean_error == 0.0
        assert e.percent_error == 0.0
        assert e.matched_fraction == 1.0

    def test_known_shift(self):
        gt = PointCloud([[0.0, 0, 0], [10.0, 0, 0], [0.0, 10, 0]])
        est = PointCloud([[0.1, 0, 0], [10.0, 0, 0]])
        e = map_error(est, gt, 1.0)
        assert e.mean_error == pytest.approx(0.05, abs=1e-15)
        diag = np.sqrt(10**2 + 10**2)
        assert e.percent_error == pytest.approx(100 * 0.05 / diag, rel=1e-12)
        assert e.matched_fraction == 1.0

    def test_mean_matches_manual_sum(self, rng):
        est = PointCloud(rng.random((100, 3)))
        gt = PointCloud(rng.random((300, 3)))
        e = map_error(est, gt, 10.0)
        dists = []
        for p in est.points:
            dists.append(np.sqrt(((gt.points - p) ** 2).sum(axis=1)).min())
        assert e.mean_error == pytest.approx(np.mean(dists), rel=1e-12)

    def test_default_max_dist(self):
        # unit grid: every nearest-neighbor spacing is 1 => gate is 2
        g = np.arange(4.0)
        pts = np.array(np.meshgrid(g, g, g, indexing="ij")).reshape(3, -1).T
        assert default_max_dist(PointCloud(pts)) == 2.0

    def test_noise_monotonicity(self, rng):
        # averaged over seeds, more noise means more measured deviation
        gt = PointCloud(rng.uniform(0, 5, size=(800, 3)))
        errs = []
        for sigma in (0.01, 0.05, 0.2):
            vals = []
            for seed in range(5):
                r = np.random.default_rng(seed)
                est = PointCloud(gt.points + r.normal(0, sigma, gt.points.shape))
                vals.append(map_error(est, gt, 10.0).mean_error)
            errs.append(np.mean(vals))
        assert errs[0] < errs[1] < errs[2]
