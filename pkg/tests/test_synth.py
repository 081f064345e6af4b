import numpy as np
import pytest

from cloudpost.align import ScaleFactor
from cloudpost.errors import InvalidSpec
from cloudpost.synth import (
    RectPatch,
    SceneSpec,
    Sphere,
    box_patches,
    corridor_primitives,
    generate_scene,
    read_labels,
    surface_distance,
    write_labels,
)


def small_spec(**kw):
    defaults = dict(gt_density=60.0, seed=3)
    defaults.update(kw)
    return SceneSpec(**defaults)


class TestPrimitives:
    def test_rect_distance_exact(self):
        patch = RectPatch((0, 0, 0), (2, 0, 0), (0, 3, 0))
        pts = [[1, 1, 5], [1, 1, 0], [-1, 0, 0], [3, 4, 0]]
        d = patch.distance(pts)
        assert d == pytest.approx([5.0, 0.0, 1.0, np.sqrt(2.0)], abs=1e-12)

    def test_rect_perpendicular_required(self):
        with pytest.raises(InvalidSpec):
            RectPatch((0, 0, 0), (1, 0, 0), (1, 1, 0)).area

    def test_rect_samples_on_patch(self, rng):
        patch = RectPatch((1, 2, 3), (0, 2, 0), (0, 0, 1))
        pts = patch.sample(rng, 500)
        assert np.allclose(patch.distance(pts), 0.0, atol=1e-12)
        assert np.all(pts[:, 0] == 1.0)

    def test_rect_area(self):
        assert RectPatch((0, 0, 0), (2, 0, 0), (0, 3, 0)).area == 6.0

    def test_sphere_distance(self):
        s = Sphere((0, 0, 0), 2.0)
        d = s.distance([[0, 0, 0], [2, 0, 0], [0, 5, 0]])
        assert d == pytest.approx([2.0, 0.0, 3.0], abs=1e-12)

    def test_sphere_samples_on_surface(self, rng):
        s = Sphere((1, -1, 0.5), 0.7)
        pts = s.sample(rng, 300)
        assert np.allclose(s.distance(pts), 0.0, atol=1e-12)

    def test_box_has_six_faces(self):
        faces = box_patches((0, 0, 0), (1, 2, 3))
        assert len(faces) == 6
        total = sum(f.area for f in faces)
        assert total == pytest.approx(2 * (1 * 2 + 2 * 3 + 1 * 3))

    def test_surface_distance_is_min(self, rng):
        spec = small_spec()
        pts = rng.random((50, 3)) * 10
        d = surface_distance(spec, pts)
        per = np.stack([p.distance(pts) for p in spec.primitives])
        assert np.array_equal(d, per.min(axis=0))


class TestSceneSpec:
    def test_validation(self):
        with pytest.raises(InvalidSpec):
            SceneSpec(gt_density=0)
        with pytest.raises(InvalidSpec):
            SceneSpec(sparse_fraction=1.5)
        with pytest.raises(InvalidSpec):
            SceneSpec(n_poses=1)
        with pytest.raises(InvalidSpec):
            SceneSpec(primitives=())

    def test_default_corridor(self):
        prims = corridor_primitives()
        assert len(prims) == 16  # 4 walls + 2 boxes of 6 faces


class TestGenerateScene:
    def test_deterministic(self):
        a = generate_scene(small_spec())
        b = generate_scene(small_spec())
        assert np.array_equal(a.ground_truth.points, b.ground_truth.points)
        assert np.array_equal(a.estimated.points, b.estimated.points)
        assert np.array_equal(a.labels, b.labels)

    def test_seed_changes_output(self):
        a = generate_scene(small_spec(seed=3))
        b = generate_scene(small_spec(seed=4))
        assert not np.array_equal(a.estimated.points, b.estimated.points)

    def test_counts(self):
        spec = small_spec()
        scene = generate_scene(spec)
        k = len(scene.ground_truth)
        n_est = int(np.floor(k * spec.sparse_fraction))
        assert len(scene.estimated) == n_est
        assert scene.labels.shape == (n_est,)
        assert scene.labels.sum() == int(np.floor(n_est * spec.outlier_fraction))

    def test_clean_subsample_is_subset(self):
        spec = small_spec(noise_sigma=0.0, outlier_fraction=0.0)
        scene = generate_scene(spec)
        gt_set = {tuple(p) for p in scene.ground_truth.points}
        assert all(tuple(p) in gt_set for p in scene.estimated.points)
        assert scene.labels.sum() == 0

    def test_labels_are_oracle(self):
        # outliers sit >= outlier_scale from every surface; noisy inliers
        # stay within a few sigma of it
        spec = small_spec()
        scene = generate_scene(spec)
        d = surface_distance(spec, scene.estimated.points)
        out = scene.labels == 1
        assert np.all(d[out] >= spec.outlier_scale)
        assert np.all(d[~out] <= 6 * spec.noise_sigma)

    def test_ground_truth_on_surface(self):
        spec = small_spec()
        scene = generate_scene(spec)
        assert surface_distance(spec, scene.ground_truth.points).max() < 1e-9

    def test_identity_scale_shares_trajectory(self):
        scene = generate_scene(small_spec())
        assert scene.est_traj is scene.gt_traj

    def test_true_scale_applied_about_anchor(self):
        s = ScaleFactor(0.5, 1.0, 2.0)
        clean = small_spec(noise_sigma=0.0, outlier_fraction=0.0)
        scaled = small_spec(noise_sigma=0.0, outlier_fraction=0.0, true_scale=s)
        a = generate_scene(clean)
        b = generate_scene(scaled)
        anchor = a.gt_traj[0].translation
        expect = anchor + (a.estimated.points - anchor) / s.as_array()
        assert np.allclose(b.estimated.points, expect, atol=1e-12)
        # anchor pose itself is fixed under the scaling
        assert np.allclose(
            b.est_traj[0].translation, a.gt_traj[0].translation, atol=1e-12
        )

    def test_trajectory_inside_scene(self):
        scene = generate_scene(small_spec())
        lo = scene.ground_truth.points.min(axis=0)
        hi = scene.ground_truth.points.max(axis=0)
        tr = scene.gt_traj.translations()
        assert np.all(tr >= lo - 1e-9) and np.all(tr <= hi + 1e-9)
        assert len(scene.gt_traj) == scene.spec.n_poses


class TestLabels:
    def test_roundtrip(self, tmp_path, rng):
        labels = (rng.random(100) < 0.3).astype(np.int8)
        p = tmp_path / "labels.txt"
        write_labels(labels, p)
        assert np.array_equal(read_labels(p), labels)
