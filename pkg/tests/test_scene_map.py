"""Map model, FTMAP format, and synthetic generator tests."""

import numpy as np
import pytest

from scrfocus.errors import (
    DanglingReference,
    InfeasibleScene,
    InvalidPose,
    ParseError,
    UnknownImage,
)
from scrfocus.geometry import CameraIntrinsics, Pose, project
from scrfocus.scene_map import (
    MapImage,
    MapPoint,
    SceneMap,
    SynthConfig,
    generate_synthetic,
    load_map,
    save_map,
)

MINIMAL = """FTMAP 1
CAMERA 0 100 100 50 50 100 100
IMAGE 0 0 1 0 0 0 0 0 0 img_a
IMAGE 1 0 1 0 0 0 0.5 0 0 img_b
POINT 0 0 0 4 0 50 50 1 37.5 50
"""


def write(tmp_path, text, name="map.ftmap"):
    path = tmp_path / name
    path.write_text(text)
    return path


def tiny_map():
    k = CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)
    images = [
        MapImage(0, k, Pose.identity(), "a"),
        MapImage(1, k, Pose(np.array([1.0, 0, 0, 0]), np.array([0.5, 0, 0])), "b"),
    ]
    points = [
        MapPoint(0, np.array([0.0, 0.0, 4.0]), ((0, 50.0, 50.0), (1, 37.5, 50.0))),
        MapPoint(1, np.array([0.2, -0.1, 3.5]), ((1, 55.0, 47.0),)),
    ]
    return SceneMap(points, images)


class TestLoadSave:
    def test_minimal_file(self, tmp_path):
        scene = load_map(write(tmp_path, MINIMAL))
        assert len(scene.points) == 1
        assert len(scene.images) == 2
        assert scene.points[0].track == ((0, 50.0, 50.0), (1, 37.5, 50.0))

    def test_dangling_reference(self, tmp_path):
        bad = MINIMAL.replace("1 37.5 50", "99 37.5 50")
        with pytest.raises(DanglingReference):
            load_map(write(tmp_path, bad))

    def test_round_trip_identity(self, tmp_path):
        scene, _ = generate_synthetic(SynthConfig(n_points=40, n_images=6, rng_seed=3))
        path = tmp_path / "m.ftmap"
        save_map(scene, path)
        loaded = load_map(path)
        assert [p.id for p in loaded.points] == [p.id for p in scene.points]
        assert [im.id for im in loaded.images] == [im.id for im in scene.images]
        for a, b in zip(scene.points, loaded.points):
            np.testing.assert_allclose(a.position, b.position, atol=1e-9)
            assert len(a.track) == len(b.track)
            for ta, tb in zip(a.track, b.track):
                assert ta[0] == tb[0]
                assert abs(ta[1] - tb[1]) < 1e-9 and abs(ta[2] - tb[2]) < 1e-9
        for a, b in zip(scene.images, loaded.images):
            assert a.intrinsics == b.intrinsics
            assert a.name == b.name
            np.testing.assert_allclose(a.pose.q, b.pose.q, atol=1e-9)
            np.testing.assert_allclose(a.pose.t, b.pose.t, atol=1e-9)
        np.testing.assert_allclose(scene.scene_center, loaded.scene_center, atol=1e-9)

    def test_two_saves_byte_identical(self, tmp_path):
        scene = tiny_map()
        p1, p2 = tmp_path / "a.ftmap", tmp_path / "b.ftmap"
        save_map(scene, p1)
        save_map(scene, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_points_map(self, tmp_path):
        k = CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)
        scene = SceneMap([], [MapImage(0, k, Pose.identity(), "a")])
        path = tmp_path / "empty.ftmap"
        save_map(scene, path)
        loaded = load_map(path)
        assert loaded.points == []
        np.testing.assert_allclose(loaded.scene_center, np.zeros(3))

    def test_bad_magic(self, tmp_path):
        with pytest.raises(ParseError) as err:
            load_map(write(tmp_path, "FTMAPX\n"))
        assert err.value.line_no == 1

    def test_unknown_record(self, tmp_path):
        with pytest.raises(ParseError):
            load_map(write(tmp_path, MINIMAL + "BOGUS 1 2\n"))

    def test_malformed_float_reports_line(self, tmp_path):
        bad = MINIMAL.replace("POINT 0 0 0 4", "POINT 0 0 zero 4")
        with pytest.raises(ParseError) as err:
            load_map(write(tmp_path, bad))
        assert err.value.line_no == 5

    def test_invalid_pose(self, tmp_path):
        bad = MINIMAL.replace("IMAGE 0 0 1 0 0 0", "IMAGE 0 0 1 0.5 0 0")
        with pytest.raises(InvalidPose):
            load_map(write(tmp_path, bad))

    def test_duplicate_track_image(self, tmp_path):
        bad = MINIMAL.replace("1 37.5 50", "0 37.5 50")
        with pytest.raises(ParseError):
            load_map(write(tmp_path, bad))

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        text = MINIMAL.replace("CAMERA", "# leading comment\n\nCAMERA")
        scene = load_map(write(tmp_path, text))
        assert len(scene.images) == 2


class TestVisiblePoints:
    def test_image_without_point(self):
        scene = tiny_map()
        assert scene.visible_points(0) == [(scene.points[0], (50.0, 50.0))]

    def test_query_returns_tracked_points_in_id_order(self):
        scene = tiny_map()
        vis = scene.visible_points(1)
        assert [p.id for p, _ in vis] == [0, 1]

    def test_unknown_image(self):
        with pytest.raises(UnknownImage):
            tiny_map().visible_points(42)

    def test_cardinality_matches_track_membership(self):
        scene, _ = generate_synthetic(SynthConfig(n_points=60, n_images=8, rng_seed=1))
        for iid in scene.image_ids():
            expected = sum(1 for p in scene.points if any(t[0] == iid for t in p.track))
            assert len(scene.visible_points(iid)) == expected


class TestSynthetic:
    def test_head_on_points_tracked_everywhere(self):
        cfg = SynthConfig(n_points=12, n_images=2, structured_fraction=0.15, rng_seed=5)
        scene, _ = generate_synthetic(cfg)
        # central wall patch seen head-on: every kept point visible in both images
        for p in scene.points:
            assert len(p.track) == 2

    def test_observations_reproject_within_half_pixel(self):
        scene, _ = generate_synthetic(SynthConfig(n_points=80, n_images=10, rng_seed=2))
        for iid in scene.image_ids():
            im = scene.image(iid)
            for p, px in scene.visible_points(iid):
                proj = project(p.position, im.intrinsics, im.pose)
                assert proj is not None
                assert abs(proj.u - px.u) < 0.5 and abs(proj.v - px.v) < 0.5

    def test_determinism_byte_identical(self, tmp_path):
        cfg = SynthConfig(n_points=50, n_images=6, rng_seed=9)
        s1, _ = generate_synthetic(cfg)
        s2, _ = generate_synthetic(cfg)
        p1, p2 = tmp_path / "s1.ftmap", tmp_path / "s2.ftmap"
        save_map(s1, p1)
        save_map(s2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_too_few_points_infeasible(self):
        with pytest.raises(InfeasibleScene):
            generate_synthetic(SynthConfig(n_points=3, n_images=2, rng_seed=0))

    def test_scene_center_is_mean(self):
        scene, _ = generate_synthetic(SynthConfig(n_points=40, n_images=5, rng_seed=4))
        np.testing.assert_allclose(
            scene.scene_center, np.mean([p.position for p in scene.points], axis=0), atol=1e-9
        )

    def test_point_ids_dense_from_zero(self):
        scene, _ = generate_synthetic(SynthConfig(n_points=40, n_images=5, rng_seed=4))
        assert [p.id for p in scene.points] == list(range(len(scene.points)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(n_images=1)
        with pytest.raises(ValueError):
            SynthConfig(descriptor_dim=4)
        with pytest.raises(ValueError):
            SynthConfig(structured_fraction=1.5)
