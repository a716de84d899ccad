"""
Sentetik sahne oracle'ı testleri
"""

import json

import numpy as np
import pytest

from src.data_handlers import dataset_io as dio
from src.data_handlers.synth import (
    FIXTURES, Capsule, SceneScript, VideoScript, analytic_sdf, capsule_sdf, export_dataset,
    fixture_script, oracle_embedding, posed_sdf, render_oracle, surface_points,
)
from src.utils.exceptions import ValidationError

from tests.conftest import tiny_script


class TestScript:

    def test_fixtures_build(self):
        for name in FIXTURES:
            script = fixture_script(name)
            assert script.num_frames >= 2 * 8
            assert script.bounding_radius() < script.distance

    def test_unknown_fixture(self):
        with pytest.raises(ValidationError):
            fixture_script('dragon')

    def test_json_round_trip(self, tmp_path):
        script = tiny_script()
        script.save(tmp_path / 'scene.json')
        loaded = fixture_script(str(tmp_path / 'scene.json'))
        assert loaded.to_dict() == json.loads(json.dumps(script.to_dict()))

    def test_validation(self):
        with pytest.raises(ValidationError):
            SceneScript('x', 8, 8, 10.0, [Capsule((0, 0, 0), (0, 1, 0), -0.1)])
        with pytest.raises(ValidationError):
            SceneScript('x', 8, 8, 10.0, [Capsule((0, 0, 0), (0, 1, 0), 0.1, bone=0)])
        with pytest.raises(ValidationError):
            SceneScript('x', 8, 8, 10.0, [Capsule((0, 0, 0), (0, 1, 0), 0.1)], videos=[VideoScript(1)])

    def test_root_pose_is_rigid(self):
        pose = tiny_script().root_pose(1, 2)
        rot = pose[:, :3]
        assert np.allclose(rot @ rot.T, np.eye(3))
        assert pose[2, 3] == pytest.approx(3.0)


class TestAnalyticSdf:

    def test_capsule(self):
        pts = np.array([[0.0, 0.5, 0.0], [0.3, 0.0, 0.0], [0.0, 1.5, 0.0]])
        sdf = capsule_sdf(pts, (0, 0, 0), (0, 1, 0), 0.1)
        assert np.allclose(sdf, [-0.1, 0.2, 0.4])

    def test_sphere_capsule(self):
        assert capsule_sdf(np.array([[0.0, 0.0, 2.0]]), (0, 0, 0), (0, 0, 0), 0.5)[0] == pytest.approx(1.5)

    def test_union_and_posing(self):
        script = tiny_script()
        tip = np.array([[0.0, -0.52, 0.0]])
        assert analytic_sdf(tip, script)[0] == pytest.approx(0.0, abs=1e-9)
        moved, _ = posed_sdf(tip, script, script.bone_transforms(0, 0))
        swung, _ = posed_sdf(tip, script, script.bone_transforms(1, 0))
        assert moved[0] == pytest.approx(0.0, abs=1e-9)
        assert swung[0] > 0.01

    def test_embedding_unit_and_deterministic(self):
        pts = np.random.default_rng(0).normal(size=(20, 3))
        emb = oracle_embedding(pts)
        assert emb.shape == (20, 16)
        assert np.allclose(np.linalg.norm(emb, axis=-1), 1.0)
        assert np.array_equal(emb, oracle_embedding(pts))


class TestOracleRender:

    @pytest.fixture(scope='class')
    def frame(self):
        return render_oracle(tiny_script(), 0, 1, num_points=200)

    def test_background_and_object(self, frame):
        sil = frame.silhouette
        assert 0 < sil.sum() < sil.size
        assert sil[8, 8] == 1.0 and sil[0, 0] == 0.0
        assert np.all(frame.rgb[sil == 0] == 0.0)
        assert np.all(frame.features[sil == 0] == 0.0)
        assert np.allclose(np.linalg.norm(frame.features[sil == 1], axis=-1), 1.0)

    def test_rgb_quantized(self, frame):
        assert np.allclose(frame.rgb * 255.0, np.round(frame.rgb * 255.0))

    def test_flow_targets(self, frame):
        assert set(frame.flow) == {1, -1}
        for grid in frame.flow.values():
            valid = grid[..., 2] > 0.5
            assert valid.sum() == frame.silhouette.sum()
            assert np.all(grid[~valid][:, :2] == 0.0)

    def test_flow_is_zero_for_static_scene(self):
        script = SceneScript('static', 16, 16, 24.0, [Capsule((0, 0, 0), (0, 0, 0), 0.3)],
                             videos=[VideoScript(3, 0.0, 0.0)])
        frame = render_oracle(script, 0, 1, num_points=10)
        assert np.abs(frame.flow[1][..., :2]).max() < 1e-9

    def test_depth_in_front_of_camera(self, frame):
        depth = frame.depth[frame.silhouette == 1]
        assert depth.min() > 2.0 and depth.max() < 3.6

    def test_surface_points_on_surface(self):
        script = tiny_script()
        pts = surface_points(script, 1, 2, 400)
        root = script.root_pose(1, 2)
        obj = (pts - root[:, 3]) @ root[:, :3]
        sdf, _ = posed_sdf(obj, script, script.bone_transforms(1, 2))
        assert len(pts) > 300
        assert np.abs(sdf).max() < 1e-6

    def test_surface_points_deterministic(self):
        script = tiny_script()
        assert np.array_equal(surface_points(script, 0, 0, 50), surface_points(script, 0, 0, 50))


class TestExport:

    def test_layout(self, tiny_dataset_dir):
        manifest = dio.read_manifest(tiny_dataset_dir)
        assert manifest['image_size'] == [16, 16]
        assert [v['frames'] for v in manifest['videos']] == [3, 3]
        vdir = tiny_dataset_dir / 'video_000'
        for name in ('poses.txt', 'cameras.txt', 'frame_0000_rgb.ppm', 'frame_0000_sil.pgm',
                     'frame_0000_feat.raw', 'frame_0000_flow_p1.raw', 'frame_0002_flow_m2.raw'):
            assert (vdir / name).is_file(), name
        assert not (vdir / 'frame_0000_flow_m1.raw').exists()
        assert (tiny_dataset_dir / 'gt' / 'video_001' / 'frame_0002.ply').is_file()

    def test_export_is_deterministic(self, tmp_path):
        script = tiny_script('again')
        script.videos = script.videos[:1]
        export_dataset(script, tmp_path / 'a', num_points=50, with_meshes=False)
        export_dataset(script, tmp_path / 'b', num_points=50, with_meshes=False)
        assert dio.content_hash(tmp_path / 'a') == dio.content_hash(tmp_path / 'b')
