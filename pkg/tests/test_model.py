"""
ArticulatedModel testleri: kare durumu, ışınlar, parametre grupları, aktarım
"""

import numpy as np
import pytest
import torch

from src.core.constants import DeformationMode
from src.core.geometry import DTYPE, rt_identity
from src.ml_engine.model import PER_FRAME_STATE, ArticulatedModel, ModelConfig
from src.utils.exceptions import SizeMismatch

from tests.conftest import tiny_fit_config


def tiny_model_config(dataset, **overrides) -> ModelConfig:
    options = tiny_fit_config().model_overrides()
    options.update(overrides)
    return ModelConfig.for_dataset(dataset, **options)


@pytest.fixture
def model(tiny_dataset):
    torch.manual_seed(0)
    return ArticulatedModel(tiny_model_config(tiny_dataset), ((-0.5, 0.5),) * 3)


class TestModelConfig:

    def test_for_dataset(self, tiny_dataset):
        config = tiny_model_config(tiny_dataset)
        assert config.num_frames == 6 and config.num_videos == 2
        assert config.video_of_frame == [0, 0, 0, 1, 1, 1]
        assert len(config.focal) == 2
        assert config.num_bones == 4

    def test_dict_round_trip(self, tiny_dataset):
        config = tiny_model_config(tiny_dataset)
        assert ModelConfig.from_dict(config.to_dict()) == config


class TestFrameState:

    def test_shapes_and_duplicates(self, model):
        state = model.frame_state([0, 0, 3])
        assert state.root.shape == (3, 3, 4)
        assert state.delta.shape == (3, 4, 3, 4)
        assert torch.equal(state.root[0], state.root[1])

    def test_zero_codes_give_identity_delta(self, model):
        state = model.frame_state([2])
        assert torch.allclose(state.delta, rt_identity(4).unsqueeze(0), atol=1e-9)

    def test_root_follows_initialization(self, model):
        poses = rt_identity(6).clone()
        poses[:, 2, 3] = torch.arange(6, dtype=DTYPE) + 2.0
        model.set_root_init(poses)
        roots = model.roots([0, 5])
        assert float(roots[1, 2, 3] - roots[0, 2, 3]) == pytest.approx(5.0, abs=0.1)

    def test_root_init_shape_checked(self, model):
        with pytest.raises(SizeMismatch):
            model.set_root_init(rt_identity(5))


class TestRays:

    def test_unit_directions_through_pixel_centers(self, model):
        origins, dirs, centers = model.rays([0, 4], [0, 15], [3, 7])
        assert torch.equal(origins, torch.zeros(2, 3, dtype=DTYPE))
        assert torch.allclose(torch.linalg.norm(dirs, dim=-1), torch.ones(2, dtype=DTYPE))
        assert bool((dirs[:, 2] > 0).all())
        assert centers.tolist() == [[3.5, 0.5], [7.5, 15.5]]

    def test_direction_matches_intrinsics(self, model, tiny_dataset):
        _, dirs, _ = model.rays([0], [2], [5])
        fx, fy, px, py = tiny_dataset.cameras[0, :4]
        expected = np.array([(5.5 - px) / fx, (2.5 - py) / fy, 1.0])
        assert np.allclose(dirs[0].numpy(), expected / np.linalg.norm(expected))

    def test_render_image(self, model):
        rgb, opacity = model.render_image(1, num_samples=6, chunk=100)
        assert rgb.shape == (16, 16, 3) and opacity.shape == (16, 16)
        assert np.isfinite(rgb).all()
        assert opacity.min() >= 0.0 and opacity.max() <= 1.0

    def test_flow_neighbor_stays_in_video(self, model):
        # iki video, üçer kare
        assert [model.flow_neighbor(t) for t in range(6)] == [1, 2, 1, 4, 5, 4]

    def test_flow_and_uncertainty_images(self, model):
        flow = model.render_flow_image(1, 2, num_samples=6, chunk=100)
        assert flow.shape == (16, 16, 2) and np.isfinite(flow).all()
        unc = model.uncertainty_image(1)
        assert unc.shape == (16, 16) and (unc >= 0.0).all()


class TestPixelFeatures:

    def test_normalized_with_background_mask(self, model):
        features = np.zeros((6, 16, 16, 16))
        features[2, 4, 4, :] = 3.0
        model.set_pixel_features(features)
        emb = model.pixel_embeddings
        assert bool(emb.foreground[2, 4, 4]) and not bool(emb.foreground[2, 4, 5])
        assert float(torch.linalg.norm(emb.features[2, 4, 4])) == pytest.approx(1.0)

    def test_shape_checked(self, model):
        with pytest.raises(SizeMismatch):
            model.set_pixel_features(np.zeros((6, 8, 8, 16)))


class TestBookkeeping:

    def test_param_groups(self):
        assert ArticulatedModel.param_group('root_codes') == 'code'
        assert ArticulatedModel.param_group('rest_code') == 'code'
        assert ArticulatedModel.param_group('deformation.bones.centers') == 'bone'
        assert ArticulatedModel.param_group('pixel_embeddings.features') == 'pixel'
        assert ArticulatedModel.param_group('canonical.sdf.mlp.layers.0.weight') == 'mlp'

    def test_shared_state_excludes_frame_tensors(self, model):
        shared = model.shared_state()
        assert not set(shared) & set(PER_FRAME_STATE)
        assert 'rest_code' in shared and 'bounds' in shared

    def test_transfer_keeps_shared_weights(self, model, tiny_dataset):
        config = tiny_model_config(tiny_dataset)
        config.num_frames = 4
        config.video_of_frame = [0, 0, 1, 1]
        target = model.transfer_to(config)
        assert target.root_codes.shape[0] == 4
        for name, tensor in model.shared_state().items():
            assert torch.equal(target.state_dict()[name], tensor), name

    def test_transfer_rejects_other_networks(self, model, tiny_dataset):
        with pytest.raises(SizeMismatch):
            model.transfer_to(tiny_model_config(tiny_dataset, num_bones=5))

    def test_bone_lines(self, model):
        lines = model.bone_lines()
        assert len(lines) == 4
        assert all(len(line.split()) == 15 for line in lines)
        assert len(model.bone_lines(3)) == 4

    def test_no_bones_without_skinning(self, tiny_dataset):
        config = tiny_model_config(tiny_dataset, deformation=DeformationMode.TRANSLATION_FIELD.value)
        assert ArticulatedModel(config).bone_lines() == []
