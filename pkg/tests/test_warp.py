"""
Deformasyon testleri: iskelet ağırlıkları, ileri/geri bükme, kök pozu
"""

import math

import numpy as np
import pytest
import torch

from src.core.constants import DeformationMode
from src.core.geometry import DTYPE, geodesic_distance, rodrigues, rt_apply, rt_inverse, rt_matrix
from src.ml_engine.warp import (
    BoneSet, FieldDeformation, FrameState, RootPose, SkinningDeformation, build_deformation,
    fibonacci_sphere, skinning_weights,
)
from src.utils.exceptions import ValidationError

CODE = 8


def random_transforms(count: int, rng) -> torch.Tensor:
    aa = torch.from_numpy(rng.standard_normal((count, 3)) * 0.8)
    trans = torch.from_numpy(rng.standard_normal((count, 3)) * 0.3)
    return rt_matrix(rodrigues(aa), trans)


@pytest.fixture
def skinning():
    torch.manual_seed(0)
    return SkinningDeformation(num_bones=6, code_dim=CODE, hidden=(16, 16), xyz_freqs=2)


class TestSkinningWeights:

    @pytest.mark.parametrize('use_gaussian,use_delta', [(True, True), (True, False), (False, True)])
    def test_partition_of_unity(self, use_gaussian, use_delta):
        gen = torch.Generator().manual_seed(1)
        points = torch.randn(2, 50, 3, dtype=DTYPE, generator=gen)
        centers = torch.randn(4, 3, dtype=DTYPE, generator=gen)
        orient = rodrigues(torch.randn(4, 3, dtype=DTYPE, generator=gen))
        delta = torch.randn(2, 50, 4, dtype=DTYPE, generator=gen) if use_delta else None
        w = skinning_weights(points, centers, orient, torch.full((4, 3), 5.0, dtype=DTYPE), delta, use_gaussian)
        assert w.shape == (2, 50, 4)
        assert bool((w >= 0).all())
        assert torch.allclose(w.sum(dim=-1), torch.ones(2, 50, dtype=DTYPE), atol=1e-9)

    def test_nearest_bone_dominates(self):
        centers = torch.tensor([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], dtype=DTYPE)
        orient = torch.eye(3, dtype=DTYPE).expand(2, 3, 3)
        points = torch.tensor([[0.05, 0.0, 0.0], [0.95, 0.0, 0.0]], dtype=DTYPE)
        w = skinning_weights(points, centers, orient, torch.full((2, 3), 20.0, dtype=DTYPE))
        assert float(w[0, 0]) > 0.99 and float(w[1, 1]) > 0.99

    def test_fibonacci_sphere_radius(self):
        pts = fibonacci_sphere(25, 0.3)
        assert pts.shape == (25, 3)
        assert torch.allclose(torch.linalg.norm(pts, dim=-1), torch.full((25,), 0.3, dtype=DTYPE))


class TestSkinningWarp:

    def test_rigid_subcase_is_exact(self, skinning):
        """Every ΔJ equal: forward ∘ backward is the identity for any weights"""
        rng = np.random.default_rng(2)
        for _ in range(5):
            root = random_transforms(3, rng)
            shared = random_transforms(1, rng)[0]
            state = skinning.state(root, torch.from_numpy(rng.standard_normal((3, CODE))),
                                   torch.from_numpy(rng.standard_normal(CODE)))
            state = FrameState(state.root, state.body_code, state.rest_code,
                               shared.expand(3, 6, 3, 4).clone(), state.centers, state.orient,
                               state.rest_centers, state.rest_orient)
            points = torch.from_numpy(rng.standard_normal((3, 200, 3)))
            with torch.no_grad():
                canonical = skinning.warp_backward(points, state)
                expected = rt_apply(rt_inverse(shared), rt_apply(rt_inverse(root)[:, None], points))
                back = skinning.warp_forward(canonical, state)
            assert torch.allclose(canonical, expected, atol=1e-9)
            assert torch.allclose(back, points, atol=1e-9)

    def test_rest_code_gives_pure_root(self, skinning):
        rng = np.random.default_rng(3)
        root = random_transforms(2, rng)
        code = torch.from_numpy(rng.standard_normal(CODE))
        state = skinning.state(root, code.expand(2, CODE), code)
        points = torch.from_numpy(rng.standard_normal((2, 30, 3)))
        with torch.no_grad():
            canonical = skinning.warp_backward(points, state)
        assert torch.allclose(canonical, rt_apply(rt_inverse(root)[:, None], points), atol=1e-12)

    def test_weights_sum_to_one_inside_warp(self, skinning):
        rng = np.random.default_rng(4)
        state = skinning.state(random_transforms(2, rng), torch.from_numpy(rng.standard_normal((2, CODE))),
                               torch.zeros(CODE, dtype=DTYPE))
        points = torch.from_numpy(rng.standard_normal((2, 40, 3)))
        with torch.no_grad():
            w_back = skinning.backward_weights(points, state)
            w_fwd = skinning.forward_weights(points, state)
        assert torch.allclose(w_back.sum(-1), torch.ones(2, 40, dtype=DTYPE), atol=1e-9)
        assert torch.allclose(w_fwd.sum(-1), torch.ones(2, 40, dtype=DTYPE), atol=1e-9)

    def test_select_rows(self, skinning):
        rng = np.random.default_rng(5)
        state = skinning.state(random_transforms(3, rng), torch.from_numpy(rng.standard_normal((3, CODE))),
                               torch.zeros(CODE, dtype=DTYPE))
        picked = state.select(torch.tensor([2, 2, 0]))
        assert picked.root.shape == (3, 3, 4)
        assert torch.equal(picked.delta[0], state.delta[2])
        assert torch.equal(picked.rest_centers, state.rest_centers)

    def test_gradients_reach_bones_and_codes(self, skinning):
        rng = np.random.default_rng(6)
        code = torch.from_numpy(rng.standard_normal((2, CODE))).requires_grad_(True)
        state = skinning.state(random_transforms(2, rng), code, torch.zeros(CODE, dtype=DTYPE))
        out = skinning.warp_backward(torch.from_numpy(rng.standard_normal((2, 10, 3))), state)
        out.sum().backward()
        assert code.grad is not None and float(code.grad.abs().sum()) > 0
        assert skinning.bones.centers.grad is not None

    def test_bone_export(self):
        bones = BoneSet(4)
        lines = bones.export_lines(torch.eye(3, 4, dtype=DTYPE).expand(4, 3, 4))
        assert len(lines) == 4
        values = [float(v) for v in lines[0].split()]
        assert len(values) == 15
        assert values[12] == pytest.approx(1.0 / math.sqrt(20.0))


class TestFieldDeformation:

    @pytest.mark.parametrize('mode', [DeformationMode.SE3_FIELD, DeformationMode.TRANSLATION_FIELD])
    def test_near_identity_at_init(self, mode):
        torch.manual_seed(7)
        field = build_deformation(mode, code_dim=CODE, hidden=(16,), xyz_freqs=2)
        assert isinstance(field, FieldDeformation)
        root = torch.eye(3, 4, dtype=DTYPE).expand(2, 3, 4)
        state = field.state(root, torch.zeros(2, CODE, dtype=DTYPE), torch.zeros(CODE, dtype=DTYPE))
        points = torch.randn(2, 20, 3, dtype=DTYPE) * 0.3
        with torch.no_grad():
            cycled = field.warp_forward(field.warp_backward(points, state), state)
        assert cycled.shape == points.shape
        assert float((cycled - points).abs().max()) < 0.2

    def test_skinning_mode_rejected(self):
        with pytest.raises(ValidationError):
            FieldDeformation(DeformationMode.SKINNING)

    def test_build_skinning(self):
        assert isinstance(build_deformation('skinning', num_bones=3, code_dim=CODE, hidden=(8,)),
                          SkinningDeformation)


class TestRootPose:

    def test_zero_code_stays_near_init(self):
        torch.manual_seed(8)
        root = RootPose(CODE, (16, 16))
        init = rt_matrix(rodrigues(torch.tensor([[0.2, 0.1, 0.0]], dtype=DTYPE)),
                         torch.tensor([[0.0, 0.0, 3.0]], dtype=DTYPE))
        with torch.no_grad():
            pose = root(torch.zeros(1, CODE, dtype=DTYPE), init)
        assert float(geodesic_distance(pose[0, :, :3], init[0, :, :3])) < 0.2
        assert float(torch.linalg.norm(pose[0, :, 3] - init[0, :, 3])) < 0.5
