"""
Deformation Model
=================

Per-frame root pose and bone transforms decoded from latent codes, Gaussian +
MLP skinning weights and the forward/backward linear-blend-skinning warps.

Conventions (all transforms are (…,3,4) ``[R | t]`` matrices):

- G^t = Δ(MLP_G(ω_r^t)) · G₀^t maps canonical (root) space to camera space.
- J_b = MLP_J(ω_b) poses bone b: C_b = R_J C⁰_b + t_J, V_b = R_J V⁰_b.
- ΔJ^t_b = J^t_b · (J*_b)⁻¹ moves rest-posed points to frame t.
- Backward: X* = [Σ_b W_b (ΔJ^t_b)⁻¹] · (G^t)⁻¹ X^t with W = S((G^t)⁻¹X^t, ω_b^t)
  against bones posed by J^t.
- Forward: X^t = G^t · [Σ_b W_b ΔJ^t_b] · X* with W = S(X*, ω_b*) against bones
  posed by J*.

Skinning logits are −W_σ + W_Δ, where W_σ is the Mahalanobis distance to each
bone's Gaussian (Q_b = V_b Λ_b V_bᵀ, V_b bone-to-world) and W_Δ = MLP_Δ(X, ω_b).

Two field deformation modes replace skinning for diagnostics: a per-point SE(3)
field and a per-point translation field, each with separate backward and
forward networks.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from src.core.constants import (
    BODY_CODE_DIM, BONE_INIT_PRECISION, DeformationMode, NUM_BONES,
    SDF_INIT_RADIUS, SMALL_HIDDEN, XYZ_FREQUENCIES,
)
from src.core.geometry import (
    DTYPE, rodrigues, rt_apply, rt_compose, rt_inverse, se3_from_vector,
)
from src.ml_engine.nnet import Mlp, MlpSpec, encoded_width, positional_encode
from src.utils.exceptions import ValidationError

logger = logging.getLogger(__name__)

# Son katman başlangıç ölçeği (kimliğe yakın başlangıç)
SMALL_INIT = 1e-2


def fibonacci_sphere(n: int, radius: float) -> torch.Tensor:
    """(n,3) points on a Fibonacci lattice over a sphere"""
    i = np.arange(n, dtype=np.float64) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / n)
    azimuth = math.pi * (1.0 + math.sqrt(5.0)) * i
    pts = np.stack([
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar),
    ], axis=-1)
    return torch.from_numpy(radius * pts)


# =============================================================================
# Skinning primitives
# =============================================================================

def skinning_weights(points: torch.Tensor, centers: torch.Tensor, orient: torch.Tensor,
                     precision: torch.Tensor, delta_logits: Optional[torch.Tensor] = None,
                     use_gaussian: bool = True) -> torch.Tensor:
    """
    W = softmax_b(−W_σ,b + W_Δ,b)

    Args:
        points: (*batch, N, 3)
        centers: (*batch, B, 3) or (B, 3) posed bone centers
        orient: (*batch, B, 3, 3) or (B, 3, 3) bone-to-world rotations
        precision: (B, 3) diagonal of Λ
        delta_logits: (*batch, N, B) MLP_Δ output or None
        use_gaussian: False drops W_σ

    Returns:
        (*batch, N, B) weights, non-negative, summing to 1
    """
    num_bones = centers.shape[-2]
    logits = torch.zeros(*points.shape[:-1], num_bones, dtype=points.dtype)
    if use_gaussian:
        diff = points[..., :, None, :] - centers.unsqueeze(-3)
        local = (orient.unsqueeze(-4).transpose(-1, -2) @ diff[..., None])[..., 0]
        logits = logits - (precision * local * local).sum(dim=-1)
    if delta_logits is not None:
        logits = logits + delta_logits
    return torch.softmax(logits, dim=-1)


def blend_transforms(weights: torch.Tensor, mats: torch.Tensor) -> torch.Tensor:
    """Σ_b W_b M_b: (*batch,N,B) × (*batch,B,3,4) -> (*batch,N,3,4)"""
    return torch.einsum('...nb,...bij->...nij', weights, mats)


@dataclass
class FrameState:
    """
    Everything the warps need for a batch of rays (leading dim R)

    Attributes:
        root: (R,3,4) G^t
        body_code: (R,C) ω_b^t
        rest_code: (C,) ω_b*
        delta: (R,B,3,4) ΔJ^t (skinning only)
        centers: (R,B,3) bones posed by J^t (skinning only)
        orient: (R,B,3,3)
        rest_centers: (B,3) bones posed by J* (skinning only)
        rest_orient: (B,3,3)
    """
    root: torch.Tensor
    body_code: torch.Tensor
    rest_code: torch.Tensor
    delta: Optional[torch.Tensor] = None
    centers: Optional[torch.Tensor] = None
    orient: Optional[torch.Tensor] = None
    rest_centers: Optional[torch.Tensor] = None
    rest_orient: Optional[torch.Tensor] = None

    def select(self, index) -> 'FrameState':
        """Rows ``index`` of every per-ray tensor"""
        pick = lambda t: None if t is None else t[index]
        return replace(self, root=pick(self.root), body_code=pick(self.body_code),
                       delta=pick(self.delta), centers=pick(self.centers),
                       orient=pick(self.orient))

    def with_root(self, root: torch.Tensor) -> 'FrameState':
        return replace(self, root=root)


# =============================================================================
# Modules
# =============================================================================

class BoneSet(nn.Module):
    """B Gaussian bones in zero-configuration: centers, orientations (angle-axis), log precision"""

    def __init__(self, num_bones: int = NUM_BONES, radius: float = SDF_INIT_RADIUS,
                 precision: float = BONE_INIT_PRECISION):
        super().__init__()
        self.centers = nn.Parameter(fibonacci_sphere(num_bones, radius))
        self.orientations = nn.Parameter(torch.zeros(num_bones, 3, dtype=DTYPE))
        self.log_precision = nn.Parameter(torch.full((num_bones, 3), math.log(precision), dtype=DTYPE))

    @property
    def num_bones(self) -> int:
        return self.centers.shape[0]

    @property
    def precision(self) -> torch.Tensor:
        return torch.exp(self.log_precision)

    def rest_orientation(self) -> torch.Tensor:
        return rodrigues(self.orientations)

    def posed(self, transforms: torch.Tensor):
        """(V_b | C_b) = J_b (V⁰_b | C⁰_b); transforms (…,B,3,4)"""
        centers = rt_apply(transforms, self.centers)
        orient = transforms[..., :3, :3] @ self.rest_orientation()
        return centers, orient

    def export_lines(self, transforms: torch.Tensor) -> List[str]:
        """One line per bone: cx cy cz, 9 rotation entries, 3 scales (1/sqrt(precision))"""
        centers, orient = self.posed(transforms)
        scales = torch.rsqrt(self.precision)
        lines = []
        for b in range(self.num_bones):
            values = [*centers[b].tolist(), *orient[b].reshape(-1).tolist(), *scales[b].tolist()]
            lines.append(' '.join(f"{v:.9g}" for v in values))
        return lines


class RootPose(nn.Module):
    """G^t = Δ(MLP_G(ω_r^t)) · G₀^t"""

    def __init__(self, code_dim: int, hidden: Sequence[int] = SMALL_HIDDEN):
        super().__init__()
        self.mlp = Mlp(MlpSpec(code_dim, tuple(hidden), 6, 'softplus', 0), final_scale=SMALL_INIT)

    def delta(self, codes: torch.Tensor) -> torch.Tensor:
        return se3_from_vector(self.mlp(codes))

    def forward(self, codes: torch.Tensor, init: torch.Tensor) -> torch.Tensor:
        return rt_compose(self.delta(codes), init)


class SkinningDeformation(nn.Module):
    """Neural blend skinning"""

    mode = DeformationMode.SKINNING

    def __init__(self, num_bones: int = NUM_BONES, code_dim: int = BODY_CODE_DIM,
                 hidden: Sequence[int] = SMALL_HIDDEN, xyz_freqs: int = XYZ_FREQUENCIES,
                 use_delta: bool = True, use_gaussian: bool = True):
        super().__init__()
        self.bones = BoneSet(num_bones)
        self.xyz_freqs = xyz_freqs
        self.use_delta = use_delta
        self.use_gaussian = use_gaussian
        self.body_pose_mlp = Mlp(MlpSpec(code_dim, tuple(hidden), 6 * num_bones, 'softplus', 0),
                                 final_scale=SMALL_INIT)
        self.delta_skin = Mlp(MlpSpec(encoded_width(3, xyz_freqs) + code_dim, tuple(hidden),
                                      num_bones, 'softplus', 0), final_scale=SMALL_INIT)

    @property
    def num_bones(self) -> int:
        return self.bones.num_bones

    def body_pose(self, codes: torch.Tensor) -> torch.Tensor:
        """ω_b (…,C) -> J (…,B,3,4)"""
        vec = self.body_pose_mlp(codes).reshape(*codes.shape[:-1], self.num_bones, 6)
        return se3_from_vector(vec)

    def state(self, root: torch.Tensor, body_code: torch.Tensor, rest_code: torch.Tensor) -> FrameState:
        joints_t = self.body_pose(body_code)
        joints_rest = self.body_pose(rest_code)
        delta = rt_compose(joints_t, rt_inverse(joints_rest))
        centers, orient = self.bones.posed(joints_t)
        rest_centers, rest_orient = self.bones.posed(joints_rest)
        return FrameState(root, body_code, rest_code, delta, centers, orient,
                          rest_centers, rest_orient)

    def delta_logits(self, points: torch.Tensor, code: torch.Tensor) -> Optional[torch.Tensor]:
        if not self.use_delta:
            return None
        code = code.unsqueeze(-2).expand(*points.shape[:-1], code.shape[-1])
        return self.delta_skin(torch.cat([positional_encode(points, self.xyz_freqs), code], dim=-1))

    def weights(self, points: torch.Tensor, code: torch.Tensor,
                centers: torch.Tensor, orient: torch.Tensor) -> torch.Tensor:
        return skinning_weights(points, centers, orient, self.bones.precision,
                                self.delta_logits(points, code), self.use_gaussian)

    def backward_weights(self, points_root: torch.Tensor, state: FrameState) -> torch.Tensor:
        return self.weights(points_root, state.body_code, state.centers, state.orient)

    def forward_weights(self, points_canonical: torch.Tensor, state: FrameState) -> torch.Tensor:
        rest_code = state.rest_code.expand(*points_canonical.shape[:-2], state.rest_code.shape[-1])
        return self.weights(points_canonical, rest_code, state.rest_centers, state.rest_orient)

    def warp_backward(self, points: torch.Tensor, state: FrameState) -> torch.Tensor:
        """X^t (R,N,3) -> X* (R,N,3)"""
        points_root = rt_apply(rt_inverse(state.root).unsqueeze(-3), points)
        weights = self.backward_weights(points_root, state)
        blended = blend_transforms(weights, rt_inverse(state.delta))
        return rt_apply(blended, points_root)

    def warp_forward(self, points: torch.Tensor, state: FrameState) -> torch.Tensor:
        """X* (R,N,3) -> X^t (R,N,3)"""
        weights = self.forward_weights(points, state)
        blended = blend_transforms(weights, state.delta)
        return rt_apply(state.root.unsqueeze(-3), rt_apply(blended, points))


class FieldDeformation(nn.Module):
    """Per-point SE(3) or translation field, separate backward/forward networks"""

    def __init__(self, mode: DeformationMode, code_dim: int = BODY_CODE_DIM,
                 hidden: Sequence[int] = SMALL_HIDDEN, xyz_freqs: int = XYZ_FREQUENCIES):
        super().__init__()
        if mode == DeformationMode.SKINNING:
            raise ValidationError('deformation', mode, 'se3-field or translation-field')
        self.mode = mode
        self.xyz_freqs = xyz_freqs
        out = 6 if mode == DeformationMode.SE3_FIELD else 3
        width = encoded_width(3, xyz_freqs) + code_dim
        self.backward_field = Mlp(MlpSpec(width, tuple(hidden), out, 'softplus', 0), final_scale=SMALL_INIT)
        self.forward_field = Mlp(MlpSpec(width, tuple(hidden), out, 'softplus', 0), final_scale=SMALL_INIT)

    def state(self, root: torch.Tensor, body_code: torch.Tensor, rest_code: torch.Tensor) -> FrameState:
        return FrameState(root, body_code, rest_code)

    def _deform(self, field: Mlp, points: torch.Tensor, code: torch.Tensor) -> torch.Tensor:
        code = code.unsqueeze(-2).expand(*points.shape[:-1], code.shape[-1])
        out = field(torch.cat([positional_encode(points, self.xyz_freqs), code], dim=-1))
        if self.mode == DeformationMode.SE3_FIELD:
            return rt_apply(se3_from_vector(out), points)
        return points + out

    def warp_backward(self, points: torch.Tensor, state: FrameState) -> torch.Tensor:
        points_root = rt_apply(rt_inverse(state.root).unsqueeze(-3), points)
        return self._deform(self.backward_field, points_root, state.body_code)

    def warp_forward(self, points: torch.Tensor, state: FrameState) -> torch.Tensor:
        deformed = self._deform(self.forward_field, points, state.body_code)
        return rt_apply(state.root.unsqueeze(-3), deformed)


def build_deformation(mode: DeformationMode, num_bones: int = NUM_BONES,
                      code_dim: int = BODY_CODE_DIM, hidden: Sequence[int] = SMALL_HIDDEN,
                      xyz_freqs: int = XYZ_FREQUENCIES, use_delta: bool = True,
                      use_gaussian: bool = True) -> nn.Module:
    mode = DeformationMode(mode)
    if mode == DeformationMode.SKINNING:
        return SkinningDeformation(num_bones, code_dim, hidden, xyz_freqs, use_delta, use_gaussian)
    return FieldDeformation(mode, code_dim, hidden, xyz_freqs)
