"""
Canonical Model
===============

Time-invariant fields over canonical 3D points:

- SDF (negative inside) with a radial skip term, so the zero level set starts
  as a sphere of radius ``SDF_INIT_RADIUS``.
- Density σ = Laplace-CDF(−sdf; scale β) ∈ [0, 1].
- Color from (X*, view direction, environment code), terminal sigmoid.
- Unit-norm 16-D canonical embedding ψ(X*).

Geometry, color and embedding are separate networks, so neither the view
direction nor the environment code can reach the SDF.
"""

import logging
import math
from typing import Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.core.constants import (
    BETA_INIT, DIR_FREQUENCIES, EMBEDDING_DIM, ENV_CODE_DIM, FIELD_HIDDEN,
    SDF_INIT_RADIUS, XYZ_FREQUENCIES,
)
from src.core.geometry import DTYPE
from src.ml_engine.nnet import Mlp, MlpSpec, encoded_width, positional_encode

logger = logging.getLogger(__name__)


def sdf_to_density(sdf: torch.Tensor, beta) -> torch.Tensor:
    """
    Laplace CDF of −sdf with scale β (mean 0)

    σ(0) = 0.5, σ → 1 deep inside, σ → 0 far outside.
    """
    beta = torch.as_tensor(beta, dtype=DTYPE)
    s = -sdf
    inside = 1.0 - 0.5 * torch.exp(-s.clamp(min=0.0) / beta)
    outside = 0.5 * torch.exp(s.clamp(max=0.0) / beta)
    return torch.where(s > 0, inside, outside)


def laplace_density(sdf: torch.Tensor, beta) -> torch.Tensor:
    """dσ/d(−sdf): Laplace pdf at −sdf"""
    beta = torch.as_tensor(beta, dtype=DTYPE)
    return torch.exp(-sdf.abs() / beta) / (2.0 * beta)


class SolidnessScale(nn.Module):
    """β > 0 stored as log β"""

    def __init__(self, beta: float = BETA_INIT):
        super().__init__()
        self.log_beta = nn.Parameter(torch.tensor(math.log(beta), dtype=DTYPE))

    @property
    def beta(self) -> torch.Tensor:
        return torch.exp(self.log_beta)

    def cap(self, max_beta: float):
        """β ← min(β, max_beta)"""
        with torch.no_grad():
            self.log_beta.clamp_(max=math.log(max_beta))


class SdfField(nn.Module):
    """sdf(X) = |X| + MLP_SDF(PE(X))"""

    def __init__(self, hidden: Sequence[int] = FIELD_HIDDEN, freqs: int = XYZ_FREQUENCIES,
                 init_radius: float = SDF_INIT_RADIUS):
        super().__init__()
        self.mlp = Mlp(MlpSpec(3, tuple(hidden), 1, 'softplus', freqs),
                       final_scale=1e-3, final_bias=-init_radius)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        return torch.linalg.norm(points, dim=-1) + self.mlp(points)[..., 0]


class ColorField(nn.Module):
    """c = sigmoid(MLP_c(PE(X*), PE(v), ω_e))"""

    def __init__(self, hidden: Sequence[int] = FIELD_HIDDEN, xyz_freqs: int = XYZ_FREQUENCIES,
                 dir_freqs: int = DIR_FREQUENCIES, env_dim: int = ENV_CODE_DIM):
        super().__init__()
        self.xyz_freqs = xyz_freqs
        self.dir_freqs = dir_freqs
        width = encoded_width(3, xyz_freqs) + encoded_width(3, dir_freqs) + env_dim
        self.mlp = Mlp(MlpSpec(width, tuple(hidden), 3, 'softplus', 0))

    def forward(self, points: torch.Tensor, view_dirs: torch.Tensor,
                env_code: torch.Tensor) -> torch.Tensor:
        env_code = env_code.expand(*points.shape[:-1], env_code.shape[-1])
        h = torch.cat([
            positional_encode(points, self.xyz_freqs),
            positional_encode(view_dirs, self.dir_freqs),
            env_code,
        ], dim=-1)
        return torch.sigmoid(self.mlp(h))


class EmbeddingField(nn.Module):
    """ψ = normalize(MLP_ψ(PE(X*)))"""

    def __init__(self, hidden: Sequence[int] = FIELD_HIDDEN, freqs: int = XYZ_FREQUENCIES,
                 dim: int = EMBEDDING_DIM):
        super().__init__()
        self.mlp = Mlp(MlpSpec(3, tuple(hidden), dim, 'softplus', freqs))

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        return F.normalize(self.mlp(points), dim=-1, eps=1e-12)


class CanonicalModel(nn.Module):
    """Bundle of the canonical fields plus β"""

    def __init__(self, hidden: Sequence[int] = FIELD_HIDDEN, xyz_freqs: int = XYZ_FREQUENCIES,
                 dir_freqs: int = DIR_FREQUENCIES, env_dim: int = ENV_CODE_DIM,
                 embedding_dim: int = EMBEDDING_DIM, beta: float = BETA_INIT):
        super().__init__()
        self.sdf = SdfField(hidden, xyz_freqs)
        self.color = ColorField(hidden, xyz_freqs, dir_freqs, env_dim)
        self.embedding = EmbeddingField(hidden, xyz_freqs, embedding_dim)
        self.solidness = SolidnessScale(beta)

    @property
    def beta(self) -> torch.Tensor:
        return self.solidness.beta

    def eval_sdf(self, points: torch.Tensor) -> torch.Tensor:
        return self.sdf(points)

    def eval_density(self, points: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """(sdf, σ)"""
        sdf = self.sdf(points)
        return sdf, sdf_to_density(sdf, self.beta)

    def eval_color(self, points: torch.Tensor, view_dirs: torch.Tensor,
                   env_code: torch.Tensor) -> torch.Tensor:
        return self.color(points, view_dirs, env_code)

    def eval_embedding(self, points: torch.Tensor) -> torch.Tensor:
        return self.embedding(points)
