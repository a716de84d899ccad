"""
Pixel–Canonical Registration
============================

- ``CanonicalGrid``: G×G×G lattice over canonical bounds with cached ψ values.
- ``match_soft_argmax``: expected lattice point under softmax(α_s · cos).
- ``PixelEmbeddings``: learnable per-frame 16-D feature images, unit-norm per
  pixel, zero on background.
"""

import logging
import math
from typing import Callable, Hashable, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.core.constants import ALPHA_S_INIT, EMBEDDING_DIM, GRID_SIZE
from src.core.geometry import DTYPE
from src.utils.exceptions import EmptySurface, InvalidBounds, SizeMismatch
from src.utils.validators import validate_bounds

logger = logging.getLogger(__name__)


def _as_bounds(bounds) -> torch.Tensor:
    arr = np.asarray(bounds, dtype=np.float64)
    if arr.shape == (6,):
        arr = np.stack([arr[:3], arr[3:]], axis=-1)
    if arr.shape != (3, 2) or not validate_bounds(arr)[0]:
        raise InvalidBounds(arr.tolist())
    return torch.from_numpy(arr.copy())


class CanonicalGrid:
    """
    Regular lattice including both endpoints per axis

    Embeddings are cached against a caller-provided key (e.g. the optimizer
    step); a different key or new bounds forces recomputation.
    """

    def __init__(self, bounds, size: int = GRID_SIZE):
        if size < 2:
            raise InvalidBounds(f"grid size {size}")
        self.bounds = _as_bounds(bounds)
        self.size = size
        axes = [torch.linspace(float(lo), float(hi), size, dtype=DTYPE) for lo, hi in self.bounds]
        mesh = torch.meshgrid(*axes, indexing='ij')
        self.points = torch.stack(mesh, dim=-1).reshape(-1, 3)
        self._embeddings: Optional[torch.Tensor] = None
        self._cache_key: Optional[Hashable] = None

    @property
    def spacing(self) -> torch.Tensor:
        return (self.bounds[:, 1] - self.bounds[:, 0]) / (self.size - 1)

    def embeddings(self, embed_fn: Callable[[torch.Tensor], torch.Tensor],
                   key: Hashable = None) -> torch.Tensor:
        if self._embeddings is None or key is None or key != self._cache_key:
            self._embeddings = embed_fn(self.points)
            self._cache_key = key
        return self._embeddings

    def invalidate(self):
        self._embeddings = None
        self._cache_key = None


def refresh_grid(bounds, size: int = GRID_SIZE,
                 embed_fn: Optional[Callable[[torch.Tensor], torch.Tensor]] = None) -> CanonicalGrid:
    """New lattice over ``bounds``; embeddings computed eagerly when ``embed_fn`` is given"""
    grid = CanonicalGrid(bounds, size)
    if embed_fn is not None:
        with torch.no_grad():
            grid.embeddings(embed_fn, key=('refresh', tuple(grid.bounds.reshape(-1).tolist())))
    logger.debug(f"Kanonik ızgara yenilendi: {grid.bounds.tolist()} ({size}^3)")
    return grid


def match_soft_argmax(pixel_features: torch.Tensor, grid_points: torch.Tensor,
                      grid_embeddings: torch.Tensor, alpha) -> torch.Tensor:
    """
    X̂* = Σ_X softmax_X(α · ⟨ψ_pix, ψ(X)⟩) · X with cosine similarity

    Args:
        pixel_features: (R,16)
        grid_points: (M,3)
        grid_embeddings: (M,16)
        alpha: temperature α_s (scalar or 0-d tensor)
    """
    query = F.normalize(pixel_features, dim=-1, eps=1e-12)
    keys = F.normalize(grid_embeddings, dim=-1, eps=1e-12)
    scores = torch.as_tensor(alpha, dtype=DTYPE) * (query @ keys.T)
    return torch.softmax(scores, dim=-1) @ grid_points


def update_bounds_from_surface(vertices) -> torch.Tensor:
    """
    Axis-aligned min/max of surface vertices, (3,2)

    Raises:
        EmptySurface: no vertices or a collapsed axis
    """
    verts = torch.as_tensor(np.asarray(vertices, dtype=np.float64))
    if verts.numel() == 0:
        raise EmptySurface("köşe yok")
    verts = verts.reshape(-1, 3)
    lo = verts.min(dim=0).values
    hi = verts.max(dim=0).values
    if bool((hi <= lo).any()):
        raise EmptySurface("dejenere sınırlar")
    return torch.stack([lo, hi], dim=-1)


class MatchTemperature(nn.Module):
    """α_s > 0 stored as log"""

    def __init__(self, alpha: float = ALPHA_S_INIT):
        super().__init__()
        self.log_alpha = nn.Parameter(torch.tensor(math.log(alpha), dtype=DTYPE))

    @property
    def alpha(self) -> torch.Tensor:
        return torch.exp(self.log_alpha)


class PixelEmbeddings(nn.Module):
    """Learnable (T,H,W,16) feature images"""

    def __init__(self, num_frames: int, height: int, width: int, dim: int = EMBEDDING_DIM):
        super().__init__()
        self.features = nn.Parameter(torch.zeros(num_frames, height, width, dim, dtype=DTYPE))
        self.register_buffer('foreground', torch.zeros(num_frames, height, width, dtype=torch.bool))

    @property
    def shape(self) -> Tuple[int, int, int]:
        t, h, w, _ = self.features.shape
        return t, h, w

    def lookup(self, frames, rows, cols) -> Tuple[torch.Tensor, torch.Tensor]:
        """(features (R,16), foreground (R,))"""
        frames, rows, cols = (torch.as_tensor(a, dtype=torch.long) for a in (frames, rows, cols))
        return self.features[frames, rows, cols], self.foreground[frames, rows, cols]

    def renormalize(self):
        """Unit-normalize foreground pixels, zero background"""
        with torch.no_grad():
            normed = F.normalize(self.features, dim=-1, eps=1e-12)
            self.features.copy_(torch.where(self.foreground[..., None], normed, torch.zeros_like(normed)))


def init_pixel_embeddings(features: Sequence[np.ndarray], height: int, width: int,
                          dim: int = EMBEDDING_DIM) -> PixelEmbeddings:
    """
    Copy oracle feature images (H,W,16) into a learnable ``PixelEmbeddings``.

    Zero-vector pixels stay zero and are excluded from matching.

    Raises:
        SizeMismatch: a feature image does not match (H, W, dim)
    """
    module = PixelEmbeddings(len(features), height, width, dim)
    with torch.no_grad():
        for t, image in enumerate(features):
            image = np.asarray(image, dtype=np.float64)
            if image.shape != (height, width, dim):
                raise SizeMismatch((height, width, dim), tuple(image.shape))
            tensor = torch.from_numpy(image.copy())
            norm = torch.linalg.norm(tensor, dim=-1)
            module.foreground[t] = norm > 0
            module.features[t] = tensor / norm.clamp(min=1e-300)[..., None]
    return module
