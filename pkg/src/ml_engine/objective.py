"""
Optimization Objective
======================

Reconstruction (rgb, sil, flow), feature registration (match, 2D cycle),
3D cycle consistency and the uncertainty loss, plus the pixel sampler.

All terms are means over the contributing samples. Flow and 2D-cycle residuals
take a ``pixel_scale`` so they can be measured in normalized image units.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch

from src.core.constants import (
    ACTIVE_CANDIDATES, ACTIVE_PIXELS, DEFAULT_LOSS_WEIGHTS, FLOW_OFFSETS,
    LOSS_TERMS, PIXELS_PER_BATCH,
)
from src.core.geometry import DTYPE
from src.ml_engine.uncertainty_estimator import loss_uncertainty
from src.utils.exceptions import ValidationError

logger = logging.getLogger(__name__)


# =============================================================================
# Loss terms
# =============================================================================

def _masked_mean(values: torch.Tensor, mask: Optional[torch.Tensor]) -> Tuple[torch.Tensor, int]:
    """Vacuous mean is 0"""
    if mask is None:
        mask = torch.ones_like(values, dtype=torch.bool)
    count = int(mask.sum())
    if count == 0:
        return values.sum() * 0.0, 0
    return values[mask].mean(), count


def rgb_errors(color: torch.Tensor, observed: torch.Tensor) -> torch.Tensor:
    """Per-sample squared L2 color residual, (R,)"""
    return ((color - observed) ** 2).sum(dim=-1)


def loss_rgb_sil(color: torch.Tensor, opacity: torch.Tensor,
                 observed_rgb: torch.Tensor, observed_sil: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    (L_rgb, L_sil): mean squared color residual and mean squared (o − ŝ)
    """
    if color.shape[0] == 0:
        raise ValidationError('samples', 0, 'en az bir örnek')
    return rgb_errors(color, observed_rgb).mean(), ((opacity - observed_sil) ** 2).mean()


def loss_flow(flow: torch.Tensor, observed: torch.Tensor, valid: Optional[torch.Tensor] = None,
              pixel_scale: float = 1.0) -> Tuple[torch.Tensor, int]:
    """Mean squared flow residual over valid samples; (loss, valid count)"""
    residual = (((flow - observed) * pixel_scale) ** 2).sum(dim=-1)
    return _masked_mean(residual, valid)


def loss_match(warped: torch.Tensor, matched: torch.Tensor,
               valid: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Mean squared L2 between expected canonical points and soft-argmax matches"""
    return _masked_mean(((warped - matched) ** 2).sum(dim=-1), valid)[0]


def loss_2d_cyc(reprojected: torch.Tensor, source_pixels: torch.Tensor,
                valid: Optional[torch.Tensor] = None,
                pixel_scale: float = 1.0) -> Tuple[torch.Tensor, int]:
    """
    Mean squared pixel distance between Π(W→(X̂*)) and the source pixel.

    Returns:
        (loss, skipped count); samples with invalid projection are skipped
    """
    residual = (((reprojected - source_pixels) * pixel_scale) ** 2).sum(dim=-1)
    loss, count = _masked_mean(residual, valid)
    return loss, residual.shape[0] - count


def loss_3d_cyc(points: torch.Tensor, cycled: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """
    Σ τ_i ‖W→(W←(X_i)) − X_i‖² / Σ τ_i with τ detached
    """
    w = weights.detach()
    total = w.sum()
    residual = ((cycled - points) ** 2).sum(dim=-1)
    if float(total) <= 0.0:
        return (residual * w).sum()
    return (residual * w).sum() / total


# =============================================================================
# Report
# =============================================================================

@dataclass
class LossReport:
    """Per-term losses, their weights and the weighted total"""
    terms: Dict[str, torch.Tensor]
    weights: Dict[str, float]
    counts: Dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> torch.Tensor:
        total = None
        for name, value in self.terms.items():
            w = self.weights.get(name, 0.0)
            if w == 0.0:
                continue
            total = w * value if total is None else total + w * value
        if total is None:
            return torch.zeros((), dtype=DTYPE)
        return total

    def as_floats(self) -> Dict[str, float]:
        out = {name: float(self.terms[name].detach()) if name in self.terms else 0.0
               for name in LOSS_TERMS}
        out['total'] = float(self.total.detach())
        return out

    def is_finite(self) -> bool:
        return all(bool(torch.isfinite(v).all()) for v in self.terms.values()) and \
            bool(torch.isfinite(self.total))


def loss_weights(overrides: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
    weights = dict(DEFAULT_LOSS_WEIGHTS)
    for key, value in (overrides or {}).items():
        if key not in weights:
            raise ValidationError('loss_weight', key, f"one of {LOSS_TERMS}")
        weights[key] = float(value)
    return weights


# =============================================================================
# Pixel sampling
# =============================================================================

@dataclass
class FrameIndex:
    """Global frame numbering across videos"""
    video: np.ndarray        # (T,) video id of each global frame
    local: np.ndarray        # (T,) frame number inside its video
    video_start: np.ndarray  # (V,) first global frame of each video
    video_length: np.ndarray # (V,)
    height: int
    width: int

    @classmethod
    def from_lengths(cls, lengths: Sequence[int], height: int, width: int) -> 'FrameIndex':
        lengths = np.asarray(lengths, dtype=np.int64)
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)
        video = np.repeat(np.arange(len(lengths)), lengths)
        local = np.concatenate([np.arange(n) for n in lengths]).astype(np.int64)
        return cls(video, local, starts, lengths, height, width)

    @property
    def num_frames(self) -> int:
        return int(self.video.shape[0])

    def frames_of(self, videos: Sequence[int]) -> np.ndarray:
        return np.concatenate([self.video_start[v] + np.arange(self.video_length[v]) for v in videos])


@dataclass
class SampleSet:
    """
    Sampled pixels (global frame, row, column) with flow targets

    ``flow_offset`` is the signed offset k with t′ = t + k inside the same video.
    """
    frame: np.ndarray
    row: np.ndarray
    col: np.ndarray
    active: np.ndarray
    flow_offset: np.ndarray

    def __len__(self) -> int:
        return int(self.frame.shape[0])

    @property
    def flow_target(self) -> np.ndarray:
        return self.frame + self.flow_offset

    @property
    def num_active(self) -> int:
        return int(self.active.sum())

    def pixel_centers(self) -> torch.Tensor:
        """(R,2) image coordinates (x, y)"""
        return torch.stack([torch.as_tensor(self.col, dtype=DTYPE) + 0.5,
                            torch.as_tensor(self.row, dtype=DTYPE) + 0.5], dim=-1)


def choose_flow_offsets(index: FrameIndex, frames: np.ndarray, rng: np.random.Generator,
                        offsets: Sequence[int] = FLOW_OFFSETS) -> np.ndarray:
    """Signed k ∈ {±1, ±2} with t + k inside the same video"""
    offsets = np.asarray(offsets, dtype=np.int64)
    local = index.local[frames]
    length = index.video_length[index.video[frames]]

    k = offsets[rng.integers(0, len(offsets), size=len(frames))]
    sign = np.where(rng.random(len(frames)) < 0.5, -1, 1)
    step = sign * k
    inside = lambda s: (local + s >= 0) & (local + s < length)
    step = np.where(inside(step), step, -step)
    fallback = np.where(local + 1 < length, 1, -1)
    step = np.where(inside(step), step, fallback)
    return step.astype(np.int64)


def _uniform(frame_pool: np.ndarray, index: FrameIndex, n: int, rng: np.random.Generator):
    frames = frame_pool[rng.integers(0, len(frame_pool), size=n)]
    rows = rng.integers(0, index.height, size=n)
    cols = rng.integers(0, index.width, size=n)
    return frames, rows, cols


def sample_pixels(index: FrameIndex, iteration: int, total_iters: int,
                  rng: np.random.Generator,
                  frame_pool: Optional[np.ndarray] = None,
                  num_uniform: int = PIXELS_PER_BATCH,
                  num_active: int = ACTIVE_PIXELS,
                  num_candidates: int = ACTIVE_CANDIDATES,
                  scorer: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None,
                  offsets: Sequence[int] = FLOW_OFFSETS) -> SampleSet:
    """
    N^p uniform pixels; from the second half of the budget on, additionally
    the N^a highest-scoring pixels among N^a′ uniform candidates.
    """
    if index.num_frames == 0:
        raise ValidationError('frames', 0, 'en az bir kare')
    pool = np.arange(index.num_frames) if frame_pool is None else np.asarray(frame_pool)

    frames, rows, cols = _uniform(pool, index, num_uniform, rng)
    active = np.zeros(num_uniform, dtype=bool)

    if scorer is not None and num_active > 0 and iteration >= total_iters / 2:
        c_frames, c_rows, c_cols = _uniform(pool, index, num_candidates, rng)
        scores = np.asarray(scorer(c_frames, c_rows, c_cols))
        top = np.argsort(-scores, kind='stable')[:min(num_active, num_candidates)]
        frames = np.concatenate([frames, c_frames[top]])
        rows = np.concatenate([rows, c_rows[top]])
        cols = np.concatenate([cols, c_cols[top]])
        active = np.concatenate([active, np.ones(len(top), dtype=bool)])

    offsets_out = choose_flow_offsets(index, frames, rng, offsets)
    return SampleSet(frames.astype(np.int64), rows.astype(np.int64), cols.astype(np.int64),
                     active, offsets_out)


__all__ = [
    'rgb_errors', 'loss_rgb_sil', 'loss_flow', 'loss_match', 'loss_2d_cyc', 'loss_3d_cyc',
    'loss_uncertainty', 'LossReport', 'loss_weights', 'FrameIndex', 'SampleSet',
    'sample_pixels', 'choose_flow_offsets',
]
