"""
Volume Rendering
================

Rays are marched in camera space, each sample is pulled back to canonical
space by the backward warp and shaded there.

    p_i = exp(−σ_i δ_i / β)            transmission of interval i
    τ_i = (Π_{j<i} p_j)(1 − p_i)         visibility weight
    o   = Σ τ_i                           opacity
    c   = Σ τ_i c_i + (1 − o)·background
    X*  = Σ τ_i X*_i                     expected canonical point (unnormalized)

σ ∈ [0,1] comes from the Laplace CDF; dividing by β makes surfaces opaque as
β → 0. δ_i is the gap to the next sample; the last sample reuses the previous gap.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import torch

from src.core.constants import MIN_NEAR_DEPTH, NEAR_FAR_MARGIN, OPACITY_THRESHOLD
from src.core.geometry import DTYPE, project_pinhole, rt_apply
from src.utils.exceptions import DegenerateDepths, InvalidNearFar, LowOpacity, NonPositiveDepth

logger = logging.getLogger(__name__)

WarpFn = Callable[[torch.Tensor], torch.Tensor]
DensityFn = Callable[[torch.Tensor], Tuple[torch.Tensor, torch.Tensor]]
ColorFn = Callable[[torch.Tensor], torch.Tensor]


@dataclass
class RaySampleBatch:
    """Per-ray samples; R rays × N samples"""
    depths: torch.Tensor        # (R,N)
    deltas: torch.Tensor        # (R,N)
    points: torch.Tensor        # (R,N,3) X^t, camera space
    canonical: torch.Tensor     # (R,N,3) X*
    sdf: torch.Tensor           # (R,N)
    sigma: torch.Tensor         # (R,N)
    transmission: torch.Tensor  # (R,N) p_i
    weights: torch.Tensor       # (R,N) τ_i
    color: Optional[torch.Tensor] = None  # (R,N,3)

    @property
    def opacity(self) -> torch.Tensor:
        return self.weights.sum(dim=-1)

    @property
    def residual(self) -> torch.Tensor:
        """Π_i p_i; opacity + residual = 1"""
        return torch.prod(self.transmission, dim=-1)


def sample_depths(near: torch.Tensor, far: torch.Tensor, num_samples: int,
                  generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """
    d_i = near + (i + u_i)/N · (far − near)

    u_i ~ U[0,1) when a generator is given (training), 0.5 otherwise.
    """
    near = torch.as_tensor(near, dtype=DTYPE)
    far = torch.as_tensor(far, dtype=DTYPE)
    if num_samples < 2:
        raise InvalidNearFar(float(near.min()), float(far.max()), num_samples)
    near, far = torch.broadcast_tensors(near, far)
    bad = (far <= near).reshape(-1)
    if bool(bad.any()):
        i = int(torch.nonzero(bad)[0, 0])
        raise InvalidNearFar(float(near.reshape(-1)[i]), float(far.reshape(-1)[i]), num_samples)

    shape = (*near.shape, num_samples)
    if generator is None:
        u = torch.full(shape, 0.5, dtype=DTYPE)
    else:
        u = torch.rand(shape, generator=generator, dtype=DTYPE)
    steps = (torch.arange(num_samples, dtype=DTYPE) + u) / num_samples
    return near[..., None] + steps * (far - near)[..., None]


def interval_lengths(depths: torch.Tensor) -> torch.Tensor:
    gaps = depths[..., 1:] - depths[..., :-1]
    return torch.cat([gaps, gaps[..., -1:]], dim=-1)


def composite_weights(sigma: torch.Tensor, deltas: torch.Tensor,
                      beta) -> Tuple[torch.Tensor, torch.Tensor]:
    """(τ, p) from densities and interval lengths"""
    transmission = torch.exp(-sigma * deltas / beta)
    shifted = torch.cat([torch.ones_like(transmission[..., :1]), transmission[..., :-1]], dim=-1)
    visible = torch.cumprod(shifted, dim=-1)
    return visible * (1.0 - transmission), transmission


def march_rays(origins: torch.Tensor, directions: torch.Tensor,
               near: torch.Tensor, far: torch.Tensor, num_samples: int,
               warp_backward: WarpFn, density_fn: DensityFn, beta,
               color_fn: Optional[ColorFn] = None,
               generator: Optional[torch.Generator] = None) -> RaySampleBatch:
    """
    Sample, warp to canonical space, evaluate density (and color), composite.

    Args:
        origins, directions: (R,3) camera-space rays
        near, far: (R,) depth range along the ray
        warp_backward: (R,N,3) camera points -> canonical points
        density_fn: canonical points -> (sdf, σ)
        color_fn: canonical points -> RGB, skipped when None
    """
    depths = sample_depths(near, far, num_samples, generator)
    deltas = interval_lengths(depths)
    points = origins[:, None, :] + depths[..., None] * directions[:, None, :]
    canonical = warp_backward(points)
    sdf, sigma = density_fn(canonical)
    weights, transmission = composite_weights(sigma, deltas, beta)
    color = color_fn(canonical) if color_fn is not None else None
    return RaySampleBatch(depths, deltas, points, canonical, sdf, sigma, transmission, weights, color)


def render_pixel(batch: RaySampleBatch,
                 background: Sequence[float] = (0.0, 0.0, 0.0)) -> Tuple[torch.Tensor, torch.Tensor]:
    """(color (R,3), opacity (R,)) composited over a solid background"""
    opacity = batch.opacity
    bg = torch.as_tensor(background, dtype=DTYPE)
    color = (batch.weights[..., None] * batch.color).sum(dim=-2) + (1.0 - opacity)[..., None] * bg
    return color, opacity


def expected_depth(batch: RaySampleBatch) -> torch.Tensor:
    """Σ τ_i d_i / Σ τ_i"""
    return (batch.weights * batch.depths).sum(dim=-1) / batch.opacity.clamp(min=1e-12)


def expected_canonical_point(batch: RaySampleBatch, threshold: float = OPACITY_THRESHOLD,
                             strict: bool = False) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    X*(x) = Σ τ_i X*_i

    Returns:
        (points (R,3), valid (R,): opacity > threshold)

    Raises:
        LowOpacity: strict mode and some ray is below the threshold
    """
    opacity = batch.opacity
    valid = opacity > threshold
    if strict and not bool(valid.all()):
        raise LowOpacity(float(opacity[~valid].min()), threshold)
    return (batch.weights[..., None] * batch.canonical).sum(dim=-2), valid


def render_flow(canonical_points: torch.Tensor, source_pixels: torch.Tensor,
                warp_forward_target: WarpFn, focal: torch.Tensor,
                principal: torch.Tensor, strict: bool = False) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    F(x^t, t→t′) = Π^{t′}(W^{t′,→}(X*(x^t))) − x^t

    Args:
        canonical_points: (R,3) expected canonical points at t
        source_pixels: (R,2) x^t
        warp_forward_target: (R,1,3) canonical -> camera space at t′
        focal, principal: (R,2) or (2,) intrinsics at t′

    Returns:
        (flow (R,2), valid (R,): positive depth at t′)
    """
    target = warp_forward_target(canonical_points[:, None, :])[:, 0, :]
    uv, valid = project_pinhole(target, focal, principal)
    if strict and not bool(valid.all()):
        raise NonPositiveDepth(float(target[~valid][:, 2].min()))
    return uv - source_pixels, valid


def bbox_corners(bounds: torch.Tensor) -> torch.Tensor:
    """(3,2) [[min,max]…] -> (8,3)"""
    bounds = torch.as_tensor(bounds, dtype=DTYPE)
    idx = torch.cartesian_prod(*(torch.arange(2) for _ in range(3)))
    return torch.stack([bounds[axis, idx[:, axis]] for axis in range(3)], dim=-1)


def near_far(root: torch.Tensor, bounds: torch.Tensor,
             margin: float = NEAR_FAR_MARGIN) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Near/far depths from the canonical bbox corners rigidly posed by G^t

        d_n = min d − ε, d_f = max d + ε, ε = margin·(max d − min d)

    Args:
        root: (R,3,4) or (3,4) G^t
        bounds: (3,2) canonical bounds

    Raises:
        DegenerateDepths: max d = min d
        NonPositiveDepth: the whole box is behind the camera
    """
    with torch.no_grad():
        corners = bbox_corners(bounds)
        depth = rt_apply(root.detach().unsqueeze(-3), corners)[..., 2]
        lo = depth.min(dim=-1).values
        hi = depth.max(dim=-1).values
        flat = hi <= lo
        if bool(flat.any()):
            raise DegenerateDepths(float(lo[flat].reshape(-1)[0]))
        eps = margin * (hi - lo)
        near, far = lo - eps, hi + eps
        if bool((far <= 0).any()):
            raise NonPositiveDepth(float(far.min()))
        return near.clamp(min=MIN_NEAR_DEPTH), far
