"""
Articulated Model
=================

One ``nn.Module`` holding every learnable quantity of a reconstruction:
canonical fields, deformation, root-pose network, latent codes, per-video
intrinsics, matching temperature, pixel embeddings and the uncertainty MLP.

Per-frame tensors are indexed by global frame number; per-video tensors by
video id.
"""

import logging
from dataclasses import asdict, dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn

from src.core.constants import (
    ALPHA_S_INIT, BETA_INIT, BODY_CODE_DIM, DIR_FREQUENCIES, EMBEDDING_DIM, ENV_CODE_DIM,
    NEAR_FAR_MARGIN, NUM_BONES, ROOT_CODE_DIM, SAMPLES_PER_RAY, UNCERTAINTY_HIDDEN,
    XYZ_FREQUENCIES, DeformationMode,
)
from src.core.geometry import DTYPE, rt_compose, rt_identity
from src.ml_engine.canonical import CanonicalModel
from src.ml_engine.embed import MatchTemperature, PixelEmbeddings, _as_bounds
from src.ml_engine.render import (
    RaySampleBatch, expected_canonical_point, march_rays, near_far, render_flow, render_pixel,
)
from src.ml_engine.uncertainty_estimator import UncertaintyEstimator
from src.ml_engine.warp import FrameState, RootPose, build_deformation
from src.utils.exceptions import SizeMismatch

logger = logging.getLogger(__name__)

# Çekim ve parametre grupları
CODE_PARAMS = ('root_codes', 'body_codes', 'rest_code', 'env_codes')
RETARGET_PARAMS = ('root_codes', 'body_codes', 'env_codes')
PER_FRAME_STATE = ('root_codes', 'body_codes', 'env_codes', 'root_init', 'log_focal', 'principal',
                   'video_of_frame', 'pixel_embeddings.features', 'pixel_embeddings.foreground')


@dataclass
class ModelConfig:
    """Network sizes and per-dataset counts"""
    num_frames: int
    num_videos: int
    height: int
    width: int
    focal: List[Tuple[float, float]]
    principal: List[Tuple[float, float]]
    video_of_frame: List[int]
    num_bones: int = NUM_BONES
    deformation: str = DeformationMode.SKINNING.value
    field_hidden: Tuple[int, ...] = (128,) * 5
    small_hidden: Tuple[int, ...] = (64, 64)
    uncertainty_hidden: Tuple[int, ...] = UNCERTAINTY_HIDDEN
    xyz_freqs: int = XYZ_FREQUENCIES
    dir_freqs: int = DIR_FREQUENCIES
    env_dim: int = ENV_CODE_DIM
    root_code_dim: int = ROOT_CODE_DIM
    body_code_dim: int = BODY_CODE_DIM
    embedding_dim: int = EMBEDDING_DIM
    use_delta: bool = True
    use_gaussian: bool = True
    beta: float = BETA_INIT
    alpha: float = ALPHA_S_INIT

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelConfig':
        data = dict(data)
        for key in ('field_hidden', 'small_hidden', 'uncertainty_hidden'):
            data[key] = tuple(data[key])
        data['focal'] = [tuple(f) for f in data['focal']]
        data['principal'] = [tuple(p) for p in data['principal']]
        return cls(**data)

    @classmethod
    def for_dataset(cls, dataset, **overrides) -> 'ModelConfig':
        """Counts, image size and intrinsics of a loaded ``Dataset``"""
        starts = dataset.index.video_start
        focal = [tuple(dataset.cameras[s, :2].tolist()) for s in starts]
        principal = [tuple(dataset.cameras[s, 2:4].tolist()) for s in starts]
        return cls(num_frames=dataset.num_frames, num_videos=dataset.num_videos,
                   height=dataset.height, width=dataset.width, focal=focal, principal=principal,
                   video_of_frame=dataset.index.video.tolist(), **overrides)


class ArticulatedModel(nn.Module):
    """Canonical model + deformation + codes for one dataset"""

    def __init__(self, config: ModelConfig, bounds=((-1.0, 1.0),) * 3):
        super().__init__()
        self.config = config
        c = config

        self.canonical = CanonicalModel(c.field_hidden, c.xyz_freqs, c.dir_freqs, c.env_dim,
                                        c.embedding_dim, c.beta)
        self.deformation = build_deformation(c.deformation, c.num_bones, c.body_code_dim,
                                             c.small_hidden, c.xyz_freqs, c.use_delta, c.use_gaussian)
        self.root_pose = RootPose(c.root_code_dim, c.small_hidden)

        self.root_codes = nn.Parameter(torch.zeros(c.num_frames, c.root_code_dim, dtype=DTYPE))
        self.body_codes = nn.Parameter(torch.zeros(c.num_frames, c.body_code_dim, dtype=DTYPE))
        self.rest_code = nn.Parameter(torch.zeros(c.body_code_dim, dtype=DTYPE))
        self.env_codes = nn.Parameter(torch.zeros(c.num_videos, c.env_dim, dtype=DTYPE))

        self.log_focal = nn.Parameter(torch.log(torch.tensor(c.focal, dtype=DTYPE)))
        self.register_buffer('principal', torch.tensor(c.principal, dtype=DTYPE))
        self.register_buffer('video_of_frame', torch.tensor(c.video_of_frame, dtype=torch.long))
        self.register_buffer('root_init', rt_identity(c.num_frames))
        self.register_buffer('bounds', _as_bounds(bounds))

        self.match_temperature = MatchTemperature(c.alpha)
        self.pixel_embeddings = PixelEmbeddings(c.num_frames, c.height, c.width, c.embedding_dim)
        self.uncertainty = UncertaintyEstimator(c.height, c.width, c.num_frames, c.uncertainty_hidden)

    # =========================================================================
    # Setup
    # =========================================================================

    def set_root_init(self, poses: torch.Tensor):
        poses = torch.as_tensor(poses, dtype=DTYPE)
        if poses.shape != self.root_init.shape:
            raise SizeMismatch(tuple(self.root_init.shape), tuple(poses.shape))
        with torch.no_grad():
            self.root_init.copy_(poses)

    def set_pixel_features(self, features: np.ndarray):
        """(T,H,W,16) oracle features; zero vectors mark background"""
        tensor = torch.as_tensor(np.asarray(features, dtype=np.float64))
        if tuple(tensor.shape) != tuple(self.pixel_embeddings.features.shape):
            raise SizeMismatch(tuple(self.pixel_embeddings.features.shape), tuple(tensor.shape))
        with torch.no_grad():
            norm = torch.linalg.norm(tensor, dim=-1)
            self.pixel_embeddings.foreground.copy_(norm > 0)
            self.pixel_embeddings.features.copy_(tensor / norm.clamp(min=1e-300)[..., None])

    def set_bounds(self, bounds):
        with torch.no_grad():
            self.bounds.copy_(_as_bounds(bounds))

    # =========================================================================
    # Per-frame quantities
    # =========================================================================

    @staticmethod
    def _frames(frames) -> torch.Tensor:
        return torch.as_tensor(np.asarray(frames), dtype=torch.long).reshape(-1)

    def roots(self, frames) -> torch.Tensor:
        """G^t for each frame, (R,3,4)"""
        frames = self._frames(frames)
        return self.root_pose(self.root_codes[frames], self.root_init[frames])

    def frame_state(self, frames, root_modifier: Optional[torch.Tensor] = None) -> FrameState:
        """
        Warp state for each entry of ``frames``; bone poses are decoded once per
        distinct frame.

        Args:
            root_modifier: (3,4) applied in canonical space before G^t
        """
        frames = self._frames(frames)
        unique, inverse = torch.unique(frames, return_inverse=True)
        root = self.roots(unique)
        if root_modifier is not None:
            root = rt_compose(root, torch.as_tensor(root_modifier, dtype=DTYPE).expand_as(root))
        state = self.deformation.state(root, self.body_codes[unique], self.rest_code)
        return state.select(inverse)

    def focal(self, frames) -> torch.Tensor:
        return torch.exp(self.log_focal[self.video_of_frame[self._frames(frames)]])

    def principal_point(self, frames) -> torch.Tensor:
        return self.principal[self.video_of_frame[self._frames(frames)]]

    def rays(self, frames, rows, cols) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(origins (R,3), unit directions (R,3), pixel centers (R,2)) in camera space"""
        frames = self._frames(frames)
        x = torch.as_tensor(np.asarray(cols), dtype=DTYPE).reshape(-1) + 0.5
        y = torch.as_tensor(np.asarray(rows), dtype=DTYPE).reshape(-1) + 0.5
        f = self.focal(frames)
        pp = self.principal_point(frames)
        d = torch.stack([(x - pp[:, 0]) / f[:, 0], (y - pp[:, 1]) / f[:, 1], torch.ones_like(x)], dim=-1)
        d = d / torch.linalg.norm(d, dim=-1, keepdim=True)
        return torch.zeros_like(d), d, torch.stack([x, y], dim=-1)

    # =========================================================================
    # Rendering
    # =========================================================================

    def warp_backward_fn(self, state: FrameState) -> Callable[[torch.Tensor], torch.Tensor]:
        return lambda points: self.deformation.warp_backward(points, state)

    def warp_forward_fn(self, state: FrameState) -> Callable[[torch.Tensor], torch.Tensor]:
        return lambda points: self.deformation.warp_forward(points, state)

    def render_rays(self, frames, rows, cols, num_samples: int = SAMPLES_PER_RAY,
                    generator: Optional[torch.Generator] = None, with_color: bool = True,
                    margin: float = NEAR_FAR_MARGIN,
                    root_modifier: Optional[torch.Tensor] = None) -> Tuple[FrameState, RaySampleBatch]:
        """March the pixel rays of ``(frames, rows, cols)`` through the model"""
        frames = self._frames(frames)
        state = self.frame_state(frames, root_modifier)
        origins, dirs, _ = self.rays(frames, rows, cols)
        near, far = near_far(state.root, self.bounds, margin)
        # Z derinliği -> birim ışın boyunca mesafe
        far = far / dirs[:, 2]

        color_fn = None
        if with_color:
            # görüş yönü kök (kanonik) çerçevede
            view = (state.root[:, :3, :3].transpose(-1, -2) @ dirs[..., None])[..., 0]
            env = self.env_codes[self.video_of_frame[frames]][:, None, :]

            def color_fn(canonical: torch.Tensor) -> torch.Tensor:
                return self.canonical.eval_color(canonical, view[:, None, :].expand_as(canonical), env)

        batch = march_rays(origins, dirs, near, far, num_samples, self.warp_backward_fn(state),
                           self.canonical.eval_density, self.canonical.beta, color_fn, generator)
        return state, batch

    def render_image(self, frame: int, num_samples: int = SAMPLES_PER_RAY, chunk: int = 4096,
                     background: Sequence[float] = (0.0, 0.0, 0.0),
                     root_modifier: Optional[torch.Tensor] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Full-frame render, (rgb (H,W,3), opacity (H,W)), without gradients"""
        h, w = self.config.height, self.config.width
        rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing='ij')
        rows, cols = rows.reshape(-1), cols.reshape(-1)
        rgb = np.zeros((h * w, 3))
        opacity = np.zeros(h * w)
        with torch.no_grad():
            for start in range(0, h * w, chunk):
                sl = slice(start, start + chunk)
                frames = np.full(len(rows[sl]), frame)
                _, batch = self.render_rays(frames, rows[sl], cols[sl], num_samples,
                                            root_modifier=root_modifier)
                color, opa = render_pixel(batch, background)
                rgb[sl] = color.numpy()
                opacity[sl] = opa.numpy()
        return rgb.reshape(h, w, 3), opacity.reshape(h, w)

    def flow_neighbor(self, frame: int) -> Optional[int]:
        """Next frame of the same video, the previous one at the end, None for a single-frame video"""
        video = int(self.video_of_frame[frame])
        for candidate in (frame + 1, frame - 1):
            if 0 <= candidate < self.config.num_frames and int(self.video_of_frame[candidate]) == video:
                return candidate
        return None

    def render_flow_image(self, frame: int, target: int, num_samples: int = SAMPLES_PER_RAY,
                          chunk: int = 4096, root_modifier: Optional[torch.Tensor] = None) -> np.ndarray:
        """
        F(x, frame→target) for every pixel, (H, W, 2)

        Pixels below the opacity threshold or behind the target camera get zero flow.
        """
        h, w = self.config.height, self.config.width
        rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing='ij')
        rows, cols = rows.reshape(-1), cols.reshape(-1)
        flow = np.zeros((h * w, 2))
        with torch.no_grad():
            for start in range(0, h * w, chunk):
                sl = slice(start, start + chunk)
                count = len(rows[sl])
                _, batch = self.render_rays(np.full(count, frame), rows[sl], cols[sl], num_samples,
                                            with_color=False, root_modifier=root_modifier)
                x_star, opaque = expected_canonical_point(batch)
                targets = np.full(count, target)
                target_state = self.frame_state(targets, root_modifier)
                _, _, source = self.rays(np.full(count, frame), rows[sl], cols[sl])
                values, in_front = render_flow(x_star, source, self.warp_forward_fn(target_state),
                                               self.focal(targets), self.principal_point(targets))
                flow[sl] = torch.where((opaque & in_front)[:, None], values, torch.zeros_like(values)).numpy()
        return flow.reshape(h, w, 2)

    def uncertainty_image(self, frame: int) -> np.ndarray:
        """Predicted color error of MLP_U, (H, W)"""
        h, w = self.config.height, self.config.width
        rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing='ij')
        scores = self.uncertainty.score(np.full(h * w, frame), rows.reshape(-1), cols.reshape(-1))
        return scores.reshape(h, w)

    # =========================================================================
    # Parameter bookkeeping
    # =========================================================================

    @staticmethod
    def param_group(name: str) -> str:
        """Optimizer group of a parameter name: code | bone | pixel | mlp"""
        if name in CODE_PARAMS:
            return 'code'
        if name.startswith('deformation.bones.'):
            return 'bone'
        if name.startswith('pixel_embeddings.'):
            return 'pixel'
        return 'mlp'

    def shared_state(self) -> Dict[str, torch.Tensor]:
        """Every tensor that is not tied to the frames/videos of one dataset"""
        return {k: v for k, v in self.state_dict().items() if k not in PER_FRAME_STATE}

    def transfer_to(self, config: ModelConfig) -> 'ArticulatedModel':
        """
        New model for another frame set that shares this model's networks,
        bones, rest code, β, α_s and canonical bounds.
        """
        if replace(config, num_frames=self.config.num_frames, num_videos=self.config.num_videos,
                   height=self.config.height, width=self.config.width, focal=self.config.focal,
                   principal=self.config.principal, video_of_frame=self.config.video_of_frame) != self.config:
            raise SizeMismatch(self.config.to_dict(), config.to_dict())
        model = ArticulatedModel(config, self.bounds.tolist())
        missing, unexpected = model.load_state_dict(self.shared_state(), strict=False)
        if unexpected or set(missing) - set(PER_FRAME_STATE):
            raise SizeMismatch(sorted(PER_FRAME_STATE), sorted(missing))
        return model

    def bone_lines(self, frame: Optional[int] = None) -> List[str]:
        """Bones posed at ``frame`` (rest pose when None), one text line per bone"""
        if not hasattr(self.deformation, 'bones'):
            return []
        with torch.no_grad():
            code = self.rest_code if frame is None else self.body_codes[int(frame)]
            return self.deformation.bones.export_lines(self.deformation.body_pose(code))

    def count_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())
