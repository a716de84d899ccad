"""
Animatable Model Builder - ML Engine Package
============================================

Provides the differentiable reconstruction pipeline:
- Coordinate networks, tape-based gradients, Adam (nnet)
- Canonical SDF / color / embedding fields (canonical)
- Root pose and neural blend skinning (warp)
- Volume rendering and flow (render)
- Canonical-embedding registration (embed)
- Losses and active pixel sampling (objective, uncertainty_estimator)
- Optimization driver and retargeting (fit)
- Surface extraction and Chamfer evaluation (mesh)
"""

from .nnet import MlpSpec, Mlp, ParamStore, adam_step, mlp_backward, mlp_forward, positional_encode
from .canonical import CanonicalModel, sdf_to_density
from .warp import BoneSet, FrameState, SkinningDeformation, build_deformation, skinning_weights
from .render import march_rays, near_far, render_flow, render_pixel, expected_canonical_point
from .embed import CanonicalGrid, match_soft_argmax, refresh_grid, update_bounds_from_surface
from .objective import LossReport, SampleSet, sample_pixels
from .model import ArticulatedModel, ModelConfig
from .fit import FitConfig, FitState, fit, iteration_budget, init_root_poses, retarget
from .mesh import chamfer, marching_cubes, pose_mesh

__all__ = [
    'MlpSpec', 'Mlp', 'ParamStore', 'adam_step', 'mlp_forward', 'mlp_backward', 'positional_encode',
    'CanonicalModel', 'sdf_to_density',
    'BoneSet', 'FrameState', 'SkinningDeformation', 'build_deformation', 'skinning_weights',
    'march_rays', 'near_far', 'render_flow', 'render_pixel', 'expected_canonical_point',
    'CanonicalGrid', 'match_soft_argmax', 'refresh_grid', 'update_bounds_from_surface',
    'LossReport', 'SampleSet', 'sample_pixels',
    'ArticulatedModel', 'ModelConfig',
    'FitConfig', 'FitState', 'fit', 'iteration_budget', 'init_root_poses', 'retarget',
    'chamfer', 'marching_cubes', 'pose_mesh',
]
