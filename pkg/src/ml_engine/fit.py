"""
Optimization Driver
===================

Pixel sampling → near/far → ray marching → losses → backward → Adam, with
warm-up, cosine learning-rate decay, β annealing, periodic canonical-bound and
grid refresh, metrics logging, checkpoints and previews.

``retarget`` reuses the loop on a new sequence with every shared tensor frozen,
so only the per-frame root/body codes and per-video environment codes move.
"""

import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np
import torch

from src.core.constants import (
    ACTIVE_CANDIDATES, ACTIVE_PIXELS, ALPHA_S_INIT, BETA_FINAL, BETA_INIT,
    BOUNDS_MC_RESOLUTION, BOUNDS_REFRESH_EVERY, BUDGET_FLOOR, DEFAULT_LOSS_WEIGHTS, DEFAULT_SEED,
    GRID_SIZE, LR_DECAY_FLOOR, NEAR_FAR_MARGIN, NUM_BONES, OPACITY_THRESHOLD, PIXELS_PER_BATCH,
    ROOT_INIT_TRANSLATION, SAMPLES_PER_RAY, WARMUP_FRACTION, Ablation, DeformationMode, RootInitMode,
)
from src.core.geometry import DTYPE, geodesic_distance, project_pinhole, rodrigues, rt_matrix
from src.ml_engine.embed import CanonicalGrid, match_soft_argmax, refresh_grid, update_bounds_from_surface
from src.ml_engine.mesh import marching_cubes
from src.ml_engine.model import RETARGET_PARAMS, ArticulatedModel, ModelConfig
from src.ml_engine.nnet import ParamStore, adam_step, cosine_lr_scale
from src.ml_engine.objective import (
    LossReport, SampleSet, loss_2d_cyc, loss_3d_cyc, loss_flow, loss_match,
    loss_rgb_sil, loss_uncertainty, rgb_errors, sample_pixels,
)
from src.ml_engine.render import expected_canonical_point, render_flow, render_pixel
from src.utils.exceptions import (
    ConfigurationError, DivergedLoss, EmptySurface, NumericalError, ValidationError,
)
from src.utils.logging_utils import MetricsLogger
from src.utils.validators import validate_video_selection

logger = logging.getLogger(__name__)

BOUNDS_PADDING = 0.2
REGISTRATION_TERMS = ('match', 'cyc2d')
WARMUP_TERMS = ('rgb', 'sil', 'flow')

__all__ = [
    'FitConfig', 'FitState', 'iteration_budget', 'init_root_poses', 'geodesic_distance',
    'prepare_state', 'restore_state', 'load_model', 'fit', 'retarget', 'compute_losses', 'shared_checksums',
]


# =============================================================================
# Configuration
# =============================================================================

@dataclass(frozen=True)
class FitConfig:
    """
    Every knob of one optimization run

    ``iterations`` None means the automatic budget. Ablation flags are
    independent of each other.
    """
    iterations: Optional[int] = None
    iteration_floor: int = BUDGET_FLOOR
    pixels_per_batch: int = PIXELS_PER_BATCH
    active_pixels: int = ACTIVE_PIXELS
    active_candidates: int = ACTIVE_CANDIDATES
    lr_mlp: float = 5e-4
    lr_code: float = 5e-3
    lr_bone: float = 5e-3
    lr_pixel_embedding: float = 5e-4
    lr_decay_floor: float = LR_DECAY_FLOOR
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    beta_start: float = BETA_INIT
    beta_end: float = BETA_FINAL
    alpha_s_init: float = ALPHA_S_INIT
    warmup_fraction: float = WARMUP_FRACTION
    root_init: str = RootInitMode.GROUND_TRUTH_NOISY.value
    root_init_max_degrees: float = 15.0
    bones: int = NUM_BONES
    deformation: str = DeformationMode.SKINNING.value
    videos: str = 'all'
    grid_size: int = GRID_SIZE
    bounds_refresh_every: int = BOUNDS_REFRESH_EVERY
    bounds_resolution: int = BOUNDS_MC_RESOLUTION
    initial_bounds: Tuple[float, ...] = (-1.0, -1.0, -1.0, 1.0, 1.0, 1.0)
    checkpoint_every: int = 1000
    preview_every: int = 0
    field_width: int = 128
    field_depth: int = 5
    small_width: int = 64
    small_depth: int = 2
    xyz_frequencies: int = 10
    dir_frequencies: int = 4
    loss_weights: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LOSS_WEIGHTS))
    samples_per_ray: int = SAMPLES_PER_RAY
    opacity_threshold: float = OPACITY_THRESHOLD
    near_far_margin: float = NEAR_FAR_MARGIN
    background: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    chunk: int = 65536
    ablations: FrozenSet[str] = frozenset()
    seed: int = DEFAULT_SEED
    metrics_wall_time: bool = False

    def __post_init__(self):
        positive = ('iteration_floor', 'pixels_per_batch', 'lr_mlp', 'lr_code', 'lr_bone',
                    'lr_pixel_embedding', 'beta_start', 'beta_end', 'alpha_s_init', 'bones',
                    'grid_size', 'bounds_refresh_every', 'samples_per_ray', 'field_width',
                    'field_depth', 'small_width', 'small_depth', 'chunk')
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValidationError(name, getattr(self, name), f"{name} > 0")
        if self.iterations is not None and self.iterations <= 0:
            raise ValidationError('iterations', self.iterations, "'auto' or > 0")
        if min(self.active_pixels, self.active_candidates) < 0:
            raise ValidationError('active_pixels', self.active_pixels, '>= 0')
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValidationError('warmup_fraction', self.warmup_fraction, '0 <= x < 1')
        if self.samples_per_ray < 2:
            raise ValidationError('samples_per_ray', self.samples_per_ray, '>= 2')
        try:
            RootInitMode(self.root_init)
            DeformationMode(self.deformation)
            for name in self.ablations:
                Ablation(name)
        except ValueError as e:
            raise ValidationError('FitConfig', str(e), 'known mode or ablation name')
        for key, weight in self.loss_weights.items():
            if key not in DEFAULT_LOSS_WEIGHTS or weight < 0:
                raise ValidationError('loss_weights', f"{key}={weight}", f"non-negative weight for {sorted(DEFAULT_LOSS_WEIGHTS)}")

    @classmethod
    def from_config(cls, cfg, ablate: Sequence[str] = ()) -> 'FitConfig':
        """Build from a ``ConfigManager``; ``ablate`` adds CLI ablation switches"""
        iterations = cfg.get('Fit', 'iterations').strip().lower()
        ablations = {a.value for a in Ablation
                     if cfg.get_bool('Ablation', 'disable_' + a.value.replace('no-', '').replace('-', '_'))}
        try:
            ablations |= {Ablation(a).value for a in ablate}
            root_init = RootInitMode(cfg.get('Fit', 'root_init').strip()).value
            deformation = DeformationMode(cfg.get('Fit', 'deformation').strip()).value
        except ValueError as e:
            raise ConfigurationError('Fit', str(e))

        ints = ('iteration_floor', 'pixels_per_batch', 'active_pixels', 'active_candidates', 'bones',
                'grid_size', 'bounds_refresh_every', 'bounds_resolution', 'checkpoint_every',
                'preview_every', 'field_width', 'field_depth', 'small_width', 'small_depth',
                'xyz_frequencies', 'dir_frequencies')
        floats = ('lr_mlp', 'lr_code', 'lr_bone', 'lr_pixel_embedding', 'lr_decay_floor', 'adam_beta1',
                  'adam_beta2', 'adam_eps', 'beta_start', 'beta_end', 'alpha_s_init', 'warmup_fraction',
                  'root_init_max_degrees')
        values = {k: cfg.get_int('Fit', k) for k in ints}
        values.update({k: cfg.get_float('Fit', k) for k in floats})
        try:
            return cls(
                iterations=None if iterations == 'auto' else cfg.get_int('Fit', 'iterations'),
                root_init=root_init,
                deformation=deformation,
                videos=cfg.get('Fit', 'videos').strip(),
                initial_bounds=cfg.get_floats('Fit', 'initial_bounds', 6),
                loss_weights={k: cfg.get_float('Loss', k) for k in DEFAULT_LOSS_WEIGHTS},
                samples_per_ray=cfg.get_int('Render', 'samples_per_ray'),
                opacity_threshold=cfg.get_float('Render', 'opacity_threshold'),
                near_far_margin=cfg.get_float('Render', 'near_far_margin'),
                background=cfg.get_floats('Render', 'background', 3),
                chunk=cfg.get_int('Render', 'chunk'),
                ablations=frozenset(ablations),
                seed=cfg.seed,
                metrics_wall_time=cfg.get_bool('Logging', 'metrics_wall_time'),
                **values,
            )
        except ValidationError as e:
            raise ConfigurationError(e.field, e.message)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['ablations'] = sorted(self.ablations)
        data['initial_bounds'] = list(self.initial_bounds)
        data['background'] = list(self.background)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'FitConfig':
        data = dict(data)
        data['ablations'] = frozenset(data.get('ablations', ()))
        data['initial_bounds'] = tuple(data['initial_bounds'])
        data['background'] = tuple(data['background'])
        return cls(**data)

    def ablated(self, flag: Ablation) -> bool:
        return flag.value in self.ablations

    def effective_weights(self) -> Dict[str, float]:
        weights = dict(self.loss_weights)
        if self.ablated(Ablation.NO_CANONICAL_EMBEDDING):
            for term in REGISTRATION_TERMS:
                weights[term] = 0.0
        if self.ablated(Ablation.NO_FLOW):
            weights['flow'] = 0.0
        return weights

    @property
    def root_init_mode(self) -> RootInitMode:
        if self.ablated(Ablation.NO_ROOT_INIT):
            return RootInitMode.IDENTITY
        return RootInitMode(self.root_init)

    def model_overrides(self) -> dict:
        return dict(
            num_bones=self.bones,
            deformation=self.deformation,
            field_hidden=(self.field_width,) * self.field_depth,
            small_hidden=(self.small_width,) * self.small_depth,
            xyz_freqs=self.xyz_frequencies,
            dir_freqs=self.dir_frequencies,
            use_delta=not self.ablated(Ablation.NO_DELTA_SKINNING),
            use_gaussian=not self.ablated(Ablation.NO_GAUSSIAN_SKINNING),
            beta=self.beta_start,
            alpha=self.alpha_s_init,
        )

    def base_lrs(self) -> Dict[str, float]:
        return {'mlp': self.lr_mlp, 'code': self.lr_code, 'bone': self.lr_bone,
                'pixel': self.lr_pixel_embedding}


def iteration_budget(num_frames: int, pixels: int, active: int, floor: int = BUDGET_FLOOR) -> int:
    """round(1000 · frames / (N^p + N^a)) thousand iterations, at least ``floor``"""
    if num_frames <= 0 or pixels <= 0 or active < 0:
        raise ValidationError('iteration_budget', (num_frames, pixels, active), 'positive inputs')
    return max(int(floor), int(round(1000.0 * num_frames / (pixels + active))) * 1000)


def init_root_poses(oracle_poses, mode: RootInitMode = RootInitMode.GROUND_TRUTH_NOISY,
                    max_degrees: float = 15.0,
                    rng: Optional[np.random.Generator] = None) -> torch.Tensor:
    """
    G₀ per frame, (T,3,4)

    ground-truth-noisy: oracle rotation perturbed by a random rotation of angle
    ≤ ``max_degrees``; identity: I. Translation is (0,0,3) in both modes.
    """
    poses = torch.as_tensor(np.asarray(oracle_poses, dtype=np.float64)).reshape(-1, 3, 4)
    count = poses.shape[0]
    trans = torch.tensor(ROOT_INIT_TRANSLATION, dtype=DTYPE).expand(count, 3)
    if RootInitMode(mode) == RootInitMode.IDENTITY:
        return rt_matrix(torch.eye(3, dtype=DTYPE).expand(count, 3, 3), trans)

    rng = rng if rng is not None else np.random.default_rng(DEFAULT_SEED)
    axis = rng.standard_normal((count, 3))
    axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = rng.uniform(0.0, math.radians(max_degrees), size=(count, 1))
    noise = rodrigues(torch.from_numpy(axis * angle))
    init = rt_matrix(noise @ poses[:, :, :3], trans)
    worst = float(geodesic_distance(init[:, :, :3], poses[:, :, :3]).max())
    logger.debug(f"Kök başlatma: en büyük sapma {math.degrees(worst):.2f}°")
    return init


# =============================================================================
# State
# =============================================================================

@dataclass
class FitState:
    """Everything needed to continue or evaluate an optimization"""
    model: ArticulatedModel
    store: ParamStore
    config: FitConfig
    grid: CanonicalGrid
    rng: np.random.Generator
    generator: torch.Generator
    total_iterations: int
    iteration: int = 0
    dataset_meta: dict = field(default_factory=dict)
    retarget: bool = False
    checksums: Dict[str, str] = field(default_factory=dict)

    @property
    def bounds(self) -> torch.Tensor:
        return self.model.bounds


def dataset_meta(dataset) -> dict:
    return {
        'name': dataset.name,
        'root': str(dataset.root),
        'lengths': [int(n) for n in dataset.index.video_length],
        'image_size': [dataset.height, dataset.width],
    }


def build_store(model: ArticulatedModel, config: FitConfig, retarget: bool = False) -> ParamStore:
    frozen = (lambda name: name not in RETARGET_PARAMS) if retarget else (lambda name: False)
    return ParamStore(model.named_parameters(), group_of=model.param_group, base_lrs=config.base_lrs(),
                      frozen=frozen, betas=(config.adam_beta1, config.adam_beta2), eps=config.adam_eps)


def _total_iterations(dataset, config: FitConfig) -> int:
    if config.iterations is not None:
        return config.iterations
    return iteration_budget(dataset.num_frames, config.pixels_per_batch, config.active_pixels,
                            config.iteration_floor)


def prepare_state(dataset, config: FitConfig) -> FitState:
    """Seeded model, root initialization, pixel embeddings and optimizer"""
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    generator = torch.Generator().manual_seed(config.seed + 1)

    model_cfg = ModelConfig.for_dataset(dataset, **config.model_overrides())
    bounds = np.asarray(config.initial_bounds, dtype=np.float64)
    model = ArticulatedModel(model_cfg, np.stack([bounds[:3], bounds[3:]], axis=-1))
    model.set_root_init(init_root_poses(dataset.poses, config.root_init_mode,
                                        config.root_init_max_degrees, rng))
    model.set_pixel_features(dataset.features)

    store = build_store(model, config)
    grid = refresh_grid(model.bounds, config.grid_size)
    logger.info(f"Model hazır: {model.count_parameters()} parametre, "
                f"{len(store.trainable())} eğitilebilir tensör")
    return FitState(model, store, config, grid, rng, generator,
                    total_iterations=_total_iterations(dataset, config),
                    dataset_meta=dataset_meta(dataset))


def load_model(payload: dict) -> ArticulatedModel:
    model = ArticulatedModel(ModelConfig.from_dict(payload['model_config']))
    model.load_state_dict(payload['model'])
    return model


def restore_state(payload: dict, dataset) -> FitState:
    """Checkpoint sözlüğünden FitState"""
    config = FitConfig.from_dict(payload['fit_config'])
    model = load_model(payload)
    retarget_mode = bool(payload.get('retarget', False))
    store = build_store(model, config, retarget=retarget_mode)
    store.load_state_dict(payload['store'])

    rng = np.random.default_rng()
    rng.bit_generator.state = payload['numpy_rng']
    generator = torch.Generator()
    generator.set_state(payload['torch_rng'])
    total = int(payload.get('total_iterations', _total_iterations(dataset, config)))
    return FitState(model, store, config, refresh_grid(model.bounds, config.grid_size), rng, generator,
                    total_iterations=total, iteration=int(payload['iteration']),
                    dataset_meta=dict(payload['dataset']), retarget=retarget_mode)


# =============================================================================
# Losses for one batch
# =============================================================================

def _pick(array: np.ndarray, samples: SampleSet) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(array[samples.frame, samples.row, samples.col]))


def compute_losses(state: FitState, dataset, samples: SampleSet, weights: Dict[str, float],
                   active_terms: Optional[Sequence[str]] = None) -> LossReport:
    """
    Render the sampled pixels and evaluate every enabled loss term

    A term is evaluated only when its weight is positive and it is in
    ``active_terms`` (all terms when None).
    """
    model, cfg = state.model, state.config
    enabled = {k for k, w in weights.items() if w > 0 and (active_terms is None or k in active_terms)}
    pixel_scale = 2.0 / max(dataset.height, dataset.width)
    frames = torch.as_tensor(samples.frame, dtype=torch.long)

    view_state, batch = model.render_rays(samples.frame, samples.row, samples.col, cfg.samples_per_ray,
                                          state.generator, margin=cfg.near_far_margin)
    color, opacity = render_pixel(batch, cfg.background)
    observed_rgb = _pick(dataset.rgb, samples)
    observed_sil = _pick(dataset.silhouette, samples)
    on_object = observed_sil > 0.5

    terms: Dict[str, torch.Tensor] = {}
    counts: Dict[str, int] = {}
    terms['rgb'], terms['sil'] = loss_rgb_sil(color, opacity, observed_rgb, observed_sil)
    errors = rgb_errors(color, observed_rgb)

    needs_point = enabled & {'flow', 'match', 'cyc2d'}
    if needs_point:
        x_star, opaque = expected_canonical_point(batch, cfg.opacity_threshold)
        source = samples.pixel_centers()

    if 'flow' in enabled:
        target = samples.flow_target
        target_state = model.frame_state(target)
        flow, in_front = render_flow(x_star, source, model.warp_forward_fn(target_state),
                                     model.focal(target), model.principal_point(target))
        observed, observed_valid = dataset.observed_flow(samples.frame, samples.row, samples.col,
                                                         samples.flow_offset)
        valid = opaque & in_front & on_object & torch.from_numpy(observed_valid)
        terms['flow'], counts['flow'] = loss_flow(flow, torch.from_numpy(observed), valid, pixel_scale)

    if enabled & set(REGISTRATION_TERMS):
        features, foreground = model.pixel_embeddings.lookup(samples.frame, samples.row, samples.col)
        grid_embeddings = state.grid.embeddings(model.canonical.eval_embedding, key=state.store.step)
        matched = match_soft_argmax(features, state.grid.points, grid_embeddings,
                                    model.match_temperature.alpha)
        valid = foreground & opaque & on_object
        if 'match' in enabled:
            terms['match'] = loss_match(x_star, matched, valid)
            counts['match'] = int(valid.sum())
        if 'cyc2d' in enabled:
            reprojected = model.deformation.warp_forward(matched[:, None, :], view_state)[:, 0, :]
            uv, in_front = project_pinhole(reprojected, model.focal(frames), model.principal_point(frames))
            terms['cyc2d'], counts['cyc2d_skipped'] = loss_2d_cyc(uv, source, valid & in_front, pixel_scale)

    if 'cyc3d' in enabled:
        cycled = model.deformation.warp_forward(batch.canonical, view_state)
        terms['cyc3d'] = loss_3d_cyc(batch.points, cycled, batch.weights)

    if 'unc' in enabled:
        terms['unc'] = loss_uncertainty(errors, model.uncertainty(samples.frame, samples.row, samples.col))

    return LossReport(terms, {k: weights[k] if k in enabled else 0.0 for k in terms}, counts)


# =============================================================================
# Loop
# =============================================================================

def beta_schedule(iteration: int, total: int, start: float, end: float) -> float:
    """Geometric decay start → end over the first half, then ``end``"""
    half = max(total / 2.0, 1.0)
    progress = min(iteration / half, 1.0)
    return start * (end / start) ** progress


def refresh_bounds(state: FitState) -> bool:
    """Bounds ← padded min/max of the current surface; previous bounds kept on failure"""
    model, cfg = state.model, state.config
    try:
        mesh = marching_cubes(model.canonical.eval_sdf, model.bounds, cfg.bounds_resolution)
        box = update_bounds_from_surface(mesh.vertices)
    except EmptySurface as e:
        logger.warning(f"Sınır yenileme atlandı (iterasyon {state.iteration}): {e.reason}")
        return False
    pad = BOUNDS_PADDING * (box[:, 1] - box[:, 0])
    model.set_bounds(torch.stack([box[:, 0] - pad, box[:, 1] + pad], dim=-1))
    state.grid = refresh_grid(model.bounds, cfg.grid_size)
    logger.debug(f"Kanonik sınırlar: {model.bounds.tolist()}")
    return True


def _frame_pool(dataset, config: FitConfig) -> np.ndarray:
    ok, ids, msg = validate_video_selection(config.videos, dataset.num_videos)
    if not ok:
        raise ConfigurationError('Fit.videos', msg)
    return dataset.index.frames_of(ids)


def _write_preview(state: FitState, out_dir: Path, frame: int):
    from src.data_handlers.dataset_io import write_rgb

    rgb, _ = state.model.render_image(frame, state.config.samples_per_ray, background=state.config.background)
    path = out_dir / 'previews' / f"iter_{state.iteration:06d}_frame_{frame:04d}.ppm"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_rgb(path, rgb)


def _save(state: FitState, path: Path) -> str:
    from src.data_handlers.checkpoint import save_checkpoint
    return save_checkpoint(path, state)


def _optimize(state: FitState, dataset, out_dir: Optional[Path], until: Optional[int] = None) -> FitState:
    cfg = state.config
    total = state.total_iterations
    stop = total if until is None else min(until, total)
    weights = cfg.effective_weights()
    pool = _frame_pool(dataset, cfg) if not state.retarget else np.arange(dataset.num_frames)
    scorer = None if cfg.ablated(Ablation.NO_ACTIVE_SAMPLING) else state.model.uncertainty.score
    warmup_end = int(cfg.warmup_fraction * total) if not state.retarget else 0

    metrics_path = None if out_dir is None else str(out_dir / 'metrics.log')
    with MetricsLogger(metrics_path, cfg.metrics_wall_time, append=state.iteration > 0) as metrics:
        while state.iteration < stop:
            it = state.iteration
            if not state.retarget and it % cfg.bounds_refresh_every == 0:
                if it > 0:
                    refresh_bounds(state)
                if it <= total / 2:
                    state.model.canonical.solidness.cap(beta_schedule(it, total, cfg.beta_start, cfg.beta_end))

            samples = sample_pixels(dataset.index, it, total, state.rng, pool, cfg.pixels_per_batch,
                                    cfg.active_pixels, cfg.active_candidates, scorer)
            warmup = it < warmup_end
            report = compute_losses(state, dataset, samples, weights, WARMUP_TERMS if warmup else None)
            if not report.is_finite():
                dump = None if out_dir is None else _save(state, out_dir / 'diverged.pt')
                raise DivergedLoss(it, report.as_floats(), dump)

            state.store.zero_grads()
            report.total.backward()
            if warmup:
                state.store.mask_grads('deformation.delta_skin')
            scale = cosine_lr_scale(it, total, cfg.lr_decay_floor)
            adam_step(state.store, {g.name: g.base_lr * scale for g in state.store.groups},
                      cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
            if not state.retarget:
                state.model.pixel_embeddings.renormalize()
            state.iteration = it + 1

            values = report.as_floats()
            values['beta'] = float(state.model.canonical.beta)
            values['alpha_s'] = float(state.model.match_temperature.alpha)
            metrics.log(state.iteration, values)

            if out_dir is not None:
                if cfg.checkpoint_every > 0 and state.iteration % cfg.checkpoint_every == 0:
                    _save(state, out_dir / 'checkpoints' / f"ckpt_{state.iteration:06d}.pt")
                if cfg.preview_every > 0 and state.iteration % cfg.preview_every == 0:
                    _write_preview(state, out_dir, int(pool[0]))
            if state.iteration % 100 == 0 or state.iteration == stop:
                logger.info(f"[{state.iteration}/{total}] toplam={values['total']:.5f} "
                            f"rgb={values['rgb']:.5f} sil={values['sil']:.5f} β={values['beta']:.4f}")

    if out_dir is not None and state.iteration == total:
        _save(state, out_dir / 'checkpoint.pt')
    return state


def fit(dataset, config: FitConfig, out_dir=None, state: Optional[FitState] = None,
        until: Optional[int] = None) -> FitState:
    """
    Optimize every model parameter against ``dataset``

    Args:
        out_dir: metrics log, checkpoints and previews go here (None: nothing written)
        state: continue from this state (e.g. restored from a checkpoint)
        until: stop after this many completed iterations (budget unchanged)

    Raises:
        DivergedLoss: a non-finite loss; the state is dumped to ``out_dir/diverged.pt``
    """
    state = state if state is not None else prepare_state(dataset, config)
    out = Path(out_dir) if out_dir is not None else None
    logger.info(f"Optimizasyon: {dataset.num_frames} kare, {state.total_iterations} iterasyon, "
                f"ablasyon={sorted(config.ablations) or '-'}")
    return _optimize(state, dataset, out, until)


# =============================================================================
# Retargeting
# =============================================================================

def shared_checksums(model: ArticulatedModel) -> Dict[str, str]:
    """SHA-256 of every shared tensor"""
    return {name: hashlib.sha256(tensor.detach().contiguous().numpy().tobytes()).hexdigest()
            for name, tensor in model.shared_state().items()}


def retarget(trained: ArticulatedModel, dataset, config: FitConfig, out_dir=None,
             iterations: Optional[int] = None) -> FitState:
    """
    Drive a trained model with a new sequence: only ω_r, ω_b and ω_e are optimized

    Raises:
        DivergedLoss
        NumericalError: a shared tensor changed
    """
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    generator = torch.Generator().manual_seed(config.seed + 1)

    base = ModelConfig.for_dataset(dataset)
    model_cfg = replace(trained.config, num_frames=base.num_frames, num_videos=base.num_videos,
                        height=base.height, width=base.width, focal=base.focal,
                        principal=base.principal, video_of_frame=base.video_of_frame)
    before = shared_checksums(trained)
    model = trained.transfer_to(model_cfg)
    model.set_root_init(init_root_poses(dataset.poses, config.root_init_mode,
                                        config.root_init_max_degrees, rng))
    model.set_pixel_features(dataset.features)

    total = iterations or config.iterations or _total_iterations(dataset, config)
    state = FitState(model, build_store(model, config, retarget=True), config,
                     refresh_grid(model.bounds, config.grid_size), rng, generator,
                     total_iterations=total, dataset_meta=dataset_meta(dataset), retarget=True)
    logger.info(f"Yeniden hedefleme: {dataset.num_frames} kare, {total} iterasyon")
    _optimize(state, dataset, Path(out_dir) if out_dir is not None else None)

    state.checksums = shared_checksums(model)
    changed = sorted(k for k, v in before.items() if state.checksums.get(k) != v)
    if changed:
        raise NumericalError(f"Paylaşılan tensörler değişti: {changed}")
    return state
