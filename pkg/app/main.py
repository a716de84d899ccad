"""
Animatable Model Builder - Komut Satırı
=======================================
Videolardan canlandırılabilir 3B model: sentetik veri, optimizasyon, mesh
çıkarma, görüntü üretme, yeniden hedefleme ve değerlendirme.

Alt komutlar: synth, fit, extract, render, retarget, eval

Çıkış kodları: 0 başarı, 1 kullanım hatası, 2 girdi doğrulama, 3 sayısal hata.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence

# Uygulama kök dizinini belirle
APP_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, APP_DIR)

import numpy as np
import torch

from src.core.config import ConfigManager
from src.core.constants import APP_NAME, APP_VERSION, EVAL_SAMPLES, ExitCode, Ablation
from src.core.geometry import DTYPE, rotation_about_axis, rt_matrix
from src.utils.exceptions import ModelBuilderException, ValidationError
from src.utils.logging_utils import setup_logging

logger = logging.getLogger('AnimatableModelBuilder')

MANIFEST_FILE = 'run_manifest.json'


@dataclass
class RunManifest:
    """Bir çalıştırmanın yeniden üretilebilir kaydı (çıktı dizini başına tek dosya)"""
    command: str
    arguments: dict
    seed: int
    version: str
    output_dir: str
    config: dict = field(default_factory=dict)
    dataset_path: Optional[str] = None
    dataset_hash: Optional[str] = None
    created: str = field(default_factory=lambda: datetime.now().isoformat(timespec='seconds'))

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True), encoding='utf-8')
        return path


class CliParser(argparse.ArgumentParser):
    """Kullanım hatasında 1 ile çık"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(int(ExitCode.USAGE), f"{self.prog}: hata: {message}\n")


# =============================================================================
# Yardımcılar
# =============================================================================

def load_config(path: Optional[str], seed: Optional[int], threads: Optional[int]) -> ConfigManager:
    """INI + komut satırı üzerine yazmaları"""
    config = ConfigManager(path)
    if seed is not None:
        config.set('Run', 'seed', str(seed))
    if threads is not None:
        config.set('Run', 'threads', str(threads))
    return config


def apply_threads(count: int):
    if count < 1:
        raise ValidationError('threads', count, '>= 1')
    torch.set_num_threads(count)


def parse_frames(text: Optional[str], num_frames: int) -> List[Optional[int]]:
    """'rest' -> [None]; 'all' -> her kare; '0,3,5' -> liste"""
    if text is None or text == 'rest':
        return [None]
    if text == 'all':
        return list(range(num_frames))
    try:
        frames = [int(p) for p in text.split(',') if p.strip()]
    except ValueError:
        raise ValidationError('frames', text, "'rest', 'all' or comma separated frame numbers")
    bad = [f for f in frames if not 0 <= f < num_frames]
    if bad or not frames:
        raise ValidationError('frames', text, f"frame numbers in 0..{num_frames - 1}")
    return frames


def azimuth_modifier(degrees: float) -> Optional[torch.Tensor]:
    """Kanonik dikey eksen (y) etrafında dönüş; 0 ise None"""
    if degrees == 0.0:
        return None
    rot = rotation_about_axis((0.0, 1.0, 0.0), math.radians(degrees))
    return rt_matrix(rot, torch.zeros(3, dtype=DTYPE))


def _dataset(path):
    from src.data_handlers.dataset_io import content_hash, load_dataset
    return load_dataset(path), content_hash(path)


def _manifest(args, config: ConfigManager, dataset_path=None, dataset_hash=None,
              extra_config: Optional[dict] = None) -> RunManifest:
    arguments = {k: v for k, v in vars(args).items() if k != 'handler'}
    snapshot = {'ini': config.to_dict(), 'source': config.config_path}
    if extra_config:
        snapshot['fit'] = extra_config
    return RunManifest(command=args.command, arguments=arguments, seed=config.seed,
                       version=f"{APP_NAME} {APP_VERSION}", output_dir=str(args.out),
                       config=snapshot, dataset_path=None if dataset_path is None else str(dataset_path),
                       dataset_hash=dataset_hash)


# =============================================================================
# Alt komutlar
# =============================================================================

def cmd_synth(args, config: ConfigManager) -> int:
    from src.data_handlers.dataset_io import content_hash
    from src.data_handlers.synth import export_dataset, fixture_script

    script = fixture_script(args.script)
    export_dataset(script, args.out, num_points=args.points, with_meshes=not args.no_meshes)
    digest = content_hash(args.out)
    print(digest)
    logger.info(f"Veri seti özeti: {digest}")
    return ExitCode.SUCCESS


def cmd_fit(args, config: ConfigManager) -> int:
    from src.data_handlers.checkpoint import load_checkpoint
    from src.ml_engine.fit import FitConfig, dataset_meta, fit, restore_state

    dataset, digest = _dataset(args.dataset)
    fit_config = FitConfig.from_config(config, ablate=args.ablate or ())
    state = None
    if args.resume:
        state = restore_state(load_checkpoint(args.resume, dataset_meta(dataset)), dataset)
        fit_config = state.config
    _manifest(args, config, args.dataset, digest, fit_config.to_dict()).write(args.out)

    state = fit(dataset, fit_config, args.out, state=state, until=args.until)
    logger.info(f"Optimizasyon bitti: {state.iteration}/{state.total_iterations} iterasyon")
    return ExitCode.SUCCESS


def _load_model(path):
    from src.data_handlers.checkpoint import load_checkpoint
    from src.ml_engine.fit import load_model

    model = load_model(load_checkpoint(path))
    model.eval()
    return model


def cmd_extract(args, config: ConfigManager) -> int:
    from src.services.evaluation_service import EvaluationService

    model = _load_model(args.checkpoint)
    _manifest(args, config).write(args.out)
    service = EvaluationService(model, resolution=args.resolution, seed=config.seed)
    out = Path(args.out)
    for frame in parse_frames(args.frames, model.config.num_frames):
        stem = 'rest' if frame is None else f"frame_{frame:04d}"
        bones = out / f"{stem}_bones.txt" if args.bones else None
        service.extract(out / f"{stem}.ply", frame, args.color, bones)
    return ExitCode.SUCCESS


def cmd_render(args, config: ConfigManager) -> int:
    from src.data_handlers.dataset_io import write_flow_grid, write_gray, write_rgb

    model = _load_model(args.checkpoint)
    _manifest(args, config).write(args.out)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    modifier = azimuth_modifier(args.azimuth)
    samples = args.samples or config.get_int('Render', 'samples_per_ray')
    background = config.get_floats('Render', 'background', 3)

    frames = parse_frames(args.frames or 'all', model.config.num_frames)
    for frame in frames:
        rgb, opacity = model.render_image(frame, samples, background=background, root_modifier=modifier)
        stem = f"frame_{frame:04d}" + (f"_az{args.azimuth:g}" if modifier is not None else '')
        write_rgb(out / f"{stem}_rgb.ppm", rgb)
        write_gray(out / f"{stem}_sil.pgm", opacity)
        write_gray(out / f"{stem}_unc.pgm", model.uncertainty_image(frame))
        target = model.flow_neighbor(frame)
        if target is not None:
            flow = model.render_flow_image(frame, target, samples, root_modifier=modifier)
            write_flow_grid(out / f"{stem}_flow_to_{target:04d}.txt", flow)
    logger.info(f"{len(frames)} kare çizildi: {out}")
    return ExitCode.SUCCESS


def cmd_retarget(args, config: ConfigManager) -> int:
    from src.ml_engine.fit import FitConfig, retarget

    trained = _load_model(args.checkpoint)
    dataset, digest = _dataset(args.dataset)
    fit_config = FitConfig.from_config(config)
    _manifest(args, config, args.dataset, digest, fit_config.to_dict()).write(args.out)

    state = retarget(trained, dataset, fit_config, args.out, args.iterations)
    Path(args.out, 'shared_checksums.json').write_text(
        json.dumps(state.checksums, indent=2, sort_keys=True), encoding='utf-8')
    return ExitCode.SUCCESS


def cmd_eval(args, config: ConfigManager) -> int:
    from src.services.evaluation_service import EvaluationService

    model = _load_model(args.checkpoint)
    dataset, digest = _dataset(args.dataset)
    if not dataset.has_ground_truth:
        raise ValidationError('dataset', str(args.dataset), 'a dataset with ground-truth geometry')
    _manifest(args, config, args.dataset, digest).write(args.out)

    service = EvaluationService(model, dataset, args.resolution, args.samples, config.seed)
    report = service.eval_reconstruction()
    paths = service.save_report(report, args.out)
    print(report.to_string(index=False, float_format=lambda v: f"{v:.6g}"))
    logger.info(f"Rapor: {paths['csv']}")
    return ExitCode.SUCCESS


# =============================================================================
# Argümanlar
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog='amb', description=APP_NAME)
    parser.add_argument('--config', help='INI konfigürasyon dosyası')
    parser.add_argument('--seed', type=int, help='[Run] seed üzerine yazar')
    parser.add_argument('--threads', type=int, help='torch iş parçacığı sayısı (1 = belirlenimci)')
    parser.add_argument('--log-level', help='DEBUG, INFO, WARNING, ...')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    p = sub.add_parser('synth', help='sentetik veri seti üret')
    p.add_argument('script', help='hazır senaryo adı veya .json senaryo dosyası')
    p.add_argument('out')
    p.add_argument('--points', type=int, default=EVAL_SAMPLES, help='kare başına referans nokta sayısı')
    p.add_argument('--no-meshes', action='store_true', help='referans PLY yazma')
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('fit', help='modeli veri setine optimize et')
    p.add_argument('dataset')
    p.add_argument('out')
    p.add_argument('--ablate', action='append', choices=[a.value for a in Ablation])
    p.add_argument('--resume', help='devam edilecek checkpoint')
    p.add_argument('--until', type=int, help='bu iterasyonda dur (bütçe değişmez)')
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser('extract', help='PLY mesh çıkar')
    p.add_argument('checkpoint')
    p.add_argument('out')
    p.add_argument('--frames', default='rest', help="'rest', 'all' veya 0,3,5")
    p.add_argument('--color', default='none', choices=['none', 'embedding', 'skinning'])
    p.add_argument('--bones', action='store_true', help='kemik dosyalarını da yaz')
    p.add_argument('--resolution', type=int, default=128)
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser('render', help='PPM/PGM görüntü üret')
    p.add_argument('checkpoint')
    p.add_argument('out')
    p.add_argument('--frames', help="'all' veya 0,3,5")
    p.add_argument('--azimuth', type=float, default=0.0, help='yeni bakış: dikey eksen etrafında derece')
    p.add_argument('--samples', type=int, help='ışın başına örnek sayısı')
    p.set_defaults(handler=cmd_render)

    p = sub.add_parser('retarget', help='eğitilmiş modeli yeni diziyle sür')
    p.add_argument('checkpoint')
    p.add_argument('dataset')
    p.add_argument('out')
    p.add_argument('--iterations', type=int)
    p.set_defaults(handler=cmd_retarget)

    p = sub.add_parser('eval', help='referans geometriye karşı Chamfer raporu')
    p.add_argument('checkpoint')
    p.add_argument('dataset')
    p.add_argument('out')
    p.add_argument('--resolution', type=int, default=128)
    p.add_argument('--samples', type=int, default=EVAL_SAMPLES)
    p.set_defaults(handler=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Ana giriş noktası; çıkış kodunu döndürür"""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.seed, args.threads)
        log_dir = os.path.join(args.out, 'logs') if args.command != 'synth' else None
        setup_logging(args.log_level or config.log_level, log_dir)
        apply_threads(config.threads)
        torch.manual_seed(config.seed)
        np.random.seed(config.seed)

        logger.info("=" * 50)
        logger.info(f"{APP_NAME} {APP_VERSION}: {args.command}")
        logger.info("=" * 50)
        return int(args.handler(args, config))
    except ModelBuilderException as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        print(e.user_message, file=sys.stderr)
        return int(e.exit_code)


if __name__ == '__main__':
    sys.exit(main())
