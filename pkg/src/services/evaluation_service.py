"""
Animatable Model Builder - Evaluation Service
=============================================
Eğitilmiş modelden mesh çıkarma ve referans geometriye karşı değerlendirme.

Özellikler:
- Kanonik mesh (marching cubes) ve kareye pozlanmış mesh
- Gömme / iskelet ağırlığı renklendirmesi, ASCII PLY ve kemik dosyası
- ICP benzerlik hizalaması + Chamfer mesafesi (kare bazlı tablo)
- CSV / JSON rapor
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import torch
import trimesh

from src.core.constants import EVAL_SAMPLES, FIXTURE_EXTENT_CM, ICP_ITERATIONS
from src.core.geometry import apply_similarity, icp_similarity_align
from src.utils.exceptions import (
    DatasetValidationError, DegenerateCloud, EmptyCloud, EmptySurface, ValidationError,
)

logger = logging.getLogger(__name__)

COLOR_MODES = ('none', 'embedding', 'skinning')
REPORT_COLUMNS = ['video', 'frame', 'chamfer', 'rms', 'chamfer_cm', 'icp_scale', 'status']


def evaluate_meshes(reference_points, estimate_points, iters: int = ICP_ITERATIONS) -> Dict[str, float]:
    """
    Align ``estimate_points`` to ``reference_points`` with similarity ICP and
    measure the symmetric Chamfer distance.

    Returns:
        {'chamfer', 'rms', 'chamfer_cm', 'icp_scale'}; ``rms`` = sqrt(chamfer / 2),
        ``chamfer_cm`` scales ``rms`` so the reference box's longest edge is 100 cm
    """
    from src.ml_engine.mesh import chamfer

    reference = np.asarray(reference_points, dtype=np.float64).reshape(-1, 3)
    estimate = np.asarray(estimate_points, dtype=np.float64).reshape(-1, 3)
    if len(reference) == 0:
        raise EmptyCloud('reference')
    if len(estimate) == 0:
        raise EmptyCloud('estimate')

    scale, transform = icp_similarity_align(estimate, reference, iters=iters)
    aligned = apply_similarity(scale, transform, estimate)
    distance = chamfer(reference, aligned)
    rms = float(np.sqrt(distance / 2.0))
    extent = float((reference.max(axis=0) - reference.min(axis=0)).max())
    return {
        'chamfer': distance,
        'rms': rms,
        'chamfer_cm': rms * FIXTURE_EXTENT_CM / extent if extent > 0 else float('nan'),
        'icp_scale': float(scale),
    }


class EvaluationService:
    """
    Mesh çıkarma ve değerlendirme servisi.

    Kanonik mesh ilk kullanımda bir kez çıkarılır ve önbellekte tutulur.
    """

    def __init__(self, model, dataset=None, resolution: int = 64,
                 samples: int = EVAL_SAMPLES, seed: int = 0):
        """
        Args:
            model: ArticulatedModel
            dataset: Dataset (değerlendirme için referans noktaları)
            resolution: marching cubes çözünürlüğü
            samples: yüzey başına örnek sayısı
        """
        self.model = model
        self.dataset = dataset
        self.resolution = resolution
        self.samples = samples
        self.seed = seed
        self._canonical_mesh: Optional[trimesh.Trimesh] = None

    @property
    def canonical_mesh(self) -> trimesh.Trimesh:
        """Lazy: kanonik SDF'nin sıfır seviyesi"""
        if self._canonical_mesh is None:
            from src.ml_engine.mesh import marching_cubes
            self._canonical_mesh = marching_cubes(self.model.canonical.eval_sdf, self.model.bounds,
                                                  self.resolution)
        return self._canonical_mesh

    # =========================================================================
    # Extraction
    # =========================================================================

    def posed_mesh(self, frame: int, root_modifier: Optional[torch.Tensor] = None) -> trimesh.Trimesh:
        """Kanonik mesh, ``frame`` karesinin kamera uzayına ileri bükülmüş"""
        from src.ml_engine.mesh import pose_mesh

        self._check_frame(frame)
        with torch.no_grad():
            state = self.model.frame_state([frame], root_modifier)
        return pose_mesh(self.canonical_mesh,
                         lambda pts: self.model.deformation.warp_forward(pts[None], state)[0])

    def vertex_colors(self, mesh: trimesh.Trimesh, mode: str = 'none') -> Optional[np.ndarray]:
        """Kanonik köşeler için RGBA renkleri (none / embedding / skinning)"""
        from src.ml_engine.mesh import embedding_colors, skinning_colors

        if mode not in COLOR_MODES:
            raise ValidationError('color', mode, f"one of {COLOR_MODES}")
        if mode == 'none':
            return None
        verts = torch.from_numpy(np.asarray(mesh.vertices, dtype=np.float64))
        with torch.no_grad():
            if mode == 'embedding':
                return embedding_colors(self.model.canonical.eval_embedding(verts).numpy(), self.seed)
            if not hasattr(self.model.deformation, 'forward_weights'):
                raise ValidationError('color', mode, 'skinning deformation')
            state = self.model.frame_state([0])
            weights = self.model.deformation.forward_weights(verts[None], state)[0]
        return skinning_colors(weights.numpy(), self.seed)

    def extract(self, out_path, frame: Optional[int] = None, color: str = 'none',
                bones_path=None) -> trimesh.Trimesh:
        """
        Kanonik (frame None) veya pozlanmış mesh'i PLY olarak yaz

        Args:
            bones_path: verilirse kemikler (aynı poz) metin dosyası olarak yazılır
        """
        from src.ml_engine.mesh import export_ply

        colors = self.vertex_colors(self.canonical_mesh, color)
        mesh = self.canonical_mesh if frame is None else self.posed_mesh(frame)
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        export_ply(mesh, str(out_path), colors)
        logger.info(f"Mesh yazıldı: {out_path} ({len(mesh.vertices)} köşe, {len(mesh.faces)} üçgen)")

        if bones_path is not None:
            lines = self.model.bone_lines(frame)
            Path(bones_path).write_text('\n'.join(lines) + ('\n' if lines else ''), encoding='utf-8')
        return mesh

    # =========================================================================
    # Evaluation
    # =========================================================================

    def _check_frame(self, frame: int):
        if not 0 <= int(frame) < self.model.config.num_frames:
            raise ValidationError('frame', frame, f"0..{self.model.config.num_frames - 1}")

    def reference_points(self, frame: int) -> np.ndarray:
        """Referans yüzey noktaları: kayıtlı nokta bulutu, yoksa referans mesh örneklemesi"""
        from src.ml_engine.mesh import load_ply, sample_points

        if self.dataset is None:
            raise ValidationError('dataset', None, 'a dataset with ground truth')
        ply_path, points_path = self.dataset.ground_truth_paths(frame)
        if points_path.is_file():
            return self.dataset.ground_truth_points(frame)
        if ply_path.is_file():
            return sample_points(load_ply(str(ply_path)), self.samples, self.seed)
        raise DatasetValidationError(str(self.dataset.root), f"kare {frame} için referans geometri yok")

    def evaluate_frame(self, frame: int) -> Dict:
        from src.ml_engine.mesh import sample_points

        row = {'video': int(self.dataset.index.video[frame]), 'frame': int(frame)}
        try:
            estimate = sample_points(self.posed_mesh(frame), self.samples, self.seed + int(frame))
            row.update(evaluate_meshes(self.reference_points(frame), estimate))
            row['status'] = 'ok'
        except (EmptySurface, EmptyCloud, DegenerateCloud) as e:
            logger.warning(f"Kare {frame} değerlendirilemedi: {e.message}")
            row.update({'chamfer': np.nan, 'rms': np.nan, 'chamfer_cm': np.nan,
                        'icp_scale': np.nan, 'status': 'failed'})
        return row

    def eval_reconstruction(self, frames: Optional[Sequence[int]] = None) -> pd.DataFrame:
        """Kare bazlı Chamfer tablosu (başarısız kareler status='failed')"""
        frames = range(self.dataset.num_frames) if frames is None else frames
        rows: List[Dict] = [self.evaluate_frame(int(f)) for f in frames]
        report = pd.DataFrame(rows, columns=REPORT_COLUMNS)
        ok = report[report['status'] == 'ok']
        logger.info(f"Değerlendirme: {len(ok)}/{len(report)} kare, "
                    f"ortalama Chamfer={ok['chamfer'].mean() if len(ok) else float('nan'):.6f}")
        return report

    @staticmethod
    def summary(report: pd.DataFrame) -> Dict:
        ok = report[report['status'] == 'ok']
        summary = {'frames': int(len(report)), 'failed': int((report['status'] != 'ok').sum())}
        for column in ('chamfer', 'rms', 'chamfer_cm'):
            summary[f"mean_{column}"] = float(ok[column].mean()) if len(ok) else None
        summary['per_video'] = {
            int(video): float(group['chamfer'].mean())
            for video, group in ok.groupby('video')
        }
        return summary

    def save_report(self, report: pd.DataFrame, out_dir) -> Dict[str, str]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / 'eval.csv'
        json_path = out_dir / 'eval.json'
        report.to_csv(csv_path, index=False, float_format='%.9g')
        json_path.write_text(json.dumps(self.summary(report), indent=2), encoding='utf-8')
        return {'csv': str(csv_path), 'json': str(json_path)}
