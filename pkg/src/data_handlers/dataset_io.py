"""
Animatable Model Builder - Veri Seti Okuma/Yazma
================================================
Disk üzerindeki veri seti düzeni:

    manifest.json                      videolar, kare sayıları, görüntü boyutu
    script.json                        (opsiyonel) sahne senaryosu
    video_000/
        poses.txt                      kare başına 12 sayı, [R | t] satır öncelikli
        cameras.txt                    kare başına: fx fy cx cy H W
        frame_0000_rgb.ppm             P6
        frame_0000_sil.pgm             P5, 0 / 255
        frame_0000_feat.raw            (H, W, 16) float64
        frame_0000_flow_p1.raw         (H, W, 3) float64: dx, dy, geçerli
        frame_0000_flow_m1.raw / _p2 / _m2
    gt/video_000/
        frame_0000.ply                 poz verilmiş referans mesh
        frame_0000_points.raw          (M, 1, 3) referans yüzey noktaları

Ham float dosyaları tek satırlık metin başlığı ("H W C float64") ve ardından
little-endian float64 baytları içerir.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import cv2
import numpy as np

from src.core.constants import EMBEDDING_DIM, FLOW_OFFSETS
from src.ml_engine.objective import FrameIndex
from src.utils.exceptions import DatasetFormatError, DatasetValidationError, FileOperationError
from src.utils.validators import validate_dataset_dir

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
SCRIPT_NAME = 'script.json'
RAW_DTYPE = 'float64'


def video_dir_name(video: int) -> str:
    return f"video_{video:03d}"


def frame_stem(t: int) -> str:
    return f"frame_{t:04d}"


def flow_suffix(offset: int) -> str:
    return f"_flow_{'p' if offset > 0 else 'm'}{abs(offset)}.raw"


# =============================================================================
# Düşük seviye dosya formatları
# =============================================================================

def write_raw(path, array: np.ndarray):
    """(H, W, C) float64 dizisini başlıklı ham dosyaya yaz"""
    arr = np.ascontiguousarray(array, dtype='<f8')
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3:
        raise DatasetFormatError(str(path), f"3 boyutlu dizi bekleniyordu, {arr.ndim} geldi")
    h, w, c = arr.shape
    with open(path, 'wb') as f:
        f.write(f"{h} {w} {c} {RAW_DTYPE}\n".encode('ascii'))
        f.write(arr.tobytes())


def read_raw(path) -> np.ndarray:
    """Başlıklı ham float dosyasını (H, W, C) olarak oku"""
    try:
        with open(path, 'rb') as f:
            header = f.readline().decode('ascii').split()
            payload = f.read()
    except OSError as e:
        raise FileOperationError(str(path), "Raw Read", str(e))
    except UnicodeDecodeError:
        raise DatasetFormatError(str(path), "başlık ASCII değil")

    if len(header) != 4 or header[3] != RAW_DTYPE:
        raise DatasetFormatError(str(path), f"beklenmeyen başlık: {header}")
    try:
        h, w, c = (int(v) for v in header[:3])
    except ValueError:
        raise DatasetFormatError(str(path), f"boyutlar tam sayı değil: {header}")
    if len(payload) != h * w * c * 8:
        raise DatasetFormatError(str(path), f"{h}x{w}x{c} için {h * w * c * 8} bayt beklenirken {len(payload)}")
    return np.frombuffer(payload, dtype='<f8').reshape(h, w, c).astype(np.float64)


def write_rgb(path, rgb: np.ndarray):
    """[0,1] RGB -> P6 PPM"""
    img = np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    if not cv2.imwrite(str(path), cv2.cvtColor(img, cv2.COLOR_RGB2BGR), [cv2.IMWRITE_PXM_BINARY, 1]):
        raise FileOperationError(str(path), "Image Write")


def read_rgb(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise DatasetFormatError(str(path), "PPM okunamadı")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB).astype(np.float64) / 255.0


def write_mask(path, mask: np.ndarray):
    """{0,1} -> P5 PGM (0 / 255)"""
    img = np.where(np.asarray(mask) > 0.5, 255, 0).astype(np.uint8)
    if not cv2.imwrite(str(path), img, [cv2.IMWRITE_PXM_BINARY, 1]):
        raise FileOperationError(str(path), "Image Write")


def read_mask(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise DatasetFormatError(str(path), "PGM okunamadı")
    return (img > 127).astype(np.float64)


def write_gray(path, values: np.ndarray):
    """[0,1] sürekli harita (opaklık, belirsizlik) -> P5 PGM, round(255·v)"""
    img = np.round(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(path), img, [cv2.IMWRITE_PXM_BINARY, 1]):
        raise FileOperationError(str(path), "Image Write")


def read_gray(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise DatasetFormatError(str(path), "PGM okunamadı")
    return img.astype(np.float64) / 255.0


def write_flow_grid(path, flow: np.ndarray):
    """(H, W, 2) akış -> metin ızgarası, satır başına W adet "dx dy" çifti"""
    flow = np.asarray(flow, dtype=np.float64)
    h, w = flow.shape[:2]
    np.savetxt(path, flow[..., :2].reshape(h, w * 2), fmt='%.9g')


def read_flow_grid(path) -> np.ndarray:
    try:
        rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as e:
        raise DatasetFormatError(str(path), str(e))
    if rows.shape[1] % 2:
        raise DatasetFormatError(str(path), f"tek sayıda sütun: {rows.shape[1]}")
    return rows.reshape(rows.shape[0], rows.shape[1] // 2, 2)


def write_rows(path, rows: np.ndarray):
    np.savetxt(path, np.asarray(rows, dtype=np.float64).reshape(len(rows), -1), fmt='%.17g')


def read_rows(path, width: int) -> np.ndarray:
    try:
        rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as e:
        raise DatasetFormatError(str(path), str(e))
    if rows.shape[1] != width:
        raise DatasetFormatError(str(path), f"satır başına {width} sayı bekleniyordu, {rows.shape[1]} geldi")
    return rows


def content_hash(path) -> str:
    """Dizindeki tüm dosyaların (sıralı göreli yol + içerik) SHA-256 özeti"""
    root = Path(path)
    digest = hashlib.sha256()
    for file in sorted(p for p in root.rglob('*') if p.is_file()):
        digest.update(file.relative_to(root).as_posix().encode('utf-8'))
        digest.update(b'\0')
        digest.update(file.read_bytes())
    return digest.hexdigest()


# =============================================================================
# Veri seti
# =============================================================================

@dataclass
class Dataset:
    """
    Belleğe yüklenmiş veri seti (global kare numaralandırması ile)

    Attributes:
        rgb: (T, H, W, 3) [0,1]
        silhouette: (T, H, W) {0,1}
        features: (T, H, W, 16) piksel öznitelikleri (arka planda sıfır)
        flow: ofset -> (T, H, W, 3) [dx, dy, geçerli]
        poses: (T, 3, 4) referans kök pozları G^t
        cameras: (T, 6) fx fy cx cy H W
    """
    root: Path
    name: str
    index: FrameIndex
    rgb: np.ndarray
    silhouette: np.ndarray
    features: np.ndarray
    flow: Dict[int, np.ndarray]
    poses: np.ndarray
    cameras: np.ndarray
    video_ids: List[int] = field(default_factory=list)
    has_ground_truth: bool = False

    @property
    def num_frames(self) -> int:
        return self.index.num_frames

    @property
    def num_videos(self) -> int:
        return len(self.video_ids)

    @property
    def height(self) -> int:
        return self.index.height

    @property
    def width(self) -> int:
        return self.index.width

    def observed_flow(self, frames: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                      offsets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(R,2) gözlenen akış ve (R,) geçerlilik"""
        flow = np.zeros((len(frames), 2))
        valid = np.zeros(len(frames), dtype=bool)
        for k in np.unique(offsets):
            sel = offsets == k
            grid = self.flow.get(int(k))
            if grid is None:
                continue
            values = grid[frames[sel], rows[sel], cols[sel]]
            flow[sel] = values[:, :2]
            valid[sel] = values[:, 2] > 0.5
        return flow, valid

    def frame_of(self, video: int, local: int) -> int:
        return int(self.index.video_start[video] + local)

    def ground_truth_paths(self, frame: int) -> Tuple[Path, Path]:
        video = int(self.index.video[frame])
        stem = frame_stem(int(self.index.local[frame]))
        gdir = self.root / 'gt' / video_dir_name(video)
        return gdir / f"{stem}.ply", gdir / f"{stem}_points.raw"

    def ground_truth_points(self, frame: int) -> np.ndarray:
        _, points = self.ground_truth_paths(frame)
        if not points.is_file():
            raise DatasetValidationError(str(self.root), f"referans nokta bulutu yok: {points.name}")
        return read_raw(points).reshape(-1, 3)

    def script(self) -> Optional[dict]:
        path = self.root / SCRIPT_NAME
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding='utf-8'))


def read_manifest(path) -> dict:
    manifest_path = Path(path) / MANIFEST_NAME
    try:
        return json.loads(manifest_path.read_text(encoding='utf-8'))
    except (OSError, ValueError) as e:
        raise DatasetFormatError(str(manifest_path), str(e))


def load_dataset(path, offsets: Sequence[int] = FLOW_OFFSETS) -> Dataset:
    """
    Veri setini doğrula ve belleğe yükle.

    Raises:
        DatasetValidationError: eksik dosya (ör. siluet) veya tutarsız boyut
        DatasetFormatError: okunamayan dosya
    """
    root = Path(path)
    ok, msg = validate_dataset_dir(str(root))
    if not ok:
        raise DatasetValidationError(str(root), msg)

    manifest = read_manifest(root)
    height, width = (int(v) for v in manifest['image_size'])
    videos = sorted(manifest['videos'], key=lambda v: int(v['id']))
    lengths = [int(v['frames']) for v in videos]
    index = FrameIndex.from_lengths(lengths, height, width)

    rgb, sil, feat, poses, cams = [], [], [], [], []
    flows: Dict[int, List[np.ndarray]] = {s * k: [] for k in offsets for s in (1, -1)}

    for video, length in zip(videos, lengths):
        vdir = root / video['dir']
        pose_rows = read_rows(vdir / 'poses.txt', 12)
        cam_rows = read_rows(vdir / 'cameras.txt', 6)
        if len(pose_rows) != length or len(cam_rows) != length:
            raise DatasetValidationError(str(vdir), f"{length} kare için poz/kamera satır sayısı uyuşmuyor")
        poses.append(pose_rows.reshape(length, 3, 4))
        cams.append(cam_rows)

        for t in range(length):
            stem = vdir / frame_stem(t)
            image = read_rgb(f"{stem}_rgb.ppm")
            mask = read_mask(f"{stem}_sil.pgm")
            features = read_raw(f"{stem}_feat.raw")
            if image.shape[:2] != (height, width) or mask.shape != (height, width):
                raise DatasetValidationError(str(stem), f"görüntü boyutu {height}x{width} değil")
            if features.shape != (height, width, EMBEDDING_DIM):
                raise DatasetValidationError(str(stem), f"öznitelik boyutu {features.shape}")
            rgb.append(image)
            sil.append(mask)
            feat.append(features)
            for k in flows:
                fpath = Path(f"{stem}{flow_suffix(k)}")
                flows[k].append(read_raw(fpath) if fpath.is_file() else np.zeros((height, width, 3)))

    dataset = Dataset(
        root=root,
        name=str(manifest.get('name', root.name)),
        index=index,
        rgb=np.stack(rgb),
        silhouette=np.stack(sil),
        features=np.stack(feat),
        flow={k: np.stack(v) for k, v in flows.items()},
        poses=np.concatenate(poses),
        cameras=np.concatenate(cams),
        video_ids=[int(v['id']) for v in videos],
        has_ground_truth=bool(manifest.get('has_ground_truth', False)),
    )
    logger.info(f"Veri seti yüklendi: {dataset.name} ({dataset.num_videos} video, "
                f"{dataset.num_frames} kare, {height}x{width})")
    return dataset


def write_manifest(path, name: str, height: int, width: int, lengths: Sequence[int],
                   has_ground_truth: bool):
    manifest = {
        'name': name,
        'image_size': [int(height), int(width)],
        'videos': [{'id': v, 'dir': video_dir_name(v), 'frames': int(n)} for v, n in enumerate(lengths)],
        'has_ground_truth': bool(has_ground_truth),
    }
    (Path(path) / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding='utf-8')
    return manifest
