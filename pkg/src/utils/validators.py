"""
Animatable Model Builder - Girdi Doğrulama
==========================================
CLI ve veri seti yükleyicisi için doğrulama fonksiyonları.

Fonksiyonlar istisna fırlatmaz; (geçerli_mi, ..., hata_mesajı) tuple'ı döndürür.
Hata fırlatma kararı çağırana aittir.
"""

import math
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

# Her kare için zorunlu dosya sonekleri
REQUIRED_FRAME_SUFFIXES = ('_rgb.ppm', '_sil.pgm', '_feat.raw')
REQUIRED_VIDEO_FILES = ('poses.txt', 'cameras.txt')


def validate_image_size(height: Any, width: Any) -> Tuple[bool, str]:
    """
    Görüntü boyutu validasyonu

    Returns:
        (geçerli_mi, hata_mesajı) tuple'ı
    """
    try:
        h, w = int(height), int(width)
    except (TypeError, ValueError):
        return False, "Görüntü boyutu tam sayı olmalı"

    if h < 2 or w < 2:
        return False, f"Görüntü en az 2x2 olmalı (gelen {h}x{w})"
    return True, ""


def validate_intrinsics(fx: float, fy: float, cx: float, cy: float,
                        height: int, width: int) -> Tuple[bool, str]:
    """
    Pinhole kamera parametreleri validasyonu (fx, fy > 0; 0 <= c < boyut)
    """
    if not all(math.isfinite(v) for v in (fx, fy, cx, cy)):
        return False, "Kamera parametreleri sonlu olmalı"
    if fx <= 0 or fy <= 0:
        return False, f"Odak uzaklıkları pozitif olmalı (fx={fx}, fy={fy})"
    if not (0 <= cx < width) or not (0 <= cy < height):
        return False, f"Ana nokta görüntü dışında: ({cx}, {cy}) / {width}x{height}"
    return True, ""


def validate_bounds(bounds: Sequence[Sequence[float]]) -> Tuple[bool, str]:
    """
    Eksen hizalı sınır validasyonu

    Args:
        bounds: [(x_min, x_max), (y_min, y_max), (z_min, z_max)]
    """
    if len(bounds) != 3:
        return False, f"Üç eksen aralığı bekleniyordu, {len(bounds)} geldi"

    for axis, interval in zip('xyz', bounds):
        if len(interval) != 2:
            return False, f"{axis} ekseni (min, max) çifti olmalı"
        lo, hi = float(interval[0]), float(interval[1])
        if not (math.isfinite(lo) and math.isfinite(hi)):
            return False, f"{axis} ekseni sonlu olmalı"
        if lo >= hi:
            return False, f"{axis} ekseninde min < max olmalı ({lo} >= {hi})"
    return True, ""


def validate_video_selection(text: str, num_videos: int) -> Tuple[bool, Optional[List[int]], str]:
    """
    '[Fit] videos' değeri validasyonu ('all' veya '0,2' gibi liste)

    Returns:
        (geçerli_mi, video_listesi, hata_mesajı) tuple'ı
    """
    text = (text or '').strip().lower()
    if text in ('', 'all'):
        return True, list(range(num_videos)), ""

    try:
        ids = sorted({int(p) for p in text.split(',') if p.strip()})
    except ValueError:
        return False, None, f"Video listesi tam sayılardan oluşmalı: {text}"

    if not ids:
        return False, None, "En az bir video seçilmeli"
    bad = [i for i in ids if i < 0 or i >= num_videos]
    if bad:
        return False, None, f"Veri setinde olmayan videolar: {bad} (toplam {num_videos})"
    return True, ids, ""


def validate_dataset_dir(path: str) -> Tuple[bool, str]:
    """
    Veri seti dizininin optimizasyon için eksiksiz olduğunu kontrol et.

    Manifest, her video için poz/kamera dosyaları ve her kare için
    RGB, siluet ve öznitelik görüntüleri aranır.
    """
    import json

    root = Path(path)
    manifest_path = root / 'manifest.json'
    if not manifest_path.is_file():
        return False, f"manifest.json bulunamadı: {root}"

    try:
        manifest = json.loads(manifest_path.read_text(encoding='utf-8'))
    except (OSError, ValueError) as e:
        return False, f"manifest.json okunamadı: {e}"

    videos = manifest.get('videos')
    if not videos:
        return False, "Manifest video listesi boş"

    size = manifest.get('image_size', [0, 0])
    ok, msg = validate_image_size(*size)
    if not ok:
        return False, msg

    for video in videos:
        vdir = root / video['dir']
        if int(video.get('frames', 0)) < 2:
            return False, f"{video['dir']}: en az 2 kare gerekli"
        for name in REQUIRED_VIDEO_FILES:
            if not (vdir / name).is_file():
                return False, f"Eksik dosya: {video['dir']}/{name}"
        for t in range(int(video['frames'])):
            for suffix in REQUIRED_FRAME_SUFFIXES:
                fname = f"frame_{t:04d}{suffix}"
                if not (vdir / fname).is_file():
                    return False, f"Eksik dosya: {video['dir']}/{fname}"

    return True, ""
