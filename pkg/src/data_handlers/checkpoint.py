"""
Animatable Model Builder - Checkpoint Dosyaları
===============================================
Optimizasyon durumunun (model tensörleri, Adam momentleri, adım sayacı,
rastgele sayı üreteçleri, kanonik sınırlar) tek dosyada saklanması.

Aynı checkpoint'ten devam eden koşu, kesintisiz koşunun karşılık gelen
adımını bit düzeyinde tekrar eder (tek iş parçacığında).
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import torch

from src.core.constants import CHECKPOINT_VERSION
from src.utils.exceptions import CheckpointError

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ('version', 'iteration', 'model_config', 'model', 'store', 'numpy_rng',
                 'torch_rng', 'fit_config', 'dataset')


def state_payload(state) -> Dict[str, Any]:
    """FitState -> serileştirilebilir sözlük"""
    return {
        'version': CHECKPOINT_VERSION,
        'iteration': int(state.iteration),
        'total_iterations': int(state.total_iterations),
        'model_config': state.model.config.to_dict(),
        'model': state.model.state_dict(),
        'store': state.store.state_dict(),
        'numpy_rng': state.rng.bit_generator.state,
        'torch_rng': state.generator.get_state(),
        'fit_config': state.config.to_dict(),
        'dataset': dict(state.dataset_meta),
        'retarget': bool(state.retarget),
    }


def save_checkpoint(path, state) -> str:
    """
    Durumu diske yaz (önce geçici dosya, sonra atomik yeniden adlandırma)

    Returns:
        Yazılan dosya yolu
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + '.tmp')
    try:
        torch.save(state_payload(state), tmp)
        os.replace(tmp, path)
    except OSError as e:
        raise CheckpointError(str(path), f"Checkpoint yazılamadı: {e}")
    logger.info(f"Checkpoint kaydedildi: {path} (iterasyon {state.iteration})")
    return str(path)


def load_checkpoint(path, expected_dataset: Optional[dict] = None) -> Dict[str, Any]:
    """
    Checkpoint'i oku ve sürüm/alan uyumunu doğrula

    Args:
        expected_dataset: verilirse kare sayıları ve görüntü boyutu karşılaştırılır

    Raises:
        CheckpointError: dosya yok, bozuk, sürüm veya veri seti uyumsuz
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(str(path), f"Checkpoint bulunamadı: {path}")
    try:
        payload = torch.load(path, map_location='cpu', weights_only=False)
    except Exception as e:
        raise CheckpointError(str(path), f"Checkpoint okunamadı: {e}")

    if not isinstance(payload, dict) or any(k not in payload for k in REQUIRED_KEYS):
        raise CheckpointError(str(path), "Checkpoint alanları eksik")
    if payload['version'] != CHECKPOINT_VERSION:
        raise CheckpointError(str(path), f"Checkpoint sürümü {payload['version']}, beklenen {CHECKPOINT_VERSION}")

    if expected_dataset is not None:
        for key in ('lengths', 'image_size'):
            if key in expected_dataset and list(payload['dataset'].get(key, [])) != list(expected_dataset[key]):
                raise CheckpointError(
                    str(path), f"Veri seti uyumsuz ({key}): {payload['dataset'].get(key)} != {expected_dataset[key]}")
    logger.debug(f"Checkpoint yüklendi: {path} (iterasyon {payload['iteration']})")
    return payload
