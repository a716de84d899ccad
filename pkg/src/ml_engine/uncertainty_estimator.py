"""
Animatable Model Builder - Uncertainty Estimation Modülü
=========================================================
Piksel başına renk hatasını tahmin eden küçük ağ (MLP_U).

- Girdi: normalize edilmiş (x, y, t), konumsal kodlanmış
- Çıktı: beklenen renk kaybı (softplus ile negatif olmayan)
- Kayıp: ayrılmış (detach) hata değerlerine karşı ortalama mutlak hata;
  gradyan sadece MLP_U'ya gider.

Aktif örnekleme, optimizasyonun ikinci yarısında yüksek belirsizlikli
pikselleri seçmek için bu tahminleri kullanır.
"""

import logging
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.core.constants import UNCERTAINTY_FREQUENCIES, UNCERTAINTY_HIDDEN
from src.core.geometry import DTYPE
from src.ml_engine.nnet import Mlp, MlpSpec

logger = logging.getLogger(__name__)


class UncertaintyEstimator(nn.Module):
    """
    MLP_U: (x, y, t) -> tahmini renk hatası

    4 gizli katman + çıkış katmanı = 5 katman.
    """

    def __init__(self, height: int, width: int, num_frames: int,
                 hidden: Sequence[int] = UNCERTAINTY_HIDDEN):
        super().__init__()
        self.height = height
        self.width = width
        self.num_frames = num_frames
        self.mlp = Mlp(MlpSpec(3, tuple(hidden), 1, 'softplus', UNCERTAINTY_FREQUENCIES))

    def normalize_inputs(self, frames, rows, cols) -> torch.Tensor:
        """Piksel merkezleri ve kare indeksi [-1, 1] aralığına"""
        frames, rows, cols = (torch.as_tensor(a, dtype=DTYPE) for a in (frames, rows, cols))
        x = (cols + 0.5) / self.width * 2.0 - 1.0
        y = (rows + 0.5) / self.height * 2.0 - 1.0
        t = (frames + 0.5) / max(self.num_frames, 1) * 2.0 - 1.0
        return torch.stack([x, y, t], dim=-1)

    def forward(self, frames, rows, cols) -> torch.Tensor:
        return F.softplus(self.mlp(self.normalize_inputs(frames, rows, cols))[..., 0])

    def score(self, frames, rows, cols) -> np.ndarray:
        """Aday pikseller için belirsizlik skoru (gradyansız)"""
        with torch.no_grad():
            return self.forward(frames, rows, cols).numpy()


def loss_uncertainty(errors: torch.Tensor, predictions: torch.Tensor) -> torch.Tensor:
    """
    L_U = mean |Û − stop_grad(e)|

    Args:
        errors: (R,) örnek başına renk hatası
        predictions: (R,) MLP_U çıktısı
    """
    return (predictions - errors.detach()).abs().mean()

