"""
Animatable Model Builder - Sabitler
===================================
Uygulama genelinde kullanılan sabitler ve enum değerleri
"""

from enum import Enum, IntEnum


# ============================================================================
# Uygulama Sabitleri
# ============================================================================

APP_NAME = "Animatable Model Builder"
APP_VERSION = "1.0.0"
CHECKPOINT_VERSION = 1


class ExitCode(IntEnum):
    """CLI çıkış kodları"""
    SUCCESS = 0
    USAGE = 1
    INPUT_VALIDATION = 2
    NUMERICAL_FAILURE = 3


# ============================================================================
# Model Sabitleri
# ============================================================================

NUM_BONES = 25                 # B
ENV_CODE_DIM = 64              # ω_e
ROOT_CODE_DIM = 128            # ω_r
BODY_CODE_DIM = 128            # ω_b, ω_b*
EMBEDDING_DIM = 16             # ψ

XYZ_FREQUENCIES = 10           # 3D noktalar için konumsal kodlama
DIR_FREQUENCIES = 4            # görüş yönü için konumsal kodlama

FIELD_HIDDEN = (128, 128, 128, 128, 128)   # MLP_SDF / MLP_c / MLP_ψ
SMALL_HIDDEN = (64, 64)                    # MLP_G / MLP_J / MLP_Δ
UNCERTAINTY_HIDDEN = (64, 64, 64, 64)      # MLP_U: 4 gizli + çıkış = 5 katman
UNCERTAINTY_FREQUENCIES = 4     # MLP_U girdisi (x, y, t) için konumsal kodlama

SDF_INIT_RADIUS = 0.3
BONE_INIT_PRECISION = 20.0

BETA_INIT = 0.1
BETA_FINAL = 0.01
ALPHA_S_INIT = 10.0


# ============================================================================
# Render Sabitleri
# ============================================================================

SAMPLES_PER_RAY = 128          # N
OPACITY_THRESHOLD = 0.2        # τ_min
NEAR_FAR_MARGIN = 0.2          # ε_L = 0.2 (max - min)
MIN_NEAR_DEPTH = 1e-3
ROOT_INIT_TRANSLATION = (0.0, 0.0, 3.0)


# ============================================================================
# Örnekleme / Optimizasyon Sabitleri
# ============================================================================

PIXELS_PER_BATCH = 8192        # N^p
ACTIVE_PIXELS = 8192           # N^a
ACTIVE_CANDIDATES = 32768      # N^a'
FLOW_OFFSETS = (1, 2)          # t' = t ± k

GRID_SIZE = 20                 # V*: 20 x 20 x 20
BOUNDS_REFRESH_EVERY = 200
BOUNDS_MC_RESOLUTION = 64

BUDGET_FLOOR = 2000
WARMUP_FRACTION = 0.1
LR_DECAY_FLOOR = 0.1           # kosinüs azalma: başlangıç oranının %10'u

DEFAULT_SEED = 0


class RootInitMode(str, Enum):
    """Kök poz başlatma modları"""
    GROUND_TRUTH_NOISY = "ground-truth-noisy"
    IDENTITY = "identity"


class DeformationMode(str, Enum):
    """Deformasyon modeli"""
    SKINNING = "skinning"
    SE3_FIELD = "se3-field"
    TRANSLATION_FIELD = "translation-field"


class Ablation(str, Enum):
    """CLI --ablate anahtarları"""
    NO_CANONICAL_EMBEDDING = "no-canonical-embedding"
    NO_FLOW = "no-flow"
    NO_ACTIVE_SAMPLING = "no-active-sampling"
    NO_ROOT_INIT = "no-root-init"
    NO_DELTA_SKINNING = "no-delta-skinning"
    NO_GAUSSIAN_SKINNING = "no-gaussian-skinning"


# Kayıp terimleri (log sırası)
LOSS_TERMS = ('rgb', 'sil', 'flow', 'match', 'cyc2d', 'cyc3d', 'unc')

DEFAULT_LOSS_WEIGHTS = {
    'rgb': 1.0,
    'sil': 1.0,
    'flow': 0.5,
    'match': 0.1,
    'cyc2d': 0.1,
    'cyc3d': 0.1,
    'unc': 1.0,
}


# ============================================================================
# Değerlendirme
# ============================================================================

EVAL_SAMPLES = 10000           # yüzey başına alan-düzgün örnek
FIXTURE_EXTENT_CM = 100.0      # referans kutunun en uzun kenarı = 1 m
ICP_ITERATIONS = 20
