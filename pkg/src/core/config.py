"""
Animatable Model Builder - Merkezi Konfigürasyon Yöneticisi
===========================================================
INI dosyasını okur ve uygulama genelinde erişim sağlar.

Bilinmeyen bölüm veya anahtarlar kesin hatadır: yanlış yazılmış bir
hiper-parametre sessizce varsayılana düşmemeli.
"""

import os
import logging
from configparser import ConfigParser, Error as ConfigParserError
from typing import Any, Optional, Tuple

from src.utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "AMB"


class ConfigManager:
    """
    Merkezi konfigürasyon yöneticisi

    Özellikler:
    - INI dosyasını okur (# ve ; yorumları desteklenir)
    - Environment variable desteği (AMB_<BÖLÜM>_<ANAHTAR>)
    - Varsayılan değerler; bilinmeyen anahtarlar hata verir
    - Type-safe erişim metodları
    """

    # Varsayılan değerler (tam ölçek)
    DEFAULTS = {
        'Run': {
            'seed': '0',
            'threads': '1',
        },
        'Fit': {
            'iterations': 'auto',
            'iteration_floor': '2000',
            'pixels_per_batch': '8192',
            'active_pixels': '8192',
            'active_candidates': '32768',
            'lr_mlp': '5e-4',
            'lr_code': '5e-3',
            'lr_bone': '5e-3',
            'lr_pixel_embedding': '5e-4',
            'lr_decay_floor': '0.1',
            'adam_beta1': '0.9',
            'adam_beta2': '0.999',
            'adam_eps': '1e-8',
            'beta_start': '0.1',
            'beta_end': '0.01',
            'alpha_s_init': '10.0',
            'warmup_fraction': '0.1',
            'root_init': 'ground-truth-noisy',
            'root_init_max_degrees': '15.0',
            'bones': '25',
            'deformation': 'skinning',
            'videos': 'all',
            'grid_size': '20',
            'bounds_refresh_every': '200',
            'bounds_resolution': '64',
            'initial_bounds': '-1.0, -1.0, -1.0, 1.0, 1.0, 1.0',
            'checkpoint_every': '1000',
            'preview_every': '0',
            'field_width': '128',
            'field_depth': '5',
            'small_width': '64',
            'small_depth': '2',
            'xyz_frequencies': '10',
            'dir_frequencies': '4',
        },
        'Loss': {
            'rgb': '1.0',
            'sil': '1.0',
            'flow': '0.5',
            'match': '0.1',
            'cyc2d': '0.1',
            'cyc3d': '0.1',
            'unc': '1.0',
        },
        'Render': {
            'samples_per_ray': '128',
            'opacity_threshold': '0.2',
            'near_far_margin': '0.2',
            'background': '0.0, 0.0, 0.0',
            'chunk': '65536',
        },
        'Ablation': {
            'disable_canonical_embedding': 'false',
            'disable_flow': 'false',
            'disable_active_sampling': 'false',
            'disable_root_init': 'false',
            'disable_delta_skinning': 'false',
            'disable_gaussian_skinning': 'false',
        },
        'Logging': {
            'level': 'INFO',
            'metrics_wall_time': 'false',
        },
    }

    def __init__(self, config_path: Optional[str] = None):
        """
        Args:
            config_path: INI dosya yolu (opsiyonel; yoksa sadece varsayılanlar)
        """
        self._config = ConfigParser(inline_comment_prefixes=('#', ';'))
        self._config_path = config_path

        # Varsayılanları yükle
        self._load_defaults()

        # INI dosyasını oku
        if config_path is not None:
            self._load_config_file(config_path)
            logger.info(f"Konfigürasyon yüklendi: {config_path}")

    def _load_defaults(self):
        """Varsayılan değerleri yükle"""
        for section, values in self.DEFAULTS.items():
            if not self._config.has_section(section):
                self._config.add_section(section)
            for key, value in values.items():
                self._config.set(section, key, value)

    def _load_config_file(self, path: str):
        """INI dosyasını oku; bilinmeyen bölüm/anahtarları reddet"""
        if not os.path.exists(path):
            raise ConfigurationError(path, f"Konfigürasyon dosyası bulunamadı: {path}")

        user = ConfigParser(inline_comment_prefixes=('#', ';'))
        try:
            user.read(path, encoding='utf-8')
        except ConfigParserError as e:
            raise ConfigurationError(path, f"Konfigürasyon okunamadı: {e}")

        for section in user.sections():
            if section not in self.DEFAULTS:
                raise ConfigurationError(f"[{section}]", f"Bilinmeyen bölüm: [{section}]")
            for key, value in user.items(section, raw=True):
                if key not in self.DEFAULTS[section]:
                    raise ConfigurationError(f"{section}.{key}", f"Bilinmeyen anahtar: {section}.{key}")
                self._config.set(section, key, value)

    # =========================================================================
    # Generic Accessors
    # =========================================================================

    def get(self, section: str, key: str, fallback: Any = None) -> str:
        """
        Değer oku (environment variable öncelikli)

        Args:
            section: Bölüm adı
            key: Anahtar
            fallback: Varsayılan değer

        Returns:
            Değer (str)
        """
        if section not in self.DEFAULTS or key not in self.DEFAULTS[section]:
            raise ConfigurationError(f"{section}.{key}", f"Bilinmeyen anahtar: {section}.{key}")

        # Environment variable kontrolü (PREFIX_SECTION_KEY formatında)
        env_key = f"{ENV_PREFIX}_{section.upper()}_{key.upper()}"
        env_value = os.environ.get(env_key)
        if env_value is not None:
            return env_value

        return self._config.get(section, key, fallback=fallback)

    def get_int(self, section: str, key: str) -> int:
        """Integer değer oku"""
        value = self.get(section, key)
        try:
            return int(value)
        except ValueError:
            raise ConfigurationError(f"{section}.{key}", f"Tam sayı bekleniyordu: {section}.{key} = {value}")

    def get_float(self, section: str, key: str) -> float:
        """Float değer oku"""
        value = self.get(section, key)
        try:
            return float(value)
        except ValueError:
            raise ConfigurationError(f"{section}.{key}", f"Sayı bekleniyordu: {section}.{key} = {value}")

    def get_bool(self, section: str, key: str) -> bool:
        """Boolean değer oku"""
        value = self.get(section, key).strip().lower()
        if value in ('true', '1', 'yes', 'on'):
            return True
        if value in ('false', '0', 'no', 'off'):
            return False
        raise ConfigurationError(f"{section}.{key}", f"Boolean bekleniyordu: {section}.{key} = {value}")

    def get_floats(self, section: str, key: str, count: int) -> Tuple[float, ...]:
        """Virgülle ayrılmış float listesi oku"""
        value = self.get(section, key)
        try:
            parts = tuple(float(p) for p in value.split(','))
        except ValueError:
            raise ConfigurationError(f"{section}.{key}", f"Sayı listesi bekleniyordu: {value}")
        if len(parts) != count:
            raise ConfigurationError(f"{section}.{key}", f"{count} değer bekleniyordu, {len(parts)} geldi")
        return parts

    # =========================================================================
    # Typed Accessors (Kolaylık metodları)
    # =========================================================================

    @property
    def config_path(self) -> Optional[str]:
        """Okunan INI dosyası"""
        return self._config_path

    @property
    def seed(self) -> int:
        return self.get_int('Run', 'seed')

    @property
    def threads(self) -> int:
        return self.get_int('Run', 'threads')

    @property
    def log_level(self) -> str:
        """Log seviyesi"""
        return self.get('Logging', 'level')

    # =========================================================================
    # Utility Methods
    # =========================================================================

    def save(self, path: str):
        """Konfigürasyonu dosyaya kaydet (çalıştırma anlık görüntüsü)"""
        try:
            with open(path, 'w', encoding='utf-8') as f:
                self._config.write(f)
            logger.info(f"Konfigürasyon kaydedildi: {path}")
        except OSError as e:
            logger.error(f"Konfigürasyon kaydedilemedi: {e}")
            raise

    def set(self, section: str, key: str, value: Any):
        """Değer ayarla"""
        if section not in self.DEFAULTS or key not in self.DEFAULTS[section]:
            raise ConfigurationError(f"{section}.{key}", f"Bilinmeyen anahtar: {section}.{key}")
        self._config.set(section, key, str(value))

    def to_dict(self) -> dict:
        """Tüm konfigürasyonu sözlük olarak döndür (env override'lar dahil)"""
        return {
            section: {key: self.get(section, key) for key in keys}
            for section, keys in self.DEFAULTS.items()
        }
