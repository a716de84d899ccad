"""
Animatable Model Builder - Loglama
==================================
Uygulama logu (dosya + konsol) ve iterasyon başına metrik logu.

Metrik logu ayrı bir logger ('amb.metrics') üzerinden, her satırda bir
iterasyon olacak şekilde 'anahtar=değer' kayıtları yazar.
"""

import os
import time
import logging
from datetime import datetime
from typing import Dict, Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
METRICS_LOGGER_NAME = 'amb.metrics'


def setup_logging(level: str = 'INFO', log_dir: Optional[str] = None) -> logging.Logger:
    """
    Loglama sistemini yapılandır

    Args:
        level: Log seviyesi (DEBUG, INFO, ...)
        log_dir: Log dosyası dizini; None ise sadece konsol

    Returns:
        Uygulama logger'ı
    """
    handlers = [logging.StreamHandler()]
    if log_dir is not None:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, f'run_{datetime.now().strftime("%Y%m%d")}.log')
        handlers.insert(0, logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    return logging.getLogger('AnimatableModelBuilder')


class MetricsLogger:
    """
    İterasyon metrik logu

    Her çağrıda tek satır yazar:
        iteration=12 rgb=1.234500000e-02 ... total=... beta=... alpha_s=...
    Değerler sabit biçimde yazılır; aynı tohumla iki koşu aynı dosyayı üretir
    (wall_time kapalıyken).
    """

    def __init__(self, path: Optional[str] = None, wall_time: bool = False, append: bool = False):
        self.path = path
        self.wall_time = wall_time
        self._start = time.perf_counter()
        self._logger = logging.getLogger(METRICS_LOGGER_NAME)
        self._logger.setLevel(logging.INFO)
        self._logger.propagate = False
        self._handler: Optional[logging.Handler] = None

        if path is not None:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            self._handler = logging.FileHandler(path, mode='a' if append else 'w', encoding='utf-8')
            self._handler.setFormatter(logging.Formatter('%(message)s'))
            self._logger.addHandler(self._handler)

    @staticmethod
    def format_record(iteration: int, values: Dict[str, float]) -> str:
        parts = [f"iteration={iteration}"]
        parts.extend(f"{key}={float(value):.9e}" for key, value in values.items())
        return ' '.join(parts)

    def log(self, iteration: int, values: Dict[str, float]) -> str:
        """Bir iterasyonun metriklerini yaz; yazılan satırı döndür"""
        record = dict(values)
        if self.wall_time:
            record['wall_time'] = time.perf_counter() - self._start
        line = self.format_record(iteration, record)
        self._logger.info(line)
        return line

    def close(self):
        if self._handler is not None:
            self._logger.removeHandler(self._handler)
            self._handler.close()
            self._handler = None

    def __enter__(self) -> 'MetricsLogger':
        return self

    def __exit__(self, *exc):
        self.close()


def parse_metrics_line(line: str) -> Dict[str, float]:
    """'anahtar=değer' satırını sözlüğe çevir (iteration int olarak)"""
    out: Dict[str, float] = {}
    for token in line.split():
        key, _, value = token.partition('=')
        out[key] = int(value) if key == 'iteration' else float(value)
    return out
