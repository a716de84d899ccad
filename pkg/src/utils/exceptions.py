"""
Animatable Model Builder - Custom Exception Sınıfları
=====================================================
Uygulama genelinde kullanılan özelleştirilmiş hata sınıfları.

Her hata sınıfı bir CLI çıkış kodu taşır:
    1 kullanım hatası, 2 girdi doğrulama, 3 sayısal hata
"""

import logging
from typing import Optional, Any

logger = logging.getLogger(__name__)


class ModelBuilderException(Exception):
    """
    Tüm uygulama hatalarının temel sınıfı

    Attributes:
        message: Teknik hata mesajı (log için)
        user_message: Kullanıcı dostu mesaj (CLI çıktısı için)
        exit_code: CLI çıkış kodu
    """

    exit_code = 1

    def __init__(self, message: str, user_message: Optional[str] = None):
        self.message = message
        self.user_message = user_message or self._get_default_user_message()
        super().__init__(self.message)
        self._log()

    def _get_default_user_message(self) -> str:
        """Varsayılan kullanıcı mesajı"""
        return "Beklenmeyen bir hata oluştu."

    def _log(self):
        """Hatayı logla"""
        logger.debug(f"{self.__class__.__name__}: {self.message}")


# ============================================================================
# Geometri Hataları
# ============================================================================

class GeometryError(ModelBuilderException):
    """Kamera ve rijit dönüşüm hesaplarında oluşan hatalar"""

    exit_code = 3

    def _get_default_user_message(self) -> str:
        return "Geometri hesabı başarısız oldu."


class NonPositiveDepth(GeometryError):
    """Nokta kameranın arkasında veya görüntü düzleminde (Z <= 0)"""

    def __init__(self, depth: float):
        self.depth = depth
        super().__init__(f"Projeksiyon için derinlik pozitif olmalı: Z={depth}")

    def _get_default_user_message(self) -> str:
        return "Nokta kameranın arkasında kaldı."


class DegenerateCloud(GeometryError):
    """Nokta bulutunun kovaryans rankı 2'den küçük"""

    def __init__(self, size: int, rank: int):
        self.size = size
        self.rank = rank
        super().__init__(f"Dejenere nokta bulutu: {size} nokta, kovaryans rankı {rank}")

    def _get_default_user_message(self) -> str:
        return "Hizalama için nokta bulutu yetersiz (en az iki boyutlu yayılım gerekli)."


# ============================================================================
# Render Hataları
# ============================================================================

class RenderError(ModelBuilderException):
    """Hacim render işlemlerinde oluşan hatalar"""

    exit_code = 3

    def _get_default_user_message(self) -> str:
        return "Render işlemi başarısız oldu."


class InvalidNearFar(RenderError):
    """Yakın/uzak düzlemler veya örnek sayısı geçersiz"""

    def __init__(self, near: float, far: float, samples: Optional[int] = None):
        self.near = near
        self.far = far
        self.samples = samples
        super().__init__(f"Geçersiz yakın/uzak aralığı: near={near}, far={far}, N={samples}")


class LowOpacity(RenderError):
    """Işın opaklığı eşik değerinin altında; piksel öznitelik kayıplarından çıkarılır"""

    def __init__(self, opacity: float, threshold: float):
        self.opacity = opacity
        self.threshold = threshold
        super().__init__(f"Opaklık eşik altında: {opacity:.4f} < {threshold}")


class DegenerateDepths(RenderError):
    """Köşe derinlikleri tek bir değere çöktü"""

    def __init__(self, depth: float):
        self.depth = depth
        super().__init__(f"Köşe derinlikleri dejenere (min = max = {depth})")


# ============================================================================
# Kayıt (Registration) Hataları
# ============================================================================

class RegistrationError(ModelBuilderException):
    """Kanonik ızgara ve piksel gömme işlemlerindeki hatalar"""

    exit_code = 2


class InvalidBounds(RegistrationError):
    """Eksen hizalı sınırlar geçersiz (sonsuz veya min >= max)"""

    def __init__(self, bounds: Any):
        self.bounds = bounds
        super().__init__(f"Geçersiz kanonik sınırlar: {bounds}")


class EmptySurface(RegistrationError):
    """Yüzey çıkarılamadı; önceki sınırlar korunur"""

    exit_code = 3

    def __init__(self, reason: str = "işaret değişimi yok"):
        self.reason = reason
        super().__init__(f"Boş yüzey: {reason}")

    def _get_default_user_message(self) -> str:
        return "Geometri çöktü; yüzey bulunamadı."


class SizeMismatch(RegistrationError):
    """Öznitelik görüntüsü kare boyutu ile uyuşmuyor"""

    def __init__(self, expected: tuple, actual: tuple):
        self.expected = expected
        self.actual = actual
        super().__init__(f"Boyut uyuşmazlığı: beklenen {expected}, gelen {actual}")


# ============================================================================
# Mesh Hataları
# ============================================================================

class MeshError(ModelBuilderException):
    """Yüzey çıkarma ve değerlendirme hataları"""

    exit_code = 3


class EmptyCloud(MeshError):
    """Chamfer için boş nokta bulutu"""

    def __init__(self, which: str):
        self.which = which
        super().__init__(f"Boş nokta bulutu: {which}")


# ============================================================================
# Sayısal Hatalar
# ============================================================================

class NumericalError(ModelBuilderException):
    """Optimizasyon sırasında oluşan sayısal hatalar"""

    exit_code = 3

    def _get_default_user_message(self) -> str:
        return "Optimizasyon sayısal olarak ıraksadı."


class DivergedLoss(NumericalError):
    """Kayıp değeri sonlu değil; durum dökümü yazılır"""

    def __init__(self, iteration: int, terms: dict, dump_path: Optional[str] = None):
        self.iteration = iteration
        self.terms = terms
        self.dump_path = dump_path
        super().__init__(f"Iterasyon {iteration}: sonlu olmayan kayıp {terms} (döküm: {dump_path})")

    def _log(self):
        logger.error(f"{self.__class__.__name__}: {self.message}")


# ============================================================================
# Doğrulama Hataları
# ============================================================================

class ValidationError(ModelBuilderException):
    """Veri doğrulama hataları"""

    exit_code = 2

    def __init__(self, field: str, value: Any, expected: str,
                 message: Optional[str] = None):
        self.field = field
        self.value = value
        self.expected = expected
        msg = message or f"Geçersiz değer - Alan: {field}, Değer: {value}, Beklenen: {expected}"
        super().__init__(msg)

    def _get_default_user_message(self) -> str:
        return f"'{self.field}' geçersiz. {self.expected}"


class ShapeMismatchError(ValidationError):
    """Tensör boyutu beklenen ağ girişine uymuyor"""

    def __init__(self, field: str, actual: Any, expected: Any):
        super().__init__(field, actual, f"Beklenen boyut: {expected}")


class TapeMismatchError(ValidationError):
    """Geri yayılım kaydı bu parametre deposuna ait değil"""

    def __init__(self, detail: str):
        super().__init__("tape", detail, "Aynı ileri geçişten gelen kayıt")


class DatasetValidationError(ValidationError):
    """Veri seti optimizasyon için eksik veya bozuk"""

    def __init__(self, path: str, problem: str):
        self.path = path
        super().__init__("dataset", path, problem, f"Veri seti geçersiz ({path}): {problem}")

    def _get_default_user_message(self) -> str:
        return f"Veri seti geçersiz: {self.expected}"


# ============================================================================
# Dosya İşlem Hataları
# ============================================================================

class FileOperationError(ModelBuilderException):
    """Dosya işlem hataları"""

    exit_code = 2

    def __init__(self, file_path: str, operation: str, message: Optional[str] = None):
        self.file_path = file_path
        self.operation = operation
        msg = message or f"Dosya işlemi başarısız - {operation}: {file_path}"
        super().__init__(msg)

    def _get_default_user_message(self) -> str:
        return f"Dosya işlemi başarısız oldu: {self.operation}"


class DatasetFormatError(FileOperationError):
    """Ham float veya görüntü dosyası başlığı okunamadı"""

    def __init__(self, file_path: str, message: str):
        super().__init__(file_path, "Dataset Read", message)


class CheckpointError(FileOperationError):
    """Checkpoint dosyası uyumsuz veya bozuk"""

    def __init__(self, file_path: str, message: str):
        super().__init__(file_path, "Checkpoint", message)

    def _get_default_user_message(self) -> str:
        return "Checkpoint dosyası bu sürümle uyumsuz."


# ============================================================================
# Konfigürasyon Hataları
# ============================================================================

class ConfigurationError(ModelBuilderException):
    """Konfigürasyon hataları (bilinmeyen anahtar, hatalı değer)"""

    exit_code = 2

    def __init__(self, key: str, message: Optional[str] = None):
        self.key = key
        msg = message or f"Geçersiz konfigürasyon: {key}"
        super().__init__(msg)

    def _get_default_user_message(self) -> str:
        return f"Konfigürasyon dosyasında bir sorun var: {self.key}"
