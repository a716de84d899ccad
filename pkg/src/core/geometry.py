"""
Animatable Model Builder - Rijit ve Kamera Geometrisi
=====================================================
SE(3) dönüşümleri (açı-eksen), pinhole projeksiyon, ışın üretimi,
ölçekli Kabsch (Umeyama) ve benzerlik dönüşümlü ICP.

Tensör fonksiyonları torch float64 üzerinde çalışır ve türevlenebilirdir;
ICP numpy + scikit-learn kullanır.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from sklearn.neighbors import NearestNeighbors

from src.utils.exceptions import DegenerateCloud, NonPositiveDepth, ValidationError
from src.utils.validators import validate_intrinsics

logger = logging.getLogger(__name__)

DTYPE = torch.float64

# Rodrigues için Taylor açılımına geçiş eşiği (θ²)
_SMALL_ANGLE_SQ = 1e-8


def as_tensor(x, dtype=DTYPE) -> torch.Tensor:
    return torch.as_tensor(x, dtype=dtype)


# =============================================================================
# SO(3)
# =============================================================================

def hat(v: torch.Tensor) -> torch.Tensor:
    """(…,3) vektör -> (…,3,3) çarpraz çarpım matrisi"""
    zero = torch.zeros_like(v[..., 0])
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return torch.stack([
        torch.stack([zero, -z, y], dim=-1),
        torch.stack([z, zero, -x], dim=-1),
        torch.stack([-y, x, zero], dim=-1),
    ], dim=-2)


def vee(m: torch.Tensor) -> torch.Tensor:
    """(…,3,3) -> (…,3): ters-simetrik kısmın vektörü (hat'in tersi)"""
    return torch.stack([
        m[..., 2, 1] - m[..., 1, 2],
        m[..., 0, 2] - m[..., 2, 0],
        m[..., 1, 0] - m[..., 0, 1],
    ], dim=-1) * 0.5


def rodrigues(aa: torch.Tensor) -> torch.Tensor:
    """
    Açı-eksen (…,3) -> rotasyon matrisi (…,3,3)

    θ → 0 civarında sin θ/θ ve (1−cos θ)/θ² için ikinci derece Taylor açılımı
    kullanılır; sıfır rotasyonda da gradyan tanımlıdır.
    """
    theta_sq = (aa * aa).sum(dim=-1)
    small = theta_sq < _SMALL_ANGLE_SQ
    safe_sq = torch.where(small, torch.ones_like(theta_sq), theta_sq)
    theta = torch.sqrt(safe_sq)

    a = torch.where(small, 1.0 - theta_sq / 6.0, torch.sin(theta) / theta)
    b = torch.where(small, 0.5 - theta_sq / 24.0, (1.0 - torch.cos(theta)) / safe_sq)

    k = hat(aa)
    eye = torch.eye(3, dtype=aa.dtype).expand(k.shape)
    return eye + a[..., None, None] * k + b[..., None, None] * (k @ k)


def so3_log(rot: torch.Tensor) -> torch.Tensor:
    """
    Rotasyon matrisi (…,3,3) -> açı-eksen (…,3), |açı| ∈ [0, π]

    π yakınında sin θ sıfıra gittiği için eksen, simetrik kısmın
    en büyük köşegen sütunundan okunur.
    """
    w = vee(rot)                                  # sin θ · n
    s = torch.linalg.norm(w, dim=-1)
    c = ((rot[..., 0, 0] + rot[..., 1, 1] + rot[..., 2, 2]) - 1.0) * 0.5
    theta = torch.atan2(s, c)

    small = theta < 1e-6
    s_safe = torch.where(small, torch.ones_like(s), s)
    factor = torch.where(small, 1.0 + theta * theta / 6.0, theta / s_safe)
    aa = factor[..., None] * w

    near_pi = c < -0.99
    if bool(near_pi.any()):
        sym = 0.5 * (rot + rot.transpose(-1, -2))
        eye = torch.eye(3, dtype=rot.dtype).expand(sym.shape)
        nn_t = (sym - c[..., None, None] * eye) / (1.0 - c)[..., None, None]
        diag = torch.diagonal(nn_t, dim1=-2, dim2=-1).clamp(min=0.0)
        idx = diag.argmax(dim=-1)
        col = torch.gather(nn_t, -1, idx[..., None, None].expand(*nn_t.shape[:-1], 1))[..., 0]
        pivot = torch.gather(diag, -1, idx[..., None])[..., 0].clamp(min=1e-300)
        axis = col / torch.sqrt(pivot)[..., None]
        ones = torch.ones_like(theta)
        sign = torch.where((axis * w).sum(dim=-1) < 0, -ones, ones)
        aa_pi = (sign * theta)[..., None] * axis
        aa = torch.where(near_pi[..., None], aa_pi, aa)
    return aa


def geodesic_distance(rot_a: torch.Tensor, rot_b: torch.Tensor) -> torch.Tensor:
    """
    İki rotasyon arasındaki jeodezik açı (radyan, [0, π])

    ‖log(R_a R_bᵀ)‖; simetriktir.
    """
    rel = rot_a @ rot_b.transpose(-1, -2)
    s = torch.linalg.norm(vee(rel), dim=-1)
    c = ((rel[..., 0, 0] + rel[..., 1, 1] + rel[..., 2, 2]) - 1.0) * 0.5
    return torch.atan2(s, c)


def rotation_about_axis(axis: Sequence[float], angle: float) -> torch.Tensor:
    axis_t = as_tensor(axis)
    axis_t = axis_t / torch.linalg.norm(axis_t)
    return rodrigues(axis_t * angle)


# =============================================================================
# 3x4 rijit matrisler [R | t]
# =============================================================================

def rt_matrix(rot: torch.Tensor, trans: torch.Tensor) -> torch.Tensor:
    """(…,3,3), (…,3) -> (…,3,4)"""
    return torch.cat([rot, trans[..., None]], dim=-1)


def rt_apply(mat: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
    """(…,3,4) matrisini (…,3) noktalara uygula: R·X + t"""
    return (mat[..., :3, :3] @ points[..., None])[..., 0] + mat[..., :3, 3]


def rt_inverse(mat: torch.Tensor) -> torch.Tensor:
    rot_t = mat[..., :3, :3].transpose(-1, -2)
    return rt_matrix(rot_t, -(rot_t @ mat[..., :3, 3, None])[..., 0])


def rt_compose(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """a ∘ b (önce b, sonra a)"""
    rot = a[..., :3, :3] @ b[..., :3, :3]
    trans = (a[..., :3, :3] @ b[..., :3, 3, None])[..., 0] + a[..., :3, 3]
    return rt_matrix(rot, trans)


def rt_identity(*batch: int) -> torch.Tensor:
    eye = torch.eye(3, 4, dtype=DTYPE)
    return eye.expand(*batch, 3, 4).clone()


def se3_from_vector(vec: torch.Tensor) -> torch.Tensor:
    """(…,6) [açı-eksen | öteleme] -> (…,3,4)"""
    return rt_matrix(rodrigues(vec[..., :3]), vec[..., 3:6])


@dataclass(frozen=True)
class SE3:
    """
    Açı-eksen rotasyon + öteleme

    Attributes:
        rotation: (3,) açı-eksen (radyan · birim eksen)
        translation: (3,) öteleme
    """
    rotation: torch.Tensor
    translation: torch.Tensor

    @classmethod
    def identity(cls) -> 'SE3':
        return cls(torch.zeros(3, dtype=DTYPE), torch.zeros(3, dtype=DTYPE))

    @classmethod
    def from_matrix(cls, mat: torch.Tensor) -> 'SE3':
        mat = as_tensor(mat)
        return cls(so3_log(mat[:3, :3]), mat[:3, 3].clone())

    @classmethod
    def from_values(cls, rotation: Sequence[float], translation: Sequence[float]) -> 'SE3':
        return cls(as_tensor(rotation), as_tensor(translation))

    def rotation_matrix(self) -> torch.Tensor:
        return rodrigues(self.rotation)

    def matrix(self) -> torch.Tensor:
        """(3,4) [R | t]"""
        return rt_matrix(self.rotation_matrix(), self.translation)

    def apply(self, points: torch.Tensor) -> torch.Tensor:
        return rt_apply(self.matrix(), as_tensor(points))

    def inverse(self) -> 'SE3':
        rot_t = self.rotation_matrix().T
        return SE3(-self.rotation, -(rot_t @ self.translation))

    def compose(self, other: 'SE3') -> 'SE3':
        """self ∘ other"""
        return SE3.from_matrix(rt_compose(self.matrix(), other.matrix()))


def se3_apply(transform: SE3, points) -> torch.Tensor:
    """R·X + t (R Rodrigues formülünden)"""
    return transform.apply(points)


# =============================================================================
# Kamera
# =============================================================================

@dataclass(frozen=True)
class Ray:
    """Kamera uzayında ışın"""
    origin: torch.Tensor
    direction: torch.Tensor
    pixel: Tuple[float, float]

    def point_at(self, s: float) -> torch.Tensor:
        return self.origin + s * self.direction


def project_pinhole(points: torch.Tensor, focal: torch.Tensor,
                    principal: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Türevlenebilir pinhole projeksiyon

    Args:
        points: (…,3) kamera uzayı noktaları
        focal: (…,2) veya (2,) fx, fy
        principal: (…,2) veya (2,) cx, cy

    Returns:
        (uv (…,2), geçerli (…,) bool: Z > 0)
    """
    z = points[..., 2]
    valid = z > 0
    z_safe = torch.where(valid, z, torch.ones_like(z))
    uv = focal * points[..., :2] / z_safe[..., None] + principal
    return uv, valid


@dataclass(frozen=True)
class Camera:
    """
    Pinhole kamera (piksel birimi)

    Piksel (satır i, sütun j) merkezi görüntü koordinatında (j + 0.5, i + 0.5).
    """
    fx: float
    fy: float
    cx: float
    cy: float
    height: int
    width: int

    def __post_init__(self):
        ok, msg = validate_intrinsics(self.fx, self.fy, self.cx, self.cy, self.height, self.width)
        if not ok:
            raise ValidationError('camera', (self.fx, self.fy, self.cx, self.cy), msg)

    @classmethod
    def centered(cls, focal: float, height: int, width: int) -> 'Camera':
        return cls(focal, focal, width / 2.0, height / 2.0, height, width)

    @classmethod
    def from_row(cls, row: Sequence[float]) -> 'Camera':
        fx, fy, cx, cy, h, w = row
        return cls(float(fx), float(fy), float(cx), float(cy), int(h), int(w))

    def to_row(self) -> List[float]:
        return [self.fx, self.fy, self.cx, self.cy, self.height, self.width]

    @property
    def focal(self) -> torch.Tensor:
        return as_tensor([self.fx, self.fy])

    @property
    def principal(self) -> torch.Tensor:
        return as_tensor([self.cx, self.cy])

    def project(self, point_cam) -> Tuple[float, float]:
        """Tek nokta projeksiyonu; Z <= 0 ise NonPositiveDepth"""
        point = as_tensor(point_cam)
        z = float(point[2])
        if z <= 0:
            raise NonPositiveDepth(z)
        uv, _ = project_pinhole(point, self.focal, self.principal)
        return float(uv[0]), float(uv[1])

    def project_points(self, points: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return project_pinhole(points, self.focal, self.principal)

    def pixel_directions(self, pixels: torch.Tensor) -> torch.Tensor:
        """(…,2) piksel koordinatları -> (…,3) birim yönler"""
        pixels = as_tensor(pixels)
        d = torch.stack([
            (pixels[..., 0] - self.cx) / self.fx,
            (pixels[..., 1] - self.cy) / self.fy,
            torch.ones_like(pixels[..., 0]),
        ], dim=-1)
        return d / torch.linalg.norm(d, dim=-1, keepdim=True)

    def pixel_ray(self, x: float, y: float) -> Ray:
        direction = self.pixel_directions(as_tensor([x, y]))
        return Ray(torch.zeros(3, dtype=DTYPE), direction, (float(x), float(y)))

    def pixel_centers(self) -> torch.Tensor:
        """(H, W, 2) piksel merkezleri (x, y)"""
        ys, xs = torch.meshgrid(
            torch.arange(self.height, dtype=DTYPE) + 0.5,
            torch.arange(self.width, dtype=DTYPE) + 0.5,
            indexing='ij',
        )
        return torch.stack([xs, ys], dim=-1)


def pixel_ray(cam: Camera, pixel: Tuple[float, float]) -> Ray:
    return cam.pixel_ray(*pixel)


def project(cam: Camera, point_cam) -> Tuple[float, float]:
    return cam.project(point_cam)


# =============================================================================
# Hizalama: Umeyama + ICP (numpy)
# =============================================================================

def covariance_rank(points: np.ndarray) -> int:
    """Merkezlenmiş nokta bulutunun kovaryans rankı"""
    if len(points) < 2:
        return 0
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / len(points)
    scale = max(float(np.abs(cov).max()), 1e-300)
    return int(np.linalg.matrix_rank(cov, tol=scale * 1e-10))


def umeyama(src: np.ndarray, dst: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Eşleşmiş noktalar için kapalı form ölçekli Kabsch

    dst ≈ s · R · src + t  en küçük kareler çözümü.

    Returns:
        (s, R (3,3), t (3,))
    """
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    src_c = src - mu_s
    dst_c = dst - mu_d

    sigma = dst_c.T @ src_c / len(src)
    u, d, vt = np.linalg.svd(sigma)
    sign = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[2, 2] = -1.0
    rot = u @ sign @ vt

    var_src = float((src_c ** 2).sum(axis=1).mean())
    scale = float(np.trace(np.diag(d) @ sign) / var_src)
    trans = mu_d - scale * rot @ mu_s
    return scale, rot, trans


def _principal_axes(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    _, vecs = np.linalg.eigh(centered.T @ centered)
    if np.linalg.det(vecs) < 0:
        vecs[:, 0] = -vecs[:, 0]
    return vecs


def _initial_rotations(src: np.ndarray, dst: np.ndarray) -> List[np.ndarray]:
    """Kimlik + temel eksen hizalamasının dört işaret varyantı"""
    axes_src = _principal_axes(src)
    axes_dst = _principal_axes(dst)
    candidates = [np.eye(3)]
    for flips in ((1, 1, 1), (-1, -1, 1), (-1, 1, -1), (1, -1, -1)):
        candidates.append(axes_dst @ np.diag(flips) @ axes_src.T)
    return candidates


def _icp_run(src, dst, rot0, iters, tol, nn) -> Tuple[float, np.ndarray, np.ndarray, List[float]]:
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    rms_s = np.sqrt(((src - mu_s) ** 2).sum(axis=1).mean())
    rms_d = np.sqrt(((dst - mu_d) ** 2).sum(axis=1).mean())
    scale = float(rms_d / rms_s)
    rot = rot0
    trans = mu_d - scale * rot @ mu_s

    errors: List[float] = []
    for _ in range(max(iters, 1)):
        moved = scale * src @ rot.T + trans
        dist, idx = nn.kneighbors(moved)
        errors.append(float((dist[:, 0] ** 2).mean()))
        if len(errors) > 1 and errors[-2] - errors[-1] <= tol * max(errors[-2], 1e-300):
            break
        scale, rot, trans = umeyama(src, dst[idx[:, 0]])

    moved = scale * src @ rot.T + trans
    dist, _ = nn.kneighbors(moved)
    final = float((dist[:, 0] ** 2).mean())
    if not errors or final < errors[-1]:
        errors.append(final)
    return scale, rot, trans, errors


def icp_similarity_align(src, dst, iters: int = 20, tol: float = 1e-10,
                         history: Optional[List[float]] = None) -> Tuple[float, SE3]:
    """
    Benzerlik dönüşümlü ICP: dst ≈ s · (R·src + t/s)

    Her iterasyon en yakın komşu eşlemesi + kapalı form ölçekli Kabsch.
    Ağırlık merkezi / RMS ölçek başlangıcından ve temel eksen
    adaylarından başlatılır; en düşük hatalı sonuç döner.

    Args:
        src: (n,3) kaynak noktalar
        dst: (m,3) hedef noktalar
        iters: maksimum iterasyon
        tol: göreli iyileşme eşiği
        history: verilirse seçilen koşunun iterasyon hataları eklenir

    Returns:
        (ölçek, SE3); hizalanmış nokta = ölçek · R · src + t
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)

    for name, cloud in (('src', src), ('dst', dst)):
        rank = covariance_rank(cloud)
        if rank < 2:
            raise DegenerateCloud(len(cloud), rank)

    nn = NearestNeighbors(n_neighbors=1, algorithm='brute').fit(dst)

    best = None
    for rot0 in _initial_rotations(src, dst):
        result = _icp_run(src, dst, rot0, iters, tol, nn)
        if best is None or result[3][-1] < best[3][-1]:
            best = result

    scale, rot, trans, errors = best
    if history is not None:
        history.extend(errors)
    logger.debug(f"ICP: ölçek={scale:.6f}, hata {errors[0]:.3e} -> {errors[-1]:.3e}")
    return scale, SE3.from_matrix(torch.from_numpy(np.concatenate([rot, trans[:, None]], axis=1)))


def apply_similarity(scale: float, transform: SE3, points) -> np.ndarray:
    """ölçek · R · X + t (numpy)"""
    mat = transform.matrix().numpy()
    pts = np.asarray(points, dtype=np.float64)
    return scale * pts @ mat[:, :3].T + mat[:, 3]
