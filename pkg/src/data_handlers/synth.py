"""
Animatable Model Builder - Sentetik Sahne Oracle'ı
==================================================
Kapsüllerden oluşan analitik kanonik SDF, senaryolu kemik hareketleri ve
yörünge kameralarıyla ground-truth üretir:

- RGB (Lambert gölgeleme), siluet, 16 kanallı öznitelik görüntüsü
- Komşu karelere (±1, ±2) kesin nokta eşlemesinden optik akış
- Kare başına kök poz, kamera, poz verilmiş yüzey noktaları ve mesh

Hazır senaryolar: pendulum, pendulum-drive, quadruped, rigid-sphere.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.constants import (
    BOUNDS_MC_RESOLUTION, EMBEDDING_DIM, EVAL_SAMPLES, FLOW_OFFSETS, ROOT_INIT_TRANSLATION,
)
from src.data_handlers import dataset_io as dio
from src.utils.exceptions import ValidationError

logger = logging.getLogger(__name__)

# Işık yönü kamera uzayında (yüzeyden ışığa)
LIGHT_DIRECTION = (-0.3, -0.4, -1.0)
AMBIENT = 0.25
TRACE_STEPS = 256
TRACE_EPS = 1e-6
EMBEDDING_SEED = 1234
EMBEDDING_FREQUENCIES = 8


# =============================================================================
# Senaryo veri yapıları
# =============================================================================

@dataclass
class Capsule:
    """İki uç nokta + yarıçap; ``bone`` = -1 ise gövdeye sabit"""
    a: Tuple[float, float, float]
    b: Tuple[float, float, float]
    radius: float
    bone: int = -1
    albedo: Tuple[float, float, float] = (0.8, 0.8, 0.8)


@dataclass
class BoneMotion:
    """Pivot etrafında eksen-açı salınımı: açı = genlik · sin(2π·döngü·s + faz)"""
    pivot: Tuple[float, float, float]
    axis: Tuple[float, float, float]
    amplitude: float            # derece
    cycles: float = 1.0
    phase: float = 0.0


@dataclass
class VideoScript:
    """Bir video: kare sayısı ve nesne etrafında yörünge (derece)"""
    frames: int
    azimuth_start: float = 0.0
    azimuth_sweep: float = 90.0
    elevation: float = 0.0
    phase_shift: float = 0.0


@dataclass
class SceneScript:
    """Tam sahne senaryosu (JSON'a çevrilebilir)"""
    name: str
    height: int
    width: int
    focal: float
    capsules: List[Capsule]
    bones: List[BoneMotion] = field(default_factory=list)
    videos: List[VideoScript] = field(default_factory=list)
    distance: float = ROOT_INIT_TRANSLATION[2]
    seed: int = 0

    def __post_init__(self):
        for i, cap in enumerate(self.capsules):
            if cap.radius <= 0:
                raise ValidationError(f'capsules[{i}].radius', cap.radius, 'radius > 0')
            if not (-1 <= cap.bone < len(self.bones)):
                raise ValidationError(f'capsules[{i}].bone', cap.bone, f"-1 .. {len(self.bones) - 1}")
        for i, video in enumerate(self.videos):
            if video.frames < 2:
                raise ValidationError(f'videos[{i}].frames', video.frames, 'frames >= 2')

    # ---- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'SceneScript':
        data = dict(data)
        data['capsules'] = [Capsule(**c) for c in data.get('capsules', [])]
        data['bones'] = [BoneMotion(**b) for b in data.get('bones', [])]
        data['videos'] = [VideoScript(**v) for v in data.get('videos', [])]
        return cls(**data)

    @classmethod
    def load(cls, path) -> 'SceneScript':
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding='utf-8')

    # ---- Zamanlama ----------------------------------------------------------

    @property
    def frame_counts(self) -> List[int]:
        return [v.frames for v in self.videos]

    @property
    def num_frames(self) -> int:
        return sum(self.frame_counts)

    def bone_transforms(self, video: int, t: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Her kemik için (R, pivot): X' = R (X − p) + p"""
        spec = self.videos[video]
        s = t / max(spec.frames - 1, 1)
        out = []
        for bone in self.bones:
            angle = math.radians(bone.amplitude) * math.sin(
                2.0 * math.pi * bone.cycles * s + bone.phase + spec.phase_shift)
            out.append((axis_angle_matrix(bone.axis, angle), np.asarray(bone.pivot, dtype=np.float64)))
        return out

    def root_pose(self, video: int, t: int) -> np.ndarray:
        """G^t = T(0,0,d) · R_x(yükseklik) · R_y(azimut), (3,4)"""
        spec = self.videos[video]
        s = t / max(spec.frames - 1, 1)
        azimuth = math.radians(spec.azimuth_start + spec.azimuth_sweep * s)
        rot = axis_angle_matrix((1, 0, 0), math.radians(spec.elevation)) @ axis_angle_matrix((0, 1, 0), azimuth)
        return np.concatenate([rot, np.array([[0.0], [0.0], [self.distance]])], axis=1)

    def camera_row(self) -> List[float]:
        return [self.focal, self.focal, self.width / 2.0, self.height / 2.0, self.height, self.width]

    def bounding_radius(self) -> float:
        """Tüm hareketler boyunca nesneyi içeren küre yarıçapı (muhafazakâr)"""
        radius = 0.0
        for cap in self.capsules:
            ends = np.array([cap.a, cap.b], dtype=np.float64)
            if cap.bone < 0:
                reach = np.linalg.norm(ends, axis=1).max()
            else:
                pivot = np.asarray(self.bones[cap.bone].pivot, dtype=np.float64)
                reach = np.linalg.norm(pivot) + np.linalg.norm(ends - pivot, axis=1).max()
            radius = max(radius, reach + cap.radius)
        return float(radius)


@dataclass
class OracleFrame:
    """
    Tek karenin ground-truth'u

    Attributes:
        rgb: (H, W, 3), 1/255'e kuantize
        silhouette: (H, W) {0,1}
        features: (H, W, 16) birim vektör, arka planda 0
        flow: ofset -> (H, W, 3) [dx, dy, geçerli]
        root: (3, 4) G^t
        points: (M, 3) kamera uzayında poz verilmiş yüzey noktaları
        depth: (H, W) kamera Z (arka planda 0)
    """
    video: int
    local: int
    rgb: np.ndarray
    silhouette: np.ndarray
    features: np.ndarray
    flow: Dict[int, np.ndarray]
    root: np.ndarray
    points: np.ndarray
    depth: np.ndarray


# =============================================================================
# Analitik SDF
# =============================================================================

def axis_angle_matrix(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rodrigues (numpy)"""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def capsule_sdf(points: np.ndarray, a, b, radius: float) -> np.ndarray:
    """Kesin kapsül SDF'i (a = b ise küre)"""
    a = np.asarray(a, dtype=np.float64)
    ba = np.asarray(b, dtype=np.float64) - a
    pa = points - a
    denom = float(ba @ ba)
    h = np.zeros(len(points)) if denom < 1e-18 else np.clip(pa @ ba / denom, 0.0, 1.0)
    return np.linalg.norm(pa - h[:, None] * ba, axis=-1) - radius


def _to_rest(points: np.ndarray, transform: Optional[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    if transform is None:
        return points
    rot, pivot = transform
    return (points - pivot) @ rot + pivot


def _to_posed(points: np.ndarray, transform: Optional[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    if transform is None:
        return points
    rot, pivot = transform
    return (points - pivot) @ rot.T + pivot


def posed_sdf(points: np.ndarray, script: SceneScript,
              transforms: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Poz verilmiş nesne uzayında birleşim SDF'i

    Returns:
        (sdf (M,), en yakın kapsül indeksi (M,))
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not script.capsules:
        return np.full(len(points), np.inf), np.full(len(points), -1, dtype=np.int64)
    values = []
    for cap in script.capsules:
        tf = None if transforms is None or cap.bone < 0 else transforms[cap.bone]
        values.append(capsule_sdf(_to_rest(points, tf), cap.a, cap.b, cap.radius))
    values = np.stack(values)
    return values.min(axis=0), values.argmin(axis=0)


def analytic_sdf(points, script: SceneScript) -> np.ndarray:
    """Dinlenme pozundaki kanonik SDF: kapsül SDF'lerinin minimumu"""
    return posed_sdf(np.asarray(points, dtype=np.float64), script)[0]


def _sdf_normals(points: np.ndarray, script: SceneScript, transforms, eps: float = 1e-5) -> np.ndarray:
    grads = []
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = eps
        grads.append(posed_sdf(points + step, script, transforms)[0] - posed_sdf(points - step, script, transforms)[0])
    n = np.stack(grads, axis=-1)
    return n / np.maximum(np.linalg.norm(n, axis=-1, keepdims=True), 1e-12)


# =============================================================================
# Oracle render
# =============================================================================

def pixel_directions(script: SceneScript) -> np.ndarray:
    """(H*W, 3) birim ışın yönleri; piksel merkezleri (j+0.5, i+0.5)"""
    ys, xs = np.meshgrid(np.arange(script.height) + 0.5, np.arange(script.width) + 0.5, indexing='ij')
    d = np.stack([(xs - script.width / 2.0) / script.focal,
                  (ys - script.height / 2.0) / script.focal,
                  np.ones_like(xs)], axis=-1).reshape(-1, 3)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def sphere_trace(origin: np.ndarray, directions: np.ndarray, script: SceneScript,
                 transforms, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vektörize küre izleme (nesne uzayında)

    Returns:
        (isabet (M,) bool, ışın parametresi s (M,))
    """
    b = directions @ origin
    c = float(origin @ origin) - radius * radius
    disc = b * b - c
    inside = disc > 0
    root = np.sqrt(np.maximum(disc, 0.0))
    s = np.maximum(-b - root, 0.0)
    s_max = -b + root

    hit = np.zeros(len(directions), dtype=bool)
    active = inside.copy()
    for _ in range(TRACE_STEPS):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        f, _ = posed_sdf(origin + s[idx, None] * directions[idx], script, transforms)
        close = f < TRACE_EPS
        hit[idx[close]] = True
        s[idx[~close]] += f[~close]
        active[idx] = ~close & (s[idx] < s_max[idx])
    return hit, s


def _embedding_projection(seed: int = EMBEDDING_SEED):
    rng = np.random.default_rng(seed)
    omega = rng.normal(scale=3.0, size=(EMBEDDING_FREQUENCIES, 3))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=EMBEDDING_FREQUENCIES)
    mix = rng.standard_normal((EMBEDDING_DIM, 3 + EMBEDDING_FREQUENCIES))
    return omega, phi, mix


def oracle_embedding(rest_points: np.ndarray) -> np.ndarray:
    """Dinlenme koordinatlarının sabit rastgele 16-B birim izdüşümü"""
    omega, phi, mix = _embedding_projection()
    raw = np.concatenate([rest_points, np.sin(rest_points @ omega.T + phi)], axis=-1) @ mix.T
    return raw / np.maximum(np.linalg.norm(raw, axis=-1, keepdims=True), 1e-12)


def _project(points_cam: np.ndarray, script: SceneScript) -> Tuple[np.ndarray, np.ndarray]:
    z = points_cam[:, 2]
    valid = z > 0
    z_safe = np.where(valid, z, 1.0)
    uv = script.focal * points_cam[:, :2] / z_safe[:, None] + np.array([script.width / 2.0, script.height / 2.0])
    return uv, valid


def render_oracle(script: SceneScript, video: int, t: int,
                  offsets: Sequence[int] = FLOW_OFFSETS,
                  num_points: int = EVAL_SAMPLES) -> OracleFrame:
    """Bir karenin tüm ground-truth görüntülerini üret"""
    h, w = script.height, script.width
    root = script.root_pose(video, t)
    rot, trans = root[:, :3], root[:, 3]
    transforms = script.bone_transforms(video, t)

    dirs_cam = pixel_directions(script)
    origin = -rot.T @ trans
    dirs_obj = dirs_cam @ rot
    radius = script.bounding_radius() + 1e-3

    rgb = np.zeros((h * w, 3))
    features = np.zeros((h * w, EMBEDDING_DIM))
    depth = np.zeros(h * w)
    flows = {}

    hit = np.zeros(h * w, dtype=bool)
    if script.capsules:
        hit, s = sphere_trace(origin, dirs_obj, script, transforms, radius)

    idx = np.nonzero(hit)[0]
    if len(idx):
        points_obj = origin + s[idx, None] * dirs_obj[idx]
        _, owner = posed_sdf(points_obj, script, transforms)
        rest = np.empty_like(points_obj)
        for c, cap in enumerate(script.capsules):
            sel = owner == c
            rest[sel] = _to_rest(points_obj[sel], None if cap.bone < 0 else transforms[cap.bone])

        normals_cam = _sdf_normals(points_obj, script, transforms) @ rot.T
        light = np.asarray(LIGHT_DIRECTION, dtype=np.float64)
        light = light / np.linalg.norm(light)
        albedo = np.array([script.capsules[c].albedo for c in owner], dtype=np.float64)
        shade = AMBIENT + (1.0 - AMBIENT) * np.clip(normals_cam @ light, 0.0, None)
        rgb[idx] = albedo * shade[:, None]
        features[idx] = oracle_embedding(rest)
        depth[idx] = (points_obj @ rot.T + trans)[:, 2]

        source_uv = np.stack([idx % w + 0.5, idx // w + 0.5], axis=-1).astype(np.float64)
        length = script.videos[video].frames
        for k in (s_ * k_ for k_ in offsets for s_ in (1, -1)):
            if not (0 <= t + k < length):
                continue
            target_tf = script.bone_transforms(video, t + k)
            target_root = script.root_pose(video, t + k)
            moved = np.empty_like(rest)
            for c, cap in enumerate(script.capsules):
                sel = owner == c
                moved[sel] = _to_posed(rest[sel], None if cap.bone < 0 else target_tf[cap.bone])
            uv, valid = _project(moved @ target_root[:, :3].T + target_root[:, 3], script)
            grid = np.zeros((h * w, 3))
            grid[idx, :2] = np.where(valid[:, None], uv - source_uv, 0.0)
            grid[idx, 2] = valid.astype(np.float64)
            flows[k] = grid.reshape(h, w, 3)

    rgb = np.round(np.clip(rgb, 0.0, 1.0) * 255.0) / 255.0
    points = surface_points(script, video, t, num_points)
    return OracleFrame(
        video=video, local=t,
        rgb=rgb.reshape(h, w, 3),
        silhouette=hit.astype(np.float64).reshape(h, w),
        features=features.reshape(h, w, EMBEDDING_DIM),
        flow=flows, root=root, points=points,
        depth=depth.reshape(h, w),
    )


# =============================================================================
# Ground-truth yüzey
# =============================================================================

def _sample_capsule(cap: Capsule, count: int, rng: np.random.Generator) -> np.ndarray:
    a = np.asarray(cap.a, dtype=np.float64)
    b = np.asarray(cap.b, dtype=np.float64)
    axis = b - a
    length = float(np.linalg.norm(axis))
    r = cap.radius

    u = axis / length if length > 1e-12 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(u, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)

    area_cyl = 2.0 * math.pi * r * length
    area_sph = 4.0 * math.pi * r * r
    on_cyl = rng.random(count) < area_cyl / (area_cyl + area_sph)

    theta = rng.uniform(0.0, 2.0 * math.pi, count)
    ring = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
    cyl = a + rng.uniform(0.0, 1.0, count)[:, None] * axis + r * ring

    sph = rng.standard_normal((count, 3))
    sph /= np.linalg.norm(sph, axis=-1, keepdims=True)
    along = sph @ u
    sph = np.where((along >= 0)[:, None], b + r * sph, a + r * sph)
    return np.where(on_cyl[:, None], cyl, sph)


def surface_points(script: SceneScript, video: int, t: int, count: int = EVAL_SAMPLES) -> np.ndarray:
    """
    Birleşim yüzeyinde alan-düzgün noktalar, kamera uzayında (M ≤ count)

    Diğer kapsüllerin içine düşen örnekler atılır.
    """
    if not script.capsules or count <= 0:
        return np.zeros((0, 3))
    rng = np.random.default_rng([script.seed, video, t])
    areas = np.array([2 * math.pi * c.radius * np.linalg.norm(np.subtract(c.b, c.a)) + 4 * math.pi * c.radius ** 2
                      for c in script.capsules])
    counts = rng.multinomial(count, areas / areas.sum())
    transforms = script.bone_transforms(video, t)

    posed = []
    for cap, n in zip(script.capsules, counts):
        if n == 0:
            continue
        pts = _sample_capsule(cap, int(n), rng)
        posed.append(_to_posed(pts, None if cap.bone < 0 else transforms[cap.bone]))
    posed = np.concatenate(posed)
    sdf, _ = posed_sdf(posed, script, transforms)
    posed = posed[sdf > -1e-9]
    root = script.root_pose(video, t)
    return posed @ root[:, :3].T + root[:, 3]


def surface_mesh(script: SceneScript, video: int, t: int, resolution: int = BOUNDS_MC_RESOLUTION):
    """Poz verilmiş birleşim yüzeyinin marching cubes mesh'i, kamera uzayında"""
    from src.ml_engine.mesh import marching_cubes
    import trimesh

    radius = script.bounding_radius() + 0.05
    bounds = np.array([[-radius, radius]] * 3)
    axis = np.linspace(-radius, radius, resolution)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing='ij'), axis=-1).reshape(-1, 3)
    values = posed_sdf(grid, script, script.bone_transforms(video, t))[0].reshape((resolution,) * 3)
    mesh = marching_cubes(values, bounds, resolution)
    root = script.root_pose(video, t)
    return trimesh.Trimesh(np.asarray(mesh.vertices) @ root[:, :3].T + root[:, 3],
                           np.asarray(mesh.faces), process=False)


# =============================================================================
# Dışa aktarma
# =============================================================================

def export_dataset(script: SceneScript, path, num_points: int = EVAL_SAMPLES,
                   mesh_resolution: int = BOUNDS_MC_RESOLUTION, with_meshes: bool = True) -> dict:
    """
    Senaryoyu fit'in doğrudan okuyabileceği dizin düzenine yaz.

    Returns:
        manifest sözlüğü
    """
    from src.ml_engine.mesh import export_ply

    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    script.save(root / dio.SCRIPT_NAME)
    camera = script.camera_row()

    for v, spec in enumerate(script.videos):
        vdir = root / dio.video_dir_name(v)
        gdir = root / 'gt' / dio.video_dir_name(v)
        vdir.mkdir(exist_ok=True)
        gdir.mkdir(parents=True, exist_ok=True)
        poses, cams = [], []
        for t in range(spec.frames):
            frame = render_oracle(script, v, t, num_points=num_points)
            stem = dio.frame_stem(t)
            dio.write_rgb(vdir / f"{stem}_rgb.ppm", frame.rgb)
            dio.write_mask(vdir / f"{stem}_sil.pgm", frame.silhouette)
            dio.write_raw(vdir / f"{stem}_feat.raw", frame.features)
            for k, grid in frame.flow.items():
                dio.write_raw(vdir / f"{stem}{dio.flow_suffix(k)}", grid)
            dio.write_raw(gdir / f"{stem}_points.raw", frame.points.reshape(-1, 1, 3))
            if with_meshes and script.capsules:
                export_ply(surface_mesh(script, v, t, mesh_resolution), str(gdir / f"{stem}.ply"))
            poses.append(frame.root.reshape(-1))
            cams.append(camera)
        dio.write_rows(vdir / 'poses.txt', np.asarray(poses))
        dio.write_rows(vdir / 'cameras.txt', np.asarray(cams))
        logger.info(f"Video {v}: {spec.frames} kare yazıldı")

    manifest = dio.write_manifest(root, script.name, script.height, script.width,
                                  script.frame_counts, has_ground_truth=True)
    logger.info(f"Sentetik veri seti hazır: {root} ({script.num_frames} kare)")
    return manifest


# =============================================================================
# Hazır senaryolar
# =============================================================================

def _pendulum(name: str, amplitude: float, phase: float, sweeps: Sequence[float]) -> SceneScript:
    return SceneScript(
        name=name, height=64, width=64, focal=100.0,
        capsules=[
            Capsule((0.0, 0.0, 0.0), (0.0, 0.4, 0.0), 0.12, -1, (0.85, 0.35, 0.25)),
            Capsule((0.0, 0.0, 0.0), (0.0, -0.45, 0.0), 0.1, 0, (0.25, 0.45, 0.85)),
        ],
        bones=[BoneMotion((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), amplitude, 1.0, phase)],
        videos=[
            VideoScript(16, 0.0, sweeps[0], 10.0, 0.0),
            VideoScript(16, 60.0, sweeps[1], -10.0, math.pi / 2.0),
        ],
    )


def _quadruped() -> SceneScript:
    body, head, tail, leg = (0.8, 0.6, 0.35), (0.85, 0.7, 0.45), (0.5, 0.35, 0.2), (0.45, 0.3, 0.2)
    capsules = [
        Capsule((-0.3, 0.0, 0.0), (0.3, 0.0, 0.0), 0.14, -1, body),
        Capsule((0.32, 0.08, 0.0), (0.5, 0.2, 0.0), 0.09, 0, head),
        Capsule((0.48, 0.26, 0.05), (0.46, 0.36, 0.06), 0.03, 0, head),
        Capsule((0.48, 0.26, -0.05), (0.46, 0.36, -0.06), 0.03, 0, head),
        Capsule((-0.3, 0.05, 0.0), (-0.5, 0.2, 0.0), 0.04, 1, tail),
    ]
    bones = [
        BoneMotion((0.3, 0.05, 0.0), (0.0, 0.0, 1.0), 20.0, 1.0, 0.0),
        BoneMotion((-0.3, 0.05, 0.0), (0.0, 1.0, 0.0), 35.0, 2.0, 0.0),
    ]
    for i, (x, z) in enumerate(((0.22, 0.08), (0.22, -0.08), (-0.22, 0.08), (-0.22, -0.08))):
        capsules.append(Capsule((x, -0.05, z), (x, -0.4, z), 0.05, 2 + i, leg))
        bones.append(BoneMotion((x, -0.05, z), (0.0, 0.0, 1.0), 30.0, 1.0, math.pi * (i % 2 + i // 2)))
    return SceneScript(
        name='quadruped', height=64, width=64, focal=90.0, capsules=capsules, bones=bones,
        videos=[VideoScript(16, 0.0, 90.0, 15.0, 0.0), VideoScript(16, 45.0, 90.0, 5.0, math.pi / 3.0)],
    )


def _rigid_sphere() -> SceneScript:
    return SceneScript(
        name='rigid-sphere', height=64, width=64, focal=100.0,
        capsules=[Capsule((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.4, -1, (0.7, 0.7, 0.7))],
        videos=[VideoScript(8, 0.0, 60.0, 0.0), VideoScript(8, 30.0, 60.0, 20.0)],
    )


FIXTURES = {
    'pendulum': lambda: _pendulum('pendulum', 40.0, 0.0, (90.0, 90.0)),
    'pendulum-drive': lambda: _pendulum('pendulum-drive', 60.0, math.pi / 4.0, (45.0, 45.0)),
    'quadruped': _quadruped,
    'rigid-sphere': _rigid_sphere,
}


def fixture_script(name_or_path: str) -> SceneScript:
    """Hazır senaryo adı veya JSON senaryo dosyası"""
    if name_or_path in FIXTURES:
        return FIXTURES[name_or_path]()
    path = Path(name_or_path)
    if path.suffix == '.json' and path.is_file():
        return SceneScript.load(path)
    raise ValidationError('script', name_or_path, f"one of {sorted(FIXTURES)} or a .json script file")
