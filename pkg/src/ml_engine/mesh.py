"""
Surface Extraction and Evaluation
=================================

Marching cubes over an SDF (PyMCubes), forward posing, area-uniform sampling
(trimesh), Chamfer distance (scikit-learn nearest neighbours) and ASCII PLY.
"""

import logging
from typing import Callable, Optional, Union

import mcubes
import numpy as np
import torch
import trimesh
from sklearn.neighbors import NearestNeighbors

from src.core.constants import BOUNDS_MC_RESOLUTION, EVAL_SAMPLES
from src.core.geometry import DTYPE
from src.utils.exceptions import EmptyCloud, EmptySurface, ValidationError

logger = logging.getLogger(__name__)

SdfFn = Callable[[torch.Tensor], torch.Tensor]

MIN_FACE_AREA = 1e-12


def _bounds_array(bounds) -> np.ndarray:
    arr = np.asarray(bounds.detach() if isinstance(bounds, torch.Tensor) else bounds, dtype=np.float64)
    return arr.reshape(3, 2)


def sdf_grid(sdf_fn: SdfFn, bounds, resolution: int, chunk: int = 65536) -> np.ndarray:
    """SDF values on a (res,res,res) lattice including both endpoints"""
    b = _bounds_array(bounds)
    axes = [torch.linspace(lo, hi, resolution, dtype=DTYPE) for lo, hi in b]
    points = torch.stack(torch.meshgrid(*axes, indexing='ij'), dim=-1).reshape(-1, 3)
    values = np.empty(points.shape[0], dtype=np.float64)
    with torch.no_grad():
        for start in range(0, points.shape[0], chunk):
            values[start:start + chunk] = sdf_fn(points[start:start + chunk]).numpy()
    return values.reshape(resolution, resolution, resolution)


def clean_mesh(vertices: np.ndarray, faces: np.ndarray) -> trimesh.Trimesh:
    """Drop zero-area triangles and unreferenced vertices"""
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    if len(faces):
        tri = vertices[faces]
        area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=-1)
        faces = faces[area > MIN_FACE_AREA]
    if len(faces) == 0:
        raise EmptySurface("geçerli üçgen yok")
    used, inverse = np.unique(faces.reshape(-1), return_inverse=True)
    return trimesh.Trimesh(vertices[used], inverse.reshape(-1, 3), process=False)


def marching_cubes(field: Union[SdfFn, np.ndarray], bounds,
                   resolution: int = BOUNDS_MC_RESOLUTION) -> trimesh.Trimesh:
    """
    Zero level set of an SDF (negative inside) over axis-aligned ``bounds``.

    Args:
        field: callable on (M,3) canonical points, or a precomputed (res,res,res) grid
        bounds: (3,2)
        resolution: lattice size per axis (≥ 8)

    Raises:
        EmptySurface: no sign change in the lattice
    """
    if resolution < 8:
        raise ValidationError('resolution', resolution, 'resolution >= 8')
    values = np.asarray(field, dtype=np.float64) if isinstance(field, np.ndarray) \
        else sdf_grid(field, bounds, resolution)
    if not (values.min() < 0.0 < values.max()):
        raise EmptySurface()

    # PyMCubes: pozitif = iç
    verts, faces = mcubes.marching_cubes(-values, 0.0)
    b = _bounds_array(bounds)
    verts = verts / (resolution - 1.0) * (b[:, 1] - b[:, 0]) + b[:, 0]
    mesh = clean_mesh(verts, faces)
    logger.debug(f"Marching cubes {resolution}^3: {len(mesh.vertices)} köşe, {len(mesh.faces)} üçgen")
    return mesh


def pose_mesh(mesh: trimesh.Trimesh, warp_forward: Callable[[torch.Tensor], torch.Tensor],
              chunk: int = 65536) -> trimesh.Trimesh:
    """Map every vertex with ``warp_forward`` ((M,3) -> (M,3)); connectivity unchanged"""
    verts = torch.from_numpy(np.asarray(mesh.vertices, dtype=np.float64))
    out = np.empty_like(mesh.vertices, dtype=np.float64)
    with torch.no_grad():
        for start in range(0, len(verts), chunk):
            out[start:start + chunk] = warp_forward(verts[start:start + chunk]).numpy()
    posed = trimesh.Trimesh(out, np.asarray(mesh.faces).copy(), process=False)
    colors = getattr(mesh.visual, 'vertex_colors', None)
    if colors is not None and len(colors) == len(out):
        posed.visual.vertex_colors = np.asarray(colors).copy()
    return posed


def sample_points(mesh: trimesh.Trimesh, count: int = EVAL_SAMPLES, seed: int = 0) -> np.ndarray:
    """Area-uniform surface samples"""
    points, _ = trimesh.sample.sample_surface(mesh, count, seed=seed)
    return np.asarray(points, dtype=np.float64)


def chamfer(reference, estimate) -> float:
    """
    Symmetric Chamfer distance: mean squared nearest-neighbour distance from
    each cloud to the other, summed over both directions.

    Raises:
        EmptyCloud: either cloud is empty
    """
    a = np.asarray(reference, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(estimate, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0:
        raise EmptyCloud('reference')
    if len(b) == 0:
        raise EmptyCloud('estimate')
    d_ab, _ = NearestNeighbors(n_neighbors=1, algorithm='brute').fit(b).kneighbors(a)
    d_ba, _ = NearestNeighbors(n_neighbors=1, algorithm='brute').fit(a).kneighbors(b)
    return float((d_ab[:, 0] ** 2).mean() + (d_ba[:, 0] ** 2).mean())


# =============================================================================
# Coloring + PLY
# =============================================================================

def embedding_colors(embeddings: np.ndarray, seed: int = 0) -> np.ndarray:
    """(V,16) unit embeddings -> (V,4) uint8 RGBA via a fixed random projection"""
    emb = np.asarray(embeddings, dtype=np.float64)
    proj = np.random.default_rng(seed).standard_normal((emb.shape[-1], 3))
    rgb = emb @ proj
    lo, hi = rgb.min(axis=0), rgb.max(axis=0)
    rgb = (rgb - lo) / np.where(hi > lo, hi - lo, 1.0)
    return _rgba(rgb)


def skinning_colors(weights: np.ndarray, seed: int = 0) -> np.ndarray:
    """(V,B) skinning weights -> (V,4) uint8 RGBA, blend of one palette color per bone"""
    w = np.asarray(weights, dtype=np.float64)
    palette = np.random.default_rng(seed).uniform(0.15, 1.0, size=(w.shape[-1], 3))
    return _rgba(w @ palette)


def _rgba(rgb: np.ndarray) -> np.ndarray:
    rgb8 = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
    return np.concatenate([rgb8, np.full((len(rgb8), 1), 255, dtype=np.uint8)], axis=-1)


def export_ply(mesh: trimesh.Trimesh, path: str, colors: Optional[np.ndarray] = None):
    """ASCII PLY, optional per-vertex RGBA"""
    out = trimesh.Trimesh(np.asarray(mesh.vertices), np.asarray(mesh.faces), process=False)
    if colors is not None:
        out.visual.vertex_colors = colors
    data = trimesh.exchange.ply.export_ply(out, encoding='ascii', include_attributes=False)
    with open(path, 'wb') as f:
        f.write(data)


def load_ply(path: str) -> trimesh.Trimesh:
    return trimesh.load(path, process=False, force='mesh')
