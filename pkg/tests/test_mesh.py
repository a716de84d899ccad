"""
Yüzey çıkarma, Chamfer mesafesi ve PLY testleri
"""

import numpy as np
import pytest
import torch

from src.ml_engine.mesh import (
    chamfer, clean_mesh, embedding_colors, export_ply, load_ply, marching_cubes, pose_mesh,
    sample_points, skinning_colors, sdf_grid,
)
from src.utils.exceptions import EmptyCloud, EmptySurface, ValidationError

BOUNDS = np.array([[-1.0, 1.0]] * 3)


def sphere_sdf(points: torch.Tensor) -> torch.Tensor:
    return torch.linalg.norm(points, dim=-1) - 0.5


@pytest.fixture(scope='module')
def sphere():
    return marching_cubes(sphere_sdf, BOUNDS, 32)


class TestMarchingCubes:

    def test_sphere_vertices_on_surface(self, sphere):
        radii = np.linalg.norm(sphere.vertices, axis=-1)
        assert len(sphere.faces) > 100
        assert np.abs(radii - 0.5).max() < 0.01

    def test_precomputed_grid(self, sphere):
        grid = sdf_grid(sphere_sdf, BOUNDS, 32)
        again = marching_cubes(grid, BOUNDS, 32)
        assert np.allclose(again.vertices, sphere.vertices)

    def test_no_sign_change(self):
        with pytest.raises(EmptySurface):
            marching_cubes(lambda p: torch.linalg.norm(p, dim=-1) + 1.0, BOUNDS, 16)

    def test_resolution_floor(self):
        with pytest.raises(ValidationError):
            marching_cubes(sphere_sdf, BOUNDS, 4)

    def test_clean_drops_degenerate_faces(self):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0], [5, 5, 5]], dtype=float)
        faces = np.array([[0, 1, 2], [0, 1, 3]])
        mesh = clean_mesh(verts, faces)
        assert len(mesh.faces) == 1 and len(mesh.vertices) == 3
        with pytest.raises(EmptySurface):
            clean_mesh(verts, faces[1:])


class TestPosing:

    def test_translation(self, sphere):
        shift = torch.tensor([0.0, 1.0, 2.0], dtype=torch.float64)
        posed = pose_mesh(sphere, lambda p: p + shift)
        assert np.allclose(posed.vertices, sphere.vertices + shift.numpy())
        assert np.array_equal(posed.faces, sphere.faces)

    def test_sampling(self, sphere):
        pts = sample_points(sphere, 500, seed=1)
        assert pts.shape == (500, 3)
        assert np.abs(np.linalg.norm(pts, axis=-1) - 0.5).max() < 0.02
        assert np.array_equal(pts, sample_points(sphere, 500, seed=1))


class TestChamfer:

    def test_identical(self):
        pts = np.random.default_rng(0).normal(size=(100, 3))
        assert chamfer(pts, pts) == 0.0

    def test_known_value(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        # a->b: 1, b->a: (4 + 1) / 2
        assert chamfer(a, b) == pytest.approx(3.5)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(50, 3)), rng.normal(size=(70, 3))
        assert chamfer(a, b) == pytest.approx(chamfer(b, a))

    def test_empty(self):
        with pytest.raises(EmptyCloud):
            chamfer(np.zeros((0, 3)), np.zeros((3, 3)))
        with pytest.raises(EmptyCloud):
            chamfer(np.zeros((3, 3)), np.zeros((0, 3)))


class TestColoringAndPly:

    def test_embedding_colors(self):
        emb = np.random.default_rng(2).normal(size=(30, 16))
        colors = embedding_colors(emb)
        assert colors.shape == (30, 4) and colors.dtype == np.uint8
        assert (colors[:, 3] == 255).all()
        assert colors[:, :3].min() == 0 and colors[:, :3].max() == 255

    def test_skinning_colors_one_hot(self):
        colors = skinning_colors(np.eye(3))
        assert len({tuple(c) for c in colors[:, :3]}) == 3

    def test_export_ascii_with_colors(self, sphere, tmp_path):
        path = tmp_path / 'sphere.ply'
        colors = embedding_colors(np.asarray(sphere.vertices))
        export_ply(sphere, str(path), colors)
        with open(path, 'rb') as f:
            header = f.read(200).decode('ascii', errors='replace')
        assert header.startswith('ply') and 'format ascii' in header
        loaded = load_ply(str(path))
        assert len(loaded.vertices) == len(sphere.vertices)
        assert len(loaded.faces) == len(sphere.faces)
