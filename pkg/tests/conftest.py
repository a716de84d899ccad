"""
Ortak test fikstürleri: küçük sentetik veri seti ve hızlı FitConfig
"""

import math

import pytest

from src.data_handlers.dataset_io import load_dataset
from src.data_handlers.synth import BoneMotion, Capsule, SceneScript, VideoScript, export_dataset
from src.ml_engine.fit import FitConfig


def tiny_script(name: str = 'tiny', amplitude: float = 30.0) -> SceneScript:
    """16x16 iki videolu sarkaç, video başına 3 kare"""
    return SceneScript(
        name=name, height=16, width=16, focal=24.0,
        capsules=[
            Capsule((0.0, 0.0, 0.0), (0.0, 0.35, 0.0), 0.15, -1, (0.85, 0.35, 0.25)),
            Capsule((0.0, 0.0, 0.0), (0.0, -0.4, 0.0), 0.12, 0, (0.25, 0.45, 0.85)),
        ],
        bones=[BoneMotion((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), amplitude)],
        videos=[VideoScript(3, 0.0, 40.0, 10.0), VideoScript(3, 45.0, 40.0, -10.0, math.pi / 2.0)],
    )


def tiny_fit_config(**overrides) -> FitConfig:
    values = dict(
        iterations=4, pixels_per_batch=32, active_pixels=8, active_candidates=64,
        bones=4, grid_size=6, bounds_refresh_every=2, bounds_resolution=16, checkpoint_every=2,
        field_width=16, field_depth=2, small_width=8, small_depth=1,
        xyz_frequencies=2, dir_frequencies=1, samples_per_ray=8, chunk=4096, seed=3,
    )
    values.update(overrides)
    return FitConfig(**values)


@pytest.fixture(scope='session')
def tiny_dataset_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp('data') / 'tiny'
    export_dataset(tiny_script(), path, num_points=300, mesh_resolution=20)
    return path


@pytest.fixture(scope='session')
def tiny_dataset(tiny_dataset_dir):
    return load_dataset(tiny_dataset_dir)


@pytest.fixture
def fit_config():
    return tiny_fit_config()
