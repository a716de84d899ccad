"""
Animatable Model Builder - Data Handlers Package
================================================
"""

from .dataset_io import Dataset, content_hash, load_dataset, read_raw, write_raw
from .synth import SceneScript, analytic_sdf, export_dataset, fixture_script, render_oracle
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    # Dataset layout
    'Dataset',
    'load_dataset',
    'content_hash',
    'read_raw',
    'write_raw',
    # Synthetic oracle
    'SceneScript',
    'analytic_sdf',
    'render_oracle',
    'export_dataset',
    'fixture_script',
    # Checkpoints
    'save_checkpoint',
    'load_checkpoint',
]
