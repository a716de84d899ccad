"""
Uçtan uca sarkaç senaryosu: yeniden yapılandırma, ablasyon yönleri, yeniden hedefleme

Dakikalar sürer; `pytest -m "not slow"` ile atlanır.
"""

from pathlib import Path

import numpy as np
import pytest

from src.core.config import ConfigManager
from src.core.constants import Ablation
from src.data_handlers.dataset_io import load_dataset
from src.data_handlers.synth import export_dataset, fixture_script
from src.ml_engine.fit import FitConfig, fit, retarget, shared_checksums
from src.services.evaluation_service import EvaluationService
from src.utils.logging_utils import parse_metrics_line

pytestmark = pytest.mark.slow

ROOT = Path(__file__).resolve().parent.parent
TAIL = 50


def pendulum_config(**changes) -> FitConfig:
    config = FitConfig.from_config(ConfigManager(str(ROOT / 'configs' / 'pendulum.ini')))
    data = config.to_dict()
    data.update(changes)
    return FitConfig.from_dict(data)


def metric_rows(out_dir):
    lines = (Path(out_dir) / 'metrics.log').read_text().strip().splitlines()
    return [parse_metrics_line(line) for line in lines]


def tail_mean(rows, key: str) -> float:
    return float(np.mean([row[key] for row in rows[-TAIL:]]))


def head_mean(rows, key: str) -> float:
    return float(np.mean([row[key] for row in rows[:TAIL]]))


def mean_rms(model, dataset) -> float:
    service = EvaluationService(model, dataset, resolution=64, samples=2000)
    report = service.eval_reconstruction()
    assert (report['status'] == 'ok').all()
    return float(report['rms'].mean())


def bbox_diagonal(dataset) -> float:
    points = np.concatenate([dataset.ground_truth_points(f) for f in range(dataset.num_frames)])
    return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))


@pytest.fixture(scope='module')
def pendulum(tmp_path_factory):
    path = tmp_path_factory.mktemp('e2e') / 'pendulum'
    export_dataset(fixture_script('pendulum'), path, num_points=2000, with_meshes=False)
    return load_dataset(path)


@pytest.fixture(scope='module')
def reference(pendulum, tmp_path_factory):
    out = tmp_path_factory.mktemp('reference')
    state = fit(pendulum, pendulum_config(), out)
    return state, metric_rows(out), mean_rms(state.model, pendulum)


class TestPendulumReconstruction:

    def test_losses_converge(self, reference):
        _, rows, _ = reference
        assert len(rows) == 2000
        assert tail_mean(rows, 'sil') < 0.01
        assert tail_mean(rows, 'rgb') < 0.02

    def test_chamfer_below_bbox_fraction(self, reference, pendulum):
        _, _, rms = reference
        assert rms < 0.05 * bbox_diagonal(pendulum)


class TestAblationDirections:

    @pytest.mark.parametrize('flag, factor', [
        (Ablation.NO_CANONICAL_EMBEDDING, 2.0),
        (Ablation.NO_FLOW, 2.0),
        (Ablation.NO_ROOT_INIT, 2.0),
        (Ablation.NO_ACTIVE_SAMPLING, 1.2),
    ])
    def test_ablation_is_worse(self, flag, factor, reference, pendulum):
        _, _, reference_rms = reference
        state = fit(pendulum, pendulum_config(ablations=[flag.value]))
        assert mean_rms(state.model, pendulum) >= factor * reference_rms


class TestRetargetEndToEnd:

    def test_self_retarget(self, reference, pendulum, tmp_path):
        state, rows, _ = reference
        before = shared_checksums(state.model)
        result = retarget(state.model, pendulum, state.config, tmp_path, iterations=500)
        assert result.checksums == before
        assert tail_mean(metric_rows(tmp_path), 'rgb') < 2.0 * tail_mean(rows, 'rgb')

    def test_drive_new_sequence(self, reference, tmp_path):
        state, _, _ = reference
        path = tmp_path / 'drive'
        export_dataset(fixture_script('pendulum-drive'), path, num_points=500, with_meshes=False)
        retarget(state.model, load_dataset(path), state.config, tmp_path / 'out', iterations=1000)
        rows = metric_rows(tmp_path / 'out')
        assert tail_mean(rows, 'sil') * 5.0 <= head_mean(rows, 'sil')
