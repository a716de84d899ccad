"""
Checkpoint kaydetme/yükleme testleri
"""

from pathlib import Path

import pytest
import torch

from src.core.constants import CHECKPOINT_VERSION
from src.data_handlers.checkpoint import REQUIRED_KEYS, load_checkpoint, save_checkpoint
from src.ml_engine.fit import dataset_meta, load_model, prepare_state
from src.utils.exceptions import CheckpointError


@pytest.fixture
def saved(tiny_dataset, fit_config, tmp_path):
    state = prepare_state(tiny_dataset, fit_config)
    path = save_checkpoint(tmp_path / 'nested' / 'ckpt.pt', state)
    return state, path


class TestCheckpoint:

    def test_payload_fields(self, saved, tiny_dataset):
        state, path = saved
        payload = load_checkpoint(path, dataset_meta(tiny_dataset))
        assert all(key in payload for key in REQUIRED_KEYS)
        assert payload['version'] == CHECKPOINT_VERSION
        assert payload['iteration'] == 0
        assert payload['dataset']['lengths'] == [3, 3]

    def test_model_restored(self, saved):
        state, path = saved
        model = load_model(load_checkpoint(path))
        for name, tensor in model.state_dict().items():
            assert torch.equal(tensor, state.model.state_dict()[name]), name

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / 'nope.pt')

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / 'bad.pt'
        path.write_bytes(b'not a checkpoint')
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_version_mismatch(self, saved, tmp_path):
        _, path = saved
        payload = torch.load(path, weights_only=False)
        payload['version'] = CHECKPOINT_VERSION + 1
        torch.save(payload, tmp_path / 'old.pt')
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / 'old.pt')

    def test_dataset_mismatch(self, saved):
        _, path = saved
        with pytest.raises(CheckpointError) as info:
            load_checkpoint(path, {'lengths': [3, 4], 'image_size': [16, 16]})
        assert info.value.exit_code == 2

    def test_no_temp_file_left(self, saved):
        _, path = saved
        assert [p.name for p in Path(path).parent.iterdir()] == ['ckpt.pt']
