"""
Komut satırı testleri: alt komutlar, manifest, çıkış kodları
"""

import json

import numpy as np
import pandas as pd
import pytest

from app.main import MANIFEST_FILE, azimuth_modifier, main, parse_frames
from src.data_handlers.dataset_io import content_hash, read_flow_grid, read_gray
from src.utils.exceptions import ValidationError

from tests.conftest import tiny_script

TINY_INI = """
[Run]
seed = 3

[Fit]
iterations = 4
pixels_per_batch = 32
active_pixels = 8
active_candidates = 64
bones = 4
grid_size = 6
bounds_refresh_every = 2
bounds_resolution = 16
checkpoint_every = 2
field_width = 16
field_depth = 2
small_width = 8
small_depth = 1
xyz_frequencies = 2
dir_frequencies = 1

[Render]
samples_per_ray = 8
chunk = 4096
"""


@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
    """Sentetik veri + küçük bir fit koşusu (modül boyunca paylaşılır)"""
    root = tmp_path_factory.mktemp('cli')
    script_path = root / 'tiny.json'
    tiny_script().save(script_path)
    ini = root / 'tiny.ini'
    ini.write_text(TINY_INI, encoding='utf-8')

    assert main(['synth', str(script_path), str(root / 'data'), '--points', '300', '--no-meshes']) == 0
    assert main(['--config', str(ini), 'fit', str(root / 'data'), str(root / 'fit')]) == 0
    return root


class TestHelpers:

    def test_parse_frames(self):
        assert parse_frames(None, 5) == [None]
        assert parse_frames('rest', 5) == [None]
        assert parse_frames('all', 3) == [0, 1, 2]
        assert parse_frames('0,4', 5) == [0, 4]
        with pytest.raises(ValidationError):
            parse_frames('7', 5)
        with pytest.raises(ValidationError):
            parse_frames('a,b', 5)

    def test_azimuth_modifier(self):
        assert azimuth_modifier(0.0) is None
        assert azimuth_modifier(90.0).shape == (3, 4)


class TestUsage:

    def test_missing_arguments_exit_one(self):
        with pytest.raises(SystemExit) as info:
            main(['fit'])
        assert info.value.code == 1

    def test_unknown_command_exits_one(self):
        with pytest.raises(SystemExit) as info:
            main(['train', 'x'])
        assert info.value.code == 1

    def test_unknown_fixture_exits_two(self, tmp_path):
        assert main(['synth', 'octopus', str(tmp_path / 'out')]) == 2

    def test_bad_config_exits_two(self, tmp_path):
        ini = tmp_path / 'bad.ini'
        ini.write_text("[Fit]\nbonez = 3\n", encoding='utf-8')
        assert main(['--config', str(ini), 'synth', 'pendulum', str(tmp_path / 'out')]) == 2

    def test_missing_dataset_exits_two(self, tmp_path):
        assert main(['fit', str(tmp_path / 'nowhere'), str(tmp_path / 'out')]) == 2

    def test_missing_checkpoint_exits_two(self, tmp_path):
        code = main(['extract', str(tmp_path / 'nope.pt'), str(tmp_path / 'out')])
        assert code == 2


class TestSynth:

    def test_hash_printed_and_deterministic(self, workspace, tmp_path, capsys):
        capsys.readouterr()
        assert main(['synth', str(workspace / 'tiny.json'), str(tmp_path / 'again'),
                     '--points', '300', '--no-meshes']) == 0
        printed = capsys.readouterr().out.strip().splitlines()[-1]
        assert printed == content_hash(tmp_path / 'again') == content_hash(workspace / 'data')


class TestFit:

    def test_outputs(self, workspace):
        out = workspace / 'fit'
        assert len((out / 'metrics.log').read_text().strip().splitlines()) == 4
        assert (out / 'checkpoint.pt').is_file()
        assert (out / 'checkpoints' / 'ckpt_000002.pt').is_file()
        assert (out / 'logs').is_dir()

    def test_manifest(self, workspace):
        manifest = json.loads((workspace / 'fit' / MANIFEST_FILE).read_text())
        assert manifest['command'] == 'fit'
        assert manifest['seed'] == 3
        assert manifest['dataset_hash'] == content_hash(workspace / 'data')
        assert manifest['config']['fit']['iterations'] == 4
        assert manifest['config']['source'] == str(workspace / 'tiny.ini')

    def test_repeat_run_is_bit_identical(self, workspace, tmp_path):
        assert main(['--config', str(workspace / 'tiny.ini'), 'fit', str(workspace / 'data'),
                     str(tmp_path / 'again')]) == 0
        assert (tmp_path / 'again' / 'metrics.log').read_bytes() == \
            (workspace / 'fit' / 'metrics.log').read_bytes()

    def test_resume(self, workspace, tmp_path):
        code = main(['--config', str(workspace / 'tiny.ini'), 'fit', str(workspace / 'data'),
                     str(tmp_path / 'resumed'),
                     '--resume', str(workspace / 'fit' / 'checkpoints' / 'ckpt_000002.pt')])
        assert code == 0
        assert len((tmp_path / 'resumed' / 'metrics.log').read_text().strip().splitlines()) == 2

    def test_ablation_recorded(self, workspace, tmp_path):
        code = main(['--config', str(workspace / 'tiny.ini'), 'fit', str(workspace / 'data'),
                     str(tmp_path / 'ablated'), '--ablate', 'no-flow', '--until', '1'])
        assert code == 0
        manifest = json.loads((tmp_path / 'ablated' / MANIFEST_FILE).read_text())
        assert manifest['config']['fit']['ablations'] == ['no-flow']


class TestModelCommands:

    def test_extract(self, workspace, tmp_path):
        code = main(['extract', str(workspace / 'fit' / 'checkpoint.pt'), str(tmp_path),
                     '--frames', '0,4', '--bones', '--color', 'embedding', '--resolution', '16'])
        assert code == 0
        assert (tmp_path / 'frame_0000.ply').is_file()
        assert (tmp_path / 'frame_0004.ply').is_file()
        assert len((tmp_path / 'frame_0004_bones.txt').read_text().splitlines()) == 4

    def test_extract_rest(self, workspace, tmp_path):
        assert main(['extract', str(workspace / 'fit' / 'checkpoint.pt'), str(tmp_path),
                     '--resolution', '16']) == 0
        assert (tmp_path / 'rest.ply').is_file()

    def test_extract_bad_frames(self, workspace, tmp_path):
        assert main(['extract', str(workspace / 'fit' / 'checkpoint.pt'), str(tmp_path),
                     '--frames', '99']) == 2

    def test_render_novel_view(self, workspace, tmp_path):
        code = main(['render', str(workspace / 'fit' / 'checkpoint.pt'), str(tmp_path),
                     '--frames', '1', '--azimuth', '90', '--samples', '4'])
        assert code == 0
        assert (tmp_path / 'frame_0001_az90_rgb.ppm').is_file()
        assert (tmp_path / 'frame_0001_az90_sil.pgm').is_file()
        assert (tmp_path / 'frame_0001_az90_unc.pgm').is_file()
        flow = read_flow_grid(tmp_path / 'frame_0001_az90_flow_to_0002.txt')
        assert flow.shape == (16, 16, 2) and np.isfinite(flow).all()

    def test_render_opacity_is_continuous(self, workspace, tmp_path):
        assert main(['render', str(workspace / 'fit' / 'checkpoint.pt'), str(tmp_path),
                     '--frames', '2']) == 0
        opacity = read_gray(tmp_path / 'frame_0002_sil.pgm')
        assert len(np.unique(opacity)) > 2
        assert (tmp_path / 'frame_0002_flow_to_0001.txt').is_file()

    def test_eval(self, workspace, tmp_path):
        code = main(['eval', str(workspace / 'fit' / 'checkpoint.pt'), str(workspace / 'data'),
                     str(tmp_path), '--resolution', '16', '--samples', '300'])
        assert code == 0
        report = pd.read_csv(tmp_path / 'eval.csv')
        assert report['frame'].tolist() == list(range(6))
        assert json.loads((tmp_path / 'eval.json').read_text())['frames'] == 6

    def test_retarget(self, workspace, tmp_path):
        code = main(['--config', str(workspace / 'tiny.ini'), 'retarget',
                     str(workspace / 'fit' / 'checkpoint.pt'), str(workspace / 'data'), str(tmp_path),
                     '--iterations', '2'])
        assert code == 0
        checksums = json.loads((tmp_path / 'shared_checksums.json').read_text())
        assert checksums and all(len(v) == 64 for v in checksums.values())
        assert (tmp_path / 'checkpoint.pt').is_file()
