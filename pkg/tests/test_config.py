"""
Konfigürasyon yöneticisi ve FitConfig.from_config testleri
"""

from pathlib import Path

import pytest

from src.core.config import ConfigManager
from src.core.constants import Ablation
from src.ml_engine.fit import FitConfig
from src.utils.exceptions import ConfigurationError

ROOT = Path(__file__).resolve().parent.parent


def write_ini(tmp_path, text: str) -> str:
    path = tmp_path / 'run.ini'
    path.write_text(text, encoding='utf-8')
    return str(path)


class TestConfigManager:

    def test_defaults(self):
        cfg = ConfigManager()
        assert cfg.seed == 0
        assert cfg.get('Fit', 'iterations') == 'auto'
        assert cfg.get_int('Render', 'samples_per_ray') == 128
        assert cfg.get_floats('Fit', 'initial_bounds', 6) == (-1.0, -1.0, -1.0, 1.0, 1.0, 1.0)
        assert cfg.get_bool('Ablation', 'disable_flow') is False

    def test_config_path(self, tmp_path):
        assert ConfigManager().config_path is None
        path = write_ini(tmp_path, "[Run]\nseed = 1\n")
        assert ConfigManager(path).config_path == path
        with pytest.raises(TypeError):
            ConfigManager(path, app_dir=str(tmp_path))

    def test_file_overrides(self, tmp_path):
        cfg = ConfigManager(write_ini(tmp_path, "[Fit]\nbones = 8  # az kemik\n[Run]\nseed = 7\n"))
        assert cfg.get_int('Fit', 'bones') == 8
        assert cfg.seed == 7
        assert cfg.get_int('Fit', 'grid_size') == 20

    def test_unknown_key_is_an_error(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ConfigManager(write_ini(tmp_path, "[Fit]\nbonez = 8\n"))
        with pytest.raises(ConfigurationError):
            ConfigManager(write_ini(tmp_path, "[Extra]\nx = 1\n"))
        with pytest.raises(ConfigurationError):
            ConfigManager().get('Fit', 'nope')

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as info:
            ConfigManager(str(tmp_path / 'missing.ini'))
        assert info.value.exit_code == 2

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv('AMB_FIT_BONES', '12')
        assert ConfigManager().get_int('Fit', 'bones') == 12

    def test_type_errors(self, tmp_path):
        cfg = ConfigManager(write_ini(tmp_path, "[Fit]\nbones = many\ninitial_bounds = 1, 2\n"))
        with pytest.raises(ConfigurationError):
            cfg.get_int('Fit', 'bones')
        with pytest.raises(ConfigurationError):
            cfg.get_floats('Fit', 'initial_bounds', 6)

    def test_set_and_snapshot(self, tmp_path):
        cfg = ConfigManager()
        cfg.set('Run', 'seed', 5)
        assert cfg.to_dict()['Run']['seed'] == '5'
        with pytest.raises(ConfigurationError):
            cfg.set('Run', 'speed', 1)
        snapshot = tmp_path / 'snapshot.ini'
        cfg.save(str(snapshot))
        assert ConfigManager(str(snapshot)).seed == 5


class TestFitConfigFromIni:

    @pytest.mark.parametrize('name', ['config.ini', 'configs/pendulum.ini'])
    def test_shipped_configs_parse(self, name):
        config = FitConfig.from_config(ConfigManager(str(ROOT / name)))
        assert config.samples_per_ray >= 2
        assert not config.ablations

    def test_pendulum_sizes(self):
        config = FitConfig.from_config(ConfigManager(str(ROOT / 'configs' / 'pendulum.ini')))
        assert config.iterations == 2000
        assert config.bones == 8
        assert config.field_width == 64

    def test_auto_iterations(self):
        assert FitConfig.from_config(ConfigManager()).iterations is None

    def test_ablation_sources_combine(self, tmp_path):
        cfg = ConfigManager(write_ini(tmp_path, "[Ablation]\ndisable_flow = true\n"))
        config = FitConfig.from_config(cfg, ablate=['no-root-init'])
        assert config.ablations == {Ablation.NO_FLOW.value, Ablation.NO_ROOT_INIT.value}

    def test_bad_values_become_configuration_errors(self, tmp_path):
        with pytest.raises(ConfigurationError):
            FitConfig.from_config(ConfigManager(), ablate=['no-everything'])
        with pytest.raises(ConfigurationError):
            FitConfig.from_config(ConfigManager(write_ini(tmp_path, "[Fit]\ndeformation = spline\n")))
        with pytest.raises(ConfigurationError):
            FitConfig.from_config(ConfigManager(write_ini(tmp_path, "[Fit]\ngrid_size = 0\n")))
