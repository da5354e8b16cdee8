"""
Tests for config file loading and the config hash
"""
import numpy as np
import pytest

from src.config import Settings, config_hash, load_quant_table, load_settings
from src.errors import ConfigError
from src.imaging.dct import ANNEX_K_LUMINANCE
from src.imaging.gabor import BankConfig


def test_defaults_without_config():
    settings = load_settings()
    assert settings.bank == BankConfig()
    assert settings.quant_table is ANNEX_K_LUMINANCE
    assert not settings.parity_dc and not settings.standardize


def test_config_file_overrides(tmp_path):
    (tmp_path / "table.txt").write_text(" ".join(["4"] * 64))
    config = tmp_path / "texseek.env"
    config.write_text("# bank\nscales=4\norientations=8\nparity_dc=yes\nstandardize=off\nquant_table=table.txt\n")
    settings = load_settings(config)
    assert (settings.bank.scales, settings.bank.orientations) == (4, 8)
    assert settings.parity_dc is True
    assert settings.standardize is False
    assert np.all(settings.quant_table == 4)


def test_config_from_environment(tmp_path, monkeypatch):
    config = tmp_path / "texseek.env"
    config.write_text("kernel_radius=12\n")
    monkeypatch.setenv("TEXSEEK_CONFIG", str(config))
    assert load_settings().bank.kernel_radius == 12


@pytest.mark.parametrize("content", [
    "colour=blue\n",
    "scales=many\n",
    "parity_dc=perhaps\n",
    "scales=1\n",
    "quant_table=missing.txt\n",
])
def test_bad_config(tmp_path, content):
    config = tmp_path / "texseek.env"
    config.write_text(content)
    with pytest.raises(ConfigError):
        load_settings(config)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_settings(tmp_path / "nope.env")


@pytest.mark.parametrize("text", ["1 " * 63, "1 " * 63 + "x", "0 " * 64])
def test_bad_quant_table(text):
    with pytest.raises(ConfigError):
        load_quant_table(text)


def test_with_parity_dc():
    settings = Settings()
    assert settings.with_parity_dc(None) is settings
    assert settings.with_parity_dc(True).parity_dc is True


def test_config_hash():
    base = config_hash(Settings())
    assert len(base) == 16
    assert int(base, 16) >= 0
    assert config_hash(Settings()) == base
    assert config_hash(Settings(bank=BankConfig(kernel_radius=10))) != base
    assert config_hash(Settings(parity_dc=True)) != base
    # standardize only affects query-time scoring
    assert config_hash(Settings(standardize=True)) == base
