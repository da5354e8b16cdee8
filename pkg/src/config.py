"""
Configuration for TexSeek

Settings come from a dotenv-format config file (``--config`` or the
TEXSEEK_CONFIG environment variable); anything not set keeps its default.
"""
import hashlib
import os
import pathlib
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from dotenv import dotenv_values

from src.errors import ConfigError
from src.imaging.dct import ANNEX_K_LUMINANCE
from src.imaging.gabor import BankConfig

CONFIG_ENV_VAR = "TEXSEEK_CONFIG"

_BANK_KEYS = {
    "scales": int,
    "orientations": int,
    "freq_low": float,
    "freq_high": float,
    "kernel_radius": int,
}
_BOOL_KEYS = ("parity_dc", "standardize")
_KNOWN_KEYS = set(_BANK_KEYS) | set(_BOOL_KEYS) | {"quant_table"}


@dataclass(frozen=True, eq=False)
class Settings:
    bank: BankConfig = field(default_factory=BankConfig)
    quant_table: np.ndarray = field(default_factory=lambda: ANNEX_K_LUMINANCE)
    parity_dc: bool = False
    standardize: bool = False

    def with_parity_dc(self, parity_dc: Optional[bool]) -> "Settings":
        """Copy with parity_dc overridden when a value is given"""
        return self if parity_dc is None else replace(self, parity_dc=parity_dc)


def load_quant_table(text: str) -> np.ndarray:
    """
    Parse a quantization table override

    Args:
        text: 64 whitespace-separated positive integers in row-major order

    Returns:
        The (8, 8) table
    """
    tokens = text.split()
    if len(tokens) != 64:
        raise ConfigError(f"quantization table needs 64 integers, got {len(tokens)}")
    try:
        values = [int(token) for token in tokens]
    except ValueError as exc:
        raise ConfigError(f"quantization table entry is not an integer: {exc}") from exc
    if min(values) < 1:
        raise ConfigError("quantization table entries must be at least 1")
    table = np.array(values, dtype=np.int64).reshape(8, 8)
    table.setflags(write=False)
    return table


def _parse_bool(key: str, raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {raw!r}")


def load_settings(path: Optional[Union[str, pathlib.Path]] = None) -> Settings:
    """
    Load settings from a config file

    Args:
        path: Config file; falls back to TEXSEEK_CONFIG, then to defaults

    Returns:
        The resolved Settings
    """
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return Settings()

    config_path = pathlib.Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    values = dotenv_values(config_path)

    unknown = sorted(set(values) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    bank_args = {}
    for key, cast in _BANK_KEYS.items():
        if values.get(key) is not None:
            try:
                bank_args[key] = cast(values[key])
            except ValueError as exc:
                raise ConfigError(f"{key} must be a number, got {values[key]!r}") from exc

    table = ANNEX_K_LUMINANCE
    if values.get("quant_table"):
        table_path = config_path.parent / values["quant_table"]
        try:
            table = load_quant_table(table_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read quantization table {table_path}: {exc}") from exc

    flags = {key: _parse_bool(key, values[key]) for key in _BOOL_KEYS if values.get(key) is not None}
    return Settings(bank=BankConfig(**bank_args), quant_table=table, **flags)


def config_hash(settings: Settings) -> str:
    """
    Fingerprint the settings that make feature vectors and stego bits comparable

    Returns:
        16 lowercase hex characters
    """
    bank = settings.bank
    canonical = "|".join([
        f"scales={bank.scales}",
        f"orientations={bank.orientations}",
        f"freq_low={bank.freq_low!r}",
        f"freq_high={bank.freq_high!r}",
        f"kernel_radius={bank.kernel_radius}",
        "quant=" + ",".join(str(int(v)) for v in np.asarray(settings.quant_table).ravel()),
        f"parity_dc={int(settings.parity_dc)}",
    ])
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
