#!/usr/bin/env python3
"""
Environment Variable Loader Helper
Loads sqz settings from a .env file (if available) and the process environment
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

from errors import ConfigError

logger = logging.getLogger(__name__)

ENV_FILES = ['.env', '../.env', '../../.env']


@dataclass(frozen=True)
class Settings:
    sample_rate_hz: float = 15360.0
    fundamental_hz: float = 60.0
    seed: int = 0
    quant_scale: float = 0.001
    wavelet_levels: int = 5
    quantizer_bits: int = 12
    log_level: str = "WARNING"
    stub_table_path: Optional[str] = None
    catalog_path: Optional[str] = None


# env var -> (field, parser)
_VARIABLES = {
    'SQZ_SAMPLE_RATE_HZ': ('sample_rate_hz', float),
    'SQZ_FUNDAMENTAL_HZ': ('fundamental_hz', float),
    'SQZ_SEED': ('seed', int),
    'SQZ_QUANT_SCALE': ('quant_scale', float),
    'SQZ_WAVELET_LEVELS': ('wavelet_levels', int),
    'SQZ_QUANTIZER_BITS': ('quantizer_bits', int),
    'SQZ_LOG_LEVEL': ('log_level', str),
    'SQZ_STUB_TABLE': ('stub_table_path', str),
    'SQZ_DEVICE_CATALOG': ('catalog_path', str),
}


def load_env():
    """Load environment variables from the first .env file found"""
    for env_file in ENV_FILES:
        if os.path.exists(env_file):
            load_dotenv(env_file)
            logger.debug("loaded environment variables from %s", env_file)
            return True
    # Falls back to dotenv's own search from the working directory
    return load_dotenv()


def get_settings(environ=None):
    """Build Settings from the environment, loading .env first"""
    if environ is None:
        load_env()
        environ = os.environ

    values = {}
    for variable, (field, parse) in _VARIABLES.items():
        raw = environ.get(variable)
        if raw is None or raw.strip() == '':
            continue
        try:
            values[field] = parse(raw.strip())
        except ValueError:
            raise ConfigError(f"{variable} has an invalid value: {raw!r}") from None

    settings = Settings(**values)
    if settings.sample_rate_hz <= 0:
        raise ConfigError("SQZ_SAMPLE_RATE_HZ must be positive")
    if settings.quant_scale <= 0:
        raise ConfigError("SQZ_QUANT_SCALE must be positive")
    if not 4 <= settings.quantizer_bits <= 16:
        raise ConfigError("SQZ_QUANTIZER_BITS must be within 4..16")
    if settings.wavelet_levels < 1:
        raise ConfigError("SQZ_WAVELET_LEVELS must be at least 1")
    return settings


if __name__ == "__main__":
    # Show the effective settings
    print(get_settings())
