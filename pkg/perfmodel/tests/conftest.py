from pathlib import Path

import pytest
from django.conf import settings

from perfmodel.config import load_config

from .factories import make_config

CONFIGS_DIR = Path(settings.PERFMODEL_SETTINGS['CONFIGS_DIR'])


@pytest.fixture
def base_config():
    return make_config()


@pytest.fixture
def table8_config():
    return load_config(CONFIGS_DIR / 'table8.cfg')


@pytest.fixture
def table6_config():
    return load_config(CONFIGS_DIR / 'table6.cfg')


@pytest.fixture
def configs_dir():
    return CONFIGS_DIR


@pytest.fixture
def write_config(tmp_path):
    """Write config text to a temp file and return its path."""
    def _write(text: str, name: str = 'test.cfg') -> Path:
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return _write
