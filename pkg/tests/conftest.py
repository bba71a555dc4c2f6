"""
Shared test configuration and fixtures.
"""

import pytest
import os
import tempfile
import shutil
from unittest.mock import patch


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='Run long acceptance sweeps')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running acceptance sweep, enabled with --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def mock_env_vars():
    """Automatically pin environment variables for all tests."""
    with patch.dict(os.environ, {
        'POPCORN_WORKERS': '1',
        'POPCORN_OUTPUT_DIR': os.path.join(tempfile.gettempdir(), 'popcorn-test-reports'),
    }):
        yield


@pytest.fixture
def temp_test_dir():
    """Create a temporary directory for test files."""
    test_dir = tempfile.mkdtemp()
    yield test_dir
    shutil.rmtree(test_dir)
