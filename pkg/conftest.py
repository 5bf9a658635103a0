"""
Shared fixtures for the elm-adapt test suite
"""

import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from elm_adapt.mesh import interval_mesh, rectangle_mesh  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


@pytest.fixture
def unit_interval():
    return interval_mesh(0.0, 1.0, 16)


@pytest.fixture
def unit_square():
    return rectangle_mesh((0.0, 0.0), (1.0, 1.0), 4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
