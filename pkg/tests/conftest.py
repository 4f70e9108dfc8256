import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lidarsr.geometry import build_sensor  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_geometry():
    """8 x 32 grid spanning below-horizon angles, 100 m range."""
    return build_sensor(np.linspace(-0.4, 0.03, 8), 32, 100.0)


@pytest.fixture
def desk_geometry():
    """32 x 128 grid used by the synthetic training experiments."""
    return build_sensor(np.linspace(-0.45, 0.05, 32), 128, 100.0)
