import os

import numpy as np
import pytest

from paraspec.time_change import normalize_alpha

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


@pytest.fixture(scope="session")
def tc01():
    """alpha = c (1 + 0.1 u), normalized with the default sample size."""
    return normalize_alpha("discriminant", 0.1, seed=1)


@pytest.fixture(scope="session")
def tc0():
    return normalize_alpha("discriminant", 0.0, seed=1)


@pytest.fixture
def rs():
    return np.random.default_rng(12345)
