import numpy as np
import pytest

from app.coding.construct import EfficientEncoder, build_base
from app.coding.css import build_css, make_key_map


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy_code():
    """p=3, j=2, k=2: 6x12, dimension 6."""
    return build_base(3, 2, 2)


@pytest.fixture(scope="session")
def small_code():
    """p=5, j=2, k=3: 10x25, dimension 15, five key bits."""
    return build_base(5, 2, 3)


@pytest.fixture(scope="session")
def small_pair(small_code):
    return build_css(small_code.h, EfficientEncoder(small_code), "lightest")


@pytest.fixture(scope="session")
def small_keymap(small_pair):
    return make_key_map(small_pair)
