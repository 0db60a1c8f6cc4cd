import numpy as np
import pytest

from aquaclear import ImageF


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_image(rng):
    """Factory for random float images in [0, 1]."""

    def _make(channels=3, height=16, width=16):
        return ImageF(rng.random((channels, height, width)))

    return _make
