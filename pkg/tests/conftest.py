import numpy as np
import pytest

from fernmatch import GrayImage
from fernmatch.texture import synthetic_texture


@pytest.fixture
def ramp_image():
    """Deterministic 64x64 gradient-ish image with distinct pixel values."""
    ys, xs = np.mgrid[0:64, 0:64]
    return GrayImage(((3 * xs + 5 * ys) % 256).astype(np.uint8))


@pytest.fixture(scope="session")
def small_texture():
    """128x128 textured image, enough corners for small training runs."""
    return synthetic_texture(128, 128, seed=11, num_shapes=80)


@pytest.fixture(scope="session")
def medium_texture():
    """256x256 textured image for pipeline-level tests."""
    return synthetic_texture(256, 256, seed=7, num_shapes=150)
