import numpy as np
import pytest

from csmri.fourier import fft2c
from csmri.masks import MaskSpec, generate_cartesian_mask
from csmri.phantom import shepp_logan


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def complex_noise(rng, shape, sigma):
    """Complex Gaussian with E|n|^2 = sigma^2 per sample."""
    return sigma * (rng.standard_normal(shape)
                    + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@pytest.fixture(scope="session")
def phantom128():
    return shepp_logan(128, 128)


@pytest.fixture(scope="session")
def mask128_r4():
    return generate_cartesian_mask(MaskSpec(128, 128, 4.0, 20, 1.0, 1234))


@pytest.fixture(scope="session")
def kspace128_r4(phantom128, mask128_r4):
    return np.where(mask128_r4.sampled, fft2c(phantom128), 0)
