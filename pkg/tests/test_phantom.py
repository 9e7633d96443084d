import numpy as np
import pytest

from csmri.phantom import ellipse_sum, shepp_logan


def test_dimensions_match_request():
    img = shepp_logan(64, 96)
    assert img.shape == (64, 96)
    assert img.dtype == np.complex128


def test_corner_is_outside_skull():
    img = shepp_logan(128, 128)
    assert img[0, 0] == 0
    assert img[-1, -1] == 0


def test_center_pixel_matches_analytic_sum():
    img = shepp_logan(128, 128)
    # pixel (64, 64) sits exactly at the origin: inside the two big
    # ellipses only, (2.0 - 0.98) scaled by the 2.0 peak
    assert abs(img[64, 64].real - ellipse_sum(0.0, 0.0)) < 1e-12
    assert abs(img[64, 64].real - 0.51) < 1e-12


def test_values_in_unit_range_and_real():
    img = shepp_logan(96, 96)
    assert np.abs(img.imag).max() == 0
    assert img.real.min() >= 0
    assert img.real.max() <= 1.0
    # the skull ring reaches the peak
    assert img.real.max() == 1.0


def test_deterministic():
    assert np.array_equal(shepp_logan(64, 64), shepp_logan(64, 64))


def test_rejects_small_or_odd_dims():
    with pytest.raises(ValueError):
        shepp_logan(16, 64)
    with pytest.raises(ValueError):
        shepp_logan(64, 65)


def test_raster_matches_pointwise_oracle():
    img = shepp_logan(32, 32)
    rng = np.random.default_rng(0)
    for _ in range(20):
        i = int(rng.integers(0, 32))
        j = int(rng.integers(0, 32))
        x = (j - 16) * (2.0 / 32)
        y = (16 - i) * (2.0 / 32)
        assert abs(img[i, j].real - ellipse_sum(x, y)) < 1e-12
