import math

import numpy as np
import pytest

from csmri.metrics import psnr, ssim

from conftest import complex_noise


def test_psnr_identical_is_infinite(phantom128):
    assert math.isinf(psnr(phantom128, phantom128))


def test_psnr_formula_20db():
    ref = np.zeros((16, 16))
    ref[0, 0] = 1.0  # peak 1
    test = ref + 0.1  # MSE 0.01
    assert abs(psnr(ref, test) - 20.0) < 1e-9


def test_psnr_zero_db():
    ref = np.ones((16, 16))
    test = np.zeros((16, 16))
    assert abs(psnr(ref, test)) < 1e-12


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        psnr(np.ones((4, 4)), np.ones((4, 8)))


def test_psnr_monotone_in_noise_power(phantom128):
    rng = np.random.default_rng(0)
    noise = complex_noise(rng, phantom128.shape, 1.0)
    values = [psnr(phantom128, phantom128 + s * noise)
              for s in np.linspace(0.01, 0.5, 10)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_psnr_invariant_to_global_phase(phantom128):
    rng = np.random.default_rng(1)
    test = phantom128 + complex_noise(rng, phantom128.shape, 0.05)
    rot = np.exp(1j * 1.234)
    assert abs(psnr(phantom128, test) - psnr(phantom128 * rot, test * rot)) < 1e-9


def test_ssim_identical_is_one(phantom128):
    assert abs(ssim(phantom128, phantom128) - 1.0) < 1e-12


def test_ssim_constant_images():
    img = np.full((32, 32), 0.5)
    assert abs(ssim(img, img) - 1.0) < 1e-12


def test_ssim_decreases_with_noise(phantom128):
    rng = np.random.default_rng(2)
    a = ssim(phantom128, phantom128 + complex_noise(rng, phantom128.shape, 0.02))
    b = ssim(phantom128, phantom128 + complex_noise(rng, phantom128.shape, 0.2))
    assert b < a < 1.0


def test_ssim_invariant_to_global_phase(phantom128):
    rng = np.random.default_rng(5)
    test = phantom128 + complex_noise(rng, phantom128.shape, 0.05)
    rot = np.exp(1j * 0.87)
    assert abs(ssim(phantom128, test) - ssim(phantom128 * rot, test * rot)) < 1e-12


def test_ssim_symmetric_with_fixed_range(phantom128):
    rng = np.random.default_rng(3)
    test = phantom128 + complex_noise(rng, phantom128.shape, 0.1)
    a = ssim(phantom128, test, dynamic_range=1.0)
    b = ssim(test, phantom128, dynamic_range=1.0)
    assert abs(a - b) < 1e-12


def _ssim_reference(ref, tst, dr):
    """Literal per-window double loop (independent oracle)."""
    n, sig, k1, k2 = 11, 1.5, 0.01, 0.03
    x = np.arange(n) - 5.0
    w1 = np.exp(-x ** 2 / (2 * sig ** 2))
    w = np.outer(w1, w1)
    w /= w.sum()
    c1, c2 = (k1 * dr) ** 2, (k2 * dr) ** 2
    h, wd = ref.shape
    vals = []
    for i in range(h - n + 1):
        for j in range(wd - n + 1):
            a = ref[i:i + n, j:j + n]
            b = tst[i:i + n, j:j + n]
            mu1 = (w * a).sum()
            mu2 = (w * b).sum()
            v1 = (w * a * a).sum() - mu1 ** 2
            v2 = (w * b * b).sum() - mu2 ** 2
            cov = (w * a * b).sum() - mu1 * mu2
            vals.append(((2 * mu1 * mu2 + c1) * (2 * cov + c2))
                        / ((mu1 ** 2 + mu2 ** 2 + c1) * (v1 + v2 + c2)))
    return float(np.mean(vals))


def test_ssim_matches_literal_reference():
    rng = np.random.default_rng(4)
    from csmri.phantom import shepp_logan
    small = shepp_logan(32, 32)
    for trial in range(3):
        noisy = small + complex_noise(rng, small.shape, 0.1)
        got = ssim(small, noisy)
        want = _ssim_reference(np.abs(small), np.abs(noisy),
                               float(np.abs(small).max()))
        assert abs(got - want) < 1e-6
