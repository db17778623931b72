import numpy as np
import pytest

from bispeckle.camera import (
    CameraSpec,
    PhotonImage,
    bin_intensity,
    detect,
    rotate180,
)
from bispeckle.errors import CalibrationError, ParameterError


def ideal_spec(pixels=128, eta=1.0):
    return CameraSpec(
        pixels=pixels, pitch=16.0, quantum_efficiency=eta, read_noise_sigma=0.0, mode="ideal"
    )


def test_camera_spec_validation():
    with pytest.raises(ParameterError):
        CameraSpec(pixels=0, pitch=16.0, quantum_efficiency=0.26)
    with pytest.raises(ParameterError):
        CameraSpec(pixels=64, pitch=-1.0, quantum_efficiency=0.26)
    with pytest.raises(ParameterError):
        CameraSpec(pixels=64, pitch=16.0, quantum_efficiency=1.3)
    with pytest.raises(ParameterError):
        CameraSpec(pixels=64, pitch=16.0, quantum_efficiency=0.26, read_noise_sigma=-0.5)
    with pytest.raises(ParameterError):
        CameraSpec(pixels=64, pitch=16.0, quantum_efficiency=0.26, threshold=0.0)
    with pytest.raises(ParameterError):
        CameraSpec(pixels=64, pitch=16.0, quantum_efficiency=0.26, mode="analog")


def test_photon_image_validation():
    with pytest.raises(ParameterError):
        PhotonImage(counts=np.zeros((4, 3), np.uint16), frame_index=0, seed=0)
    with pytest.raises(ParameterError):
        PhotonImage(counts=np.full((4, 4), -1.0), frame_index=0, seed=0)
    img = PhotonImage(counts=np.ones((4, 4)), frame_index=0, seed=0)
    assert img.counts.dtype == np.uint16
    assert img.total == 16


def test_eta_zero_gives_empty_frame():
    spec = CameraSpec(pixels=64, pitch=16.0, quantum_efficiency=0.0)
    img = detect(np.full((64, 64), 5.0), spec, seed=1)
    assert img.total == 0


def test_ideal_mode_poisson_statistics():
    # flat mean 0.1/pixel over 1024^2 ~ 1e6 pixels
    spec = ideal_spec(pixels=1024)
    img = detect(np.full((1024, 1024), 0.1), spec, seed=2)
    c = img.counts.astype(float)
    assert c.mean() == pytest.approx(0.1, abs=0.001)
    assert c.var() / c.mean() == pytest.approx(1.0, abs=0.01)


def test_thresholded_false_count_rate():
    # zero light, sigma=1, threshold=4: Gaussian tail P(N > 4) = 3.2e-5
    spec = CameraSpec(
        pixels=1024, pitch=16.0, quantum_efficiency=0.26, read_noise_sigma=1.0, threshold=4.0
    )
    total = 0
    npx = 0
    for s in range(8):
        img = detect(np.zeros((1024, 1024)), spec, seed=100 + s)
        total += img.total
        npx += spec.pixels**2
    rate = total / npx
    expected = 3.167e-5
    sigma = np.sqrt(expected / npx)
    assert abs(rate - expected) < 4 * sigma


def test_thinning_composition():
    # Poisson thinning: eta1 then eta2 has the same law as eta1*eta2.
    # Compare mean and variance of the per-frame totals at 3 sigma.
    mu = np.full((128, 128), 0.8)
    eta1, eta2 = 0.6, 0.5
    frames = 400
    rng = np.random.default_rng(7)
    totals_two = np.empty(frames)
    totals_one = np.empty(frames)
    for k in range(frames):
        first = detect(mu, ideal_spec(eta=eta1), seed=2000 + k).counts
        totals_two[k] = rng.binomial(first, eta2).sum()
        totals_one[k] = detect(mu, ideal_spec(eta=eta1 * eta2), seed=5000 + k).total
    lam = eta1 * eta2 * mu.sum()  # per-frame total is Poisson(lam)
    for totals in (totals_two, totals_one):
        assert abs(totals.mean() - lam) < 3 * np.sqrt(lam / frames)
        assert abs(totals.var() - lam) < 3 * lam * np.sqrt(2.0 / frames)


def test_rotate180_involution_and_conservation():
    rng = np.random.default_rng(3)
    img = PhotonImage(counts=rng.integers(0, 3, (32, 32)).astype(np.uint16), frame_index=2, seed=9)
    rot = rotate180(img)
    assert rot.total == img.total
    assert np.array_equal(rotate180(rot).counts, img.counts)
    assert rot.frame_index == img.frame_index


def test_rotate180_corner_count():
    c = np.zeros((16, 16), np.uint16)
    c[0, 0] = 1
    rot = rotate180(PhotonImage(counts=c, frame_index=0, seed=0))
    assert rot.counts[15, 15] == 1
    assert rot.total == 1


def test_rotate180_symmetric_fixed_point():
    n = 16
    c = np.zeros((n, n), np.uint16)
    c[4, 6] = 2
    c[n - 1 - 4, n - 1 - 6] = 2
    img = PhotonImage(counts=c, frame_index=0, seed=0)
    assert np.array_equal(rotate180(img).counts, img.counts)


def test_detect_determinism():
    mu = np.abs(np.random.default_rng(5).standard_normal((64, 64)))
    spec = CameraSpec(pixels=64, pitch=16.0, quantum_efficiency=0.26)
    a = detect(mu, spec, seed=11)
    b = detect(mu, spec, seed=11)
    assert np.array_equal(a.counts, b.counts)
    c = detect(mu, spec, seed=12)
    assert not np.array_equal(a.counts, c.counts)


def test_baseline_subtraction_and_clip_guard():
    spec = ideal_spec(pixels=64)
    img = detect(np.full((64, 64), 0.5), spec, seed=6, baseline=0.5)
    assert img.total == 0
    # signal 0.1 over a 0.5 baseline; a few over-subtracted pixels pass
    mu = np.full((64, 64), 0.6)
    base = np.full((64, 64), 0.5)
    base[0, :4] = 0.7
    detect(mu, spec, seed=6, baseline=base)
    # gross miscalibration refuses
    with pytest.raises(CalibrationError):
        detect(mu, spec, seed=6, baseline=np.full((64, 64), 0.65))


def test_detect_shape_mismatch():
    spec = ideal_spec(pixels=64)
    with pytest.raises(ParameterError):
        detect(np.zeros((128, 128)), spec, seed=0)


def test_bin_intensity():
    n, p = 8, 4
    arr = np.arange(n * n, dtype=float).reshape(n, n)
    binned = bin_intensity(arr, p)
    assert binned.shape == (p, p)
    assert binned.sum() == pytest.approx(arr.sum())
    assert binned[0, 0] == arr[:2, :2].sum()
    with pytest.raises(ParameterError):
        bin_intensity(arr, 3)
    with pytest.raises(ParameterError):
        bin_intensity(np.zeros((4, 6)), 2)
