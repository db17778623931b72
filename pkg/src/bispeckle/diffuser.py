"""Random phase screens (thin diffusers) and speckle-grain statistics.

Screens model an acid-etched glass diffuser: a zero-mean Gaussian random
phase with Gaussian autocorrelation. Two parameters control it: the phase
rms (depth of the etch, in radians at the working wavelength) and the
correlation length (the surface "waviness" scale, µm).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EstimationError, ParameterError
from .fields import Field2D, Grid, apply_mask, fft2_unitary, fft2_unitary_array, ifft2_unitary_array

#: reference etch depth (radians) of the deep-roughness diffusers; the grain
#: estimator's halo calibration assumes screens of this class.
REFERENCE_RMS = 4.0 * np.pi


@dataclass(frozen=True)
class PhaseScreen:
    """Frozen realization of a random phase map (radians) on a grid."""

    grid: Grid
    phase: np.ndarray
    rms_phase: float
    corr_length: float
    seed: int

    def transmission_map(self) -> np.ndarray:
        return np.exp(1j * self.phase)


def synthesize_screen(grid: Grid, rms_phase: float, corr_length: float, seed: int) -> PhaseScreen:
    """Draw a Gaussian random phase screen.

    The screen has zero mean, sample rms exactly ``rms_phase`` and a
    Gaussian autocorrelation of 1/e width ``corr_length`` (µm), realized by
    spectral filtering of white Gaussian noise.
    """
    if rms_phase < 0:
        raise ParameterError(f"rms_phase must be >= 0, got {rms_phase!r}")
    if corr_length < 2 * grid.pitch:
        raise ParameterError(
            f"corr_length {corr_length} µm under-resolved by pitch {grid.pitch} µm"
        )
    if rms_phase == 0.0:
        return PhaseScreen(grid, np.zeros((grid.n, grid.n)), 0.0, float(corr_length), int(seed))

    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    white = rng.standard_normal((grid.n, grid.n))
    # Amplitude filter sqrt(PSD); PSD = FT of exp(-dr^2/corr^2).
    nu_sq = grid.freq_radius_sq()
    filt = np.exp(-0.5 * (np.pi * corr_length) ** 2 * nu_sq)
    phase = np.real(ifft2_unitary_array(fft2_unitary_array(white) * filt))
    phase -= phase.mean()
    phase *= rms_phase / np.sqrt(np.mean(phase**2))
    return PhaseScreen(grid, phase, float(rms_phase), float(corr_length), int(seed))


def transmission(screen: PhaseScreen) -> np.ndarray:
    """Phase-only complex transmission e^{i*phase}; |t| = 1 everywhere."""
    return screen.transmission_map()


def laser_speckle_farfield(screen: PhaseScreen, beam: Field2D) -> np.ndarray:
    """Far-field intensity of a coherent beam scattered by the screen."""
    if beam.grid.n != screen.grid.n:
        raise ParameterError("beam and screen grids differ")
    far = fft2_unitary(apply_mask(beam, transmission(screen)))
    return far.intensity()


def envelope_corrected(intensity: np.ndarray, smooth_frac: float = 0.08):
    """Divide a pattern by its heavily smoothed version.

    Returns ``(pattern, support)`` where ``pattern`` is the relative
    fluctuation (I / envelope - 1) and ``support`` masks the region where
    the envelope exceeds 10% of its maximum.
    """
    n = intensity.shape[0]
    env = ndimage.gaussian_filter(intensity, sigma=smooth_frac * n, mode="nearest")
    support = env > 0.1 * env.max()
    with np.errstate(invalid="ignore", divide="ignore"):
        pattern = np.where(support, intensity / np.maximum(env, 1e-300) - 1.0, 0.0)
    return pattern, support


def _radial_halfmax_fwhm_px(smoothed: np.ndarray) -> float:
    """FWHM (px) of a single smooth blob via its radial profile about the centroid."""
    n = smoothed.shape[0]
    tot = smoothed.sum()
    if tot <= 0:
        raise EstimationError("empty intensity map")
    ys, xs = np.mgrid[:n, :n]
    cy = (smoothed * ys).sum() / tot
    cx = (smoothed * xs).sum() / tot
    r = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
    rmax = n // 2
    ri = np.rint(r).astype(int).ravel()
    counts = np.bincount(ri, minlength=rmax)[:rmax]
    sums = np.bincount(ri, weights=smoothed.ravel(), minlength=rmax)[:rmax]
    with np.errstate(invalid="ignore"):
        prof = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    # the innermost annuli average few pixels (or none, when the centroid
    # falls between pixels); interpolate gaps and smooth radially before
    # reading off the peak and the half-maximum crossing
    good = np.isfinite(prof)
    prof = np.interp(np.arange(rmax), np.flatnonzero(good), prof[good])
    prof = ndimage.gaussian_filter1d(prof, max(2, rmax // 128), mode="nearest")
    head = max(3, rmax // 64)
    peak_idx = int(np.argmax(prof[:head]))
    peak = prof[peak_idx]
    below = np.where(prof < 0.5 * peak)[0]
    below = below[below > peak_idx]
    if below.size == 0:
        raise EstimationError("scattered halo wider than the sampled map")
    k = max(int(below[0]), 1)
    p_hi, p_lo = prof[k - 1], prof[k]
    frac = (p_hi - 0.5 * peak) / (p_hi - p_lo) if p_hi > p_lo else 0.0
    return 2.0 * ((k - 1) + frac)


def estimate_grain_fwhm(
    intensity: np.ndarray,
    conjugate_pitch_per_um: float,
    double_pass: bool = False,
) -> float:
    """Characteristic speckle-pattern FWHM of a far-field map, in mm^-1.

    The reciprocal of the returned value estimates the waviness scale (µm)
    of the screen that produced the pattern: a deep screen of correlation
    length L scatters into a halo of width ``0.53 * rms / L``, so the
    measured halo FWHM is divided by that factor at the reference roughness
    (``REFERENCE_RMS``). ``double_pass=True`` applies the extra factor two
    for patterns formed through t^2 (both photons on the same screen).

    Raises :class:`EstimationError` for patterns without a resolved halo
    (flat screen, or a halo clipped by the sampled bandwidth).
    """
    intensity = np.asarray(intensity, dtype=float)
    if intensity.ndim != 2 or intensity.shape[0] != intensity.shape[1]:
        raise ParameterError("intensity map must be square")
    sigma = max(3.0, intensity.shape[0] / 170.0)
    smoothed = ndimage.gaussian_filter(intensity, sigma=sigma, mode="constant")
    fwhm_px = _radial_halfmax_fwhm_px(smoothed)
    if fwhm_px < 10.0:
        raise EstimationError(
            "halo unresolved (fewer than ~10 px across); no speckle to measure"
        )
    calib = 2.0 * np.sqrt(np.log(2.0)) / np.pi * REFERENCE_RMS
    if double_pass:
        calib *= 2.0
    fwhm_per_um = fwhm_px * conjugate_pitch_per_um / calib
    return fwhm_per_um * 1e3  # µm^-1 -> mm^-1
