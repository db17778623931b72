"""Stochastic twin-beam source: parametric amplification of vacuum noise.

Each realization draws circular-Gaussian vacuum fields (variance 1/2
photon per mode, symmetric ordering), restricted to the phase-matching
angular acceptance, then applies pointwise two-mode squeezing driven by
the pump amplitude at the crystal output face:

    A_s = cosh(g|E_p|) a_s + sinh(g|E_p|) conj(a_i)

with a_s, a_i independent filtered vacuum fields. The acceptance filter
acts on the vacuum before squeezing, which gives the biphoton its finite
position-correlation width (the double-Gaussian model: pump envelope in
the sum coordinate, phase-matching width in the difference coordinate).

Under symmetric ordering the vacuum contributes a known baseline to every
second moment; for the filtered vacuum it is ``mean(m^2)/2`` photons per
pixel at the crystal (``m`` the acceptance amplitude), recorded on each
realization as ``vacuum_baseline``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ParameterError
from .fields import Field2D, Grid, ifft2_unitary_array

VACUUM_MODE_VARIANCE = 0.5  # photons per mode, symmetric ordering


@dataclass(frozen=True)
class PumpProfile:
    """Pump amplitude at the crystal output face, normalized to unit peak."""

    grid: Grid
    amplitude: np.ndarray
    wavelength: float  # nm
    fwhm: float  # mm


@dataclass(frozen=True)
class GainSpec:
    """Parametric gain and phase-matching acceptance of the crystal."""

    g: float  # peak gain (dimensionless)
    pm_fwhm: float  # phase-matching angular acceptance, mrad (intensity FWHM)
    wavelength: float = 710.0  # signal/idler wavelength at degeneracy, nm

    def __post_init__(self):
        if self.g < 0:
            raise ParameterError(f"gain must be >= 0, got {self.g!r}")
        if self.pm_fwhm <= 0:
            raise ParameterError(f"pm_fwhm must be positive, got {self.pm_fwhm!r}")


@dataclass(frozen=True)
class TwinFields:
    """One stochastic realization of paired signal/idler amplitudes."""

    signal: Field2D
    idler: Field2D
    seed: object
    vacuum_baseline: float  # photons per pixel at the crystal plane


def gaussian_pump(grid: Grid, fwhm_mm: float, wavelength_nm: float = 355.0) -> PumpProfile:
    """Collimated Gaussian pump whose intensity FWHM is ``fwhm_mm``."""
    if fwhm_mm <= 0:
        raise ParameterError(f"pump fwhm must be positive, got {fwhm_mm!r}")
    fwhm_um = fwhm_mm * 1e3
    amp = np.exp(-2.0 * np.log(2.0) * grid.radius_sq() / fwhm_um**2)
    return PumpProfile(grid=grid, amplitude=amp, wavelength=float(wavelength_nm), fwhm=float(fwhm_mm))


def pm_filter_amplitude(grid: Grid, gain: GainSpec) -> np.ndarray:
    """Amplitude transfer inside the phase-matching acceptance.

    Gaussian in emission angle theta = lambda * nu with intensity FWHM
    equal to ``gain.pm_fwhm``.
    """
    lam_um = gain.wavelength * 1e-3
    theta_sq = (lam_um**2) * grid.freq_radius_sq()  # rad^2
    theta_f = gain.pm_fwhm * 1e-3  # rad
    return np.exp(-2.0 * np.log(2.0) * theta_sq / theta_f**2)


def vacuum_baseline(grid: Grid, gain: GainSpec) -> float:
    """Symmetric-ordering baseline (photons/pixel) of the filtered vacuum."""
    m = pm_filter_amplitude(grid, gain)
    return float(VACUUM_MODE_VARIANCE * np.mean(m * m))


def substream(master_seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic, order-independent per-realization seed stream."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))


def _vacuum_pair(rng: np.random.Generator, n: int, dtype) -> np.ndarray:
    """Two complex circular Gaussian planes with <|a|^2> = 1/2 each."""
    real_dtype = np.float32 if dtype == np.complex64 else np.float64
    u = rng.random((2, 2, n, n), dtype=real_dtype)
    r = np.sqrt(-VACUUM_MODE_VARIANCE * np.log1p(-u[0]))
    th = (2.0 * np.pi) * u[1]
    out = np.empty((2, n, n), dtype=dtype)
    out.real = r * np.cos(th)
    out.imag = r * np.sin(th)
    return out


def generate_twin_batch(
    pump: PumpProfile, gain: GainSpec, seeds, dtype=np.complex128
) -> list[TwinFields]:
    """Draw one realization per entry of ``seeds`` (ints or SeedSequences).

    Noise is drawn per-realization from its own stream, so the result for a
    given seed does not depend on how realizations are batched; the FFTs
    are executed batched for speed.
    """
    grid = pump.grid
    n = grid.n
    nb = len(seeds)
    if nb == 0:
        return []

    c = np.cosh(gain.g * np.abs(pump.amplitude)).astype(dtype)
    s = np.sinh(gain.g * np.abs(pump.amplitude)).astype(dtype)
    m = pm_filter_amplitude(grid, gain).astype(dtype)
    baseline = float(VACUUM_MODE_VARIANCE * np.mean((m * m).real))

    spectra = np.empty((2 * nb, n, n), dtype=dtype)
    for k, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        spectra[2 * k : 2 * k + 2] = m * _vacuum_pair(rng, n, dtype)
    vac = ifft2_unitary_array(spectra)

    grid_sig = Grid(n=n, pitch=grid.pitch, wavelength=gain.wavelength)
    out = []
    for k, seed in enumerate(seeds):
        a_s, a_i = vac[2 * k], vac[2 * k + 1]
        out.append(
            TwinFields(
                signal=Field2D(grid_sig, c * a_s + s * np.conj(a_i)),
                idler=Field2D(grid_sig, c * a_i + s * np.conj(a_s)),
                seed=seed,
                vacuum_baseline=baseline,
            )
        )
    return out


def generate_twin_fields(pump: PumpProfile, gain: GainSpec, seed, dtype=np.complex128) -> TwinFields:
    """Draw one realization of correlated signal/idler fields at the crystal.

    ``seed`` may be an int or a ``numpy.random.SeedSequence`` (see
    :func:`substream` for parallel generation).
    """
    return generate_twin_batch(pump, gain, [seed], dtype=dtype)[0]


def mean_photon_flux(fields: Iterable[TwinFields]) -> np.ndarray:
    """Per-pixel photon flux <|A|^2> - baseline (clipped at 0) over an ensemble.

    Signal and idler arms are pooled; they are statistically identical.
    """
    total = None
    count = 0
    baseline = 0.0
    for tw in fields:
        both = np.abs(tw.signal.values) ** 2 + np.abs(tw.idler.values) ** 2
        total = both if total is None else total + both
        count += 2
        baseline = tw.vacuum_baseline
    if total is None:
        raise ParameterError("empty ensemble")
    # cosh^2 - sinh^2 = 1 keeps the commutator correction at the unsqueezed
    # baseline, so plain subtraction is exact: the result averages sinh^2
    return np.maximum(total / count - baseline, 0.0)
