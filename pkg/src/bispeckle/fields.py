"""Sampled 2-D complex fields on centered grids, with unitary FFTs.

Conventions used throughout the package:

* direct-space coordinate of index ``i`` is ``(i - n/2) * pitch`` (µm),
  so ``r = 0`` sits at index ``n//2``;
* spatial frequencies live on the conjugate grid of pitch ``1/(n*pitch)``
  (µm^-1), with ``nu = 0`` also at index ``n//2``;
* transforms are unitary (norm="ortho"), so total power is preserved and
  photon-number bookkeeping survives propagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .errors import ParameterError


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Square sampling grid shared by a field and its Fourier conjugate.

    n           samples per axis (power of two)
    pitch       direct-space sample pitch in µm
    wavelength  light wavelength in nm
    """

    n: int
    pitch: float
    wavelength: float

    @property
    def conjugate_pitch(self) -> float:
        """Fourier-plane pitch in µm^-1."""
        return 1.0 / (self.n * self.pitch)

    @property
    def extent(self) -> float:
        """Field of view per axis in µm."""
        return self.n * self.pitch

    @property
    def wavelength_um(self) -> float:
        return self.wavelength * 1e-3

    def coords(self) -> np.ndarray:
        """Centered direct-space coordinates (µm), one axis."""
        return (np.arange(self.n) - self.n // 2) * self.pitch

    def freq_coords(self) -> np.ndarray:
        """Centered spatial-frequency coordinates (µm^-1), one axis."""
        return (np.arange(self.n) - self.n // 2) * self.conjugate_pitch

    def radius_sq(self) -> np.ndarray:
        """r^2 map in µm^2 on the direct grid."""
        c = self.coords()
        return c[:, None] ** 2 + c[None, :] ** 2

    def freq_radius_sq(self) -> np.ndarray:
        """nu^2 map in µm^-2 on the conjugate grid."""
        c = self.freq_coords()
        return c[:, None] ** 2 + c[None, :] ** 2


def make_grid(n: int, pitch_um: float, lambda_nm: float) -> Grid:
    """Build a centered square grid; n must be a power of two >= 2."""
    if not isinstance(n, (int, np.integer)) or n < 2 or not _is_power_of_two(int(n)):
        raise ParameterError(f"grid size must be a power of two >= 2, got {n!r}")
    if pitch_um <= 0:
        raise ParameterError(f"pitch must be positive, got {pitch_um!r}")
    if lambda_nm <= 0:
        raise ParameterError(f"wavelength must be positive, got {lambda_nm!r}")
    return Grid(n=int(n), pitch=float(pitch_um), wavelength=float(lambda_nm))


@dataclass(frozen=True)
class Field2D:
    """Complex transverse amplitude sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n, self.grid.n):
            raise ParameterError(
                f"field shape {v.shape} does not match grid {self.grid.n}x{self.grid.n}"
            )
        object.__setattr__(self, "values", v)

    @property
    def power(self) -> float:
        """Total power sum(|values|^2)."""
        return float(np.sum(np.abs(self.values) ** 2))

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2


_AXES2 = (-2, -1)


def fft2_unitary_array(values: np.ndarray) -> np.ndarray:
    """Centered unitary 2-D FFT over the last two axes (zero frequency at n//2)."""
    return _fft.fftshift(
        _fft.fft2(_fft.ifftshift(values, axes=_AXES2), axes=_AXES2, norm="ortho", workers=-1),
        axes=_AXES2,
    )


def ifft2_unitary_array(values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2_unitary_array`."""
    return _fft.fftshift(
        _fft.ifft2(_fft.ifftshift(values, axes=_AXES2), axes=_AXES2, norm="ortho", workers=-1),
        axes=_AXES2,
    )


def fft1_unitary_array(values: np.ndarray) -> np.ndarray:
    """Centered unitary 1-D FFT (last axis)."""
    return _fft.fftshift(_fft.fft(_fft.ifftshift(values, axes=-1), norm="ortho"), axes=-1)


def ifft1_unitary_array(values: np.ndarray) -> np.ndarray:
    return _fft.fftshift(_fft.ifft(_fft.ifftshift(values, axes=-1), norm="ortho"), axes=-1)


def fft2_unitary(field: Field2D) -> Field2D:
    """Centered unitary Fourier transform of a field."""
    return Field2D(field.grid, fft2_unitary_array(field.values))


def ifft2_unitary(field: Field2D) -> Field2D:
    """Centered unitary inverse Fourier transform of a field."""
    return Field2D(field.grid, ifft2_unitary_array(field.values))


def freq_to_position(nu_per_um: float, lambda_nm: float, f_mm: float):
    """Map a spatial frequency (µm^-1) to a 2-f camera-plane position (µm).

    x = lambda * f * nu, the lens Fourier-plane coordinate mapping.
    """
    if f_mm <= 0:
        raise ParameterError(f"focal length must be positive, got {f_mm!r}")
    return (lambda_nm * 1e-3) * (f_mm * 1e3) * nu_per_um


def apply_mask(field: Field2D, mask: np.ndarray) -> Field2D:
    """Pointwise product of a field with a complex transmission map."""
    mask = np.asarray(mask)
    if mask.shape != field.values.shape:
        raise ParameterError(
            f"mask shape {mask.shape} does not match field {field.values.shape}"
        )
    return Field2D(field.grid, field.values * mask)
