"""The two imaging configurations as field propagators.

Config A: the crystal is imaged onto the diffuser by an ideal 4-f relay
(absorbed, unit magnification), then a 2-f lens maps the diffuser plane
to the camera at its Fourier plane. One step: multiply by the screen,
Fourier transform, scale by the collection factor.

Config B: a 2-f lens maps the crystal to its far field, where the
diffuser sits; signal and idler pass disjoint apertures of the same
screen; a second 2-f lens images the crystal plane onto the camera. The
camera field is the input convolved with the Fourier transform of the
branch aperture. The -1 magnification of the relay is absorbed by
pre-inverted camera coordinates, so a clear aperture is the identity.

Camera coordinates in config A (and diffuser coordinates in config B)
follow the lens mapping x = lambda * f * nu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffuser import PhaseScreen
from .errors import ParameterError
from .fields import (
    Field2D,
    Grid,
    fft2_unitary_array,
    freq_to_position,
    ifft2_unitary_array,
)
from .source import VACUUM_MODE_VARIANCE, GainSpec, pm_filter_amplitude


@dataclass(frozen=True)
class ConfigA:
    """Diffuser in the crystal near-field, camera in the far field."""

    screen: PhaseScreen
    collection: float = 1.0
    f_relay: float = 75.0  # mm, 4-f relay lenses (ideal, absorbed)
    f_fourier: float = 150.0  # mm, Fourier lens to the camera

    def __post_init__(self):
        _check_collection(self.collection)
        if self.f_relay <= 0 or self.f_fourier <= 0:
            raise ParameterError("focal lengths must be positive")

    def camera_pitch(self, grid: Grid) -> float:
        """Camera-plane pixel pitch in µm for a crystal-plane grid."""
        return freq_to_position(grid.conjugate_pitch, grid.wavelength, self.f_fourier)


@dataclass(frozen=True)
class ConfigB:
    """Diffuser in the crystal far field, camera in the near field.

    ``mask_signal`` and ``mask_idler`` select disjoint apertures of the
    shared screen; by default each branch sees one half of the screen,
    split along axis 0 (the walk-off axis).
    """

    screen: PhaseScreen
    mask_signal: np.ndarray
    mask_idler: np.ndarray
    collection: float = 1.0
    f: float = 150.0  # mm, all three lenses

    def __post_init__(self):
        _check_collection(self.collection)
        if self.f <= 0:
            raise ParameterError("focal length must be positive")
        n = self.screen.grid.n
        for mask in (self.mask_signal, self.mask_idler):
            if np.asarray(mask).shape != (n, n):
                raise ParameterError("branch mask shape does not match screen grid")
        if np.any(np.abs(self.mask_signal) * np.abs(self.mask_idler) > 0):
            raise ParameterError("signal and idler apertures must be disjoint")

    def branch_transmission(self, branch: str) -> np.ndarray:
        if branch == "signal":
            mask = self.mask_signal
        elif branch == "idler":
            mask = self.mask_idler
        else:
            raise ParameterError(f"branch must be 'signal' or 'idler', got {branch!r}")
        return self.screen.transmission_map() * mask


def _check_collection(c: float) -> None:
    if not 0.0 <= c <= 1.0:
        raise ParameterError(f"collection must be in [0, 1], got {c!r}")


def make_config_b(screen: PhaseScreen, collection: float = 1.0, f: float = 150.0) -> ConfigB:
    """Config B with the default half-plane branch split along axis 0."""
    n = screen.grid.n
    upper = np.zeros((n, n))
    upper[: n // 2] = 1.0
    lower = np.zeros((n, n))
    lower[n // 2 :] = 1.0
    return ConfigB(screen=screen, mask_signal=upper, mask_idler=lower, collection=collection, f=f)


def fourier_plane_grid(grid: Grid, f_mm: float) -> Grid:
    """Grid of the 2-f Fourier plane of ``grid`` (x = lambda*f*nu), same n."""
    pitch = freq_to_position(grid.conjugate_pitch, grid.wavelength, f_mm)
    return Grid(n=grid.n, pitch=pitch, wavelength=grid.wavelength)


def _check_screen_grid(field: Field2D, screen: PhaseScreen) -> None:
    if screen.grid.n != field.grid.n:
        raise ParameterError(
            f"screen grid {screen.grid.n} does not match field grid {field.grid.n}"
        )


def propagate_config_a(field: Field2D, cfg: ConfigA) -> Field2D:
    """Crystal-plane field to camera-plane field (far-field detection)."""
    _check_screen_grid(field, cfg.screen)
    out = cfg.collection * fft2_unitary_array(
        field.values * cfg.screen.transmission_map()
    )
    return Field2D(field.grid, out)


def propagate_config_b(field: Field2D, branch: str, cfg: ConfigB) -> Field2D:
    """Crystal-plane field to camera-plane field (near-field detection)."""
    _check_screen_grid(field, cfg.screen)
    t = cfg.branch_transmission(branch)
    out = cfg.collection * ifft2_unitary_array(fft2_unitary_array(field.values) * t)
    return Field2D(field.grid, out)


def impulse_response(cfg, grid: Grid, r0_index: tuple[int, int], branch: str = "signal") -> Field2D:
    """Camera-plane response to a unit delta at grid index ``r0_index``."""
    i, j = r0_index
    if not (0 <= i < grid.n and 0 <= j < grid.n):
        raise ParameterError(f"source index {r0_index!r} outside the grid")
    delta = np.zeros((grid.n, grid.n), complex)
    delta[i, j] = 1.0
    field = Field2D(grid, delta)
    if isinstance(cfg, ConfigA):
        return propagate_config_a(field, cfg)
    if isinstance(cfg, ConfigB):
        return propagate_config_b(field, branch, cfg)
    raise ParameterError(f"unknown configuration {type(cfg).__name__}")


def vacuum_baseline_map(cfg, grid: Grid, gain: GainSpec) -> np.ndarray:
    """Symmetric-ordering baseline (photons/pixel) at the camera plane.

    The filtered vacuum reaching the camera carries a known second moment
    even at zero gain; detection subtracts this map. For config A it is
    the acceptance spectrum blurred by the screen's scattering halo; for
    config B it is uniform (the crystal-plane vacuum is statistically
    homogeneous), weighted by the branch aperture throughput.
    """
    m2 = pm_filter_amplitude(grid, gain) ** 2
    n = grid.n
    if isinstance(cfg, ConfigA):
        t_hat_sq = np.abs(fft2_unitary_array(cfg.screen.transmission_map())) ** 2
        blurred = np.real(
            ifft2_unitary_array(
                fft2_unitary_array(t_hat_sq) * fft2_unitary_array(m2)
            )
        )
        # unitary-FFT convolution carries a factor n relative to the plain sum
        base = VACUUM_MODE_VARIANCE * blurred / n
        return cfg.collection**2 * np.maximum(base, 0.0)
    if isinstance(cfg, ConfigB):
        out = np.empty((2, n, n))
        for k, branch in enumerate(("signal", "idler")):
            tau2 = np.abs(cfg.branch_transmission(branch)) ** 2
            level = VACUUM_MODE_VARIANCE * np.mean(tau2 * m2)
            out[k].fill(cfg.collection**2 * level)
        return out
    raise ParameterError(f"unknown configuration {type(cfg).__name__}")
