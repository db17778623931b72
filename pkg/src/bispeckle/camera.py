"""Thresholded EMCCD photon counting.

Camera-plane intensities (photons per pixel per frame) become integer
photon-counting frames: the symmetric-ordering vacuum baseline is
subtracted, the remainder is thinned by the effective quantum efficiency
and Poisson-sampled, Gaussian read noise is added, and the analog value
is compared against a threshold. The default output is binary (0/1), the
operating regime of single-photon EMCCD imaging; an ideal mode keeps the
raw Poisson counts for statistical tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ParameterError

#: maximum fraction of the total intensity allowed to be clipped away as
#: negative residue after baseline subtraction
CLIP_TOLERANCE = 0.01

_MODES = ("thresholded", "ideal")


@dataclass(frozen=True)
class CameraSpec:
    """Photon-counting camera parameters.

    pixels              frame size per axis
    pitch               pixel pitch, µm
    quantum_efficiency  effective efficiency of the whole detection chain
    read_noise_sigma    Gaussian readout noise, photoelectron-equivalent
    threshold           photon/no-photon decision level, same units
    mode                "thresholded" (binary frames) or "ideal" (raw counts)
    """

    pixels: int
    pitch: float
    quantum_efficiency: float
    read_noise_sigma: float = 1.0
    threshold: float = 4.0
    mode: str = "thresholded"

    def __post_init__(self):
        if self.pixels < 1:
            raise ParameterError(f"pixel count must be positive, got {self.pixels!r}")
        if self.pitch <= 0:
            raise ParameterError(f"pixel pitch must be positive, got {self.pitch!r}")
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ParameterError(
                f"quantum efficiency must be in [0, 1], got {self.quantum_efficiency!r}"
            )
        if self.read_noise_sigma < 0:
            raise ParameterError("read noise sigma must be >= 0")
        if self.read_noise_sigma > 0 and self.mode == "thresholded" and self.threshold <= 0:
            raise ParameterError("threshold must be positive when read noise is present")
        if self.mode not in _MODES:
            raise ParameterError(f"mode must be one of {_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class PhotonImage:
    """One recorded frame of integer photon counts."""

    counts: np.ndarray  # (pixels, pixels) uint16; {0, 1} in thresholded mode
    frame_index: int
    seed: int

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ParameterError("photon frame must be square")
        if c.dtype != np.uint16:
            if np.any(c < 0) or np.any(c != np.rint(c)):
                raise ParameterError("photon counts must be non-negative integers")
            c = c.astype(np.uint16)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum(dtype=np.int64))


def bin_intensity(intensity: np.ndarray, pixels: int) -> np.ndarray:
    """Block-sum a simulation-grid intensity onto the camera pixel grid.

    The simulation grid must be an integer multiple of the camera grid;
    fractional resampling is not supported.
    """
    intensity = np.asarray(intensity, dtype=float)
    n = intensity.shape[0]
    if intensity.ndim != 2 or intensity.shape[1] != n:
        raise ParameterError("intensity map must be square")
    if n % pixels != 0:
        raise ParameterError(
            f"simulation grid {n} is not an integer multiple of camera grid {pixels}"
        )
    f = n // pixels
    return intensity.reshape(pixels, f, pixels, f).sum(axis=(1, 3))


def detect(
    intensity: np.ndarray,
    spec: CameraSpec,
    seed: int,
    baseline: np.ndarray | float = 0.0,
    frame_index: int = 0,
    clip_tolerance: float = CLIP_TOLERANCE,
) -> PhotonImage:
    """Turn a camera-plane intensity map into a photon-counting frame.

    ``intensity`` (photons/pixel) may still carry the symmetric-ordering
    vacuum baseline of the stochastic field model; ``baseline`` is
    subtracted before sampling so the +1/2 photon/mode of vacuum noise is
    not detected as real photons. Small negative residues are clipped;
    if the clipped mass exceeds ``clip_tolerance`` of the total, the
    source and camera calibrations disagree and detection refuses.
    """
    intensity = np.asarray(intensity, dtype=float)
    if intensity.shape != (spec.pixels, spec.pixels):
        raise ParameterError(
            f"intensity shape {intensity.shape} does not match camera "
            f"{spec.pixels}x{spec.pixels}; bin_intensity first"
        )
    mean = intensity - baseline
    neg = -mean[mean < 0].sum()
    pos = mean[mean > 0].sum()
    if neg > clip_tolerance * max(pos, 1e-300):
        raise CalibrationError(
            f"baseline subtraction clips {neg:.3g} of {pos:.3g} photons "
            f"(> {clip_tolerance:.0%}); source and camera are miscalibrated"
        )
    mean = np.maximum(mean, 0.0)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    counts = rng.poisson(spec.quantum_efficiency * mean)
    if spec.mode == "ideal":
        out = counts.astype(np.uint16)
    else:
        analog = counts.astype(float)
        if spec.read_noise_sigma > 0:
            analog += spec.read_noise_sigma * rng.standard_normal(counts.shape)
        out = (analog > spec.threshold).astype(np.uint16)
    return PhotonImage(counts=out, frame_index=int(frame_index), seed=int(seed))


def rotate180(image: PhotonImage) -> PhotonImage:
    """Pixel (i, j) -> (n-1-i, n-1-j); the twin-image registration step."""
    return PhotonImage(
        counts=np.ascontiguousarray(image.counts[::-1, ::-1]),
        frame_index=image.frame_index,
        seed=image.seed,
    )
