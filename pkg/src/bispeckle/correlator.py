"""Twin-image cross-correlation analysis.

The measurement pipeline: accumulate normalized cross-correlations over
a stack of photon-counting frame pairs, locate the correlation peak (or
the two-photon speckle map when a diffuser is present), and reduce it to
the physical summary numbers: degree of correlation, conditional
variances, Schmidt numbers, speckle-grain FWHM and envelope size.

Far mode correlates each signal frame with the 180-degree rotated idler
frame, so the map lives on the sum coordinate where momentum-correlated
pairs pile up. Near mode correlates the frames directly (difference
coordinate). The deterministic envelope of accidental coincidences is
removed by subtracting the cross-correlation of the stack means.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft
from scipy import ndimage, optimize

from .camera import CameraSpec, PhotonImage
from .diffuser import envelope_corrected, estimate_grain_fwhm
from .errors import EstimationError, ParameterError

_MODES = ("far", "near")


@dataclass(frozen=True)
class PairStack:
    """Ordered ensemble of (signal, idler) twin frames.

    ``step`` calibrates one camera pixel in physical units: µm per pixel
    in near mode, spatial frequency (µm^-1) per pixel in far mode.
    """

    pairs: tuple
    mode: str
    spec: CameraSpec
    step: float

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ParameterError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.step <= 0:
            raise ParameterError(f"pixel step must be positive, got {self.step!r}")
        pairs = tuple(self.pairs)
        if len(pairs) < 2:
            raise ParameterError("a pair stack needs at least 2 pairs")
        n = pairs[0][0].counts.shape[0]
        for s, i in pairs:
            if s.counts.shape != (n, n) or i.counts.shape != (n, n):
                raise ParameterError("all frames in a stack must share dimensions")
        object.__setattr__(self, "pairs", pairs)

    @property
    def frame_size(self) -> int:
        return self.pairs[0][0].counts.shape[0]

    def mean_counts_per_frame(self) -> float:
        """Mean photon count per frame, averaged over both arms."""
        totals = [0.5 * (s.total + i.total) for s, i in self.pairs]
        return float(np.mean(totals))


@dataclass(frozen=True)
class CorrelationMap:
    """Background-subtracted average cross-correlogram per frame pair.

    ``step`` carries the stack calibration (µm or µm^-1 per pixel); zero
    displacement sits at index m//2 on both axes.
    """

    values: np.ndarray
    mode: str
    step: float
    pairs: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ParameterError("correlation map must be square")
        if not np.all(np.isfinite(v)):
            raise ParameterError("correlation map contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class CorrelationReport:
    """One-row summary of a stack analysis; nan marks inapplicable fields."""

    pairs: int
    mode: str
    doc: float
    sx2: float = np.nan  # conditional variance, µm² (near)
    sy2: float = np.nan
    snx2: float = np.nan  # conditional variance, ħ²µm⁻² (far)
    sny2: float = np.nan
    vx: float = np.nan
    vy: float = np.nan
    v: float = np.nan
    grain_fwhm: float = np.nan  # mm⁻¹
    envelope_fwhm: float = np.nan  # mm

    COLUMNS = (
        "pairs", "mode", "doc", "sx2", "sy2", "snx2", "sny2",
        "vx", "vy", "v", "grain_fwhm", "envelope_fwhm",
    )

    def row(self) -> list:
        return [getattr(self, c) for c in self.COLUMNS]


def write_report_csv(report: CorrelationReport, path) -> None:
    """One header row, one value row, fixed column order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CorrelationReport.COLUMNS)
        w.writerow(report.row())


def _accumulate_correlograms(stack: PairStack, pad: bool):
    """Sum of per-pair cross-correlograms plus the per-arm frame sums.

    Each correlogram is integer-valued in exact arithmetic; rounding the
    FFT product back to integers makes the accumulation an associative
    sum, so chunked (parallel) reduction is bit-identical to serial.
    """
    n = stack.frame_size
    m = 2 * n if pad else n
    acc = np.zeros((m, m))
    sum_s = np.zeros((n, n))
    sum_i = np.zeros((n, n))
    for s, i in stack.pairs:
        a = s.counts.astype(float)
        b = i.counts.astype(float)
        if stack.mode == "far":
            b = b[::-1, ::-1]
        acc += np.rint(_corr2(a, b, m))
        sum_s += a
        sum_i += b
    return acc, sum_s, sum_i


def _corr2(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """c(d) = sum_x a(x) b(x + d) on an m x m grid, d = 0 at m//2."""
    fa = _fft.rfft2(a, (m, m))
    fb = _fft.rfft2(b, (m, m))
    c = _fft.irfft2(np.conj(fa) * fb, (m, m))
    return np.fft.fftshift(c)


def cross_correlate_stack(stack: PairStack, pad: bool = True) -> CorrelationMap:
    """Average background-subtracted cross-correlogram of a stack.

    ``pad=True`` (default) zero-pads each frame by a factor two per axis,
    yielding the linear cross-correlation free of wrap-around bias;
    ``pad=False`` keeps the correlation circular, which makes the far-mode
    map exactly invariant under opposite circular shifts of the two arms.
    """
    acc, sum_s, sum_i = _accumulate_correlograms(stack, pad)
    n_pairs = len(stack.pairs)
    m = acc.shape[0]
    background = _corr2(sum_s, sum_i, m) / n_pairs
    values = (acc - background) / n_pairs
    return CorrelationMap(values=values, mode=stack.mode, step=stack.step, pairs=n_pairs)


def degree_of_correlation(map_: CorrelationMap, stack: PairStack) -> float:
    """Fraction of detected photons that arrive in registered pairs.

    Integrates the background-subtracted correlation feature and divides
    by the mean photon count per frame. The feature region is a ±5σ
    window around the fitted peak when a single Gaussian peak dominates
    (no diffuser), otherwise the full envelope support of the speckle map.
    """
    v = map_.values
    m = v.shape[0]
    try:
        sx2, sy2, _amp, (ci, cj) = _fit_gaussian_peak_px(v)
        wi = max(int(np.ceil(5.0 * np.sqrt(sx2))), 2)
        wj = max(int(np.ceil(5.0 * np.sqrt(sy2))), 2)
        i0, i1 = max(ci - wi, 0), min(ci + wi + 1, m)
        j0, j1 = max(cj - wj, 0), min(cj + wj + 1, m)
        feature = float(v[i0:i1, j0:j1].sum())
    except EstimationError:
        env = ndimage.gaussian_filter(v, sigma=0.05 * m, mode="constant")
        # noise level from the fully-overlapped central region (padded maps
        # have structurally quiet margins)
        q = m // 4
        noise = max(float(np.std(v[q : m - q, q : m - q])), 1e-300)
        if env.max() <= 0 or v.max() < 5 * noise:
            warnings.warn("no significant correlation excess; degree of correlation is 0")
            return 0.0
        support = env > 0.1 * env.max()
        feature = float(v[support].sum())
    denom = stack.mean_counts_per_frame()
    if denom == 0:
        warnings.warn("empty frames; degree of correlation is 0")
        return 0.0
    ratio = feature / denom
    if not 0.0 <= ratio <= 1.0:
        warnings.warn(f"degree of correlation {ratio:.3g} clamped to [0, 1]")
        ratio = min(max(ratio, 0.0), 1.0)
    return ratio


def _robust_sigma(v: np.ndarray) -> float:
    return 1.4826 * float(np.median(np.abs(v - np.median(v))))


def _fit_gaussian_peak_px(v: np.ndarray):
    """2-D Gaussian least squares around the global maximum, pixel units."""
    m = v.shape[0]
    smoothed = ndimage.gaussian_filter(v, sigma=1.0, mode="constant")
    ci, cj = np.unravel_index(np.argmax(smoothed), smoothed.shape)
    w = max(m // 16, 8)
    i0, i1 = max(ci - w, 0), min(ci + w + 1, m)
    j0, j1 = max(cj - w, 0), min(cj + w + 1, m)
    window = v[i0:i1, j0:j1]
    yy, xx = np.mgrid[i0:i1, j0:j1]

    def model(coords, amp, x0, y0, sx, sy):
        y, x = coords
        return amp * np.exp(
            -((y - x0) ** 2) / (2 * sx**2) - ((x - y0) ** 2) / (2 * sy**2)
        )

    amp0 = float(v[ci, cj])
    if amp0 <= 0:
        raise EstimationError("no positive peak to fit")
    p0 = [amp0, float(ci), float(cj), 2.0, 2.0]
    try:
        with warnings.catch_warnings():
            # a delta-like peak fits fine but leaves the covariance singular
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            popt, _ = optimize.curve_fit(
                model,
                (yy.ravel(), xx.ravel()),
                window.ravel(),
                p0=p0,
                maxfev=5000,
            )
    except RuntimeError as exc:
        raise EstimationError(f"gaussian peak fit failed: {exc}") from exc
    amp, x0, y0, sx, sy = popt
    # noise from the central half of the map (excluding the fit window);
    # the margins of padded maps are structurally quiet
    q = m // 4
    outside = np.zeros_like(v, dtype=bool)
    outside[q : m - q, q : m - q] = True
    outside[i0:i1, j0:j1] = False
    if not np.any(outside):
        outside = np.ones_like(v, dtype=bool)
        outside[i0:i1, j0:j1] = False
    vals = v[outside]
    # maps barely larger than the fit window leave no room for a noise
    # estimate; skip the SNR veto rather than divide by an empty std
    noise = max(float(np.std(vals)), 1e-300) if vals.size else 1e-300
    if amp <= 0 or amp / noise < 5:
        raise EstimationError("peak SNR below 5; no dominant correlation peak")
    if not (0 <= x0 < m and 0 <= y0 < m):
        raise EstimationError("fitted peak center left the map")
    return sx**2, sy**2, float(amp), (int(round(x0)), int(round(y0)))


def fit_gaussian_peak(map_: CorrelationMap):
    """Fit the correlation peak; returns (σ²_x, σ²_y, amplitude, center).

    Variances come back in the map's physical calibration: µm² in near
    mode, momentum units ħ²µm⁻² in far mode (p = ħ·2πν per pixel step).
    Center is in pixels. Raises :class:`EstimationError` when the fit
    fails or the peak signal-to-noise ratio is below 5.
    """
    sx2_px, sy2_px, amp, center = _fit_gaussian_peak_px(map_.values)
    if map_.mode == "near":
        scale = map_.step**2
    else:
        scale = (2.0 * np.pi * map_.step) ** 2
    return sx2_px * scale, sy2_px * scale, amp, center


def schmidt_numbers(sx2: float, sy2: float, snx2: float, sny2: float):
    """Per-axis Schmidt numbers and their geometric mean.

    V_d = 0.25 ħ² / (σ²_d σ²_νd) with position variances in µm² and
    momentum variances in ħ²µm⁻², so ħ cancels; V = sqrt(V_x V_y).
    """
    for val in (sx2, sy2, snx2, sny2):
        if not val > 0:
            raise ParameterError(f"variances must be positive, got {val!r}")
    vx = 0.25 / (sx2 * snx2)
    vy = 0.25 / (sy2 * sny2)
    return vx, vy, float(np.sqrt(vx * vy))


def grain_fwhm(map_: CorrelationMap) -> float:
    """Speckle-grain FWHM of a far-mode diffuser map, mm⁻¹.

    Reuses the scattering-halo grain estimator (double pass: both photons
    traverse the screen). Raises :class:`EstimationError` on maps without
    grains (no-diffuser peak).
    """
    if map_.mode != "far":
        raise ParameterError("grain estimation applies to far-mode maps")
    return estimate_grain_fwhm(np.maximum(map_.values, 0.0), map_.step, double_pass=True)


def speckle_contrast(mean_image: np.ndarray) -> float:
    """σ/µ of an envelope-corrected ensemble-mean image on its support."""
    pattern, support = envelope_corrected(np.asarray(mean_image, dtype=float))
    if not np.any(support):
        raise EstimationError("empty envelope support")
    return float(np.std(pattern[support]))


def envelope_fwhm(map_: CorrelationMap, axis: int = 0) -> float:
    """FWHM (mm) of the smoothed speckle envelope along ``axis``."""
    if map_.mode != "near":
        raise ParameterError("envelope size applies to near-mode maps")
    m = map_.values.shape[0]
    env = ndimage.gaussian_filter(map_.values, sigma=0.03 * m, mode="constant")
    prof = env.sum(axis=1 - axis)
    # shot noise rectifies into a flat pedestal; remove a robust floor
    floor = np.mean(np.sort(prof)[: max(m // 4, 1)])
    prof = prof - floor
    peak = prof.max()
    if peak <= 0:
        raise EstimationError("envelope not resolved")
    above = np.where(prof >= 0.5 * peak)[0]
    lo, hi = above[0], above[-1]
    left = lo if lo == 0 else lo - (prof[lo] - 0.5 * peak) / (prof[lo] - prof[lo - 1])
    right = hi if hi == m - 1 else hi + (prof[hi] - 0.5 * peak) / (prof[hi] - prof[hi + 1])
    return float((right - left) * map_.step * 1e-3)


def analyze_stack(stack: PairStack, pad: bool = True) -> tuple[CorrelationMap, CorrelationReport]:
    """Full reduction of a pair stack to its map and summary report."""
    map_ = cross_correlate_stack(stack, pad=pad)
    doc = degree_of_correlation(map_, stack)
    kwargs = {}
    try:
        s2a, s2b, _, _ = fit_gaussian_peak(map_)
        if stack.mode == "near":
            kwargs["sx2"], kwargs["sy2"] = s2a, s2b
        else:
            kwargs["snx2"], kwargs["sny2"] = s2a, s2b
    except EstimationError:
        pass
    if stack.mode == "far":
        try:
            kwargs["grain_fwhm"] = grain_fwhm(map_)
        except EstimationError:
            pass
    else:
        try:
            kwargs["envelope_fwhm"] = envelope_fwhm(map_)
        except EstimationError:
            pass
    report = CorrelationReport(pairs=len(stack.pairs), mode=stack.mode, doc=doc, **kwargs)
    return map_, report
