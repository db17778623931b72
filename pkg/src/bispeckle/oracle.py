"""Closed-form biphoton correlation functions, as Monte Carlo ground truth.

Config A admits a closed form: the camera-plane correlation depends only
on the sum coordinate s = x1 + x2, through the Fourier transform of the
pump times the squared screen transmission. Config B has no such
reduction; its joint density is evaluated by direct quadrature in a 1-D
transverse model, where the n x n table is affordable.

All outputs are probability-normalized so Monte Carlo histograms compare
without scale fitting.
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
    ifft1_unitary_array,
)
from .source import PumpProfile


@dataclass(frozen=True)
class JointTable1D:
    """Normalized joint detection density G2(x1, x2) on camera coordinates."""

    values: np.ndarray  # (n, n) real, >= 0, sums to 1
    pitch: float  # µm per axis

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ParameterError("joint table must be square")
        if np.any(v < 0):
            raise ParameterError("joint table entries must be non-negative")
        if abs(v.sum() - 1.0) > 1e-12:
            raise ParameterError("joint table must sum to 1")
        object.__setattr__(self, "values", v)


def psi_config_a(pump: PumpProfile, screen: PhaseScreen, f_mm: float = 150.0) -> Field2D:
    """Biphoton amplitude over the sum coordinate s = x1 + x2.

    psi(s) is the Fourier transform of E_p * t^2, normalized to unit total
    probability, sampled with pitch lambda*f*(conjugate pitch).
    """
    grid = pump.grid
    if screen.grid.n != grid.n:
        raise ParameterError("pump and screen grids differ")
    t = screen.transmission_map()
    psi = fft2_unitary_array(pump.amplitude * t * t)
    norm = np.sqrt(np.sum(np.abs(psi) ** 2))
    if norm == 0:
        raise ParameterError("pump amplitude is identically zero")
    pitch_s = freq_to_position(grid.conjugate_pitch, screen_wavelength(screen, pump), f_mm)
    out_grid = Grid(n=grid.n, pitch=pitch_s, wavelength=screen_wavelength(screen, pump))
    return Field2D(out_grid, psi / norm)


def screen_wavelength(screen: PhaseScreen, pump: PumpProfile) -> float:
    """Detection wavelength (nm): the down-converted field, not the pump."""
    lam = screen.grid.wavelength
    if lam and lam > 0:
        return lam
    return 2.0 * pump.wavelength


def g2_config_a(pump: PumpProfile, screen: PhaseScreen, f_mm: float = 150.0) -> Field2D:
    """Normalized correlation map |psi(s)|^2 over the sum coordinate."""
    psi = psi_config_a(pump, screen, f_mm)
    g2 = np.abs(psi.values) ** 2
    return Field2D(psi.grid, g2 / g2.sum())


def g2_joint_table_config_b_1d(
    pump_slice: np.ndarray,
    tau_s: np.ndarray,
    tau_i: np.ndarray,
    pitch_um: float,
    max_n: int = 2048,
) -> JointTable1D:
    """Direct quadrature of the config-B joint density in one dimension.

    ``pump_slice`` is the 1-D pump amplitude on the crystal grid (pitch
    ``pitch_um``); ``tau_s``/``tau_i`` are the branch transmissions
    (aperture times screen phase) sampled on the conjugate grid. The
    camera grid coincides with the crystal grid (unit magnification).

    G2(x1, x2) = |sum_x E_p(x) k_s(x - x1) k_i(x - x2)|^2 with k the
    centered inverse transform of the branch transmission.
    """
    ep = np.asarray(pump_slice)
    if np.iscomplexobj(ep):
        ep = np.abs(ep)
    ep = ep.astype(float)
    n = ep.size
    if n > max_n:
        raise ParameterError(f"table size {n} exceeds the memory guard {max_n}")
    if tau_s.shape != (n,) or tau_i.shape != (n,):
        raise ParameterError("branch transmissions must match the pump grid")
    k_s = ifft1_unitary_array(np.asarray(tau_s, dtype=complex))
    k_i = ifft1_unitary_array(np.asarray(tau_i, dtype=complex))
    c = n // 2
    # K[x, x1] = k[(x1 - x) mod n] on centered indices: the camera field is
    # the crystal field convolved with the branch kernel
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None] + c) % n
    ks_mat = k_s[idx]
    ki_mat = k_i[idx]
    # accumulate outer products in fixed x order, split into real arithmetic
    # whose per-element operations commute bit-exactly, so that swapping the
    # screens transposes the table exactly
    psi_re = np.zeros((n, n))
    psi_im = np.zeros((n, n))
    for x in range(n):
        if ep[x] == 0:
            continue
        a, b = ks_mat[x].real, ks_mat[x].imag
        p, q = ki_mat[x].real, ki_mat[x].imag
        re = np.outer(a, p) - np.outer(b, q)
        im = np.outer(a, q) + np.outer(b, p)
        psi_re += ep[x] * re
        psi_im += ep[x] * im
    g2 = psi_re**2 + psi_im**2
    # summing the sorted values makes the normalization invariant under a
    # screen swap (same multiset), so the transpose symmetry is bit-exact
    total = np.sort(g2, axis=None).sum()
    if total == 0:
        raise ParameterError("joint density is identically zero")
    return JointTable1D(values=g2 / total, pitch=float(pitch_um))


def sample_pairs_from_joint(table: JointTable1D, count: int, seed: int) -> np.ndarray:
    """Draw i.i.d. (x1, x2) coordinate pairs (µm) from a joint table."""
    if count <= 0:
        raise ParameterError(f"sample count must be positive, got {count!r}")
    p = table.values.ravel()
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    flat = np.searchsorted(cdf, rng.random(count), side="right")
    n = table.values.shape[0]
    i, j = np.divmod(flat, n)
    coords = (np.stack([i, j], axis=1) - n // 2) * table.pitch
    return coords


def histogram_pairs(coords: np.ndarray, n: int, pitch_um: float) -> np.ndarray:
    """Bin (x1, x2) pairs back onto an n x n table grid; returns counts."""
    idx = np.rint(coords / pitch_um).astype(int) + n // 2
    good = np.all((idx >= 0) & (idx < n), axis=1)
    idx = idx[good]
    counts = np.zeros((n, n))
    np.add.at(counts, (idx[:, 0], idx[:, 1]), 1.0)
    return counts


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total-variation distance between two normalized densities."""
    return 0.5 * float(np.sum(np.abs(p / p.sum() - q / q.sum())))


def mc_joint_table_config_b_1d(
    pump_slice: np.ndarray,
    tau_s: np.ndarray,
    tau_i: np.ndarray,
    m_filter: np.ndarray,
    g: float,
    pitch_um: float,
    realizations: int,
    seed: int,
) -> JointTable1D:
    """Monte Carlo estimate of the config-B joint density in one dimension.

    Runs the stochastic twin-field model (filtered vacuum, pointwise
    squeezing, branch propagation) and accumulates the signal/idler field
    pairing <A_s(x1) A_i(x2)>, whose squared magnitude equals |psi|^2 for
    Gaussian fields (it also equals the intensity covariance by the moment
    theorem, but the field estimator converges far faster). The estimator
    bias <I_s><I_i>/N of the squared mean is subtracted. This route never
    touches the quadrature of :func:`g2_joint_table_config_b_1d`, so
    agreement between the two is a real cross-check.
    """
    from .fields import fft1_unitary_array

    ep = np.abs(np.asarray(pump_slice))
    n = ep.size
    if tau_s.shape != (n,) or tau_i.shape != (n,) or m_filter.shape != (n,):
        raise ParameterError("all 1-D inputs must share the pump grid")
    if realizations <= 0:
        raise ParameterError("realizations must be positive")
    c = np.cosh(g * ep)
    s = np.sinh(g * ep)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    pair = np.zeros((n, n), complex)
    sum_s = np.zeros(n)
    sum_i = np.zeros(n)
    for _ in range(realizations):
        w = np.sqrt(-0.5 * np.log1p(-rng.random((2, n)))) * np.exp(
            2j * np.pi * rng.random((2, n))
        )
        a = ifft1_unitary_array(m_filter * w)
        big_s = c * a[0] + s * np.conj(a[1])
        big_i = c * a[1] + s * np.conj(a[0])
        cam_s = ifft1_unitary_array(fft1_unitary_array(big_s) * tau_s)
        cam_i = ifft1_unitary_array(fft1_unitary_array(big_i) * tau_i)
        pair += np.outer(cam_s, cam_i)
        sum_s += np.abs(cam_s) ** 2
        sum_i += np.abs(cam_i) ** 2
    pair /= realizations
    bias = np.outer(sum_s, sum_i) / realizations**3
    g2 = np.maximum(np.abs(pair) ** 2 - bias, 0.0)
    total = g2.sum()
    if total == 0:
        raise ParameterError("empty pairing; increase gain or realizations")
    return JointTable1D(values=g2 / total, pitch=float(pitch_um))
