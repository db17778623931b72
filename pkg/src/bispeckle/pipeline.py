"""Config-driven experiment runners.

Builds the simulation objects from an :class:`ExperimentConfig`, runs the
Monte Carlo twin-image pipeline (generation, propagation, detection) with
per-realization RNG substreams, and provides the analyze/oracle/laser
entry points used by the command line. All runners are deterministic for
a fixed config: frame i depends only on the master seed and i, never on
batching, so chunked execution is byte-identical to serial.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np
from scipy import fft as _fft

from .camera import CameraSpec, PhotonImage, bin_intensity, detect
from .config import ExperimentConfig
from .correlator import PairStack, analyze_stack, write_report_csv
from .diffuser import PhaseScreen, laser_speckle_farfield, synthesize_screen
from .errors import ParameterError
from .fields import Field2D, Grid, make_grid
from .fstack import read_fstack, write_fstack
from .optics import (
    ConfigA,
    ConfigB,
    fourier_plane_grid,
    make_config_b,
    vacuum_baseline_map,
)
from .oracle import g2_config_a, g2_joint_table_config_b_1d
from .source import (
    GainSpec,
    _vacuum_pair,
    gaussian_pump,
    pm_filter_amplitude,
    substream,
)


def build_grid(cfg: ExperimentConfig) -> Grid:
    return make_grid(cfg.grid.n, cfg.grid.pitch_um, cfg.grid.lambda_nm)


def build_gain(cfg: ExperimentConfig) -> GainSpec:
    return GainSpec(g=cfg.gain.g, pm_fwhm=cfg.gain.pm_fwhm_mrad, wavelength=cfg.grid.lambda_nm)


def screen_plane_grid(cfg: ExperimentConfig, grid: Grid) -> Grid:
    """The plane the diffuser lives in: crystal plane (a) or Fourier plane (b)."""
    if cfg.optics.config == "a":
        return grid
    return fourier_plane_grid(grid, cfg.optics.f_mm)


def build_screen(cfg: ExperimentConfig, grid: Grid) -> PhaseScreen:
    plane = screen_plane_grid(cfg, grid)
    sc = cfg.screen
    if sc is None:
        return synthesize_screen(plane, 0.0, 4.0 * plane.pitch, seed=0)
    if sc.path:
        phase = read_fstack(sc.path)[0].astype(float)
        if phase.shape != (plane.n, plane.n):
            raise ParameterError(
                f"screen file {sc.path} has shape {phase.shape}, grid wants {plane.n}"
            )
        return PhaseScreen(
            grid=plane,
            phase=phase,
            rms_phase=float(np.sqrt(np.mean(phase**2))),
            corr_length=float(sc.corr_um),
            seed=int(sc.seed),
        )
    return synthesize_screen(plane, sc.rms_rad, sc.corr_um, seed=sc.seed)


def build_optics(cfg: ExperimentConfig, screen: PhaseScreen):
    o = cfg.optics
    if o.config == "a":
        return ConfigA(
            screen=screen,
            collection=o.collection,
            f_relay=o.f_relay_mm,
            f_fourier=o.f_fourier_mm,
        )
    return make_config_b(screen, collection=o.collection, f=o.f_mm)


def build_camera(cfg: ExperimentConfig) -> CameraSpec:
    c = cfg.camera
    return CameraSpec(
        pixels=c.pixels,
        pitch=c.pitch_um,
        quantum_efficiency=c.eta,
        read_noise_sigma=c.read_sigma,
        threshold=c.threshold,
        mode=c.mode,
    )


def map_step(cfg: ExperimentConfig) -> float:
    """Physical calibration of one camera pixel on the correlation map.

    Spatial frequency (µm^-1) per pixel in config A (far mode), position
    (µm) per pixel in config B (near mode).
    """
    grid = build_grid(cfg)
    factor = grid.n // cfg.camera.pixels
    if cfg.optics.config == "a":
        return factor * grid.conjugate_pitch
    return factor * grid.pitch


def analysis_mode(cfg: ExperimentConfig) -> str:
    return "far" if cfg.optics.config == "a" else "near"


def _camera_seed(master_seed: int, index: int, arm: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index), arm))
    return int(ss.generate_state(2, np.uint64)[0])


def simulate_stacks(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the Monte Carlo pipeline; returns (signal, idler, screen phase).

    Signal/idler are uint16 stacks of shape (pairs, pixels, pixels) in
    pair-aligned frame order; the screen phase comes back as float32.

    The hot path works in unshifted (natural FFT) pixel order throughout
    and recenters only the small binned intensity, which is equivalent to
    the centered Field2D operations because every pointwise map is
    shifted once up front (white noise is invariant under reindexing).
    The centering shift of the binned frame is exact because the camera
    binning factor divides n/2.
    """
    grid = build_grid(cfg)
    pump = gaussian_pump(grid, cfg.pump.fwhm_mm, cfg.pump.wavelength_nm)
    gain = build_gain(cfg)
    screen = build_screen(cfg, grid)
    opt = build_optics(cfg, screen)
    spec = build_camera(cfg)
    baseline = vacuum_baseline_map(opt, grid, gain)
    n = grid.n
    px = spec.pixels

    def unshift(arr, dtype):
        return np.ascontiguousarray(np.fft.ifftshift(arr)).astype(dtype)

    m_u = unshift(pm_filter_amplitude(grid, gain), np.complex64)
    c_u = unshift(np.cosh(gain.g * np.abs(pump.amplitude)), np.complex64)
    s_u = unshift(np.sinh(gain.g * np.abs(pump.amplitude)), np.complex64)
    if isinstance(opt, ConfigA):
        base_s = base_i = bin_intensity(baseline, px)
        t_u = unshift(opt.collection * screen.transmission_map(), np.complex64)
    else:
        base_s = bin_intensity(baseline[0], px)
        base_i = bin_intensity(baseline[1], px)
        tau_s_u = unshift(opt.collection * opt.branch_transmission("signal"), np.complex64)
        tau_i_u = unshift(opt.collection * opt.branch_transmission("idler"), np.complex64)

    pairs = cfg.run.pairs
    ms = cfg.run.master_seed
    sig = np.empty((pairs, px, px), np.uint16)
    idl = np.empty((pairs, px, px), np.uint16)
    for start in range(0, pairs, cfg.run.batch):
        idx = range(start, min(start + cfg.run.batch, pairs))
        nb = len(idx)
        spectra = np.empty((2 * nb, n, n), np.complex64)
        for k, i in enumerate(idx):
            rng = np.random.default_rng(substream(ms, i))
            spectra[2 * k : 2 * k + 2] = m_u * _vacuum_pair(rng, n, np.complex64)
        vac = _fft.ifft2(spectra, axes=(-2, -1), norm="ortho", workers=-1)
        fields = np.empty_like(vac)
        tmp = np.empty((n, n), np.complex64)
        for k in range(nb):
            a_s, a_i = vac[2 * k], vac[2 * k + 1]
            np.conjugate(a_i, out=tmp)
            tmp *= s_u
            np.multiply(a_s, c_u, out=fields[2 * k])
            fields[2 * k] += tmp
            np.conjugate(a_s, out=tmp)
            tmp *= s_u
            np.multiply(a_i, c_u, out=fields[2 * k + 1])
            fields[2 * k + 1] += tmp
        if isinstance(opt, ConfigA):
            fields *= t_u
            cam = _fft.fft2(fields, axes=(-2, -1), norm="ortho", workers=-1)
        else:
            spec_w = _fft.fft2(fields, axes=(-2, -1), norm="ortho", workers=-1)
            spec_w[0::2] *= tau_s_u
            spec_w[1::2] *= tau_i_u
            cam = _fft.ifft2(spec_w, axes=(-2, -1), norm="ortho", workers=-1)
        inten = np.abs(cam)
        np.square(inten, out=inten)

        def recenter(frame):
            # binning commutes with the half-frame shift only for even px
            if px % 2 == 0:
                return np.fft.fftshift(bin_intensity(frame, px))
            return bin_intensity(np.fft.fftshift(frame), px)

        for k, i in enumerate(idx):
            bs = recenter(inten[2 * k])
            bi = recenter(inten[2 * k + 1])
            sig[i] = detect(
                bs, spec, _camera_seed(ms, i, 1), baseline=base_s,
                frame_index=i, clip_tolerance=cfg.camera.clip_tol,
            ).counts
            idl[i] = detect(
                bi, spec, _camera_seed(ms, i, 2), baseline=base_i,
                frame_index=i, clip_tolerance=cfg.camera.clip_tol,
            ).counts
    return sig, idl, screen.phase.astype(np.float32)


def run_simulate(cfg: ExperimentConfig, out_dir, config_path=None) -> Path:
    """Write signal.fstack, idler.fstack, screen.fstack and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sig, idl, phase = simulate_stacks(cfg)
    write_fstack(out / "signal.fstack", sig)
    write_fstack(out / "idler.fstack", idl)
    write_fstack(out / "screen.fstack", phase)
    manifest = {
        "master_seed": cfg.run.master_seed,
        "pairs": cfg.run.pairs,
        "mode": analysis_mode(cfg),
        "step": map_step(cfg),
        "config": cfg.optics.config,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if config_path is not None:
        shutil.copyfile(config_path, out / "config.ini")
    return out


def load_pair_stack(signal_path, idler_path, mode: str, step: float, spec=None) -> PairStack:
    """Read two pair-aligned FSTACK files into a PairStack."""
    sig = read_fstack(signal_path)
    idl = read_fstack(idler_path)
    if sig.shape != idl.shape:
        raise ParameterError(
            f"stack shapes differ: signal {sig.shape} vs idler {idl.shape}"
        )
    if sig.dtype != np.uint16 or idl.dtype != np.uint16:
        raise ParameterError("pair stacks must hold uint16 photon counts")
    if spec is None:
        spec = CameraSpec(
            pixels=sig.shape[1], pitch=16.0, quantum_efficiency=1.0,
            read_noise_sigma=0.0, mode="ideal",
        )
    pairs = [
        (PhotonImage(counts=s, frame_index=k, seed=0), PhotonImage(counts=i, frame_index=k, seed=0))
        for k, (s, i) in enumerate(zip(sig, idl))
    ]
    return PairStack(pairs=pairs, mode=mode, spec=spec, step=step)


def run_analyze(signal_path, idler_path, mode: str, step: float, report_path=None, map_path=None):
    """Analyze a stack pair; optionally write the CSV report and map."""
    stack = load_pair_stack(signal_path, idler_path, mode, step)
    map_, report = analyze_stack(stack)
    if report_path is not None:
        write_report_csv(report, report_path)
    if map_path is not None:
        write_fstack(map_path, map_.values.astype(np.float32))
    return map_, report


def run_oracle(cfg: ExperimentConfig, out_path=None) -> np.ndarray:
    """Evaluate the closed-form correlation map for the configured setup."""
    grid = build_grid(cfg)
    screen = build_screen(cfg, grid)
    if cfg.optics.config == "a":
        pump = gaussian_pump(grid, cfg.pump.fwhm_mm, cfg.pump.wavelength_nm)
        values = g2_config_a(pump, screen, f_mm=cfg.optics.f_fourier_mm).values
    else:
        if not cfg.optics.oracle_1d:
            raise ParameterError(
                "config b has no 2-D closed form; set [optics] oracle_1d = true"
            )
        pump = gaussian_pump(grid, cfg.pump.fwhm_mm, cfg.pump.wavelength_nm)
        n = grid.n
        # 1-D transverse model: central screen row, split into half apertures
        row = screen.transmission_map()[n // 2]
        left = np.zeros(n)
        left[: n // 2] = 1.0
        tau_s = cfg.optics.collection * row * left
        tau_i = cfg.optics.collection * row * (1.0 - left)
        values = g2_joint_table_config_b_1d(
            pump.amplitude[n // 2], tau_s, tau_i, grid.pitch
        ).values
    if out_path is not None:
        write_fstack(out_path, values.astype(np.float32))
    return values


def run_laser(cfg: ExperimentConfig, out_path=None) -> np.ndarray:
    """Far-field intensity of a coherent beam through the screen (alignment shot)."""
    grid = build_grid(cfg)
    plane = screen_plane_grid(cfg, grid)
    screen = build_screen(cfg, grid)
    fwhm_um = cfg.pump.fwhm_mm * 1e3
    beam = Field2D(
        plane, np.exp(-2.0 * np.log(2.0) * plane.radius_sq() / fwhm_um**2).astype(complex)
    )
    inten = laser_speckle_farfield(screen, beam)
    if out_path is not None:
        write_fstack(out_path, inten.astype(np.float32))
    return inten


def run_gen_diffuser(n: int, pitch_um: float, rms_rad: float, corr_um: float, seed: int, out_path):
    """Synthesize a screen and store its phase map as a one-frame FSTACK."""
    grid = make_grid(n, pitch_um, 710.0)
    screen = synthesize_screen(grid, rms_rad, corr_um, seed=seed)
    write_fstack(out_path, screen.phase.astype(np.float32))
    return screen
