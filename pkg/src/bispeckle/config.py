"""Experiment configuration files.

Strict line-oriented INI: ``key = value`` pairs under ``[section]``
headers, ``#`` comments, UTF-8. Unknown sections or keys are errors so
typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields

from .errors import ConfigError

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


@dataclass(frozen=True)
class GridSection:
    n: int
    pitch_um: float
    lambda_nm: float = 710.0


@dataclass(frozen=True)
class PumpSection:
    fwhm_mm: float
    wavelength_nm: float = 355.0


@dataclass(frozen=True)
class GainSection:
    g: float
    pm_fwhm_mrad: float = 47.0


@dataclass(frozen=True)
class ScreenSection:
    rms_rad: float
    corr_um: float
    seed: int = 0
    path: str = ""


@dataclass(frozen=True)
class OpticsSection:
    config: str
    f_relay_mm: float = 75.0
    f_fourier_mm: float = 150.0
    f_mm: float = 150.0
    collection: float = 1.0
    oracle_1d: bool = False


@dataclass(frozen=True)
class CameraSection:
    pixels: int
    pitch_um: float
    eta: float
    read_sigma: float = 1.0
    threshold: float = 4.0
    mode: str = "thresholded"
    clip_tol: float = 0.01


@dataclass(frozen=True)
class RunSection:
    pairs: int
    master_seed: int
    out_dir: str = ""
    batch: int = 64


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSection
    pump: PumpSection
    gain: GainSection
    optics: OpticsSection
    camera: CameraSection
    run: RunSection
    screen: ScreenSection | None = None


_SECTIONS = {
    "grid": GridSection,
    "pump": PumpSection,
    "gain": GainSection,
    "screen": ScreenSection,
    "optics": OpticsSection,
    "camera": CameraSection,
    "run": RunSection,
}
_OPTIONAL_SECTIONS = {"screen"}


def _convert(raw: str, typ, section: str, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() not in _BOOL:
                raise ValueError(raw)
            return _BOOL[raw.lower()]
        if typ is int:
            return int(raw, 0)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}"
        ) from exc


# dataclasses under `from __future__ import annotations` store field types
# as strings; resolve them once into a lookup table
_SIMPLE_TYPES = {"int": int, "float": float, "str": str, "bool": bool}
_FIELD_TYPES = {
    (name, f.name): _SIMPLE_TYPES[f.type] if isinstance(f.type, str) else f.type
    for name, cls in _SECTIONS.items()
    for f in fields(cls)
}


def _required(f) -> bool:
    from dataclasses import MISSING

    return f.default is MISSING and f.default_factory is MISSING


def _build_section(name: str, items: dict) -> object:
    cls = _SECTIONS[name]
    spec = {f.name: f for f in fields(cls)}
    unknown = set(items) - set(spec)
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(sorted(unknown))}")
    kwargs = {
        key: _convert(items[key], _FIELD_TYPES[name, key], name, key)
        for key in spec
        if key in items
    }
    missing = [k for k in spec if k not in kwargs and _required(spec[k])]
    if missing:
        raise ConfigError(f"[{name}] missing required key(s): {', '.join(missing)}")
    return cls(**kwargs)


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    parser = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
    )
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    unknown = set(parser.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    missing = set(_SECTIONS) - _OPTIONAL_SECTIONS - set(parser.sections())
    if missing:
        raise ConfigError(f"missing section(s): {', '.join(sorted(missing))}")
    built = {
        name: _build_section(name, dict(parser.items(name)))
        for name in parser.sections()
    }
    cfg = ExperimentConfig(
        grid=built["grid"],
        pump=built["pump"],
        gain=built["gain"],
        optics=built["optics"],
        camera=built["camera"],
        run=built["run"],
        screen=built.get("screen"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.optics.config not in ("a", "b"):
        raise ConfigError(f"[optics] config must be 'a' or 'b', got {cfg.optics.config!r}")
    if cfg.grid.n < 2 or cfg.grid.n & (cfg.grid.n - 1):
        raise ConfigError(f"[grid] n must be a power of two >= 2, got {cfg.grid.n}")
    if cfg.camera.pixels < 1 or cfg.grid.n % cfg.camera.pixels:
        raise ConfigError(
            f"[camera] pixels {cfg.camera.pixels} must integer-divide grid n {cfg.grid.n}"
        )
    if cfg.run.pairs < 1:
        raise ConfigError(f"[run] pairs must be >= 1, got {cfg.run.pairs}")
    if cfg.run.batch < 1:
        raise ConfigError(f"[run] batch must be >= 1, got {cfg.run.batch}")
    if cfg.run.master_seed < 0:
        raise ConfigError("[run] master_seed must be >= 0")
    if cfg.screen is not None and not cfg.screen.path:
        if cfg.screen.rms_rad < 0 or cfg.screen.corr_um <= 0:
            raise ConfigError("[screen] needs rms_rad >= 0 and corr_um > 0")
