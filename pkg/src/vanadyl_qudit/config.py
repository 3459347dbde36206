"""Run configuration: nested dataclasses loaded from TOML plus flag overrides."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import FIELD_AXES, FrameGeometry, SpinSystemParams
from .qudit import AGGREGATIONS, FILTER_WIDTHS
from .relaxometry import KINDS
from .spectroscopy import INTENSITY_MODELS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Evenly spaced grid; ``log`` switches to geometric spacing."""

    start: float
    stop: float
    num: int
    log: bool = False

    def values(self):
        if self.log:
            return np.geomspace(self.start, self.stop, self.num)
        return np.linspace(self.start, self.stop, self.num)


@dataclass(frozen=True)
class LevelsConfig:
    field_grid: Grid = Grid(0.0, 0.5, 101)  # T
    tracked: bool = False


@dataclass(frozen=True)
class SpectraConfig:
    nu_mhz: float = 9849.0
    b_min: float = 0.25  # T
    b_max: float = 0.45
    b_points: int = 2001
    linewidth_mt: float = 3.0
    temperature_k: float = 295.0
    scan_step_mt: float = 0.5
    intensity_model: str = "rabi"
    rotation_axis: str = "Z"
    angle_grid: Grid = Grid(0.0, 360.0, 73)  # deg


@dataclass(frozen=True)
class TransmissionConfig:
    freq_grid: Grid = Grid(50.0, 14000.0, 2790)  # MHz
    field_grid: Grid = Grid(0.0, 0.4, 81)  # T
    temperature_k: float = 4.2
    linewidth_mhz: float = 60.0
    delta_b_mt: float | None = None  # defaults to one field step


@dataclass(frozen=True)
class NormalizeConfig:
    s21_csv: str = ""
    reference_csv: str = ""
    b_offset_mt: float = 1.0


@dataclass(frozen=True)
class ThermoConfig:
    field_t: float = 2.0
    temperature_grid: Grid = Grid(0.05, 300.0, 200, True)
    direction: str = "powder"  # or a named axis
    n_orientations: int = 200
    b_probe_t: float = 1e-3


@dataclass(frozen=True)
class FitConfig:
    model: str = "HahnStretched"
    input_csv: str = ""  # empty: use the built-in synthetic trace
    initial: dict = field(default_factory=dict)
    fixed: tuple | None = None
    max_iter: int = 500


@dataclass(frozen=True)
class QuditConfig:
    fields_t: tuple = (0.02, 0.04, 0.1, 0.3)
    drive_axis: str = "X"
    bmw_mt: float = 1.0
    t2_us: float = 5.0
    filter_width: str = "max"
    rate_agg: str = "sequential"
    pulse_factor: float = 0.5
    scan_grid: Grid = Grid(0.01, 0.3, 30)


@dataclass(frozen=True)
class RunConfig:
    spin: SpinSystemParams = SpinSystemParams()
    geometry: FrameGeometry = FrameGeometry()
    field_axis: str = "X"
    orientations: int = 2000
    out: str = "out"
    timestamp: bool = False
    levels: LevelsConfig = LevelsConfig()
    spectra: SpectraConfig = SpectraConfig()
    transmission: TransmissionConfig = TransmissionConfig()
    normalize: NormalizeConfig = NormalizeConfig()
    thermo: ThermoConfig = ThermoConfig()
    fit: FitConfig = FitConfig()
    qudit: QuditConfig = QuditConfig()

    def to_dict(self):
        return _to_plain(self)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in sorted(obj.items())}
    return obj


def _coerce(value, current, where):
    """Check a scalar against the type of its default."""
    if isinstance(current, bool):
        ok = isinstance(value, bool)
    elif isinstance(current, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(current, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(current, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where}: expected {type(current).__name__}, got {type(value).__name__}")
    return value


def _build(cls, data, path, defaults=None):
    """Instantiate dataclass ``cls`` from a mapping, recursing into nested sections."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{path + '.' if path else ''}{sorted(unknown)[0]}: unknown field")
    defaults = cls() if defaults is None else defaults
    kw = {}
    for name, value in data.items():
        where = f"{path}.{name}" if path else name
        current = getattr(defaults, name)
        if dataclasses.is_dataclass(current):
            value = _build(type(current), value, where, current)
        elif isinstance(current, tuple) and isinstance(value, list):
            value = tuple(value)
        elif current is not None:
            value = _coerce(value, current, where)
        kw[name] = value
    try:
        return dataclasses.replace(defaults, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def _need(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _check_grid(g, where, positive=False):
    _need(isinstance(g.num, int) and g.num >= 1, f"{where}.num", "must be a positive integer")
    _need(g.num == 1 or g.stop > g.start, where, "grid must be increasing (stop > start)")
    if positive or g.log:
        _need(g.start > 0, f"{where}.start", "must be positive")


def validate(cfg):
    """Raise ConfigError naming the first offending field."""
    _need(cfg.spin.g_par > 0 and cfg.spin.g_perp > 0, "spin", "g factors must be positive")
    _need(cfg.geometry.site in (1, 2), "geometry.site", "must be 1 or 2")
    _need(cfg.field_axis in FIELD_AXES, "field_axis", f"must be one of {FIELD_AXES}")
    _need(isinstance(cfg.orientations, int) and cfg.orientations >= 100, "orientations", "must be an integer >= 100")
    _check_grid(cfg.levels.field_grid, "levels.field_grid")
    _need(cfg.levels.field_grid.start >= 0, "levels.field_grid.start", "must be nonnegative")
    sp = cfg.spectra
    _need(sp.nu_mhz > 0, "spectra.nu_mhz", "must be positive")
    _need(0 <= sp.b_min < sp.b_max, "spectra.b_max", "must exceed b_min >= 0")
    _need(sp.b_points >= 2, "spectra.b_points", "must be at least 2")
    _need(sp.linewidth_mt > 0, "spectra.linewidth_mt", "must be positive")
    _need(sp.temperature_k > 0, "spectra.temperature_k", "must be positive")
    _need(sp.scan_step_mt > 0, "spectra.scan_step_mt", "must be positive")
    _need(sp.intensity_model in INTENSITY_MODELS, "spectra.intensity_model", f"must be one of {INTENSITY_MODELS}")
    _need(sp.rotation_axis in ("X", "Y", "Z"), "spectra.rotation_axis", "must be X, Y or Z")
    _check_grid(sp.angle_grid, "spectra.angle_grid")
    _need(sp.angle_grid.stop - sp.angle_grid.start <= 360, "spectra.angle_grid", "must span at most 360 degrees")
    tr = cfg.transmission
    _check_grid(tr.freq_grid, "transmission.freq_grid", positive=True)
    _check_grid(tr.field_grid, "transmission.field_grid")
    _need(tr.freq_grid.num >= 2 and tr.field_grid.num >= 2, "transmission", "grids need at least two points")
    _need(tr.temperature_k > 0, "transmission.temperature_k", "must be positive")
    _need(tr.linewidth_mhz > 0, "transmission.linewidth_mhz", "must be positive")
    _need(tr.delta_b_mt is None or tr.delta_b_mt > 0, "transmission.delta_b_mt", "must be positive")
    _need(cfg.normalize.b_offset_mt > 0, "normalize.b_offset_mt", "must be positive")
    th = cfg.thermo
    _need(th.field_t >= 0, "thermo.field_t", "must be nonnegative")
    _check_grid(th.temperature_grid, "thermo.temperature_grid", positive=True)
    _need(th.direction == "powder" or th.direction in FIELD_AXES, "thermo.direction",
          f"must be 'powder' or one of {FIELD_AXES}")
    _need(th.n_orientations >= 1, "thermo.n_orientations", "must be positive")
    _need(th.b_probe_t > 0, "thermo.b_probe_t", "must be positive")
    ft = cfg.fit
    _need(ft.model in KINDS, "fit.model", f"must be one of {sorted(KINDS)}")
    _need(ft.max_iter >= 1, "fit.max_iter", "must be positive")
    q = cfg.qudit
    _need(len(q.fields_t) >= 1 and all(b >= 0 for b in q.fields_t), "qudit.fields_t", "must be nonnegative fields")
    _need(q.drive_axis in FIELD_AXES, "qudit.drive_axis", f"must be one of {FIELD_AXES}")
    _need(q.bmw_mt > 0, "qudit.bmw_mt", "must be positive")
    _need(q.t2_us > 0, "qudit.t2_us", "must be positive")
    _need(q.filter_width in FILTER_WIDTHS, "qudit.filter_width", f"must be one of {FILTER_WIDTHS}")
    _need(q.rate_agg in AGGREGATIONS, "qudit.rate_agg", f"must be one of {AGGREGATIONS}")
    _need(q.pulse_factor > 0, "qudit.pulse_factor", "must be positive")
    _check_grid(q.scan_grid, "qudit.scan_grid")
    return cfg


def load_config(path=None, overrides=None):
    """Defaults, then the TOML file at ``path``, then ``overrides`` (nested dict)."""
    data = {}
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config: {path}: {exc}") from None
    for key, value in (overrides or {}).items():
        if isinstance(value, dict):
            data.setdefault(key, {})
            if not isinstance(data[key], dict):
                raise ConfigError(f"{key}: expected a table")
            data[key].update(value)
        else:
            data[key] = value
    return validate(_build(RunConfig, data, ""))
