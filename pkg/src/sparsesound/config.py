"""TOML run configuration.

Every section maps onto a dataclass. Unknown keys are rejected so that
typos fail loudly. Each command writes the resolved configuration (after
command-line overrides) beside its outputs as ``resolved_config.toml``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import toml

from .absorption import AbsorptionLine, AbsorptionModel, WATER_LINE_380GHZ, load_table_csv
from .channel import AntennaPattern, PathParams, SoundingModel, azimuth_ring, table_one_paths
from .estimator import SageConfig
from .sampling import FrequencyGrid, load_scheme, make_grid


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


def _build(cls, data, section: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be a table")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


@dataclass
class SchemeSection:
    type: str = "pfs"
    fc: float = 380e9
    bandwidth: float = 20e9
    k: int | None = 100
    m: int | None = None
    n: int | None = None
    n1: int | None = None
    n2: int | None = None
    file: str | None = None

    def build(self) -> FrequencyGrid:
        if self.file:
            return load_scheme(self.file)
        extra = {key: getattr(self, key) for key in ("m", "n", "n1", "n2")
                 if getattr(self, key) is not None}
        return make_grid(self.type, self.fc - self.bandwidth / 2.0, self.bandwidth, self.k, **extra)


@dataclass
class PathEntry:
    delay_s: float
    amplitude: float | None = None
    amplitude_db: float | None = None
    phase_rad: float = 0.0
    azimuth_deg: float = 0.0
    elevation_deg: float = 90.0

    def build(self) -> PathParams:
        if (self.amplitude is None) == (self.amplitude_db is None):
            raise ConfigError("each path needs exactly one of amplitude / amplitude_db")
        mag = self.amplitude if self.amplitude is not None else 10.0 ** (self.amplitude_db / 20.0)
        return PathParams(mag * complex(math.cos(self.phase_rad), math.sin(self.phase_rad)),
                          self.delay_s, math.radians(self.azimuth_deg),
                          math.radians(self.elevation_deg))


@dataclass
class ChannelSection:
    snr_db: float | str | None = 50.0
    preset: str | None = None
    paths: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if isinstance(self.snr_db, str):
            if self.snr_db.lower() != "none":
                raise ConfigError(f"[channel] snr_db must be a number or 'none', got {self.snr_db!r}")
            self.snr_db = None
        if self.preset not in (None, "table1"):
            raise ConfigError(f"[channel] unknown preset {self.preset!r}")
        self.paths = [p if isinstance(p, PathEntry) else _build(PathEntry, p, "channel.paths")
                      for p in self.paths]

    def build(self) -> list[PathParams]:
        if self.preset == "table1":
            if self.paths:
                raise ConfigError("[channel] give either preset or paths, not both")
            return table_one_paths()
        if not self.paths:
            raise ConfigError("[channel] needs a 'paths' list or preset = \"table1\"")
        return [p.build() for p in self.paths]


@dataclass
class AbsorptionSection:
    kind: str = "none"
    center_hz: float = WATER_LINE_380GHZ
    strength_per_m: float = 0.12
    halfwidth_hz: float = 3e9
    floor_db: float = -40.0
    table: str | None = None

    def build(self) -> AbsorptionModel:
        if self.kind == "none":
            return AbsorptionModel.none()
        if self.kind == "synthetic":
            return AbsorptionModel.synthetic(
                [AbsorptionLine(self.center_hz, self.strength_per_m, self.halfwidth_hz)],
                floor_db=self.floor_db, name="synthetic")
        if self.kind == "table":
            if not self.table:
                raise ConfigError("[absorption] kind = \"table\" needs 'table'")
            return load_table_csv(self.table, floor_db=self.floor_db)
        raise ConfigError(f"[absorption] unknown kind {self.kind!r}")


@dataclass
class AntennaSection:
    pattern: str = "isotropic"
    hpbw_deg: float | None = None
    boresight_gain: float = 1.0
    n_pointings: int = 1
    elevation_deg: float = 90.0

    def build_pattern(self) -> AntennaPattern:
        hpbw = math.radians(self.hpbw_deg) if self.hpbw_deg is not None else None
        return AntennaPattern(self.pattern, hpbw, self.boresight_gain)

    def build_pointings(self) -> np.ndarray:
        if self.n_pointings < 1:
            raise ConfigError("[antenna] n_pointings must be >= 1")
        return azimuth_ring(self.n_pointings, math.radians(self.elevation_deg))


@dataclass
class SageSection:
    n_paths: int = 5
    max_iterations: int = 20
    convergence_eps: float = 1e-4
    delay_lo_s: float = 0.0
    delay_hi_s: float = 220e-9
    delta_s: float | None = None
    refine: bool = True
    rectified: bool = True
    model_absorption: bool | None = None
    init_sweeps: int = 1
    azimuth_step_deg: float | None = None

    def build(self, n_pointings: int = 1, elevation: float = math.pi / 2) -> SageConfig:
        az_grid = None
        if self.azimuth_step_deg is not None and n_pointings > 1:
            az_grid = np.radians(np.arange(0.0, 360.0, self.azimuth_step_deg))
        try:
            return SageConfig(n_paths=self.n_paths, max_iterations=self.max_iterations,
                              convergence_eps=self.convergence_eps,
                              delay_search=(self.delay_lo_s, self.delay_hi_s, self.delta_s),
                              refine=self.refine, rectified=self.rectified,
                              model_absorption=self.model_absorption,
                              init_sweeps=self.init_sweeps, azimuth_grid=az_grid,
                              default_direction=(0.0, elevation))
        except ValueError as exc:
            raise ConfigError(f"[sage] {exc}") from None


@dataclass
class BenchmarkSection:
    schemes: list = field(default_factory=lambda: ["ufs", "cfs", "nfs", "pfs"])
    k_values: list = field(default_factory=lambda: [50, 70, 100, 120, 135, 200])
    n_trials: int = 10
    rectified: list = field(default_factory=lambda: [False, True])
    ma: list = field(default_factory=lambda: [False, True])

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ConfigError("[benchmark] n_trials must be >= 1")
        if not self.k_values:
            raise ConfigError("[benchmark] k_values must not be empty")


@dataclass
class StatsSection:
    threshold_db: float = 10.0
    dynamic_range_db: float | str | None = 30.0
    window: str | None = "hann"

    def __post_init__(self) -> None:
        if isinstance(self.dynamic_range_db, str):
            if self.dynamic_range_db.lower() != "none":
                raise ConfigError("[stats] dynamic_range_db must be a number or 'none'")
            self.dynamic_range_db = None
        if self.window is None or self.window.lower() == "none":
            self.window = None
        elif self.window != "hann":
            raise ConfigError(f"[stats] unknown window {self.window!r}")


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    scheme: SchemeSection = field(default_factory=SchemeSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    absorption: AbsorptionSection = field(default_factory=AbsorptionSection)
    antenna: AntennaSection = field(default_factory=AntennaSection)
    sage: SageSection = field(default_factory=SageSection)
    benchmark: BenchmarkSection = field(default_factory=BenchmarkSection)
    stats: StatsSection = field(default_factory=StatsSection)

    _SECTIONS = {"scheme": SchemeSection, "channel": ChannelSection,
                 "absorption": AbsorptionSection, "antenna": AntennaSection,
                 "sage": SageSection, "benchmark": BenchmarkSection, "stats": StatsSection}

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        unknown = sorted(set(data) - set(cls._SECTIONS) - {"seed", "output_dir"})
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
        kwargs = {name: _build(sec, data.get(name), name) for name, sec in cls._SECTIONS.items()}
        return cls(seed=int(data.get("seed", 0)), output_dir=str(data.get("output_dir", "out")),
                   **kwargs)

    #: Keys whose ``None`` differs from the default and must be written as "none".
    _EXPLICIT_NONE = {("channel", "snr_db"), ("stats", "dynamic_range_db"), ("stats", "window")}

    def to_dict(self) -> dict:
        def clean(obj):
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in obj.items() if v is not None}
            if isinstance(obj, list):
                return [clean(v) for v in obj]
            return obj
        data = asdict(self)
        for section, key in self._EXPLICIT_NONE:
            if data[section][key] is None:
                data[section][key] = "none"
        return clean(data)

    def sounding_model(self, grid: FrequencyGrid | None = None) -> SoundingModel:
        return SoundingModel(grid if grid is not None else self.scheme.build(),
                             self.antenna.build_pointings(), self.antenna.build_pattern(),
                             self.absorption.build())

    def sage_config(self) -> SageConfig:
        return self.sage.build(self.antenna.n_pointings, math.radians(self.antenna.elevation_deg))


def load_config(path=None) -> RunConfig:
    """Read a TOML file (``None`` gives the defaults)."""
    if path is None:
        return RunConfig()
    try:
        data = toml.load(str(path))
    except toml.TomlDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(data)


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``section.key=value`` (value parsed as a TOML literal, else a string)."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like section.key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = toml.loads(f"v = {raw}")["v"]
    except toml.TomlDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def save_resolved(config: RunConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "resolved_config.toml"
    path.write_text(toml.dumps(config.to_dict()))
    return path
