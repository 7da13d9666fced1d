"""Run configuration: one YAML file with one section per pipeline stage.

Every key is optional and falls back to the desk-scale default scenario.
Unknown keys are rejected and every error names the offending key, e.g.
``grid.resolution: must be > 0``.  ``RunConfig.build_*`` turn the sections
into the library objects.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from hotspotloc.kpi import AOA_BIN_WIDTH_DEG, TA_BIN_WIDTH_M
from hotspotloc.localize import DEFAULT_ALPHA, FusionConfig
from hotspotloc.radio import Cell, ConfigurationError, PixelGrid, build_radio_map, grid_for_cells, hex_layout
from hotspotloc.sim import KMH, Scenario, hotspot_intensity, point_intensity, random_hotspots

INTENSITY_KINDS = ("random_hotspots", "hotspots", "point", "uniform")


@dataclass
class GridSection:
    resolution: float = 25.0
    margin_m: float = 300.0
    origin: Optional[list] = None
    width: Optional[int] = None
    height: Optional[int] = None


@dataclass
class LayoutSection:
    n_sites: int = 7
    isd_m: float = 500.0
    center: list = field(default_factory=lambda: [0.0, 0.0])
    azimuths_deg: list = field(default_factory=lambda: [0.0, 120.0, 240.0])
    beamwidth_deg: float = 65.0
    tx_power_dbm: float = 46.0
    max_backoff_db: float = 30.0
    cells: Optional[list] = None


@dataclass
class RadioSection:
    shadowing_sigma_db: float = 0.0
    shadowing_seed: Optional[int] = None


@dataclass
class IntensitySection:
    kind: str = "random_hotspots"
    count: int = 5
    sigma_m: float = 50.0
    peak: float = 20.0
    background: float = 1.0
    max_site_distance_m: Optional[float] = None
    centers: Optional[list] = None


@dataclass
class TrafficSection:
    arrival_rate: float = 20.0
    bandwidth_hz: float = 20e6
    file_size_bits: int = 1_000_000
    mobile_fraction: float = 0.3
    speed_mps: float = 8.33 * KMH
    period_s: float = 900.0
    n_periods: int = 4
    tick_s: float = 1.0
    hysteresis_db: float = 3.0
    max_attached: Optional[int] = None
    noise_figure_db: float = 9.0
    se_max: float = 6.0
    intensity: IntensitySection = field(default_factory=IntensitySection)


@dataclass
class KpiSection:
    ta_bin_width_m: float = TA_BIN_WIDTH_M
    aoa_bin_width_deg: float = AOA_BIN_WIDTH_DEG
    neighbor_top_n: Optional[int] = None


@dataclass
class FusionSection:
    alpha: list = field(default_factory=lambda: list(DEFAULT_ALPHA))
    smoothing_m: float = 25.0
    rule: str = "proportional"
    prior_floor: float = 0.5
    n_iterations: int = 30
    load_tolerance: float = 0.15
    candidate_margin_db: float = 6.0
    throughput_threshold: float = 0.5
    norm_constant_bps: Optional[float] = None
    edge_fraction: float = 0.6
    edge_rule: str = "literal"
    radius_percentile: float = 95.0
    correlation_gate: bool = False
    correlation_threshold: float = 0.7
    ta_rebucket: int = 1


@dataclass
class EvaluationSection:
    thresholds: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 70.0])
    cdf_points: int = 101
    cdf_weighting: str = "pixels"


@dataclass
class PathsSection:
    kpis: str = "kpis.csv"
    truth: str = "truth.csv"
    radio: str = "radio.csv"
    weights: str = "weights.csv"
    report_dir: str = "report"
    ablation_dir: str = "ablation"


@dataclass
class RunConfig:
    seed: int = 0
    grid: GridSection = field(default_factory=GridSection)
    layout: LayoutSection = field(default_factory=LayoutSection)
    radio: RadioSection = field(default_factory=RadioSection)
    traffic: TrafficSection = field(default_factory=TrafficSection)
    kpi: KpiSection = field(default_factory=KpiSection)
    fusion: FusionSection = field(default_factory=FusionSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    paths: PathsSection = field(default_factory=PathsSection)

    def validate(self) -> "RunConfig":
        _validate(self)
        return self

    # -- builders ----------------------------------------------------------

    def build_cells(self) -> list[Cell]:
        lay = self.layout
        if lay.cells is not None:
            cells = []
            for n, entry in enumerate(lay.cells):
                entry = dict(entry)
                bad = set(entry) - {f.name for f in dataclasses.fields(Cell)}
                if bad:
                    raise ConfigurationError(f"layout.cells[{n}].{sorted(bad)[0]}: unknown key")
                entry.setdefault("beamwidth_deg", lay.beamwidth_deg)
                entry.setdefault("tx_power_dbm", lay.tx_power_dbm)
                entry.setdefault("max_backoff_db", lay.max_backoff_db)
                try:
                    cells.append(Cell(**entry))
                except TypeError as exc:
                    raise ConfigurationError(f"layout.cells[{n}]: {exc}") from None
            return cells
        return hex_layout(lay.n_sites, lay.isd_m, center=tuple(lay.center),
                          azimuths=tuple(lay.azimuths_deg), beamwidth_deg=lay.beamwidth_deg,
                          tx_power_dbm=lay.tx_power_dbm, max_backoff_db=lay.max_backoff_db)

    def build_grid(self, cells=None) -> PixelGrid:
        g = self.grid
        if g.origin is not None:
            return PixelGrid((float(g.origin[0]), float(g.origin[1])), int(g.width), int(g.height),
                             float(g.resolution))
        return grid_for_cells(cells if cells is not None else self.build_cells(), g.resolution, g.margin_m)

    def build_radio(self, grid: PixelGrid | None = None, cells=None):
        cells = cells if cells is not None else self.build_cells()
        grid = grid or self.build_grid(cells)
        seed = self.radio.shadowing_seed if self.radio.shadowing_seed is not None else self.seed
        return build_radio_map(grid, cells, {"sigma_db": self.radio.shadowing_sigma_db, "seed": seed})

    def build_intensity(self, grid: PixelGrid, cells) -> np.ndarray:
        inten = self.traffic.intensity
        if inten.kind == "uniform":
            return np.ones(grid.shape)
        if inten.kind == "point":
            i, j = grid.index_of(*inten.centers[0])
            return point_intensity(grid, int(i), int(j))
        if inten.kind == "hotspots":
            spots = [(float(x), float(y), inten.sigma_m, inten.peak) for x, y in inten.centers]
        else:
            rng = np.random.default_rng([self.seed, 1])
            spots = random_hotspots(grid, cells, inten.count, rng, inten.sigma_m, inten.peak,
                                    inten.max_site_distance_m)
        return hotspot_intensity(grid, spots, inten.background)

    def build_scenario(self, grid: PixelGrid | None = None, cells=None) -> Scenario:
        cells = cells if cells is not None else self.build_cells()
        grid = grid or self.build_grid(cells)
        t = self.traffic
        return Scenario(
            grid=grid, cells=cells, intensity=self.build_intensity(grid, cells),
            arrival_rate=t.arrival_rate, bandwidth_hz=t.bandwidth_hz, file_size_bits=int(t.file_size_bits),
            mobile_fraction=t.mobile_fraction, speed_mps=t.speed_mps, period_s=t.period_s,
            n_periods=int(t.n_periods), seed=self.seed, tick_s=t.tick_s, hysteresis_db=t.hysteresis_db,
            max_attached=t.max_attached, noise_figure_db=t.noise_figure_db, se_max=t.se_max,
            ta_bin_width=self.kpi.ta_bin_width_m, aoa_bin_width=self.kpi.aoa_bin_width_deg,
            neighbor_top_n=self.kpi.neighbor_top_n,
        )

    def build_fusion(self) -> FusionConfig:
        return FusionConfig(**{f.name: getattr(self.fusion, f.name) for f in dataclasses.fields(FusionSection)})

    def path(self, name: str, out_dir=None) -> Path:
        p = Path(getattr(self.paths, name))
        return p if out_dir is None or p.is_absolute() else Path(out_dir) / p


# -- loading ------------------------------------------------------------------

def _fail(key: str, msg: str):
    raise ConfigurationError(f"{key}: {msg}")


def _coerce(value, default, key):
    """Coerce a YAML scalar to the type of the field default (None defaults accept numbers)."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            _fail(key, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            _fail(key, f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            _fail(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list) and not isinstance(value, list):
        _fail(key, f"expected a list, got {value!r}")
    return value


def _fill(obj, data: dict, prefix: str):
    if not isinstance(data, dict):
        _fail(prefix.rstrip(".") or "config", "expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if key not in fields:
            _fail(name, "unknown key")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _fill(current, value or {}, name + ".")
        elif value is None:
            setattr(obj, key, None)
        elif current is None:
            hint = {"Optional[int]": 0, "Optional[float]": 0.0, "Optional[list]": []}[fields[key].type]
            setattr(obj, key, _coerce(value, hint, name))
        else:
            setattr(obj, key, _coerce(value, current, name))


def _validate(cfg: RunConfig) -> None:
    g, lay, t, inten = cfg.grid, cfg.layout, cfg.traffic, cfg.traffic.intensity
    if not (math.isfinite(g.resolution) and g.resolution > 0):
        _fail("grid.resolution", "must be > 0")
    if not g.margin_m >= 0:
        _fail("grid.margin_m", "must be >= 0")
    if g.origin is not None:
        if len(g.origin) != 2:
            _fail("grid.origin", "expected [x, y]")
        for k in ("width", "height"):
            v = getattr(g, k)
            if v is None or v < 1:
                _fail(f"grid.{k}", "must be >= 1 when grid.origin is given")
    if lay.cells is None and lay.n_sites < 1:
        _fail("layout.n_sites", "must be >= 1")
    if not lay.isd_m > 0:
        _fail("layout.isd_m", "must be > 0")
    if not lay.beamwidth_deg > 0:
        _fail("layout.beamwidth_deg", "must be > 0")
    if any(not 0 <= a < 360 for a in lay.azimuths_deg):
        _fail("layout.azimuths_deg", "each azimuth must be in [0, 360)")
    if not cfg.radio.shadowing_sigma_db >= 0:
        _fail("radio.shadowing_sigma_db", "must be >= 0")
    if inten.kind not in INTENSITY_KINDS:
        _fail("traffic.intensity.kind", f"must be one of {', '.join(INTENSITY_KINDS)}")
    if inten.kind in ("hotspots", "point"):
        if not inten.centers or any(len(c) != 2 for c in inten.centers):
            _fail("traffic.intensity.centers", f"a list of [x, y] is required for kind {inten.kind!r}")
    if inten.kind == "random_hotspots" and inten.count < 0:
        _fail("traffic.intensity.count", "must be >= 0")
    if not inten.sigma_m > 0:
        _fail("traffic.intensity.sigma_m", "must be > 0")
    if not inten.background >= 0 or not inten.peak >= 0:
        _fail("traffic.intensity.background", "background and peak must be >= 0")
    if inten.kind == "random_hotspots" and inten.count == 0 and inten.background == 0:
        _fail("traffic.intensity.background", "no hotspots and zero background leave no traffic")
    for k in ("arrival_rate", "speed_mps", "hysteresis_db"):
        if not getattr(t, k) >= 0:
            _fail(f"traffic.{k}", "must be >= 0")
    for k in ("bandwidth_hz", "file_size_bits", "period_s", "tick_s", "se_max"):
        if not getattr(t, k) > 0:
            _fail(f"traffic.{k}", "must be > 0")
    if not 0 <= t.mobile_fraction <= 1:
        _fail("traffic.mobile_fraction", "must be in [0, 1]")
    if t.n_periods < 1:
        _fail("traffic.n_periods", "must be >= 1")
    if cfg.evaluation.cdf_points < 2:
        _fail("evaluation.cdf_points", "must be >= 2")
    if cfg.evaluation.cdf_weighting not in ("pixels", "mass"):
        _fail("evaluation.cdf_weighting", "must be 'pixels' or 'mass'")
    if not cfg.evaluation.thresholds or any(not 0 < q <= 100 for q in cfg.evaluation.thresholds):
        _fail("evaluation.thresholds", "each threshold must be in (0, 100]")
    names = [(f.name, getattr(cfg.paths, f.name)) for f in dataclasses.fields(PathsSection)]
    seen: dict = {}
    for name, value in names:
        norm = str(Path(value))
        if norm in seen:
            _fail(f"paths.{name}", f"same location as paths.{seen[norm]}")
        seen[norm] = name
    try:
        cfg.build_fusion()
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        _fail("fusion", str(exc))


def parse_override(text: str) -> tuple[list[str], Any]:
    """``section.key=value`` with a YAML-parsed value."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigurationError(f"override {text!r} is not key=value")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        raise ConfigurationError(f"{key}: cannot parse value {raw!r}") from None
    return key.split("."), value


def _nest(keys: list[str], value) -> dict:
    out: Any = value
    for k in reversed(keys):
        out = {k: out}
    return out


def load_config(path=None, overrides: Optional[list] = None) -> RunConfig:
    """Defaults, then the YAML file at ``path``, then ``overrides`` (key path, value) pairs."""
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file not found: {p}")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{p}: not valid YAML ({exc})") from None
        _fill(cfg, data, "")
    for keys, value in overrides or []:
        _fill(cfg, _nest(list(keys), value), "")
    return cfg.validate()


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=False)
