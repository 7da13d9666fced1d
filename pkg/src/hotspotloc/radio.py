"""Geometric and radio substrate shared by the simulator and the localizer.

Coordinates are planar meters with +y pointing to geographic north.  Cell
azimuths follow the antenna-engineering habit (degrees clockwise from north),
while every *bearing* in this package is measured anticlockwise from north,
which is how angle-of-arrival is reported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

D_MIN_M = 10.0
PL_INTERCEPT_DB = 128.1
PL_SLOPE_DB = 37.6


class ConfigurationError(ValueError):
    """Raised when inputs violate a structural precondition."""


@dataclass(frozen=True)
class PixelGrid:
    """Rectangular raster; pixel ``(i, j)`` has center ``origin + (i + .5, j + .5) * resolution``."""

    origin: tuple[float, float]
    width: int
    height: int
    resolution: float = 25.0

    def __post_init__(self):
        if not self.resolution > 0:
            raise ConfigurationError(f"grid.resolution must be > 0, got {self.resolution}")
        if self.width < 1 or self.height < 1:
            raise ConfigurationError(
                f"grid.width and grid.height must be >= 1, got {self.width}x{self.height}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    @property
    def extent(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, x0 + self.width * self.resolution, y0, y0 + self.height * self.resolution)

    def center(self, i, j):
        x0, y0 = self.origin
        return (x0 + (np.asarray(i) + 0.5) * self.resolution,
                y0 + (np.asarray(j) + 0.5) * self.resolution)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Center coordinates as two ``(width, height)`` arrays."""
        i, j = np.meshgrid(np.arange(self.width), np.arange(self.height), indexing="ij")
        return self.center(i, j)

    def index_of(self, x, y):
        """Pixel indices containing ``(x, y)``; points on or past the border are clipped inward."""
        x0, y0 = self.origin
        i = np.floor((np.asarray(x) - x0) / self.resolution).astype(np.int64)
        j = np.floor((np.asarray(y) - y0) / self.resolution).astype(np.int64)
        return np.clip(i, 0, self.width - 1), np.clip(j, 0, self.height - 1)

    def translated(self, dx: float, dy: float) -> "PixelGrid":
        return PixelGrid((self.origin[0] + dx, self.origin[1] + dy), self.width, self.height,
                         self.resolution)


@dataclass(frozen=True)
class Cell:
    id: int
    x: float
    y: float
    azimuth_deg: float = 0.0
    beamwidth_deg: float = 65.0
    tx_power_dbm: float = 46.0
    max_backoff_db: float = 30.0

    def __post_init__(self):
        if not 0.0 <= self.azimuth_deg < 360.0:
            raise ConfigurationError(f"cell {self.id}: azimuth must be in [0, 360), got {self.azimuth_deg}")
        if not self.beamwidth_deg > 0:
            raise ConfigurationError(f"cell {self.id}: beamwidth must be > 0, got {self.beamwidth_deg}")

    @property
    def site(self) -> tuple[float, float]:
        return (self.x, self.y)


def hex_layout(n_sites: int, isd: float = 500.0, *, center=(0.0, 0.0),
               azimuths: Sequence[float] = (0.0, 120.0, 240.0), **cell_kwargs) -> list[Cell]:
    """Tri-sector (by default) sites on a hexagonal lattice, innermost rings first.

    Sites are ordered by distance from ``center`` and then by bearing, so the
    first 7 sites form one full ring, the first 19 two rings and so on.  Cell
    ids are ``site * len(azimuths) + sector``.
    """
    if n_sites < 1:
        raise ConfigurationError("layout.n_sites must be >= 1")
    rings = 0
    while 3 * rings * (rings + 1) + 1 < n_sites:
        rings += 1
    pts = []
    for q in range(-rings, rings + 1):
        for r in range(max(-rings, -q - rings), min(rings, -q + rings) + 1):
            x = isd * (q + r / 2.0)
            y = isd * (r * math.sqrt(3) / 2.0)
            d = round(math.hypot(x, y), 6)
            pts.append((d, round(bearing_from_north((0.0, 0.0), (x, y)), 6), x, y))
    pts.sort()
    cells = []
    for s, (_, _, x, y) in enumerate(pts[:n_sites]):
        for k, az in enumerate(azimuths):
            cells.append(Cell(id=s * len(azimuths) + k, x=center[0] + x, y=center[1] + y,
                              azimuth_deg=float(az) % 360.0, **cell_kwargs))
    return cells


def grid_for_cells(cells: Sequence[Cell], resolution: float = 25.0, margin: float = 300.0) -> PixelGrid:
    """Smallest grid aligned on ``resolution`` covering all sites plus ``margin``."""
    xs = [c.x for c in cells]
    ys = [c.y for c in cells]
    x0 = math.floor((min(xs) - margin) / resolution) * resolution
    y0 = math.floor((min(ys) - margin) / resolution) * resolution
    w = int(math.ceil((max(xs) + margin - x0) / resolution))
    h = int(math.ceil((max(ys) + margin - y0) / resolution))
    return PixelGrid((float(x0), float(y0)), w, h, resolution)


def bearing_from_north(site, point, *, with_flag: bool = False):
    """Angle of ``point`` seen from ``site``, degrees anticlockwise from north, in [0, 360).

    Coincident points have no bearing; they map to 0 and, with ``with_flag``,
    the second return value is True.
    """
    dx = point[0] - site[0]
    dy = point[1] - site[1]
    degenerate = dx == 0 and dy == 0
    b = 0.0 if degenerate else math.degrees(math.atan2(-dx, dy)) % 360.0
    if b >= 360.0:
        b = 0.0
    return (b, degenerate) if with_flag else b


def bearings(dx, dy) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`bearing_from_north` over offsets; returns ``(angles, degenerate_mask)``."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    b = np.mod(np.degrees(np.arctan2(-dx, dy)), 360.0)
    b = np.where(b >= 360.0, 0.0, b)
    degenerate = (dx == 0) & (dy == 0)
    return np.where(degenerate, 0.0, b), degenerate


def boresight_offset(cell: Cell, bearing_deg):
    """Absolute angle between the cell boresight and a bearing (anticlockwise convention)."""
    clockwise = np.mod(360.0 - np.asarray(bearing_deg, dtype=float), 360.0)
    return np.abs(np.mod(clockwise - cell.azimuth_deg + 180.0, 360.0) - 180.0)


def antenna_attenuation(cell: Cell, bearing_deg):
    if math.isinf(cell.beamwidth_deg):
        return np.zeros_like(np.asarray(bearing_deg, dtype=float))
    off = boresight_offset(cell, bearing_deg)
    return np.minimum(12.0 * (off / cell.beamwidth_deg) ** 2, cell.max_backoff_db)


def path_loss(distance_m, cell: Cell, bearing_deg):
    """Macro path loss plus horizontal sector pattern, in dB.

    ``128.1 + 37.6 log10(d / 1 km)`` with ``d`` clamped to 10 m, plus the
    parabolic pattern ``min(12 (offset / beamwidth)^2, max_backoff)``.  An
    infinite beamwidth gives an omnidirectional cell.  Works elementwise on
    arrays.
    """
    d = np.maximum(np.asarray(distance_m, dtype=float), D_MIN_M)
    loss = PL_INTERCEPT_DB + PL_SLOPE_DB * np.log10(d / 1000.0) + antenna_attenuation(cell, bearing_deg)
    return loss if loss.ndim else float(loss)


@dataclass(frozen=True, eq=False)
class RadioMap:
    """Per-pixel RSRP for every cell and the derived fingerprint fields.

    Arrays are indexed ``[i, j]`` (and ``[i, j, k]`` for the cell axis, where
    ``k`` is the position of the cell in ``cell_ids``, sorted ascending).
    ``best``/``second_best`` hold cell ids; ``best_index``/``second_index``
    hold cell-axis positions.
    """

    grid: PixelGrid
    cells: tuple[Cell, ...]
    rsrp: np.ndarray
    best_index: np.ndarray
    second_index: np.ndarray
    dist: np.ndarray
    bearing: np.ndarray

    @property
    def cell_ids(self) -> np.ndarray:
        return np.array([c.id for c in self.cells], dtype=np.int64)

    @property
    def best(self) -> np.ndarray:
        return self.cell_ids[self.best_index]

    @property
    def second_best(self) -> np.ndarray:
        return self.cell_ids[self.second_index]

    @property
    def rsrp_best(self) -> np.ndarray:
        return np.take_along_axis(self.rsrp, self.best_index[..., None], axis=2)[..., 0]

    def cell_position(self, cell_id: int) -> int:
        try:
            return self._positions[cell_id]
        except KeyError:
            raise KeyError(f"unknown cell id {cell_id}") from None

    @cached_property
    def _positions(self) -> dict[int, int]:
        return {c.id: k for k, c in enumerate(self.cells)}


def _rank_servers(rsrp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # argmax returns the first maximum, i.e. the lowest cell id, on ties
    best = np.argmax(rsrp, axis=-1)
    masked = rsrp.copy()
    np.put_along_axis(masked, best[..., None], -np.inf, axis=-1)
    second = np.argmax(masked, axis=-1)
    return best, second


def build_radio_map(grid: PixelGrid, cells: Sequence[Cell], shadowing: dict | None = None) -> RadioMap:
    """Compute RSRP for every (pixel, cell) and the best/second-best server fields.

    ``shadowing`` is ``{"sigma_db": float, "seed": int}``; independent
    log-normal draws per (pixel, cell).  Omitted or ``sigma_db == 0`` means
    no shadowing.
    """
    if len(cells) < 2:
        raise ConfigurationError(f"need at least 2 cells to define a second-best server, got {len(cells)}")
    cells = tuple(sorted(cells, key=lambda c: c.id))
    ids = [c.id for c in cells]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("cell ids must be unique")

    X, Y = grid.centers()
    rsrp = np.empty(grid.shape + (len(cells),))
    site_bearing = np.empty_like(rsrp)
    site_dist = np.empty_like(rsrp)
    for k, c in enumerate(cells):
        dx, dy = X - c.x, Y - c.y
        d = np.hypot(dx, dy)
        b, _ = bearings(dx, dy)
        site_dist[..., k] = d
        site_bearing[..., k] = b
        rsrp[..., k] = c.tx_power_dbm - path_loss(d, c, b)

    sigma = (shadowing or {}).get("sigma_db", 0.0)
    if sigma:
        rng = np.random.default_rng((shadowing or {}).get("seed", 0))
        rsrp -= rng.normal(0.0, sigma, size=rsrp.shape)

    best, second = _rank_servers(rsrp)
    dist = np.take_along_axis(site_dist, best[..., None], axis=2)[..., 0]
    bearing = np.take_along_axis(site_bearing, best[..., None], axis=2)[..., 0]
    return RadioMap(grid, cells, rsrp, best, second, dist, bearing)


RADIO_HEADER = ["i", "j", "x", "y", "best_cell", "second_best_cell", "dist_m", "bearing_deg", "rsrp_best_dbm"]


@dataclass(frozen=True, eq=False)
class RadioTable:
    """Parsed radio-map CSV: the per-pixel summary fields only."""

    grid: PixelGrid
    best: np.ndarray
    second_best: np.ndarray
    dist: np.ndarray
    bearing: np.ndarray
    rsrp_best: np.ndarray


def write_radio_csv(radio: RadioMap, path) -> None:
    X, Y = radio.grid.centers()
    best, second, rb = radio.best, radio.second_best, radio.rsrp_best
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RADIO_HEADER)
        for i in range(radio.grid.width):
            for j in range(radio.grid.height):
                w.writerow([i, j, repr(float(X[i, j])), repr(float(Y[i, j])), int(best[i, j]),
                            int(second[i, j]), repr(float(radio.dist[i, j])),
                            repr(float(radio.bearing[i, j])), repr(float(rb[i, j]))])


def read_radio_csv(path) -> RadioTable:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"radio map file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RADIO_HEADER:
            raise ConfigurationError(f"{path}: bad radio-map header {header}")
        rows = [r for r in reader]
    if not rows:
        raise ConfigurationError(f"{path}: radio map has no pixels")
    a = np.array(rows, dtype=object)
    i = a[:, 0].astype(np.int64)
    j = a[:, 1].astype(np.int64)
    W, H = int(i.max()) + 1, int(j.max()) + 1
    if len(rows) != W * H:
        raise ConfigurationError(f"{path}: expected {W * H} pixel rows, found {len(rows)}")
    x = a[:, 2].astype(float)
    y = a[:, 3].astype(float)
    if W > 1:
        res = float(x[H] - x[0])
    else:
        res = float(y[1] - y[0]) if H > 1 else 1.0
    grid = PixelGrid((float(x[0] - res / 2), float(y[0] - res / 2)), W, H, res)

    def field(col, dtype):
        out = np.empty((W, H), dtype=dtype)
        out[i, j] = a[:, col].astype(dtype)
        return out

    return RadioTable(grid, field(4, np.int64), field(5, np.int64), field(6, float), field(7, float),
                      field(8, float))


def check_radio_consistent(radio: RadioMap, table: RadioTable) -> None:
    """Raise :class:`ConfigurationError` if a radio CSV does not describe ``radio``."""
    g, t = radio.grid, table.grid
    if g.shape != t.shape or not np.allclose(g.origin, t.origin) or not math.isclose(g.resolution, t.resolution):
        raise ConfigurationError(f"radio file grid {t} does not match scenario grid {g}")
    unknown = set(np.unique(table.best).tolist()) - set(radio.cell_ids.tolist())
    if unknown:
        raise ConfigurationError(f"radio file references unknown cell id(s) {sorted(unknown)}")
    if not (np.array_equal(table.best, radio.best) and np.array_equal(table.second_best, radio.second_best)):
        raise ConfigurationError("radio file best/second-best servers differ from the scenario "
                                 "(different seed or layout?)")
