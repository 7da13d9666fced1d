"""Seeded LTE-like system-level simulator.

Time advances in fixed ticks (1 s by default).  Each tick new download
sessions arrive as a Poisson draw placed on the intensity map, sessions are
checked for handover, every cell splits its bandwidth equally among the
sessions attached to it (round robin), and mobile sessions move in straight
lines with reflection at the grid border.  Per-tick observations are logged
and folded into one :class:`~hotspotloc.kpi.KpiRecord` per cell per period.

Everything random comes from one ``numpy.random.Generator`` seeded from the
scenario, drawn in a fixed order, so a run is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from hotspotloc.kpi import AOA_BIN_WIDTH_DEG, TA_BIN_WIDTH_M, KpiRecord, check_aoa_bin_width
from hotspotloc.radio import Cell, ConfigurationError, PixelGrid, RadioMap, bearings

SE_MAX = 6.0
THERMAL_NOISE_DBM_HZ = -174.0
KMH = 1000.0 / 3600.0


@dataclass
class Scenario:
    grid: PixelGrid
    cells: Sequence[Cell]
    intensity: np.ndarray
    arrival_rate: float
    bandwidth_hz: float = 20e6
    file_size_bits: int = 1_000_000
    mobile_fraction: float = 0.3
    speed_mps: float = 8.33 * KMH
    period_s: float = 900.0
    n_periods: int = 4
    seed: int = 0
    tick_s: float = 1.0
    hysteresis_db: float = 3.0
    max_attached: Optional[int] = None
    noise_figure_db: float = 9.0
    se_max: float = SE_MAX
    ta_bin_width: float = TA_BIN_WIDTH_M
    aoa_bin_width: float = AOA_BIN_WIDTH_DEG
    neighbor_top_n: Optional[int] = None

    def __post_init__(self):
        self.intensity = np.asarray(self.intensity, dtype=float)
        if self.intensity.shape != self.grid.shape:
            raise ConfigurationError(f"intensity shape {self.intensity.shape} != grid shape {self.grid.shape}")
        if np.any(~np.isfinite(self.intensity)) or np.any(self.intensity < 0):
            raise ConfigurationError("traffic intensity must be finite and >= 0")
        if not self.intensity.sum() > 0:
            raise ConfigurationError("traffic intensity must have positive total")
        checks = [
            ("traffic.arrival_rate", self.arrival_rate >= 0),
            ("traffic.bandwidth_hz", self.bandwidth_hz > 0),
            ("traffic.file_size_bits", self.file_size_bits > 0),
            ("traffic.mobile_fraction", 0.0 <= self.mobile_fraction <= 1.0),
            ("traffic.speed_mps", self.speed_mps >= 0),
            ("traffic.period_s", self.period_s > 0),
            ("traffic.n_periods", self.n_periods >= 1),
            ("traffic.tick_s", self.tick_s > 0),
            ("traffic.hysteresis_db", self.hysteresis_db >= 0),
            ("traffic.max_attached", self.max_attached is None or self.max_attached >= 1),
            ("kpi.ta_bin_width_m", self.ta_bin_width > 0),
            ("kpi.neighbor_top_n", self.neighbor_top_n is None or self.neighbor_top_n >= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigurationError(f"{name}: value out of range")
        ticks = self.period_s / self.tick_s
        if abs(ticks - round(ticks)) > 1e-9:
            raise ConfigurationError("traffic.period_s must be a whole number of ticks")
        try:
            check_aoa_bin_width(self.aoa_bin_width)
        except ValueError as exc:
            raise ConfigurationError(f"kpi.aoa_bin_width_deg: {exc}") from None

    @property
    def ticks_per_period(self) -> int:
        return int(round(self.period_s / self.tick_s))


@dataclass
class GroundTruth:
    """Per-pixel sessions generated (``access``) and bits served (``elapsed``)."""

    grid: PixelGrid
    access: np.ndarray
    elapsed: np.ndarray
    n_blocked: int = 0

    @property
    def n_sessions(self) -> int:
        return int(self.access.sum())


@dataclass
class Session:
    id: int
    birth: tuple[int, int]
    x: float
    y: float
    remaining: int
    serving: int
    mobile: bool = False
    heading: float = 0.0


@dataclass
class CellEvents:
    """Everything one cell observed during one period, one entry per (session, tick) sample."""

    session_ids: np.ndarray
    distances: np.ndarray
    bearings: np.ndarray
    neighbors: np.ndarray
    rates: np.ndarray
    busy_ticks: int = 0
    n_ticks: int = 1


def noise_dbm(bandwidth_hz: float, noise_figure_db: float = 9.0) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def sinr_map(radio: RadioMap, bandwidth_hz: float, noise_figure_db: float = 9.0) -> np.ndarray:
    """Downlink SINR (dB) for every (pixel, serving cell) with all other cells at full power."""
    mw = 10.0 ** (radio.rsrp / 10.0)
    n_mw = 10.0 ** (noise_dbm(bandwidth_hz, noise_figure_db) / 10.0)
    interference = np.maximum(mw.sum(axis=-1, keepdims=True) - mw, 0.0) + n_mw
    return 10.0 * np.log10(mw / interference)


def per_tick_throughput(n_attached, bandwidth_hz, sinr_db, se_max: float = SE_MAX):
    """Round-robin rate of one session: an equal bandwidth share times capped Shannon efficiency."""
    n = np.asarray(n_attached)
    if np.any(n < 1):
        raise ValueError("n_attached must be >= 1")
    se = np.minimum(np.log2(1.0 + 10.0 ** (np.asarray(sinr_db, dtype=float) / 10.0)), se_max)
    rate = (bandwidth_hz / n) * se
    return rate if np.ndim(rate) else float(rate)


def handover_check(session: Session, radio: RadioMap, hysteresis_db: float = 3.0) -> int:
    """Cell id that should serve ``session`` after this tick's handover evaluation.

    The session moves to the strongest cell at its position only if that
    cell beats the current server by strictly more than the hysteresis.
    """
    i, j = radio.grid.index_of(session.x, session.y)
    row = radio.rsrp[int(i), int(j)]
    cand = int(radio.best_index[int(i), int(j)])
    cur = radio.cell_position(session.serving)
    if row[cand] > row[cur] + hysteresis_db:
        return int(radio.cells[cand].id)
    return session.serving


def aggregate_kpis(events: CellEvents, cell_id: int, period: int, *, n_ta_bins: int,
                   ta_bin_width: float = TA_BIN_WIDTH_M, aoa_bin_width: float = AOA_BIN_WIDTH_DEG,
                   neighbor_top_n: int | None = None) -> KpiRecord:
    """Fold one period of a cell's per-tick samples into a KPI record.

    ``events.neighbors`` holds the reported best handover candidate of each
    sample (a cell id, or -1 for none).  Throughput means are over sessions,
    each session contributing its average scheduled rate; sessions that were
    never given a positive rate are left out of both means.
    """
    n_aoa = check_aoa_bin_width(aoa_bin_width)
    load = events.busy_ticks / events.n_ticks
    per_session = {}
    if len(events.session_ids):
        ids, inv = np.unique(events.session_ids, return_inverse=True)
        sums = np.bincount(inv, weights=events.rates)
        counts = np.bincount(inv)
        means = sums / counts
        per_session = {int(s): float(m) for s, m in zip(ids, means) if m > 0}
    if not per_session:
        return KpiRecord(cell_id, period, (0.0,) * n_ta_bins, (0.0,) * n_aoa, {}, load,
                         None, None, 0, ta_bin_width, aoa_bin_width)

    n = len(events.distances)
    ta_idx = np.minimum(np.floor(events.distances / ta_bin_width).astype(np.int64), n_ta_bins - 1)
    ta = np.bincount(ta_idx, minlength=n_ta_bins) / n
    aoa_idx = np.minimum(np.floor(events.bearings / aoa_bin_width).astype(np.int64), n_aoa - 1)
    aoa = np.bincount(aoa_idx, minlength=n_aoa) / n

    keys, cnt = np.unique(events.neighbors, return_counts=True)
    nb = {(None if k < 0 else int(k)): int(c) for k, c in zip(keys, cnt)}
    if neighbor_top_n is not None:
        ranked = sorted((k for k in nb if k is not None), key=lambda k: (-nb[k], k))
        for k in ranked[neighbor_top_n:]:
            nb[None] = nb.get(None, 0) + nb.pop(k)
    neighbor_dist = {k: c / n for k, c in nb.items()}

    rates = np.array([per_session[s] for s in sorted(per_session)])
    if rates.max() == rates.min():
        amt = hmt = float(rates[0])
    else:
        amt = float(np.mean(rates))
        hmt = min(float(len(rates) / np.sum(1.0 / rates)), amt)
    return KpiRecord(cell_id, period, tuple(ta.tolist()), tuple(aoa.tolist()), neighbor_dist,
                     load, amt, hmt, len(rates), ta_bin_width, aoa_bin_width)


def max_site_distance(grid: PixelGrid, cells: Sequence[Cell]) -> float:
    x0, x1, y0, y1 = grid.extent
    return max(math.hypot(max(abs(c.x - x0), abs(c.x - x1)), max(abs(c.y - y0), abs(c.y - y1)))
               for c in cells)


class _Log:
    """Append-only columnar buffer of per-tick samples."""

    names = ("period", "cell", "session", "dist", "bearing", "neighbor", "rate")

    def __init__(self):
        self.chunks = {k: [] for k in self.names}

    def add(self, **cols):
        for k in self.names:
            self.chunks[k].append(cols[k])

    def arrays(self):
        out = {}
        for k in self.names:
            out[k] = np.concatenate(self.chunks[k]) if self.chunks[k] else np.empty(0)
        return out


def run_simulation(scenario: Scenario, radio: RadioMap) -> tuple[GroundTruth, list[KpiRecord]]:
    """Simulate ``n_periods`` reporting periods; return ground truth and the KPI stream."""
    grid = scenario.grid
    if radio.grid != grid:
        raise ConfigurationError(f"radio map grid {radio.grid} does not match scenario grid {grid}")
    if sorted(c.id for c in radio.cells) != sorted(c.id for c in scenario.cells):
        raise ConfigurationError("radio map cells do not match scenario cells")

    rng = np.random.default_rng(scenario.seed)
    W, H = grid.shape
    n_cells = len(radio.cells)
    cell_ids = radio.cell_ids
    site_x = np.array([c.x for c in radio.cells])
    site_y = np.array([c.y for c in radio.cells])

    flat_rsrp = radio.rsrp.reshape(-1, n_cells)
    flat_best = radio.best_index.reshape(-1)
    flat_second = radio.second_index.reshape(-1)
    flat_sinr = sinr_map(radio, scenario.bandwidth_hz, scenario.noise_figure_db).reshape(-1, n_cells)
    cdf = np.cumsum(scenario.intensity.reshape(-1))
    cdf_total = cdf[-1]
    x_lo, x_hi, y_lo, y_hi = grid.extent

    access = np.zeros(grid.n_pixels, dtype=np.int64)
    elapsed = np.zeros(grid.n_pixels, dtype=np.int64)
    busy = np.zeros((scenario.n_periods, n_cells), dtype=np.int64)
    log = _Log()

    sid = np.empty(0, dtype=np.int64)
    px = np.empty(0)
    py = np.empty(0)
    vx = np.empty(0)
    vy = np.empty(0)
    remaining = np.empty(0, dtype=np.int64)
    serving = np.empty(0, dtype=np.int64)
    next_id = 0
    n_blocked = 0
    tpp = scenario.ticks_per_period
    dt = scenario.tick_s

    for t in range(scenario.n_periods * tpp):
        period = t // tpp

        n_new = int(rng.poisson(scenario.arrival_rate * dt))
        if n_new:
            pix = np.searchsorted(cdf, rng.random(n_new) * cdf_total, side="right")
            pix = np.minimum(pix, grid.n_pixels - 1)
            ii, jj = np.divmod(pix, H)
            nx = grid.origin[0] + (ii + rng.random(n_new)) * grid.resolution
            ny = grid.origin[1] + (jj + rng.random(n_new)) * grid.resolution
            mobile = rng.random(n_new) < scenario.mobile_fraction
            heading = rng.random(n_new) * (2.0 * np.pi)
            speed = np.where(mobile, scenario.speed_mps, 0.0)
            np.add.at(access, pix, 1)
            attach = flat_best[pix]
            admitted = np.ones(n_new, dtype=bool)
            if scenario.max_attached is not None:
                load_now = np.bincount(serving, minlength=n_cells)
                for k in range(n_new):
                    if load_now[attach[k]] >= scenario.max_attached:
                        admitted[k] = False
                    else:
                        load_now[attach[k]] += 1
                n_blocked += int((~admitted).sum())
            ids = np.arange(next_id, next_id + n_new, dtype=np.int64)
            next_id += n_new
            sid = np.concatenate([sid, ids[admitted]])
            px = np.concatenate([px, nx[admitted]])
            py = np.concatenate([py, ny[admitted]])
            # heading is anticlockwise from north like every bearing here
            vx = np.concatenate([vx, (-np.sin(heading) * speed)[admitted]])
            vy = np.concatenate([vy, (np.cos(heading) * speed)[admitted]])
            remaining = np.concatenate([remaining, np.full(int(admitted.sum()), scenario.file_size_bits,
                                                           dtype=np.int64)])
            serving = np.concatenate([serving, attach[admitted]])

        if len(sid) == 0:
            continue

        ci, cj = grid.index_of(px, py)
        pix = ci * H + cj
        cand = flat_best[pix]
        switch = flat_rsrp[pix, cand] > flat_rsrp[pix, serving] + scenario.hysteresis_db
        serving = np.where(switch, cand, serving)

        attached = np.bincount(serving, minlength=n_cells)
        busy[period] += attached > 0
        rate = per_tick_throughput(attached[serving], scenario.bandwidth_hz, flat_sinr[pix, serving],
                                   scenario.se_max)
        dx = px - site_x[serving]
        dy = py - site_y[serving]
        brg, _ = bearings(dx, dy)
        nb = np.where(flat_best[pix] == serving, flat_second[pix], flat_best[pix])
        log.add(period=np.full(len(sid), period), cell=serving, session=sid, dist=np.hypot(dx, dy),
                bearing=brg, neighbor=nb, rate=rate)

        served = np.minimum(remaining, np.floor(rate * dt).astype(np.int64))
        np.add.at(elapsed, pix, served)
        remaining = remaining - served

        keep = remaining > 0
        sid, px, py, vx, vy, remaining, serving = (a[keep] for a in (sid, px, py, vx, vy, remaining, serving))

        px = px + vx * dt
        py = py + vy * dt
        # reflect at borders
        low, high = px < x_lo, px > x_hi
        px = np.where(low, 2 * x_lo - px, np.where(high, 2 * x_hi - px, px))
        vx = np.where(low | high, -vx, vx)
        low, high = py < y_lo, py > y_hi
        py = np.where(low, 2 * y_lo - py, np.where(high, 2 * y_hi - py, py))
        vy = np.where(low | high, -vy, vy)

    truth = GroundTruth(grid, access.reshape(grid.shape), elapsed.reshape(grid.shape), n_blocked)
    n_ta_bins = int(math.floor(max_site_distance(grid, radio.cells) / scenario.ta_bin_width)) + 1
    records = _aggregate_all(log.arrays(), busy, scenario, cell_ids, n_ta_bins)
    return truth, records


def _aggregate_all(cols, busy, scenario: Scenario, cell_ids, n_ta_bins) -> list[KpiRecord]:
    order = np.lexsort((cols["cell"], cols["period"])) if len(cols["cell"]) else np.empty(0, dtype=np.int64)
    period = cols["period"][order].astype(np.int64)
    cell = cols["cell"][order].astype(np.int64)
    key = period * len(cell_ids) + cell
    bounds = {}
    if len(key):
        uniq, starts = np.unique(key, return_index=True)
        ends = np.append(starts[1:], len(key))
        bounds = {int(u): (int(s), int(e)) for u, s, e in zip(uniq, starts, ends)}
    neighbors = cell_ids[cols["neighbor"][order].astype(np.int64)] if len(order) else np.empty(0, dtype=np.int64)

    records = []
    for p in range(scenario.n_periods):
        for k, cid in enumerate(cell_ids):
            s, e = bounds.get(p * len(cell_ids) + k, (0, 0))
            sl = order[s:e]
            ev = CellEvents(
                session_ids=cols["session"][sl].astype(np.int64),
                distances=cols["dist"][sl],
                bearings=cols["bearing"][sl],
                neighbors=neighbors[s:e],
                rates=cols["rate"][sl],
                busy_ticks=int(busy[p, k]),
                n_ticks=scenario.ticks_per_period,
            )
            records.append(aggregate_kpis(ev, int(cid), p, n_ta_bins=n_ta_bins,
                                          ta_bin_width=scenario.ta_bin_width,
                                          aoa_bin_width=scenario.aoa_bin_width,
                                          neighbor_top_n=scenario.neighbor_top_n))
    return records


# -- intensity maps ---------------------------------------------------------

def point_intensity(grid: PixelGrid, i: int, j: int) -> np.ndarray:
    out = np.zeros(grid.shape)
    out[i, j] = 1.0
    return out


def hotspot_intensity(grid: PixelGrid, hotspots: Sequence[tuple[float, float, float, float]],
                      background: float = 1.0) -> np.ndarray:
    """Uniform ``background`` plus Gaussian bumps ``(x, y, sigma_m, peak)``."""
    X, Y = grid.centers()
    out = np.full(grid.shape, float(background))
    for x, y, sigma, peak in hotspots:
        out += peak * np.exp(-((X - x) ** 2 + (Y - y) ** 2) / (2.0 * sigma ** 2))
    return out


def random_hotspots(grid: PixelGrid, cells: Sequence[Cell], n: int, rng: np.random.Generator,
                    sigma_m: float = 50.0, peak: float = 20.0, max_site_distance: float | None = None):
    """``n`` hotspot centers drawn uniformly within ``max_site_distance`` of some site."""
    sites = np.unique(np.array([[c.x, c.y] for c in cells]), axis=0)
    if max_site_distance is None:
        max_site_distance = _nearest_site_spacing(sites) * 0.6
    x0, x1, y0, y1 = grid.extent
    out = []
    while len(out) < n:
        x, y = rng.uniform(x0, x1), rng.uniform(y0, y1)
        if np.min(np.hypot(sites[:, 0] - x, sites[:, 1] - y)) <= max_site_distance:
            out.append((float(x), float(y), float(sigma_m), float(peak)))
    return out


def _nearest_site_spacing(sites: np.ndarray) -> float:
    if len(sites) < 2:
        return 500.0
    d = np.hypot(sites[:, None, 0] - sites[None, :, 0], sites[:, None, 1] - sites[None, :, 1])
    d[d == 0] = np.inf
    return float(d.min())


# -- ground-truth CSV -------------------------------------------------------

TRUTH_HEADER = ["i", "j", "access_count", "elapsed_bits"]


def write_truth_csv(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for i in range(truth.grid.width):
            for j in range(truth.grid.height):
                w.writerow([i, j, int(truth.access[i, j]), int(truth.elapsed[i, j])])


def read_truth_csv(path, grid: PixelGrid) -> GroundTruth:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"truth file not found: {path}")
    access = np.zeros(grid.shape, dtype=np.int64)
    elapsed = np.zeros(grid.shape, dtype=np.int64)
    seen = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != TRUTH_HEADER:
            raise ConfigurationError(f"{path}: bad truth header")
        for n, row in enumerate(reader, start=1):
            try:
                i, j, a, e = (int(v) for v in row)
            except ValueError:
                raise ConfigurationError(f"{path}: row {n} is malformed") from None
            if not (0 <= i < grid.width and 0 <= j < grid.height):
                raise ConfigurationError(f"{path}: row {n} pixel ({i}, {j}) outside the grid {grid.shape}")
            if a < 0 or e < 0:
                raise ConfigurationError(f"{path}: row {n} has negative counts")
            access[i, j] = a
            elapsed[i, j] = e
            seen += 1
    if seen != grid.n_pixels:
        raise ConfigurationError(f"{path}: {seen} pixel rows, grid has {grid.n_pixels}")
    return GroundTruth(grid, access, elapsed)
