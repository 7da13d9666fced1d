"""Traffic localization from per-cell KPIs.

Five per-KPI weight maps are built on the radio-map grid:

1. timing advance -- each cell's TA histogram spread over its distance rings
2. angle of arrival -- AoA histogram spread over the bearing wedges
3. neighbor report -- neighbor shares spread over (best, second-best) regions
4. load time -- average load of the cells that could serve the pixel and load alike
5. throughput gap -- normalized AMT - HMT gap placed on the cell center or edge

They are fused into one map and smoothed with an exponential distance-decay
kernel.  The default fusion is proportional: load and throughput form a
multiplicative prior, and the prior is then fitted, in turn, to the mass each
of the TA, AoA and neighbor maps puts on its own regions.  A plain weighted
sum of the normalized maps is available as ``rule="linear"``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from hotspotloc.kpi import KpiRecord, check_aoa_bin_width
from hotspotloc.radio import ConfigurationError, PixelGrid, RadioMap

KPI_NAMES = ("ta", "aoa", "neighbor", "load", "throughput")
DEFAULT_ALPHA = (0.3, 0.3, 0.2, 0.1, 0.1)
KERNEL_CUTOFF = 4.0
FUSION_RULES = ("proportional", "linear")
PRIOR_KPIS = (3, 4)


@dataclass
class WeightMap:
    grid: PixelGrid
    w: np.ndarray

    @property
    def total(self) -> float:
        return float(self.w.sum())

    def normalized(self) -> "WeightMap":
        """Copy scaled to unit mass; a map with no mass stays all-zero."""
        t = self.total
        return WeightMap(self.grid, self.w / t if t > 0 else np.zeros_like(self.w, dtype=float))


@dataclass
class FusionConfig:
    alpha: tuple[float, ...] = DEFAULT_ALPHA
    smoothing_m: float = 25.0
    load_tolerance: float = 0.15
    candidate_margin_db: float = 6.0
    throughput_threshold: float = 0.5
    norm_constant_bps: float | None = None
    edge_fraction: float = 0.6
    edge_rule: str = "literal"
    radius_percentile: float = 95.0
    correlation_gate: bool = False
    correlation_threshold: float = 0.7
    ta_rebucket: int = 1
    rule: str = "proportional"
    prior_floor: float = 0.5
    n_iterations: int = 30

    def __post_init__(self):
        self.alpha = tuple(float(a) for a in self.alpha)
        problems = []
        if len(self.alpha) != 5:
            problems.append(("fusion.alpha", "needs exactly 5 coefficients"))
        elif any(not math.isfinite(a) or a < 0 for a in self.alpha):
            problems.append(("fusion.alpha", "coefficients must be >= 0"))
        elif not any(self.alpha):
            problems.append(("fusion.alpha", "at least one coefficient must be positive"))
        if not self.smoothing_m >= 0:
            problems.append(("fusion.smoothing_m", "must be >= 0"))
        if not 0 <= self.load_tolerance <= 1:
            problems.append(("fusion.load_tolerance", "must be in [0, 1]"))
        if not self.candidate_margin_db >= 0:
            problems.append(("fusion.candidate_margin_db", "must be >= 0"))
        if self.norm_constant_bps is not None and not self.norm_constant_bps > 0:
            problems.append(("fusion.norm_constant_bps", "must be > 0"))
        if not 0 < self.edge_fraction < 1:
            problems.append(("fusion.edge_fraction", "must be in (0, 1)"))
        if self.edge_rule not in ("literal", "complement"):
            problems.append(("fusion.edge_rule", "must be 'literal' or 'complement'"))
        if not 0 < self.radius_percentile <= 100:
            problems.append(("fusion.radius_percentile", "must be in (0, 100]"))
        if not -1 <= self.correlation_threshold <= 1:
            problems.append(("fusion.correlation_threshold", "must be in [-1, 1]"))
        if int(self.ta_rebucket) != self.ta_rebucket or self.ta_rebucket < 1:
            problems.append(("fusion.ta_rebucket", "must be a positive integer"))
        if self.rule not in FUSION_RULES:
            problems.append(("fusion.rule", f"must be one of {', '.join(FUSION_RULES)}"))
        if not (math.isfinite(self.prior_floor) and self.prior_floor > 0):
            problems.append(("fusion.prior_floor", "must be > 0"))
        if int(self.n_iterations) != self.n_iterations or self.n_iterations < 1:
            problems.append(("fusion.n_iterations", "must be a positive integer"))
        if problems:
            key, msg = problems[0]
            raise ConfigurationError(f"{key}: {msg}")

    def with_alpha(self, alpha) -> "FusionConfig":
        return FusionConfig(**{**self.__dict__, "alpha": tuple(alpha)})


@dataclass
class CellSummary:
    """KPIs of one cell pooled over all reporting periods."""

    n_sessions: int
    ta_mass: np.ndarray
    ta_bin_width: float
    aoa_mass: np.ndarray
    aoa_bin_width: float
    neighbor_mass: dict
    load: float
    load_series: np.ndarray
    amt: float | None
    hmt: float | None


def pool_kpis(kpis: Sequence[KpiRecord], radio: RadioMap) -> dict[int, CellSummary]:
    """Pool records per cell; input order never affects the result.

    Histograms are weighted by each period's session count, so the pooled
    masses are session counts per bin.  AMT and HMT are pooled exactly as the
    arithmetic and harmonic means over all the periods' sessions.
    """
    known = set(radio.cell_ids.tolist())
    by_cell: dict[int, list[KpiRecord]] = {}
    for rec in kpis:
        if rec.cell_id not in known:
            raise ConfigurationError(f"KPI record references unknown cell id {rec.cell_id}")
        for k in rec.neighbor_dist:
            if k is not None and k not in known:
                raise ConfigurationError(f"KPI record of cell {rec.cell_id} references unknown "
                                         f"neighbor cell id {k}")
        by_cell.setdefault(rec.cell_id, []).append(rec)

    out = {}
    for cid in sorted(by_cell):
        recs = sorted(by_cell[cid], key=lambda r: r.period)
        ta_w = {r.ta_bin_width for r in recs}
        aoa_w = {r.aoa_bin_width for r in recs}
        if len(ta_w) > 1 or len(aoa_w) > 1:
            raise ConfigurationError(f"cell {cid}: bin widths differ between periods")
        n_ta = max(len(r.ta_hist) for r in recs)
        ta = np.zeros(n_ta)
        aoa = np.zeros(len(recs[0].aoa_hist))
        nb: dict = {}
        n_total = 0
        am_num = 0.0
        hm_den = 0.0
        for r in recs:
            if r.empty:
                continue
            n_total += r.n_sessions
            ta[: len(r.ta_hist)] += r.n_sessions * np.asarray(r.ta_hist)
            aoa += r.n_sessions * np.asarray(r.aoa_hist)
            for k in sorted(r.neighbor_dist, key=lambda k: (k is None, k or 0)):
                nb[k] = nb.get(k, 0.0) + r.n_sessions * r.neighbor_dist[k]
            am_num += r.n_sessions * r.amt
            hm_den += r.n_sessions / r.hmt
        series = np.array([r.load_time for r in recs])
        amt = hmt = None
        full = [r for r in recs if not r.empty]
        if len(full) == 1:
            amt, hmt = full[0].amt, full[0].hmt
        elif n_total:
            amt = am_num / n_total
            hmt = min(n_total / hm_den, amt)
        out[cid] = CellSummary(n_total, ta, ta_w.pop(), aoa, aoa_w.pop(), nb, float(series.mean()),
                               series, amt, hmt)
    return out


def _spread(radio: RadioMap, bin_of_pixel: np.ndarray, mass: np.ndarray, diagnostics: dict | None,
            label: str) -> np.ndarray:
    """Spread ``mass[cell, bin]`` uniformly over the pixels of each (best cell, bin) pair."""
    n_cells, n_bins = mass.shape
    best = radio.best_index
    inside = (bin_of_pixel >= 0) & (bin_of_pixel < n_bins)
    key = best * n_bins + np.where(inside, bin_of_pixel, 0)
    counts = np.bincount(key[inside], minlength=n_cells * n_bins).reshape(n_cells, n_bins)
    safe = np.where(counts > 0, counts, 1)
    per_pixel = mass / safe
    w = np.where(inside, per_pixel.reshape(-1)[key], 0.0)
    if diagnostics is not None:
        diagnostics[f"{label}_pixels_out_of_range"] = int((~inside).sum())
        diagnostics[f"{label}_mass_unplaced"] = float(mass[counts == 0].sum())
    return w


def _cell_table(summaries: dict[int, CellSummary], radio: RadioMap, attr: str, width: int) -> np.ndarray:
    table = np.zeros((len(radio.cells), width))
    for cid, s in summaries.items():
        v = getattr(s, attr)
        table[radio.cell_position(cid), : min(width, len(v))] = v[:width]
    return table


def _summaries(kpis, radio):
    return kpis if isinstance(kpis, dict) else pool_kpis(kpis, radio)


def weight_ta(kpis, radio: RadioMap, config: FusionConfig | None = None,
              diagnostics: dict | None = None) -> WeightMap:
    """Step 1: each pixel gets its cell's TA-bin share divided by the pixel count of that ring."""
    config = config or FusionConfig()
    summaries = _summaries(kpis, radio)
    if not summaries:
        return WeightMap(radio.grid, np.zeros(radio.grid.shape))
    widths = {s.ta_bin_width for s in summaries.values()}
    if len(widths) > 1:
        raise ConfigurationError("TA bin width differs between cells")
    m = int(config.ta_rebucket)
    width = widths.pop() * m
    n_bins = max(len(s.ta_mass) for s in summaries.values())
    mass = _cell_table(summaries, radio, "ta_mass", n_bins)
    if m > 1:
        n_coarse = -(-n_bins // m)
        padded = np.zeros((mass.shape[0], n_coarse * m))
        padded[:, :n_bins] = mass
        mass = padded.reshape(mass.shape[0], n_coarse, m).sum(axis=2)
    bins = np.floor(radio.dist / width).astype(np.int64)
    return WeightMap(radio.grid, _spread(radio, bins, mass, diagnostics, "ta"))


def weight_aoa(kpis, radio: RadioMap, config: FusionConfig | None = None,
               diagnostics: dict | None = None) -> WeightMap:
    """Step 2: like step 1 with angular bins on the bearing from the best server."""
    summaries = _summaries(kpis, radio)
    if not summaries:
        return WeightMap(radio.grid, np.zeros(radio.grid.shape))
    widths = {s.aoa_bin_width for s in summaries.values()}
    if len(widths) > 1:
        raise ConfigurationError("AoA bin width differs between cells")
    width = widths.pop()
    n_bins = check_aoa_bin_width(width)
    mass = _cell_table(summaries, radio, "aoa_mass", n_bins)
    bins = np.minimum(np.floor(radio.bearing / width).astype(np.int64), n_bins - 1)
    return WeightMap(radio.grid, _spread(radio, bins, mass, diagnostics, "aoa"))


def weight_neighbor(kpis, radio: RadioMap, config: FusionConfig | None = None,
                    diagnostics: dict | None = None) -> WeightMap:
    """Step 3: a cell's share of reports naming neighbor n, spread over its pixels whose second-best is n."""
    summaries = _summaries(kpis, radio)
    n_cells = len(radio.cells)
    mass = np.zeros((n_cells, n_cells))
    for cid, s in summaries.items():
        k = radio.cell_position(cid)
        for nid, v in s.neighbor_mass.items():
            if nid is not None:
                mass[k, radio.cell_position(nid)] = v
    return WeightMap(radio.grid, _spread(radio, radio.second_index, mass, diagnostics, "neighbor"))


def _load_correlation(summaries: dict[int, CellSummary], radio: RadioMap) -> np.ndarray:
    n = len(radio.cells)
    series = {radio.cell_position(c): s.load_series for c, s in summaries.items()}
    corr = np.full((n, n), -np.inf)
    for a, sa in series.items():
        for b, sb in series.items():
            if len(sa) != len(sb) or len(sa) < 2:
                continue
            if np.std(sa) == 0 or np.std(sb) == 0:
                continue
            corr[a, b] = np.corrcoef(sa, sb)[0, 1]
    np.fill_diagonal(corr, 1.0)
    return corr


def weight_load(kpis, radio: RadioMap, config: FusionConfig | None = None,
                diagnostics: dict | None = None) -> WeightMap:
    """Step 4: mean load over the candidate set of each pixel.

    Candidates are cells whose RSRP is within ``candidate_margin_db`` of the
    best server and whose load is within ``load_tolerance`` of the best
    server's load (optionally also load-correlated with it across periods).
    The best server is always a candidate.
    """
    config = config or FusionConfig()
    summaries = _summaries(kpis, radio)
    n_cells = len(radio.cells)
    load = np.zeros(n_cells)
    reported = np.zeros(n_cells, dtype=bool)
    for cid, s in summaries.items():
        k = radio.cell_position(cid)
        load[k] = s.load
        reported[k] = True
    best = radio.best_index
    rsrp_best = radio.rsrp_best[..., None]
    load_best = load[best][..., None]
    cand = (radio.rsrp >= rsrp_best - config.candidate_margin_db)
    cand &= np.abs(load[None, None, :] - load_best) <= config.load_tolerance
    cand &= reported[None, None, :]
    if config.correlation_gate:
        corr = _load_correlation(summaries, radio)
        cand &= corr[best] >= config.correlation_threshold
    np.put_along_axis(cand, best[..., None], True, axis=2)
    total = np.where(cand, load[None, None, :], 0.0).sum(axis=2)
    w = total / cand.sum(axis=2)
    if diagnostics is not None:
        diagnostics["load_mean_candidates"] = float(cand.sum(axis=2).mean())
    return WeightMap(radio.grid, w)


def cell_radii(radio: RadioMap, percentile: float = 95.0) -> np.ndarray:
    """Per-cell radius: a high percentile of best-server distance over the cell's pixels."""
    radii = np.zeros(len(radio.cells))
    for k in range(len(radio.cells)):
        d = radio.dist[radio.best_index == k]
        if d.size:
            radii[k] = np.percentile(d, percentile)
    return radii


def throughput_gaps(summaries: dict[int, CellSummary], radio: RadioMap,
                    config: FusionConfig) -> np.ndarray:
    """Normalized AMT - HMT gap per cell position, NaN where undefined."""
    gap = np.full(len(radio.cells), np.nan)
    for cid, s in summaries.items():
        if s.amt is not None:
            g = s.amt - s.hmt
            # pooling rounds; a gap at the last few ulps of the mean is no gap
            gap[radio.cell_position(cid)] = g if g > 1e-12 * s.amt else 0.0
    c = config.norm_constant_bps
    if c is None:
        c = np.nanmax(gap) if np.any(np.isfinite(gap)) else 0.0
    if not c > 0:
        return np.where(np.isfinite(gap), 0.0, np.nan)
    return np.clip(gap / c, 0.0, 1.0)


def weight_throughput_gap(kpis, radio: RadioMap, config: FusionConfig | None = None,
                          diagnostics: dict | None = None) -> WeightMap:
    """Step 5: throughput-gap weight on the cell center or its edge.

    With ``D`` the normalized gap and ``theta`` the threshold, center pixels
    get ``D`` when ``D >= theta`` and edge pixels get ``D`` when ``D < theta``
    (``edge_rule="literal"``); the ``"complement"`` rule gives edge pixels
    ``1 - D`` instead.  A pixel is on the edge when its distance to the best
    server exceeds ``edge_fraction`` times the cell radius.
    """
    config = config or FusionConfig()
    summaries = _summaries(kpis, radio)
    d = throughput_gaps(summaries, radio, config)
    radii = cell_radii(radio, config.radius_percentile)
    best = radio.best_index
    dp = d[best]
    edge = radio.dist > config.edge_fraction * radii[best]
    theta = config.throughput_threshold
    edge_value = dp if config.edge_rule == "literal" else 1.0 - dp
    w = np.where(edge, np.where(dp < theta, edge_value, 0.0), np.where(dp >= theta, dp, 0.0))
    w = np.where(np.isnan(dp), 0.0, w)
    if diagnostics is not None:
        diagnostics["throughput_gap"] = {int(radio.cells[k].id): float(v) for k, v in enumerate(d)
                                         if np.isfinite(v)}
    return WeightMap(radio.grid, w)


STEPS = (weight_ta, weight_aoa, weight_neighbor, weight_load, weight_throughput_gap)


def _check_maps(maps: Sequence[WeightMap], config: FusionConfig) -> PixelGrid:
    if len(maps) != len(config.alpha):
        raise ConfigurationError(f"fuse needs {len(config.alpha)} maps, got {len(maps)}")
    grid = maps[0].grid
    if any(m.grid != grid for m in maps):
        raise ConfigurationError("weight maps are on different grids")
    return grid


def _uniform(grid: PixelGrid) -> WeightMap:
    return WeightMap(grid, np.full(grid.shape, 1.0 / grid.n_pixels))


def fuse_linear(maps: Sequence[WeightMap], config: FusionConfig) -> WeightMap:
    grid = _check_maps(maps, config)
    out = np.zeros(grid.shape)
    for a, m in zip(config.alpha, maps):
        if a:
            out += a * m.normalized().w
    t = out.sum()
    return WeightMap(grid, out / t) if t > 0 else _uniform(grid)


def level_regions(w: np.ndarray, best: np.ndarray | None = None) -> np.ndarray:
    """Label pixels by ``(best server, weight)``: the pieces a step map is constant on."""
    cols = [w.reshape(-1)]
    if best is not None:
        cols.insert(0, best.reshape(-1).astype(float))
    _, labels = np.unique(np.stack(cols, axis=1), axis=0, return_inverse=True)
    return labels.reshape(-1)


def fuse_proportional(maps: Sequence[WeightMap], config: FusionConfig,
                      best: np.ndarray | None = None) -> WeightMap:
    """Proportional fitting of a load/throughput prior to the TA, AoA and neighbor maps.

    Exponents are the coefficients relative to the largest one.  The prior
    is ``prod (w_k + floor / N) ** g_k`` over the load and throughput maps.
    Each fitting pass rescales the estimate region by region so its mass on
    a map's regions moves towards that map's mass, by the factor
    ``(target / current) ** g_k``; a region holding target mass but no
    estimate mass is reseeded uniformly.  With no TA, AoA or neighbor map
    selected there is nothing to fit and the weighted sum is returned.
    """
    grid = _check_maps(maps, config)
    alpha = np.asarray(config.alpha)
    gamma = alpha / alpha.max()
    n = grid.n_pixels
    norm = [m.normalized().w.reshape(-1) for m in maps]
    if not any(g and k not in PRIOR_KPIS and norm[k].sum() > 0 for k, g in enumerate(gamma)):
        # nothing to fit the prior to: fall back to the weighted sum
        return fuse_linear(maps, config)
    u = np.full(n, 1.0 / n)
    for k in PRIOR_KPIS:
        if gamma[k] and norm[k].sum() > 0:
            u = u * (norm[k] + config.prior_floor / n) ** gamma[k]
    u /= u.sum()
    fits = []
    for k, g in enumerate(gamma):
        if g and k not in PRIOR_KPIS and norm[k].sum() > 0:
            labels = level_regions(norm[k], best)
            target = np.bincount(labels, weights=norm[k])
            fits.append((labels, target, g, np.bincount(labels)))
    for _ in range(int(config.n_iterations)):
        for labels, target, g, size in fits:
            current = np.bincount(labels, weights=u, minlength=len(target))
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(current > 0, target / current, 0.0) ** g
            u = u * factor[labels]
            reseed = (current <= 0) & (target > 0)
            if reseed.any():
                u = np.where(reseed[labels], (target / size)[labels], u)
            t = u.sum()
            if not t > 0:
                return fuse_linear(maps, config)
            u /= t
    return WeightMap(grid, u.reshape(grid.shape))


def fuse(maps: Sequence[WeightMap], config: FusionConfig | None = None,
         best: np.ndarray | None = None) -> WeightMap:
    """Combine the five step maps into one unit-mass map.

    A zero coefficient drops that KPI.  ``best`` is the best-server index
    per pixel; the proportional rule uses it to keep regions of different
    cells apart.  If nothing carries mass the result is uniform over the grid.
    """
    config = config or FusionConfig()
    if config.rule == "linear":
        return fuse_linear(maps, config)
    return fuse_proportional(maps, config, best)


def decay_kernel(length_m: float, resolution: float) -> np.ndarray:
    """Exponential kernel ``exp(-d / length)`` on pixel offsets, cut at ``4 * length``."""
    r = int(math.floor(KERNEL_CUTOFF * length_m / resolution))
    off = np.arange(-r, r + 1) * resolution
    d = np.hypot(off[:, None], off[None, :])
    k = np.exp(-d / length_m)
    k[d > KERNEL_CUTOFF * length_m] = 0.0
    return k / k.sum()


def smooth(w: WeightMap, length_m: float) -> WeightMap:
    """Distance-decay smoother that conserves mass exactly.

    Interior pixels get the normalized kernel average of their neighborhood.
    Kernel mass that would fall outside the grid stays on the source pixel,
    which keeps the operator symmetric and doubly stochastic: total mass is
    preserved, a uniform map is unchanged and no pixel exceeds the input
    maximum.
    """
    if length_m < 0:
        raise ValueError("smoothing length must be >= 0")
    if length_m == 0:
        return WeightMap(w.grid, w.w.copy())
    k = decay_kernel(length_m, w.grid.resolution)
    if k.shape == (1, 1):
        return WeightMap(w.grid, w.w.copy())
    conv = ndimage.correlate(w.w, k, mode="constant", cval=0.0)
    reach = ndimage.correlate(np.ones(w.grid.shape), k, mode="constant", cval=0.0)
    return WeightMap(w.grid, conv + np.clip(1.0 - reach, 0.0, None) * w.w)


@dataclass
class LocalizationResult:
    steps: tuple[WeightMap, ...]
    fused: WeightMap
    smoothed: WeightMap
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> PixelGrid:
        return self.smoothed.grid


def step_maps(kpis, radio: RadioMap, config: FusionConfig | None = None,
              diagnostics: dict | None = None) -> tuple[WeightMap, ...]:
    """The five normalized per-KPI maps."""
    config = config or FusionConfig()
    summaries = _summaries(kpis, radio)
    return tuple(step(summaries, radio, config, diagnostics).normalized() for step in STEPS)


def localize_from_steps(steps: Sequence[WeightMap], config: FusionConfig,
                        best: np.ndarray | None = None) -> tuple[WeightMap, WeightMap]:
    fused = fuse(steps, config, best)
    return fused, smooth(fused, config.smoothing_m)


def localize(kpis, radio: RadioMap, config: FusionConfig | None = None) -> LocalizationResult:
    """Estimated traffic map: smooth(fuse(step maps)), with the intermediates."""
    config = config or FusionConfig()
    diagnostics: dict = {}
    steps = step_maps(kpis, radio, config, diagnostics)
    fused, smoothed = localize_from_steps(steps, config, radio.best_index)
    return LocalizationResult(steps, fused, smoothed, diagnostics)


WEIGHTS_HEADER = ["i", "j", "x", "y", "w1", "w2", "w3", "w4", "w5", "fused", "smoothed"]


def write_weights_csv(result: LocalizationResult, path) -> None:
    grid = result.grid
    X, Y = grid.centers()
    cols = [m.w for m in result.steps] + [result.fused.w, result.smoothed.w]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(WEIGHTS_HEADER)
        for i in range(grid.width):
            for j in range(grid.height):
                wr.writerow([i, j, repr(float(X[i, j])), repr(float(Y[i, j]))]
                            + [repr(float(c[i, j])) for c in cols])


def read_weights_csv(path) -> tuple[PixelGrid, dict[str, np.ndarray]]:
    """Grid and one ``(width, height)`` array per weight column."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"weights file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != WEIGHTS_HEADER:
            raise ConfigurationError(f"{path}: bad weight-map header")
        rows = list(reader)
    if not rows:
        raise ConfigurationError(f"{path}: no pixels")
    try:
        ij = np.array([[int(r[0]), int(r[1])] for r in rows])
        vals = np.array([[float(v) for v in r[2:]] for r in rows])
    except (ValueError, IndexError):
        raise ConfigurationError(f"{path}: malformed row") from None
    W, H = int(ij[:, 0].max()) + 1, int(ij[:, 1].max()) + 1
    if len(rows) != W * H:
        raise ConfigurationError(f"{path}: expected {W * H} rows, found {len(rows)}")
    x, y = vals[:, 0], vals[:, 1]
    res = float(x[H] - x[0]) if W > 1 else (float(y[1] - y[0]) if H > 1 else 1.0)
    grid = PixelGrid((float(x[0] - res / 2), float(y[0] - res / 2)), W, H, res)
    cols = {}
    for n, name in enumerate(WEIGHTS_HEADER[4:], start=2):
        a = np.empty((W, H))
        a[ij[:, 0], ij[:, 1]] = vals[:, n]
        cols[name] = a
    return grid, cols
