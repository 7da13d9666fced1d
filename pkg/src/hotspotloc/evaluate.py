"""Estimation quality against simulated ground truth."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hotspotloc.localize import (KPI_NAMES, FusionConfig, WeightMap, localize_from_steps, smooth,
                                 step_maps)
from hotspotloc.radio import ConfigurationError, RadioMap
from hotspotloc.sim import GroundTruth

DEFAULT_THRESHOLDS = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 70.0)


def _as_array(m) -> np.ndarray:
    return np.asarray(m.w if isinstance(m, WeightMap) else m, dtype=float)


def _unit(a: np.ndarray) -> np.ndarray:
    t = a.sum()
    if not t > 0:
        raise ValueError("map has no mass to normalize")
    return a / t


def l1_error(est, truth) -> float:
    """Total-variation distance ``0.5 * sum |est - truth|`` between the normalized maps."""
    e, t = _as_array(est), _as_array(truth)
    if e.shape != t.shape:
        raise ConfigurationError(f"grid mismatch: {e.shape} vs {t.shape}")
    return float(min(0.5 * np.abs(_unit(e) - _unit(t)).sum(), 1.0))


def weight_cdf(m, n_points: int = 101, weighting: str = "pixels") -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF of per-pixel weights sampled at ``n_points`` quantile levels.

    ``weighting="pixels"`` gives the fraction of pixels with weight <= v;
    ``"mass"`` gives the fraction of total traffic carried by those pixels.
    The first point sits at the minimum weight and the last at the maximum
    with cumulative fraction 1.
    """
    v = np.sort(_as_array(m).reshape(-1))
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if weighting not in ("pixels", "mass"):
        raise ValueError(f"unknown CDF weighting {weighting!r}")
    levels = np.linspace(0.0, 1.0, n_points)
    idx = np.minimum(np.floor(levels * (len(v) - 1)).astype(np.int64), len(v) - 1)
    values = v[idx]
    upto = np.searchsorted(v, values, side="right")
    if weighting == "pixels":
        cum = upto / len(v)
    else:
        csum = np.concatenate([[0.0], np.cumsum(v)])
        cum = csum[upto] / csum[-1] if csum[-1] > 0 else upto / len(v)
    return values, cum


def ks_distance(a, b) -> float:
    """Kolmogorov distance between the per-pixel weight distributions of two normalized maps."""
    x = np.sort(_unit(_as_array(a)).reshape(-1))
    y = np.sort(_unit(_as_array(b)).reshape(-1))
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / len(x)
    fy = np.searchsorted(y, grid, side="right") / len(y)
    return float(np.max(np.abs(fx - fy)))


def top_set(m, q: float) -> np.ndarray:
    """Flat indices of the top ``q`` percent pixels; ties broken by lower pixel index."""
    if not 0 < q <= 100:
        raise ValueError(f"threshold {q} outside (0, 100]")
    v = _as_array(m).reshape(-1)
    k = max(1, int(math.floor(q * v.size / 100.0 + 0.5)))
    order = np.lexsort((np.arange(v.size), -v))
    return order[:k]


def detected_percent(est, truth, q: float) -> float:
    e, t = _as_array(est), _as_array(truth)
    if e.shape != t.shape:
        raise ConfigurationError(f"grid mismatch: {e.shape} vs {t.shape}")
    hit = np.intersect1d(top_set(t, q), top_set(e, q), assume_unique=True).size
    return 100.0 * hit / t.size


@dataclass
class DetectionRow:
    q: float
    detected: float
    detected_ta_only: float | None = None


def detection_table(est, truth, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                    ta_only=None) -> list[DetectionRow]:
    """Grid-fraction overlap (in %) of the real and estimated top-q% pixel sets."""
    return [DetectionRow(float(q), detected_percent(est, truth, q),
                         None if ta_only is None else detected_percent(ta_only, truth, q))
            for q in thresholds]


@dataclass
class AblationRow:
    name: str
    subset: tuple[str, ...]
    l1_access: float
    l1_elapsed: float


def default_subsets() -> list[tuple[str, tuple[str, ...]]]:
    rows = [("all", KPI_NAMES)]
    rows += [(f"no_{k}", tuple(n for n in KPI_NAMES if n != k)) for k in KPI_NAMES]
    rows.append(("ta_only", ("ta",)))
    return rows


def subset_alpha(config: FusionConfig, subset: Sequence[str]) -> tuple[float, ...]:
    """Coefficients with every KPI outside ``subset`` zeroed.

    The survivors are not rescaled: fusion renormalizes its output, so
    rescaling would change nothing but the floating-point rounding.
    """
    if not subset:
        raise ValueError("ablation subset must not be empty")
    unknown = set(subset) - set(KPI_NAMES)
    if unknown:
        raise ValueError(f"unknown KPI name(s) {sorted(unknown)}")
    alpha = tuple(a if n in subset else 0.0 for n, a in zip(KPI_NAMES, config.alpha))
    if not any(alpha):
        raise ValueError(f"subset {tuple(subset)} has only zero coefficients")
    return alpha


def ablate(kpis, radio: RadioMap, truth: GroundTruth, config: FusionConfig | None = None,
           subsets=None) -> list[AblationRow]:
    """Rerun fusion and smoothing with KPIs removed; L1 error against both truth fields.

    ``subsets`` is a ``{name: kpi_names}`` mapping or an iterable of KPI-name
    tuples; by default all KPIs, each leave-one-out set and TA alone.
    """
    config = config or FusionConfig()
    if subsets is None:
        subsets = default_subsets()
    elif isinstance(subsets, dict):
        subsets = list(subsets.items())
    else:
        subsets = [("+".join(s), tuple(s)) for s in subsets]
    steps = step_maps(kpis, radio, config)
    rows = []
    for name, subset in subsets:
        _, est = localize_from_steps(steps, config.with_alpha(subset_alpha(config, subset)),
                                     radio.best_index)
        rows.append(AblationRow(name, tuple(subset), l1_error(est, truth.access),
                                l1_error(est, truth.elapsed)))
    return rows


@dataclass
class EvalReport:
    l1_error_access: float
    l1_error_elapsed: float
    cdfs: dict = field(default_factory=dict)
    detection_table: list = field(default_factory=list)
    ablation_errors: list = field(default_factory=list)
    cdf_weighting: str = "pixels"

    @property
    def cdf_real(self):
        return self.cdfs.get("real_access")

    @property
    def cdf_est(self):
        return self.cdfs.get("estimated")


def evaluate(est, truth: GroundTruth, *, ta_only=None, thresholds=DEFAULT_THRESHOLDS,
             n_points: int = 101, weighting: str = "pixels") -> EvalReport:
    est_a = _unit(_as_array(est))
    cdfs = {
        "estimated": weight_cdf(est_a, n_points, weighting),
        "real_access": weight_cdf(_unit(truth.access.astype(float)), n_points, weighting),
    }
    if truth.elapsed.sum() > 0:
        cdfs["real_elapsed"] = weight_cdf(_unit(truth.elapsed.astype(float)), n_points, weighting)
    return EvalReport(
        l1_error_access=l1_error(est_a, truth.access),
        l1_error_elapsed=l1_error(est_a, truth.elapsed) if truth.elapsed.sum() > 0 else float("nan"),
        cdfs=cdfs,
        detection_table=detection_table(est_a, truth.access, thresholds, ta_only),
        cdf_weighting=weighting,
    )


def ta_only_estimate(w1, config: FusionConfig) -> WeightMap:
    """The TA baseline: fusion with only the TA coefficient set reproduces the TA map, so this is its smoothing."""
    return smooth(w1.normalized(), config.smoothing_m)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_ablation(rows: Sequence[AblationRow], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "kpis", "l1_access", "l1_elapsed"])
        for r in rows:
            w.writerow([r.name, "|".join(r.subset), _fmt(r.l1_access), _fmt(r.l1_elapsed)])
    lines = ["[ablation]", f"{'subset':<16}{'l1_access':>12}{'l1_elapsed':>12}"]
    lines += [f"{r.name:<16}{r.l1_access:>12.4f}{r.l1_elapsed:>12.4f}" for r in rows]
    (out / "ablation.txt").write_text("\n".join(lines) + "\n")


def write_report(report: EvalReport, out_dir) -> None:
    """Structured text summary plus one CSV per table and per CDF curve."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerow(["l1_error_access", _fmt(report.l1_error_access)])
        w.writerow(["l1_error_elapsed", _fmt(report.l1_error_elapsed)])
    with open(out / "detection.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q_percent", "detected_percent_all", "detected_percent_ta_only"])
        for r in report.detection_table:
            w.writerow([_fmt(r.q), _fmt(r.detected), _fmt(r.detected_ta_only)])
    for name, (values, cum) in report.cdfs.items():
        with open(out / f"cdf_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["value", "cum_fraction"])
            for v, c in zip(values, cum):
                w.writerow([repr(float(v)), repr(float(c))])

    lines = ["[errors]",
             f"l1_error_access  = {report.l1_error_access:.6f}",
             f"l1_error_elapsed = {report.l1_error_elapsed:.6f}",
             "",
             "[detection]",
             f"{'q%':>8}{'all KPIs %':>14}{'TA only %':>14}"]
    for r in report.detection_table:
        ta = "" if r.detected_ta_only is None else f"{r.detected_ta_only:.4f}"
        lines.append(f"{r.q:>8g}{r.detected:>14.4f}{ta:>14}")
    lines += ["", f"[cdf] weighting = {report.cdf_weighting}"]
    for name, (values, cum) in report.cdfs.items():
        lines.append(f"{name}: {len(values)} points, min {values[0]:.3e}, median "
                     f"{values[len(values) // 2]:.3e}, max {values[-1]:.3e}")
    if report.ablation_errors:
        lines += ["", "[ablation]"]
        lines += [f"{r.name:<16}{r.l1_access:>12.4f}{r.l1_elapsed:>12.4f}" for r in report.ablation_errors]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
