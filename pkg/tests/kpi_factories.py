"""Random valid KPI records and targeted corruptions of their CSV form."""

import csv
import io

import numpy as np

from hotspotloc.kpi import KPI_HEADER, KpiRecord

CELL_IDS = tuple(range(12))


def _hist(rng, n, sparse=True):
    v = rng.exponential(size=n)
    if sparse:
        v[rng.random(n) < 0.4] = 0.0
    if v.sum() == 0:
        v[rng.integers(n)] = 1.0
    return tuple(float(x) for x in v / v.sum())


def random_record(rng, cell_id, period, *, allow_empty=True):
    aoa_width = float(rng.choice([10.0, 30.0, 120.0, 45.0]))
    n_aoa = int(360 / aoa_width)
    n_ta = int(rng.integers(1, 16))
    ta_width = float(rng.choice([78.125, 156.25, 50.0]))
    if allow_empty and rng.random() < 0.1:
        return KpiRecord(cell_id, period, (0.0,) * n_ta, (0.0,) * n_aoa, {},
                         load_time=0.0, n_sessions=0, ta_bin_width=ta_width, aoa_bin_width=aoa_width)
    others = [c for c in CELL_IDS if c != cell_id]
    keys = list(rng.choice(others, size=int(rng.integers(0, 4)), replace=False)) + [None]
    keys = [None if k is None else int(k) for k in keys]
    nb = dict(zip(keys, _hist(rng, len(keys), sparse=False)))
    amt = float(rng.uniform(1e5, 1e8))
    hmt = amt if rng.random() < 0.1 else float(amt * rng.uniform(0.05, 1.0))
    return KpiRecord(
        cell_id, period, _hist(rng, n_ta), _hist(rng, n_aoa), nb,
        load_time=float(rng.choice([0.0, 1.0, rng.random()])), amt=amt, hmt=hmt,
        n_sessions=int(rng.integers(1, 5000)), ta_bin_width=ta_width, aoa_bin_width=aoa_width,
    )


def random_records(rng, n, *, allow_empty=True):
    """``n`` records with distinct ``(cell, period)`` keys."""
    out = []
    for k in range(n):
        cell = CELL_IDS[k % len(CELL_IDS)]
        out.append(random_record(rng, cell, k // len(CELL_IDS), allow_empty=allow_empty))
    return out


def _replace(values, name, text):
    values[KPI_HEADER.index(name)] = text


def _largest_scaled(field_text, factor):
    parts = field_text.split("|")
    k = max(range(len(parts)), key=lambda m: float(parts[m]))
    parts[k] = repr(float(parts[k]) * factor)
    return "|".join(parts)


CORRUPTIONS = {
    "ta_sum": ("ta_hist", lambda v: _replace(v, "ta_hist", _largest_scaled(v[3], 0.8))),
    "ta_text": ("ta_hist", lambda v: _replace(v, "ta_hist", "0.5|abc")),
    "aoa_bins": ("aoa_hist", lambda v: _replace(v, "aoa_hist", "|".join(v[5].split("|")[:-1] or ["1.0", "0.0"]))),
    "aoa_negative": ("aoa_hist", lambda v: _replace(v, "aoa_hist", _largest_scaled(v[5], -1.0))),
    "nb_text": ("neighbor_dist", lambda v: _replace(v, "neighbor_dist", "3:x")),
    "nb_unknown": ("neighbor_dist", lambda v: _replace(v, "neighbor_dist", "999:1.0")),
    "nb_self": ("neighbor_dist", lambda v: _replace(v, "neighbor_dist", f"{v[0]}:1.0")),
    "load_high": ("load_time", lambda v: _replace(v, "load_time", "1.5")),
    "load_nan": ("load_time", lambda v: _replace(v, "load_time", "nan")),
    "amt_text": ("amt_bps", lambda v: _replace(v, "amt_bps", "fast")),
    "hmt_above_amt": ("hmt_bps", lambda v: _replace(v, "hmt_bps", repr(float(v[8]) * 2.0))),
    "sessions_negative": ("n_sessions", lambda v: _replace(v, "n_sessions", "-3")),
    "sessions_float": ("n_sessions", lambda v: _replace(v, "n_sessions", "2.5")),
    "cell_unknown": ("cell_id", lambda v: _replace(v, "cell_id", "999")),
    "period_negative": ("period", lambda v: _replace(v, "period", "-1")),
    "ta_width_zero": ("ta_bin_width_m", lambda v: _replace(v, "ta_bin_width_m", "0.0")),
    "aoa_width_nondivisor": ("aoa_bin_width_deg", lambda v: _replace(v, "aoa_bin_width_deg", "7.0")),
    "truncated": ("n_sessions", lambda v: v.pop()),
}


def corrupt(text, rng):
    """Corrupt one data row of a valid KPI CSV of non-empty records.

    Returns ``(new_text, row_number, expected_field, corruption_name)``.
    """
    rows = list(csv.reader(io.StringIO(text)))
    n = int(rng.integers(1, len(rows)))
    name = str(rng.choice(sorted(CORRUPTIONS)))
    field, apply = CORRUPTIONS[name]
    apply(rows[n])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue(), n, field, name
