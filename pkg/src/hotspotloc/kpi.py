"""KPI record (one cell, one reporting period) and its CSV persistence.

Floats are written with ``repr`` so ``read_kpis(write_kpis(x)) == x`` holds
bit for bit.  Histograms are ``|``-joined lists inside one field; the
neighbor distribution is ``id:fraction`` pairs joined by ``|`` with the key
``none`` holding the mass of sessions that reported no neighbor.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

TA_BIN_WIDTH_M = 78.125
AOA_BIN_WIDTH_DEG = 10.0
HIST_TOL = 1e-9

KPI_HEADER = [
    "cell_id", "period", "ta_bin_width_m", "ta_hist", "aoa_bin_width_deg", "aoa_hist",
    "neighbor_dist", "load_time", "amt_bps", "hmt_bps", "n_sessions",
]

NO_NEIGHBOR = None


class KpiFormatError(ValueError):
    """A KPI record or file row violates the schema; names the row and field."""

    def __init__(self, message: str, field: str | None = None, row: int | None = None):
        self.reason = message
        self.field = field
        self.row = row
        where = []
        if row is not None:
            where.append(f"row {row}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def ta_bin(distance: float, bin_width: float = TA_BIN_WIDTH_M) -> int:
    """Timing-advance bin of a distance; bins are ``[k w, (k + 1) w)``."""
    if distance < 0 or not bin_width > 0:
        raise ValueError("ta_bin needs distance >= 0 and bin_width > 0")
    return int(math.floor(distance / bin_width))


def check_aoa_bin_width(bin_width: float) -> int:
    """Number of AoA bins; the width must divide 360 evenly."""
    if not bin_width > 0:
        raise ValueError(f"AoA bin width must be > 0, got {bin_width}")
    n = 360.0 / bin_width
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"AoA bin width {bin_width} does not divide 360")
    return int(round(n))


def aoa_bin(bearing: float, bin_width: float = AOA_BIN_WIDTH_DEG) -> int:
    """AoA bin of a bearing in [0, 360), counted anticlockwise from north."""
    n = check_aoa_bin_width(bin_width)
    return min(int(math.floor(bearing / bin_width)), n - 1)


def _neighbor_sort_key(key):
    return (key is None, key if key is not None else 0)


@dataclass(frozen=True)
class KpiRecord:
    cell_id: int
    period: int
    ta_hist: tuple[float, ...]
    aoa_hist: tuple[float, ...]
    neighbor_dist: dict = field(default_factory=dict)
    load_time: float = 0.0
    amt: Optional[float] = None
    hmt: Optional[float] = None
    n_sessions: int = 0
    ta_bin_width: float = TA_BIN_WIDTH_M
    aoa_bin_width: float = AOA_BIN_WIDTH_DEG

    @property
    def empty(self) -> bool:
        """No session served in the period: histograms are all-zero and the means undefined."""
        return self.n_sessions == 0

    def validate(self, cell_ids=None) -> "KpiRecord":
        if cell_ids is not None and self.cell_id not in cell_ids:
            raise KpiFormatError(f"unknown cell id {self.cell_id}", "cell_id")
        if self.period < 0:
            raise KpiFormatError("period must be >= 0", "period")
        if self.n_sessions < 0:
            raise KpiFormatError("n_sessions must be >= 0", "n_sessions")
        if not (math.isfinite(self.ta_bin_width) and self.ta_bin_width > 0):
            raise KpiFormatError("TA bin width must be a positive number", "ta_bin_width_m")
        try:
            n_aoa = check_aoa_bin_width(self.aoa_bin_width)
        except ValueError as exc:
            raise KpiFormatError(str(exc), "aoa_bin_width_deg") from None
        if len(self.aoa_hist) != n_aoa:
            raise KpiFormatError(f"expected {n_aoa} AoA bins, got {len(self.aoa_hist)}", "aoa_hist")
        if not self.ta_hist:
            raise KpiFormatError("TA histogram has no bins", "ta_hist")
        for name, values in (("ta_hist", self.ta_hist), ("aoa_hist", self.aoa_hist),
                             ("neighbor_dist", tuple(self.neighbor_dist.values()))):
            self._check_hist(name, values)
        if cell_ids is not None:
            for key in self.neighbor_dist:
                if key is not None and key not in cell_ids:
                    raise KpiFormatError(f"unknown neighbor cell id {key}", "neighbor_dist")
        if self.cell_id in self.neighbor_dist:
            raise KpiFormatError("a cell cannot be its own neighbor", "neighbor_dist")
        if not (math.isfinite(self.load_time) and 0.0 <= self.load_time <= 1.0):
            raise KpiFormatError(f"load time {self.load_time} outside [0, 1]", "load_time")
        if self.empty:
            if self.amt is not None or self.hmt is not None:
                raise KpiFormatError("means must be undefined when n_sessions = 0", "amt_bps")
        else:
            for name, v in (("amt_bps", self.amt), ("hmt_bps", self.hmt)):
                if v is None or not math.isfinite(v) or v <= 0:
                    raise KpiFormatError(f"mean throughput must be a positive number, got {v}", name)
            if self.hmt > self.amt * (1 + HIST_TOL):
                raise KpiFormatError(f"harmonic mean {self.hmt} exceeds arithmetic mean {self.amt}",
                                     "hmt_bps")
        return self

    def _check_hist(self, name, values):
        for v in values:
            if not (math.isfinite(v) and v >= 0):
                raise KpiFormatError(f"histogram entry {v} is not a finite non-negative number", name)
        total = math.fsum(values)
        if self.empty:
            if total != 0:
                raise KpiFormatError("histogram must be all-zero when n_sessions = 0", name)
        elif abs(total - 1.0) > HIST_TOL:
            raise KpiFormatError(f"histogram sums to {total!r}, expected 1", name)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _row(rec: KpiRecord) -> list[str]:
    nb = "|".join(f"{'none' if k is None else k}:{rec.neighbor_dist[k]!r}"
                  for k in sorted(rec.neighbor_dist, key=_neighbor_sort_key))
    return [str(rec.cell_id), str(rec.period), _fmt(rec.ta_bin_width),
            "|".join(repr(float(v)) for v in rec.ta_hist), _fmt(rec.aoa_bin_width),
            "|".join(repr(float(v)) for v in rec.aoa_hist), nb, _fmt(rec.load_time),
            _fmt(rec.amt), _fmt(rec.hmt), str(rec.n_sessions)]


def write_kpis(records: Iterable[KpiRecord], path=None) -> str | None:
    """Write records sorted by ``(period, cell_id)``; returns the text when ``path`` is None."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KPI_HEADER)
    for rec in sorted(records, key=lambda r: (r.period, r.cell_id)):
        w.writerow(_row(rec))
    if path is None:
        return buf.getvalue()
    Path(path).write_text(buf.getvalue())
    return None


def _parse_float(text: str, name: str, *, optional=False):
    if text == "" and optional:
        return None
    try:
        v = float(text)
    except ValueError:
        raise KpiFormatError(f"not a number: {text!r}", name) from None
    if not math.isfinite(v):
        raise KpiFormatError(f"not a finite number: {text!r}", name)
    return v


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise KpiFormatError(f"not an integer: {text!r}", name) from None


def _parse_hist(text: str, name: str) -> tuple[float, ...]:
    if text == "":
        return ()
    return tuple(_parse_float(t, name) for t in text.split("|"))


def _parse_neighbors(text: str) -> dict:
    out = {}
    if text == "":
        return out
    for item in text.split("|"):
        key, sep, val = item.partition(":")
        if not sep:
            raise KpiFormatError(f"neighbor entry {item!r} is not id:fraction", "neighbor_dist")
        k = None if key == "none" else _parse_int(key, "neighbor_dist")
        if k in out:
            raise KpiFormatError(f"duplicate neighbor key {key}", "neighbor_dist")
        out[k] = _parse_float(val, "neighbor_dist")
    return out


def parse_row(values: list[str], cell_ids=None) -> KpiRecord:
    if len(values) != len(KPI_HEADER):
        # name the first field that is missing, or the last one when there are extras
        name = KPI_HEADER[min(len(values), len(KPI_HEADER) - 1)]
        raise KpiFormatError(f"expected {len(KPI_HEADER)} fields, got {len(values)}", name)
    v = dict(zip(KPI_HEADER, values))
    rec = KpiRecord(
        cell_id=_parse_int(v["cell_id"], "cell_id"),
        period=_parse_int(v["period"], "period"),
        ta_bin_width=_parse_float(v["ta_bin_width_m"], "ta_bin_width_m"),
        ta_hist=_parse_hist(v["ta_hist"], "ta_hist"),
        aoa_bin_width=_parse_float(v["aoa_bin_width_deg"], "aoa_bin_width_deg"),
        aoa_hist=_parse_hist(v["aoa_hist"], "aoa_hist"),
        neighbor_dist=_parse_neighbors(v["neighbor_dist"]),
        load_time=_parse_float(v["load_time"], "load_time"),
        amt=_parse_float(v["amt_bps"], "amt_bps", optional=True),
        hmt=_parse_float(v["hmt_bps"], "hmt_bps", optional=True),
        n_sessions=_parse_int(v["n_sessions"], "n_sessions"),
    )
    return rec.validate(cell_ids)


def read_kpis(source, cell_ids=None) -> list[KpiRecord]:
    """Parse and validate a KPI CSV (path or text stream).

    ``cell_ids``, when given, is the set of known cells; any other id is
    rejected.  Duplicate ``(cell_id, period)`` rows are rejected as well.
    Errors are :class:`KpiFormatError` carrying the 1-based data row number.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"KPI file not found: {path}")
        text = path.read_text()
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != KPI_HEADER:
        raise KpiFormatError(f"bad header {header}", row=0)
    known = set(cell_ids) if cell_ids is not None else None
    records, seen = [], set()
    for n, values in enumerate(reader, start=1):
        try:
            rec = parse_row(values, known)
        except KpiFormatError as exc:
            raise KpiFormatError(exc.reason, exc.field, n) from None
        key = (rec.cell_id, rec.period)
        if key in seen:
            raise KpiFormatError(f"duplicate record for cell {rec.cell_id} period {rec.period}",
                                 "cell_id", n)
        seen.add(key)
        records.append(rec)
    return records
