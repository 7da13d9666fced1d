import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotspotloc.kpi import (KPI_HEADER, KpiFormatError, KpiRecord, aoa_bin, check_aoa_bin_width, read_kpis,
                            ta_bin, write_kpis)
from kpi_factories import CELL_IDS, CORRUPTIONS, corrupt, random_records

HEADER_LINE = ("cell_id,period,ta_bin_width_m,ta_hist,aoa_bin_width_deg,aoa_hist,neighbor_dist,"
               "load_time,amt_bps,hmt_bps,n_sessions")


@pytest.mark.parametrize("d,expected", [(0.0, 0), (78.125, 1), (400.0, 5), (78.12499, 0)])
def test_ta_bin(d, expected):
    assert ta_bin(d, 78.125) == expected


@pytest.mark.parametrize("b,expected", [(0.0, 0), (359.9, 35), (10.0, 1), (9.999, 0)])
def test_aoa_bin(b, expected):
    assert aoa_bin(b, 10.0) == expected


@pytest.mark.parametrize("width", [7.0, 0.0, -10.0, 25.0])
def test_aoa_bin_width_must_divide_360(width):
    with pytest.raises(ValueError):
        check_aoa_bin_width(width)


def test_three_wedge_histogram():
    # 30/40/30 of 100 sessions in three 120 degree bins
    bearings = [10.0] * 30 + [150.0] * 40 + [300.0] * 30
    counts = np.bincount([aoa_bin(b, 120.0) for b in bearings], minlength=3)
    rec = KpiRecord(0, 0, (1.0,), tuple(counts / counts.sum()), {None: 1.0}, 0.5, 1e6, 1e6, 100,
                    aoa_bin_width=120.0).validate()
    assert rec.aoa_hist == pytest.approx((0.30, 0.40, 0.30))


def test_empty_list_writes_header_only():
    assert write_kpis([]) == HEADER_LINE + "\n"
    assert ",".join(KPI_HEADER) == HEADER_LINE


def test_round_trip_bit_exact(tmp_path):
    recs = random_records(np.random.default_rng(0), 60)
    p = tmp_path / "k.csv"
    write_kpis(recs, p)
    back = read_kpis(p, CELL_IDS)
    assert back == sorted(recs, key=lambda r: (r.period, r.cell_id))
    assert write_kpis(back) == p.read_text()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 40))
def test_round_trip_property(seed, n):
    recs = random_records(np.random.default_rng(seed), n)
    back = read_kpis(io.StringIO(write_kpis(recs)), CELL_IDS)
    assert back == sorted(recs, key=lambda r: (r.period, r.cell_id))


def test_ta_sum_point_eight_rejected():
    rec = KpiRecord(0, 0, (0.5, 0.3), (1.0,) + (0.0,) * 35, {None: 1.0}, 0.2, 1e6, 5e5, 10)
    with pytest.raises(KpiFormatError, match="ta_hist") as exc:
        rec.validate()
    assert "sums to" in str(exc.value)


def test_empty_record_conventions():
    rec = KpiRecord(3, 1, (0.0, 0.0), (0.0,) * 36, {}, 0.0, None, None, 0).validate()
    assert rec.empty
    text = write_kpis([rec])
    assert text.splitlines()[1].endswith(",0.0,,,0")
    assert read_kpis(io.StringIO(text)) == [rec]


def test_empty_record_with_means_rejected():
    with pytest.raises(KpiFormatError, match="amt_bps"):
        KpiRecord(3, 1, (0.0,), (0.0,) * 36, {}, 0.0, 1e6, 1e6, 0).validate()


def test_hmt_above_amt_rejected():
    with pytest.raises(KpiFormatError, match="hmt_bps"):
        KpiRecord(0, 0, (1.0,), (1.0,) + (0.0,) * 35, {None: 1.0}, 0.2, 1e6, 1.1e6, 4).validate()


def test_hmt_equal_amt_accepted():
    KpiRecord(0, 0, (1.0,), (1.0,) + (0.0,) * 35, {None: 1.0}, 0.2, 1e6, 1e6, 4).validate()


def test_neighbor_residual_key():
    rec = KpiRecord(0, 0, (1.0,), (1.0,) + (0.0,) * 35, {2: 0.75, None: 0.25}, 0.2, 1e6, 1e6, 4)
    line = write_kpis([rec]).splitlines()[1]
    assert "2:0.75|none:0.25" in line
    assert read_kpis(io.StringIO(write_kpis([rec])))[0].neighbor_dist == {2: 0.75, None: 0.25}


def test_duplicate_rows_rejected():
    recs = random_records(np.random.default_rng(1), 3)
    text = write_kpis(recs)
    dup = text + text.splitlines()[1] + "\n"
    with pytest.raises(KpiFormatError, match="row 4") as exc:
        read_kpis(io.StringIO(dup))
    assert exc.value.field == "cell_id"


def test_bad_header_rejected():
    with pytest.raises(KpiFormatError, match="header"):
        read_kpis(io.StringIO("cell,period\n"))


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="missing.csv"):
        read_kpis(tmp_path / "missing.csv")


@pytest.mark.parametrize("name", sorted(CORRUPTIONS))
def test_each_corruption_names_its_field(name):
    recs = random_records(np.random.default_rng(7), 5, allow_empty=False)
    text = write_kpis(recs)

    class Fixed:
        def integers(self, lo, hi):
            return 2

        def choice(self, options):
            return name

    bad, row, field, _ = corrupt(text, Fixed())
    with pytest.raises(KpiFormatError) as exc:
        read_kpis(io.StringIO(bad), CELL_IDS)
    assert exc.value.row == row
    assert exc.value.field == field
    assert f"row {row}" in str(exc.value) and f"'{field}'" in str(exc.value)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_corruption_rejected(seed):
    rng = np.random.default_rng(seed)
    text = write_kpis(random_records(rng, int(rng.integers(1, 30)), allow_empty=False))
    bad, row, field, _ = corrupt(text, rng)
    with pytest.raises(KpiFormatError) as exc:
        read_kpis(io.StringIO(bad), CELL_IDS)
    assert (exc.value.row, exc.value.field) == (row, field)
