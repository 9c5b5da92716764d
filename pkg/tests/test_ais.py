import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riverfuse.ais import (AisHeaderError, ais_csv_text, build_trajectories, parse_ais_csv, temporal_filter)

from .conftest import make_rec

HEADER = "MMSI,BaseDateTime,LAT,LON,SOG,COG,Heading,VesselName,VesselType\n"


def parse(text, **kw):
    return parse_ais_csv(io.StringIO(text), **kw)


def test_parses_marinecadastre_rows():
    recs, stats = parse(HEADER + "367000001,2023-11-14T22:13:20,30.1,-91.2,5.5,181.2,180,MV ONE,31\n")
    assert stats.rows_accepted == 1
    r = recs[0]
    assert (r.mmsi, r.timestamp, r.lat, r.lon, r.sog, r.cog, r.heading) == (
        "367000001", 1_700_000_000, 30.1, -91.2, 5.5, 181.2, 180.0)
    assert r.vessel_name == "MV ONE" and r.vessel_type_code == 31


def test_header_case_insensitive_and_reordered():
    text = "lon,lat,mmsi,basedatetime,cog,sog\n-91,30,367000001,2023-01-01T00:00:00,10,1\n"
    recs, _ = parse(text)
    assert recs[0].lon == -91 and recs[0].cog == 10


def test_missing_mandatory_column_is_fatal():
    with pytest.raises(AisHeaderError) as exc:
        parse("MMSI,BaseDateTime,LAT,LON,SOG\n")
    assert exc.value.missing == ["COG"] or list(exc.value.missing) == ["COG"]
    with pytest.raises(AisHeaderError):
        parse("")


@pytest.mark.parametrize("row,reason", [
    ("367000001,2023-01-01T00:00:00,30,-91", "malformed row"),
    ("367000001,,30,-91,1,1,,,", "missing field"),
    ("36700X001,2023-01-01T00:00:00,30,-91,1,1,,,", "invalid mmsi"),
    ("367000001,notatime,30,-91,1,1,,,", "unparseable timestamp"),
    ("367000001,2023-01-01T00:00:00,95,-91,1,1,,,", "lat out of range"),
    ("367000001,2023-01-01T00:00:00,30,-191,1,1,,,", "lon out of range"),
    ("367000001,2023-01-01T00:00:00,30,abc,1,1,,,", "unparseable number"),
    ("367000001,2023-01-01T00:00:00,30,-91,-1,1,,,", "sog out of range"),
])
def test_row_rejects(row, reason):
    recs, stats = parse(HEADER + row + "\n")
    assert recs == []
    assert stats.rejects_by_reason == {reason: 1}
    assert stats.rows_read == stats.rows_accepted + stats.rows_rejected == 1


def test_strict_mmsi():
    row = "1234,2023-01-01T00:00:00,30,-91,1,1,,,\n"
    assert len(parse(HEADER + row)[0]) == 1
    assert parse(HEADER + row, strict=True)[1].rejects_by_reason == {"invalid mmsi": 1}


def test_duplicate_keeps_first():
    rows = ("367000001,2023-01-01T00:00:00,30,-91,1,1,,,\n"
            "367000001,2023-01-01T00:00:00,31,-91,1,1,,,\n")
    recs, stats = parse(HEADER + rows)
    assert [r.lat for r in recs] == [30]
    assert stats.rejects_by_reason == {"duplicate": 1}


@pytest.mark.parametrize("raw,expected", [("511", None), ("409.5", None), ("360", 0.0), ("-3", None), ("12.5", 12.5)])
def test_cog_normalization(raw, expected):
    recs, _ = parse(HEADER + f"367000001,2023-01-01T00:00:00,30,-91,1,{raw},511,,\n")
    assert recs[0].cog == expected
    assert recs[0].heading is None


def test_blank_lines_skipped():
    recs, stats = parse(HEADER + "\n367000001,2023-01-01T00:00:00,30,-91,1,1,,,\n\n")
    assert len(recs) == 1 and stats.rows_read == 1


def test_write_parse_round_trip():
    recs = [make_rec("367000001", 1_700_000_000 + 60 * i, -91.0 + i * 1e-4, 30.0, sog=1.5, cog=None if i else 45.0,
                     vessel_name="A", vessel_type_code=52) for i in range(5)]
    text = ais_csv_text(recs)
    back, stats = parse(text)
    assert back == recs
    assert stats.rows_rejected == 0


def test_build_trajectories_groups_and_orders():
    recs = [make_rec("b", 5, 0, 0), make_rec("a", 9, 0, 0), make_rec("a", 3, 1, 1), make_rec("a", 3, 2, 2)]
    trajs = build_trajectories(recs)
    assert [t.mmsi for t in trajs] == ["a", "b"]
    assert trajs[0].timestamps == [3, 9]
    assert trajs[0].points[0].lon == 1  # first occurrence wins


def test_temporal_filter_inclusive_boundary():
    t0 = 1000
    recs = [make_rec("a", t0 + d, 0, 0) for d in (-121, -120, 0, 120, 121)]
    assert [r.timestamp - t0 for r in temporal_filter(recs, t0)] == [-120, 0, 120]
    with pytest.raises(ValueError):
        temporal_filter(recs, t0, -1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-1000, 1000), max_size=80), st.integers(-500, 500), st.integers(0, 400))
def test_temporal_filter_matches_scan(offsets, t0, half):
    recs = [make_rec(str(i), ts, 0, 0) for i, ts in enumerate(offsets)]
    expected = []
    for r in recs:
        if t0 - half <= r.timestamp <= t0 + half:
            expected.append(r)
    assert temporal_filter(recs, t0, half) == expected


def test_rejected_and_accepted_counts_sum():
    rng = random.Random(5)
    lines = [HEADER.strip()]
    for i in range(300):
        lat = rng.choice(["30", "99", "x", ""])
        lines.append(f"36700{i:04d},2023-01-01T00:00:00,{lat},-91,1,1,,,")
    recs, stats = parse("\n".join(lines) + "\n")
    assert stats.rows_read == 300
    assert stats.rows_accepted == len(recs)
    assert sum(stats.rejects_by_reason.values()) == stats.rows_rejected


@pytest.mark.slow
def test_million_row_ingest_streams():
    def rows():
        yield HEADER
        for i in range(1_000_000):
            s = i // 5000
            yield (f"{367000000 + i % 5000},2023-01-01T{s // 3600:02d}:{s // 60 % 60:02d}:{s % 60:02d},"
                   f"30.{i % 1000:03d},-91.{i % 997:03d},5.0,180.0,511,,\n")
    recs, stats = parse_ais_csv(rows())
    assert stats.rows_read == stats.rows_accepted == len(recs) == 1_000_000


def test_trajectories_from_synth_records():
    from riverfuse.synth import SynthConfig, generate
    ds = generate(SynthConfig(seed=0, n_vessels=10, ais_period=5, ais_span_s=300, infrastructure=(0, 0, 0)))
    recs = ds.records[:1000]
    trajs = build_trajectories(recs)
    assert len(recs) == 1000 and len(trajs) == 10
    assert sum(len(t.points) for t in trajs) == len(recs)
