"""AIS CSV ingestion, trajectory construction and the scene time window."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, List, Optional, TextIO, Tuple

from .core import AisRecord, Trajectory, format_timestamp, parse_timestamp, valid_mmsi

MANDATORY_COLUMNS = ("MMSI", "BaseDateTime", "LAT", "LON", "SOG", "COG")
OPTIONAL_COLUMNS = ("Heading", "VesselName", "VesselType")
DEFAULT_HALF_WINDOW_S = 120

COG_UNAVAILABLE_FROM = 409.5
HEADING_UNAVAILABLE = 511.0


class AisHeaderError(ValueError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("AIS header lacks mandatory column(s): " + ", ".join(self.missing))


@dataclass
class IngestStats:
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejects_by_reason: Counter = field(default_factory=Counter)

    def reject(self, reason: str) -> None:
        self.rows_rejected += 1
        self.rejects_by_reason[reason] += 1

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejects_by_reason": dict(sorted(self.rejects_by_reason.items())),
        }


class _Reject(Exception):
    pass


def _num(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise _Reject("unparseable number") from None
    if v != v or v in (float("inf"), float("-inf")):
        raise _Reject("unparseable number")
    return v


def _normalize_cog(v: float) -> Optional[float]:
    if v >= COG_UNAVAILABLE_FROM:
        return None
    if v == 360.0:
        return 0.0
    if 0.0 <= v < 360.0:
        return v
    # out-of-range values that are not the AIS sentinel: keep the position, drop the course
    return None


def _header_map(header: List[str]) -> dict:
    lowered = {}
    for i, name in enumerate(header):
        key = name.strip().lstrip("﻿").lower()
        lowered.setdefault(key, i)
    missing = [c for c in MANDATORY_COLUMNS if c.lower() not in lowered]
    if missing:
        raise AisHeaderError(missing)
    cols = {c: lowered[c.lower()] for c in MANDATORY_COLUMNS}
    for c in OPTIONAL_COLUMNS:
        if c.lower() in lowered:
            cols[c] = lowered[c.lower()]
    return cols


def parse_ais_csv(stream: Iterable[str], strict: bool = False) -> Tuple[List[AisRecord], IngestStats]:
    """Parse MarineCadastre-style AIS CSV lines.

    Bad rows are rejected and tallied in the returned stats; only a header
    missing a mandatory column raises (:class:`AisHeaderError`).
    """
    reader = csv.reader(stream)
    stats = IngestStats()
    try:
        header = next(reader)
    except StopIteration:
        raise AisHeaderError(MANDATORY_COLUMNS) from None
    cols = _header_map(header)
    i_mmsi, i_t, i_lat, i_lon, i_sog, i_cog = (cols[c] for c in MANDATORY_COLUMNS)
    i_head = cols.get("Heading")
    i_name = cols.get("VesselName")
    i_type = cols.get("VesselType")
    width = max(cols.values()) + 1

    records: List[AisRecord] = []
    seen = set()
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        stats.rows_read += 1
        try:
            if len(row) < width:
                raise _Reject("malformed row")
            mmsi = row[i_mmsi].strip()
            fields = (mmsi, row[i_t].strip(), row[i_lat].strip(), row[i_lon].strip(),
                      row[i_sog].strip(), row[i_cog].strip())
            if not all(fields):
                raise _Reject("missing field")
            if not valid_mmsi(mmsi, strict):
                raise _Reject("invalid mmsi")
            try:
                ts = parse_timestamp(fields[1])
            except ValueError:
                raise _Reject("unparseable timestamp") from None
            lat, lon = _num(fields[2]), _num(fields[3])
            if not -90.0 <= lat <= 90.0:
                raise _Reject("lat out of range")
            if not -180.0 <= lon <= 180.0:
                raise _Reject("lon out of range")
            sog = _num(fields[4])
            if sog < 0.0:
                raise _Reject("sog out of range")
            cog = _normalize_cog(_num(fields[5]))
            heading = None
            if i_head is not None and row[i_head].strip():
                h = _num(row[i_head].strip())
                heading = h if 0.0 <= h < 360.0 else None
            name = row[i_name].strip() or None if i_name is not None else None
            vtype = None
            if i_type is not None and row[i_type].strip():
                try:
                    vtype = int(float(row[i_type]))
                except ValueError:
                    vtype = None
            key = (mmsi, ts)
            if key in seen:
                raise _Reject("duplicate")
            seen.add(key)
        except _Reject as exc:
            stats.reject(str(exc))
            continue
        records.append(AisRecord(mmsi, ts, lat, lon, sog, cog, heading, name, vtype))
        stats.rows_accepted += 1
    return records, stats


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_ais_csv(records: Iterable[AisRecord], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(MANDATORY_COLUMNS + OPTIONAL_COLUMNS)
    for r in records:
        writer.writerow([
            r.mmsi,
            format_timestamp(r.timestamp)[:-1],  # MarineCadastre style: no zone designator
            _fmt(r.lat), _fmt(r.lon), _fmt(r.sog),
            _fmt(r.cog) if r.cog is not None else "511.0",
            _fmt(r.heading) if r.heading is not None else "511.0",
            r.vessel_name or "",
            _fmt(r.vessel_type_code),
        ])


def ais_csv_text(records: Iterable[AisRecord]) -> str:
    buf = io.StringIO()
    write_ais_csv(records, buf)
    return buf.getvalue()


def build_trajectories(records: Iterable[AisRecord]) -> List[Trajectory]:
    """Group records by MMSI and order each group in time.

    Repeated timestamps for one vessel keep the first occurrence in input order.
    """
    ordered = sorted(records, key=lambda r: (r.mmsi, r.timestamp))
    out = []
    for mmsi, group in groupby(ordered, key=lambda r: r.mmsi):
        pts = []
        for r in group:
            if pts and pts[-1].timestamp == r.timestamp:
                continue
            pts.append(r)
        out.append(Trajectory(mmsi, tuple(pts)))
    return out


def temporal_filter(records: Iterable[AisRecord], t0: int, half_window: float = DEFAULT_HALF_WINDOW_S) -> List[AisRecord]:
    if half_window < 0:
        raise ValueError("half_window must be non-negative")
    return [r for r in records if abs(r.timestamp - t0) <= half_window]
