"""Shared domain types and the object-class taxonomy.

Conventions used throughout the package:

- timestamps are integer UTC epoch seconds;
- geographic points are ``(lon, lat)`` tuples in WGS84 degrees;
- OBB angles are radians counter-clockwise from the image x-axis internally
  and degrees in files (the conversion happens in :mod:`riverfuse.formats`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Optional, Sequence, Tuple

Point = Tuple[float, float]


class TaxonomyError(ValueError):
    """A label outside the closed class taxonomy."""


class VesselClass(str, Enum):
    TUGBOAT = "tugboat"
    CRANE_BARGE = "crane_barge"
    BULK_CARRIER = "bulk_carrier"
    CARGO_SHIP = "cargo_ship"
    HOPPER_BARGE = "hopper_barge"
    DOCK = "dock"
    BRIDGE = "bridge"
    STAGING_AREA = "staging_area"


class Cover(str, Enum):
    COVERED = "covered"
    UNCOVERED = "uncovered"
    NOT_APPLICABLE = "not_applicable"


class OpStatus(str, Enum):
    STAGED = "staged"
    IN_MOTION = "in_motion"
    MOORED = "moored"
    NOT_APPLICABLE = "not_applicable"


class Direction(str, Enum):
    UPSTREAM = "upstream"
    DOWNSTREAM = "downstream"
    STATIONARY = "stationary"
    NOT_APPLICABLE = "not_applicable"


# Self-propelled classes carry AIS transponders and take part in the
# link/dark partition. Barges are unpowered and reach the inventory via tows.
SELF_PROPELLED = frozenset({VesselClass.TUGBOAT, VesselClass.BULK_CARRIER, VesselClass.CARGO_SHIP})
BARGE_CLASSES = frozenset({VesselClass.HOPPER_BARGE, VesselClass.CRANE_BARGE})
INFRASTRUCTURE = frozenset({VesselClass.DOCK, VesselClass.BRIDGE, VesselClass.STAGING_AREA})


def _parse_enum(enum_cls, label):
    if isinstance(label, enum_cls):
        return label
    try:
        return enum_cls(str(label).strip().lower())
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise TaxonomyError(f"unknown {enum_cls.__name__} label {label!r} (allowed: {allowed})") from None


def parse_class(label) -> VesselClass:
    return _parse_enum(VesselClass, label)


def parse_cover(label) -> Cover:
    return _parse_enum(Cover, label)


def parse_op_status(label) -> OpStatus:
    return _parse_enum(OpStatus, label)


def parse_direction(label) -> Direction:
    return _parse_enum(Direction, label)


# ---------------------------------------------------------------------------
# time helpers

# fromisoformat on 3.10 rejects fractions that are not 3 or 6 digits
_TIME_FORMATS = ("%Y-%m-%dT%H:%M:%S%z", "%Y-%m-%dT%H:%M:%S.%f%z", "%Y-%m-%dT%H:%M:%S.%f",
                 "%Y-%m-%d %H:%M:%S.%f%z", "%Y-%m-%d %H:%M:%S.%f")


def parse_timestamp(text: str) -> int:
    """Parse an ISO 8601 timestamp to UTC epoch seconds.

    A missing zone designator means UTC. Fractional seconds are truncated.
    """
    s = text.strip()
    if s[-1:] in ("Z", "z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        dt = None
        for fmt in _TIME_FORMATS:
            try:
                dt = datetime.strptime(s, fmt)
                break
            except ValueError:
                continue
        if dt is None:
            raise ValueError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return math.floor(dt.timestamp())


def format_timestamp(epoch_s: int) -> str:
    return datetime.fromtimestamp(int(epoch_s), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------------------------------------------------------------------
# AIS

_MMSI_STRICT = re.compile(r"^\d{9}$")
_MMSI_LOOSE = re.compile(r"^\d+$")


def valid_mmsi(mmsi: str, strict: bool = False) -> bool:
    return bool((_MMSI_STRICT if strict else _MMSI_LOOSE).match(mmsi))


@dataclass(frozen=True)
class AisRecord:
    mmsi: str
    timestamp: int
    lat: float
    lon: float
    sog: float
    cog: Optional[float] = None  # None: unavailable
    heading: Optional[float] = None
    vessel_name: Optional[str] = None
    vessel_type_code: Optional[int] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon out of range: {self.lon}")
        if not self.sog >= 0.0:
            raise ValueError(f"sog must be non-negative: {self.sog}")
        if self.cog is not None and not 0.0 <= self.cog < 360.0:
            raise ValueError(f"cog out of range: {self.cog}")

    @property
    def position(self) -> Point:
        return (self.lon, self.lat)


@dataclass(frozen=True)
class Trajectory:
    """One vessel's time-ordered AIS path. ``points`` are the records themselves."""

    mmsi: str
    points: Tuple[AisRecord, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("trajectory needs at least one point")
        for a, b in zip(self.points, self.points[1:]):
            if b.timestamp <= a.timestamp:
                raise ValueError(f"trajectory {self.mmsi}: timestamps not strictly increasing")
        for p in self.points:
            if p.mmsi != self.mmsi:
                raise ValueError(f"trajectory {self.mmsi} contains a point of {p.mmsi}")

    @property
    def polyline(self) -> list:
        return [(p.lon, p.lat) for p in self.points]

    @property
    def timestamps(self) -> list:
        return [p.timestamp for p in self.points]


# ---------------------------------------------------------------------------
# scenes and detections


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2, o3, o4 = orient(p1, p2, q1), orient(p1, p2, q2), orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def normalize_ring(points: Sequence[Point]) -> Tuple[Point, ...]:
    """Drop an explicit closing vertex and consecutive duplicates."""
    ring = [(float(x), float(y)) for x, y in points]
    out: list = []
    for p in ring:
        if not out or p != out[-1]:
            out.append(p)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return tuple(out)


def ring_signed_area(ring: Sequence[Point]) -> float:
    n = len(ring)
    s = 0.0
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def ring_is_simple(ring: Sequence[Point]) -> bool:
    n = len(ring)
    edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


@dataclass(frozen=True)
class SceneMeta:
    scene_id: str
    acquired_at: int
    footprint: Tuple[Point, ...]
    geotransform: Tuple[float, float, float, float, float, float]
    width_px: int
    height_px: int

    def __post_init__(self):
        ring = normalize_ring(self.footprint)
        if len(ring) < 3:
            raise ValueError(f"scene {self.scene_id}: footprint needs at least 3 vertices")
        if not ring_is_simple(ring):
            raise ValueError(f"scene {self.scene_id}: footprint ring self-intersects")
        if ring_signed_area(ring) < 0:
            ring = (ring[0],) + tuple(reversed(ring[1:]))
        object.__setattr__(self, "footprint", ring)
        gt = tuple(float(v) for v in self.geotransform)
        if len(gt) != 6:
            raise ValueError(f"scene {self.scene_id}: geotransform needs 6 coefficients")
        object.__setattr__(self, "geotransform", gt)
        if self.determinant == 0.0:
            raise ValueError(f"scene {self.scene_id}: singular geotransform")
        if int(self.width_px) <= 0 or int(self.height_px) <= 0:
            raise ValueError(f"scene {self.scene_id}: width_px/height_px must be positive")

    @property
    def determinant(self) -> float:
        _, dx_col, dx_row, _, dy_col, dy_row = self.geotransform
        return dx_col * dy_row - dx_row * dy_col


@dataclass(frozen=True)
class OrientedBox:
    center_col: float
    center_row: float
    width: float
    height: float
    angle: float  # radians, CCW from image x-axis


@dataclass(frozen=True)
class Detection:
    detection_id: str
    scene_id: str
    obb: OrientedBox
    klass: VesselClass
    cover: Cover = Cover.NOT_APPLICABLE
    op_status: OpStatus = OpStatus.NOT_APPLICABLE
    direction_pred: Direction = Direction.NOT_APPLICABLE
    confidence: float = 1.0
    tow_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "klass", parse_class(self.klass))
        object.__setattr__(self, "cover", parse_cover(self.cover))
        object.__setattr__(self, "op_status", parse_op_status(self.op_status))
        object.__setattr__(self, "direction_pred", parse_direction(self.direction_pred))

    @property
    def is_infrastructure(self) -> bool:
        return self.klass in INFRASTRUCTURE

    @property
    def is_self_propelled(self) -> bool:
        return self.klass in SELF_PROPELLED

    @property
    def is_barge(self) -> bool:
        return self.klass in BARGE_CLASSES


def validate_detection(d: Detection) -> list:
    """Return the invariant violations of ``d``; an empty list means valid."""
    problems = []
    if not d.obb.width > 0:
        problems.append("width must be positive")
    if not d.obb.height > 0:
        problems.append("height must be positive")
    if not all(math.isfinite(v) for v in (d.obb.center_col, d.obb.center_row, d.obb.angle)):
        problems.append("obb center and angle must be finite")
    if d.cover is not Cover.NOT_APPLICABLE and d.klass is not VesselClass.HOPPER_BARGE:
        problems.append("cover must be not_applicable unless klass is hopper_barge")
    if d.klass in INFRASTRUCTURE:
        if d.op_status is not OpStatus.NOT_APPLICABLE:
            problems.append("infrastructure class must have op_status=not_applicable")
        if d.direction_pred is not Direction.NOT_APPLICABLE:
            problems.append("infrastructure class must have direction_pred=not_applicable")
    if not 0.0 <= d.confidence <= 1.0:
        problems.append("confidence must be in [0, 1]")
    return problems


@dataclass(frozen=True)
class Centerline:
    """River axis polyline, vertices ordered upstream to downstream."""

    vertices: Tuple[Point, ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 2:
            raise ValueError("centerline needs at least 2 vertices")
        for a, b in zip(verts, verts[1:]):
            if a == b:
                raise ValueError(f"centerline has repeated consecutive vertex {a}")
        object.__setattr__(self, "vertices", verts)

    def reversed(self) -> "Centerline":
        return Centerline(tuple(reversed(self.vertices)))
