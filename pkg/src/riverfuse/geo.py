"""Planar geometry on lon/lat (or pixel) coordinates.

Topological predicates run directly on the input coordinates; metric
quantities go through an equirectangular :class:`LocalFrame`, which is
accurate to well under a metre over a ~1 degree region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .core import Detection, Point, SceneMeta, normalize_ring, ring_signed_area

EPS = 1e-12  # on-edge tolerance, in coordinate units (degrees for geographic input)
M_PER_DEG_LAT = 111_320.0

BBox = Tuple[float, float, float, float]  # min_x, min_y, max_x, max_y


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeoPolygon:
    """A simple polygon ring, stored counter-clockwise and implicitly closed."""

    ring: Tuple[Point, ...]

    def __post_init__(self):
        ring = normalize_ring(self.ring)
        if len(ring) < 3:
            raise DegenerateGeometryError("polygon needs at least 3 distinct vertices")
        if ring_signed_area(ring) < 0:
            ring = (ring[0],) + tuple(reversed(ring[1:]))
        object.__setattr__(self, "ring", ring)

    @property
    def area(self) -> float:
        return abs(ring_signed_area(self.ring))

    @property
    def bbox(self) -> BBox:
        return bbox_of(self.ring)

    @property
    def centroid(self) -> Point:
        """Vertex mean (not the area centroid)."""
        n = len(self.ring)
        return (sum(p[0] for p in self.ring) / n, sum(p[1] for p in self.ring) / n)

    def is_convex(self) -> bool:
        n = len(self.ring)
        for i in range(n):
            if _cross(self.ring[i], self.ring[(i + 1) % n], self.ring[(i + 2) % n]) < -EPS:
                return False
        return True

    def to_geojson(self) -> dict:
        coords = [list(p) for p in self.ring]
        coords.append(list(self.ring[0]))
        return {"type": "Polygon", "coordinates": [coords]}

    @classmethod
    def from_geojson(cls, geom: dict) -> "GeoPolygon":
        if geom.get("type") != "Polygon":
            raise ValueError(f"expected a GeoJSON Polygon, got {geom.get('type')!r}")
        return cls(tuple((float(x), float(y)) for x, y, *_ in geom["coordinates"][0]))


def bbox_of(points: Iterable[Point]) -> BBox:
    xs, ys = zip(*points)
    return (min(xs), min(ys), max(xs), max(ys))


def bboxes_intersect(a: BBox, b: BBox) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


# ---------------------------------------------------------------------------
# affine georeferencing


def pixel_to_geo(scene: SceneMeta, col: float, row: float) -> Point:
    x0, dx_col, dx_row, y0, dy_col, dy_row = scene.geotransform
    return (x0 + dx_col * col + dx_row * row, y0 + dy_col * col + dy_row * row)


def geo_to_pixel(scene: SceneMeta, lon: float, lat: float) -> Tuple[float, float]:
    x0, a, b, y0, c, d = scene.geotransform
    det = a * d - b * c
    u, v = lon - x0, lat - y0
    return ((d * u - b * v) / det, (a * v - c * u) / det)


def obb_pixel_corners(obb) -> List[Tuple[float, float]]:
    """The four OBB corners in pixel space, in rotation order starting at (-w/2, -h/2)."""
    ca, sa = math.cos(obb.angle), math.sin(obb.angle)
    hw, hh = obb.width / 2.0, obb.height / 2.0
    out = []
    for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        dx, dy = sx * hw, sy * hh
        out.append((obb.center_col + dx * ca - dy * sa, obb.center_row + dx * sa + dy * ca))
    return out


def obb_pixel_polygon(d: Detection) -> GeoPolygon:
    """The detection box as a polygon in pixel coordinates."""
    try:
        return GeoPolygon(tuple(obb_pixel_corners(d.obb)))
    except DegenerateGeometryError:
        raise DegenerateGeometryError(f"detection {d.detection_id}: degenerate box") from None


def obb_to_polygon(scene: SceneMeta, d: Detection) -> GeoPolygon:
    if d.scene_id != scene.scene_id:
        raise ValueError(f"detection {d.detection_id} belongs to scene {d.scene_id}, not {scene.scene_id}")
    corners = [pixel_to_geo(scene, c, r) for c, r in obb_pixel_corners(d.obb)]
    if ring_signed_area(corners) == 0.0:
        raise DegenerateGeometryError(f"detection {d.detection_id}: box has zero area after transform")
    try:
        return GeoPolygon(tuple(corners))
    except DegenerateGeometryError:
        raise DegenerateGeometryError(f"detection {d.detection_id}: degenerate box") from None


# ---------------------------------------------------------------------------
# clipping and overlap


def convex_clip(subject: GeoPolygon, clip: GeoPolygon) -> Optional[GeoPolygon]:
    """Sutherland-Hodgman intersection of two convex polygons; None when empty."""
    output = list(subject.ring)
    clip_ring = clip.ring
    n = len(clip_ring)
    for i in range(n):
        if not output:
            break
        a, b = clip_ring[i], clip_ring[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        elen = math.hypot(ex, ey)

        def side(p):
            # signed distance to the clip edge line, positive inside (left of a CCW edge)
            return (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / elen

        inp, output = output, []
        prev = inp[-1]
        d_prev = side(prev)
        for cur in inp:
            d_cur = side(cur)
            if d_cur >= -EPS:
                if d_prev < -EPS:
                    output.append(_lerp(prev, cur, d_prev, d_cur))
                output.append(cur)
            elif d_prev >= -EPS:
                output.append(_lerp(prev, cur, d_prev, d_cur))
            prev, d_prev = cur, d_cur
    ring = normalize_ring(output)
    if len(ring) < 3 or abs(ring_signed_area(ring)) <= EPS * EPS:
        return None
    try:
        return GeoPolygon(ring)
    except DegenerateGeometryError:
        return None


def _lerp(p: Point, q: Point, dp: float, dq: float) -> Point:
    t = dp / (dp - dq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def rotated_iou(a: GeoPolygon, b: GeoPolygon) -> float:
    if not bboxes_intersect(a.bbox, b.bbox):
        return 0.0
    inter_poly = convex_clip(a, b)
    inter = inter_poly.area if inter_poly is not None else 0.0
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


# ---------------------------------------------------------------------------
# polygon / polyline predicates


def point_in_polygon(poly: GeoPolygon, p: Point) -> bool:
    """Boundary-inclusive point-in-polygon (even-odd rule plus an on-edge test)."""
    ring = poly.ring
    n = len(ring)
    x, y = p
    inside = False
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        if _point_on_segment(p, a, b):
            return True
        if (a[1] > y) != (b[1] > y):
            xi = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x < xi:
                inside = not inside
    return inside


def _point_on_segment(p: Point, a: Point, b: Point) -> bool:
    ex, ey = b[0] - a[0], b[1] - a[1]
    elen = math.hypot(ex, ey)
    if elen == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1]) <= EPS
    if abs(ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / elen > EPS:
        return False
    t = ((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / (elen * elen)
    return -EPS / elen <= t <= 1.0 + EPS / elen


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """Closed-segment intersection (touching counts)."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    return (_point_on_segment(p1, q1, q2) or _point_on_segment(p2, q1, q2)
            or _point_on_segment(q1, p1, p2) or _point_on_segment(q2, p1, p2))


def polygon_intersects_polyline(poly: GeoPolygon, line: Sequence[Point]) -> bool:
    if not line:
        return False
    if not bboxes_intersect(poly.bbox, bbox_of(line)):
        return False
    for p in line:
        if point_in_polygon(poly, p):
            return True
    ring = poly.ring
    n = len(ring)
    for s0, s1 in zip(line, line[1:]):
        if not bboxes_intersect(poly.bbox, bbox_of((s0, s1))):
            continue
        for i in range(n):
            if segments_intersect(s0, s1, ring[i], ring[(i + 1) % n]):
                return True
    return False


# ---------------------------------------------------------------------------
# metric frame


@dataclass(frozen=True)
class LocalFrame:
    lon0: float
    lat0: float

    def __post_init__(self):
        if not abs(self.lat0) < 89.0:
            raise ValueError(f"local frame origin latitude must satisfy |lat0| < 89, got {self.lat0}")

    @property
    def m_per_deg_lat(self) -> float:
        return M_PER_DEG_LAT

    @property
    def m_per_deg_lon(self) -> float:
        return M_PER_DEG_LAT * math.cos(math.radians(self.lat0))

    def to_xy(self, p: Point) -> Tuple[float, float]:
        return ((p[0] - self.lon0) * self.m_per_deg_lon, (p[1] - self.lat0) * self.m_per_deg_lat)

    def to_lonlat(self, x: float, y: float) -> Point:
        return (self.lon0 + x / self.m_per_deg_lon, self.lat0 + y / self.m_per_deg_lat)


def local_distance_m(frame: LocalFrame, p: Point, q: Point) -> float:
    px, py = frame.to_xy(p)
    qx, qy = frame.to_xy(q)
    return math.hypot(px - qx, py - qy)


# ---------------------------------------------------------------------------
# static rectangle tree


class RectIndex:
    """Sort-Tile-Recursive packed R-tree over bounding boxes.

    Built once from all items; no insertion afterwards, so concurrent
    queries are safe.
    """

    def __init__(self, items: Iterable[Tuple[object, BBox]], node_capacity: int = 16):
        if node_capacity < 2:
            raise ValueError("node_capacity must be >= 2")
        self._cap = node_capacity
        # leaf entries: (bbox, order, id)
        entries = [(tuple(map(float, bb)), i, ident) for i, (ident, bb) in enumerate(items)]
        self._size = len(entries)
        self._root = self._build(entries, leaf=True) if entries else None

    def __len__(self) -> int:
        return self._size

    def _build(self, entries, leaf):
        nodes = self._pack(entries, leaf)
        while len(nodes) > 1:
            nodes = self._pack(nodes, leaf=False)
        return nodes[0]

    def _pack(self, entries, leaf):
        cap = self._cap
        n_pages = math.ceil(len(entries) / cap)
        n_slices = max(1, math.ceil(math.sqrt(n_pages)))
        by_x = sorted(entries, key=lambda e: (e[0][0] + e[0][2], e[1]))
        slice_size = n_slices * cap
        nodes = []
        for s in range(0, len(by_x), slice_size):
            chunk = sorted(by_x[s:s + slice_size], key=lambda e: (e[0][1] + e[0][3], e[1]))
            for k in range(0, len(chunk), cap):
                children = chunk[k:k + cap]
                bb = (min(c[0][0] for c in children), min(c[0][1] for c in children),
                      max(c[0][2] for c in children), max(c[0][3] for c in children))
                order = min(c[1] for c in children)
                nodes.append((bb, order, (leaf, children)))
        return nodes

    def query(self, bbox: BBox) -> list:
        """Ids whose bounding box intersects ``bbox``, in insertion order."""
        if self._root is None:
            return []
        hits = []
        stack = [self._root]
        while stack:
            bb, _, (leaf, children) = stack.pop()
            if not bboxes_intersect(bb, bbox):
                continue
            if leaf:
                hits.extend((c[1], c[2]) for c in children if bboxes_intersect(c[0], bbox))
            else:
                stack.extend(children)
        hits.sort(key=lambda h: h[0])
        return [ident for _, ident in hits]


def linestring_geojson(line: Sequence[Point]) -> dict:
    if len(line) == 1:
        return {"type": "Point", "coordinates": list(line[0])}
    return {"type": "LineString", "coordinates": [list(p) for p in line]}
