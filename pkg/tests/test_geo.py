import math
import random

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import LineString, Polygon

from riverfuse.geo import (DegenerateGeometryError, GeoPolygon, LocalFrame, RectIndex, bbox_of, bboxes_intersect,
                           convex_clip, geo_to_pixel, local_distance_m, obb_pixel_corners, obb_to_polygon,
                           pixel_to_geo, point_in_polygon, polygon_intersects_polyline, rotated_iou,
                           segments_intersect)

from .conftest import box_poly, make_det, make_scene, rect

boxes = st.tuples(
    st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 4), st.floats(0.1, 4), st.floats(-math.pi, math.pi)
)


def test_polygon_normalizes_to_ccw():
    cw = GeoPolygon(((0, 0), (0, 1), (1, 1), (1, 0)))
    assert cw.area == pytest.approx(1.0)
    assert cw.ring[0] == (0, 0)
    assert cw.is_convex()


def test_polygon_drops_closing_vertex():
    p = GeoPolygon(((0, 0), (1, 0), (1, 1), (0, 0)))
    assert len(p.ring) == 3


def test_degenerate_polygon_rejected():
    with pytest.raises(DegenerateGeometryError):
        GeoPolygon(((0, 0), (1, 1)))


def test_geojson_round_trip():
    p = rect(0, 0, 2, 1)
    assert GeoPolygon.from_geojson(p.to_geojson()) == p


def test_pixel_geo_round_trip():
    scene = make_scene()
    for col, row in ((0, 0), (123.5, 456.25), (999, 1)):
        lon, lat = pixel_to_geo(scene, col, row)
        c2, r2 = geo_to_pixel(scene, lon, lat)
        assert c2 == pytest.approx(col, abs=1e-6)
        assert r2 == pytest.approx(row, abs=1e-6)


def test_obb_corner_order_and_extent():
    d = make_det("a", 10, 20, w=8, h=2, angle=math.pi / 2)
    corners = obb_pixel_corners(d.obb)
    assert corners[0] == pytest.approx((11, 16))
    assert corners[2] == pytest.approx((9, 24))


def test_obb_to_polygon_checks_scene():
    scene = make_scene("S1")
    with pytest.raises(ValueError):
        obb_to_polygon(scene, make_det("a", 10, 10, scene_id="S2"))


def test_obb_to_polygon_area_matches_pixel_area():
    scene = make_scene()
    poly = obb_to_polygon(scene, make_det("a", 100, 100, w=20, h=6, angle=0.3))
    px = scene.geotransform[1]
    assert poly.area == pytest.approx(120 * px * px, rel=1e-9)


def test_offset_unit_squares_iou_is_one_third():
    assert rotated_iou(rect(0, 0, 1, 1), rect(0.5, 0, 1.5, 1)) == pytest.approx(1 / 3, abs=1e-12)


def test_disjoint_and_touching_iou_zero():
    assert rotated_iou(rect(0, 0, 1, 1), rect(2, 0, 3, 1)) == 0.0
    assert rotated_iou(rect(0, 0, 1, 1), rect(1, 0, 2, 1)) == 0.0


@settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_iou_matches_shapely(a, b):
    pa, pb = box_poly(*a), box_poly(*b)
    sa, sb = Polygon(pa.ring), Polygon(pb.ring)
    union = sa.union(sb).area
    expected = sa.intersection(sb).area / union if union else 0.0
    assert rotated_iou(pa, pb) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    pa, pb = box_poly(*a), box_poly(*b)
    v = rotated_iou(pa, pb)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(rotated_iou(pb, pa), abs=1e-12)
    assert rotated_iou(pa, pa) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_clip_is_convex_and_contained(a, b):
    pa, pb = box_poly(*a), box_poly(*b)
    out = convex_clip(pa, pb)
    if out is None:
        return
    assert out.is_convex()
    for p in out.ring:
        for poly in (pa, pb):
            # contained up to the clipping tolerance
            assert Polygon(poly.ring).buffer(1e-9).contains(shapely.Point(p))


def test_point_in_polygon_boundary_inclusive():
    sq = rect(0, 0, 1, 1)
    assert point_in_polygon(sq, (0.5, 0.5))
    assert point_in_polygon(sq, (0.0, 0.5))
    assert point_in_polygon(sq, (1.0, 1.0))
    assert not point_in_polygon(sq, (1.0 + 1e-9, 0.5))


def test_segments_intersect_cases():
    assert segments_intersect((0, 0), (1, 1), (0, 1), (1, 0))
    assert segments_intersect((0, 0), (1, 0), (1, 0), (2, 0))  # shared endpoint
    assert not segments_intersect((0, 0), (1, 0), (0, 1), (1, 1))
    assert segments_intersect((0, 0), (2, 0), (1, 0), (3, 0))  # collinear overlap


def test_polyline_crossing_without_vertex_inside():
    sq = rect(0, 0, 1, 1)
    assert polygon_intersects_polyline(sq, [(-1, 0.5), (2, 0.5)])
    assert polygon_intersects_polyline(sq, [(0.5, 0.5)])
    assert not polygon_intersects_polyline(sq, [(-1, -1), (-1, 2)])


def test_polygon_polyline_matches_shapely():
    rng = random.Random(3)
    for _ in range(500):
        poly = box_poly(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.2, 2), rng.uniform(0.2, 2),
                        rng.uniform(-3, 3))
        line = [(rng.uniform(-4, 4), rng.uniform(-4, 4)) for _ in range(rng.randint(1, 5))]
        geom = shapely.Point(line[0]) if len(line) == 1 else LineString(line)
        assert polygon_intersects_polyline(poly, line) == Polygon(poly.ring).intersects(geom)


def test_local_frame_distance():
    f = LocalFrame(-91.0, 30.0)
    d = local_distance_m(f, (-91.0, 30.0), (-91.0, 30.001))
    assert d == pytest.approx(111.32, rel=1e-9)
    x, y = f.to_xy((-90.99, 30.01))
    assert f.to_lonlat(x, y) == pytest.approx((-90.99, 30.01))


def test_local_frame_rejects_poles():
    with pytest.raises(ValueError):
        LocalFrame(0.0, 89.5)


def _brute(items, q):
    return [i for i, bb in items if bboxes_intersect(bb, q)]


def test_rect_index_equals_brute_force_over_1000_polygons():
    rng = random.Random(11)
    items = []
    for i in range(1000):
        poly = box_poly(rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(0.1, 5), rng.uniform(0.1, 5),
                        rng.uniform(-3, 3))
        items.append((i, poly.bbox))
    idx = RectIndex(items)
    assert len(idx) == 1000
    for _ in range(100):
        x, y = rng.uniform(-5, 100), rng.uniform(-5, 100)
        q = (x, y, x + rng.uniform(0, 20), y + rng.uniform(0, 20))
        assert idx.query(q) == _brute(items, q)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 10), st.floats(0, 10)),
                max_size=60),
       st.tuples(st.floats(-60, 60), st.floats(-60, 60), st.floats(0, 30), st.floats(0, 30)),
       st.integers(2, 8))
def test_rect_index_superset_property(raw, q, cap):
    items = [(i, (x, y, x + w, y + h)) for i, (x, y, w, h) in enumerate(raw)]
    qb = (q[0], q[1], q[0] + q[2], q[1] + q[3])
    got = RectIndex(items, node_capacity=cap).query(qb)
    assert got == _brute(items, qb)


def test_rect_index_empty():
    assert RectIndex([]).query((0, 0, 1, 1)) == []


def test_bbox_of():
    assert bbox_of([(1, 2), (-1, 5), (0, 0)]) == (-1, 0, 1, 5)


def test_iou_monte_carlo_spot_check():
    rng = np.random.default_rng(0)
    a, b = box_poly(0, 0, 2, 1, 0.4), box_poly(0.5, 0.2, 1.5, 1.5, -0.7)
    pts = rng.uniform(-2, 2, size=(200_000, 2))
    ina = shapely.contains_xy(Polygon(a.ring), pts[:, 0], pts[:, 1])
    inb = shapely.contains_xy(Polygon(b.ring), pts[:, 0], pts[:, 1])
    mc = np.sum(ina & inb) / np.sum(ina | inb)
    assert rotated_iou(a, b) == pytest.approx(mc, abs=5e-3)


def test_affine_examples():
    from riverfuse.core import SceneMeta
    ident = SceneMeta("I", 0, ((0, 0), (100, 0), (100, 100)), (0, 1, 0, 0, 0, 1), 100, 100)
    assert pixel_to_geo(ident, 10, 20) == (10, 20)
    s = SceneMeta("A", 0, ((-91, 30), (-90.9, 30), (-90.9, 29.9)), (-91.0, 1e-4, 0, 30.0, 0, -1e-4), 1000, 1000)
    lon, lat = pixel_to_geo(s, 100, 50)
    assert (lon, lat) == pytest.approx((-90.99, 29.995), abs=1e-12)
    col, row = geo_to_pixel(s, lon, lat)
    assert abs(col - 100) <= 1e-9 and abs(row - 50) <= 1e-9


def test_obb_corner_example_and_quarter_turn():
    from riverfuse.core import OrientedBox
    assert obb_pixel_corners(OrientedBox(5, 5, 2, 4, 0.0)) == [(4, 3), (6, 3), (6, 7), (4, 7)]
    turned = obb_pixel_corners(OrientedBox(5, 5, 2, 4, math.pi / 2))
    xs, ys = [p[0] for p in turned], [p[1] for p in turned]
    assert max(xs) - min(xs) == pytest.approx(4) and max(ys) - min(ys) == pytest.approx(2)


def test_random_obb_area_is_box_area_times_determinant():
    rng = random.Random(8)
    for _ in range(200):
        gt = (-91.0, rng.uniform(1e-5, 1e-4), rng.uniform(-1e-5, 1e-5), 30.0, rng.uniform(-1e-5, 1e-5),
              -rng.uniform(1e-5, 1e-4))
        from riverfuse.core import SceneMeta
        scene = SceneMeta("S1", 0, ((-91, 30), (-90.9, 30), (-90.9, 29.9)), gt, 1000, 1000)
        w, h = rng.uniform(1, 50), rng.uniform(1, 50)
        d = make_det("a", rng.uniform(0, 1000), rng.uniform(0, 1000), w=w, h=h, angle=rng.uniform(-4, 4))
        assert obb_to_polygon(scene, d).area == pytest.approx(w * h * abs(scene.determinant), rel=1e-9)


def test_clip_examples():
    sq = rect(0, 0, 1, 1)
    assert convex_clip(sq, sq).area == pytest.approx(1.0)
    assert set(convex_clip(sq, sq).ring) == set(sq.ring)
    assert convex_clip(sq, rect(2, 2, 3, 3)) is None
    half = convex_clip(sq, rect(0.5, 0, 1.5, 1))
    assert half.area == pytest.approx(0.5, abs=1e-12)
    assert half.bbox == pytest.approx((0.5, 0, 1, 1))


def test_single_point_on_boundary_intersects():
    assert polygon_intersects_polyline(rect(0, 0, 1, 1), [(1.0, 0.3)])


def test_distance_examples():
    f = LocalFrame(-91.0, 30.0)
    assert local_distance_m(f, (-91.0, 30.0), (-91.0, 30.0)) == 0.0
    assert local_distance_m(f, (-91.0, 30.0), (-90.999, 30.0)) == pytest.approx(96.41, abs=0.05)
