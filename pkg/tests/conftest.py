import math

import pytest

from riverfuse.core import AisRecord, Detection, OrientedBox, SceneMeta

T0 = 1_700_000_000
LON0, LAT0 = -91.2, 30.5
PX_DEG = 3.0 / 111_320.0  # ~3 m pixels


def make_scene(scene_id="S1", t0=T0, width=1000, height=1000, lon0=LON0, lat0=LAT0, px=PX_DEG):
    gt = (lon0, px, 0.0, lat0, 0.0, -px)
    ring = ((lon0, lat0), (lon0 + width * px, lat0), (lon0 + width * px, lat0 - height * px),
            (lon0, lat0 - height * px))
    return SceneMeta(scene_id, t0, ring, gt, width, height)


def make_det(det_id, col, row, w=20.0, h=6.0, angle=0.0, klass="tugboat", scene_id="S1", **kw):
    return Detection(det_id, scene_id, OrientedBox(col, row, w, h, angle), klass, **kw)


def make_rec(mmsi, ts, lon, lat, sog=5.0, cog=90.0, **kw):
    return AisRecord(mmsi, ts, lat, lon, sog, cog, **kw)


def scene_point(scene, col, row):
    gt = scene.geotransform
    return (gt[0] + col * gt[1] + row * gt[2], gt[3] + col * gt[4] + row * gt[5])


@pytest.fixture
def scene():
    return make_scene()


def rect(x0, y0, x1, y1):
    from riverfuse.geo import GeoPolygon
    return GeoPolygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def box_poly(cx, cy, w, h, a):
    from riverfuse.geo import GeoPolygon
    c, s = math.cos(a), math.sin(a)
    pts = []
    for dx, dy in ((-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)):
        pts.append((cx + dx * c - dy * s, cy + dx * s + dy * c))
    return GeoPolygon(tuple(pts))


def pytest_terminal_summary(terminalreporter):
    import sys
    test_acceptance = sys.modules.get(f"{__package__}.test_acceptance")
    if test_acceptance is None:
        return
    results = test_acceptance.RESULTS
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(test_acceptance.NAMES):
        if n in results:
            ok, detail = results[n]
            status = "PASS" if ok else "FAIL"
        else:
            status, detail = "NOT RUN", ""
        terminalreporter.write_line(f"[{status}] {n:2d}. {test_acceptance.NAMES[n]}: {detail}")
