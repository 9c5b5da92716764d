"""File formats: scene sidecars, per-scene detection GeoJSON, fusion reports.

Angles are degrees in files and radians in memory; this module is the only
place that converts.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import List, Optional, Tuple

from .core import Detection, OrientedBox, SceneMeta, format_timestamp, parse_timestamp
from .fuse import FusionReport
from .geo import GeoPolygon, geo_to_pixel


class FormatError(ValueError):
    pass


def scene_to_dict(scene: SceneMeta) -> dict:
    ring = [list(p) for p in scene.footprint] + [list(scene.footprint[0])]
    return {
        "scene_id": scene.scene_id,
        "acquired_at": format_timestamp(scene.acquired_at),
        "footprint": {"type": "Polygon", "coordinates": [ring]},
        "geotransform": list(scene.geotransform),
        "width_px": scene.width_px,
        "height_px": scene.height_px,
    }


def scene_from_dict(d: dict, scene_id: Optional[str] = None) -> SceneMeta:
    sid = d.get("scene_id", scene_id)
    if sid is None:
        raise FormatError("scene metadata lacks scene_id")
    if "geotransform" not in d or d["geotransform"] is None:
        raise FormatError(f"scene {sid}: geotransform absent")
    gt = d["geotransform"]
    try:
        gt = tuple(float(v) for v in gt)
    except (TypeError, ValueError):
        raise FormatError(f"scene {sid}: geotransform unparsable") from None
    if len(gt) != 6:
        raise FormatError(f"scene {sid}: geotransform unparsable (need 6 coefficients, got {len(gt)})")
    try:
        fp = d["footprint"]
        ring = fp["coordinates"][0] if isinstance(fp, dict) else fp
        return SceneMeta(
            scene_id=sid,
            acquired_at=parse_timestamp(str(d["acquired_at"])),
            footprint=tuple((float(x), float(y)) for x, y, *_ in ring),
            geotransform=gt,
            width_px=int(d["width_px"]),
            height_px=int(d["height_px"]),
        )
    except KeyError as exc:
        raise FormatError(f"scene {sid}: missing field {exc.args[0]}") from None
    except ValueError as exc:
        raise FormatError(f"scene {sid}: {exc}") from None


def _fmt_float(v: float) -> float:
    # trims binary noise so files are stable across platforms
    return float(f"{v:.10g}")


def detection_to_feature(d: Detection) -> dict:
    return {
        "type": "Feature",
        "id": d.detection_id,
        "geometry": None,
        "properties": {
            "detection_id": d.detection_id,
            "center_col": d.obb.center_col,
            "center_row": d.obb.center_row,
            "width_px": d.obb.width,
            "height_px": d.obb.height,
            "angle_deg": _fmt_float(math.degrees(d.obb.angle)),
            "klass": d.klass.value,
            "cover": d.cover.value,
            "op_status": d.op_status.value,
            "direction_pred": d.direction_pred.value,
            "confidence": d.confidence,
            "tow_id": d.tow_id,
        },
    }


def obb_from_polygon(scene: SceneMeta, poly: GeoPolygon) -> OrientedBox:
    """Recover a pixel-space OBB from a 4-corner geographic rectangle."""
    if len(poly.ring) != 4:
        raise FormatError("polygon detections must have exactly 4 corners")
    px = [geo_to_pixel(scene, *p) for p in poly.ring]
    cc = sum(p[0] for p in px) / 4.0
    cr = sum(p[1] for p in px) / 4.0
    e0 = (px[1][0] - px[0][0], px[1][1] - px[0][1])
    e1 = (px[2][0] - px[1][0], px[2][1] - px[1][1])
    return OrientedBox(cc, cr, math.hypot(*e0), math.hypot(*e1), math.atan2(e0[1], e0[0]))


def detection_from_feature(feat: dict, scene: SceneMeta) -> Detection:
    props = feat.get("properties") or {}
    det_id = str(props.get("detection_id", feat.get("id", "")))
    if not det_id:
        raise FormatError("detection feature lacks detection_id")
    try:
        if all(k in props for k in ("center_col", "center_row", "width_px", "height_px")):
            obb = OrientedBox(float(props["center_col"]), float(props["center_row"]),
                              float(props["width_px"]), float(props["height_px"]),
                              math.radians(float(props.get("angle_deg", 0.0))))
        elif feat.get("geometry"):
            obb = obb_from_polygon(scene, GeoPolygon.from_geojson(feat["geometry"]))
        else:
            raise FormatError(f"detection {det_id}: needs OBB fields or a polygon geometry")
        return Detection(
            detection_id=det_id,
            scene_id=str(props.get("scene_id", scene.scene_id)),
            obb=obb,
            klass=props["klass"],
            cover=props.get("cover", "not_applicable"),
            op_status=props.get("op_status", "not_applicable"),
            direction_pred=props.get("direction_pred", "not_applicable"),
            confidence=float(props.get("confidence", 1.0)),
            tow_id=props.get("tow_id"),
        )
    except KeyError as exc:
        raise FormatError(f"detection {det_id}: missing property {exc.args[0]}") from None


def detections_to_geojson(scene: SceneMeta, detections: List[Detection]) -> dict:
    return {
        "type": "FeatureCollection",
        "scene": scene_to_dict(scene),
        "features": [detection_to_feature(d) for d in detections],
    }


def detections_from_geojson(obj: dict) -> Tuple[SceneMeta, List[Detection]]:
    if obj.get("type") != "FeatureCollection":
        raise FormatError("detection file must be a GeoJSON FeatureCollection")
    if "scene" not in obj:
        raise FormatError("detection file lacks its 'scene' metadata block")
    scene = scene_from_dict(obj["scene"])
    return scene, [detection_from_feature(f, scene) for f in obj.get("features", [])]


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def read_detection_file(path) -> Tuple[SceneMeta, List[Detection]]:
    return detections_from_geojson(load_json(path))


def write_detection_file(path, scene: SceneMeta, detections: List[Detection]) -> None:
    dump_json(detections_to_geojson(scene, detections), path)


def read_report(path) -> FusionReport:
    return FusionReport.from_dict(load_json(path))


def write_report(path, report: FusionReport) -> None:
    dump_json(report.to_dict(), path)
