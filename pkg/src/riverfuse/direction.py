"""Upstream/downstream reference labels from AIS kinematics, and scoring."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .core import Centerline, Direction, Point, parse_direction
from .geo import LocalFrame

V_MIN_KN = 0.5
ORDER_PROPERTY = "ordered"
ORDER_VALUE = "upstream_to_downstream"

CANONICAL = (Direction.UPSTREAM, Direction.DOWNSTREAM, Direction.STATIONARY)


def _unit(x: float, y: float) -> Tuple[float, float]:
    n = math.hypot(x, y)
    return (x / n, y / n) if n > 0 else (0.0, 0.0)


def downstream_tangent(centerline: Centerline, position: Point) -> Tuple[float, float]:
    """Unit downstream tangent (east, north) at the centerline vertex nearest ``position``."""
    frame = LocalFrame(*position)
    xy = [frame.to_xy(v) for v in centerline.vertices]
    # tie-break on coordinates so that reversing the vertex order picks the same vertex
    k = min(range(len(xy)), key=lambda i: (math.hypot(*xy[i]), centerline.vertices[i]))
    segs = []
    if k > 0:
        segs.append(_unit(xy[k][0] - xy[k - 1][0], xy[k][1] - xy[k - 1][1]))
    if k < len(xy) - 1:
        segs.append(_unit(xy[k + 1][0] - xy[k][0], xy[k + 1][1] - xy[k][1]))
    tx, ty = _unit(sum(s[0] for s in segs), sum(s[1] for s in segs))
    if (tx, ty) == (0.0, 0.0):  # hairpin: the two segments cancel
        tx, ty = segs[-1]
    return tx, ty


def classify_direction(centerline: Centerline, position: Point, sog: float, cog: Optional[float],
                       v_min: float = V_MIN_KN) -> Optional[Direction]:
    """Reference direction label; None when the course is unavailable (unclassifiable)."""
    if sog < v_min:
        return Direction.STATIONARY
    if cog is None:
        return None
    tx, ty = downstream_tangent(centerline, position)
    c = math.radians(cog)
    dot = math.sin(c) * tx + math.cos(c) * ty
    return Direction.DOWNSTREAM if dot > 0 else Direction.UPSTREAM


def classify_link(centerline: Centerline, link, v_min: float = V_MIN_KN) -> Optional[Direction]:
    return classify_direction(centerline, (link.ais_lon, link.ais_lat), link.sog, link.cog, v_min)


@dataclass
class DirectionConfusion:
    labels: Tuple[Direction, ...]
    matrix: List[List[int]]  # rows: truth, columns: prediction

    @property
    def n(self) -> int:
        return sum(map(sum, self.matrix))

    @property
    def per_class_accuracy(self) -> Dict[Direction, Optional[float]]:
        out = {}
        for i, lab in enumerate(self.labels):
            total = sum(self.matrix[i])
            out[lab] = self.matrix[i][i] / total if total else None
        return out

    @property
    def accuracy(self) -> Optional[float]:
        n = self.n
        return sum(self.matrix[i][i] for i in range(len(self.labels))) / n if n else None

    def to_dict(self) -> dict:
        return {
            "labels": [lab.value for lab in self.labels],
            "matrix": self.matrix,
            "per_class_accuracy": {k.value: v for k, v in self.per_class_accuracy.items()},
            "accuracy": self.accuracy,
            "n": self.n,
        }


def direction_confusion(pred: Sequence, truth: Sequence, labels: Optional[Sequence] = None) -> DirectionConfusion:
    """Confusion matrix over direction labels.

    Without ``labels`` the layout is upstream/downstream, widened to include
    stationary when it occurs; empty inputs give an empty matrix.
    """
    if len(pred) != len(truth):
        raise ValueError(f"pred and truth lengths differ: {len(pred)} != {len(truth)}")
    p = [parse_direction(x) for x in pred]
    t = [parse_direction(x) for x in truth]
    if labels is None:
        if not p:
            labs: Tuple[Direction, ...] = ()
        else:
            present = set(p) | set(t)
            labs = tuple(lab for lab in CANONICAL if lab in present or lab is not Direction.STATIONARY)
            labs += tuple(sorted((present - set(CANONICAL)), key=lambda d: d.value))
    else:
        labs = tuple(parse_direction(x) for x in labels)
    pos = {lab: i for i, lab in enumerate(labs)}
    m = [[0] * len(labs) for _ in labs]
    for a, b in zip(t, p):
        if a not in pos or b not in pos:
            raise ValueError(f"label outside the confusion layout: {a.value if a not in pos else b.value}")
        m[pos[a]][pos[b]] += 1
    return DirectionConfusion(labs, m)


def load_centerline(path) -> Centerline:
    with open(path, encoding="utf-8") as fh:
        return centerline_from_geojson(json.load(fh))


def centerline_from_geojson(obj: dict) -> Centerline:
    if obj.get("type") == "FeatureCollection":
        feats = obj.get("features", [])
        if len(feats) != 1:
            raise ValueError("centerline FeatureCollection must hold exactly one feature")
        obj = feats[0]
    if obj.get("type") != "Feature":
        raise ValueError("centerline must be a GeoJSON Feature with an 'ordered' property")
    order = (obj.get("properties") or {}).get(ORDER_PROPERTY)
    if order != ORDER_VALUE:
        raise ValueError(f"centerline property {ORDER_PROPERTY!r} must be {ORDER_VALUE!r}, got {order!r}")
    geom = obj.get("geometry") or {}
    if geom.get("type") != "LineString":
        raise ValueError("centerline geometry must be a LineString")
    return Centerline(tuple((float(x), float(y)) for x, y, *_ in geom["coordinates"]))


def centerline_to_geojson(cl: Centerline) -> dict:
    return {
        "type": "Feature",
        "properties": {ORDER_PROPERTY: ORDER_VALUE},
        "geometry": {"type": "LineString", "coordinates": [list(v) for v in cl.vertices]},
    }
