"""Fleet snapshots (tows, composition, dark count) and the infrastructure inventory."""

from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import (INFRASTRUCTURE, Cover, Detection, Direction, OpStatus, Point, SceneMeta, VesselClass)
from .fuse import FusionReport
from .geo import GeoPolygon, LocalFrame, local_distance_m, obb_to_polygon

NEAR_DUPLICATE_M = 50.0


class TowError(ValueError):
    pass


@dataclass(frozen=True)
class TowRecord:
    tow_id: str
    scene_id: str
    tug_detection_id: Optional[str]
    barge_count: int
    covered_count: int
    uncovered_count: int
    op_status: OpStatus
    linked_mmsi: Optional[str] = None
    member_ids: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "tow_id": self.tow_id, "scene_id": self.scene_id,
            "tug_detection_id": self.tug_detection_id, "barge_count": self.barge_count,
            "covered_count": self.covered_count, "uncovered_count": self.uncovered_count,
            "op_status": self.op_status.value, "linked_mmsi": self.linked_mmsi,
            "member_ids": list(self.member_ids),
        }


def _tow_status(members: Sequence[Detection], has_tug: bool) -> OpStatus:
    if not has_tug:
        return OpStatus.MOORED
    votes = Counter(m.op_status for m in members if m.op_status is not OpStatus.NOT_APPLICABLE)
    if not votes:
        return OpStatus.STAGED
    best = max(votes.values())
    winners = [s for s, n in votes.items() if n == best]
    if len(winners) > 1:
        return OpStatus.STAGED
    return winners[0]


def build_tows(detections: Iterable[Detection], report: Optional[FusionReport] = None) -> List[TowRecord]:
    """One TowRecord per distinct tow_id, sorted by tow_id."""
    groups: Dict[str, List[Detection]] = defaultdict(list)
    for d in detections:
        if d.tow_id is None:
            continue
        if d.klass in INFRASTRUCTURE:
            raise TowError(f"tow {d.tow_id} contains infrastructure detection {d.detection_id} ({d.klass.value})")
        groups[d.tow_id].append(d)
    linked = {lp.detection_id: lp.mmsi for lp in report.links} if report is not None else {}

    tows = []
    for tow_id in sorted(groups):
        members = sorted(groups[tow_id], key=lambda d: d.detection_id)
        scenes = {m.scene_id for m in members}
        if len(scenes) > 1:
            raise TowError(f"tow {tow_id} spans scenes {sorted(scenes)}")
        tugs = [m for m in members if m.klass is VesselClass.TUGBOAT]
        barges = [m for m in members if m.is_barge]
        tug_id = tugs[0].detection_id if tugs else None
        tows.append(TowRecord(
            tow_id=tow_id,
            scene_id=members[0].scene_id,
            tug_detection_id=tug_id,
            barge_count=len(barges),
            covered_count=sum(1 for b in barges if b.cover is Cover.COVERED),
            uncovered_count=sum(1 for b in barges if b.cover is Cover.UNCOVERED),
            op_status=_tow_status(members, bool(tugs)),
            linked_mmsi=linked.get(tug_id) if tug_id else None,
            member_ids=tuple(m.detection_id for m in members),
        ))
    return tows


# ---------------------------------------------------------------------------
# snapshot

_CLASS_KEYS = [c.value for c in VesselClass]
_COVER_KEYS = [Cover.COVERED.value, Cover.UNCOVERED.value]
_STATUS_KEYS = [OpStatus.STAGED.value, OpStatus.IN_MOTION.value, OpStatus.MOORED.value]
_DIRECTION_KEYS = [Direction.UPSTREAM.value, Direction.DOWNSTREAM.value, Direction.STATIONARY.value]


def _zeros(keys) -> Dict[str, int]:
    return {k: 0 for k in keys}


@dataclass
class FleetSnapshot:
    by_class: Dict[str, int] = field(default_factory=lambda: _zeros(_CLASS_KEYS))
    by_cover: Dict[str, int] = field(default_factory=lambda: _zeros(_COVER_KEYS))
    tows_by_status: Dict[str, int] = field(default_factory=lambda: _zeros(_STATUS_KEYS))
    vessels_by_direction: Dict[str, int] = field(default_factory=lambda: _zeros(_DIRECTION_KEYS))
    n_tows: int = 0
    n_barges_in_tows: int = 0
    n_linked: int = 0
    n_dark: int = 0

    def __add__(self, other: "FleetSnapshot") -> "FleetSnapshot":
        out = FleetSnapshot()
        for name in ("by_class", "by_cover", "tows_by_status", "vessels_by_direction"):
            a, b = getattr(self, name), getattr(other, name)
            setattr(out, name, {k: a.get(k, 0) + b.get(k, 0) for k in dict.fromkeys(list(a) + list(b))})
        for name in ("n_tows", "n_barges_in_tows", "n_linked", "n_dark"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out

    def to_dict(self) -> dict:
        return {
            "by_class": dict(self.by_class),
            "by_cover": dict(self.by_cover),
            "tows_by_status": dict(self.tows_by_status),
            "vessels_by_direction": dict(self.vessels_by_direction),
            "n_tows": self.n_tows,
            "n_barges_in_tows": self.n_barges_in_tows,
            "n_linked": self.n_linked,
            "n_dark": self.n_dark,
        }


def fleet_snapshot(detections: Iterable[Detection], tows: Iterable[TowRecord], links: Iterable = (),
                   dark: Iterable[str] = ()) -> FleetSnapshot:
    """Composition counts for one scene (or any detection set).

    Class counts cover every detection; cover counts cover barges; operational
    status is tallied per tow; direction per self-propelled vessel.
    """
    snap = FleetSnapshot()
    for d in detections:
        snap.by_class[d.klass.value] += 1
        if d.is_barge and d.cover is not Cover.NOT_APPLICABLE:
            snap.by_cover[d.cover.value] += 1
        if d.is_self_propelled and d.direction_pred.value in snap.vessels_by_direction:
            snap.vessels_by_direction[d.direction_pred.value] += 1
    for t in tows:
        snap.n_tows += 1
        snap.n_barges_in_tows += t.barge_count
        snap.tows_by_status[t.op_status.value] += 1
    snap.n_linked = sum(1 for _ in links)
    snap.n_dark = sum(1 for _ in dark)
    return snap


def snapshot_csv(per_scene: Dict[str, FleetSnapshot], total: FleetSnapshot) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ([f"class:{k}" for k in _CLASS_KEYS] + [f"cover:{k}" for k in _COVER_KEYS]
            + [f"tow_status:{k}" for k in _STATUS_KEYS] + [f"direction:{k}" for k in _DIRECTION_KEYS]
            + ["n_tows", "n_barges_in_tows", "n_linked", "n_dark"])
    w.writerow(["scene_id"] + cols)
    for sid, snap in list(per_scene.items()) + [("TOTAL", total)]:
        vals = ([snap.by_class[k] for k in _CLASS_KEYS] + [snap.by_cover[k] for k in _COVER_KEYS]
                + [snap.tows_by_status[k] for k in _STATUS_KEYS]
                + [snap.vessels_by_direction[k] for k in _DIRECTION_KEYS]
                + [snap.n_tows, snap.n_barges_in_tows, snap.n_linked, snap.n_dark])
        w.writerow([sid] + vals)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# infrastructure


@dataclass(frozen=True)
class InfrastructureRecord:
    detection_id: str
    kind: VesselClass
    centroid: Point
    footprint: GeoPolygon
    scene_id: str
    near_duplicates: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in INFRASTRUCTURE:
            raise ValueError(f"{self.kind} is not an infrastructure class")

    def to_feature(self) -> dict:
        return {
            "type": "Feature",
            "id": self.detection_id,
            "geometry": self.footprint.to_geojson(),
            "properties": {
                "detection_id": self.detection_id,
                "kind": self.kind.value,
                "scene_id": self.scene_id,
                "centroid": list(self.centroid),
                "near_duplicates": list(self.near_duplicates),
            },
        }


def build_infrastructure(detections: Iterable[Detection], scene: SceneMeta,
                         near_m: float = NEAR_DUPLICATE_M) -> List[InfrastructureRecord]:
    """One record per infrastructure detection; pairs closer than ``near_m`` are flagged, never merged."""
    items = []
    for d in detections:
        if d.klass not in INFRASTRUCTURE:
            continue
        poly = obb_to_polygon(scene, d)
        items.append((d, poly, poly.centroid))
    flags: Dict[str, List[str]] = defaultdict(list)
    for i in range(len(items)):
        frame = LocalFrame(*items[i][2])
        for j in range(i + 1, len(items)):
            if local_distance_m(frame, items[i][2], items[j][2]) <= near_m:
                flags[items[i][0].detection_id].append(items[j][0].detection_id)
                flags[items[j][0].detection_id].append(items[i][0].detection_id)
    return [InfrastructureRecord(d.detection_id, d.klass, c, poly, d.scene_id,
                                 tuple(sorted(flags.get(d.detection_id, ()))))
            for d, poly, c in items]


def infrastructure_geojson(records: Iterable[InfrastructureRecord]) -> dict:
    return {"type": "FeatureCollection", "features": [r.to_feature() for r in records]}
