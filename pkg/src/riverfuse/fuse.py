"""Per-scene fusion of detections with AIS trajectories.

Pipeline: temporal_filter -> build_trajectories -> candidate_links ->
assign_links. Each candidate needs both spatial overlap (the detection
polygon touches the trajectory polyline) and temporal alignment (the
trajectory was already cut to the scene window).
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .ais import DEFAULT_HALF_WINDOW_S, build_trajectories, temporal_filter
from .core import AisRecord, Detection, SceneMeta, Trajectory
from .geo import LocalFrame, RectIndex, bbox_of, local_distance_m, obb_to_polygon, polygon_intersects_polyline


class SceneMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    detection_id: str
    mmsi: str
    dt_s: int
    dist_m: float
    point: AisRecord  # trajectory point nearest in time to acquisition


@dataclass(frozen=True)
class LinkedPair:
    detection_id: str
    mmsi: str
    dt_s: int
    dist_m: float
    vessel_name: Optional[str]
    sog: float
    cog: Optional[float]
    ais_lon: float
    ais_lat: float
    direction: Optional[str] = None  # AIS-derived reference label, when a centerline is supplied

    @classmethod
    def from_candidate(cls, c: Candidate) -> "LinkedPair":
        p = c.point
        return cls(c.detection_id, c.mmsi, c.dt_s, c.dist_m, p.vessel_name, p.sog, p.cog, p.lon, p.lat)


@dataclass
class FusionReport:
    scene_id: str
    acquired_at: int
    links: List[LinkedPair]
    dark: List[str]
    n_detections: int
    n_vessel_detections: int
    unmatched_mmsi: List[str] = field(default_factory=list)
    half_window_s: float = DEFAULT_HALF_WINDOW_S

    @property
    def n_linked(self) -> int:
        return len(self.links)

    @property
    def linkage_rate(self) -> Optional[float]:
        if self.n_vessel_detections == 0:
            return None
        return self.n_linked / self.n_vessel_detections

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "acquired_at": self.acquired_at,
            "half_window_s": self.half_window_s,
            "n_detections": self.n_detections,
            "n_vessel_detections": self.n_vessel_detections,
            "n_linked": self.n_linked,
            "linkage_rate": self.linkage_rate,
            "links": [asdict(lp) for lp in self.links],
            "dark": list(self.dark),
            "unmatched_mmsi": list(self.unmatched_mmsi),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FusionReport":
        return cls(
            scene_id=d["scene_id"],
            acquired_at=int(d["acquired_at"]),
            links=[LinkedPair(**lp) for lp in d["links"]],
            dark=list(d["dark"]),
            n_detections=int(d["n_detections"]),
            n_vessel_detections=int(d["n_vessel_detections"]),
            unmatched_mmsi=list(d.get("unmatched_mmsi", [])),
            half_window_s=d.get("half_window_s", DEFAULT_HALF_WINDOW_S),
        )


def _nearest_in_time(traj: Trajectory, t0: int) -> AisRecord:
    # ties go to the earlier report
    return min(traj.points, key=lambda p: (abs(p.timestamp - t0), p.timestamp))


def candidate_links(scene: SceneMeta, detections: Sequence[Detection], trajectories: Sequence[Trajectory],
                    use_index: bool = True, stats: Optional[dict] = None) -> List[Candidate]:
    """Every (detection, trajectory) pair whose polygon touches the polyline.

    Only self-propelled detections take part. ``stats``, when given, receives
    the number of exact polygon/polyline tests performed.
    """
    lines = [t.polyline for t in trajectories]
    index = RectIndex((i, bbox_of(line)) for i, line in enumerate(lines)) if use_index else None
    out = []
    n_exact = 0
    for d in detections:
        if not d.is_self_propelled:
            continue
        poly = obb_to_polygon(scene, d)
        centroid = poly.centroid
        frame = LocalFrame(*centroid)
        pool = index.query(poly.bbox) if index is not None else range(len(lines))
        for i in pool:
            n_exact += 1
            if not polygon_intersects_polyline(poly, lines[i]):
                continue
            traj = trajectories[i]
            p = _nearest_in_time(traj, scene.acquired_at)
            out.append(Candidate(d.detection_id, traj.mmsi, p.timestamp - scene.acquired_at,
                                 local_distance_m(frame, centroid, p.position), p))
    if stats is not None:
        stats["exact_tests"] = stats.get("exact_tests", 0) + n_exact
    return out


def assign_links(candidates: Iterable[Candidate], detection_ids: Sequence[str] = (),
                 mmsis: Sequence[str] = ()) -> Tuple[List[LinkedPair], List[str], List[str]]:
    """Greedy one-to-one assignment by (dist_m, |dt_s|, mmsi).

    ``detection_ids`` lists the vessel detections to partition into linked or
    dark; ids only present in ``candidates`` are added after them.
    ``mmsis`` optionally widens the pool reported as unmatched.
    """
    cands = sorted(candidates, key=lambda c: (c.dist_m, abs(c.dt_s), c.mmsi, c.detection_id))
    used_det, used_mmsi = set(), set()
    chosen = {}
    for c in cands:
        if c.detection_id in used_det or c.mmsi in used_mmsi:
            continue
        used_det.add(c.detection_id)
        used_mmsi.add(c.mmsi)
        chosen[c.detection_id] = LinkedPair.from_candidate(c)

    order = list(dict.fromkeys(list(detection_ids) + sorted({c.detection_id for c in cands})))
    links = [chosen[d] for d in order if d in chosen]
    dark = [d for d in order if d not in chosen]
    pool = set(mmsis) | {c.mmsi for c in cands}
    unmatched = sorted(pool - used_mmsi)
    return links, dark, unmatched


def check_scene(scene: SceneMeta, detections: Iterable[Detection]) -> None:
    for d in detections:
        if d.scene_id != scene.scene_id:
            raise SceneMismatchError(
                f"detection {d.detection_id} has scene_id {d.scene_id!r}, expected {scene.scene_id!r}")


def fuse_scene(scene: SceneMeta, detections: Sequence[Detection], all_records: Iterable[AisRecord],
               half_window: float = DEFAULT_HALF_WINDOW_S, use_index: bool = True) -> FusionReport:
    check_scene(scene, detections)
    window = temporal_filter(all_records, scene.acquired_at, half_window)
    trajectories = build_trajectories(window)
    cands = candidate_links(scene, detections, trajectories, use_index=use_index)
    vessel_ids = [d.detection_id for d in detections if d.is_self_propelled]
    links, dark, unmatched = assign_links(cands, vessel_ids, [t.mmsi for t in trajectories])
    return FusionReport(
        scene_id=scene.scene_id,
        acquired_at=scene.acquired_at,
        links=links,
        dark=dark,
        n_detections=len(detections),
        n_vessel_detections=len(vessel_ids),
        unmatched_mmsi=unmatched,
        half_window_s=half_window,
    )


@dataclass
class LinkageRow:
    scene_id: str
    n_detections: int
    n_linked: int

    @property
    def linkage_rate(self) -> Optional[float]:
        return self.n_linked / self.n_detections if self.n_detections else None


@dataclass
class LinkageTable:
    rows: List[LinkageRow]

    @property
    def total(self) -> LinkageRow:
        return LinkageRow("TOTAL", sum(r.n_detections for r in self.rows), sum(r.n_linked for r in self.rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scene_id", "n_detected_vessels", "n_linked_pairs", "linkage_accuracy_pct"])
        for r in self.rows + [self.total]:
            rate = r.linkage_rate
            w.writerow([r.scene_id, r.n_detections, r.n_linked, "" if rate is None else f"{100.0 * rate:.1f}"])
        return buf.getvalue()


def merge_reports(reports: Iterable[FusionReport]) -> LinkageTable:
    rows, seen = [], set()
    for rep in reports:
        if rep.scene_id in seen:
            raise ValueError(f"duplicate scene_id {rep.scene_id!r} in reports")
        seen.add(rep.scene_id)
        rows.append(LinkageRow(rep.scene_id, rep.n_vessel_detections, rep.n_linked))
    return LinkageTable(rows)
