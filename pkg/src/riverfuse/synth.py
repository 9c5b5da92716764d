"""Synthetic river traffic with known ground truth.

A sinuous centerline runs north to south (downstream = south). Each scene
images its own reach; vessel "units" (a tug with its tow, a lone tug, or a
ship) sit in lanes parallel to the centerline and advect along it at 2-8 kn.
Cooperative units report AIS at a fixed cadence; dark units report nothing.
The scene snapshots every member of every unit as an oriented box.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .ais import ais_csv_text
from .catalog import CatalogEntry, catalog_to_json
from .core import (AisRecord, Centerline, Cover, Detection, Direction, OpStatus, OrientedBox, SceneMeta,
                   VesselClass)
from .direction import centerline_to_geojson
from .formats import detections_to_geojson, scene_to_dict
from .geo import GeoPolygon, LocalFrame, geo_to_pixel

KNOT = 1852.0 / 3600.0  # m/s
ORIGIN = (-91.15, 30.45)
EPOCH0 = 1706799600  # 2024-02-01T15:00:00Z
PIXEL_M = 3.0
AMPLITUDE_M = 400.0
WAVELENGTH_M = 8000.0
REACH_SPACING_M = 10_000.0
REACH_HALF_M = 4_000.0
MARGIN_M = 6_000.0
LANE_SPACING_M = 60.0
BASE_GAP_M = 400.0
CENTERLINE_STEP_M = 50.0
SCENE_INTERVAL_S = 3 * 3600

DIMENSIONS = {  # length, beam in metres
    VesselClass.TUGBOAT: (30.0, 10.0),
    VesselClass.CARGO_SHIP: (120.0, 20.0),
    VesselClass.BULK_CARRIER: (190.0, 32.0),
    VesselClass.HOPPER_BARGE: (60.0, 11.0),
    VesselClass.CRANE_BARGE: (60.0, 16.0),
    VesselClass.DOCK: (120.0, 30.0),
    VesselClass.BRIDGE: (20.0, 0.0),  # beam replaced by river span
    VesselClass.STAGING_AREA: (300.0, 80.0),
}
AIS_TYPE = {VesselClass.TUGBOAT: 52, VesselClass.CARGO_SHIP: 70, VesselClass.BULK_CARRIER: 70}


class SynthConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_vessels: int = 20
    n_scenes: int = 1
    scene_sizes: Optional[Tuple[int, ...]] = None  # AIS-capable units per scene
    dark_fraction: float = 0.0
    ais_period: int = 60
    ais_span_s: int = 600
    position_noise_m: float = 0.0
    count_noise: str = "none"  # "none" | "poisson"
    count_noise_lambda: float = 2.0
    congestion_factor: float = 1.0
    infrastructure: Tuple[int, int, int] = (31, 3, 11)  # docks, bridges, staging areas
    moored_fleets_per_scene: int = 1
    label_noise: float = 0.0
    box_jitter_px: float = 0.0
    false_positives_per_scene: int = 2

    def __post_init__(self):
        if self.scene_sizes is not None:
            sizes = tuple(int(s) for s in self.scene_sizes)
            object.__setattr__(self, "scene_sizes", sizes)
            if any(s < 0 for s in sizes):
                raise SynthConfigError("scene_sizes", "must be non-negative")
            if len(sizes) != self.n_scenes:
                raise SynthConfigError("scene_sizes", f"has {len(sizes)} entries but n_scenes={self.n_scenes}")
            if sum(sizes) != self.n_vessels:
                raise SynthConfigError("scene_sizes", f"sums to {sum(sizes)} but n_vessels={self.n_vessels}")
        if self.n_vessels < 0:
            raise SynthConfigError("n_vessels", "must be non-negative")
        if self.n_scenes < 1:
            raise SynthConfigError("n_scenes", "must be at least 1")
        for name in ("dark_fraction", "label_noise"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthConfigError(name, f"must lie in [0, 1], got {v}")
        if self.ais_period <= 0:
            raise SynthConfigError("ais_period", "must be positive")
        if self.ais_span_s < 0:
            raise SynthConfigError("ais_span_s", "must be non-negative")
        if self.position_noise_m < 0:
            raise SynthConfigError("position_noise_m", "must be non-negative")
        if self.count_noise not in ("none", "poisson"):
            raise SynthConfigError("count_noise", f"unknown distribution {self.count_noise!r}")
        if self.count_noise_lambda < 0:
            raise SynthConfigError("count_noise_lambda", "must be non-negative")
        if not self.congestion_factor > 0:
            raise SynthConfigError("congestion_factor", "must be positive")
        if len(self.infrastructure) != 3 or any(int(n) < 0 for n in self.infrastructure):
            raise SynthConfigError("infrastructure", "needs three non-negative counts")
        if self.moored_fleets_per_scene < 0:
            raise SynthConfigError("moored_fleets_per_scene", "must be non-negative")
        if self.box_jitter_px < 0:
            raise SynthConfigError("box_jitter_px", "must be non-negative")
        if self.false_positives_per_scene < 0:
            raise SynthConfigError("false_positives_per_scene", "must be non-negative")

    def sizes(self) -> Tuple[int, ...]:
        if self.scene_sizes is not None:
            return self.scene_sizes
        q, r = divmod(self.n_vessels, self.n_scenes)
        return tuple(q + (1 if i < r else 0) for i in range(self.n_scenes))


@dataclass
class SynthDataset:
    config: SynthConfig
    records: List[AisRecord]
    centerline: Centerline
    scenes: List[SceneMeta]
    detections: Dict[str, List[Detection]]
    predictions: Dict[str, List[Detection]]
    catalog: List[CatalogEntry]
    truth: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# river geometry in a metric frame (x east, y north)


class _River:
    def __init__(self, length_m: float):
        self.frame = LocalFrame(*ORIGIN)
        self.u = np.arange(0.0, length_m + 1.0, 1.0)
        x, y = self._xy(self.u)
        seg = np.hypot(np.diff(x), np.diff(y))
        self.s = np.concatenate([[0.0], np.cumsum(seg)])

    @staticmethod
    def _xy(u):
        return AMPLITUDE_M * np.sin(2 * np.pi * u / WAVELENGTH_M), -u

    def u_at(self, s: float) -> float:
        return float(np.interp(s, self.s, self.u))

    def s_at(self, u: float) -> float:
        return float(np.interp(u, self.u, self.s))

    def tangent(self, u: float) -> Tuple[float, float]:
        """Unit downstream tangent (east, north)."""
        dx = AMPLITUDE_M * 2 * math.pi / WAVELENGTH_M * math.cos(2 * math.pi * u / WAVELENGTH_M)
        n = math.hypot(dx, 1.0)
        return dx / n, -1.0 / n

    def point(self, s: float, d: float) -> Tuple[float, float]:
        """Metric position at arc length ``s`` and signed lateral offset ``d`` (left of downstream)."""
        u = self.u_at(s)
        x = AMPLITUDE_M * math.sin(2 * math.pi * u / WAVELENGTH_M)
        tx, ty = self.tangent(u)
        return x - ty * d, -u + tx * d

    def lonlat(self, xy) -> Tuple[float, float]:
        lon, lat = self.frame.to_lonlat(*xy)
        return (round(lon, 7), round(lat, 7))

    def centerline(self) -> Centerline:
        us = np.arange(0.0, self.u[-1] + 1e-9, CENTERLINE_STEP_M)
        x, y = self._xy(us)
        return Centerline(tuple(self.lonlat((float(a), float(b))) for a, b in zip(x, y)))


@dataclass
class _Member:
    klass: VesselClass
    s: float  # arc length of the box centre
    d: float  # lateral offset
    length: float
    beam: float
    cover: Cover = Cover.NOT_APPLICABLE
    along_tangent: bool = True  # False: box long axis across the river (bridges)


@dataclass
class _Unit:
    kind: str  # tow | lone_tug | cargo | bulk | moored_fleet
    motion: Direction
    speed: float  # m/s, signed along s
    members: List[_Member] = field(default_factory=list)
    mmsi: Optional[str] = None
    dark: bool = False
    tow_id: Optional[str] = None
    ais_phase: int = 0

    @property
    def extent(self) -> Tuple[float, float]:
        lo = min(m.s - m.length / 2 for m in self.members)
        hi = max(m.s + m.length / 2 for m in self.members)
        return lo, hi

    @property
    def lead(self) -> _Member:
        return self.members[0]


def _tow_shape(n: int) -> int:
    if n <= 2:
        return 1
    if n <= 6:
        return 2
    if n <= 15:
        return 3
    return 4


def _barge_members(n: int, rng, s_tug: float, ahead: float, d: float, tug_len: float,
                   start_index: int = 0, covered_p: float = 0.4) -> List[_Member]:
    cols = _tow_shape(max(n + start_index, 1))
    out = []
    for k in range(start_index, start_index + n):
        r, c = divmod(k, cols)
        klass = VesselClass.CRANE_BARGE if rng.random() < 0.05 else VesselClass.HOPPER_BARGE
        length, beam = DIMENSIONS[VesselClass.HOPPER_BARGE]
        cover = Cover.NOT_APPLICABLE
        if klass is VesselClass.HOPPER_BARGE:
            cover = Cover.COVERED if rng.random() < covered_p else Cover.UNCOVERED
        s = s_tug + ahead * (tug_len / 2 + length / 2 + r * length)
        out.append(_Member(klass, s, d + (c - (cols - 1) / 2) * beam, length, beam, cover))
    return out


def _draw_tow_size(rng) -> int:
    if rng.random() < 0.05:
        return int(rng.integers(16, 39))
    return int(rng.integers(1, 16))


def _make_units(rng, n_units: int, cfg: SynthConfig) -> List[_Unit]:
    units = []
    for _ in range(n_units):
        r = rng.random()
        kind = "tow" if r < 0.55 else "lone_tug" if r < 0.65 else "bulk" if r < 0.85 else "cargo"
        m = rng.random()
        if m < 0.4:
            motion = Direction.DOWNSTREAM
        elif m < 0.8:
            motion = Direction.UPSTREAM
        else:
            motion = Direction.STATIONARY
        speed = 0.0 if motion is Direction.STATIONARY else float(rng.uniform(2.0, 8.0)) * KNOT
        if motion is Direction.UPSTREAM:
            speed = -speed
        units.append(_Unit(kind, motion, speed))
    for _ in range(cfg.moored_fleets_per_scene):
        units.append(_Unit("moored_fleet", Direction.STATIONARY, 0.0))
    return units


def _layout(units: List[_Unit], s_center: float, rng, cfg: SynthConfig) -> None:
    """Assign lanes and along-river positions; fills members in place."""
    gap = BASE_GAP_M / cfg.congestion_factor
    s_start, s_stop = s_center - REACH_HALF_M, s_center + REACH_HALF_M
    lanes: List[dict] = []  # {"d", "motion", "fill"}

    def lane_offset(k: int) -> float:
        # 0, +1, -1, +2, -2, ...
        idx = (k + 1) // 2 * (1 if k % 2 else -1)
        return idx * LANE_SPACING_M

    for unit in units:
        # build members relative to a provisional reference s=0
        ahead = -1.0 if unit.speed < 0 else 1.0
        if unit.kind in ("tow", "lone_tug"):
            tl, tb = DIMENSIONS[VesselClass.TUGBOAT]
            members = [_Member(VesselClass.TUGBOAT, 0.0, 0.0, tl, tb)]
            if unit.kind == "tow":
                members += _barge_members(_draw_tow_size(rng), rng, 0.0, ahead, 0.0, tl)
        elif unit.kind == "moored_fleet":
            n = int(rng.integers(3, 13))
            first = _barge_members(n, rng, 0.0, 1.0, 0.0, 0.0)
            members = first
        else:
            klass = VesselClass.BULK_CARRIER if unit.kind == "bulk" else VesselClass.CARGO_SHIP
            members = [_Member(klass, 0.0, 0.0, *DIMENSIONS[klass])]
        lo = min(m.s - m.length / 2 for m in members)
        hi = max(m.s + m.length / 2 for m in members)
        span = hi - lo

        lane = None
        for ln in lanes:
            if ln["motion"] is unit.motion and ln["fill"] + span <= s_stop:
                lane = ln
                break
        if lane is None:
            lane = {"d": lane_offset(len(lanes)), "motion": unit.motion, "fill": s_start}
            lanes.append(lane)
        shift = lane["fill"] - lo + float(rng.uniform(0.0, 0.25)) * gap
        for mem in members:
            mem.s += shift
            mem.d += lane["d"]
        lane["fill"] = hi + shift + gap
        unit.members = members


# ---------------------------------------------------------------------------
# scenes and boxes


def _scene_meta(river: _River, scene_id: str, s_center: float, acquired_at: int) -> SceneMeta:
    cx, cy = river.point(s_center, 0.0)
    lon_c, lat_c = river.frame.to_lonlat(cx, cy)
    m_lon = LocalFrame(lon_c, lat_c).m_per_deg_lon
    half_x, half_y = 2000.0, REACH_HALF_M + 800.0
    lon_min, lon_max = round(lon_c - half_x / m_lon, 7), round(lon_c + half_x / m_lon, 7)
    lat_min, lat_max = round(lat_c - half_y / 111_320.0, 7), round(lat_c + half_y / 111_320.0, 7)
    dx = PIXEL_M / m_lon
    dy = PIXEL_M / 111_320.0
    return SceneMeta(
        scene_id=scene_id,
        acquired_at=acquired_at,
        footprint=((lon_min, lat_min), (lon_max, lat_min), (lon_max, lat_max), (lon_min, lat_max)),
        geotransform=(lon_min, dx, 0.0, lat_max, 0.0, -dy),
        width_px=int(math.ceil((lon_max - lon_min) / dx)),
        height_px=int(math.ceil((lat_max - lat_min) / dy)),
    )


def _box(river: _River, scene: SceneMeta, mem: _Member) -> OrientedBox:
    u = river.u_at(mem.s)
    tx, ty = river.tangent(u)
    cx, cy = river.point(mem.s, mem.d)
    if not mem.along_tangent:
        tx, ty = -ty, tx
    lon, lat = river.frame.to_lonlat(cx, cy)
    lon2, lat2 = river.frame.to_lonlat(cx + tx, cy + ty)
    c0, r0 = geo_to_pixel(scene, lon, lat)
    c1, r1 = geo_to_pixel(scene, lon2, lat2)
    angle = math.atan2(r1 - r0, c1 - c0)
    return OrientedBox(round(c0, 4), round(r0, 4), round(mem.length / PIXEL_M, 4), round(mem.beam / PIXEL_M, 4),
                       math.radians(round(math.degrees(angle), 6)))


def _bearing(tx: float, ty: float) -> float:
    return round(math.degrees(math.atan2(tx, ty)) % 360.0, 1) % 360.0


# ---------------------------------------------------------------------------


def generate(cfg: SynthConfig) -> SynthDataset:
    rng = np.random.default_rng(cfg.seed)
    sizes = cfg.sizes()
    river = _River(2 * MARGIN_M + REACH_SPACING_M * cfg.n_scenes)
    centerline = river.centerline()

    # dark selection is global over cooperative-capable units
    n_units = sum(sizes)
    n_dark = int(round(cfg.dark_fraction * n_units))
    dark_idx = set(rng.permutation(n_units)[:n_dark].tolist()) if n_units else set()

    records: List[AisRecord] = []
    scenes, detections, predictions, catalog = [], {}, {}, []
    truth = {"links": {}, "dark": [], "directions": {}, "tows": {}, "pred_tow_counts": {},
             "infrastructure": {}, "scenes": {}}
    infra_plan = _distribute(cfg.infrastructure, cfg.n_scenes)
    unit_counter = 0

    for si in range(cfg.n_scenes):
        scene_id = f"S{si + 1:02d}"
        u_center = MARGIN_M + REACH_SPACING_M * (si + 0.5)
        s_center = river.s_at(u_center)
        t0 = EPOCH0 + si * SCENE_INTERVAL_S
        scene = _scene_meta(river, scene_id, s_center, t0)
        units = _make_units(rng, sizes[si], cfg)
        _layout(units, s_center, rng, cfg)

        dets: List[Detection] = []
        det_seq = 0
        tow_seq = 0

        def next_id():
            nonlocal det_seq
            det_seq += 1
            return f"{scene_id}-d{det_seq:04d}"

        scene_truth = {"links": {}, "dark": [], "directions": {}}
        for unit in units:
            if unit.kind != "moored_fleet":
                unit.mmsi = f"{367000001 + unit_counter}"
                unit.dark = unit_counter in dark_idx
                unit.ais_phase = int(rng.integers(0, cfg.ais_period))
                unit_counter += 1
            if unit.kind in ("tow", "lone_tug", "moored_fleet"):
                tow_seq += 1
                unit.tow_id = f"{scene_id}-t{tow_seq:03d}"
            if unit.kind == "moored_fleet":
                status = OpStatus.MOORED
            elif unit.kind in ("tow", "lone_tug"):
                status = OpStatus.IN_MOTION if unit.speed else OpStatus.STAGED
            else:
                status = OpStatus.IN_MOTION if unit.speed else OpStatus.MOORED
            for mem in unit.members:
                did = next_id()
                dets.append(Detection(did, scene_id, _box(river, scene, mem), mem.klass, mem.cover, status,
                                      unit.motion, 1.0, unit.tow_id))
                if mem.klass in AIS_TYPE:
                    scene_truth["directions"][did] = unit.motion.value
                    if unit.dark:
                        scene_truth["dark"].append(did)
                    else:
                        scene_truth["links"][did] = unit.mmsi
            if unit.mmsi and not unit.dark:
                records.extend(_ais_for(unit, river, t0, cfg, rng))
            if unit.tow_id:
                barges = [m for m in unit.members if m.klass in (VesselClass.HOPPER_BARGE, VesselClass.CRANE_BARGE)]
                truth["tows"][unit.tow_id] = {
                    "scene_id": scene_id,
                    "barge_count": len(barges),
                    "covered": sum(1 for b in barges if b.cover is Cover.COVERED),
                    "uncovered": sum(1 for b in barges if b.cover is Cover.UNCOVERED),
                    "op_status": status.value,
                    "mmsi": unit.mmsi,
                }

        infra = _infrastructure(river, scene, units, infra_plan[si], s_center, next_id)
        dets.extend(infra)
        for d in infra:
            truth["infrastructure"][d.klass.value] = truth["infrastructure"].get(d.klass.value, 0) + 1

        preds = _predictions(dets, units, river, scene, cfg, rng, truth["pred_tow_counts"])
        scenes.append(scene)
        detections[scene_id] = dets
        predictions[scene_id] = preds
        catalog.append(CatalogEntry(scene_id, t0, GeoPolygon(scene.footprint), f"scenes/{scene_id}.tif"))
        truth["links"].update(scene_truth["links"])
        truth["dark"].extend(scene_truth["dark"])
        truth["directions"].update(scene_truth["directions"])
        truth["scenes"][scene_id] = {
            "n_vessel_detections": len(scene_truth["directions"]),
            "n_dark": len(scene_truth["dark"]),
            "composition": _composition(dets, truth["tows"], scene_id),
        }

    truth["composition"] = _composition([d for s in scenes for d in detections[s.scene_id]], truth["tows"], None)
    records.sort(key=lambda r: (r.timestamp, r.mmsi))
    return SynthDataset(cfg, records, centerline, scenes, detections, predictions, catalog, truth)


def _distribute(counts, n_scenes) -> List[Dict[VesselClass, int]]:
    plan = [{VesselClass.DOCK: 0, VesselClass.BRIDGE: 0, VesselClass.STAGING_AREA: 0} for _ in range(n_scenes)]
    k = 0
    for klass, n in zip((VesselClass.DOCK, VesselClass.BRIDGE, VesselClass.STAGING_AREA), counts):
        for _ in range(int(n)):
            plan[k % n_scenes][klass] += 1
            k += 1
    return plan


def _ais_for(unit: _Unit, river: _River, t0: int, cfg: SynthConfig, rng) -> List[AisRecord]:
    tug = unit.lead
    out = []
    t = t0 - cfg.ais_span_s + unit.ais_phase
    sog = round(abs(unit.speed) / KNOT, 1)
    while t <= t0 + cfg.ais_span_s:
        s = tug.s + unit.speed * (t - t0)
        x, y = river.point(s, tug.d)
        if cfg.position_noise_m:
            x += float(rng.normal(0.0, cfg.position_noise_m))
            y += float(rng.normal(0.0, cfg.position_noise_m))
        tx, ty = river.tangent(river.u_at(s))
        if unit.speed < 0:
            tx, ty = -tx, -ty
        lon, lat = river.lonlat((x, y))
        cog = _bearing(tx, ty)
        out.append(AisRecord(unit.mmsi, int(t), lat, lon, sog, cog, cog, f"SYNTH {unit.mmsi}",
                             AIS_TYPE[tug.klass]))
        t += cfg.ais_period
    return out


def _infrastructure(river, scene, units, plan, s_mid, next_id) -> List[Detection]:
    """Docks and staging areas along alternating banks, bridges across the river."""
    max_d = max((abs(m.d) + m.beam for u in units for m in u.members), default=0.0)
    bank = max_d + 250.0
    kinds = [k for k, n in plan.items() for _ in range(n)]
    out = []
    for i, klass in enumerate(kinds):
        s = s_mid - REACH_HALF_M + (i + 0.5) * (2 * REACH_HALF_M / len(kinds))
        length, beam = DIMENSIONS[klass]
        if klass is VesselClass.BRIDGE:
            # long axis across the river
            mem = _Member(klass, s, 0.0, 2 * bank, length, along_tangent=False)
        else:
            side = 1.0 if i % 2 == 0 else -1.0
            mem = _Member(klass, s, side * (bank + beam / 2), length, beam)
        out.append(Detection(next_id(), scene.scene_id, _box(river, scene, mem), klass, Cover.NOT_APPLICABLE,
                             OpStatus.NOT_APPLICABLE, Direction.NOT_APPLICABLE, 1.0, None))
    return out


def _composition(dets: List[Detection], tows: dict, scene_id: Optional[str]) -> dict:
    by_class = {c.value: 0 for c in VesselClass}
    by_cover = {"covered": 0, "uncovered": 0}
    by_dir = {"upstream": 0, "downstream": 0, "stationary": 0}
    for d in dets:
        by_class[d.klass.value] += 1
        if d.klass in (VesselClass.HOPPER_BARGE, VesselClass.CRANE_BARGE) and d.cover is not Cover.NOT_APPLICABLE:
            by_cover[d.cover.value] += 1
        if d.klass in AIS_TYPE:
            by_dir[d.direction_pred.value] += 1
    status = {"staged": 0, "in_motion": 0, "moored": 0}
    n_tows = n_barges = 0
    for tow in tows.values():
        if scene_id is not None and tow["scene_id"] != scene_id:
            continue
        status[tow["op_status"]] += 1
        n_tows += 1
        n_barges += tow["barge_count"]
    return {"by_class": by_class, "by_cover": by_cover, "tows_by_status": status,
            "vessels_by_direction": by_dir, "n_tows": n_tows, "n_barges_in_tows": n_barges}


def _predictions(dets, units, river, scene, cfg, rng, pred_counts) -> List[Detection]:
    """A noisy detector's output for the scene."""
    flip_dir = {Direction.UPSTREAM: Direction.DOWNSTREAM, Direction.DOWNSTREAM: Direction.UPSTREAM}
    flip_cover = {Cover.COVERED: Cover.UNCOVERED, Cover.UNCOVERED: Cover.COVERED}
    vessel_swap = {VesselClass.BULK_CARRIER: VesselClass.CARGO_SHIP, VesselClass.CARGO_SHIP: VesselClass.BULK_CARRIER}
    out = []
    removed = set()
    extra: List[Detection] = []
    seq = 0
    for unit in units:
        if not unit.tow_id:
            continue
        barges = [m for m in unit.members if m.klass in (VesselClass.HOPPER_BARGE, VesselClass.CRANE_BARGE)]
        delta = 0
        if cfg.count_noise == "poisson" and unit.kind != "lone_tug":
            delta = int(rng.poisson(cfg.count_noise_lambda)) - 1
        delta = max(delta, -len(barges))
        pred_counts[unit.tow_id] = len(barges) + delta
        if delta < 0:
            ids = [d.detection_id for d in dets if d.tow_id == unit.tow_id and d.is_barge]
            removed.update(ids[len(ids) + delta:])
        elif delta > 0:
            ahead = -1.0 if unit.speed < 0 else 1.0
            tug_len = DIMENSIONS[VesselClass.TUGBOAT][0] if unit.kind != "moored_fleet" else 0.0
            anchor = unit.lead.s if unit.kind != "moored_fleet" else unit.lead.s - DIMENSIONS[VesselClass.HOPPER_BARGE][0] / 2
            base_d = unit.lead.d if unit.kind != "moored_fleet" else unit.lead.d + (_tow_shape(len(barges)) - 1) / 2 * 11.0
            new = _barge_members(delta, rng, anchor, ahead, base_d, tug_len, start_index=len(barges))
            status = next(d.op_status for d in dets if d.tow_id == unit.tow_id)
            for mem in new:
                seq += 1
                extra.append(Detection(f"{scene.scene_id}-p{seq:04d}", scene.scene_id, _box(river, scene, mem),
                                       mem.klass, mem.cover, status, unit.motion, 0.9, unit.tow_id))
    for d in dets:
        if d.detection_id in removed:
            continue
        obb = d.obb
        if cfg.box_jitter_px:
            j = rng.normal(0.0, cfg.box_jitter_px, size=2)
            obb = OrientedBox(round(obb.center_col + float(j[0]), 4), round(obb.center_row + float(j[1]), 4),
                              obb.width, obb.height, obb.angle)
        klass, cover, direction = d.klass, d.cover, d.direction_pred
        if cfg.label_noise:
            if klass in vessel_swap and rng.random() < cfg.label_noise:
                klass = vessel_swap[klass]
            if cover in flip_cover and rng.random() < cfg.label_noise:
                cover = flip_cover[cover]
            if direction in flip_dir and rng.random() < cfg.label_noise:
                direction = flip_dir[direction]
        conf = round(float(rng.uniform(0.6, 0.99)), 3)
        out.append(Detection(d.detection_id, d.scene_id, obb, klass, cover, d.op_status, direction, conf, d.tow_id))
    out.extend(extra)
    for _ in range(cfg.false_positives_per_scene):
        seq += 1
        col = round(float(rng.uniform(0, scene.width_px)), 4)
        row = round(float(rng.uniform(0, scene.height_px)), 4)
        out.append(Detection(f"{scene.scene_id}-p{seq:04d}", scene.scene_id, OrientedBox(col, row, 10.0, 4.0, 0.0),
                             VesselClass.TUGBOAT, Cover.NOT_APPLICABLE, OpStatus.IN_MOTION, Direction.UPSTREAM,
                             round(float(rng.uniform(0.05, 0.45)), 3), None))
    return out


# ---------------------------------------------------------------------------


def write_dataset(ds: SynthDataset, out_dir) -> Path:
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    (out / "detections").mkdir(exist_ok=True)
    (out / "predictions").mkdir(exist_ok=True)
    cfg = asdict(ds.config)
    (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
    (out / "ais.csv").write_text(ais_csv_text(ds.records), encoding="utf-8")
    (out / "centerline.geojson").write_text(json.dumps(centerline_to_geojson(ds.centerline)) + "\n", encoding="utf-8")
    (out / "catalog.json").write_text(catalog_to_json(ds.catalog), encoding="utf-8")
    for scene in ds.scenes:
        sid = scene.scene_id
        (out / "scenes" / f"{sid}.json").write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n",
                                                   encoding="utf-8")
        (out / "detections" / f"{sid}.geojson").write_text(
            json.dumps(detections_to_geojson(scene, ds.detections[sid]), indent=1) + "\n", encoding="utf-8")
        (out / "predictions" / f"{sid}.geojson").write_text(
            json.dumps(detections_to_geojson(scene, ds.predictions[sid]), indent=1) + "\n", encoding="utf-8")
    (out / "ground_truth.json").write_text(json.dumps(ds.truth, indent=2) + "\n", encoding="utf-8")
    return out
