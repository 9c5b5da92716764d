"""AIS-guided scene selection over a local scene catalog, and sidecar fetching."""

from __future__ import annotations

import bisect
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from .ais import DEFAULT_HALF_WINDOW_S
from .core import SceneMeta, Trajectory, format_timestamp, parse_timestamp
from .formats import FormatError, scene_from_dict
from .geo import GeoPolygon, RectIndex, bbox_of, polygon_intersects_polyline


@dataclass(frozen=True)
class CatalogEntry:
    scene_id: str
    acquired_at: int
    footprint: GeoPolygon
    source_uri: str

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "acquired_at": format_timestamp(self.acquired_at),
            "footprint": self.footprint.to_geojson(),
            "source_uri": self.source_uri,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CatalogEntry":
        try:
            return cls(str(d["scene_id"]), parse_timestamp(str(d["acquired_at"])),
                       GeoPolygon.from_geojson(d["footprint"]), str(d["source_uri"]))
        except KeyError as exc:
            raise FormatError(f"catalog entry lacks {exc.args[0]}") from None


def load_catalog(path) -> List[CatalogEntry]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise FormatError("catalog index must be a JSON array")
    return [CatalogEntry.from_dict(d) for d in data]


def catalog_to_json(entries: Iterable[CatalogEntry]) -> str:
    return json.dumps([e.to_dict() for e in entries], indent=2) + "\n"


@dataclass(frozen=True)
class SceneSelection:
    scene_id: str
    acquired_at: int
    mmsis: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {"scene_id": self.scene_id, "acquired_at": format_timestamp(self.acquired_at),
                "mmsis": list(self.mmsis)}


def _window_slice(traj: Trajectory, t0: int, half_window: float) -> list:
    ts = traj.timestamps
    lo = bisect.bisect_left(ts, t0 - half_window)
    hi = bisect.bisect_right(ts, t0 + half_window)
    return traj.polyline[lo:hi]


def select_scenes(trajectories: Sequence[Trajectory], catalog: Sequence[CatalogEntry],
                  half_window: float = DEFAULT_HALF_WINDOW_S) -> List[SceneSelection]:
    """Scenes whose footprint meets a trajectory's in-window sub-path, sorted by acquisition time."""
    if half_window < 0:
        raise ValueError("half_window must be non-negative")
    index = RectIndex((i, bbox_of(t.polyline)) for i, t in enumerate(trajectories))
    spans = [(t.points[0].timestamp, t.points[-1].timestamp) for t in trajectories]
    out = []
    seen = set()
    for entry in sorted(catalog, key=lambda e: (e.acquired_at, e.scene_id)):
        if entry.scene_id in seen:
            continue
        hits = []
        for i in index.query(entry.footprint.bbox):
            first, last = spans[i]
            if last < entry.acquired_at - half_window or first > entry.acquired_at + half_window:
                continue
            sub = _window_slice(trajectories[i], entry.acquired_at, half_window)
            if sub and polygon_intersects_polyline(entry.footprint, sub):
                hits.append(trajectories[i].mmsi)
        if hits:
            seen.add(entry.scene_id)
            out.append(SceneSelection(entry.scene_id, entry.acquired_at, tuple(sorted(set(hits)))))
    return out


# ---------------------------------------------------------------------------
# fetching


class CatalogError(Exception):
    def __init__(self, scene_id: str, message: str):
        self.scene_id = scene_id
        super().__init__(f"scene {scene_id}: {message}")


class SidecarMissingError(CatalogError):
    pass


class GeotransformError(CatalogError):
    pass


class FetchError(CatalogError):
    pass


@dataclass(frozen=True)
class FetchedScene:
    meta: SceneMeta
    asset: Path


class FilesystemFetcher:
    """Resolves ``source_uri`` against a root directory.

    The asset itself is only referenced (imagery is never read); its sidecar
    is the same path with a ``.json`` suffix.
    """

    def __init__(self, root):
        self.root = Path(root)

    def resolve(self, entry: CatalogEntry) -> Path:
        uri = entry.source_uri
        if uri.startswith("file://"):
            uri = uri[len("file://"):]
        elif "://" in uri:
            raise FetchError(entry.scene_id, f"unsupported URI scheme in {entry.source_uri!r}")
        return self.root / uri

    def read_sidecar(self, entry: CatalogEntry) -> Tuple[dict, Path]:
        asset = self.resolve(entry)
        sidecar = asset.with_suffix(".json")
        if not sidecar.is_file():
            raise SidecarMissingError(entry.scene_id, f"sidecar missing at {sidecar}")
        try:
            return json.loads(sidecar.read_text(encoding="utf-8")), asset
        except (OSError, json.JSONDecodeError) as exc:
            raise FetchError(entry.scene_id, f"cannot read sidecar {sidecar}: {exc}") from None


def fetch_scene(entry: CatalogEntry, fetcher) -> FetchedScene:
    data, asset = fetcher.read_sidecar(entry)
    if data.get("geotransform") is None:
        raise GeotransformError(entry.scene_id, "geotransform absent")
    data.setdefault("scene_id", entry.scene_id)
    try:
        meta = scene_from_dict(data)
    except FormatError as exc:
        cls = GeotransformError if "geotransform" in str(exc) else FetchError
        raise cls(entry.scene_id, str(exc)) from None
    except ValueError as exc:
        raise FetchError(entry.scene_id, str(exc)) from None
    if meta.scene_id != entry.scene_id:
        raise FetchError(entry.scene_id, f"sidecar describes scene {meta.scene_id!r}")
    return FetchedScene(meta, asset)


def fetch_all(entries: Sequence[CatalogEntry], fetcher, jobs: int = 1):
    """Fetch every entry; failures are collected per scene instead of aborting the batch.

    Returns ``(fetched, errors)`` both in catalog order.
    """
    def one(entry):
        try:
            return fetch_scene(entry, fetcher), None
        except CatalogError as exc:
            return None, exc

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(one, entries))
    return [r for r, _ in results if r is not None], [e for _, e in results if e is not None]
