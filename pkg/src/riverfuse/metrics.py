"""Detection matching and the evaluation metric suite.

Ratios with an empty denominator are ``None`` (serialized as JSON null)
rather than 0, so "no samples" stays distinguishable from "all wrong".
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .core import (BARGE_CLASSES, INFRASTRUCTURE, SELF_PROPELLED, Cover, Detection, OpStatus,
                   VesselClass)
from .geo import GeoPolygon, obb_pixel_polygon, rotated_iou

DEFAULT_IOU_THRESH = 0.5
DEFAULT_CONF_THRESH = 0.5


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def instances(self) -> int:
        return self.tp + self.fn


@dataclass
class MatchTally:
    counts: Dict[str, ClassCounts] = field(default_factory=dict)
    pairs: List[Tuple[str, str]] = field(default_factory=list)  # (pred id, truth id)

    def __getitem__(self, label) -> ClassCounts:
        return self.counts.get(_key(label), ClassCounts())

    def labels(self) -> List[str]:
        return sorted(self.counts)

    def __add__(self, other: "MatchTally") -> "MatchTally":
        out = MatchTally()
        for lab in sorted(set(self.counts) | set(other.counts)):
            a, b = self[lab], other[lab]
            out.counts[lab] = ClassCounts(a.tp + b.tp, a.fp + b.fp, a.fn + b.fn)
        out.pairs = sorted(self.pairs + other.pairs)
        return out


def _key(label) -> str:
    return label.value if hasattr(label, "value") else str(label)


def _ratio(num: float, den: float) -> Optional[float]:
    return num / den if den else None


def precision(t: MatchTally, label) -> Optional[float]:
    c = t[label]
    return _ratio(c.tp, c.tp + c.fp)


def recall(t: MatchTally, label) -> Optional[float]:
    c = t[label]
    return _ratio(c.tp, c.tp + c.fn)


def harmonic_f1(p: Optional[float], r: Optional[float]) -> Optional[float]:
    if p is None or r is None:
        return None
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def f1(t: MatchTally, label) -> Optional[float]:
    return harmonic_f1(precision(t, label), recall(t, label))


def accuracy(correct: int, total: int) -> Optional[float]:
    return _ratio(correct, total)


# ---------------------------------------------------------------------------
# matching

KeyFn = Callable[[Detection], Optional[str]]


def class_key(d: Detection) -> Optional[str]:
    return d.klass.value


def cover_key(d: Detection) -> Optional[str]:
    return None if d.cover is Cover.NOT_APPLICABLE else d.cover.value


def status_key(d: Detection) -> Optional[str]:
    return None if d.op_status is OpStatus.NOT_APPLICABLE else d.op_status.value


def _with_polygon(item) -> Tuple[Detection, GeoPolygon]:
    if isinstance(item, Detection):
        return item, obb_pixel_polygon(item)
    d, poly = item
    return d, poly


def match_detections(pred: Iterable, truth: Iterable, iou_thresh: float = DEFAULT_IOU_THRESH,
                     conf_thresh: float = DEFAULT_CONF_THRESH, key: KeyFn = class_key) -> MatchTally:
    """Greedy one-to-one matching by descending IoU among same-label pairs.

    Items are Detections (compared in pixel space) or ``(Detection, polygon)``
    pairs. ``key`` maps a detection to the label being scored, or None to
    leave it out (e.g. cover status of a tugboat).
    """
    preds = [(d, poly, key(d)) for d, poly in map(_with_polygon, pred) if d.confidence >= conf_thresh]
    truths = [(d, poly, key(d)) for d, poly in map(_with_polygon, truth)]
    preds = [p for p in preds if p[2] is not None]
    truths = [t for t in truths if t[2] is not None]

    by_label = defaultdict(list)
    for j, t in enumerate(truths):
        by_label[t[2]].append(j)
    edges = []
    for i, (pd, ppoly, plab) in enumerate(preds):
        for j in by_label.get(plab, ()):
            td, tpoly, _ = truths[j]
            iou = rotated_iou(ppoly, tpoly)
            if iou >= iou_thresh and iou > 0.0:
                edges.append((-iou, pd.detection_id, td.detection_id, i, j))
    edges.sort()

    tally = MatchTally()
    for lab in {p[2] for p in preds} | {t[2] for t in truths}:
        tally.counts[lab] = ClassCounts()
    used_p, used_t = set(), set()
    for _, pid, tid, i, j in edges:
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        tally.counts[preds[i][2]].tp += 1
        tally.pairs.append((pid, tid))
    for i, p in enumerate(preds):
        if i not in used_p:
            tally.counts[p[2]].fp += 1
    for j, t in enumerate(truths):
        if j not in used_t:
            tally.counts[t[2]].fn += 1
    tally.pairs.sort()
    return tally


# ---------------------------------------------------------------------------
# count errors


@dataclass(frozen=True)
class CountSeries:
    pairs: Tuple[Tuple[int, int], ...]  # (true count, predicted count)

    def __post_init__(self):
        pairs = tuple((int(x), int(y)) for x, y in self.pairs)
        for x, y in pairs:
            if x < 0 or y < 0:
                raise ValueError("counts must be non-negative")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n(self) -> int:
        return len(self.pairs)


def mae(s: CountSeries) -> float:
    if s.n == 0:
        raise ValueError("MAE of an empty count series")
    return sum(abs(x - y) for x, y in s.pairs) / s.n


def smape(s: CountSeries) -> float:
    """Symmetric MAPE in percent; a 0/0 term counts as 0."""
    if s.n == 0:
        raise ValueError("sMAPE of an empty count series")
    total = 0.0
    for x, y in s.pairs:
        den = abs(x) + abs(y)
        if den:
            total += 2.0 * abs(x - y) / den
    return 100.0 * total / s.n


# ---------------------------------------------------------------------------
# report in the per-category layout

CATEGORIES = (
    ("vessel_and_barge_classification", class_key,
     [c.value for c in VesselClass if c in SELF_PROPELLED or c in BARGE_CLASSES]),
    ("cover_status", cover_key, [Cover.COVERED.value, Cover.UNCOVERED.value]),
    ("operational_status", status_key, [OpStatus.STAGED.value, OpStatus.IN_MOTION.value, OpStatus.MOORED.value]),
    ("infrastructure_objects", class_key, [c.value for c in VesselClass if c in INFRASTRUCTURE]),
)


def _row(t: MatchTally, label: str) -> dict:
    return {
        "instances": t[label].instances,
        "tp": t[label].tp, "fp": t[label].fp, "fn": t[label].fn,
        "precision": precision(t, label),
        "recall": recall(t, label),
        "f1": f1(t, label),
    }


def _weighted(rows: Dict[str, dict]) -> dict:
    total = sum(r["instances"] for r in rows.values())
    out = {"instances": total}
    for m in ("precision", "recall", "f1"):
        vals = [(r[m], r["instances"]) for r in rows.values() if r[m] is not None and r["instances"]]
        w = sum(n for _, n in vals)
        out[m] = sum(v * n for v, n in vals) / w if w else None
    return out


def category_report(scenes: Sequence[Tuple[Sequence, Sequence]], iou_thresh: float = DEFAULT_IOU_THRESH,
                    conf_thresh: float = DEFAULT_CONF_THRESH) -> Tuple[dict, MatchTally]:
    """Per-category, per-sub-class precision/recall/F1 over ``(pred, truth)`` scene pairs.

    Matching happens within each scene and tallies are summed. Each category
    also carries ``overall_instance_weighted``: instance-weighted means of the
    sub-class values (not a pooled harmonic mean). The class-level tally is
    returned too; its pairs drive direction and count scoring.
    """
    report = {}
    class_tally = None
    for name, key, members in CATEGORIES:
        if key is class_key and class_tally is not None:
            tally = class_tally
        else:
            tally = MatchTally()
            for pred, truth in scenes:
                tally = tally + match_detections(pred, truth, iou_thresh, conf_thresh, key)
            if key is class_key:
                class_tally = tally
        rows = {lab: _row(tally, lab) for lab in members}
        report[name] = {"sub_classes": rows, "overall_instance_weighted": _weighted(rows)}
    return report, class_tally if class_tally is not None else MatchTally()
