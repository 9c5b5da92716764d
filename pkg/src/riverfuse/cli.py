"""Command line entry point: ``riverfuse <subcommand>``.

Exit codes: 0 success, 2 input-format error, 3 internal invariant violation.
Every command writes files and prints a one-line summary to stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import __version__
from .ais import DEFAULT_HALF_WINDOW_S, AisHeaderError, build_trajectories, parse_ais_csv, temporal_filter, write_ais_csv
from .catalog import load_catalog, select_scenes
from .core import TaxonomyError, validate_detection
from .direction import classify_link, direction_confusion, load_centerline
from .formats import FormatError, dump_json, read_detection_file, read_report, write_report
from .fuse import FusionReport, SceneMismatchError, fuse_scene, merge_reports
from .geo import DegenerateGeometryError
from .inventory import (TowError, build_infrastructure, build_tows, fleet_snapshot, infrastructure_geojson,
                        snapshot_csv)
from .metrics import CountSeries, category_report, mae, smape
from .synth import SynthConfig, SynthConfigError, generate, write_dataset

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INVARIANT = 3
JOBS_ENV = "RIVERFUSE_JOBS"


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    half_window_s: float = DEFAULT_HALF_WINDOW_S
    iou_thresh: float = 0.5
    conf_thresh: float = 0.5
    strict: bool = False

    def __post_init__(self):
        for name in ("iou_thresh", "conf_thresh"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.half_window_s < 0:
            raise ValueError(f"half_window_s must be non-negative, got {self.half_window_s}")


# ---------------------------------------------------------------------------
# helpers


def _detection_files(path) -> List[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(list(p.glob("*.geojson")) + list(p.glob("*.json")))
        if not files:
            raise FormatError(f"no detection files in {p}")
        return files
    if not p.exists():
        raise FormatError(f"{p} does not exist")
    return [p]


def _load_scenes(path) -> List[Tuple]:
    """[(scene, detections)] sorted by acquisition time then scene_id."""
    out = []
    seen = set()
    for f in _detection_files(path):
        scene, dets = read_detection_file(f)
        if scene.scene_id in seen:
            raise FormatError(f"scene {scene.scene_id} appears in more than one detection file")
        seen.add(scene.scene_id)
        for d in dets:
            problems = validate_detection(d)
            if problems:
                raise FormatError(f"{f.name}: detection {d.detection_id}: " + "; ".join(problems))
        out.append((scene, dets))
    out.sort(key=lambda sd: (sd[0].acquired_at, sd[0].scene_id))
    return out


def _read_ais(path, strict: bool):
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"AIS file {p} does not exist")
    with p.open(encoding="utf-8", newline="") as fh:
        return parse_ais_csv(fh, strict=strict)


def _jobs(flag: Optional[int]) -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise FormatError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return max(1, flag or 1)


def _fuse_job(args):
    scene, dets, records, half_window = args
    return fuse_scene(scene, dets, records, half_window)


def _check_partition(report: FusionReport, dets) -> None:
    vessel = [d.detection_id for d in dets if d.is_self_propelled]
    covered = [lp.detection_id for lp in report.links] + list(report.dark)
    if sorted(covered) != sorted(vessel):
        raise InvariantViolation(f"scene {report.scene_id}: links and dark do not partition the vessel detections")
    for lp in report.links:
        if abs(lp.dt_s) > report.half_window_s:
            raise InvariantViolation(f"scene {report.scene_id}: link {lp.detection_id} outside the time window")


def _summary(**fields) -> None:
    print(" ".join(f"{k}={v}" for k, v in fields.items()))


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    records, stats = _read_ais(args.ais, args.strict)
    if stats.rows_read != stats.rows_accepted + stats.rows_rejected:
        raise InvariantViolation("ingest counts do not add up")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_ais_csv(records, fh)
    print(json.dumps(stats.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_fuse(args) -> int:
    cfg = RunConfig(half_window_s=args.half_window, strict=args.strict)
    records, stats = _read_ais(args.ais, cfg.strict)
    scenes = _load_scenes(args.detections)
    centerline = load_centerline(args.centerline) if args.centerline else None
    jobs = _jobs(args.jobs)

    work = [(scene, dets, temporal_filter(records, scene.acquired_at, cfg.half_window_s), cfg.half_window_s)
            for scene, dets in scenes]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_fuse_job, work))
    else:
        reports = [_fuse_job(w) for w in work]

    out = Path(args.out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    for (scene, dets), rep in zip(scenes, reports):
        _check_partition(rep, dets)
        if centerline is not None:
            rep.links = [_with_direction(lp, centerline) for lp in rep.links]
        write_report(out / "reports" / f"{rep.scene_id}.json", rep)
    table = merge_reports(reports)
    (out / "linkage.csv").write_text(table.to_csv(), encoding="utf-8")
    total = table.total
    rate = "na" if total.linkage_rate is None else f"{100.0 * total.linkage_rate:.1f}%"
    _summary(scenes=len(reports), vessel_detections=total.n_detections, linked=total.n_linked,
             dark=sum(len(r.dark) for r in reports), linkage=rate, ais_rejected=stats.rows_rejected)
    return EXIT_OK


def _with_direction(lp, centerline):
    label = classify_link(centerline, lp)
    return replace(lp, direction=None if label is None else label.value)


def _tow_counts(dets) -> dict:
    return {t.tow_id: t.barge_count for t in build_tows(dets)}


def cmd_evaluate(args) -> int:
    cfg = RunConfig(iou_thresh=args.iou, conf_thresh=args.conf)
    preds = {s.scene_id: (s, d) for s, d in _load_scenes(args.pred)}
    truths = {s.scene_id: (s, d) for s, d in _load_scenes(args.truth)}
    missing = sorted(set(truths) - set(preds))
    extra = sorted(set(preds) - set(truths))
    if extra:
        raise FormatError(f"prediction scenes without truth: {', '.join(extra)}")
    scene_ids = sorted(truths)
    pairs = [(preds[sid][1] if sid in preds else [], truths[sid][1]) for sid in scene_ids]
    report, class_tally = category_report(pairs, cfg.iou_thresh, cfg.conf_thresh)

    truth_by_id = {d.detection_id: d for _, tdets in pairs for d in tdets}
    pred_by_id = {d.detection_id: d for pdets, _ in pairs for d in pdets}
    dir_pred, dir_truth = [], []
    for pid, tid in class_tally.pairs:
        t = truth_by_id[tid].direction_pred.value
        p = pred_by_id[pid].direction_pred.value
        if t != "not_applicable" and p != "not_applicable" and truth_by_id[tid].is_self_propelled:
            dir_pred.append(p)
            dir_truth.append(t)
    confusion = direction_confusion(dir_pred, dir_truth)

    count_pairs = []
    for pdets, tdets in pairs:
        kept = [d for d in pdets if d.confidence >= cfg.conf_thresh]
        pc = _tow_counts(kept)
        for tow_id, n in sorted(_tow_counts(tdets).items()):
            if n > 0:
                count_pairs.append((n, pc.get(tow_id, 0)))
    series = CountSeries(tuple(count_pairs))
    counts = {"n_tows": series.n,
              "mae": mae(series) if series.n else None,
              "smape_pct": smape(series) if series.n else None}

    result = {
        "iou_thresh": cfg.iou_thresh,
        "conf_thresh": cfg.conf_thresh,
        "scenes": scene_ids,
        "scenes_without_predictions": missing,
        "categories": report,
        "direction": confusion.to_dict(),
        "barge_count": counts,
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    dump_json(result, args.out)
    f1_vessel = report["vessel_and_barge_classification"]["overall_instance_weighted"]["f1"]
    _summary(scenes=len(scene_ids), vessel_f1=_fmt(f1_vessel), direction_acc=_fmt(confusion.accuracy),
             barge_mae=_fmt(counts["mae"]), barge_smape=_fmt(counts["smape_pct"]))
    return EXIT_OK


def _fmt(v) -> str:
    return "na" if v is None else f"{v:.3f}"


def cmd_inventory(args) -> int:
    scenes = _load_scenes(args.detections)
    reports = {}
    if args.reports:
        rdir = Path(args.reports)
        files = sorted(rdir.glob("*.json")) if rdir.is_dir() else [rdir]
        for f in files:
            rep = read_report(f)
            reports[rep.scene_id] = rep
    per_scene = {}
    tows_out, infra = [], []
    for scene, dets in scenes:
        rep = reports.get(scene.scene_id)
        tows = build_tows(dets, rep)
        recs = build_infrastructure(dets, scene)
        if rep is not None:
            linked = {lp.detection_id for lp in rep.links} | set(rep.dark)
            leaked = [r.detection_id for r in recs if r.detection_id in linked]
            if leaked:
                raise InvariantViolation(f"infrastructure detections in fusion output: {leaked}")
        per_scene[scene.scene_id] = fleet_snapshot(dets, tows, rep.links if rep else (), rep.dark if rep else ())
        tows_out.extend(tows)
        infra.extend(recs)
    total = sum(per_scene.values(), start=fleet_snapshot((), ()))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json({
        "per_scene": {sid: snap.to_dict() for sid, snap in per_scene.items()},
        "total": total.to_dict(),
        "tows": [t.to_dict() for t in tows_out],
    }, out / "snapshot.json")
    (out / "snapshot.csv").write_text(snapshot_csv(per_scene, total), encoding="utf-8")
    dump_json(infrastructure_geojson(infra), out / "infrastructure.geojson")
    _summary(scenes=len(per_scene), tows=total.n_tows, barges=total.n_barges_in_tows,
             infrastructure=len(infra), dark=total.n_dark)
    return EXIT_OK


def cmd_select(args) -> int:
    records, _ = _read_ais(args.ais, args.strict)
    if not Path(args.catalog).is_file():
        raise FormatError(f"catalog {args.catalog} does not exist")
    catalog = load_catalog(args.catalog)
    sel = select_scenes(build_trajectories(records), catalog, args.half_window)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    dump_json([s.to_dict() for s in sel], args.out)
    _summary(catalog=len(catalog), selected=len(sel))
    return EXIT_OK


def _int_tuple(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_synth(args) -> int:
    sizes = args.scene_sizes
    n_scenes = len(sizes) if sizes else args.n_scenes
    n_vessels = sum(sizes) if sizes else args.n_vessels
    cfg = SynthConfig(
        seed=args.seed, n_vessels=n_vessels, n_scenes=n_scenes, scene_sizes=sizes,
        dark_fraction=args.dark_fraction, ais_period=args.ais_period, ais_span_s=args.ais_span,
        position_noise_m=args.position_noise, count_noise=args.count_noise,
        count_noise_lambda=args.count_noise_lambda, congestion_factor=args.congestion,
        infrastructure=args.infrastructure, moored_fleets_per_scene=args.moored_fleets,
        label_noise=args.label_noise, box_jitter_px=args.box_jitter,
        false_positives_per_scene=args.false_positives,
    )
    ds = generate(cfg)
    write_dataset(ds, args.out)
    _summary(scenes=len(ds.scenes), ais_records=len(ds.records),
             detections=sum(len(v) for v in ds.detections.values()), dark=len(ds.truth["dark"]), out=args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="riverfuse", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse and clean an AIS CSV file", formatter_class=fmt)
    s.add_argument("ais", help="AIS CSV (MMSI, BaseDateTime, LAT, LON, SOG, COG columns)")
    s.add_argument("--out", default=None, help="write the accepted records as normalized CSV")
    s.add_argument("--strict", action="store_true", help="require 9-digit MMSIs")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("fuse", help="link detections to AIS tracks and flag dark vessels", formatter_class=fmt)
    s.add_argument("--ais", required=True, help="AIS CSV file")
    s.add_argument("--detections", required=True, help="detection GeoJSON file or directory of them")
    s.add_argument("--out", required=True, help="output directory (reports/, linkage.csv)")
    s.add_argument("--half-window", type=float, default=DEFAULT_HALF_WINDOW_S,
                   help="AIS time window half-width around acquisition, seconds")
    s.add_argument("--centerline", default=None,
                   help="centerline GeoJSON; adds AIS-derived direction labels to links")
    s.add_argument("--jobs", type=int, default=1, help=f"parallel scene workers ({JOBS_ENV} overrides)")
    s.add_argument("--strict", action="store_true", help="require 9-digit MMSIs")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("evaluate", help="score predicted detections against truth", formatter_class=fmt)
    s.add_argument("--pred", required=True, help="predicted detection file or directory")
    s.add_argument("--truth", required=True, help="truth detection file or directory")
    s.add_argument("--out", default="metrics.json", help="metrics JSON output path")
    s.add_argument("--iou", type=float, default=0.5, help="minimum IoU for a positive match")
    s.add_argument("--conf", type=float, default=0.5, help="confidence cutoff for predictions")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("inventory", help="fleet snapshot and infrastructure inventory", formatter_class=fmt)
    s.add_argument("--detections", required=True, help="detection file or directory")
    s.add_argument("--reports", default=None, help="fusion report directory (for links and dark counts)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_inventory)

    s = sub.add_parser("select", help="pick catalog scenes that intersect AIS activity", formatter_class=fmt)
    s.add_argument("--ais", required=True, help="AIS CSV file")
    s.add_argument("--catalog", required=True, help="catalog index JSON")
    s.add_argument("--out", default="selection.json", help="selection JSON output path")
    s.add_argument("--half-window", type=float, default=DEFAULT_HALF_WINDOW_S,
                   help="time window half-width around acquisition, seconds")
    s.add_argument("--strict", action="store_true", help="require 9-digit MMSIs")
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("synth", help="generate a synthetic fixture directory", formatter_class=fmt)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.add_argument("--n-vessels", type=int, default=20, help="AIS-capable vessels in total")
    s.add_argument("--n-scenes", type=int, default=1, help="number of scenes")
    s.add_argument("--scene-sizes", type=_int_tuple, default=None,
                   help="comma-separated vessels per scene (overrides --n-vessels/--n-scenes)")
    s.add_argument("--dark-fraction", type=float, default=0.0, help="fraction of vessels with AIS suppressed")
    s.add_argument("--ais-period", type=int, default=60, help="AIS reporting interval, seconds")
    s.add_argument("--ais-span", type=int, default=600, help="AIS emitted this many seconds around each scene")
    s.add_argument("--position-noise", type=float, default=0.0, help="AIS position noise sigma, metres")
    s.add_argument("--count-noise", choices=("none", "poisson"), default="none",
                   help="barge-count noise of the synthetic detector")
    s.add_argument("--count-noise-lambda", type=float, default=2.0, help="Poisson mean for count noise")
    s.add_argument("--congestion", type=float, default=1.0, help="divides the along-river spacing of vessels")
    s.add_argument("--infrastructure", type=_int_tuple, default=(31, 3, 11),
                   help="docks,bridges,staging areas in total")
    s.add_argument("--moored-fleets", type=int, default=1, help="tug-less barge fleets per scene")
    s.add_argument("--label-noise", type=float, default=0.0, help="attribute flip probability in predictions")
    s.add_argument("--box-jitter", type=float, default=0.0, help="prediction box centre jitter, pixels")
    s.add_argument("--false-positives", type=int, default=2, help="low-confidence spurious boxes per scene")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"riverfuse: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (AisHeaderError, FormatError, SceneMismatchError, TaxonomyError, DegenerateGeometryError,
            TowError, SynthConfigError, ValueError, OSError) as exc:
        print(f"riverfuse: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
