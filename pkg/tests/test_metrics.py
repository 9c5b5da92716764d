import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from riverfuse.metrics import (CountSeries, MatchTally, accuracy, category_report, cover_key, f1, harmonic_f1,
                               mae, match_detections, precision, recall, smape)

from .conftest import make_det, rect


@pytest.mark.parametrize("p,r,printed", [(0.992, 1.000, 0.996), (0.904, 1.000, 0.950), (0.988, 1.000, 0.994),
                                         (0.990, 0.852, 0.916)])
def test_f1_reproduces_reported_rows(p, r, printed):
    assert harmonic_f1(p, r) == pytest.approx(printed, abs=0.002)


@given(st.floats(0, 1), st.floats(0, 1))
def test_f1_between_min_and_max(p, r):
    v = harmonic_f1(p, r)
    assert min(p, r) - 1e-12 <= v <= max(p, r) + 1e-12
    assert v <= (p + r) / 2 + 1e-12


def test_undefined_ratios_are_none():
    t = MatchTally()
    assert precision(t, "tugboat") is None and recall(t, "tugboat") is None and f1(t, "tugboat") is None
    assert harmonic_f1(0.0, 0.0) == 0.0
    assert accuracy(0, 0) is None and accuracy(3, 4) == 0.75


def test_match_counts_tp_fp_fn():
    truth = [make_det("t1", 10, 10), make_det("t2", 100, 100), make_det("t3", 200, 200, klass="cargo_ship")]
    pred = [make_det("p1", 10.5, 10), make_det("p2", 300, 300), make_det("p3", 200, 200, klass="bulk_carrier")]
    t = match_detections(pred, truth)
    assert (t["tugboat"].tp, t["tugboat"].fp, t["tugboat"].fn) == (1, 1, 1)
    assert (t["bulk_carrier"].fp, t["cargo_ship"].fn) == (1, 1)
    assert t.pairs == [("p1", "t1")]
    assert precision(t, "tugboat") == 0.5


def test_confidence_and_iou_thresholds():
    truth = [make_det("t", 10, 10)]
    low = [make_det("p", 10, 10, confidence=0.49)]
    assert match_detections(low, truth)["tugboat"].fn == 1
    assert match_detections(low, truth)["tugboat"].fp == 0
    assert match_detections(low, truth, conf_thresh=0.4)["tugboat"].tp == 1
    shifted = [make_det("p", 20, 10)]  # IoU 1/3
    assert match_detections(shifted, truth)["tugboat"].tp == 0
    assert match_detections(shifted, truth, iou_thresh=0.3)["tugboat"].tp == 1


def test_greedy_prefers_higher_iou():
    truth = [make_det("t1", 10, 10), make_det("t2", 14, 10)]
    pred = [make_det("p1", 13, 10)]
    assert match_detections(pred, truth).pairs == [("p1", "t2")]


def test_polygon_items_accepted():
    d = make_det("a", 0, 0)
    t = match_detections([(d, rect(0, 0, 1, 1))], [(d, rect(0, 0, 1, 1))])
    assert t["tugboat"].tp == 1


def test_attribute_key_skips_not_applicable():
    truth = [make_det("t", 10, 10, klass="hopper_barge", cover="covered"), make_det("u", 50, 50)]
    pred = [make_det("p", 10, 10, klass="hopper_barge", cover="uncovered")]
    t = match_detections(pred, truth, key=cover_key)
    assert t.labels() == ["covered", "uncovered"]
    assert t["covered"].fn == 1 and t["uncovered"].fp == 1


def test_tally_addition():
    a = match_detections([make_det("p", 0, 0)], [make_det("t", 0, 0)])
    b = match_detections([], [make_det("t2", 0, 0)])
    s = a + b
    assert (s["tugboat"].tp, s["tugboat"].fn) == (1, 1)
    assert s.pairs == [("p", "t")]


def test_smape_single_pair_exact():
    assert smape(CountSeries(((10, 6),))) == 50.0
    assert mae(CountSeries(((10, 6),))) == 4.0
    assert smape(CountSeries(((0, 0), (2, 2)))) == 0.0


def test_count_metrics_match_exact_rational_sum():
    rng = random.Random(9)
    pairs = tuple((rng.randint(0, 30), rng.randint(0, 30)) for _ in range(200))
    s = CountSeries(pairs)
    exact_mae = Fraction(sum(abs(x - y) for x, y in pairs), len(pairs))
    exact_smape = 100 * sum((Fraction(2 * abs(x - y), x + y) for x, y in pairs if x + y), Fraction(0)) / len(pairs)
    assert mae(s) == pytest.approx(float(exact_mae), rel=1e-12)
    assert smape(s) == pytest.approx(float(exact_smape), rel=1e-12)


def test_count_metrics_reject_empty_and_negative():
    with pytest.raises(ValueError):
        mae(CountSeries(()))
    with pytest.raises(ValueError):
        smape(CountSeries(()))
    with pytest.raises(ValueError):
        CountSeries(((-1, 2),))


def test_category_report_layout():
    truth = [make_det("t1", 10, 10), make_det("t2", 100, 100, klass="dock"),
             make_det("t3", 200, 200, klass="hopper_barge", cover="covered", op_status="staged")]
    report, tally = category_report([(truth, truth)])
    assert set(report) == {"vessel_and_barge_classification", "cover_status", "operational_status",
                           "infrastructure_objects"}
    v = report["vessel_and_barge_classification"]
    assert v["sub_classes"]["tugboat"]["f1"] == 1.0
    assert v["sub_classes"]["cargo_ship"]["f1"] is None
    assert v["overall_instance_weighted"] == {"instances": 2, "precision": 1.0, "recall": 1.0, "f1": 1.0}
    assert report["infrastructure_objects"]["sub_classes"]["dock"]["tp"] == 1
    assert report["operational_status"]["sub_classes"]["staged"]["tp"] == 1
    assert len(tally.pairs) == 3


def test_instance_weighting():
    truth = [make_det("a", 10, 10)] + [make_det(f"c{i}", 100 + 40 * i, 100, klass="cargo_ship") for i in range(3)]
    pred = [make_det("pc0", 100, 100, klass="cargo_ship")]
    report, _ = category_report([(pred, truth)])
    ov = report["vessel_and_barge_classification"]["overall_instance_weighted"]
    # tugboat recall 0 (1 instance), cargo recall 1/3 (3 instances)
    assert ov["recall"] == pytest.approx((0 * 1 + (1 / 3) * 3) / 4)
    assert ov["precision"] == pytest.approx(1.0)  # tugboat precision undefined, skipped


def test_iou_point_four_is_fp_and_fn():
    truth = [make_det("t", 10, 10, w=20, h=6)]
    pred = [make_det("p", 10 + 20 * (1 - 0.8 / 1.4) * 1.0, 10, w=20, h=6)]  # overlap 8/12 of width
    from riverfuse.geo import obb_pixel_polygon, rotated_iou
    iou = rotated_iou(obb_pixel_polygon(pred[0]), obb_pixel_polygon(truth[0]))
    assert iou == pytest.approx(0.4, abs=1e-9)
    t = match_detections(pred, truth)
    assert (t["tugboat"].tp, t["tugboat"].fp, t["tugboat"].fn) == (0, 1, 1)


def test_mae_hand_example():
    assert mae(CountSeries(((3, 4), (5, 7)))) == 1.5


def _max_matching(edges, n_pred):
    """Exhaustive maximum-cardinality bipartite matching over connected components."""
    adj = {i: [j for a, j in edges if a == i] for i in range(n_pred)}

    def best(preds, used):
        if not preds:
            return 0
        i, rest = preds[0], preds[1:]
        out = best(rest, used)
        for j in adj[i]:
            if j not in used:
                out = max(out, 1 + best(rest, used | {j}))
        return out

    # components keep the search small
    seen, total = set(), 0
    for start in range(n_pred):
        if start in seen or not adj[start]:
            continue
        comp_p, comp_t, stack = {start}, set(), [start]
        while stack:
            i = stack.pop()
            for j in adj[i]:
                if j not in comp_t:
                    comp_t.add(j)
                    for k in range(n_pred):
                        if j in adj[k] and k not in comp_p:
                            comp_p.add(k)
                            stack.append(k)
        seen |= comp_p
        total += best(sorted(comp_p), frozenset())
    return total


def test_greedy_matches_exhaustive_on_jittered_duplicates():
    from riverfuse.geo import obb_pixel_polygon, rotated_iou
    rng = random.Random(50)
    truth = [make_det(f"t{i:02d}", rng.uniform(0, 2000), rng.uniform(0, 2000), w=rng.uniform(15, 40),
                      h=rng.uniform(5, 12), angle=rng.uniform(-3, 3)) for i in range(50)]
    pred = [make_det(f"p{i:02d}", t.obb.center_col + rng.uniform(-1, 1), t.obb.center_row + rng.uniform(-1, 1),
                     w=t.obb.width, h=t.obb.height, angle=t.obb.angle) for i, t in enumerate(truth)]
    for k in range(10):
        t = truth[rng.randrange(50)]
        pred.append(make_det(f"q{k:02d}", t.obb.center_col + rng.uniform(-2, 2), t.obb.center_row + rng.uniform(-2, 2),
                             w=t.obb.width, h=t.obb.height, angle=t.obb.angle))
    edges = [(i, j) for i, p in enumerate(pred) for j, t in enumerate(truth)
             if rotated_iou(obb_pixel_polygon(p), obb_pixel_polygon(t)) >= 0.5]
    tp = _max_matching(edges, len(pred))
    tally = match_detections(pred, truth)
    assert tally["tugboat"].tp == tp
    assert tally["tugboat"].fp == len(pred) - tp and tally["tugboat"].fn == len(truth) - tp
