import math

import numpy as np
import pytest

from core.errors import ConfigError
from core.evaluation import (
    EvalConfig,
    FrameMetrics,
    MetricsReport,
    aggregate,
    box3d_iou,
    greedy_match,
    gt_box3d,
    match_and_score,
    per_class_oracle,
    seg_iou_matrix,
)
from core.geometry import Box3D
from tests.factories import make_filtered_frame, two_car_frame


def test_box3d_iou_cases():
    a = Box3D((0, 0, 0), (2.0, 2.0, 2.0), 0.0)
    assert box3d_iou(a, a) == pytest.approx(1.0)
    assert box3d_iou(a, Box3D((1, 0, 0), (2.0, 2.0, 2.0), 0.0)) == pytest.approx(1 / 3)
    assert box3d_iou(a, Box3D((5, 0, 0), (2.0, 2.0, 2.0), 0.0)) == 0.0
    assert box3d_iou(a, Box3D((0, 0, 3), (2.0, 2.0, 2.0), 0.0)) == 0.0
    assert box3d_iou(a, Box3D((0, 0, 0), (2.0, 2.0, 2.0), math.pi / 2)) == pytest.approx(1.0)


def test_seg_iou_matrix():
    pts = np.array([[0.0, 0, 0], [0.5, 0, 0], [3.0, 0, 0]])
    preds = [Box3D((0.25, 0, 0), (1.0, 1.0, 1.0), 0.0), Box3D((10, 0, 0), (1.0, 1.0, 1.0), 0.0)]
    gts = [Box3D((1.5, 0, 0), (4.0, 1.0, 1.0), 0.0)]
    np.testing.assert_allclose(seg_iou_matrix(preds, gts, pts), [[2 / 3], [0.0]])


def test_greedy_match():
    iou = np.array([[0.9, 0.5], [0.8, 0.1]])
    assert greedy_match(iou, 0.4) == [(0, 0)]
    assert greedy_match(iou, 0.05) == [(0, 0), (1, 1)]
    assert greedy_match(np.zeros((0, 2)), 0.4) == []


def test_perfect_predictions():
    frame = two_car_frame()
    targets = [gt_box3d(b) for b in frame.gt_boxes if b.speed > 1.0]
    for kind in ("seg", "box3d"):
        metrics = match_and_score(targets, frame, EvalConfig(iou_kind=kind))
        assert metrics.counts[0.4] == [2, 0, 0]
        assert metrics.counts[0.7] == [2, 0, 0]
        assert metrics.unmatched == 0
        assert metrics.class_counts[("vehicle", 0.7)] == [2, 2]


def test_static_objects_are_ignored_not_penalised():
    frame = two_car_frame()
    parked = next(b for b in frame.gt_boxes if b.speed == 0.0)
    preds = [gt_box3d(parked)]
    ignored = match_and_score(preds, frame, EvalConfig(iou_kind="box3d"))
    assert ignored.counts[0.4] == [0, 0, 2]
    strict = match_and_score(preds, frame, EvalConfig(iou_kind="box3d", mode="moving_only"))
    assert strict.counts[0.4] == [0, 1, 2]


def test_predictions_outside_region_dropped():
    frame = two_car_frame()
    preds = [Box3D((80.0, 0.0, 1.0), (4.0, 2.0, 1.5), 0.0)]
    metrics = match_and_score(preds, frame, EvalConfig())
    assert metrics.predictions == 0
    assert metrics.counts[0.4] == [0, 0, 2]


def test_unmatched_false_positives():
    frame = two_car_frame()
    preds = [Box3D((0.0, 15.0, 1.0), (2.0, 2.0, 2.0), 0.0)]
    recalls, ufp = per_class_oracle(preds, frame, EvalConfig())
    assert ufp == pytest.approx(100.0)
    assert recalls[("vehicle", 0.4)] == 0.0


def test_objects_without_points_are_not_targets():
    frame = make_filtered_frame([
        (0, "vehicle", (10.0, 0.0, 0.9), (4.5, 2.0, 1.6), (5.0, 0.0), 30),
        (1, "cyclist", (-6.0, 4.0, 0.9), (1.8, 0.8, 1.7), (3.0, 0.0), 0),
    ])
    metrics = match_and_score([], frame, EvalConfig())
    assert metrics.counts[0.4] == [0, 0, 1]


def test_metrics_report_aggregation():
    a = FrameMetrics(counts={0.4: [3, 1, 1], 0.7: [2, 2, 2]}, predictions=4, unmatched=1)
    b = FrameMetrics(counts={0.4: [1, 1, 1], 0.7: [0, 2, 2]}, predictions=2, unmatched=0)
    report = aggregate([a, b])
    assert report.tp_fp_fn(0.4) == (4, 2, 2)
    assert report.precision(0.4) == pytest.approx(4 / 6)
    assert report.recall(0.4) == pytest.approx(4 / 6)
    assert report.f1(0.4) == pytest.approx(4 / 6)
    assert report.f1(0.7) == pytest.approx(1 / 3)
    assert report.ufp_percent == pytest.approx(100 / 6)
    rows = report.rows()
    assert rows[0][:4] == ["threshold", "precision", "recall", "f1"]
    assert rows[1][0] == "0.4000"


def test_empty_report():
    report = MetricsReport()
    assert report.precision(0.4) == 0.0
    assert report.f1(0.7) == 0.0
    assert report.ufp_percent == 0.0


def test_eval_config_rejects():
    with pytest.raises(ConfigError):
        EvalConfig(iou_kind="bev")
    with pytest.raises(ConfigError):
        EvalConfig(thresholds=())
    with pytest.raises(ConfigError):
        EvalConfig(mode="strict")


def inside(box: Box3D, points: np.ndarray) -> np.ndarray:
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rel = points - np.asarray(box.center)
    local_x = c * rel[:, 0] + s * rel[:, 1]
    local_y = -s * rel[:, 0] + c * rel[:, 1]
    half = np.asarray(box.dims) / 2
    return (np.abs(local_x) <= half[0]) & (np.abs(local_y) <= half[1]) & (np.abs(rel[:, 2]) <= half[2])


def sample_box(box: Box3D, count: int, rng: np.random.Generator) -> np.ndarray:
    local = rng.uniform(-0.5, 0.5, size=(count, 3)) * np.asarray(box.dims)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    world = np.column_stack([c * local[:, 0] - s * local[:, 1], s * local[:, 0] + c * local[:, 1], local[:, 2]])
    return world + np.asarray(box.center)


def random_box(rng: np.random.Generator) -> Box3D:
    return Box3D(
        tuple(rng.uniform(-1.0, 1.0, size=3)),
        tuple(rng.uniform(0.5, 3.0, size=3)),
        float(rng.uniform(-math.pi, math.pi)),
    )


def test_box3d_iou_matches_monte_carlo():
    rng = np.random.default_rng(11)
    samples = 200_000
    for _ in range(60):
        a, b = random_box(rng), random_box(rng)
        inter = a.volume * np.mean(inside(b, sample_box(a, samples, rng)))
        expected = inter / (a.volume + b.volume - inter)
        assert box3d_iou(a, b) == pytest.approx(expected, abs=0.01)
        assert box3d_iou(a, b) == pytest.approx(box3d_iou(b, a), abs=1e-12)
