import math

import numpy as np
import pytest

from core.boxes import (
    BoxConfig,
    PseudoLabel,
    boxes_from_segmentation,
    extract_box,
    inflate,
    oracle_extract,
    parse_labels,
    read_labels,
    render_labels,
    write_labels,
)
from core.cluster import SegmentationResult
from core.errors import ConfigError, LabelFormatError
from core.geometry import Box3D, rotate_xy
from core.scene import FRAME_DT, HORIZON
from tests.factories import make_filtered_frame, two_car_frame

CORNERS = np.array([[x, y, z] for x in (-2.0, 2.0) for y in (-1.0, 1.0) for z in (-0.75, 0.75)])


def moving(points: np.ndarray, velocity) -> np.ndarray:
    steps = np.arange(HORIZON + 1) * FRAME_DT
    return points[:, None, :] + np.asarray(velocity)[None, None, :] * steps[None, :, None]


def test_extract_axis_aligned_box():
    pts = CORNERS + np.array([10.0, 5.0, 1.0])
    box = extract_box(pts, moving(pts, [5.0, 0.0, 0.0]))
    assert box.yaw == pytest.approx(0.0)
    np.testing.assert_allclose(box.center, (10.0, 5.0, 1.0), atol=1e-9)
    np.testing.assert_allclose(box.dims, (4.0, 2.0, 1.5), atol=1e-9)


def test_heading_follows_trajectory():
    yaw = 2.0
    pts = rotate_xy(CORNERS, yaw)
    box = extract_box(pts, moving(pts, [3.0 * math.cos(yaw), 3.0 * math.sin(yaw), 0.0]))
    assert box.yaw == pytest.approx(yaw)
    np.testing.assert_allclose(box.dims, (4.0, 2.0, 1.5), atol=1e-9)


def test_static_cluster_uses_principal_axis():
    pts = rotate_xy(CORNERS, math.pi / 2)
    box = extract_box(pts, moving(pts, [0.0, 0.0, 0.0]))
    assert abs(box.yaw) == pytest.approx(math.pi / 2)
    np.testing.assert_allclose(box.dims, (4.0, 2.0, 1.5), atol=1e-9)


def test_centroid_mode():
    pts = np.array([[0.0, 0, 0], [0.0, 0, 1.0], [3.0, 1, 0], [1.0, 2.0, 1.0]])
    box = extract_box(pts, moving(pts, [2.0, 0.0, 0.0]), BoxConfig(center_mode="centroid"))
    np.testing.assert_allclose(box.center, pts.mean(axis=0), atol=1e-9)
    np.testing.assert_allclose(box.dims, (2 * 2.0, 2 * 1.25, 1.0), atol=1e-9)


def test_flat_cluster_rejected():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 1.0, 0]])
    assert extract_box(pts, moving(pts, [1.0, 0.0, 0.0])) is None
    assert extract_box(pts[:1], moving(pts[:1], [1.0, 0.0, 0.0])) is None


def test_inflation_profiles():
    box = Box3D((0, 0, 0), (0.5, 1.5, 1.0), 0.3)
    assert inflate(box, BoxConfig().inflation_minima()).dims == (1.0, 1.5, 2.0)
    assert inflate(box, BoxConfig(profile="av2").inflation_minima()).dims == (0.75, 1.5, 1.75)
    assert inflate(box, BoxConfig(profile="none").inflation_minima()) is box
    custom = BoxConfig(profile="custom", minima=(2.0, 2.0, 2.0)).inflation_minima()
    grown = inflate(box, custom)
    assert grown.dims == (2.0, 2.0, 2.0)
    assert grown.center == box.center and grown.yaw == box.yaw


def test_box_config_rejects():
    with pytest.raises(ConfigError):
        BoxConfig(profile="kitti")
    with pytest.raises(ConfigError):
        BoxConfig(minima=(1.0, 0.0, 1.0))


def test_boxes_from_segmentation_keeps_scores():
    frame = two_car_frame()
    ids = frame.gt_instance_ids
    result = SegmentationResult(
        clusters=[np.flatnonzero(ids == 0), np.flatnonzero(ids == 1)],
        scores=[0.9, 0.6],
    )
    labels = boxes_from_segmentation(frame, result)
    assert [lab.score for lab in labels] == [0.9, 0.6]
    assert labels[0].box.center[0] == pytest.approx(10.0, abs=0.5)
    assert labels[1].box.yaw == pytest.approx(-math.pi / 2)


def test_oracle_extract_thresholds():
    frame = make_filtered_frame([
        (0, "vehicle", (10.0, 0.0, 0.9), (4.5, 2.0, 1.6), (5.0, 0.0), 30),
        (1, "pedestrian", (-5.0, 3.0, 0.9), (0.8, 0.8, 1.7), (0.0, 1.5), 3),
        (2, "vehicle", (20.0, -8.0, 0.9), (4.5, 2.0, 1.6), (0.0, 0.0), 25),
    ])
    assert len(oracle_extract(frame, x_f=2)) == 2
    assert len(oracle_extract(frame, x_f=5)) == 1
    assert len(oracle_extract(frame, x_f=2, moving_only=False)) == 3


def test_label_file_round_trip(tmp_path):
    labels = [
        PseudoLabel(Box3D((1.5, -2.0, 0.8), (4.0, 2.0, 1.6), 0.25), 0.875),
        PseudoLabel(Box3D((0.0, 3.0, 1.0), (1.0, 1.0, 2.0), -1.5), 1.0),
    ]
    path = write_labels(labels, tmp_path / "labels" / "frame_000000.txt")
    assert read_labels(path) == labels
    assert render_labels([]) == ""


def test_label_parse_errors():
    with pytest.raises(LabelFormatError, match="line 2"):
        parse_labels("0 0 0 1 1 1 0 1\n0 0 0 1 1\n")
    with pytest.raises(LabelFormatError):
        parse_labels("0 0 0 1 -1 1 0 1\n")
    with pytest.raises(LabelFormatError):
        parse_labels("0 0 0 1 x 1 0 1\n")
