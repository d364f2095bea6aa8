import numpy as np
import pytest

from core.errors import ConfigError, DataError
from core.scene import (
    FRAME_DT,
    HORIZON,
    GtBox,
    SceneConfig,
    corrupt_trajectories,
    ego_pose_at,
    frame_seed,
    generate_sequence,
    gt_trajectories,
    moving_instance_ids,
)
from tests.factories import SMALL_SCENE


def test_same_seed_same_sequence(small_sequence):
    assert generate_sequence(SMALL_SCENE, 7) == small_sequence
    assert generate_sequence(SMALL_SCENE, 8) != small_sequence


def test_sequence_layout(small_sequence):
    assert len(small_sequence) == SMALL_SCENE.num_frames
    assert small_sequence.seed == 7
    assert small_sequence.region == (100.0, 40.0)
    for t, frame in enumerate(small_sequence.frames):
        assert frame.timestamp_s == pytest.approx(t * FRAME_DT)
        assert len(frame.points) == len(frame.gt_instance_ids)
        ids = [b.instance_id for b in frame.gt_boxes]
        assert ids == sorted(ids)
        assert set(frame.gt_instance_ids[frame.gt_instance_ids >= 0].tolist()) <= set(ids)


def test_boxes_per_class(small_sequence):
    boxes = small_sequence.frames[0].gt_boxes
    names = [b.class_name for b in boxes]
    assert names.count("vehicle") == SMALL_SCENE.num_vehicles + SMALL_SCENE.num_parked
    assert names.count("pedestrian") == SMALL_SCENE.num_pedestrians
    assert names.count("cyclist") == SMALL_SCENE.num_cyclists
    parked = [b for b in boxes if b.speed == 0.0]
    assert len(parked) == SMALL_SCENE.num_parked


def test_ego_pose_straight_line():
    pose = ego_pose_at(SceneConfig(ego_speed=5.0), 1.0)
    assert tuple(pose) == pytest.approx((5.0, 0.0, 0.0, 0.0))


def test_ego_pose_turning():
    pose = ego_pose_at(SceneConfig(ego_speed=5.0, ego_yaw_rate=0.1), 2.0)
    assert pose.yaw == pytest.approx(0.2)
    assert pose.x == pytest.approx(50.0 * np.sin(0.2))
    assert pose.y == pytest.approx(50.0 * (1 - np.cos(0.2)))


def test_noise_points_have_no_identity():
    cfg = SceneConfig(num_frames=2, num_vehicles=1, num_pedestrians=0, num_cyclists=0, num_parked=0,
                      num_structures=0, ground_points=0, noise_points=50)
    frame = generate_sequence(cfg, 1).frames[0]
    assert int(np.sum(frame.gt_instance_ids == -1)) == 50


def test_gt_trajectories_follow_box_velocity(small_sequence):
    t = 2
    frame = small_sequence.frames[t]
    traj = gt_trajectories(small_sequence, t)
    assert traj.shape == (len(frame.points), HORIZON + 1, 3)
    np.testing.assert_array_equal(traj[:, 0], frame.points)
    by_id = frame.box_by_id()
    moving = [m for m in moving_instance_ids(frame.gt_boxes).tolist() if m in frame.gt_instance_ids]
    assert moving
    i = int(np.flatnonzero(frame.gt_instance_ids == moving[0])[0])
    vx, vy = by_id[moving[0]].velocity
    expected = frame.points[i] + np.array([vx, vy, 0.0]) * 10 * FRAME_DT
    np.testing.assert_allclose(traj[i, 10], expected)
    static = np.flatnonzero(frame.gt_instance_ids < 0)
    np.testing.assert_array_equal(traj[static, -1], frame.points[static])


def test_moving_ids_strict_threshold():
    boxes = [
        GtBox(0, "vehicle", (0, 0, 0), (4, 2, 1.5), 0.0, (1.0, 0.0)),
        GtBox(1, "pedestrian", (5, 0, 0), (1, 1, 1.7), 0.0, (0.0, 1.5)),
        GtBox(2, "vehicle", (9, 0, 0), (4, 2, 1.5), 0.0, (0.0, 0.0)),
    ]
    assert moving_instance_ids(boxes, 1.0).tolist() == [1]


def test_gt_box_validation():
    with pytest.raises(DataError):
        GtBox(0, "truck", (0, 0, 0), (1, 1, 1), 0.0, (0.0, 0.0))
    with pytest.raises(DataError):
        GtBox(0, "vehicle", (0, 0, 0), (1, -1, 1), 0.0, (0.0, 0.0))


@pytest.mark.parametrize("changes", [
    {"num_frames": 0},
    {"vehicle_speed": (5.0, 1.0)},
    {"density": 0.0},
    {"spawn_length": 400.0},
])
def test_scene_config_rejects(changes):
    with pytest.raises(ConfigError):
        SceneConfig(**changes)


def test_corrupt_trajectories_keeps_origin():
    traj = np.zeros((40, HORIZON + 1, 3))
    traj[:, :, 0] = np.arange(HORIZON + 1) * 0.5
    same = corrupt_trajectories(traj, 0.0, 0.0, frame_seed(0, 0))
    np.testing.assert_array_equal(same, traj)
    noisy = corrupt_trajectories(traj, 0.3, 0.5, frame_seed(0, 0))
    np.testing.assert_array_equal(noisy[:, 0], traj[:, 0])
    assert not np.allclose(noisy, traj)
    again = corrupt_trajectories(traj, 0.3, 0.5, frame_seed(0, 0))
    np.testing.assert_array_equal(noisy, again)
