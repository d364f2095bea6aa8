"""Constructeurs de donnees de test: petites scenes et frames filtrees a la main"""

import math
from typing import Iterable, Optional, Sequence as Seq, Tuple

import numpy as np

from core.config import RunConfig, RunSettings
from core.geometry import EgoPose, rotate_xy
from core.graphbuild import FeatureConfig
from core.mpn import MpnConfig
from core.preprocess import FilteredFrame
from core.scene import FRAME_DT, HORIZON, GtBox, SceneConfig
from core.training import TrainConfig

SMALL_SCENE = SceneConfig(
    num_frames=8,
    num_vehicles=2,
    num_pedestrians=1,
    num_cyclists=1,
    num_parked=1,
    num_structures=2,
    ground_points=400,
    density=6.0,
    spawn_length=60.0,
    spawn_width=30.0,
)

TINY_FEATURES = FeatureConfig(k=6)
TINY_MPN = MpnConfig(hidden_node=8, hidden_edge=8, layers=2, dropout=0.0)
TINY_TRAIN = TrainConfig(epochs=3, batch_graphs=2, lr=0.01, frame_stride=2)
# trois sequences: deux pour train_pseudo, une pour val_pseudo
TINY_RUN = RunConfig(
    scene=SMALL_SCENE,
    graph=TINY_FEATURES,
    mpn=TINY_MPN,
    train=TINY_TRAIN,
    run=RunSettings(jobs=2, ledger="", train_pseudo=0.6, train_det=0.0, val_pseudo=0.4, val_det=0.0),
)


def object_points(center: Seq[float], dims: Seq[float], yaw: float, count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Points tires a l'interieur d'une boite (marge de 5%)"""
    local = rng.uniform(-0.45, 0.45, size=(count, 3)) * np.asarray(dims)
    return rotate_xy(local, yaw) + np.asarray(center)


def make_filtered_frame(objects: Iterable[Tuple], background: Optional[np.ndarray] = None,
                        seed: int = 0) -> FilteredFrame:
    """
    Frame filtree synthetique

    Args:
        objects: (instance_id, class_name, center, dims, velocity_xy, count) par objet;
            count = 0 ajoute la boite sans point
        background: Points sans identite (trajectoires immobiles)
        seed: Graine du tirage des points
    """
    rng = np.random.default_rng(seed)
    points, ids, velocities, boxes = [], [], [], []
    for instance_id, class_name, center, dims, velocity, count in objects:
        vx, vy = velocity
        yaw = math.atan2(vy, vx) if math.hypot(vx, vy) > 0 else 0.0
        boxes.append(GtBox(instance_id, class_name, tuple(center), tuple(dims), yaw, (vx, vy)))
        if count:
            points.append(object_points(center, dims, yaw, count, rng))
            ids.append(np.full(count, instance_id, dtype=np.int64))
            velocities.append(np.tile([vx, vy, 0.0], (count, 1)))
    if background is not None and len(background):
        background = np.asarray(background, dtype=np.float64).reshape(-1, 3)
        points.append(background)
        ids.append(np.full(len(background), -1, dtype=np.int64))
        velocities.append(np.zeros((len(background), 3)))
    pts = np.concatenate(points) if points else np.zeros((0, 3))
    vel = np.concatenate(velocities) if velocities else np.zeros((0, 3))
    steps = np.arange(HORIZON + 1) * FRAME_DT
    traj = pts[:, None, :] + vel[:, None, :] * steps[None, :, None]
    return FilteredFrame(
        points=pts,
        origin_index=np.arange(len(pts)),
        trajectories=traj,
        gt_instance_ids=np.concatenate(ids) if ids else np.zeros(0, dtype=np.int64),
        gt_boxes=tuple(sorted(boxes, key=lambda b: b.instance_id)),
        timestamp_s=0.0,
        ego_pose=EgoPose(0.0, 0.0, 0.0, 0.0),
    )


def two_car_frame(seed: int = 0) -> FilteredFrame:
    """Deux vehicules eloignes, vitesses opposees, et un vehicule gare"""
    return make_filtered_frame(
        [
            (0, "vehicle", (10.0, 5.0, 0.9), (4.5, 2.0, 1.6), (6.0, 0.0), 60),
            (1, "vehicle", (-12.0, -6.0, 0.9), (4.5, 2.0, 1.6), (0.0, -4.0), 60),
            (2, "vehicle", (25.0, 12.0, 0.9), (4.5, 2.0, 1.6), (0.0, 0.0), 0),
        ],
        seed=seed,
    )


