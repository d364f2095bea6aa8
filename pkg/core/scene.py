"""
Scene Generator - Sequences Lidar synthetiques deterministes
=============================================================

Genere des sequences de nuages de points a 10 Hz avec vehicule ego,
objets mobiles (boites echantillonnees en surface), objets gares,
structures statiques, bruit uniforme et nappe de sol.

Features:
- Densite de points proportionnelle a 1/distance
- Trajectoires de points exactes (25 positions) derivees du mouvement rigide
- Corruption optionnelle des trajectoires (bruit gaussien + trajectoires aleatoires)
- Sortie bit-identique pour un couple (config, seed)

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Sequence as Seq, Tuple

import numpy as np

from core.errors import ConfigError, DataError
from core.geometry import EgoPose, rotate_xy, rotation_xy, world_to_sensor, wrap_angle

logger = logging.getLogger(__name__)

FRAME_DT = 0.1
HORIZON = 24
GENERATION_DISC_M = 160.0
CLASS_NAMES = ("vehicle", "pedestrian", "cyclist", "clutter")

# Dimensions moyennes (l, w, h) par classe
CLASS_TEMPLATES = {
    "vehicle": (4.75, 2.0, 1.75),
    "pedestrian": (0.9, 0.85, 1.75),
    "cyclist": (1.8, 0.85, 1.75),
    "clutter": (1.0, 1.0, 1.0),
}

# Structures statiques sans identite (poteaux, murets)
STRUCTURE_TEMPLATES = ((0.3, 0.3, 3.5), (3.0, 0.5, 1.5))


@dataclass(frozen=True)
class SceneConfig:
    """Parametres du generateur de scenes"""

    num_frames: int = 20
    num_vehicles: int = 4
    num_pedestrians: int = 3
    num_cyclists: int = 1
    num_debris: int = 0
    num_parked: int = 2
    num_structures: int = 4
    density: float = 8.0
    reference_range: float = 10.0
    noise_fraction: float = 0.0
    noise_points: int = 0
    ground_points: int = 1500
    ego_speed: float = 5.0
    ego_yaw_rate: float = 0.0
    spawn_length: float = 90.0
    spawn_width: float = 36.0
    region_length: float = 100.0
    region_width: float = 40.0
    vehicle_speed: Tuple[float, float] = (1.0, 15.0)
    pedestrian_speed: Tuple[float, float] = (0.5, 2.0)
    cyclist_speed: Tuple[float, float] = (2.0, 8.0)
    debris_speed: Tuple[float, float] = (1.0, 3.0)
    size_scatter: float = 0.10
    jitter: float = 0.0
    min_separation: float = 0.5

    def __post_init__(self):
        if self.num_frames < 1:
            raise ConfigError("scene.num_frames must be >= 1")
        for name in ("num_vehicles", "num_pedestrians", "num_cyclists", "num_debris",
                     "num_parked", "num_structures", "noise_points", "ground_points"):
            if getattr(self, name) < 0:
                raise ConfigError(f"scene.{name} must be >= 0")
        if not self.density > 0:
            raise ConfigError("scene.density must be > 0")
        if self.noise_fraction < 0 or self.jitter < 0 or self.size_scatter < 0:
            raise ConfigError("scene.noise_fraction, scene.jitter and scene.size_scatter must be >= 0")
        for name in ("vehicle_speed", "pedestrian_speed", "cyclist_speed", "debris_speed"):
            low, high = getattr(self, name)
            if low < 0 or high < low:
                raise ConfigError(f"scene.{name} must satisfy 0 <= low <= high")
        if self.max_reach() > GENERATION_DISC_M:
            raise ConfigError(
                f"scene places objects up to {self.max_reach():.1f} m from the origin, "
                f"beyond the {GENERATION_DISC_M:.0f} m generation disc"
            )

    @property
    def duration_s(self) -> float:
        """Duree couverte par les frames plus l'horizon de trajectoire"""
        return (self.num_frames - 1 + HORIZON) * FRAME_DT

    def max_reach(self) -> float:
        """Distance maximale atteignable par un objet depuis l'origine"""
        speeds = [self.vehicle_speed[1], self.pedestrian_speed[1],
                  self.cyclist_speed[1], self.debris_speed[1]]
        spawn = math.hypot(self.spawn_length / 2.0, self.spawn_width / 2.0)
        ego = self.ego_speed * self.duration_s
        return spawn + ego + max(speeds) * self.duration_s + max(CLASS_TEMPLATES["vehicle"])

    def echo(self) -> Dict[str, str]:
        """Copie texte de la config (pour le manifest)"""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                out[f.name] = ",".join(repr(v) for v in value)
            else:
                out[f.name] = repr(value)
        return out


@dataclass(frozen=True)
class GtBox:
    """Boite verite terrain exprimee dans le repere capteur de sa frame"""

    instance_id: int
    class_name: str
    center: Tuple[float, float, float]
    dims: Tuple[float, float, float]
    yaw: float
    velocity: Tuple[float, float]

    def __post_init__(self):
        if self.class_name not in CLASS_NAMES:
            raise DataError(f"unknown class {self.class_name!r}")
        if any(not d > 0 for d in self.dims):
            raise DataError(f"GtBox {self.instance_id}: dims must be > 0")
        if abs(self.yaw) > math.pi + 1e-12:
            raise DataError(f"GtBox {self.instance_id}: |yaw| must be <= pi")

    @property
    def speed(self) -> float:
        return math.hypot(self.velocity[0], self.velocity[1])


@dataclass(frozen=True, eq=False)
class Frame:
    """
    Une frame Lidar

    points: (N,3) repere capteur
    gt_instance_ids: (N,) entiers, -1 pour fond/bruit
    """

    timestamp_s: float
    ego_pose: EgoPose
    points: np.ndarray
    gt_instance_ids: np.ndarray
    gt_boxes: Tuple[GtBox, ...]

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        ids = np.asarray(self.gt_instance_ids, dtype=np.int64).reshape(-1)
        points.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "gt_instance_ids", ids)
        object.__setattr__(self, "ego_pose", EgoPose(*self.ego_pose))
        object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.timestamp_s == other.timestamp_s
            and tuple(self.ego_pose) == tuple(other.ego_pose)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.gt_instance_ids, other.gt_instance_ids)
            and self.gt_boxes == other.gt_boxes
        )

    def box_by_id(self) -> Dict[int, GtBox]:
        return {box.instance_id: box for box in self.gt_boxes}


@dataclass(frozen=True, eq=False)
class Sequence:
    """Sequence ordonnee de frames avec sa graine et sa region d'evaluation"""

    frames: Tuple[Frame, ...]
    seed: int
    region: Tuple[float, float] = (100.0, 40.0)
    config: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sequence):
            return NotImplemented
        return (
            self.seed == other.seed
            and tuple(self.region) == tuple(other.region)
            and dict(self.config) == dict(other.config)
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class _SceneObject:
    instance_id: int
    class_name: str
    dims: np.ndarray
    yaw: float
    start: np.ndarray
    velocity: np.ndarray

    @property
    def radius(self) -> float:
        return math.hypot(self.dims[0], self.dims[1]) / 2.0


def quantize(values: np.ndarray) -> np.ndarray:
    """Arrondit a 9 chiffres significatifs (representation exacte du format fichier)"""
    values = np.asarray(values, dtype=np.float64)
    flat = [float(f"{v:.9g}") for v in values.ravel().tolist()]
    return np.array(flat, dtype=np.float64).reshape(values.shape)


def _q(value: float) -> float:
    return float(f"{value:.9g}")


def ego_pose_at(cfg: SceneConfig, t: float) -> EgoPose:
    """Pose ego a l'instant t (vitesse constante, lacet a vitesse constante)"""
    w = cfg.ego_yaw_rate
    if abs(w) < 1e-12:
        x, y = cfg.ego_speed * t, 0.0
    else:
        x = cfg.ego_speed / w * math.sin(w * t)
        y = cfg.ego_speed / w * (1.0 - math.cos(w * t))
    return EgoPose(x, y, 0.0, wrap_angle(w * t))


def _sample_dims(rng: np.random.Generator, mean: Seq[float], scatter: float) -> np.ndarray:
    span = math.log1p(scatter)
    return np.asarray(mean) * np.exp(rng.uniform(-span, span, size=3))


def _min_distance(a: _SceneObject, b: _SceneObject, duration: float) -> float:
    d0 = a.start[:2] - b.start[:2]
    dv = a.velocity[:2] - b.velocity[:2]
    denom = float(dv @ dv)
    t = 0.0 if denom < 1e-12 else min(max(-float(d0 @ dv) / denom, 0.0), duration)
    return float(np.linalg.norm(d0 + dv * t))


def _place_objects(cfg: SceneConfig, rng: np.random.Generator) -> Tuple[List[_SceneObject], List[_SceneObject]]:
    """Place objets et structures sans collision sur toute la duree"""

    plan = (
        [("vehicle", cfg.vehicle_speed)] * cfg.num_vehicles
        + [("pedestrian", cfg.pedestrian_speed)] * cfg.num_pedestrians
        + [("cyclist", cfg.cyclist_speed)] * cfg.num_cyclists
        + [("clutter", cfg.debris_speed)] * cfg.num_debris
        + [("vehicle", (0.0, 0.0))] * cfg.num_parked
    )
    structures = [STRUCTURE_TEMPLATES[i % len(STRUCTURE_TEMPLATES)] for i in range(cfg.num_structures)]

    placed: List[_SceneObject] = []

    def place(instance_id: int, class_name: str, mean_dims, speed_range) -> _SceneObject:
        for _ in range(200):
            dims = _sample_dims(rng, mean_dims, cfg.size_scatter)
            yaw = float(rng.uniform(-math.pi, math.pi))
            speed = float(rng.uniform(speed_range[0], speed_range[1]))
            start = np.array([
                rng.uniform(-cfg.spawn_length / 2.0, cfg.spawn_length / 2.0),
                rng.uniform(-cfg.spawn_width / 2.0, cfg.spawn_width / 2.0),
                dims[2] / 2.0,
            ])
            velocity = np.array([speed * math.cos(yaw), speed * math.sin(yaw), 0.0])
            candidate = _SceneObject(instance_id, class_name, dims, yaw, start, velocity)
            if all(
                _min_distance(candidate, other, cfg.duration_s) > candidate.radius + other.radius + cfg.min_separation
                for other in placed
            ):
                placed.append(candidate)
                return candidate
        raise ConfigError(f"cannot place object {instance_id} without collision; reduce object counts")

    objects = [place(i, name, CLASS_TEMPLATES[name], speeds) for i, (name, speeds) in enumerate(plan)]
    statics = [place(-1, "clutter", dims, (0.0, 0.0)) for dims in structures]
    return objects, statics


def _sample_box_surface(rng: np.random.Generator, dims: np.ndarray, count: int) -> np.ndarray:
    """Points uniformes sur les 4 faces laterales et le dessus d'une boite (repere local)"""
    l, w, h = dims
    # faces: +x, -x, +y, -y, top
    areas = np.array([w * h, w * h, l * h, l * h, l * w])
    face = rng.choice(5, size=count, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=count)
    v = rng.uniform(-0.5, 0.5, size=count)
    pts = np.zeros((count, 3))
    for f_idx, (axis_fixed, sign) in enumerate(((0, 1), (0, -1), (1, 1), (1, -1), (2, 1))):
        sel = face == f_idx
        free = [a for a in range(3) if a != axis_fixed]
        pts[sel, axis_fixed] = sign * dims[axis_fixed] / 2.0
        pts[sel, free[0]] = u[sel] * dims[free[0]]
        pts[sel, free[1]] = v[sel] * dims[free[1]]
    return pts


def _surface_area(dims: np.ndarray) -> float:
    l, w, h = dims
    return 2.0 * (l * h + w * h) + l * w


def _static_point_sets(
    cfg: SceneConfig,
    rng: np.random.Generator,
    statics: List[_SceneObject],
    poses: List[EgoPose],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Points monde fixes de la geometrie statique (sol, structures, objets gares)

    Un meme point monde reapparait dans chaque frame, comme un motif de
    faisceaux qui frappe une surface immobile.
    """
    chunks, ids, ground = [], [], []
    for obj in statics:
        rng_range = max(float(np.hypot(obj.start[0], obj.start[1])), 1.0)
        expected = cfg.density * _surface_area(obj.dims) * cfg.reference_range / rng_range
        count = int(rng.poisson(expected))
        local = _sample_box_surface(rng, quantize(obj.dims), count)
        chunks.append(rotate_xy(local, obj.yaw) + obj.start)
        ids.append(np.full(count, obj.instance_id, dtype=np.int64))
        ground.append(np.zeros(count, dtype=bool))

    if cfg.ground_points > 0:
        ego_xy = np.array([[p.x, p.y] for p in poses])
        reach = math.hypot(cfg.region_length / 2.0, cfg.region_width / 2.0)
        low = ego_xy.min(axis=0) - reach
        high = ego_xy.max(axis=0) + reach
        area = float(np.prod(high - low))
        count = int(round(cfg.ground_points * area / (cfg.region_length * cfg.region_width)))
        chunks.append(np.column_stack([
            rng.uniform(low[0], high[0], count),
            rng.uniform(low[1], high[1], count),
            rng.uniform(-0.05, 0.05, count),
        ]))
        ids.append(np.full(count, -1, dtype=np.int64))
        ground.append(np.ones(count, dtype=bool))

    if not chunks:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool)
    return np.concatenate(chunks, axis=0), np.concatenate(ids), np.concatenate(ground)


def generate_sequence(cfg: SceneConfig, seed: int) -> Sequence:
    """
    Genere une sequence synthetique

    Args:
        cfg: Parametres de scene
        seed: Graine (entier >= 0)

    Returns:
        Sequence bit-identique pour un couple (cfg, seed) donne
    """
    rng = np.random.default_rng(seed)
    objects, structures = _place_objects(cfg, rng)
    moving = [o for o in objects if np.any(o.velocity)]
    parked = [o for o in objects if not np.any(o.velocity)]

    poses = []
    for f_idx in range(cfg.num_frames):
        pose = ego_pose_at(cfg, f_idx * FRAME_DT)
        poses.append(EgoPose(_q(pose.x), _q(pose.y), _q(pose.z), _q(pose.yaw)))

    static_world, static_ids, ground_mask = _static_point_sets(cfg, rng, parked + structures, poses)
    half_l, half_w = cfg.region_length / 2.0, cfg.region_width / 2.0

    frames = []
    for f_idx, pose in enumerate(poses):
        t = f_idx * FRAME_DT
        chunks: List[np.ndarray] = []
        ids: List[np.ndarray] = []
        boxes: List[GtBox] = []
        object_points = 0

        for obj in moving:
            center_world = obj.start + obj.velocity * t
            if cfg.jitter > 0:
                center_world = center_world + np.append(rng.normal(0.0, cfg.jitter, size=2), 0.0)
            center_q = quantize(world_to_sensor(center_world[None, :], pose)[0])
            dims_q = quantize(obj.dims)
            yaw_q = _q(wrap_angle(obj.yaw - pose.yaw))

            rng_range = max(float(np.hypot(center_q[0], center_q[1])), 1.0)
            expected = cfg.density * _surface_area(obj.dims) * cfg.reference_range / rng_range
            count = int(rng.poisson(expected))
            local = _sample_box_surface(rng, dims_q, count)
            chunks.append(rotate_xy(local, yaw_q) + center_q)
            ids.append(np.full(count, obj.instance_id, dtype=np.int64))
            object_points += count

            vel = rotation_xy(-pose.yaw) @ obj.velocity[:2]
            boxes.append(GtBox(
                instance_id=obj.instance_id,
                class_name=obj.class_name,
                center=tuple(center_q.tolist()),
                dims=tuple(dims_q.tolist()),
                yaw=yaw_q,
                velocity=(_q(vel[0]), _q(vel[1])),
            ))

        for obj in parked:
            center_q = quantize(world_to_sensor(obj.start[None, :], pose)[0])
            boxes.append(GtBox(
                instance_id=obj.instance_id,
                class_name=obj.class_name,
                center=tuple(center_q.tolist()),
                dims=tuple(quantize(obj.dims).tolist()),
                yaw=_q(wrap_angle(obj.yaw - pose.yaw)),
                velocity=(0.0, 0.0),
            ))

        static_pts = world_to_sensor(static_world, pose)
        keep = ~ground_mask | (
            (np.abs(static_pts[:, 0]) <= half_l) & (np.abs(static_pts[:, 1]) <= half_w)
        )
        chunks.append(static_pts[keep])
        ids.append(static_ids[keep])

        n_noise = int(round(cfg.noise_fraction * object_points)) + cfg.noise_points
        chunks.append(np.column_stack([
            rng.uniform(-half_l, half_l, n_noise),
            rng.uniform(-half_w, half_w, n_noise),
            rng.uniform(0.0, 3.0, n_noise),
        ]))
        ids.append(np.full(n_noise, -1, dtype=np.int64))

        frames.append(Frame(
            timestamp_s=_q(t),
            ego_pose=pose,
            points=quantize(np.concatenate(chunks, axis=0).reshape(-1, 3)),
            gt_instance_ids=np.concatenate(ids),
            gt_boxes=tuple(sorted(boxes, key=lambda b: b.instance_id)),
        ))

    logger.debug("[Scene] seed=%d frames=%d objects=%d", seed, len(frames), len(objects))
    return Sequence(
        frames=tuple(frames),
        seed=int(seed),
        region=(cfg.region_length, cfg.region_width),
        config=cfg.echo(),
    )


def moving_instance_ids(boxes: Seq[GtBox], speed_threshold: float = 1.0) -> np.ndarray:
    """Identifiants des objets dont la vitesse depasse le seuil (m/s)"""
    return np.array(sorted(b.instance_id for b in boxes if b.speed > speed_threshold), dtype=np.int64)


def gt_trajectories(seq: Sequence, t: int, horizon: int = HORIZON) -> np.ndarray:
    """
    Trajectoires exactes des points de la frame t

    Le repere est celui du capteur a l'instant t (compense de l'ego):
    p^k = p^0 + k * 0.1 s * v. Les points sans identite restent immobiles.

    Returns:
        Tableau (N, horizon+1, 3); la ligne i est la trajectoire du point i
    """
    frame = seq.frames[t]
    n = len(frame.points)
    velocities = np.zeros((n, 3))
    by_id = frame.box_by_id()
    for instance_id in np.unique(frame.gt_instance_ids):
        if instance_id < 0 or instance_id not in by_id:
            continue
        vx, vy = by_id[instance_id].velocity
        velocities[frame.gt_instance_ids == instance_id, :2] = (vx, vy)
    steps = np.arange(horizon + 1, dtype=np.float64) * FRAME_DT
    return frame.points[:, None, :] + velocities[:, None, :] * steps[None, :, None]


def corrupt_trajectories(
    trajectories: np.ndarray,
    sigma: float,
    outlier_fraction: float,
    rng: np.random.Generator,
    outlier_speed: float = 10.0,
) -> np.ndarray:
    """
    Degrade des trajectoires exactes pour imiter un flot de scene estime

    Args:
        trajectories: (N, K+1, 3)
        sigma: Ecart-type du bruit de vitesse par axe et par pas (m/s)
        outlier_fraction: Fraction de points recevant une trajectoire aleatoire
        rng: Generateur seede
        outlier_speed: Borne des vitesses aleatoires (m/s)

    Returns:
        Nouveau tableau (N, K+1, 3)
    """
    traj = np.array(trajectories, dtype=np.float64, copy=True)
    n, length, _ = traj.shape
    if n == 0 or length < 2:
        return traj
    if sigma > 0:
        noise = rng.normal(0.0, sigma * FRAME_DT, size=(n, length - 1, 3))
        traj[:, 1:, :] += np.cumsum(noise, axis=1)
    if outlier_fraction > 0:
        chosen = rng.random(n) < outlier_fraction
        count = int(chosen.sum())
        velocity = np.zeros((count, 3))
        velocity[:, :2] = rng.uniform(-outlier_speed, outlier_speed, size=(count, 2))
        steps = np.arange(length, dtype=np.float64) * FRAME_DT
        traj[chosen] = traj[chosen, :1, :] + velocity[:, None, :] * steps[None, :, None]
    return traj


def frame_seed(seq_seed: int, frame_index: int, salt: int = 0) -> np.random.Generator:
    """Generateur derive deterministe pour une frame"""
    return np.random.default_rng(np.random.SeedSequence([int(seq_seed), int(frame_index), int(salt)]))
