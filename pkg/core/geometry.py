"""
Geometrie 3D - Poses, boites orientees, tests d'interieur
==========================================================

Primitives partagees par la generation de scenes, l'extraction de boites
et l'evaluation. Toutes les boites sont orientees autour de z uniquement.

Author: Motion Cluster System
Date: 2025-11-24
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
from shapely.geometry import Polygon

from core.errors import DataError


class EgoPose(NamedTuple):
    """Pose planaire du vehicule ego (x, y, z en metres, yaw en radians)"""

    x: float
    y: float
    z: float
    yaw: float


def wrap_angle(angle: float) -> float:
    """Ramene un angle dans (-pi, pi]"""
    wrapped = math.atan2(math.sin(angle), math.cos(angle))
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


def rotation_xy(yaw: float) -> np.ndarray:
    """Matrice 2x2 de rotation d'angle yaw"""
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def rotate_xy(points: np.ndarray, yaw: float) -> np.ndarray:
    """Tourne des points (N,3) ou vecteurs (N,2) autour de l'axe z"""
    points = np.asarray(points, dtype=np.float64)
    out = points.copy()
    if len(points) == 0:
        return out
    out[:, :2] = points[:, :2] @ rotation_xy(yaw).T
    return out


def sensor_to_world(points: np.ndarray, pose: EgoPose) -> np.ndarray:
    """Passe des points du repere capteur au repere monde"""
    world = rotate_xy(points, pose.yaw)
    if len(world):
        world += np.array([pose.x, pose.y, pose.z])
    return world


def world_to_sensor(points: np.ndarray, pose: EgoPose) -> np.ndarray:
    """Passe des points du repere monde au repere capteur"""
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 0:
        return points.reshape(0, 3).copy()
    shifted = points - np.array([pose.x, pose.y, pose.z])
    return rotate_xy(shifted, -pose.yaw)


def transfer_points(points: np.ndarray, source: EgoPose, target: EgoPose) -> np.ndarray:
    """Exprime dans le repere capteur `target` des points du repere `source`"""
    return world_to_sensor(sensor_to_world(points, source), target)


@dataclass(frozen=True)
class Box3D:
    """
    Boite 3D orientee [t_c, lwh_c, alpha_c]

    center: (x, y, z) en metres
    dims: (longueur, largeur, hauteur) en metres, toutes > 0
    yaw: cap autour de z, |yaw| <= pi
    """

    center: Tuple[float, float, float]
    dims: Tuple[float, float, float]
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "dims", tuple(float(v) for v in self.dims))
        object.__setattr__(self, "yaw", float(self.yaw))
        if len(self.center) != 3 or len(self.dims) != 3:
            raise DataError("Box3D needs 3 center and 3 dims values")
        if any(not d > 0 for d in self.dims):
            raise DataError(f"Box3D dims must be > 0, got {self.dims}")
        if abs(self.yaw) > math.pi + 1e-12:
            raise DataError(f"Box3D yaw must satisfy |yaw| <= pi, got {self.yaw}")

    @property
    def volume(self) -> float:
        return float(self.dims[0] * self.dims[1] * self.dims[2])

    @property
    def z_range(self) -> Tuple[float, float]:
        half = self.dims[2] / 2.0
        return self.center[2] - half, self.center[2] + half

    def bev_corners(self) -> np.ndarray:
        """Coins BEV (4,2) dans le sens trigonometrique"""
        hl, hw = self.dims[0] / 2.0, self.dims[1] / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        return local @ rotation_xy(self.yaw).T + np.array(self.center[:2])

    def bev_polygon(self) -> Polygon:
        return Polygon(self.bev_corners())


def to_box_frame(points: np.ndarray, box: Box3D) -> np.ndarray:
    """Coordonnees des points dans le repere local de la boite"""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return rotate_xy(points - np.asarray(box.center), -box.yaw)


def points_in_box(points: np.ndarray, box: Box3D, tolerance: float = 1e-9) -> np.ndarray:
    """
    Masque des points a l'interieur de la boite (bord inclus)

    Args:
        points: Tableau (N,3)
        box: Boite testee
        tolerance: Marge ajoutee a chaque demi-dimension

    Returns:
        Masque booleen (N,)
    """
    local = to_box_frame(points, box)
    half = np.asarray(box.dims) / 2.0 + tolerance
    return np.all(np.abs(local) <= half, axis=1)
