"""
Scene IO - Format fichier des sequences et des frames filtrees
===============================================================

Une sequence = un dossier:
- manifest: seed, nombre de frames, region, echo de la config
- frame_<idx>: sections TIME, POSE, POINTS (x y z gt_id), BOXES

Les frames filtrees ajoutent ORIGIN (index dans la frame brute) et
TRAJ (25 triplets par point). Flottants en decimal, 9 chiffres significatifs.

Author: Motion Cluster System
Date: 2025-11-24
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from core.errors import SequenceParseError
from core.geometry import EgoPose
from core.preprocess import FilteredFrame
from core.scene import CLASS_NAMES, Frame, GtBox, Sequence

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def fmt(value: float) -> str:
    """Flottant -> texte a 9 chiffres significatifs"""
    return f"{float(value):.9g}"


def frame_filename(index: int) -> str:
    return f"frame_{index:06d}"


def _box_line(box: GtBox) -> str:
    values = [*box.center, *box.dims, box.yaw, *box.velocity]
    return f"{box.instance_id} {box.class_name} " + " ".join(fmt(v) for v in values)


def _header_lines(timestamp: float, pose: EgoPose) -> List[str]:
    return [f"TIME {fmt(timestamp)}", "POSE " + " ".join(fmt(v) for v in pose)]


def _points_lines(points: np.ndarray, ids: np.ndarray) -> List[str]:
    lines = [f"POINTS {len(points)}"]
    for (x, y, z), gid in zip(points.tolist(), ids.tolist()):
        lines.append(f"{fmt(x)} {fmt(y)} {fmt(z)} {gid}")
    return lines


def _boxes_lines(boxes) -> List[str]:
    return [f"BOXES {len(boxes)}"] + [_box_line(b) for b in boxes]


def render_frame(frame: Frame) -> str:
    """Texte UTF-8 d'une frame brute"""
    lines = _header_lines(frame.timestamp_s, frame.ego_pose)
    lines += _points_lines(frame.points, frame.gt_instance_ids)
    lines += _boxes_lines(frame.gt_boxes)
    return "\n".join(lines) + "\n"


def render_manifest(seq: Sequence) -> str:
    lines = [
        f"seed {seq.seed}",
        f"frames {len(seq.frames)}",
        f"region {fmt(seq.region[0])} {fmt(seq.region[1])}",
    ]
    for key in sorted(seq.config):
        lines.append(f"config.{key} = {seq.config[key]}")
    return "\n".join(lines) + "\n"


def write_sequence(seq: Sequence, path: PathLike) -> Path:
    """
    Ecrit une sequence dans un dossier

    Args:
        seq: Sequence a ecrire
        path: Dossier cible (cree si absent)

    Returns:
        Chemin du dossier
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest").write_text(render_manifest(seq), encoding="utf-8")
    for idx, frame in enumerate(seq.frames):
        (root / frame_filename(idx)).write_text(render_frame(frame), encoding="utf-8")
    logger.debug("[SceneIO] wrote %d frames to %s", len(seq.frames), root)
    return root


class _Reader:
    """Lecteur ligne a ligne qui connait sa frame pour les erreurs"""

    def __init__(self, text: str, frame_index: Optional[int]):
        self.lines = text.splitlines()
        self.pos = 0
        self.frame_index = frame_index

    def fail(self, field: str, message: str) -> SequenceParseError:
        return SequenceParseError(self.frame_index, field, message)

    def next_line(self, field: str) -> str:
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            raise self.fail(field, "unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def section(self, name: str, count_expected: Optional[int] = None) -> Tuple[List[str], int]:
        parts = self.next_line(name).split()
        if not parts or parts[0] != name:
            raise self.fail(name, f"expected section {name}, got {' '.join(parts[:2])!r}")
        return parts[1:], self.pos

    def floats(self, field: str, tokens: List[str], count: int) -> List[float]:
        if len(tokens) != count:
            raise self.fail(field, f"expected {count} values, got {len(tokens)}")
        try:
            return [float(t) for t in tokens]
        except ValueError as exc:
            raise self.fail(field, f"bad number: {exc}") from exc

    def count(self, field: str, tokens: List[str]) -> int:
        if len(tokens) != 1:
            raise self.fail(field, "missing count")
        try:
            value = int(tokens[0])
        except ValueError as exc:
            raise self.fail(field, f"bad count {tokens[0]!r}") from exc
        if value < 0:
            raise self.fail(field, "negative count")
        return value


def _read_header(reader: _Reader) -> Tuple[float, EgoPose]:
    tokens, _ = reader.section("TIME")
    timestamp = reader.floats("TIME", tokens, 1)[0]
    tokens, _ = reader.section("POSE")
    pose = EgoPose(*reader.floats("POSE", tokens, 4))
    return timestamp, pose


def _read_points(reader: _Reader) -> Tuple[np.ndarray, np.ndarray]:
    tokens, _ = reader.section("POINTS")
    n = reader.count("POINTS", tokens)
    points = np.zeros((n, 3))
    ids = np.zeros(n, dtype=np.int64)
    for i in range(n):
        parts = reader.next_line("POINTS").split()
        if len(parts) != 4:
            raise reader.fail("POINTS", f"point {i}: expected 'x y z gt_id', got {len(parts)} values")
        points[i] = reader.floats("POINTS", parts[:3], 3)
        try:
            ids[i] = int(parts[3])
        except ValueError as exc:
            raise reader.fail("POINTS", f"point {i}: bad gt_id {parts[3]!r}") from exc
    return points, ids


def _read_boxes(reader: _Reader) -> Tuple[GtBox, ...]:
    tokens, _ = reader.section("BOXES")
    m = reader.count("BOXES", tokens)
    boxes = []
    for i in range(m):
        parts = reader.next_line("BOXES").split()
        if len(parts) != 11:
            raise reader.fail("BOXES", f"box {i}: expected 11 values, got {len(parts)}")
        if parts[1] not in CLASS_NAMES:
            raise reader.fail("BOXES", f"box {i}: unknown class {parts[1]!r}")
        try:
            instance_id = int(parts[0])
        except ValueError as exc:
            raise reader.fail("BOXES", f"box {i}: bad id {parts[0]!r}") from exc
        v = reader.floats("BOXES", parts[2:], 9)
        if min(v[3:6]) <= 0:
            raise reader.fail("BOXES", f"box {i}: dims must be > 0")
        boxes.append(GtBox(instance_id, parts[1], tuple(v[0:3]), tuple(v[3:6]), v[6], (v[7], v[8])))
    return tuple(boxes)


def _check_ids(reader: _Reader, ids: np.ndarray, boxes: Tuple[GtBox, ...]) -> None:
    box_ids = [b.instance_id for b in boxes]
    if len(set(box_ids)) != len(box_ids):
        raise reader.fail("BOXES", "duplicate instance id")
    missing = sorted(set(int(i) for i in ids[ids >= 0]) - set(box_ids))
    if missing:
        raise reader.fail("POINTS", f"gt ids without box: {missing[:5]}")


def parse_frame(text: str, frame_index: int) -> Frame:
    reader = _Reader(text, frame_index)
    timestamp, pose = _read_header(reader)
    points, ids = _read_points(reader)
    boxes = _read_boxes(reader)
    _check_ids(reader, ids, boxes)
    return Frame(timestamp, pose, points, ids, boxes)


def _parse_manifest(text: str) -> Tuple[int, int, Tuple[float, float], Dict[str, str]]:
    reader = _Reader(text, None)
    seed = frames = None
    region = (100.0, 40.0)
    config: Dict[str, str] = {}
    for line in reader.lines:
        if not line.strip():
            continue
        if line.startswith("config."):
            key, sep, value = line[len("config."):].partition(" = ")
            if not sep:
                raise reader.fail("config", f"bad line {line!r}")
            config[key.strip()] = value.strip()
            continue
        parts = line.split()
        try:
            if parts[0] == "seed":
                seed = int(parts[1])
            elif parts[0] == "frames":
                frames = int(parts[1])
            elif parts[0] == "region":
                region = (float(parts[1]), float(parts[2]))
            else:
                raise reader.fail(parts[0], "unknown manifest key")
        except (IndexError, ValueError) as exc:
            raise reader.fail(parts[0], f"bad value in {line!r}") from exc
    if seed is None or frames is None:
        raise reader.fail("seed" if seed is None else "frames", "missing")
    return seed, frames, region, config


def read_sequence(path: PathLike) -> Sequence:
    """
    Lit une sequence ecrite par write_sequence

    Raises:
        SequenceParseError: fichier manquant ou mal forme (frame et champ nommes)
    """
    root = Path(path)
    manifest = root / "manifest"
    if not manifest.is_file():
        raise SequenceParseError(None, "manifest", f"missing file {manifest}")
    seed, count, region, config = _parse_manifest(manifest.read_text(encoding="utf-8"))
    frames = []
    for idx in range(count):
        frame_path = root / frame_filename(idx)
        if not frame_path.is_file():
            raise SequenceParseError(idx, "file", f"missing {frame_path.name}")
        frames.append(parse_frame(frame_path.read_text(encoding="utf-8"), idx))
    return Sequence(frames=tuple(frames), seed=seed, region=region, config=config)


def render_filtered_frame(frame: FilteredFrame) -> str:
    """Texte d'une frame filtree: schema brut + ORIGIN + TRAJ"""
    lines = _header_lines(frame.timestamp_s, frame.ego_pose)
    lines += _points_lines(frame.points, frame.gt_instance_ids)
    lines.append(f"ORIGIN {len(frame.origin_index)}")
    lines += [str(i) for i in frame.origin_index.tolist()]
    lines.append(f"TRAJ {len(frame.trajectories)}")
    for traj in frame.trajectories:
        lines.append(" ".join(fmt(v) for v in traj.ravel().tolist()))
    lines += _boxes_lines(frame.gt_boxes)
    return "\n".join(lines) + "\n"


def write_filtered_frame(frame: FilteredFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_filtered_frame(frame), encoding="utf-8")
    return path


def read_filtered_frame(path: PathLike, frame_index: int = 0) -> FilteredFrame:
    """Relit une frame filtree (trajectoires a 9 chiffres significatifs)"""
    path = Path(path)
    if not path.is_file():
        raise SequenceParseError(frame_index, "file", f"missing {path}")
    reader = _Reader(path.read_text(encoding="utf-8"), frame_index)
    timestamp, pose = _read_header(reader)
    points, ids = _read_points(reader)

    tokens, _ = reader.section("ORIGIN")
    n = reader.count("ORIGIN", tokens)
    if n != len(points):
        raise reader.fail("ORIGIN", f"{n} origin indices for {len(points)} points")
    try:
        origin = np.array([int(reader.next_line("ORIGIN")) for _ in range(n)], dtype=np.int64)
    except ValueError as exc:
        raise reader.fail("ORIGIN", "bad index") from exc

    tokens, _ = reader.section("TRAJ")
    n = reader.count("TRAJ", tokens)
    if n != len(points):
        raise reader.fail("TRAJ", f"{n} trajectories for {len(points)} points")
    traj = np.zeros((n, 25, 3))
    for i in range(n):
        traj[i] = np.asarray(reader.floats("TRAJ", reader.next_line("TRAJ").split(), 75)).reshape(25, 3)

    boxes = _read_boxes(reader)
    _check_ids(reader, ids, boxes)
    return FilteredFrame(
        points=points,
        origin_index=origin,
        trajectories=traj,
        gt_instance_ids=ids,
        gt_boxes=boxes,
        timestamp_s=timestamp,
        ego_pose=pose,
        frame_index=frame_index,
    )
