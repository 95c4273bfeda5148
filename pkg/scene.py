"""
Synthetic 4D scenes: points, per-frame instance motion, cameras and edits.

A scene keeps one canonical position per point. Static points (instance 0) sit
at their canonical position in every frame; dynamic points are moved by their
instance's per-frame rigid transform. Edits never renumber points, so any point
of an edited scene can be traced back to where it was before the edit.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from errors import ConfigError, InputError

logger = logging.getLogger(__name__)

ROTATION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def scaled(self, factor: float) -> "Intrinsics":
        return Intrinsics(self.fx * factor, self.fy * factor, self.cx, self.cy)


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world pose. Camera looks along +z, x right, y down."""
    rotation: np.ndarray
    center: np.ndarray
    intrinsics: Optional[Intrinsics] = None

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        check_rotation(rotation)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "center", center)

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World points (N, 3) into camera coordinates."""
        return (points - self.center) @ self.rotation

    def pixel_rays(self, width: int, height: int) -> np.ndarray:
        """Unit world-space ray directions through pixel centres, shape (H, W, 3)."""
        if self.intrinsics is None:
            raise InputError("camera has no intrinsics")
        k = self.intrinsics
        cols, rows = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
        local = np.stack([(cols - k.cx) / k.fx, (rows - k.cy) / k.fy, np.ones_like(cols)], axis=-1)
        world = local @ self.rotation.T
        return world / np.linalg.norm(world, axis=-1, keepdims=True)


def check_rotation(rotation: np.ndarray) -> None:
    """Raise InputError unless `rotation` is orthonormal with determinant +1."""
    if rotation.shape != (3, 3) or not np.all(np.isfinite(rotation)):
        raise InputError("rotation must be a finite 3x3 matrix")
    if not np.allclose(rotation.T @ rotation, np.eye(3), atol=ROTATION_TOLERANCE):
        raise InputError("rotation is not orthonormal")
    if abs(np.linalg.det(rotation) - 1.0) > ROTATION_TOLERANCE:
        raise InputError("rotation determinant is not +1")


def look_at(center, target, intrinsics: Optional[Intrinsics] = None, up=(0.0, -1.0, 0.0)) -> CameraPose:
    """Pose at `center` looking at `target`; `up` is world-up (y down convention)."""
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-12:
        raise InputError("look_at: up vector parallel to viewing direction")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return CameraPose(np.stack([right, down, forward], axis=1), center, intrinsics)


@dataclass(frozen=True)
class InstanceTrack:
    """Per-frame transform of one dynamic instance: p_t = R_t p + t_t.

    R_t is a rotation times a uniform scale (scale edits fold into it).
    """
    rotations: np.ndarray     # (T, 3, 3)
    translations: np.ndarray  # (T, 3)


@dataclass(frozen=True)
class Scene:
    positions: np.ndarray     # (N, 3) canonical positions
    colors: np.ndarray        # (N, 3) in [0, 1]
    instance_ids: np.ndarray  # (N,) 0 = static background
    cameras: Tuple[CameraPose, ...]
    width: int
    height: int
    tracks: Dict[int, InstanceTrack] = field(default_factory=dict)
    alive: Optional[np.ndarray] = None  # (N,) False for removed points

    def __post_init__(self):
        n = len(self.positions)
        if self.colors.shape != (n, 3) or self.instance_ids.shape != (n,):
            raise InputError("points: position, color and instance_id lengths differ")
        if n and self.instance_ids.min() < 0:
            raise InputError("instance ids must be >= 0")
        if not self.cameras:
            raise InputError("scene has no cameras")
        if self.alive is None:
            object.__setattr__(self, "alive", np.ones(n, dtype=bool))
        for inst, track in self.tracks.items():
            if len(track.rotations) != self.num_frames:
                raise InputError(f"instance {inst}: {len(track.rotations)} transforms for {self.num_frames} frames")

    @property
    def num_frames(self) -> int:
        return len(self.cameras)

    def instance_transform(self, instance_id: int, t: int) -> Tuple[np.ndarray, np.ndarray]:
        track = self.tracks.get(int(instance_id))
        if instance_id == 0 or track is None:
            return np.eye(3), np.zeros(3)
        return track.rotations[t], track.translations[t]

    def world_positions(self, t: int) -> np.ndarray:
        """World positions of every point at frame t (removed points included)."""
        out = self.positions.copy()
        for inst, track in self.tracks.items():
            sel = self.instance_ids == inst
            if sel.any():
                out[sel] = self.positions[sel] @ track.rotations[t].T + track.translations[t]
        return out

    def point_rotations(self, t: int, index: np.ndarray) -> np.ndarray:
        """Rotation of each indexed point's instance at frame t, shape (len(index), 3, 3)."""
        out = np.broadcast_to(np.eye(3), (len(index), 3, 3)).copy()
        ids = self.instance_ids[index]
        for inst, track in self.tracks.items():
            linear = track.rotations[t]
            out[ids == inst] = linear / np.cbrt(np.linalg.det(linear))
        return out


# ========== JSON formats ==========

def _quat_to_matrix(quat: Sequence[float]) -> np.ndarray:
    return Rotation.from_quat(np.asarray(quat, dtype=np.float64)).as_matrix()


def camera_from_json(data: dict) -> CameraPose:
    intr = data.get("intrinsics")
    intrinsics = Intrinsics(intr["fx"], intr["fy"], intr["cx"], intr["cy"]) if intr else None
    return CameraPose(np.asarray(data["rotation"], dtype=np.float64).reshape(3, 3), data["center"], intrinsics)


def camera_to_json(cam: CameraPose) -> dict:
    out = {"rotation": cam.rotation.ravel().tolist(), "center": cam.center.tolist()}
    if cam.intrinsics is not None:
        k = cam.intrinsics
        out["intrinsics"] = {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy}
    return out


def load_scene(path) -> Scene:
    """Load a scene JSON file (points, per-frame instance transforms, cameras)."""
    data = json.loads(Path(path).read_text())
    try:
        points = data["points"]
        cameras = tuple(camera_from_json(c) for c in data["cameras"])
        tracks = {}
        for key, frames in data.get("instances", {}).items():
            tracks[int(key)] = InstanceTrack(
                rotations=np.stack([_quat_to_matrix(f["rotation"]) * float(f.get("scale", 1.0)) for f in frames]),
                translations=np.asarray([f["translation"] for f in frames], dtype=np.float64),
            )
        return Scene(
            positions=np.asarray(points["position"], dtype=np.float64).reshape(-1, 3),
            colors=np.clip(np.asarray(points["color"], dtype=np.float64).reshape(-1, 3), 0.0, 1.0),
            instance_ids=np.asarray(points["instance_id"], dtype=np.int64),
            cameras=cameras,
            width=int(data["width"]),
            height=int(data["height"]),
            tracks=tracks,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{path}: malformed scene file ({e})") from e


def save_scene(scene: Scene, path) -> None:
    instances = {}
    for inst, track in scene.tracks.items():
        scales = np.cbrt(np.linalg.det(track.rotations))
        quats = Rotation.from_matrix(track.rotations / scales[:, None, None]).as_quat()
        instances[str(inst)] = [
            {"rotation": q.tolist(), "translation": tr.tolist(), "scale": float(s)}
            for q, tr, s in zip(quats, track.translations, scales)
        ]
    alive = scene.alive
    data = {
        "width": scene.width,
        "height": scene.height,
        "points": {
            "position": scene.positions[alive].tolist(),
            "color": scene.colors[alive].tolist(),
            "instance_id": scene.instance_ids[alive].tolist(),
        },
        "instances": instances,
        "cameras": [camera_to_json(c) for c in scene.cameras],
    }
    Path(path).write_text(json.dumps(data))


# ========== Camera tracks ==========

def _ramp(num_frames: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, num_frames) if num_frames > 1 else np.zeros(1)


def pan_track(base: CameraPose, num_frames: int, total_angle: float) -> List[CameraPose]:
    """Yaw about the camera's own vertical axis; positive angles turn right."""
    axis = base.rotation[:, 1]
    return [
        CameraPose(Rotation.from_rotvec(axis * total_angle * s).as_matrix() @ base.rotation,
                   base.center, base.intrinsics)
        for s in _ramp(num_frames)
    ]


def dolly_track(base: CameraPose, num_frames: int, offset) -> List[CameraPose]:
    """Linear translation by `offset` given in camera axes (x truck, z dolly)."""
    world_offset = base.rotation @ np.asarray(offset, dtype=np.float64)
    return [CameraPose(base.rotation, base.center + world_offset * s, base.intrinsics) for s in _ramp(num_frames)]


def orbit_track(base: CameraPose, num_frames: int, pivot, total_angle: float) -> List[CameraPose]:
    """Rotate the whole pose about the camera-vertical axis through `pivot`."""
    pivot = np.asarray(pivot, dtype=np.float64)
    axis = base.rotation[:, 1]
    out = []
    for s in _ramp(num_frames):
        rot = Rotation.from_rotvec(axis * total_angle * s).as_matrix()
        out.append(CameraPose(rot @ base.rotation, rot @ (base.center - pivot) + pivot, base.intrinsics))
    return out


def zoom_track(base: CameraPose, num_frames: int, factor: float) -> List[CameraPose]:
    """Scale focal length linearly from 1 to `factor`."""
    if base.intrinsics is None or factor <= 0:
        raise InputError("zoom needs intrinsics and a positive factor")
    return [
        CameraPose(base.rotation, base.center, base.intrinsics.scaled(1.0 + (factor - 1.0) * s))
        for s in _ramp(num_frames)
    ]


TRACK_BUILDERS = {
    "pan": lambda base, n, track: pan_track(base, n, float(track["angle"])),
    "dolly": lambda base, n, track: dolly_track(base, n, track["offset"]),
    "orbit": lambda base, n, track: orbit_track(base, n, track["pivot"], float(track["angle"])),
    "zoom": lambda base, n, track: zoom_track(base, n, float(track["factor"])),
}


# ========== Edits ==========

EDIT_OPS = (
    "remove_instance", "transform_instance", "retime_instance", "scale_instance",
    "set_dynamic", "set_camera_track",
)


def load_edit(path) -> List[dict]:
    """Load an edit script: a JSON list of {"op": ..., ...} operations."""
    ops = json.loads(Path(path).read_text())
    if not isinstance(ops, list):
        raise ConfigError(f"{path}: edit script must be a JSON list")
    for op in ops:
        if not isinstance(op, dict) or op.get("op") not in EDIT_OPS:
            raise ConfigError(f"{path}: unknown edit operation {op!r}")
    return ops


def _dynamic_track(scene: Scene, instance_id: int) -> InstanceTrack:
    if instance_id <= 0:
        raise ConfigError("only dynamic instances (id > 0) can be moved")
    if not np.any(scene.instance_ids == instance_id):
        raise ConfigError(f"instance {instance_id} not in scene")
    track = scene.tracks.get(instance_id)
    if track is None:
        n = scene.num_frames
        track = InstanceTrack(np.broadcast_to(np.eye(3), (n, 3, 3)).copy(), np.zeros((n, 3)))
    return track


def _instance_centroid(scene: Scene, instance_id: int, t: int) -> np.ndarray:
    sel = (scene.instance_ids == instance_id) & scene.alive
    rot, trans = scene.instance_transform(instance_id, t)
    return scene.positions[sel].mean(axis=0) @ rot.T + trans


def _frame_range(op: dict, num_frames: int) -> range:
    start, end = op.get("frames", [0, num_frames - 1])
    return range(max(0, int(start)), min(num_frames - 1, int(end)) + 1)


def apply_edit(scene: Scene, ops: List[dict]) -> Scene:
    """Apply edit operations in order; point indices are left untouched."""
    for op in ops:
        kind = op.get("op")
        if kind == "remove_instance":
            inst = int(op["instance_id"])
            scene = replace(scene, alive=scene.alive & (scene.instance_ids != inst))
        elif kind in ("transform_instance", "scale_instance"):
            inst = int(op["instance_id"])
            track = _dynamic_track(scene, inst)
            rotations, translations = track.rotations.copy(), track.translations.copy()
            if kind == "transform_instance":
                extra = _quat_to_matrix(op.get("rotation", [0.0, 0.0, 0.0, 1.0]))
                shift = np.asarray(op.get("translation", [0.0, 0.0, 0.0]), dtype=np.float64)
            else:
                scale = float(op["scale"])
                if scale <= 0:
                    raise ConfigError("scale must be positive")
                extra, shift = np.eye(3) * scale, np.zeros(3)
            for t in _frame_range(op, scene.num_frames):
                c = _instance_centroid(scene, inst, t)
                # p' = A (R p + t - c) + c + shift
                rotations[t] = extra @ rotations[t]
                translations[t] = extra @ (translations[t] - c) + c + shift
            tracks = dict(scene.tracks)
            tracks[inst] = InstanceTrack(rotations, translations)
            scene = replace(scene, tracks=tracks)
        elif kind == "retime_instance":
            inst = int(op["instance_id"])
            track = _dynamic_track(scene, inst)
            offset = int(op["offset"])
            src = np.clip(np.arange(scene.num_frames) - offset, 0, scene.num_frames - 1)
            tracks = dict(scene.tracks)
            tracks[inst] = InstanceTrack(track.rotations[src], track.translations[src])
            scene = replace(scene, tracks=tracks)
        elif kind == "set_dynamic":
            inst = int(op["instance_id"])
            track = _dynamic_track(scene, inst)
            n = scene.num_frames
            hold = int(op.get("hold_frame", 0))
            if not 0 <= hold < n:
                raise ConfigError(f"hold_frame {hold} outside 0..{n - 1}")
            rotations = np.repeat(track.rotations[hold][None], n, axis=0)
            translations = np.repeat(track.translations[hold][None], n, axis=0)
            if op.get("dynamic", False):
                # constant velocity through the held pose
                velocity = np.asarray(op.get("velocity", [0.0, 0.0, 0.0]), dtype=np.float64)
                translations = translations + (np.arange(n) - hold)[:, None] * velocity
            tracks = dict(scene.tracks)
            tracks[inst] = InstanceTrack(rotations, translations)
            scene = replace(scene, tracks=tracks)
        elif kind == "set_camera_track":
            if "cameras" in op:
                cameras = tuple(camera_from_json(c) for c in op["cameras"])
            else:
                track_def = op["track"]
                builder = TRACK_BUILDERS.get(track_def.get("kind"))
                if builder is None:
                    raise ConfigError(f"unknown camera track {track_def.get('kind')!r}")
                cameras = tuple(builder(scene.cameras[0], scene.num_frames, track_def))
            if len(cameras) != scene.num_frames:
                raise ConfigError(f"camera track has {len(cameras)} poses for {scene.num_frames} frames")
            scene = replace(scene, cameras=cameras)
        else:
            raise ConfigError(f"unknown edit operation {kind!r}")
        logger.debug("applied edit %s", kind)
    return scene


# ========== Synthetic scenes ==========

def _texture(x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(0, 2 * np.pi, size=3)
    freqs = rng.uniform(2.0, 6.0, size=3)
    channels = [0.5 + 0.4 * np.sin(freqs[i] * x + phases[i]) * np.cos(freqs[(i + 1) % 3] * y) for i in range(3)]
    return np.clip(np.stack(channels, axis=-1), 0.0, 1.0)


def synthetic_scene(width: int = 96, height: int = 64, num_frames: int = 4, seed: int = 0,
                    depth: float = 4.0, with_object: bool = True, samples_per_pixel: int = 2) -> Scene:
    """Textured backdrop filling the first camera's view plus one moving box.

    The backdrop covers exactly the view frustum at `depth`, so camera motion
    uncovers space outside the scene's extent.
    """
    rng = np.random.default_rng(seed)
    focal = 1.2 * width
    intrinsics = Intrinsics(focal, focal, width / 2.0, height / 2.0)
    cam = CameraPose(np.eye(3), np.zeros(3), intrinsics)

    half_w, half_h = depth * width / (2 * focal), depth * height / (2 * focal)
    nx, ny = width * samples_per_pixel, height * samples_per_pixel
    xs = (np.arange(nx) + 0.5) / nx * 2 * half_w - half_w
    ys = (np.arange(ny) + 0.5) / ny * 2 * half_h - half_h
    gx, gy = np.meshgrid(xs, ys)
    backdrop = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, depth)], axis=-1)
    positions = [backdrop]
    colors = [_texture(gx.ravel(), gy.ravel(), rng)]
    ids = [np.zeros(len(backdrop), dtype=np.int64)]
    tracks = {}

    if with_object:
        size = 0.3 * half_h
        near = 0.6 * depth - size
        m = int(np.ceil(2 * size * focal / near * samples_per_pixel)) + 1
        u = np.linspace(-size, size, m)
        fu, fv = np.meshgrid(u, u)
        face = np.stack([fu.ravel(), fv.ravel(), np.full(fu.size, -size)], axis=-1)
        positions.append(face)
        colors.append(np.tile(rng.uniform(0.1, 0.9, size=3), (len(face), 1)))
        ids.append(np.ones(len(face), dtype=np.int64))
        start = np.array([-0.3 * half_w, 0.0, 0.6 * depth])
        step = np.array([0.6 * half_w / max(num_frames - 1, 1), 0.0, 0.0])
        tracks[1] = InstanceTrack(
            np.broadcast_to(np.eye(3), (num_frames, 3, 3)).copy(),
            np.stack([start + step * t for t in range(num_frames)]),
        )

    return Scene(
        positions=np.concatenate(positions),
        colors=np.concatenate(colors),
        instance_ids=np.concatenate(ids),
        cameras=tuple([cam] * num_frames),
        width=width,
        height=height,
        tracks=tracks,
    )
