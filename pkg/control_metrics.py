"""
4D control fidelity: camera trajectory errors after first-frame gauge
normalization, and object motion control (ObjMC) via Hungarian matching.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from errors import CaseError, InputError
from models import Metric, empty_values, CONTROL_METRICS
from scene import CameraPose, camera_from_json, camera_to_json

logger = logging.getLogger(__name__)

ObjectTracks = Dict[str, np.ndarray]  # object id -> (T, 3) centers


@dataclass
class TrajectorySet:
    """Ground-truth and generated camera poses and object-center tracks."""
    camera_gt: List[CameraPose] = field(default_factory=list)
    camera_gen: List[CameraPose] = field(default_factory=list)
    objects_gt: ObjectTracks = field(default_factory=dict)
    objects_gen: ObjectTracks = field(default_factory=dict)

    def __post_init__(self):
        if self.camera_gt and self.camera_gen and len(self.camera_gt) != len(self.camera_gen):
            raise InputError(
                f"camera trajectories differ in length: {len(self.camera_gt)} vs {len(self.camera_gen)}"
            )
        lengths = {len(track) for track in (*self.objects_gt.values(), *self.objects_gen.values())}
        lengths.update(len(cams) for cams in (self.camera_gt, self.camera_gen) if cams)
        if len(lengths) > 1:
            raise InputError(f"object tracks and cameras disagree on frame count: {sorted(lengths)}")

    @property
    def has_cameras(self) -> bool:
        return bool(self.camera_gt) and bool(self.camera_gen)

    @property
    def has_objects(self) -> bool:
        return bool(self.objects_gt)


# ========== Camera ==========

def normalize_gauge(poses: Sequence[CameraPose]) -> List[CameraPose]:
    """Express every pose relative to the first one: P_1^{-1} P_t (cam-to-world)."""
    if not poses:
        raise InputError("cannot normalize an empty trajectory")
    first = poses[0]
    inv_rot = first.rotation.T
    return [
        CameraPose(inv_rot @ p.rotation, inv_rot @ (p.center - first.center), p.intrinsics)
        for p in poses
    ]


def _check_lengths(gt: Sequence[CameraPose], gen: Sequence[CameraPose]) -> None:
    if len(gt) != len(gen):
        raise InputError(f"trajectory lengths differ: {len(gt)} vs {len(gen)}")
    if not gt:
        raise InputError("empty trajectories")


def rotation_geodesic(r_gt: np.ndarray, r_gen: np.ndarray) -> float:
    cos = (np.trace(r_gen @ r_gt.T) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def cam_rot_err(gt: Sequence[CameraPose], gen: Sequence[CameraPose]) -> float:
    """Mean geodesic angle (radians) between corresponding rotations."""
    _check_lengths(gt, gen)
    return float(np.mean([rotation_geodesic(a.rotation, b.rotation) for a, b in zip(gt, gen)]))


def cam_trans_err(gt: Sequence[CameraPose], gen: Sequence[CameraPose]) -> float:
    """Mean Euclidean distance between corresponding camera centers."""
    _check_lengths(gt, gen)
    return float(np.mean([np.linalg.norm(b.center - a.center) for a, b in zip(gt, gen)]))


# ========== Objects ==========

def hungarian_assign(cost) -> Dict[int, int]:
    """Minimum-cost matching of size min(N_gt, N_pred); maps GT row -> prediction column."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return {}
    if cost.ndim != 2:
        raise InputError(f"cost must be a 2-D matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise InputError("costs must be finite and non-negative")
    rows, cols = linear_sum_assignment(cost)
    return {int(r): int(c) for r, c in zip(rows, cols)}


def track_distance(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise InputError(f"tracks differ in shape: {a.shape} vs {b.shape}")
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def objmc(gt_tracks: ObjectTracks, gen_tracks: ObjectTracks, lambda_objmc: float = 10.0) -> Optional[float]:
    """Mean matched track distance over GT objects; unmatched GT objects cost lambda.

    Returns None when there are no controlled GT objects.
    """
    if not gt_tracks:
        return None
    gt_ids, gen_ids = sorted(gt_tracks), sorted(gen_tracks)
    cost = np.array([[track_distance(gt_tracks[o], gen_tracks[k]) for k in gen_ids] for o in gt_ids])
    assignment = hungarian_assign(cost.reshape(len(gt_ids), len(gen_ids)))
    total = sum(cost[o, k] for o, k in assignment.items())
    total += lambda_objmc * (len(gt_ids) - len(assignment))
    return float(total / len(gt_ids))


def evaluate_controls(trajectories: TrajectorySet, lambda_objmc: float) -> Dict[str, Optional[float]]:
    """Cam-RotErr, Cam-TransErr and ObjMC; each absent when its inputs are."""
    values = empty_values(CONTROL_METRICS)
    if trajectories.has_cameras:
        gt = normalize_gauge(trajectories.camera_gt)
        gen = normalize_gauge(trajectories.camera_gen)
        values[Metric.CAM_ROT_ERR.value] = cam_rot_err(gt, gen)
        values[Metric.CAM_TRANS_ERR.value] = cam_trans_err(gt, gen)
    values[Metric.OBJMC.value] = objmc(trajectories.objects_gt, trajectories.objects_gen, lambda_objmc)
    return values


# ========== Trajectory files ==========

def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CaseError(f"cannot read {path.name}: {e}")


def load_cameras(path) -> List[CameraPose]:
    data = _read_json(Path(path))
    try:
        frames = data["cameras"] if isinstance(data, dict) else data
        if not isinstance(frames, list):
            raise CaseError(f"{Path(path).name}: expected a list of cameras")
        return [camera_from_json(frame) for frame in frames]
    except (KeyError, TypeError, AttributeError, ValueError, InputError) as e:
        raise CaseError(f"bad camera entry in {Path(path).name}: {e}")


def load_objects(path) -> ObjectTracks:
    data = _read_json(Path(path))
    tracks = data.get("objects", data) if isinstance(data, dict) else None
    if not isinstance(tracks, dict):
        raise CaseError(f"{Path(path).name}: expected an object of id -> centers")
    out = {}
    for obj_id, centers in tracks.items():
        arr = np.asarray(centers, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise CaseError(f"{Path(path).name}: track {obj_id!r} must be T x 3, got {arr.shape}")
        out[str(obj_id)] = arr
    return out


def load_trajectories(case_dir) -> Optional[TrajectorySet]:
    """Read cameras_{gt,gen}.json and objects_{gt,gen}.json when present."""
    case_dir = Path(case_dir)
    paths = {name: case_dir / f"{name}.json" for name in ("cameras_gt", "cameras_gen", "objects_gt", "objects_gen")}
    if not any(p.exists() for p in paths.values()):
        return None
    try:
        return TrajectorySet(
            camera_gt=load_cameras(paths["cameras_gt"]) if paths["cameras_gt"].exists() else [],
            camera_gen=load_cameras(paths["cameras_gen"]) if paths["cameras_gen"].exists() else [],
            objects_gt=load_objects(paths["objects_gt"]) if paths["objects_gt"].exists() else {},
            objects_gen=load_objects(paths["objects_gen"]) if paths["objects_gen"].exists() else {},
        )
    except InputError as e:
        raise CaseError(str(e))


def save_trajectories(trajectories: TrajectorySet, case_dir) -> None:
    case_dir = Path(case_dir)
    if trajectories.camera_gt:
        (case_dir / "cameras_gt.json").write_text(json.dumps({"cameras": [camera_to_json(c) for c in trajectories.camera_gt]}))
    if trajectories.camera_gen:
        (case_dir / "cameras_gen.json").write_text(json.dumps({"cameras": [camera_to_json(c) for c in trajectories.camera_gen]}))
    for name, tracks in (("objects_gt", trajectories.objects_gt), ("objects_gen", trajectories.objects_gen)):
        if tracks:
            payload = {"objects": {k: v.tolist() for k, v in sorted(tracks.items())}}
            (case_dir / f"{name}.json").write_text(json.dumps(payload))
