import itertools
import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from control_metrics import (
    TrajectorySet, cam_rot_err, cam_trans_err, evaluate_controls, hungarian_assign,
    load_trajectories, normalize_gauge, objmc, rotation_geodesic, save_trajectories,
)
from errors import CaseError, InputError
from scene import CameraPose


def _random_trajectory(rng, length=5):
    return [
        CameraPose(Rotation.from_rotvec(rng.normal(size=3)).as_matrix(), rng.normal(size=3))
        for _ in range(length)
    ]


def _transformed(poses, rotation, translation):
    return [CameraPose(rotation @ p.rotation, rotation @ p.center + translation) for p in poses]


# ========== Camera ==========

def test_normalized_first_pose_is_identity(rng):
    first = normalize_gauge(_random_trajectory(rng))[0]
    assert np.allclose(first.rotation, np.eye(3))
    assert np.allclose(first.center, 0.0)


def test_camera_errors_are_gauge_invariant(rng):
    for _ in range(100):
        gt, gen = _random_trajectory(rng), _random_trajectory(rng)
        rot_before = cam_rot_err(normalize_gauge(gt), normalize_gauge(gen))
        trans_before = cam_trans_err(normalize_gauge(gt), normalize_gauge(gen))
        g_rot = Rotation.from_rotvec(rng.normal(size=3)).as_matrix()
        g_t = rng.normal(size=3) * 5
        moved_gt, moved_gen = _transformed(gt, g_rot, g_t), _transformed(gen, g_rot, g_t)
        assert cam_rot_err(normalize_gauge(moved_gt), normalize_gauge(moved_gen)) == pytest.approx(rot_before, abs=1e-9)
        assert cam_trans_err(normalize_gauge(moved_gt), normalize_gauge(moved_gen)) == pytest.approx(trans_before, abs=1e-9)


def test_geodesic_of_right_and_straight_angles():
    quarter = Rotation.from_euler("z", 90, degrees=True).as_matrix()
    half = Rotation.from_euler("y", 180, degrees=True).as_matrix()
    assert rotation_geodesic(np.eye(3), quarter) == pytest.approx(np.pi / 2, abs=1e-9)
    assert rotation_geodesic(np.eye(3), half) == pytest.approx(np.pi, abs=1e-9)


def test_rotation_error_stays_within_pi(rng):
    for _ in range(50):
        gt, gen = _random_trajectory(rng, 3), _random_trajectory(rng, 3)
        assert 0.0 <= cam_rot_err(gt, gen) <= np.pi


def test_translation_error_of_offset_camera():
    gt = [CameraPose(np.eye(3), [0, 0, 0]), CameraPose(np.eye(3), [0, 0, 0])]
    gen = [CameraPose(np.eye(3), [0, 0, 0]), CameraPose(np.eye(3), [2, 0, 0])]
    assert cam_trans_err(gt, gen) == pytest.approx(1.0)


def test_length_mismatch_raises(rng):
    with pytest.raises(InputError):
        cam_rot_err(_random_trajectory(rng, 3), _random_trajectory(rng, 4))
    with pytest.raises(InputError):
        TrajectorySet(camera_gt=_random_trajectory(rng, 3), camera_gen=_random_trajectory(rng, 2))


# ========== Hungarian matching ==========

def test_hungarian_examples():
    assert hungarian_assign([[1, 10], [10, 2]]) == {0: 0, 1: 1}
    assert hungarian_assign([[7]]) == {0: 0}
    assert hungarian_assign([[5, 5], [5, 5]]) == {0: 0, 1: 1}
    assert hungarian_assign(np.zeros((0, 3))) == {}


def test_hungarian_rejects_bad_costs():
    with pytest.raises(InputError):
        hungarian_assign([[1.0, -1.0]])
    with pytest.raises(InputError):
        hungarian_assign([[np.inf]])


def _brute_force(cost):
    n_gt, n_pred = cost.shape
    if n_gt <= n_pred:
        return min(sum(cost[i, p[i]] for i in range(n_gt)) for p in itertools.permutations(range(n_pred), n_gt))
    return min(sum(cost[p[j], j] for j in range(n_pred)) for p in itertools.permutations(range(n_gt), n_pred))


def test_hungarian_matches_brute_force(rng):
    for _ in range(500):
        shape = tuple(rng.integers(1, 7, size=2))
        cost = rng.integers(0, 50, size=shape).astype(float)
        assignment = hungarian_assign(cost)
        assert len(assignment) == min(shape)
        assert len(set(assignment.values())) == len(assignment)
        assert sum(cost[r, c] for r, c in assignment.items()) == _brute_force(cost)


# ========== ObjMC ==========

def _track(*offsets):
    return np.array([[x, 0.0, 0.0] for x in offsets])


def test_objmc_examples():
    assert objmc({"a": _track(0, 1)}, {"k": _track(0, 1)}) == 0.0
    assert objmc({"a": _track(0, 1)}, {}) == 10.0
    # costs a-k1 = 1, a-k2 = 10, b-k1 = 11, b-k2 = 2
    gt = {"a": _track(0, 0), "b": _track(12, 12)}
    gen = {"k1": _track(1, 1), "k2": _track(10, 10)}
    assert objmc(gt, gen) == pytest.approx(1.5)


def test_objmc_absent_without_targets():
    assert objmc({}, {"k": _track(0, 1)}) is None


def test_objmc_penalizes_unmatched_targets():
    gt = {"a": _track(0, 0), "b": _track(5, 5)}
    assert objmc(gt, {"k": _track(0, 0)}, lambda_objmc=4.0) == pytest.approx(2.0)


def test_evaluate_controls_reports_absent_cameras():
    values = evaluate_controls(TrajectorySet(objects_gt={"a": _track(0, 1)}), 10.0)
    assert values["Cam-RotErr"] is None
    assert values["Cam-TransErr"] is None
    assert values["ObjMC"] == 10.0


# ========== Trajectory files ==========

def test_trajectory_files_round_trip(tmp_path, rng):
    traj = TrajectorySet(
        camera_gt=_random_trajectory(rng, 3), camera_gen=_random_trajectory(rng, 3),
        objects_gt={"car": rng.normal(size=(3, 3))}, objects_gen={"1": rng.normal(size=(3, 3))},
    )
    save_trajectories(traj, tmp_path)
    loaded = load_trajectories(tmp_path)
    assert loaded.has_cameras and loaded.has_objects
    assert np.allclose(loaded.camera_gen[2].rotation, traj.camera_gen[2].rotation)
    assert np.allclose(loaded.objects_gt["car"], traj.objects_gt["car"])


def test_missing_trajectory_files_give_none(tmp_path):
    assert load_trajectories(tmp_path) is None


def test_bare_list_and_dict_layouts(tmp_path):
    (tmp_path / "cameras_gt.json").write_text(json.dumps([{"rotation": np.eye(3).ravel().tolist(), "center": [0, 0, 0]}]))
    (tmp_path / "objects_gt.json").write_text(json.dumps({"7": [[0, 0, 0]]}))
    loaded = load_trajectories(tmp_path)
    assert len(loaded.camera_gt) == 1
    assert not loaded.has_cameras
    assert list(loaded.objects_gt) == ["7"]


def test_bad_object_track_is_a_case_error(tmp_path):
    (tmp_path / "objects_gt.json").write_text(json.dumps({"objects": {"a": [[0, 0]]}}))
    with pytest.raises(CaseError):
        load_trajectories(tmp_path)


def test_camera_file_without_camera_list_is_a_case_error(tmp_path):
    (tmp_path / "cameras_gt.json").write_text(json.dumps({"poses": []}))
    with pytest.raises(CaseError, match="cameras_gt.json"):
        load_trajectories(tmp_path)


def test_camera_entries_must_be_a_list(tmp_path):
    (tmp_path / "cameras_gen.json").write_text(json.dumps({"cameras": 3}))
    with pytest.raises(CaseError):
        load_trajectories(tmp_path)


def test_generated_cameras_must_match_object_tracks(rng):
    with pytest.raises(InputError, match="frame count"):
        TrajectorySet(camera_gen=_random_trajectory(rng, 3), objects_gt={"a": rng.normal(size=(5, 3))})
