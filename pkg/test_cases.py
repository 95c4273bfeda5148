import json

import numpy as np
import pytest

from cases import discover_cases, check_case, load_case, write_case
from conftest import make_case, make_masks
from control_metrics import TrajectorySet
from errors import CaseError, PartitionError
from raster import RegionMasks

SHAPE = (16, 24)


def _frames(rng, count=3):
    """Frames that survive 8-bit PNG quantization unchanged."""
    return rng.integers(0, 256, size=(count, *SHAPE, 3)) / 255.0


def _reveal():
    mask = np.zeros(SHAPE, dtype=bool)
    mask[4:8, 4:10] = True
    return mask


def test_write_then_load_keeps_every_sequence(tmp_path, rng):
    frames = _frames(rng)
    case = make_case(frames, ghost_ref=_frames(rng), masks=make_masks(SHAPE, reveal=_reveal()), case_id="c1")
    write_case(case, tmp_path / "c1")
    loaded = load_case(tmp_path / "c1")
    assert loaded.case_id == "c1"
    assert np.array_equal(loaded.generated, frames)
    assert np.array_equal(loaded.ghost_ref, case.ghost_ref)
    assert np.array_equal(loaded.masks[1].reveal, _reveal())
    assert loaded.trajectories is None


def test_missing_dynamic_masks_default_to_empty(tmp_path, rng):
    write_case(make_case(_frames(rng)), tmp_path / "case")
    for path in (tmp_path / "case" / "masks" / "dynamic").iterdir():
        path.unlink()
    loaded = load_case(tmp_path / "case")
    assert not any(m.dynamic.any() for m in loaded.masks)


def test_case_id_defaults_to_directory_name(tmp_path, rng):
    write_case(make_case(_frames(rng)), tmp_path / "orbit-07")
    (tmp_path / "orbit-07" / "meta.json").unlink()
    assert load_case(tmp_path / "orbit-07").case_id == "orbit-07"


def test_overlapping_masks_name_the_pixel(rng):
    shape = SHAPE
    reveal = np.zeros(shape, dtype=bool)
    reveal[3, 5] = True
    preserve = np.ones(shape, dtype=bool)
    bad = RegionMasks(preserve, reveal, np.zeros(shape, dtype=bool), np.zeros(shape, dtype=bool))
    good = make_masks(shape)
    case = make_case(_frames(rng), ghost_ref=_frames(rng), masks=[good, bad, good], case_id="bad")
    with pytest.raises(PartitionError) as info:
        case.validate()
    assert info.value.frame == 1
    assert info.value.pixel == (3, 5)
    assert "[bad]" in str(info.value)


def test_reveal_without_ghost_is_rejected(rng):
    case = make_case(_frames(rng), masks=make_masks(SHAPE, reveal=_reveal()))
    with pytest.raises(CaseError, match="ghost_ref"):
        case.validate()


def test_single_frame_case_is_rejected(rng):
    with pytest.raises(CaseError, match="at least 2 frames"):
        make_case(_frames(rng, 1)).validate()


def test_mask_count_must_match_frames(tmp_path, rng):
    write_case(make_case(_frames(rng)), tmp_path / "case")
    (tmp_path / "case" / "masks" / "reveal" / "00002.png").unlink()
    with pytest.raises(CaseError, match="masks/reveal/"):
        load_case(tmp_path / "case")


def test_missing_generated_sequence(tmp_path):
    (tmp_path / "case").mkdir()
    with pytest.raises(CaseError, match="generated"):
        load_case(tmp_path / "case")


def test_check_case_summary(tmp_path, rng):
    write_case(make_case(_frames(rng), case_id="ok-case"), tmp_path / "ok")
    response = check_case(tmp_path / "ok")
    assert response.case_id == "ok-case"
    assert (response.frames, response.width, response.height) == (3, 24, 16)
    assert not response.has_trajectories


def test_discover_cases_is_sorted(tmp_path, rng):
    for name in ("b", "a"):
        write_case(make_case(_frames(rng), case_id=name), tmp_path / name)
    (tmp_path / "notes").mkdir()
    assert [p.name for p in discover_cases(tmp_path)] == ["a", "b"]
    assert discover_cases(tmp_path / "a") == [tmp_path / "a"]


def test_object_tracks_must_match_frame_count(rng):
    case = make_case(_frames(rng))
    case.trajectories = TrajectorySet(objects_gt={"a": np.zeros((7, 3))}, objects_gen={"k": np.zeros((7, 3))})
    with pytest.raises(CaseError, match="objects_gt\\[a\\] has 7 entries for 3 frames"):
        case.validate()


def test_camera_track_must_match_frame_count(tmp_path, rng):
    write_case(make_case(_frames(rng)), tmp_path / "case")
    camera = {"rotation": np.eye(3).ravel().tolist(), "center": [0, 0, 0]}
    (tmp_path / "case" / "cameras_gt.json").write_text(json.dumps({"cameras": [camera] * 5}))
    with pytest.raises(CaseError, match="cameras_gt has 5 entries"):
        check_case(tmp_path / "case")


def test_bad_camera_file_fails_the_check(tmp_path, rng):
    write_case(make_case(_frames(rng)), tmp_path / "case")
    (tmp_path / "case" / "cameras_gt.json").write_text(json.dumps({"poses": []}))
    with pytest.raises(CaseError, match="cameras_gt.json"):
        check_case(tmp_path / "case")
