"""
Case bundles and the on-disk case layout.

    <case>/generated/00000.png ...     edited video under test
    <case>/preserve_ref/00000.png ...  source-backed preserve reference
    <case>/ghost_ref/00000.png ...     required when any reveal/expand mask is non-empty
    <case>/masks/{preserve,reveal,expand,dynamic}/00000.png   8-bit grayscale
    <case>/cameras_{gt,gen}.json, objects_{gt,gen}.json      optional trajectories
    <case>/meta.json
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from control_metrics import TrajectorySet, load_trajectories, save_trajectories
from errors import CaseError, InputError, PartitionError
from models import CaseMeta, CheckCaseResponse
from raster import RegionMasks, to_frame, to_mask

logger = logging.getLogger(__name__)

FRAME_PATTERN = "{:05d}.png"
MASK_ROLES = ("preserve", "reveal", "expand", "dynamic")


@dataclass
class CaseBundle:
    """One editing case. Sequences are float64 arrays of shape (T, H, W, 3)."""
    generated: np.ndarray
    preserve_ref: np.ndarray
    masks: List[RegionMasks]
    meta: CaseMeta
    ghost_ref: Optional[np.ndarray] = None
    trajectories: Optional[TrajectorySet] = None

    @property
    def case_id(self) -> str:
        return self.meta.case_id

    @property
    def num_frames(self) -> int:
        return len(self.generated)

    @property
    def frame_shape(self) -> Tuple[int, int]:
        return self.generated.shape[1:3]

    @property
    def needs_ghost(self) -> bool:
        return any(m.reveal.any() or m.expand.any() for m in self.masks)

    def validate(self) -> "CaseBundle":
        """Check lengths, sizes, the partition of every frame and the ghost dependency."""
        cid = self.case_id
        if self.num_frames < 2:
            raise CaseError(f"a case needs at least 2 frames, got {self.num_frames}", cid)
        sequences = {"generated": self.generated, "preserve_ref": self.preserve_ref}
        if self.ghost_ref is not None:
            sequences["ghost_ref"] = self.ghost_ref
        for name, seq in sequences.items():
            if seq.ndim != 4 or seq.shape[-1] != 3:
                raise CaseError(f"{name}: expected (T, H, W, 3), got {seq.shape}", cid)
            if seq.shape != self.generated.shape:
                raise CaseError(f"{name} has shape {seq.shape}, generated has {self.generated.shape}", cid)
        if len(self.masks) != self.num_frames:
            raise CaseError(f"{len(self.masks)} mask frames for {self.num_frames} video frames", cid)
        for t, masks in enumerate(self.masks):
            if masks.shape != self.frame_shape:
                raise CaseError(f"frame {t}: masks are {masks.shape}, frames are {self.frame_shape}", cid)
            violation = masks.partition_violation()
            if violation is not None:
                pixel, reason = violation
                raise PartitionError(t, pixel, reason, cid)
        if self.ghost_ref is None and self.needs_ghost:
            raise CaseError("ghost_ref is required when reveal or expand masks are non-empty", cid)
        if self.trajectories is not None:
            traj = self.trajectories
            named = [("cameras_gt", traj.camera_gt), ("cameras_gen", traj.camera_gen)]
            named += [(f"objects_gt[{k}]", v) for k, v in sorted(traj.objects_gt.items())]
            named += [(f"objects_gen[{k}]", v) for k, v in sorted(traj.objects_gen.items())]
            for name, seq in named:
                if len(seq) and len(seq) != self.num_frames:
                    raise CaseError(f"{name} has {len(seq)} entries for {self.num_frames} frames", cid)
        return self


# ========== Reading ==========

def _frame_files(directory: Path) -> List[Path]:
    return sorted(directory.glob("*.png"))


def read_sequence(directory: Path, case_id: str) -> np.ndarray:
    files = _frame_files(directory)
    if not files:
        raise CaseError(f"missing or empty sequence: {directory.name}/", case_id)
    frames = []
    for path in files:
        try:
            with Image.open(path) as img:
                frames.append(to_frame(np.asarray(img.convert("RGB")), name=f"{directory.name}/{path.name}"))
        except (OSError, InputError) as e:
            raise CaseError(f"cannot decode {directory.name}/{path.name}: {e}", case_id)
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise CaseError(f"{directory.name}/ mixes frame sizes {sorted(shapes)}", case_id)
    return np.stack(frames)


def _read_masks(directory: Path, case_id: str) -> List[np.ndarray]:
    masks = []
    for path in _frame_files(directory):
        try:
            with Image.open(path) as img:
                masks.append(to_mask(np.asarray(img.convert("L"))))
        except (OSError, InputError) as e:
            raise CaseError(f"cannot decode masks/{directory.name}/{path.name}: {e}", case_id)
    return masks


def _read_meta(case_dir: Path) -> CaseMeta:
    path = case_dir / "meta.json"
    if not path.exists():
        return CaseMeta(case_id=case_dir.name)
    try:
        return CaseMeta.model_validate_json(path.read_text())
    except ValueError as e:
        raise CaseError(f"bad meta.json: {e}", case_dir.name)


def load_case(path) -> CaseBundle:
    """Decode a case directory into a validated CaseBundle."""
    case_dir = Path(path)
    if not case_dir.is_dir():
        raise CaseError(f"not a case directory: {case_dir}", case_dir.name)
    meta = _read_meta(case_dir)
    cid = meta.case_id

    generated = read_sequence(case_dir / "generated", cid)
    preserve_ref = read_sequence(case_dir / "preserve_ref", cid)
    ghost_dir = case_dir / "ghost_ref"
    ghost_ref = read_sequence(ghost_dir, cid) if _frame_files(ghost_dir) else None

    num_frames = len(generated)
    shape = generated.shape[1:3]
    roles = {}
    for role in MASK_ROLES:
        frames = _read_masks(case_dir / "masks" / role, cid)
        if not frames and role == "dynamic":
            frames = [np.zeros(shape, dtype=bool) for _ in range(num_frames)]
        if len(frames) != num_frames:
            raise CaseError(f"masks/{role}/ has {len(frames)} frames, expected {num_frames}", cid)
        roles[role] = frames
    masks = [RegionMasks(*(roles[role][t] for role in MASK_ROLES)) for t in range(num_frames)]

    try:
        trajectories = load_trajectories(case_dir)
    except CaseError as e:
        raise CaseError(str(e), cid)

    bundle = CaseBundle(generated, preserve_ref, masks, meta, ghost_ref, trajectories)
    bundle.validate()
    logger.debug("loaded case %s: %d frames at %dx%d", cid, num_frames, shape[1], shape[0])
    return bundle


def check_case(path) -> CheckCaseResponse:
    """Structural validation of a case directory, without evaluating metrics."""
    bundle = load_case(path)
    height, width = bundle.frame_shape
    return CheckCaseResponse(
        case_id=bundle.case_id,
        frames=bundle.num_frames,
        width=width,
        height=height,
        has_trajectories=bundle.trajectories is not None,
        message="ok",
    )


# ========== Writing ==========

def _to_png(frame: np.ndarray) -> Image.Image:
    return Image.fromarray(np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8))


def _write_sequence(frames: np.ndarray, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        _to_png(frame).save(directory / FRAME_PATTERN.format(t))


def write_case(bundle: CaseBundle, path) -> Path:
    """Write a bundle in the documented layout. Frames are quantized to 8 bits."""
    bundle.validate()
    case_dir = Path(path)
    case_dir.mkdir(parents=True, exist_ok=True)
    _write_sequence(bundle.generated, case_dir / "generated")
    _write_sequence(bundle.preserve_ref, case_dir / "preserve_ref")
    if bundle.ghost_ref is not None:
        _write_sequence(bundle.ghost_ref, case_dir / "ghost_ref")
    for role in MASK_ROLES:
        directory = case_dir / "masks" / role
        directory.mkdir(parents=True, exist_ok=True)
        for t, masks in enumerate(bundle.masks):
            bits = getattr(masks, role)
            Image.fromarray(np.where(bits, 255, 0).astype(np.uint8)).save(directory / FRAME_PATTERN.format(t))
    if bundle.trajectories is not None:
        save_trajectories(bundle.trajectories, case_dir)
    (case_dir / "meta.json").write_text(bundle.meta.model_dump_json(indent=2))
    logger.info("wrote case %s to %s", bundle.case_id, case_dir)
    return case_dir


def discover_cases(root) -> List[Path]:
    """Case directories under `root` (or `root` itself when it is a case), sorted."""
    root = Path(root)
    if (root / "generated").is_dir():
        return [root]
    if not root.is_dir():
        raise CaseError(f"no such corpus directory: {root}")
    return sorted(p for p in root.iterdir() if (p / "generated").is_dir())
