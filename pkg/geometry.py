"""
Region-aware control construction for one target frame.

Pipeline per frame t:
  1. splat the edited scene through the target camera (z-buffer, 1-pixel splats)
  2. local projection statistics -> geometric confidence
  3. for every hit pixel, look up the same point in nearby source frames and
     keep observations passing visibility, depth and instance checks
  4. pick the best observation by view-time score, attenuate confidence by
     view agreement
  5. split pixels into Preserve / Reveal / Expand
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from errors import InputError
from models import EvalConfig
from raster import RegionMasks
from scene import CameraPose, Scene, apply_edit

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ConfidenceStats:
    """Per-pixel projection statistics over a k x k window."""
    coverage: np.ndarray
    purity: np.ndarray
    depth_std: np.ndarray


@dataclass(frozen=True)
class Projection:
    rgb: np.ndarray        # coarse render (H, W, 3), zeros where nothing hit
    depth: np.ndarray      # (H, W), inf where nothing hit
    instance: np.ndarray   # (H, W), -1 where nothing hit
    index: np.ndarray      # (H, W) winning point index, -1 where nothing hit
    hit: np.ndarray        # (H, W) bool
    stats: ConfidenceStats


@dataclass(frozen=True)
class ConditionField:
    """Observation-backed RGB cue, confidence, and support for one frame."""
    rgb: np.ndarray
    confidence: np.ndarray
    support: np.ndarray


@dataclass(frozen=True)
class ControlState:
    field: ConditionField
    masks: RegionMasks
    projection: Projection


@dataclass(frozen=True)
class SourceVideo:
    """Renders of the unedited scene from its own cameras."""
    frames: np.ndarray     # (T, H, W, 3)
    depth: np.ndarray      # (T, H, W)
    instance: np.ndarray   # (T, H, W)
    cameras: Tuple[CameraPose, ...]

    @property
    def depth_range(self) -> float:
        finite = self.depth[np.isfinite(self.depth)]
        if finite.size == 0:
            return 1.0
        spread = float(finite.max() - finite.min())
        return spread if spread > 0 else float(finite.max())


# ========== Projection ==========

def project_points(points: np.ndarray, cam: CameraPose, width: int, height: int):
    """Pinhole projection. Returns (row, col, depth, valid) arrays per point."""
    if cam.intrinsics is None:
        raise InputError("camera has no intrinsics")
    k = cam.intrinsics
    local = cam.to_camera(points)
    z = local[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * local[:, 0] / z + k.cx
        v = k.fy * local[:, 1] / z + k.cy
    valid = (z > 0) & np.isfinite(u) & np.isfinite(v)
    col = np.floor(np.where(valid, u, -1)).astype(np.int64)
    row = np.floor(np.where(valid, v, -1)).astype(np.int64)
    valid &= (col >= 0) & (col < width) & (row >= 0) & (row < height)
    return row, col, z, valid


def zbuffer(points: np.ndarray, cam: CameraPose, width: int, height: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest point per pixel. Returns (index, depth) maps; ties go to the lower index."""
    row, col, z, valid = project_points(points, cam, width, height)
    index = np.full(height * width, -1, dtype=np.int64)
    depth = np.full(height * width, np.inf)
    ids = np.flatnonzero(valid)
    if ids.size:
        pix = row[ids] * width + col[ids]
        order = np.lexsort((ids, z[ids], pix))
        pix_sorted = pix[order]
        first = np.unique(pix_sorted, return_index=True)[1]
        winners = ids[order[first]]
        index[pix_sorted[first]] = winners
        depth[pix_sorted[first]] = z[winners]
    return index.reshape(height, width), depth.reshape(height, width)


def _box_sum(values: np.ndarray, k: int) -> np.ndarray:
    return ndimage.correlate(values, np.ones((k, k), dtype=values.dtype), mode="constant", cval=0)


def window_stats(hit: np.ndarray, depth: np.ndarray, instance: np.ndarray, k: int) -> ConfidenceStats:
    """Coverage, modal-instance purity and depth spread over k x k windows.

    Out-of-image neighbours are not counted, so a fully hit image has coverage 1
    at its borders too.
    """
    if k < 1:
        raise InputError("window size must be >= 1")
    inside = _box_sum(np.ones(hit.shape, dtype=np.int64), k)
    n_hit = _box_sum(hit.astype(np.int64), k)
    coverage = n_hit / inside

    modal = np.zeros(hit.shape, dtype=np.int64)
    for label in np.unique(instance[hit]):
        modal = np.maximum(modal, _box_sum((hit & (instance == label)).astype(np.int64), k))

    safe = np.maximum(n_hit, 1)
    purity = np.where(n_hit > 0, modal / safe, 0.0)

    if hit.any():
        centered = np.where(hit, depth - depth[hit].mean(), 0.0)
    else:
        centered = np.zeros(hit.shape)
    s1 = _box_sum(centered, k)
    s2 = _box_sum(centered * centered, k)
    mean = s1 / safe
    var = np.maximum(s2 / safe - mean * mean, 0.0)
    depth_std = np.where(n_hit > 0, np.sqrt(var), 0.0)
    return ConfidenceStats(coverage, purity, depth_std)


def project_scene(scene: Scene, cam: CameraPose, frame_index: int, window_size: int = 5) -> Projection:
    """Z-buffered 1-pixel splat of the scene's live points at `frame_index`."""
    points = scene.world_positions(frame_index)
    alive = np.flatnonzero(scene.alive)
    local_index, depth = zbuffer(points[alive], cam, scene.width, scene.height)
    hit = local_index >= 0
    index = np.where(hit, alive[np.maximum(local_index, 0)], -1)
    rgb = np.zeros((scene.height, scene.width, 3))
    rgb[hit] = scene.colors[index[hit]]
    instance = np.full(hit.shape, -1, dtype=np.int64)
    instance[hit] = scene.instance_ids[index[hit]]
    stats = window_stats(hit, depth, instance, window_size)
    return Projection(rgb, depth, instance, index, hit, stats)


def render_source_video(scene: Scene) -> SourceVideo:
    """Render every frame of the unedited scene through its own cameras."""
    frames, depths, instances = [], [], []
    for t, cam in enumerate(scene.cameras):
        proj = project_scene(scene, cam, t, window_size=1)
        frames.append(proj.rgb)
        depths.append(proj.depth)
        instances.append(proj.instance)
    return SourceVideo(np.stack(frames), np.stack(depths), np.stack(instances), tuple(scene.cameras))


# ========== Confidence ==========

def compute_confidence(coverage, purity, depth_std, tau: float, hit=True):
    """coverage * purity * exp(-depth_std / tau); zero where `hit` is false."""
    if tau <= 0:
        raise InputError("tau must be > 0")
    value = np.asarray(coverage, dtype=np.float64) * np.asarray(purity) * np.exp(-np.asarray(depth_std) / tau)
    value = np.where(hit, np.clip(value, 0.0, 1.0), 0.0)
    return float(value) if value.ndim == 0 else value


def attenuate_confidence(c, v_src, v_tgt, alpha: float, gamma: float):
    """Scale confidence by source/target view agreement; result lies in [alpha*c, c]."""
    if not 0.0 <= alpha <= 1.0 or gamma <= 0:
        raise InputError("alpha must lie in [0, 1] and gamma must be > 0")
    dot = np.clip(np.sum(np.asarray(v_src) * np.asarray(v_tgt), axis=-1), 0.0, 1.0)
    value = np.asarray(c) * (alpha + (1.0 - alpha) * dot ** gamma)
    return float(value) if value.ndim == 0 else value


def view_time_score(target_dir, source_dir, r: int, t: int, window: int, lambda_view: float):
    """<d_tgt, d_src> - lambda * |r - t| / W."""
    if abs(r - t) > window:
        raise InputError(f"|r - t| = {abs(r - t)} exceeds window {window}")
    if lambda_view < 0:
        raise InputError("lambda_view must be >= 0")
    target_dir, source_dir = np.asarray(target_dir, dtype=np.float64), np.asarray(source_dir, dtype=np.float64)
    for d in (target_dir, source_dir):
        if np.any(np.abs(np.linalg.norm(d, axis=-1) - 1.0) > UNIT_TOLERANCE):
            raise InputError("view directions must be unit length")
    value = np.sum(target_dir * source_dir, axis=-1) - lambda_view * abs(r - t) / window
    return float(value) if np.ndim(value) == 0 else value


# ========== Regions ==========

def scene_extent(scene: Scene, inflation: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box around every live point over all frames, inflated by `inflation`."""
    alive = scene.alive
    if not alive.any():
        raise InputError("scene has no points")
    pts = np.concatenate([scene.world_positions(t)[alive] for t in range(scene.num_frames)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center, half = (lo + hi) / 2, (hi - lo) / 2
    pad = np.maximum(half * inflation, 1e-9 * max(float(np.abs(pts).max()), 1.0))
    return center - half - pad, center + half + pad


def rays_hit_extent(cam: CameraPose, extent: Tuple[np.ndarray, np.ndarray], width: int, height: int) -> np.ndarray:
    """Slab test of every pixel ray (forward half only) against the box."""
    lo, hi = extent
    rays = cam.pixel_rays(width, height)
    origin = cam.center
    t_near = np.zeros((height, width))
    t_far = np.full((height, width), np.inf)
    for axis in range(3):
        d = rays[..., axis]
        parallel = np.abs(d) < 1e-15
        inside = lo[axis] <= origin[axis] <= hi[axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[axis] - origin[axis]) / d
            t2 = (hi[axis] - origin[axis]) / d
        t_min = np.where(parallel, -np.inf if inside else np.inf, np.minimum(t1, t2))
        t_max = np.where(parallel, np.inf if inside else -np.inf, np.maximum(t1, t2))
        t_near = np.maximum(t_near, t_min)
        t_far = np.minimum(t_far, t_max)
    return t_near <= t_far


def decompose_regions(support: np.ndarray, in_extent: np.ndarray, dynamic: Optional[np.ndarray] = None) -> RegionMasks:
    """Preserve = supported; unsupported pixels split by the in-extent flag."""
    support = np.asarray(support, dtype=bool)
    in_extent = np.asarray(in_extent, dtype=bool)
    if support.shape != in_extent.shape:
        raise InputError("support and extent flags differ in shape")
    if dynamic is None:
        dynamic = np.zeros_like(support)
    return RegionMasks(
        preserve=support.copy(),
        reveal=~support & in_extent,
        expand=~support & ~in_extent,
        dynamic=np.asarray(dynamic, dtype=bool) & support,
    )


# ========== Observation-backed cues ==========

def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.maximum(np.linalg.norm(v, axis=-1, keepdims=True), 1e-12)


def build_control_state(original: Scene, edited: Scene, source: SourceVideo, t: int,
                        config: Optional[EvalConfig] = None) -> ControlState:
    """Condition field and region masks of target frame t of the edited scene."""
    config = config or EvalConfig()
    if not 0 <= t < edited.num_frames:
        raise InputError(f"frame {t} outside 0..{edited.num_frames - 1}")
    cam = edited.cameras[t]
    proj = project_scene(edited, cam, t, config.window_size)
    height, width = proj.hit.shape

    rows, cols = np.nonzero(proj.hit)
    idx = proj.index[rows, cols]
    n = idx.size
    tgt_pos = edited.world_positions(t)[idx]
    d_tgt = _unit(tgt_pos - cam.center)
    edit_rot = edited.point_rotations(t, idx)
    ids = original.instance_ids[idx]
    eps = config.depth_tolerance * source.depth_range

    t_source = len(source.cameras)
    window = config.window
    candidates = sorted(range(max(0, t - window), min(t_source - 1, t + window) + 1), key=lambda r: (abs(r - t), r))
    scores, colors, dirs = [], [], []
    for r in candidates:
        src_pos = original.world_positions(r)[idx]
        src_row, src_col, z, valid = project_points(src_pos, source.cameras[r], width, height)
        src_row, src_col = np.where(valid, src_row, 0), np.where(valid, src_col, 0)
        observed = source.depth[r][src_row, src_col]
        visible = valid & (z <= observed + eps)
        consistent = np.abs(z - observed) <= eps
        same_instance = (ids == 0) | (source.instance[r][src_row, src_col] == ids)
        ok = visible & consistent & same_instance & original.alive[idx]

        # Source viewing direction carried into the edited instance frame.
        src_rot = original.point_rotations(r, idx)
        rel = np.einsum("nij,nkj->nik", edit_rot, src_rot)
        d_src = _unit(np.einsum("nij,nj->ni", rel, _unit(src_pos - source.cameras[r].center)))
        score = view_time_score(d_tgt, d_src, r, t, window, config.lambda_view) if n else np.zeros(0)
        scores.append(np.where(ok, score, -np.inf))
        colors.append(source.frames[r][src_row, src_col])
        dirs.append(d_src)

    support = np.zeros((height, width), dtype=bool)
    rgb = np.tile(np.asarray(config.neutral_color, dtype=np.float64), (height, width, 1))
    rgb[proj.hit] = proj.rgb[proj.hit]  # weak coarse prior where unsupported
    confidence = np.zeros((height, width))

    if n and candidates:
        score_mat = np.stack(scores)              # (C, n)
        color_mat = np.stack(colors)              # (C, n, 3)
        dir_mat = np.stack(dirs)                  # (C, n, 3)
        best = np.argmax(score_mat, axis=0)       # first max = temporally closest
        cols_n = np.arange(n)
        ok = np.isfinite(score_mat[best, cols_n])
        chosen = color_mat[best, cols_n]
        if config.blend_top_k > 1:
            chosen = _blend(score_mat, color_mat, config.blend_top_k, chosen)
        base = compute_confidence(
            proj.stats.coverage[rows, cols], proj.stats.purity[rows, cols],
            proj.stats.depth_std[rows, cols], config.tau, ok,
        )
        attenuated = attenuate_confidence(base, dir_mat[best, cols_n], d_tgt, config.alpha, config.gamma)
        support[rows[ok], cols[ok]] = True
        rgb[rows[ok], cols[ok]] = chosen[ok]
        confidence[rows, cols] = np.where(ok, attenuated, 0.0)

    in_extent = rays_hit_extent(cam, scene_extent(original, config.extent_inflation), width, height)
    dynamic = support & (proj.instance > 0)
    masks = decompose_regions(support, in_extent, dynamic)
    logger.debug("frame %d: %d supported, %d reveal, %d expand",
                 t, int(support.sum()), int(masks.reveal.sum()), int(masks.expand.sum()))
    return ControlState(ConditionField(rgb, confidence, support), masks, proj)


def _blend(score_mat: np.ndarray, color_mat: np.ndarray, k: int, fallback: np.ndarray) -> np.ndarray:
    """Score-weighted mix of the k best valid observations per pixel."""
    k = min(k, score_mat.shape[0])
    top = np.argsort(-score_mat, axis=0, kind="stable")[:k]
    top_scores = np.take_along_axis(score_mat, top, axis=0)
    weights = np.where(np.isfinite(top_scores), np.maximum(top_scores, 1e-6), 0.0)
    total = weights.sum(axis=0)
    top_colors = np.take_along_axis(color_mat, top[..., None], axis=0)
    mixed = (weights[..., None] * top_colors).sum(axis=0) / np.maximum(total, 1e-12)[:, None]
    return np.where(total[:, None] > 0, mixed, fallback)


def build_condition_field(scene: Scene, source: SourceVideo, edit: List[dict], t: int,
                          config: Optional[EvalConfig] = None, target_cam: Optional[CameraPose] = None) -> ConditionField:
    """Apply `edit` to `scene` and build the condition field of frame t.

    `target_cam` overrides the edited scene's camera at frame t.
    """
    edited = apply_edit(scene, edit)
    if target_cam is not None:
        cameras = list(edited.cameras)
        cameras[t] = target_cam
        edited = Scene(edited.positions, edited.colors, edited.instance_ids, tuple(cameras),
                       edited.width, edited.height, edited.tracks, edited.alive)
    return build_control_state(scene, edited, source, t, config).field


def build_controls(scene: Scene, edit: List[dict], config: Optional[EvalConfig] = None) -> List[ControlState]:
    """Control states for every frame of an edited synthetic scene."""
    source = render_source_video(scene)
    edited = apply_edit(scene, edit)
    return [build_control_state(scene, edited, source, t, config) for t in range(edited.num_frames)]
