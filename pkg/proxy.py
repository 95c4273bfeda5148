"""
Synthetic proxy cases built from an unedited video.

Each construction yields a small set of contestant bundles that share masks and
references but differ in the generated video, so the metrics have a known
best and worst answer:

    reconstruct      oracle (generated == source, everything preserve)
    reveal_withhold  clean (the source) and ghost_copy (ghost content inside Reveal)
    expand_crop      oracle (the source) and boundary_copy (edge pixels smeared outward)
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from cases import CaseBundle, read_sequence
from errors import ConfigError, InputError
from models import CaseMeta, Category, ProxyKind
from raster import RegionMasks

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 32
RECT_FRACTION = (0.15, 0.35)

Rect = Tuple[int, int, int, int]  # top, left, height, width


def synthetic_source(num_frames: int = 8, height: int = 64, width: int = 96, seed: int = 0) -> np.ndarray:
    """Procedural textured video drifting slowly to the right, shape (T, H, W, 3)."""
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    freq = rng.uniform(0.03, 0.15, size=(3, 2))
    phase = rng.uniform(0, 2 * np.pi, size=3)
    grain = rng.uniform(-0.05, 0.05, size=(height, width + num_frames, 3))
    frames = []
    for t in range(num_frames):
        x = cols - t
        chans = [
            0.5 + 0.4 * np.sin(freq[c, 0] * x + phase[c]) * np.cos(freq[c, 1] * rows)
            for c in range(3)
        ]
        frame = np.stack(chans, axis=-1) + grain[:, num_frames - t:num_frames - t + width]
        frames.append(np.clip(frame, 0.0, 1.0))
    return np.stack(frames)


def load_source(path) -> np.ndarray:
    return read_sequence(Path(path), Path(path).name)


def _check_source(source: np.ndarray) -> np.ndarray:
    source = np.asarray(source, dtype=np.float64)
    if source.ndim != 4 or source.shape[-1] != 3:
        raise InputError(f"source must be (T, H, W, 3), got {source.shape}")
    if len(source) < 2:
        raise InputError("a proxy case needs at least 2 source frames")
    return source


def _meta(base_id: str, kind: ProxyKind, contestant: str, seed: int) -> CaseMeta:
    return CaseMeta(case_id=f"{base_id}-{kind.value}-{contestant}", category=Category.CAMERA_ONLY,
                    kind=kind.value, seed=seed)


def _quantized_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return np.array_equal(np.round(a * 255.0), np.round(b * 255.0))


# ========== Reveal ==========

def random_rect(height: int, width: int, rng: np.random.Generator) -> Rect:
    low, high = RECT_FRACTION
    rh = max(1, int(round(rng.uniform(low, high) * height)))
    rw = max(1, int(round(rng.uniform(low, high) * width)))
    top = int(rng.integers(0, height - rh + 1))
    left = int(rng.integers(0, width - rw + 1))
    return top, left, rh, rw


def _check_rect(rect: Rect, height: int, width: int) -> Rect:
    top, left, rh, rw = (int(v) for v in rect)
    if rh < 1 or rw < 1 or top < 0 or left < 0 or top + rh > height or left + rw > width:
        raise ConfigError(f"reveal rectangle {rect} exceeds the {width}x{height} frame")
    if rh == height and rw == width:
        raise ConfigError("reveal rectangle covers the whole frame")
    return top, left, rh, rw


def _ghost_fill(frame: np.ndarray, rect: Rect, offset: Tuple[int, int]) -> np.ndarray:
    """Content for the withheld rectangle taken from elsewhere in the frame."""
    top, left, rh, rw = rect
    src_top, src_left = offset
    original = frame[top:top + rh, left:left + rw]
    patch = frame[src_top:src_top + rh, src_left:src_left + rw]
    if _quantized_equal(patch, original):
        patch = (original + 0.5) % 1.0
    return patch


def _reveal_withhold(source: np.ndarray, params: dict, rng: np.random.Generator, base_id: str, seed: int):
    num_frames, height, width, _ = source.shape
    mask = params.get("mask")
    if mask is not None:
        reveal = np.asarray(mask, dtype=bool)
        if reveal.shape != (height, width):
            raise ConfigError(f"reveal mask is {reveal.shape}, frames are {(height, width)}")
        if not reveal.any() or reveal.all():
            raise ConfigError("reveal mask must be non-empty and leave some preserve pixels")
        rows, cols = np.nonzero(reveal)
        rect = (rows.min(), cols.min(), rows.max() - rows.min() + 1, cols.max() - cols.min() + 1)
    else:
        rect = _check_rect(params.get("rect") or random_rect(height, width, rng), height, width)
        reveal = np.zeros((height, width), dtype=bool)
        top, left, rh, rw = rect
        reveal[top:top + rh, left:left + rw] = True

    top, left, rh, rw = rect
    offset = (int(rng.integers(0, height - rh + 1)), int(rng.integers(0, width - rw + 1)))
    ghost = source.copy()
    for t in range(num_frames):
        fill = _ghost_fill(source[t], rect, offset)
        region = ghost[t, top:top + rh, left:left + rw]
        inside = reveal[top:top + rh, left:left + rw]
        region[inside] = fill[inside]

    masks = [RegionMasks(~reveal, reveal.copy(), np.zeros_like(reveal), np.zeros_like(reveal))
             for _ in range(num_frames)]
    kind = ProxyKind.REVEAL_WITHHOLD
    return {
        "clean": CaseBundle(source.copy(), source, masks, _meta(base_id, kind, "clean", seed), ghost),
        "ghost_copy": CaseBundle(ghost.copy(), source, masks, _meta(base_id, kind, "ghost_copy", seed), ghost),
    }


# ========== Expand ==========

def expand_masks(height: int, width: int, margin: int) -> np.ndarray:
    if margin < 1 or 2 * margin >= min(height, width):
        raise ConfigError(f"margin {margin} does not fit a {width}x{height} frame")
    expand = np.ones((height, width), dtype=bool)
    expand[margin:height - margin, margin:width - margin] = False
    return expand


def crop_and_pad(frame: np.ndarray, margin: int) -> np.ndarray:
    """Center-crop by `margin` then replicate the crop's edge pixels back out."""
    crop = frame[margin:-margin, margin:-margin]
    return np.pad(crop, ((margin, margin), (margin, margin), (0, 0)), mode="edge")


def _expand_crop(source: np.ndarray, params: dict, base_id: str, seed: int):
    num_frames, height, width, _ = source.shape
    margin = int(params.get("margin", DEFAULT_MARGIN))
    expand = expand_masks(height, width, margin)
    padded = np.stack([crop_and_pad(frame, margin) for frame in source])
    # edge replication is seamless, so E-Seam does not separate the two contestants; E-Copy does
    masks = [RegionMasks(~expand, np.zeros_like(expand), expand.copy(), np.zeros_like(expand))
             for _ in range(num_frames)]
    kind = ProxyKind.EXPAND_CROP
    return {
        "oracle": CaseBundle(source.copy(), source, masks, _meta(base_id, kind, "oracle", seed), padded),
        "boundary_copy": CaseBundle(padded.copy(), source, masks, _meta(base_id, kind, "boundary_copy", seed), padded),
    }


# ========== Entry point ==========

def gen_proxy_case(source: np.ndarray, kind, params: Optional[dict] = None, seed: int = 0,
                   base_id: str = "proxy") -> Dict[str, CaseBundle]:
    """Build the contestant bundles of one proxy case, keyed by contestant name."""
    source = _check_source(source)
    kind = ProxyKind.parse(kind) if isinstance(kind, str) else kind
    params = params or {}
    rng = np.random.default_rng(seed)

    if kind is ProxyKind.RECONSTRUCT:
        masks = [RegionMasks.all_preserve(source.shape[1:3]) for _ in range(len(source))]
        bundles = {"oracle": CaseBundle(source.copy(), source, masks, _meta(base_id, kind, "oracle", seed), source)}
    elif kind is ProxyKind.REVEAL_WITHHOLD:
        bundles = _reveal_withhold(source, params, rng, base_id, seed)
    else:
        bundles = _expand_crop(source, params, base_id, seed)

    for bundle in bundles.values():
        bundle.validate()
    logger.info("built %s proxy %s with %d contestants", kind.value, base_id, len(bundles))
    return bundles
