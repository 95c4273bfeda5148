"""
Raster primitives shared by every metric.

Frames are float64 arrays of shape (H, W, 3) with channels in [0, 1]; masks are
bool arrays of shape (H, W). Everything here is a pure function of its inputs.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from matplotlib.colors import rgb_to_hsv as _mpl_rgb_to_hsv
from scipy import ndimage

from errors import EmptyRegionError, InputError

logger = logging.getLogger(__name__)

HSV_BINS: Tuple[int, int, int] = (16, 8, 8)
MASK_THRESHOLD = 127


def to_frame(array, name: str = "frame") -> np.ndarray:
    """Coerce an (H, W, 3) array to a float64 frame, clamping to [0, 1].

    uint8 input is scaled by 1/255. Out-of-range float values (lossy codecs can
    overshoot) are clamped with a warning.
    """
    arr = np.asarray(array)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError(f"{name}: expected shape (H, W, 3), got {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: non-finite channel values")
    low, high = arr.min(initial=0.0), arr.max(initial=0.0)
    if low < 0.0 or high > 1.0:
        logger.warning("%s: channel values in [%.4f, %.4f] clamped to [0, 1]", name, low, high)
        arr = np.clip(arr, 0.0, 1.0)
    return arr


def to_mask(array, threshold: int = MASK_THRESHOLD) -> np.ndarray:
    """Binarize an 8-bit grayscale mask: values strictly above `threshold` are in."""
    arr = np.asarray(array)
    if arr.ndim == 3:
        arr = arr[..., 0]
    if arr.ndim != 2:
        raise InputError(f"mask: expected 2-D array, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.copy()
    return arr > threshold


def dilate_mask(mask: np.ndarray, r: int) -> np.ndarray:
    """Square (Chebyshev) dilation with side 2r+1, clipped at the image border."""
    if r < 0:
        raise InputError(f"dilation radius must be >= 0, got {r}")
    mask = np.asarray(mask, dtype=bool)
    if r == 0 or not mask.any():
        return mask.copy()
    structure = np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
    return ndimage.binary_dilation(mask, structure=structure, border_value=0)


def rgb_to_hsv(frame: np.ndarray) -> np.ndarray:
    """Hexcone RGB to HSV with H, S, V in [0, 1]. Achromatic pixels get H = 0."""
    return _mpl_rgb_to_hsv(np.asarray(frame, dtype=np.float64))


def hsv_histogram(frame: np.ndarray, mask: np.ndarray, bins: Tuple[int, int, int] = HSV_BINS) -> np.ndarray:
    """Normalized HSV histogram over the masked pixels, flattened H-major.

    An empty mask gives an all-zero histogram.
    """
    mask = np.asarray(mask, dtype=bool)
    if frame.shape[:2] != mask.shape:
        raise InputError(f"frame {frame.shape[:2]} and mask {mask.shape} differ")
    size = int(np.prod(bins))
    count = int(mask.sum())
    if count == 0:
        return np.zeros(size)
    hsv = rgb_to_hsv(frame[mask])
    counts, _ = np.histogramdd(hsv, bins=bins, range=((0.0, 1.0),) * 3)
    return counts.ravel() / count


def histogram_intersection(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise InputError("histograms have different bin layouts")
    return float(np.minimum(a, b).sum())


def mean_color(frame: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-channel mean over the mask. Raises EmptyRegionError on an empty mask."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyRegionError("empty band")
    return frame[mask].mean(axis=0)


def masked_mean_abs(diff: np.ndarray, mask: np.ndarray) -> float:
    """Mean of |diff| over masked pixels and all channels."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyRegionError("empty region")
    return float(np.abs(diff[mask]).mean())


def masked_mae(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    if a.shape != b.shape:
        raise InputError(f"frames differ in shape: {a.shape} vs {b.shape}")
    return masked_mean_abs(a - b, mask)


@dataclass(frozen=True)
class RegionMasks:
    """Role masks for one frame."""
    preserve: np.ndarray
    reveal: np.ndarray
    expand: np.ndarray
    dynamic: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.preserve.shape

    def partition_violation(self) -> Optional[Tuple[Tuple[int, int], str]]:
        """First pixel breaking the partition, or None when the masks are valid."""
        shapes = {m.shape for m in (self.preserve, self.reveal, self.expand, self.dynamic)}
        if len(shapes) != 1:
            return (0, 0), f"mask shapes differ: {sorted(shapes)}"
        total = self.preserve.astype(np.uint8) + self.reveal + self.expand
        bad = np.argwhere(total != 1)
        if len(bad):
            row, col = (int(v) for v in bad[0])
            reason = "pixel in no role" if total[row, col] == 0 else "pixel in more than one role"
            return (row, col), reason
        outside = np.argwhere(self.dynamic & ~self.preserve)
        if len(outside):
            row, col = (int(v) for v in outside[0])
            return (row, col), "dynamic pixel outside preserve"
        return None

    @classmethod
    def all_preserve(cls, shape: Tuple[int, int]) -> "RegionMasks":
        empty = np.zeros(shape, dtype=bool)
        return cls(np.ones(shape, dtype=bool), empty, empty.copy(), empty.copy())
