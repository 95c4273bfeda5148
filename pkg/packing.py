"""
Latent-grid packing of the region-aware controls.

Channel layout per latent frame: [16 appearance | 1 confidence | 32 reveal | 32 expand].

Mask fold: each 8x8 latent cell is read row-major as 8 rows x 4 column pairs;
channel ``row * 4 + pair`` holds the pair's bit (OR of the two pixels). Masks
whose horizontal pixel pairs agree fold without loss and unfold back exactly.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from errors import ConfigError, InputError
from geometry import ConditionField
from raster import RegionMasks

APPEARANCE_CHANNELS = 16
SPATIAL_STRIDE = 8
TEMPORAL_STRIDE = 4
PAIR_WIDTH = 2
CHANNELS_PER_MASK = SPATIAL_STRIDE * SPATIAL_STRIDE // PAIR_WIDTH  # 32
TOTAL_CHANNELS = APPEARANCE_CHANNELS + 1 + 2 * CHANNELS_PER_MASK  # 81


@dataclass(frozen=True)
class PackedConditioning:
    channels: np.ndarray  # (81, H/8, W/8)

    @property
    def appearance(self) -> np.ndarray:
        return self.channels[:APPEARANCE_CHANNELS]

    @property
    def confidence(self) -> np.ndarray:
        return self.channels[APPEARANCE_CHANNELS]

    @property
    def mask_channels(self) -> np.ndarray:
        return self.channels[APPEARANCE_CHANNELS + 1:]


def _latent_shape(shape: Tuple[int, int]) -> Tuple[int, int]:
    height, width = shape
    if height % SPATIAL_STRIDE or width % SPATIAL_STRIDE:
        raise ConfigError(f"frame size {width}x{height} is not a multiple of stride {SPATIAL_STRIDE}")
    return height // SPATIAL_STRIDE, width // SPATIAL_STRIDE


def area_downsample(values: np.ndarray) -> np.ndarray:
    """Mean over each 8x8 cell."""
    lh, lw = _latent_shape(values.shape)
    return values.reshape(lh, SPATIAL_STRIDE, lw, SPATIAL_STRIDE).mean(axis=(1, 3))


def fold_mask(mask: np.ndarray) -> np.ndarray:
    """(H, W) bool -> (32, H/8, W/8) binary float channels.

    Each channel bit is the OR of a horizontal pixel pair, so only pair-aligned
    masks survive unfold_mask unchanged; any other mask grows to whole pairs.
    """
    lh, lw = _latent_shape(mask.shape)
    cells = np.asarray(mask, dtype=bool).reshape(lh, SPATIAL_STRIDE, lw, SPATIAL_STRIDE // PAIR_WIDTH, PAIR_WIDTH)
    pairs = cells.any(axis=-1)                      # (lh, 8, lw, 4)
    return pairs.transpose(1, 3, 0, 2).reshape(CHANNELS_PER_MASK, lh, lw).astype(np.float64)


def unfold_mask(channels: np.ndarray) -> np.ndarray:
    """Inverse of fold_mask: (32, h, w) -> (8h, 8w) bool."""
    if channels.shape[0] != CHANNELS_PER_MASK:
        raise InputError(f"expected {CHANNELS_PER_MASK} mask channels, got {channels.shape[0]}")
    _, lh, lw = channels.shape
    pairs = channels.reshape(SPATIAL_STRIDE, SPATIAL_STRIDE // PAIR_WIDTH, lh, lw).transpose(2, 0, 3, 1) > 0.5
    full = np.repeat(pairs[..., None], PAIR_WIDTH, axis=-1)
    return full.reshape(lh * SPATIAL_STRIDE, lw * SPATIAL_STRIDE)


def unfold_masks(packed: PackedConditioning) -> Tuple[np.ndarray, np.ndarray]:
    """Reveal and expand masks at full resolution."""
    mask_channels = packed.mask_channels
    return unfold_mask(mask_channels[:CHANNELS_PER_MASK]), unfold_mask(mask_channels[CHANNELS_PER_MASK:])


def pack_conditioning(field: ConditionField, masks: RegionMasks, latent_appearance: np.ndarray) -> PackedConditioning:
    lh, lw = _latent_shape(field.confidence.shape)
    if masks.shape != field.confidence.shape:
        raise InputError("mask and confidence sizes differ")
    latent_appearance = np.asarray(latent_appearance, dtype=np.float64)
    if latent_appearance.shape != (APPEARANCE_CHANNELS, lh, lw):
        raise InputError(f"latent appearance must be {(APPEARANCE_CHANNELS, lh, lw)}, got {latent_appearance.shape}")
    channels = np.concatenate([
        latent_appearance,
        area_downsample(field.confidence)[None],
        fold_mask(masks.reveal),
        fold_mask(masks.expand),
    ])
    return PackedConditioning(channels)


def latent_frame_indices(num_frames: int, stride: int = TEMPORAL_STRIDE) -> List[int]:
    """First frame, then every `stride`-th: 1 + (T - 1) // stride latent frames."""
    if num_frames < 1:
        raise InputError("no frames to pack")
    return list(range(0, num_frames, stride))[: 1 + (num_frames - 1) // stride]


def pack_sequence(fields: Sequence[ConditionField], masks: Sequence[RegionMasks],
                  latents: Sequence[np.ndarray], stride: int = TEMPORAL_STRIDE) -> np.ndarray:
    """Pack a clip into (L, 81, H/8, W/8) with L latent frames."""
    if len(fields) != len(masks):
        raise InputError("fields and masks differ in length")
    indices = latent_frame_indices(len(fields), stride)
    if len(latents) != len(indices):
        raise InputError(f"expected {len(indices)} latent frames, got {len(latents)}")
    return np.stack([
        pack_conditioning(fields[i], masks[i], latent).channels
        for i, latent in zip(indices, latents)
    ])
