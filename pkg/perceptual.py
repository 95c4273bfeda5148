"""
Perceptual distance backends.

The P-metrics only need ``backend.distance(a, b)``. Two deterministic reference
backends ship with the toolkit so evaluation runs offline; scores are comparable
only between runs using the same backend, which is why reports echo the
backend identifiers. An ``external`` backend shells out to a user-provided
executable.
"""

import logging
import os
import subprocess
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from errors import ConfigError, InputError, PrebenchError

logger = logging.getLogger(__name__)

PYRAMID_LEVELS = 3
RMS_FLOOR = 1e-8
PATCH = 16
EXTERNAL_EXE_ENV = "PREBENCH_PERCEPTUAL_EXE"


def composite_on_neutral(frame: np.ndarray, mask: np.ndarray, color: Sequence[float] = (0.5, 0.5, 0.5)) -> np.ndarray:
    """Masked pixels from `frame`, everything else the constant `color`."""
    mask = np.asarray(mask, dtype=bool)
    if frame.shape[:2] != mask.shape:
        raise InputError(f"frame {frame.shape[:2]} and mask {mask.shape} differ")
    out = np.empty_like(frame, dtype=np.float64)
    out[...] = np.asarray(color, dtype=np.float64)
    out[mask] = frame[mask]
    return out


class PerceptualBackend(ABC):
    """distance(x, x) == 0, symmetric, non-negative."""
    identifier: str = "abstract"

    @abstractmethod
    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        ...

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        if a.shape != b.shape:
            raise InputError(f"frames differ in shape: {a.shape} vs {b.shape}")
        return self.distance(a, b)


# ========== Reference perceptual (LPIPS slot) ==========

def _half(img: np.ndarray) -> np.ndarray:
    h, w = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    if h == 0 or w == 0:
        return img
    img = img[:h, :w]
    return img.reshape(h // 2, 2, w // 2, 2, -1).mean(axis=(1, 3))


def _features(img: np.ndarray) -> list:
    """Per channel: intensity, horizontal and vertical central differences."""
    maps = []
    for c in range(img.shape[2]):
        chan = img[..., c]
        maps.append(chan)
        maps.append(ndimage.correlate1d(chan, [-0.5, 0.0, 0.5], axis=1, mode="nearest"))
        maps.append(ndimage.correlate1d(chan, [-0.5, 0.0, 0.5], axis=0, mode="nearest"))
    return maps


def reference_perceptual_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Multiscale feature distance.

    Each feature map pair is scaled by the RMS of both maps together (floored at
    1e-8) so the distance stays symmetric and only vanishes for identical inputs.
    """
    if a.shape != b.shape:
        raise InputError(f"frames differ in shape: {a.shape} vs {b.shape}")
    level_scores = []
    xa, xb = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    for level in range(PYRAMID_LEVELS):
        if level:
            xa, xb = _half(xa), _half(xb)
        diffs = []
        for fa, fb in zip(_features(xa), _features(xb)):
            rms = max(np.sqrt(0.5 * (np.mean(fa * fa) + np.mean(fb * fb))), RMS_FLOOR)
            diffs.append(np.mean(((fa - fb) / rms) ** 2))
        level_scores.append(np.mean(diffs))
    return float(np.mean(level_scores))


class ReferencePerceptual(PerceptualBackend):
    identifier = "reference-perceptual"

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        return reference_perceptual_distance(a, b)


# ========== Reference structure/texture (DISTS slot) ==========

def _patch_terms(pa: np.ndarray, pb: np.ndarray) -> float:
    ma, mb = pa.mean(axis=(0, 1)), pb.mean(axis=(0, 1))
    sa, sb = pa.std(axis=(0, 1)), pb.std(axis=(0, 1))
    texture = float(np.mean(np.abs(ma - mb) + np.abs(sa - sb)))
    ca, cb = (pa - ma).ravel(), (pb - mb).ravel()
    na, nb = np.linalg.norm(ca), np.linalg.norm(cb)
    if na < RMS_FLOOR and nb < RMS_FLOOR:
        structure = 0.0
    elif na < RMS_FLOOR or nb < RMS_FLOOR:
        structure = 1.0
    else:
        # 1 - cosine, written so identical tiles give exactly 0
        structure = 0.5 * float(np.sum((ca / na - cb / nb) ** 2))
    return 0.5 * (texture + structure)


def reference_structure_texture_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over 16x16 tiles of 0.5 * (texture + structure), clamped to [0, 1].

    texture: per channel |mean_a - mean_b| + |std_a - std_b|, averaged over channels.
    structure: 1 - cosine similarity of the mean-subtracted tiles.
    """
    if a.shape != b.shape:
        raise InputError(f"frames differ in shape: {a.shape} vs {b.shape}")
    height, width = a.shape[:2]
    scores = [
        _patch_terms(a[y:y + PATCH, x:x + PATCH], b[y:y + PATCH, x:x + PATCH])
        for y in range(0, height, PATCH)
        for x in range(0, width, PATCH)
    ]
    return float(np.clip(np.mean(scores), 0.0, 1.0))


class ReferenceStructureTexture(PerceptualBackend):
    identifier = "reference-dists"

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        return reference_structure_texture_distance(a, b)


# ========== External executable ==========

class ExternalBackend(PerceptualBackend):
    """Runs ``<exe> a.png b.png`` and reads one decimal score from stdout."""
    identifier = "external"

    def __init__(self, executable: Optional[str] = None, timeout: float = 120.0):
        self.executable = executable or os.getenv(EXTERNAL_EXE_ENV)
        if not self.executable:
            raise ConfigError(f"external backend needs {EXTERNAL_EXE_ENV} or an explicit executable")
        self.timeout = timeout

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        with tempfile.TemporaryDirectory(prefix="prebench-") as tmp:
            paths = []
            for name, img in (("a.png", a), ("b.png", b)):
                path = Path(tmp) / name
                Image.fromarray(np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)).save(path)
                paths.append(str(path))
            try:
                proc = subprocess.run(
                    [self.executable, *paths], capture_output=True, text=True, timeout=self.timeout,
                )
            except (OSError, subprocess.TimeoutExpired) as e:
                raise PrebenchError(f"external backend failed to run: {e}") from e
        if proc.returncode != 0:
            raise PrebenchError(f"external backend exited with {proc.returncode}: {proc.stderr.strip()}")
        try:
            return float(proc.stdout.strip().split()[0])
        except (IndexError, ValueError) as e:
            raise PrebenchError(f"external backend printed no score: {proc.stdout!r}") from e


BACKENDS = {
    ReferencePerceptual.identifier: ReferencePerceptual,
    ReferenceStructureTexture.identifier: ReferenceStructureTexture,
    ExternalBackend.identifier: ExternalBackend,
}


def get_backend(name: str) -> PerceptualBackend:
    cls = BACKENDS.get(name)
    if cls is None:
        raise ConfigError(f"unknown perceptual backend {name!r}; choose from {sorted(BACKENDS)}")
    return cls()


def backend_pair(perceptual: str, structure: str) -> Dict[str, PerceptualBackend]:
    """The two backends the P-metrics use, keyed by role."""
    return {"perceptual": get_backend(perceptual), "structure": get_backend(structure)}
