"""Shared fixtures: small in-memory cases and synthetic videos."""

import numpy as np
import pytest

from cases import CaseBundle
from models import CaseMeta, EvalConfig
from raster import RegionMasks


def make_masks(shape, reveal=None, expand=None, dynamic=None) -> RegionMasks:
    empty = np.zeros(shape, dtype=bool)
    reveal = empty.copy() if reveal is None else np.asarray(reveal, dtype=bool)
    expand = empty.copy() if expand is None else np.asarray(expand, dtype=bool)
    preserve = ~(reveal | expand)
    dynamic = empty.copy() if dynamic is None else np.asarray(dynamic, dtype=bool) & preserve
    return RegionMasks(preserve, reveal, expand, dynamic)


def make_case(generated, preserve_ref=None, ghost_ref=None, masks=None, case_id="case") -> CaseBundle:
    generated = np.asarray(generated, dtype=np.float64)
    preserve_ref = generated.copy() if preserve_ref is None else np.asarray(preserve_ref, dtype=np.float64)
    if masks is None:
        masks = [make_masks(generated.shape[1:3]) for _ in range(len(generated))]
    elif isinstance(masks, RegionMasks):
        masks = [masks] * len(generated)
    return CaseBundle(generated, preserve_ref, list(masks), CaseMeta(case_id=case_id), ghost_ref)


@pytest.fixture
def config():
    return EvalConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def video(rng):
    """Random 4-frame 16x24 video."""
    return rng.uniform(0.0, 1.0, size=(4, 16, 24, 3))
