"""
Region-aware metrics over a CaseBundle.

Every metric returns None (absent) when no frame or frame pair has the region it
needs; absent metrics are skipped during aggregation and never reported as 0.
Functions take an optional ``trace`` list that receives one entry per frame (or
frame pair) with None for skipped entries.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from cases import CaseBundle
from errors import EmptyRegionError
from models import EvalConfig, Metric, MetricReport, REGION_METRICS, empty_values
from perceptual import PerceptualBackend, composite_on_neutral, backend_pair
from raster import dilate_mask, histogram_intersection, hsv_histogram, masked_mae, mean_color

logger = logging.getLogger(__name__)

Trace = Optional[List[Optional[float]]]


def _mean_present(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _record(trace: Trace, values: List[Optional[float]]) -> None:
    if trace is not None:
        trace.extend(values)


# ========== Preserve ==========

def p_perceptual(case: CaseBundle, selector: str, backend: PerceptualBackend,
                 neutral: Sequence[float] = (0.5, 0.5, 0.5), trace: Trace = None) -> Optional[float]:
    """Mean backend distance between neutral composites of Î_t and I^p_t.

    `selector` picks the mask: "preserve" (P-LPIPS, P-DISTS) or "dynamic" (P-Dyn-LPIPS).
    """
    per_frame: List[Optional[float]] = []
    for t, masks in enumerate(case.masks):
        mask = getattr(masks, selector)
        if not mask.any():
            per_frame.append(None)
            continue
        a = composite_on_neutral(case.generated[t], mask, neutral)
        b = composite_on_neutral(case.preserve_ref[t], mask, neutral)
        per_frame.append(backend(a, b))
    _record(trace, per_frame)
    return _mean_present(per_frame)


def p_tempdrift(case: CaseBundle, trace: Trace = None) -> Optional[float]:
    """Mean |(Î_t - Î_{t-1}) - (I^p_t - I^p_{t-1})| over M^P_t ∩ M^P_{t-1}."""
    per_pair: List[Optional[float]] = []
    for t in range(1, case.num_frames):
        overlap = case.masks[t].preserve & case.masks[t - 1].preserve
        if not overlap.any():
            per_pair.append(None)
            continue
        generated = case.generated[t] - case.generated[t - 1]
        reference = case.preserve_ref[t] - case.preserve_ref[t - 1]
        per_pair.append(masked_mae(generated, reference, overlap))
    _record(trace, per_pair)
    return _mean_present(per_pair)


# ========== Reveal ==========

def r_ghost(case: CaseBundle, sigma: float = 0.18, trace: Trace = None) -> Optional[float]:
    """exp(-MAE/sigma) with the MAE pooled over every reveal pixel of every frame."""
    reveal = np.stack([m.reveal for m in case.masks])
    if trace is not None:
        for t in range(case.num_frames):
            if reveal[t].any():
                trace.append(float(np.exp(-masked_mae(case.generated[t], case.ghost_ref[t], reveal[t]) / sigma)))
            else:
                trace.append(None)
    if not reveal.any():
        return None
    mae = masked_mae(case.generated, case.ghost_ref, reveal)
    return float(np.exp(-mae / sigma))


def boundary_bands(inner: np.ndarray, preserve: np.ndarray, r: int):
    """Inner-side and preserve-side bands along the inner/preserve boundary."""
    return inner & dilate_mask(preserve, r), preserve & dilate_mask(inner, r)


def seam_score(case: CaseBundle, inner_region: str, r: int = 5, trace: Trace = None) -> Optional[float]:
    """Mean L1 distance between the mean colors of the two boundary bands of Î_t.

    R-Seam uses inner_region="reveal", E-Seam uses "expand".
    """
    per_frame: List[Optional[float]] = []
    for t, masks in enumerate(case.masks):
        inner_band, preserve_band = boundary_bands(getattr(masks, inner_region), masks.preserve, r)
        try:
            gap = mean_color(case.generated[t], inner_band) - mean_color(case.generated[t], preserve_band)
        except EmptyRegionError:
            logger.debug("%s: frame %d has no %s seam", case.case_id, t, inner_region)
            per_frame.append(None)
            continue
        per_frame.append(float(np.abs(gap).sum()))
    _record(trace, per_frame)
    return _mean_present(per_frame)


# ========== Expand ==========

def e_temp(case: CaseBundle, trace: Trace = None) -> Optional[float]:
    """Mean |Î_t - Î_{t-1}| over M^E_t ∩ M^E_{t-1}. No reference involved."""
    per_pair: List[Optional[float]] = []
    for t in range(1, case.num_frames):
        overlap = case.masks[t].expand & case.masks[t - 1].expand
        if not overlap.any():
            per_pair.append(None)
            continue
        per_pair.append(masked_mae(case.generated[t], case.generated[t - 1], overlap))
    _record(trace, per_pair)
    return _mean_present(per_pair)


def copy_frame_score(frame: np.ndarray, ghost: np.ndarray, expand: np.ndarray,
                     preserve: np.ndarray, sigma: float, r: int) -> float:
    """max(boundary-histogram intersection, exp(-MAE to ghost / sigma)) for one frame."""
    _, preserve_band = boundary_bands(expand, preserve, r)
    if preserve_band.any():
        s_bdry = histogram_intersection(hsv_histogram(frame, expand), hsv_histogram(frame, preserve_band))
    else:
        s_bdry = 0.0
    s_ghost = float(np.exp(-masked_mae(frame, ghost, expand) / sigma))
    return max(s_bdry, s_ghost)


def e_copy(case: CaseBundle, sigma: float = 0.18, r: int = 5, trace: Trace = None) -> Optional[float]:
    per_frame: List[Optional[float]] = []
    for t, masks in enumerate(case.masks):
        if not masks.expand.any():
            per_frame.append(None)
            continue
        per_frame.append(copy_frame_score(
            case.generated[t], case.ghost_ref[t], masks.expand, masks.preserve, sigma, r,
        ))
    _record(trace, per_frame)
    return _mean_present(per_frame)


# ========== Case report ==========

def evaluate_regions(case: CaseBundle, config: EvalConfig,
                     backends: Optional[Dict[str, PerceptualBackend]] = None) -> MetricReport:
    """All nine region metrics for one case, with per-frame traces."""
    if backends is None:
        backends = backend_pair(config.perceptual_backend, config.structure_backend)
    perceptual, structure = backends["perceptual"], backends["structure"]
    neutral, sigma, r = config.neutral_color, config.sigma, config.boundary_radius

    runs = {
        Metric.P_LPIPS: lambda tr: p_perceptual(case, "preserve", perceptual, neutral, tr),
        Metric.P_DISTS: lambda tr: p_perceptual(case, "preserve", structure, neutral, tr),
        Metric.P_TEMPDRIFT: lambda tr: p_tempdrift(case, tr),
        Metric.P_DYN_LPIPS: lambda tr: p_perceptual(case, "dynamic", perceptual, neutral, tr),
        Metric.R_GHOST: lambda tr: r_ghost(case, sigma, tr),
        Metric.R_SEAM: lambda tr: seam_score(case, "reveal", r, tr),
        Metric.E_TEMP: lambda tr: e_temp(case, tr),
        Metric.E_SEAM: lambda tr: seam_score(case, "expand", r, tr),
        Metric.E_COPY: lambda tr: e_copy(case, sigma, r, tr),
    }
    values = empty_values(REGION_METRICS)
    traces: Dict[str, List[Optional[float]]] = {}
    for metric in REGION_METRICS:
        trace: List[Optional[float]] = []
        values[metric.value] = runs[metric](trace)
        traces[metric.value] = trace
        if values[metric.value] is None:
            logger.debug("%s: %s absent", case.case_id, metric.value)
    return MetricReport(values=values, traces=traces)
