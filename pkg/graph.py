import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from langgraph.graph import StateGraph, END

from cases import load_case
from control_metrics import evaluate_controls
from errors import ConfigError, PrebenchError
from models import ALL_METRICS, CaseResult, Category, CorpusReport, EvalConfig, MetricReport, empty_values
from perceptual import PerceptualBackend, backend_pair
from region_metrics import evaluate_regions
from report import quantize
from state import CaseState

logger = logging.getLogger(__name__)


# ========== Nodes ==========

def load_node(state: CaseState) -> dict:
    """Decode and validate the case directory."""
    try:
        bundle = load_case(state["case_path"])
    except PrebenchError as e:
        logger.error("%s: %s", state["case_id"], e)
        return {"errors": [str(e)]}
    return {
        "bundle": bundle,
        "case_id": bundle.case_id,
        "category": bundle.meta.category.value,
    }


def regions_node(state: CaseState) -> dict:
    """Nine region metrics with per-frame traces."""
    bundle = state["bundle"]
    try:
        report = evaluate_regions(bundle, state["config"], state["backends"])
    except PrebenchError as e:
        logger.error("%s: region metrics failed: %s", bundle.case_id, e)
        return {"errors": [str(e)]}
    return {"values": report.values, "traces": report.traces}


def controls_node(state: CaseState) -> dict:
    """Camera and object control metrics from the case trajectories."""
    bundle = state["bundle"]
    try:
        values = evaluate_controls(bundle.trajectories, state["config"].lambda_objmc)
    except PrebenchError as e:
        logger.error("%s: control metrics failed: %s", bundle.case_id, e)
        return {"errors": [str(e)]}
    return {"values": values}


def after_load(state: CaseState) -> str:
    return "end" if state.get("errors") else "regions"


def after_regions(state: CaseState) -> str:
    """Control metrics only run when the case ships trajectories."""
    if state.get("errors"):
        return "end"
    return "controls" if state["bundle"].trajectories is not None else "end"


def create_case_graph():
    """
    Create the per-case evaluation workflow.

    Graph structure:
    load -> regions -> [controls if trajectories present] -> END
    A failed load ends the run with the error recorded in the state.
    """
    workflow = StateGraph(CaseState)

    workflow.add_node("load", load_node)
    workflow.add_node("regions", regions_node)
    workflow.add_node("controls", controls_node)

    workflow.set_entry_point("load")

    workflow.add_conditional_edges("load", after_load, {"regions": "regions", "end": END})
    workflow.add_conditional_edges("regions", after_regions, {"controls": "controls", "end": END})
    workflow.add_edge("controls", END)

    return workflow.compile()


# Create the compiled graph
case_graph = create_case_graph()


# ========== Evaluation ==========

def _quantized_report(values: Dict[str, Optional[float]], traces: Dict[str, List[Optional[float]]]) -> MetricReport:
    merged = empty_values(ALL_METRICS)
    merged.update({k: quantize(v) for k, v in values.items()})
    return MetricReport(
        values=merged,
        traces={k: [quantize(v) for v in trace] for k, trace in traces.items()},
    )


def evaluate_case(case_path, config: EvalConfig,
                  backends: Optional[Dict[str, PerceptualBackend]] = None) -> CaseResult:
    """
    Evaluate one case directory through the case graph.

    Args:
        case_path: Case directory
        config: Evaluation settings
        backends: Perceptual backends keyed by role; built from the config when omitted

    Returns:
        CaseResult with status "error" and a message when anything failed
    """
    if backends is None:
        backends = backend_pair(config.perceptual_backend, config.structure_backend)
    initial_state = {
        "case_path": str(case_path),
        "config": config,
        "backends": backends,
        "bundle": None,
        "case_id": Path(case_path).name,
        "category": None,
        "values": {},
        "traces": {},
        "errors": [],
    }
    try:
        result = case_graph.invoke(initial_state)
    except Exception as e:
        logger.exception("%s: evaluation crashed", initial_state["case_id"])
        return CaseResult(case_id=initial_state["case_id"], status="error", error=f"{type(e).__name__}: {e}")

    if result.get("errors"):
        return CaseResult(
            case_id=result["case_id"],
            category=result.get("category"),
            status="error",
            error="; ".join(result["errors"]),
        )
    return CaseResult(
        case_id=result["case_id"],
        category=result.get("category"),
        report=_quantized_report(result["values"], result["traces"]),
    )


def aggregate(cases: Sequence[CaseResult]):
    """Mean of each metric over the successful cases where it is present."""
    aggregates = empty_values(ALL_METRICS)
    counts = {m.value: 0 for m in ALL_METRICS}
    for metric in ALL_METRICS:
        present = [
            c.report.values[metric.value] for c in cases
            if c.status == "ok" and c.report.values.get(metric.value) is not None
        ]
        counts[metric.value] = len(present)
        if present:
            aggregates[metric.value] = quantize(float(np.mean(present)))
    return aggregates, counts


def aggregate_by_category(cases: Sequence[CaseResult]):
    """`aggregate` within each editing category; every category gets an entry."""
    aggregates, counts = {}, {}
    for category in Category:
        members = [c for c in cases if c.category == category]
        aggregates[category.value], counts[category.value] = aggregate(members)
    return aggregates, counts


def evaluate_corpus(case_paths: Sequence, config: Optional[EvalConfig] = None) -> CorpusReport:
    """
    Evaluate every case and aggregate.

    Cases run on `config.workers` threads; the report is ordered by case id, so it
    does not depend on the worker count. A failing case is recorded and skipped.
    """
    config = config or EvalConfig()
    if not case_paths:
        raise ConfigError("no cases to evaluate")
    backends = backend_pair(config.perceptual_backend, config.structure_backend)
    paths = sorted(str(p) for p in case_paths)

    logger.info("evaluating %d cases on %d workers", len(paths), config.workers)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda p: evaluate_case(p, config, backends), paths))

    results.sort(key=lambda c: c.case_id)
    failed = sum(1 for c in results if c.status != "ok")
    if failed:
        logger.warning("%d of %d cases failed", failed, len(results))

    aggregates, counts = aggregate(results)
    category_aggregates, category_counts = aggregate_by_category(results)
    return CorpusReport(
        cases=results,
        aggregates=aggregates,
        counts=counts,
        category_aggregates=category_aggregates,
        category_counts=category_counts,
        config=config.echo(),
        backends={role: backend.identifier for role, backend in backends.items()},
        seed=config.seed,
    )
