import operator
from typing import Annotated, Any, Dict, List, Optional
from typing_extensions import TypedDict


class CaseState(TypedDict):
    """State for the per-case evaluation graph.

    `values` and `errors` use reducers so each node only returns what it adds:
    the region node and the control node both write metric values, and every
    node may append an error without clobbering earlier ones.
    """

    # Case directory being evaluated
    case_path: str

    # Evaluation settings (an EvalConfig)
    config: Any

    # Backends keyed by role ("perceptual", "structure"), shared across cases
    backends: Optional[Dict[str, Any]]

    # Decoded CaseBundle, set by the load node
    bundle: Optional[Any]

    # Case id and category from meta.json (falls back to the directory name)
    case_id: str
    category: Optional[str]

    # Metric values - merged across nodes, later writes win per key
    values: Annotated[Dict[str, Optional[float]], operator.or_]

    # Per-frame diagnostics for the region metrics
    traces: Annotated[Dict[str, List[Optional[float]]], operator.or_]

    # Errors collected along the way - uses operator.add to APPEND not overwrite
    errors: Annotated[List[str], operator.add]
