"""
Report emission.

Decimals are written with exactly 6 fractional digits, rounded half-to-even.
Absent metrics are JSON null and empty CSV cells, never 0.
"""

import csv
import io
import json
import logging
import math
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Any, Optional

from errors import InputError, PrebenchError
from models import ALL_METRICS, CorpusReport, ValidationSummary

logger = logging.getLogger(__name__)

DECIMALS = 6
_STEP = Decimal(1).scaleb(-DECIMALS)


def format_decimal(value: float) -> str:
    if not math.isfinite(value):
        raise InputError(f"cannot report non-finite value {value}")
    text = str(Decimal(repr(float(value))).quantize(_STEP, rounding=ROUND_HALF_EVEN))
    return "0.000000" if text == "-0.000000" else text


def quantize(value: Optional[float]) -> Optional[float]:
    """The float a reader gets back after parsing the formatted value."""
    return None if value is None else float(format_decimal(value))


# ========== JSON ==========

def _encode(value: Any, indent: int, level: int) -> str:
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_decimal(value)
    if isinstance(value, (int, str)):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(v is None or isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in value) + "]"
        items = [f"{inner}{_encode(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise InputError(f"cannot encode {type(value).__name__} in a report")


def report_to_json(report: CorpusReport) -> str:
    return _encode(report.model_dump(mode="json"), indent=2, level=0) + "\n"


# ========== CSV ==========

def report_to_csv(report: CorpusReport) -> str:
    """One row per case, then a single aggregate row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    names = [m.value for m in ALL_METRICS]
    writer.writerow(["case_id", "category", "status", *names])

    def cell(value: Optional[float]) -> str:
        return "" if value is None else format_decimal(value)

    for case in report.cases:
        category = case.category.value if case.category is not None else ""
        writer.writerow([case.case_id, category, case.status, *(cell(case.report.values.get(n)) for n in names)])
    writer.writerow(["aggregate", "", "", *(cell(report.aggregates.get(n)) for n in names)])
    return buffer.getvalue()


def emit_report(report: CorpusReport, fmt: str = "json", path=None) -> str:
    """Render the report and write it to `path` when given."""
    if fmt == "json":
        text = report_to_json(report)
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise InputError(f"unknown report format {fmt!r}")
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as e:
            raise PrebenchError(f"cannot write report to {path}: {e}") from e
        logger.info("wrote %s report to %s", fmt, path)
    return text


def load_report(path) -> CorpusReport:
    """Read a JSON report back."""
    try:
        return CorpusReport.model_validate_json(Path(path).read_text())
    except (OSError, ValueError) as e:
        raise InputError(f"cannot read report {path}: {e}") from e


def validation_to_json(summary: ValidationSummary) -> str:
    return _encode(summary.model_dump(mode="json"), indent=2, level=0) + "\n"
