import json

import pytest

from errors import InputError
from graph import aggregate_by_category
from models import CaseResult, CorpusReport, MetricReport, empty_values, ALL_METRICS
from report import emit_report, format_decimal, load_report, quantize, report_to_csv, report_to_json


def _report():
    values = empty_values(ALL_METRICS)
    values["P-LPIPS"] = 0.2137
    case = CaseResult(
        case_id="x",
        category="camera-only",
        report=MetricReport(values=values, traces={"P-LPIPS": [0.2137, None]}),
    )
    failed = CaseResult(case_id="y", status="error", error="[y] missing or empty sequence: generated/")
    aggregates = empty_values(ALL_METRICS)
    aggregates["P-LPIPS"] = 0.2137
    counts = {m.value: 0 for m in ALL_METRICS}
    counts["P-LPIPS"] = 1
    category_aggregates, category_counts = aggregate_by_category([case, failed])
    return CorpusReport(
        cases=[case, failed], aggregates=aggregates, counts=counts,
        category_aggregates=category_aggregates, category_counts=category_counts,
        config={"sigma": 0.18, "boundary_radius": 5}, backends={"perceptual": "reference-perceptual"},
    )


# ========== Decimals ==========

def test_six_fractional_digits():
    assert format_decimal(0.2137) == "0.213700"
    assert format_decimal(1.0) == "1.000000"
    assert format_decimal(12.5) == "12.500000"


def test_rounding_is_half_even():
    assert format_decimal(0.0000005) == "0.000000"
    assert format_decimal(0.0000015) == "0.000002"
    assert format_decimal(-0.0000001) == "0.000000"


def test_non_finite_values_are_refused():
    with pytest.raises(InputError):
        format_decimal(float("nan"))


def test_quantize_passes_absent_through():
    assert quantize(None) is None
    assert quantize(0.12345678) == 0.123457


# ========== JSON ==========

def test_json_writes_null_for_absent_metrics():
    text = report_to_json(_report())
    assert '"R-Ghost": null' in text
    assert '"P-LPIPS": 0.213700' in text
    assert '"P-LPIPS": [0.213700, null]' in text
    data = json.loads(text)
    assert data["cases"][1]["status"] == "error"
    assert data["aggregates"]["ObjMC"] is None


def test_json_carries_category_aggregates():
    data = json.loads(report_to_json(_report()))
    assert data["category_aggregates"]["camera-only"]["P-LPIPS"] == 0.2137
    assert data["category_aggregates"]["camera+object"]["P-LPIPS"] is None
    assert data["category_counts"]["camera-only"]["P-LPIPS"] == 1
    assert data["category_counts"]["camera+object"]["P-LPIPS"] == 0


def test_json_round_trip_is_byte_identical(tmp_path):
    path = tmp_path / "report.json"
    text = emit_report(_report(), "json", path)
    assert path.read_text() == text
    assert report_to_json(load_report(path)) == text


def test_load_report_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InputError):
        load_report(path)


# ========== CSV ==========

def test_csv_has_aggregate_row_last():
    lines = report_to_csv(_report()).splitlines()
    header = lines[0].split(",")
    assert header[:3] == ["case_id", "category", "status"]
    assert header[3:] == [m.value for m in ALL_METRICS]
    assert lines[1].startswith("x,camera-only,ok,0.213700,,")
    assert lines[2].startswith("y,,error,")
    assert lines[-1].startswith("aggregate,,,0.213700,")
    assert len(lines) == 4


def test_unknown_format():
    with pytest.raises(InputError):
        emit_report(_report(), "xml")
