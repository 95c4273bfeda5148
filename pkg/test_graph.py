import numpy as np
import pytest

from cases import write_case
from conftest import make_case, make_masks
from control_metrics import TrajectorySet
from errors import ConfigError
from graph import aggregate, aggregate_by_category, case_graph, evaluate_case, evaluate_corpus
from models import CaseMeta, Category, EvalConfig
from report import quantize, report_to_json

SHAPE = (16, 24)


def _frames(rng, count=3):
    return rng.integers(0, 256, size=(count, *SHAPE, 3)) / 255.0


def _reveal():
    mask = np.zeros(SHAPE, dtype=bool)
    mask[4:10, 6:14] = True
    return mask


@pytest.fixture
def corpus(tmp_path, rng):
    """Three cases: two with a reveal region, one with only preserve pixels.

    Case "a" is camera+object, the other two are camera-only.
    """
    root = tmp_path / "corpus"
    reveal_masks = make_masks(SHAPE, reveal=_reveal())
    a = make_case(_frames(rng), preserve_ref=_frames(rng), ghost_ref=_frames(rng), masks=reveal_masks, case_id="a")
    a.trajectories = TrajectorySet(objects_gt={"o": np.zeros((3, 3))}, objects_gen={"k": np.ones((3, 3))})
    a.meta = CaseMeta(case_id="a", category=Category.CAMERA_OBJECT)
    b = make_case(_frames(rng), preserve_ref=_frames(rng), case_id="b")
    c = make_case(_frames(rng), preserve_ref=_frames(rng), ghost_ref=_frames(rng), masks=reveal_masks, case_id="c")
    for case in (c, a, b):
        write_case(case, root / case.case_id)
    return root


def _paths(root):
    return sorted(p for p in root.iterdir() if p.is_dir())


def test_graph_has_expected_nodes():
    assert {"load", "regions", "controls"} <= set(case_graph.get_graph().nodes)


def test_evaluate_case_fills_region_and_control_metrics(corpus, config):
    result = evaluate_case(corpus / "a", config)
    assert result.status == "ok"
    assert result.case_id == "a"
    assert result.category.value == "camera+object"
    values = result.report.values
    assert 0.0 < values["R-Ghost"] < 1.0
    assert values["ObjMC"] == quantize(np.sqrt(3.0))
    assert values["Cam-RotErr"] is None
    assert values["E-Copy"] is None
    assert len(result.report.traces["R-Ghost"]) == 3


def test_corpus_counts_skip_absent_metrics(corpus, config):
    report = evaluate_corpus(_paths(corpus), config)
    assert [c.case_id for c in report.cases] == ["a", "b", "c"]
    assert report.counts["R-Ghost"] == 2
    assert report.counts["P-LPIPS"] == 3
    assert report.counts["ObjMC"] == 1
    assert report.counts["E-Copy"] == 0
    assert report.aggregates["E-Copy"] is None
    ghosts = [c.report.values["R-Ghost"] for c in report.cases if c.report.values["R-Ghost"] is not None]
    assert report.aggregates["R-Ghost"] == quantize(float(np.mean(ghosts)))
    assert report.backends == {"perceptual": "reference-perceptual", "structure": "reference-dists"}
    assert "workers" not in report.config


def test_worker_count_does_not_change_the_report(corpus):
    single = report_to_json(evaluate_corpus(_paths(corpus), EvalConfig(workers=1)))
    parallel = report_to_json(evaluate_corpus(_paths(corpus), EvalConfig(workers=4)))
    assert single == parallel


def test_failing_case_is_recorded_and_skipped(corpus, config):
    broken = corpus / "broken"
    (broken / "generated").mkdir(parents=True)
    report = evaluate_corpus(_paths(corpus), config)
    assert [c.case_id for c in report.failed] == ["broken"]
    assert "generated" in report.failed[0].error
    assert report.counts["P-LPIPS"] == 3


def test_aggregate_ignores_failed_cases(corpus, config):
    results = [evaluate_case(p, config) for p in _paths(corpus)]
    results.append(evaluate_case(corpus / "missing", config))
    aggregates, counts = aggregate(results)
    assert results[-1].status == "error"
    assert counts["P-LPIPS"] == 3


def test_empty_corpus_is_a_config_error():
    with pytest.raises(ConfigError):
        evaluate_corpus([])


def test_category_aggregates_split_the_corpus(corpus, config):
    report = evaluate_corpus(_paths(corpus), config)
    by_cat, counts = report.category_aggregates, report.category_counts
    assert set(by_cat) == {"camera-only", "camera+object"}
    assert counts["camera+object"]["P-LPIPS"] == 1
    assert counts["camera-only"]["P-LPIPS"] == 2
    assert counts["camera+object"]["ObjMC"] == 1
    assert counts["camera-only"]["ObjMC"] == 0
    assert by_cat["camera-only"]["ObjMC"] is None
    assert counts["camera-only"]["R-Ghost"] == 1
    a = next(c for c in report.cases if c.case_id == "a")
    assert by_cat["camera+object"]["R-Ghost"] == a.report.values["R-Ghost"]


def test_category_aggregates_skip_failed_cases(corpus, config):
    results = [evaluate_case(p, config) for p in _paths(corpus)]
    results.append(evaluate_case(corpus / "missing", config))
    _, counts = aggregate_by_category(results)
    assert sum(c["P-LPIPS"] for c in counts.values()) == 3
