import json

from cli import EXIT_CASE_ERROR, EXIT_CONFIG_ERROR, EXIT_OK, main

PROXY_SIZE = ["--frames", "3", "--width", "48", "--height", "32"]


def _proxy(tmp_path, kind="reveal", *extra):
    out = tmp_path / "cases"
    code = main(["gen-proxy", "--kind", kind, "--seed", "3", *PROXY_SIZE, "--out", str(out), *extra])
    return code, out


def test_gen_proxy_then_eval(tmp_path):
    code, out = _proxy(tmp_path)
    assert code == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == [
        "synthetic-reveal_withhold-clean", "synthetic-reveal_withhold-ghost_copy",
    ]
    report_path = tmp_path / "report.json"
    assert main(["eval", "--cases", str(out), "--out", str(report_path), "--workers", "2"]) == EXIT_OK
    report = json.loads(report_path.read_text())
    ghost = {c["case_id"]: c["report"]["values"]["R-Ghost"] for c in report["cases"]}
    assert ghost["synthetic-reveal_withhold-ghost_copy"] == 1.0
    assert ghost["synthetic-reveal_withhold-clean"] < 1.0
    assert report["counts"]["R-Ghost"] == 2


def test_eval_csv_to_stdout(tmp_path, capsys):
    _, out = _proxy(tmp_path, "expand", "--margin", "6")
    assert main(["eval", "--cases", str(out), "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("case_id,category,status,")
    assert lines[-1].startswith("aggregate,")


def test_broken_case_exits_with_case_error(tmp_path):
    _, out = _proxy(tmp_path, "reconstruct")
    (out / "broken" / "generated").mkdir(parents=True)
    assert main(["eval", "--cases", str(out), "--out", str(tmp_path / "r.json")]) == EXIT_CASE_ERROR
    assert (tmp_path / "r.json").exists()


def test_invalid_config_exits_with_config_error(tmp_path):
    _, out = _proxy(tmp_path, "reconstruct")
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"sigma": -1}))
    assert main(["eval", "--cases", str(out), "--config", str(config)]) == EXIT_CONFIG_ERROR


def test_missing_config_file_is_a_config_error(tmp_path):
    _, out = _proxy(tmp_path, "reconstruct")
    assert main(["eval", "--cases", str(out), "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG_ERROR


def test_oversized_margin_is_a_config_error(tmp_path):
    code, _ = _proxy(tmp_path, "expand", "--margin", "20")
    assert code == EXIT_CONFIG_ERROR


def test_check_case(tmp_path, capsys):
    _, out = _proxy(tmp_path, "reconstruct")
    case = out / "synthetic-reconstruct-oracle"
    assert main(["check-case", str(case)]) == EXIT_OK
    assert "3 frames at 48x32" in capsys.readouterr().out
    assert main(["check-case", str(tmp_path / "missing")]) == EXIT_CASE_ERROR


def test_validate_writes_summary(tmp_path):
    pairs = tmp_path / "pairs.csv"
    pairs.write_text(
        "pair_id,metric,m_A,m_B,votes_A,votes_B\n"
        "1,R-Ghost,0.1,0.3,8,2\n"
        "2,R-Ghost,0.5,0.2,6,4\n"
        "3,R-Ghost,0.2,0.6,9,1\n"
    )
    out = tmp_path / "validation.json"
    assert main(["validate", "--pairs", str(pairs), "--out", str(out)]) == EXIT_OK
    summary = json.loads(out.read_text())
    assert summary["average"]["metric"] == "Average"
    assert summary["rows"][0]["pairs"] == 3


def test_build_controls_writes_fields_and_masks(tmp_path):
    edit = tmp_path / "edit.json"
    edit.write_text(json.dumps([{"op": "remove_instance", "instance_id": 1}]))
    out = tmp_path / "controls"
    assert main(["build-controls", "--edit", str(edit), "--out", str(out)]) == EXIT_OK
    assert len(list((out / "rgb").glob("*.png"))) == 4
    assert len(list((out / "masks" / "reveal").glob("*.png"))) == 4
    assert (out / "confidence" / "00000.png").exists()
