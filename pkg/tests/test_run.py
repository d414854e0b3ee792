import json
import sys

import numpy as np
import pytest

from asymlab.config import ExperimentConfig, OperatorConfig, RunBlock, parse_config
from asymlab.errors import ConfigValidationError
from asymlab.report import (EXIT_ASSERTION, EXIT_OK, EXIT_OPERATIONAL, BlockResult, RunLedger, emit_report,
                            exit_code, to_json)
from asymlab.run import run_experiment

STAMP = "2026-01-01T00:00:00"

OPERATORS = """
operators:
  mg:
    kind: minimalGraph
  lap:
    kind: pLaplacian
    p: 2
  p3:
    kind: pLaplacian
    p: 3
"""


def _run(text, out_dir, **kwargs):
    config = parse_config(OPERATORS + text, defaults={})
    return run_experiment(config, out_dir=out_dir, timestamp=STAMP, **kwargs)


def _report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


CLASSIFY = """
runs:
  - kind: classify
    operators: [mg, p3]
    expect:
      mg: RemovableType
      p3: SingularType
    exponent_range: [0.9, 1.1]
"""


def test_classify_block(out_dir):
    assert _run(CLASSIFY, out_dir) == EXIT_OK
    report = _report(out_dir)
    block = report["blocks"][0]
    assert block["passed"]
    assert [c["name"] for c in block["checks"]] == ["mg.class", "p3.class", "mg.exponent"]
    assert block["data"]["p3"]["exponent"] == "nan"
    lines = (out_dir / "00-classify" / "classify.csv").read_text().splitlines()
    assert lines[0] == "operator,class,k0,exponent"
    assert lines[1].startswith("mg,RemovableType,")
    assert "PASS" in (out_dir / "summary.md").read_text()


def test_report_is_deterministic(tmp_path):
    _run(CLASSIFY, tmp_path / "a")
    _run(CLASSIFY, tmp_path / "b")
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_failed_expectation(out_dir):
    text = "runs:\n  - kind: classify\n    operators: [mg]\n    expect:\n      mg: SingularType\n"
    assert _run(text, out_dir) == EXIT_ASSERTION
    report = _report(out_dir)
    assert report["exit_code"] == EXIT_ASSERTION
    assert not report["passed"]
    assert "FAIL" in (out_dir / "summary.md").read_text()


def test_scherk_barrier_block(out_dir):
    text = """
runs:
  - kind: barriers
    name: scherk-mg
    operator: mg
    family: scherk
    n_nodes: 1024
    check_at:
      - {d: 1.0, value: 0.77194, tol: 1e-5}
"""
    assert _run(text, out_dir) == EXIT_OK
    block = _report(out_dir)["blocks"][0]
    assert [c["name"] for c in block["checks"]] == ["value@1", "ode_residual"]
    assert block["artifacts"] == ["scherk-mg/profile.csv", "scherk-mg/profile.json"]
    assert (out_dir / "scherk-mg" / "profile.csv").read_text().splitlines()[0] == "r,value"


def test_annulus_barrier_block(out_dir):
    text = "runs:\n  - kind: barriers\n    operator: mg\n    family: annulus\n    K: 2.0\n    check_ode: false\n"
    assert _run(text, out_dir) == EXIT_OK
    block = _report(out_dir)["blocks"][0]
    assert block["checks"][0]["name"] == "annulus.chain"
    assert 0.0 < block["data"]["barrier"]["alpha"] < 1.0


def test_library_error_marks_the_block_incomplete(out_dir):
    text = "runs:\n  - kind: barriers\n    operator: lap\n    family: scherk\n  - kind: classify\n    operators: [mg]\n"
    assert _run(text, out_dir) == EXIT_OPERATIONAL
    report = _report(out_dir)
    assert report["incomplete"]
    first, second = report["blocks"]
    assert first["incomplete"]
    assert first["error"].startswith("NotRemovableType")
    assert second["passed"]
    assert "INCOMPLETE" in (out_dir / "summary.md").read_text()


def test_scherk_residual_block(out_dir):
    text = """
runs:
  - kind: residuals
    operator: mg
    family: scherk
    n_nodes: 1024
    count: 32
"""
    assert _run(text, out_dir) == EXIT_OK
    block = _report(out_dir)["blocks"][0]
    assert len(block["checks"]) == 3
    assert (out_dir / "00-residuals" / "residuals_h2.csv").read_text().startswith("x0,x1,residual")


def test_singular_residual_block_checks_the_order(out_dir):
    text = """
runs:
  - kind: residuals
    operator: lap
    family: singular
    d_range: [-3.0, 3.0]
    n_nodes: 4096
    count: 16
    h: 2e-2
"""
    assert _run(text, out_dir) == EXIT_OK
    checks = _report(out_dir)["blocks"][0]["checks"]
    assert checks[-1]["name"] == "convergence_order"
    assert checks[-1]["value"] >= 1.9


def test_radial_bvp_block(out_dir):
    text = "runs:\n  - kind: radial-bvp\n    operator: lap\n    oracle: annulus\n    K: 3.0\n"
    assert _run(text, out_dir) == EXIT_OK
    block = _report(out_dir)["blocks"][0]
    assert [c["name"] for c in block["checks"]] == ["solver_residual", "oracle_error"]
    assert block["data"]["flux_constant"] > 0


def test_disk_solve_block(out_dir):
    text = """
runs:
  - kind: disk-solve
    operator: mg
    R: 3.0
    n_r: 24
    n_theta: 64
    data: {kind: spike, plateau: 1.0}
"""
    assert _run(text, out_dir) == EXIT_OK
    block = _report(out_dir)["blocks"][0]
    assert [c["name"] for c in block["checks"]] == ["solver_residual", "max_principle"]
    rows = (out_dir / "00-disk-solve" / "solution.csv").read_text().splitlines()
    assert rows[0] == "r,theta,value"
    assert len(rows) == 1 + 25 * 64


def test_zero_plateau_probe_block(out_dir):
    text = """
runs:
  - kind: removability-probe
    operator: mg
    plateau: 0.0
    R_sequence: [2.0, 3.0]
    grid: {n_theta: 16, radial_density: 6}
"""
    assert _run(text, out_dir) == EXIT_OK
    block = _report(out_dir)["blocks"][0]
    assert block["data"]["sups"] == [0.0, 0.0]
    probe = json.loads((out_dir / "00-removability-probe" / "probe.json").read_text())
    assert [row["R"] for row in probe] == [2.0, 3.0]


def test_trace_block_checks_every_radius(out_dir):
    text = """
runs:
  - kind: removability-probe
    operator: lap
    mode: trace
    R_sequence: [2.0, 3.0]
    grid: {n_theta: 32, radial_density: 8}
"""
    assert _run(text, out_dir) == EXIT_OK
    checks = {c["name"]: c for c in _report(out_dir)["blocks"][0]["checks"]}
    assert checks["oracle_error"]["tolerance"] == 5e-3
    assert checks["oracle_error"]["value"] <= 5e-3


def test_spike_width_rule_is_passed_on(out_dir):
    text = """
runs:
  - kind: removability-probe
    operator: lap
    width_rule: inverse
    R_sequence: [2.0, 4.0]
    cauchy_tol: 1.0
    grid: {n_theta: 32, radial_density: 6}
"""
    assert _run(text, out_dir) == EXIT_OK
    entries = json.loads((out_dir / "00-removability-probe" / "probe.json").read_text())
    assert [e["width"] for e in entries] == pytest.approx([1.0, 0.5])
    text = text.replace("width_rule: inverse", "width_rule: linear")
    with pytest.raises(ConfigValidationError) as e:
        parse_config(OPERATORS + text, defaults={})
    assert any("`width_rule` must be one of horoball, inverse" in p for p in e.value.problems)


def test_unsettled_spike_sups_fail_the_block(out_dir):
    text = """
runs:
  - kind: removability-probe
    operator: mg
    R_sequence: [1.5, 2.5]
    annulus: [0.25, 0.75]
    grid: {n_theta: 32, radial_density: 8}
"""
    assert _run(text, out_dir) == EXIT_ASSERTION
    checks = {c["name"]: c for c in _report(out_dir)["blocks"][0]["checks"]}
    assert not checks["cauchy_increment"]["passed"]
    assert checks["cauchy_increment"]["detail"] == "not stabilized"
    assert checks["converged"]["passed"]


def test_unusable_parameters_mark_the_block_incomplete(out_dir):
    # blocks built in code skip the config validation
    config = ExperimentConfig(runs=(RunBlock("radial-bvp", {"operator": "lap", "r0": 1.0}),
                                    RunBlock("classify", {"operators": ["mg"]})),
                              operators={"lap": OperatorConfig("lap", "pLaplacian", {"p": 2}),
                                         "mg": OperatorConfig("mg", "minimalGraph")})
    assert run_experiment(config, out_dir=out_dir, timestamp=STAMP) == EXIT_OPERATIONAL
    first, second = _report(out_dir)["blocks"]
    assert first["incomplete"]
    assert first["error"].startswith("InvalidParams: KeyError")
    assert second["passed"]


def test_parallel_blocks(out_dir):
    text = "runs:\n  - kind: classify\n    operators: [mg]\n  - kind: classify\n    operators: [p3]\n"
    assert _run(text, out_dir, parallel=True) == EXIT_OK
    assert [b["index"] for b in _report(out_dir)["blocks"]] == [0, 1]


def test_ledger_records_runs(out_dir):
    _run(CLASSIFY, out_dir, config_path="classify.yaml")
    entries = RunLedger().entries()
    assert len(entries) == 1
    assert entries[0]["config"] == "classify.yaml"
    assert entries[0]["status"] == "pass"
    assert entries[0]["exit_code"] == 0


def test_empty_report(out_dir):
    report = emit_report([], out_dir, timestamp=STAMP)
    assert report["exit_code"] == EXIT_OK
    assert report["blocks"] == []
    assert (out_dir / "summary.md").exists()


def test_exit_code_precedence():
    ok = BlockResult(0, "classify")
    failed = BlockResult(1, "barriers")
    failed.check("x", 1.0, 0.5, False)
    broken = BlockResult(2, "disk-solve", incomplete=True)
    assert exit_code([ok]) == EXIT_OK
    assert exit_code([ok, failed]) == EXIT_ASSERTION
    assert exit_code([failed, broken]) == EXIT_OPERATIONAL
    assert failed.label == "01-barriers"


def test_json_formatting():
    text = to_json({"a": 0.1, "b": float("inf"), "c": [1, np.float64(2.5)], "d": np.nan, "e": (True, None)})
    assert text == ('{\n  "a": 0.10000000000000001,\n  "b": "inf",\n  "c": [\n    1,\n    2.5\n  ],\n'
                    '  "d": "nan",\n  "e": [\n    true,\n    null\n  ]\n}')
    assert to_json(-np.inf) == '"-inf"'
    assert to_json({}) == "{}"


def test_cli_classify(monkeypatch, tmp_path):
    from asymlab.main import cli
    monkeypatch.setattr(sys, "argv", ["asymlab", "classify", "--operator", "minimalGraph",
                                      "--out", str(tmp_path / "cli")])
    with pytest.raises(SystemExit) as e:
        cli()
    assert e.value.code == 0
    assert (tmp_path / "cli" / "report.json").exists()


def test_cli_rejects_a_bad_operator(monkeypatch, tmp_path):
    from asymlab.main import cli
    monkeypatch.setattr(sys, "argv", ["asymlab", "classify", "--operator", "pLaplacian", "--p", "0.5",
                                      "--out", str(tmp_path / "cli")])
    with pytest.raises(SystemExit) as e:
        cli()
    assert e.value.code == 1


def test_cli_missing_config(monkeypatch, tmp_path):
    from asymlab.main import cli
    monkeypatch.setattr(sys, "argv", ["asymlab", "run", str(tmp_path / "missing.yaml")])
    with pytest.raises(SystemExit) as e:
        cli()
    assert e.value.code == 1
