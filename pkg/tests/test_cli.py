import json
import os

import pytest

from shapecalc.cli import main
from shapecalc.instances import DISK

FAST = {
    **DISK,
    "grid_n": 65,
    "lambdas": [0.04, 0.02],
    "gates": {"kind": "monotone"},
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_bundled_names_accepted(tmp_path):
    assert main(["admissible", "--config", "disk", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "admissible.json").exists()


def test_config_file_roundtrip(tmp_path):
    cfg = _write(tmp_path, FAST)
    assert main(["admissible", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_unreadable_config(tmp_path):
    assert main(["trace", "--config", str(tmp_path / "nope.json")]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", "disk"])
    assert exc.value.code == 2


def test_nondecreasing_lambdas_rejected(tmp_path):
    cfg = _write(tmp_path, {**FAST, "lambdas": [0.1, 0.2]})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_trace_inadmissible_level_function(tmp_path):
    cfg = _write(tmp_path, {**FAST, "g": "1"})
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_missing_field_rejected(tmp_path):
    bad = {k: v for k, v in FAST.items() if k != "g"}
    cfg = _write(tmp_path, bad)
    assert main(["admissible", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_bad_expression_rejected(tmp_path):
    cfg = _write(tmp_path, {**FAST, "h": "x1 + * x2"})
    assert main(["admissible", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_kinked_level_function_rejected(tmp_path):
    cfg = _write(tmp_path, {**FAST, "g": "max(x1, x2)"})
    assert main(["admissible", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_verify_gate_failure_exits_4(tmp_path):
    cfg = _write(tmp_path, {**FAST, "gates": {"kind": "slopes", "slope_min": 50.0,
                                              "m_ratio_max": 1e-9}})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


def test_solver_failure_exits_3(tmp_path, monkeypatch):
    from shapecalc.elliptic import NonconvergenceError

    def boom(*a, **k):
        raise NonconvergenceError("forced", [1.0])

    monkeypatch.setattr("shapecalc.cli.solve_state", boom)
    cfg = _write(tmp_path, FAST)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_verify_csv_deterministic(tmp_path):
    cfg = _write(tmp_path, FAST)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "verify.csv").read_bytes()
    b = (tmp_path / "b" / "verify.csv").read_bytes()
    assert a == b
    aj = (tmp_path / "a" / "verify.json").read_bytes()
    bj = (tmp_path / "b" / "verify.json").read_bytes()
    assert aj == bj


def test_trace_csv_deterministic_and_metadata(tmp_path):
    cfg = _write(tmp_path, FAST)
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "curve_0.csv").read_text()
    b = (tmp_path / "b" / "curve_0.csv").read_text()
    assert a == b
    lines = a.splitlines()
    assert any(l.startswith("# config_sha256=") for l in lines)
    assert any(l.startswith("# tool_version=") for l in lines)
    assert any(l.startswith("# period=") for l in lines)
    assert any(l.startswith("# x0=") for l in lines)
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "t,z1,z2,grad_norm"


def test_full_pipeline_artifacts(tmp_path):
    cfg = _write(tmp_path, FAST)
    out = tmp_path / "o"
    assert main(["all", "--config", cfg, "--out", str(out)]) == 0
    for name in ("admissible.json", "curve_0.csv", "velocity_0.csv", "velocity.json",
                 "state.csv", "state_log.json", "derivative.csv", "boundary_data.csv",
                 "verify.csv", "verify.json", "objective.json", "optimality.json",
                 "optimality.csv"):
        assert (out / name).exists(), name


def test_state_csv_columns(tmp_path):
    cfg = _write(tmp_path, FAST)
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "state.csv").read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "i,j,x1,x2,value,inside"


def test_threads_flag(tmp_path):
    cfg = _write(tmp_path, FAST)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "t2"),
                 "--threads", "2"]) == 0
    a = (tmp_path / "t2" / "verify.csv").read_bytes()
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "t1")]) == 0
    assert a == (tmp_path / "t1" / "verify.csv").read_bytes()
