"""End-to-end CLI checks: exit codes, determinism, artifact contents."""
import json

import pytest

from rampc.cli import main

from conftest import scalar_problem_dict


@pytest.fixture()
def scalar_file(tmp_problem_file):
    return tmp_problem_file(scalar_problem_dict(w=0.1, x=2.0, u=2.0, N=2))


def test_terminal_set_report_and_svg(scalar_file, tmp_path, capsys):
    out = tmp_path / "term.json"
    svg = tmp_path / "term.svg"
    # scalar problem: svg is skipped gracefully only for d=2; use report only
    rc = main(["terminal-set", "--problem", str(scalar_file), "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["descent_residual"] <= 1e-8
    assert "terminal_set" in doc and "manifest" in doc
    assert doc["manifest"]["command"] == "terminal-set"


def test_terminal_set_svg_2d(tmp_path):
    out = tmp_path / "term.json"
    svg = tmp_path / "term.svg"
    rc = main(["terminal-set", "--problem", "default", "--out", str(out), "--svg", str(svg)])
    assert rc == 0
    text = svg.read_text()
    assert text.startswith("<?xml")
    assert "<polygon" in text
    assert "terminal set" in text


def test_simulate_deterministic_bytes(scalar_file, tmp_path):
    o1, o2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--problem", str(scalar_file), "--x0", "0.5", "--steps", "10", "--seed", "3"]
    assert main(args + ["--out", str(o1)]) == 0
    assert main(args + ["--out", str(o2)]) == 0
    assert o1.read_bytes() == o2.read_bytes()


def test_simulate_zero_state(scalar_file, tmp_path):
    out = tmp_path / "zero.csv"
    rc = main(
        ["simulate", "--problem", str(scalar_file), "--x0", "0.0", "--steps", "5",
         "--seed", "0", "--out", str(out)]
    )
    assert rc == 0
    rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    # header + 5 steps + final state row
    assert len(rows) == 7


def test_simulate_infeasible_x0_is_success(scalar_file, tmp_path):
    out = tmp_path / "inf.csv"
    rc = main(
        ["simulate", "--problem", str(scalar_file), "--x0", "1.9", "--steps", "3",
         "--seed", "0", "--out", str(out)]
    )
    assert rc == 0  # infeasibility is data, not an error
    assert out.exists()


def test_malformed_problem_exits_2(tmp_problem_file, tmp_path, capsys):
    data = scalar_problem_dict()
    data["cost"]["P"] = [[0.0]]
    path = tmp_problem_file(data)
    rc = main(["terminal-set", "--problem", str(path), "--out", str(tmp_path / "x.json")])
    assert rc == 2
    assert "cost.P" in capsys.readouterr().err


def test_unstable_gain_exits_3(tmp_problem_file, tmp_path):
    data = scalar_problem_dict(k=0.5)  # a_cl = 1.5: unstable
    path = tmp_problem_file(data)
    rc = main(["terminal-set", "--problem", str(path), "--out", str(tmp_path / "x.json")])
    assert rc == 3


def test_bad_x0_exits_2(scalar_file, tmp_path):
    rc = main(
        ["simulate", "--problem", str(scalar_file), "--x0", "1,2,3", "--steps", "2",
         "--seed", "0", "--out", str(tmp_path / "x.csv")]
    )
    assert rc == 2


def test_roa_with_baseline_and_svg(tmp_path):
    out = tmp_path / "roa.json"
    svg = tmp_path / "roa.svg"
    rc = main(
        ["roa", "--problem", "default", "--grid", "4", "--baseline",
         "--out", str(out), "--svg", str(svg)]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["grid_n"] == 4
    assert len(doc["feasible_mask"]) == doc["n_points"]
    assert "baseline" in doc
    assert doc["baseline"]["mask_contained_in_proposed"] is True
    assert svg.read_text().startswith("<?xml")


def test_rollout_cmd(scalar_file, tmp_path):
    out = tmp_path / "roll.csv"
    rc = main(
        ["rollout", "--problem", str(scalar_file), "--x0", "0.5", "--steps", "8",
         "--seed", "1", "--out", str(out)]
    )
    assert rc == 0
    rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 10


def test_numerical_failure_exits_4(scalar_file, tmp_path, monkeypatch):
    from rampc.qpsolver import SolveOutcome, SolveStatus
    from rampc.qpsolver.admm import ParametricQP

    monkeypatch.setattr(
        ParametricQP, "solve",
        lambda self, q, h, b_eq=None: SolveOutcome(status=SolveStatus.NUMERICAL_FAILURE),
    )
    rc = main(
        ["simulate", "--problem", str(scalar_file), "--x0", "0.1", "--steps", "2",
         "--seed", "0", "--out", str(tmp_path / "x.csv")]
    )
    assert rc == 4


def test_bench_cmd(scalar_file, tmp_path):
    out = tmp_path / "bench.json"
    rc = main(
        ["bench", "--problem", str(scalar_file), "--horizons", "1..2", "--reps", "3",
         "--out", str(out)]
    )
    assert rc == 0
    doc = json.loads(out.read_text())
    assert [r["N_t"] for r in doc["rows"]] == [1, 2]
    assert "kernel_comparison" in doc
