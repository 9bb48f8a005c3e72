"""Simulation traces, ROA estimation, and benchmark reports."""
import numpy as np
import pytest

from rampc.controller import config_from_problem
from rampc.report import make_manifest, trace_csv_text
from rampc.simulator import (
    benchmark,
    benchmark_kernels,
    estimate_roa,
    simulate_closed_loop,
    simulate_rollout,
)
from rampc.system import load_problem_dict, sample_realization

from conftest import scalar_problem_dict


@pytest.fixture(scope="module")
def quiet_scalar():
    """Scalar problem with a tiny disturbance (effectively nominal)."""
    prob = load_problem_dict(scalar_problem_dict(w=1e-9, x=2.0, u=2.0, N=2))
    cfg = config_from_problem(prob, hull_samples=10)
    return prob, cfg


def test_origin_stays_at_origin(quiet_scalar):
    prob, cfg = quiet_scalar
    real = sample_realization(prob.system, 10, seed=0)
    tr = simulate_closed_loop(prob.system, cfg, [0.0], 10, real)
    assert tr.clean
    np.testing.assert_allclose(tr.states, 0.0, atol=1e-7)
    np.testing.assert_allclose(tr.inputs, 0.0, atol=1e-7)


def test_infeasible_x0_flagged_not_raised(default_problem, default_cfg, default_controller):
    real = sample_realization(default_problem.system, 5, seed=1)
    tr = simulate_closed_loop(
        default_problem.system, default_cfg, [50.0, 50.0], 5, real, controller=default_controller
    )
    assert tr.infeasible_at == 0
    assert tr.completed == 0
    assert not tr.clean


def test_replay_is_bitwise(default_problem, default_cfg, default_controller):
    real = sample_realization(default_problem.system, 15, seed=2)
    a = simulate_closed_loop(
        default_problem.system, default_cfg, [5.0, -4.0], 15, real, controller=default_controller
    )
    b = simulate_closed_loop(
        default_problem.system, default_cfg, [5.0, -4.0], 15, real, controller=default_controller
    )
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.w_tilde, b.w_tilde)


def test_trace_dynamics_replay_exact(default_problem, default_cfg, default_controller):
    real = sample_realization(default_problem.system, 10, seed=3)
    tr = simulate_closed_loop(
        default_problem.system, default_cfg, [4.0, 1.0], 10, real, controller=default_controller
    )
    A = real.A_true(default_problem.system)
    B = real.B_true(default_problem.system)
    for t in range(tr.completed):
        np.testing.assert_array_equal(
            tr.states[t + 1], A @ tr.states[t] + B @ tr.inputs[t] + real.w_sequence[t]
        )
        # margins consistent with the constraint evaluation
        rec = tr.records[t]
        assert rec.margin_x == pytest.approx(
            float(np.min(default_problem.system.X.h - default_problem.system.X.H @ tr.states[t]))
        )


def test_no_false_violation_alarms(default_problem, default_cfg, default_controller):
    for seed in range(3):
        real = sample_realization(default_problem.system, 30, seed=seed)
        tr = simulate_closed_loop(
            default_problem.system, default_cfg, [6.0, -6.0], 30, real, controller=default_controller
        )
        assert tr.clean and tr.iss_violations == 0


def test_rollout_safe_and_reconstructs(default_problem, default_cfg, default_controller):
    real = sample_realization(default_problem.system, 20, seed=5)
    tr = simulate_rollout(
        default_problem.system, default_cfg, [5.0, -5.0], 20, real, controller=default_controller
    )
    assert tr.infeasible_at is None
    assert tr.violations == 0
    assert tr.completed == 20


def test_roa_all_feasible_when_quiet(quiet_scalar):
    prob, cfg = quiet_scalar
    est = estimate_roa(prob.system, cfg, 7)
    assert est.hull is None  # d = 1: mask only
    assert est.n_feasible == len(est.grid)


def test_roa_2d_hull(default_problem, default_cfg):
    est = estimate_roa(default_problem.system, default_cfg, 4)
    assert est.grid.shape[1] == 2
    assert est.hull is not None and est.area > 0


def test_roa_parallel_matches_serial(quiet_scalar):
    prob, cfg = quiet_scalar
    serial = estimate_roa(prob.system, cfg, 6, jobs=1)
    parallel = estimate_roa(prob.system, cfg, 6, jobs=2)
    np.testing.assert_array_equal(serial.feasible_mask, parallel.feasible_mask)


def test_benchmark_schema(default_problem, default_cfg):
    rep = benchmark(default_problem.system, default_cfg, [1, 2], reps=3)
    assert [r["N_t"] for r in rep["rows"]] == [1, 2]
    for row in rep["rows"]:
        assert row["median_s"] > 0 and np.isfinite(row["mean_s"])
    assert "kernel" in rep


def test_benchmark_kernels(default_problem, default_cfg):
    rep = benchmark_kernels(default_problem.system, default_cfg, reps=2)
    assert "numpy" in rep
    if "cython" in rep:
        assert rep["speedup_cython_vs_numpy"] > 0


def test_roa_refuses_numerical_failures(quiet_scalar, monkeypatch):
    from rampc.errors import SolverNumericalError
    from rampc.qpsolver import SolveOutcome, SolveStatus
    from rampc.qpsolver.admm import ParametricQP

    prob, cfg = quiet_scalar
    monkeypatch.setattr(
        ParametricQP, "solve",
        lambda self, q, h, b_eq=None: SolveOutcome(status=SolveStatus.NUMERICAL_FAILURE),
    )
    with pytest.raises(SolverNumericalError):
        estimate_roa(prob.system, cfg, 3)


def test_csv_bytes_deterministic(default_problem, default_cfg, default_controller, tmp_path):
    real = sample_realization(default_problem.system, 8, seed=6)
    tr1 = simulate_closed_loop(
        default_problem.system, default_cfg, [3.0, 3.0], 8, real, controller=default_controller
    )
    tr2 = simulate_closed_loop(
        default_problem.system, default_cfg, [3.0, 3.0], 8, real, controller=default_controller
    )
    man = make_manifest("simulate", "problem.json", 6, {"k": 1}, {"steps": 8})
    assert trace_csv_text(tr1, man) == trace_csv_text(tr2, man)
    # wall-clock column only on request
    assert "solve_time" not in trace_csv_text(tr1, man)
    assert "solve_time" in trace_csv_text(tr1, man, with_times=True)
