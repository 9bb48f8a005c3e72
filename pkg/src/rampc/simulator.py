"""Closed-loop simulation, ROA estimation by grid feasibility, benchmarks.

Failures are data here: an infeasible step or a constraint violation flags
the trace and stops it, it never raises.  Each simulated step also records
the certificate quantity of the stability argument (the optimal cost at the
next state may not exceed the shifted-candidate tail cost), so Monte-Carlo
runs double as theorem monitors.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baseline import BaselineConfig, BaselineController
from .controller import (
    AdaptiveController,
    MPCConfig,
    MPCSolution,
    candidate_tail_cost,
    rollout_policy,
)
from .errors import SolverNumericalError
from .geometry import PointCloudHull2D, hull_2d
from .qpsolver import SolveStatus, active_kernel, available_kernels, set_kernel
from .system import UncertainSystem, UncertaintyRealization

MARGIN_TOL = 1e-6


@dataclass
class StepRecord:
    t: int
    N_star: int | None
    J_star: float | None
    solve_time: float
    margin_x: float
    margin_u: float
    iss_gap: float  # candidate tail cost minus realized optimal cost (>= -tol)
    feasible: bool


@dataclass
class SimulationTrace:
    x0: np.ndarray
    steps_requested: int
    states: np.ndarray = None
    inputs: np.ndarray = None
    w_tilde: np.ndarray = None
    records: list = field(default_factory=list)
    infeasible_at: int | None = None
    numerical_failure_at: int | None = None
    violations: int = 0
    iss_violations: int = 0
    final_margin_x: float = float("nan")
    completed: int = 0

    @property
    def clean(self):
        return self.infeasible_at is None and self.violations == 0


def _min_margin(P, v):
    return float(np.min(P.h - P.H @ v))


def simulate_closed_loop(
    sys: UncertainSystem,
    cfg: MPCConfig,
    x0,
    steps: int,
    realization: UncertaintyRealization,
    *,
    controller: AdaptiveController | None = None,
    margin_tol: float = MARGIN_TOL,
) -> SimulationTrace:
    """Run the adaptive controller against one admissible realization.

    The true dynamics replay  x+ = A_true x + B_true u + w_t  exactly and the
    recorded net-additive residual is  x+ - A_bar x - B_bar u.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if realization.w_sequence.shape[0] < steps:
        raise ValueError("realization too short for %d steps" % steps)
    ctl = controller if controller is not None else AdaptiveController(sys, cfg)
    A_true = realization.A_true(sys)
    B_true = realization.B_true(sys)
    d, m = sys.d, sys.m
    states = np.empty((steps + 1, d))
    inputs = np.empty((steps, m))
    w_tilde = np.empty((steps, d))
    states[0] = x0
    trace = SimulationTrace(x0=x0, steps_requested=steps)
    prev_sol: MPCSolution | None = None
    prev_w: np.ndarray | None = None
    x = x0
    for t in range(steps):
        t0 = time.perf_counter()
        sol = ctl.solve(x)
        elapsed = time.perf_counter() - t0
        margin_x = _min_margin(sys.X, x)
        if not sol.is_feasible:
            if sol.status is SolveStatus.NUMERICAL_FAILURE:
                trace.numerical_failure_at = t
            else:
                trace.infeasible_at = t
            trace.records.append(
                StepRecord(t, None, None, elapsed, margin_x, float("nan"), float("nan"), False)
            )
            break
        iss_gap = float("nan")
        if prev_sol is not None:
            bound_val = candidate_tail_cost(cfg, sys, prev_sol, prev_w)
            iss_gap = bound_val - sol.J_star
            if sol.J_star > bound_val + MARGIN_TOL * (1.0 + abs(sol.J_star)):
                trace.iss_violations += 1
        u = sol.applied_input
        margin_u = _min_margin(sys.U, u)
        if margin_x < -margin_tol or margin_u < -margin_tol:
            trace.violations += 1
        w_t = realization.w_sequence[t]
        x_next = A_true @ x + B_true @ u + w_t
        wt = x_next - sys.A_bar @ x - sys.B_bar @ u
        inputs[t] = u
        w_tilde[t] = wt
        states[t + 1] = x_next
        trace.records.append(
            StepRecord(t, sol.N_star, sol.J_star, elapsed, margin_x, margin_u, iss_gap, True)
        )
        prev_sol, prev_w = sol, wt
        x = x_next
        trace.completed = t + 1
    n = trace.completed
    trace.states = states[: n + 1]
    trace.inputs = inputs[:n]
    trace.w_tilde = w_tilde[:n]
    trace.final_margin_x = _min_margin(sys.X, trace.states[-1])
    if trace.final_margin_x < -margin_tol:
        trace.violations += 1
    return trace


def simulate_rollout(
    sys: UncertainSystem,
    cfg: MPCConfig,
    x0,
    steps: int,
    realization: UncertaintyRealization,
    *,
    controller: AdaptiveController | None = None,
    margin_tol: float = MARGIN_TOL,
) -> SimulationTrace:
    """Run the time-0 plan open-loop (then terminal feedback), no re-solving."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    ctl = controller if controller is not None else AdaptiveController(sys, cfg)
    t0 = time.perf_counter()
    sol0 = ctl.solve(x0)
    elapsed0 = time.perf_counter() - t0
    trace = SimulationTrace(x0=x0, steps_requested=steps)
    if not sol0.is_feasible:
        if sol0.status is SolveStatus.NUMERICAL_FAILURE:
            trace.numerical_failure_at = 0
        else:
            trace.infeasible_at = 0
        trace.records.append(
            StepRecord(0, None, None, elapsed0, _min_margin(sys.X, x0), float("nan"), float("nan"), False)
        )
        trace.states = x0[None, :]
        trace.inputs = np.zeros((0, sys.m))
        trace.w_tilde = np.zeros((0, sys.d))
        trace.final_margin_x = _min_margin(sys.X, x0)
        return trace
    A_true = realization.A_true(sys)
    B_true = realization.B_true(sys)
    states = [x0]
    inputs = []
    w_tilde = []
    for t in range(steps):
        u = rollout_policy(sys, sol0, cfg.terminal.K, states, inputs)
        x = states[-1]
        margin_x = _min_margin(sys.X, x)
        margin_u = _min_margin(sys.U, u)
        if margin_x < -margin_tol or margin_u < -margin_tol:
            trace.violations += 1
        x_next = A_true @ x + B_true @ u + realization.w_sequence[t]
        w_tilde.append(x_next - sys.A_bar @ x - sys.B_bar @ u)
        states.append(x_next)
        inputs.append(u)
        trace.records.append(
            StepRecord(
                t,
                sol0.N_star,
                sol0.J_star if t == 0 else None,
                elapsed0 if t == 0 else 0.0,
                margin_x,
                margin_u,
                float("nan"),
                True,
            )
        )
        trace.completed = t + 1
    trace.states = np.asarray(states)
    trace.inputs = np.asarray(inputs).reshape(-1, sys.m)
    trace.w_tilde = np.asarray(w_tilde).reshape(-1, sys.d)
    trace.final_margin_x = _min_margin(sys.X, trace.states[-1])
    if trace.final_margin_x < -margin_tol:
        trace.violations += 1
    return trace


# ---------------------------------------------------------------------------
# region of attraction by grid sampling
# ---------------------------------------------------------------------------


@dataclass
class ROAEstimate:
    grid: np.ndarray  # (n_pts, d) grid points inside X
    feasible_mask: np.ndarray  # (n_pts,) bool
    hull: PointCloudHull2D | None
    area: float
    grid_n: int

    @property
    def n_feasible(self):
        return int(self.feasible_mask.sum())


def _grid_points(X, grid_n):
    lo, hi = X.bounding_box()
    axes = [np.linspace(lo[j], hi[j], grid_n) for j in range(X.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.array([X.contains(p) for p in pts])
    return pts[keep]


def _classify(sol):
    if sol.status is SolveStatus.NUMERICAL_FAILURE:
        raise SolverNumericalError(
            "solver failed at grid point %s; refusing to count it as infeasible" % sol.x_t
        )
    return bool(sol.is_feasible)


def _roa_chunk_proposed(args):
    sys, cfg, pts = args
    ctl = AdaptiveController(sys, cfg)
    return [_classify(ctl.solve(p)) for p in pts]


def _roa_chunk_baseline(args):
    sys, cfg, pts = args
    ctl = BaselineController(sys, cfg)
    return [_classify(ctl.solve(p)) for p in pts]


def _estimate(sys, cfg, grid_n, worker, jobs):
    pts = _grid_points(sys.X, grid_n)
    if jobs and jobs > 1 and len(pts) > 1:
        chunks = np.array_split(np.arange(len(pts)), min(jobs, len(pts)))
        payload = [(sys, cfg, pts[idx]) for idx in chunks if len(idx)]
        mask = np.zeros(len(pts), dtype=bool)
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for idx, res in zip([c for c in chunks if len(c)], ex.map(worker, payload)):
                mask[idx] = res
    else:
        mask = np.array(worker((sys, cfg, pts)), dtype=bool)
    hull = None
    area = 0.0
    if sys.d == 2 and mask.any():
        hull = hull_2d(pts[mask])
        area = hull.area
    return ROAEstimate(grid=pts, feasible_mask=mask, hull=hull, area=area, grid_n=grid_n)


def estimate_roa(sys: UncertainSystem, cfg: MPCConfig, grid_n: int, *, jobs: int = 1) -> ROAEstimate:
    """Grid feasibility sampling of the adaptive controller over X."""
    return _estimate(sys, cfg, grid_n, _roa_chunk_proposed, jobs)


def estimate_roa_baseline(
    sys: UncertainSystem, cfg: BaselineConfig, grid_n: int, *, jobs: int = 1
) -> ROAEstimate:
    """Same protocol for the lumped baseline controller."""
    return _estimate(sys, cfg, grid_n, _roa_chunk_baseline, jobs)


# ---------------------------------------------------------------------------
# timing benchmark
# ---------------------------------------------------------------------------

# desk-scale reference magnitudes for a comparable 2-d setup, for context only
REFERENCE_TIMES_S = {1: 0.0026, 2: 0.0023, 3: 0.0038, 4: 0.0056, 5: 0.0078}


def benchmark(sys: UncertainSystem, cfg: MPCConfig, horizons, reps: int, x0=None) -> dict:
    """Per-horizon online times (template-cached build + solve), warm cache.

    Timing covers exactly the per-step online work of the controller:
    assembling the state-dependent QP data and solving it.  Problem-file
    parsing and template/factorization preparation are excluded (one-time,
    reported separately).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    horizons = sorted(set(int(n) for n in horizons))
    if any(n < 1 or n > cfg.N for n in horizons):
        raise ValueError("horizons must lie in 1..N")
    x = np.zeros(sys.d) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    t_prep0 = time.perf_counter()
    ctl = AdaptiveController(sys, cfg)
    prep_time = time.perf_counter() - t_prep0
    rows = []
    for n in horizons:
        tpl = ctl.templates[n]
        solver = ctl.solvers[n]
        times = []
        statuses = {}
        for _ in range(reps):
            t0 = time.perf_counter()
            q, h = tpl.parts(x)
            out = solver.solve(q, h)
            times.append(time.perf_counter() - t0)
            statuses[str(out.status)] = statuses.get(str(out.status), 0) + 1
        times = np.asarray(times)
        rows.append(
            {
                "N_t": n,
                "mean_s": float(times.mean()),
                "median_s": float(np.median(times)),
                "min_s": float(times.min()),
                "max_s": float(times.max()),
                "reps": reps,
                "statuses": statuses,
                "n_variables": tpl.n_vars,
                "n_constraints": tpl.G.shape[0],
                "reference_time_s": REFERENCE_TIMES_S.get(n),
            }
        )
    return {
        "timing_includes": "QP data assembly + solve (per-step online work)",
        "timing_excludes": "problem parsing, template and factorization preparation",
        "preparation_time_s": prep_time,
        "x0": x.tolist(),
        "kernel": active_kernel(),
        "rows": rows,
    }


def benchmark_kernels(sys: UncertainSystem, cfg: MPCConfig, reps: int = 20, x0=None) -> dict:
    """Compare the compiled and numpy ADMM kernels on the horizon bank."""
    x = np.zeros(sys.d) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    current = active_kernel()
    results = {}
    try:
        for kernel in available_kernels():
            set_kernel(kernel)
            ctl = AdaptiveController(sys, cfg)
            times = []
            for _ in range(reps):
                t0 = time.perf_counter()
                ctl.solve(x)
                times.append(time.perf_counter() - t0)
            results[kernel] = {
                "median_solve_s": float(np.median(times)),
                "mean_solve_s": float(np.mean(times)),
                "reps": reps,
            }
    finally:
        set_kernel(current)
    if "cython" in results and "numpy" in results:
        results["speedup_cython_vs_numpy"] = (
            results["numpy"]["median_solve_s"] / results["cython"]["median_solve_s"]
        )
    return results
