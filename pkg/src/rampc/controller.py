"""Adaptive-horizon robust MPC controller.

Constraint robustification is split by horizon length:

* horizon 1 solves the robust problem exactly, enumerating the vertex pairs
  of the two model-error hulls (the worst case of an affine expression over
  a product of hulls sits at a vertex pair) and tightening by the exact
  disturbance support;
* horizons >= 2 lump the model error into the net-additive ball
  ||w||_inf <= wtilde_max and tighten every stacked state/input row by the
  dual-norm term  wtilde_max * ||(C M + G)' f||_1, encoded exactly through
  per-entry absolute-value variables.

At every step one QP per horizon 1..N is solved and the cheapest feasible
one wins (ties go to the shortest horizon).  Terminal ingredients: a robust
positive invariant terminal set computed with the exact vertex uncertainty,
and a terminal cost from the closed-loop Lyapunov series, which makes the
descent inequality hold with equality globally.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllHorizonsInfeasibleError,
    ConvergenceError,
    EmptyTerminalSetError,
    HistoryLengthMismatchError,
    LyapunovDivergenceError,
    VertexUnstableError,
)
from .geometry import Polytope, max_robust_invariant, support
from .prediction import FeedbackGainStack, build_stacked, policy_input
from .qpsolver import ADMMSettings, ParametricQP, QuadraticProgram, SolveStatus
from .system import NetAdditiveBound, UncertainSystem, net_additive_bound

_EQ19_TOL = 1e-8


# ---------------------------------------------------------------------------
# terminal components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TerminalComponents:
    K: np.ndarray
    X_N: Polytope
    P_N: np.ndarray
    vertex_spectral_radii: tuple = ()
    hull_screen_max_radius: float = float("nan")
    hull_screen_samples: int = 0


def spectral_radius(A):
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def lyapunov_series(A_cl, S, tol=1e-14, max_doublings=200):
    """Sum_{k>=0} (A')^k S A^k by doubling; solves P = S + A'PA."""
    P = S.copy()
    Ak = A_cl.copy()
    norm0 = max(float(np.abs(S).max()), 1e-30)
    for _ in range(max_doublings):
        term = Ak.T @ P @ Ak
        incr = float(np.abs(term).max())
        P = P + term
        Ak = Ak @ Ak
        if not np.isfinite(incr) or incr > 1e12 * norm0:
            raise LyapunovDivergenceError("terminal-cost series diverged")
        if incr <= tol * float(np.abs(P).max()):
            return 0.5 * (P + P.T)
    raise LyapunovDivergenceError("terminal-cost series did not converge")


def synthesize_terminal(
    sys: UncertainSystem, K, P, R, *, hull_samples=1000, seed=0, max_iter=500
) -> TerminalComponents:
    """Stability screens, maximal robust invariant terminal set, terminal cost.

    The vertex screen is exact; hull-interior stability is only sampled
    (certifying it needs machinery that is out of scope here), so failures
    of either screen raise loudly.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    cl = sys.vertex_closed_loops(K)
    radii = []
    for idx, A in enumerate(cl):
        j, k = divmod(idx, sys.n_b)
        rho = spectral_radius(A)
        radii.append(rho)
        if rho >= 1.0 - 1e-9:
            raise VertexUnstableError(
                "closed loop unstable at vertex pair (dA[%d], dB[%d]): "
                "spectral radius %.6f" % (j, k, rho),
                vertex_pair=(j, k),
            )
    rng = np.random.default_rng(seed)
    hull_max = 0.0
    for _ in range(hull_samples):
        wA = rng.dirichlet(np.ones(sys.n_a))
        wB = rng.dirichlet(np.ones(sys.n_b))
        dA = sum(w * V for w, V in zip(wA, sys.deltaA_vertices))
        dB = sum(w * V for w, V in zip(wB, sys.deltaB_vertices))
        rho = spectral_radius((sys.A_bar + dA) + (sys.B_bar + dB) @ K)
        hull_max = max(hull_max, rho)
        if rho >= 1.0:
            raise VertexUnstableError(
                "closed loop unstable at a sampled hull point (spectral radius %.6f); "
                "vertex stability does not certify the hull" % rho
            )
    constraint = Polytope(
        np.vstack([sys.X.H, sys.U.H @ K]), np.concatenate([sys.X.h, sys.U.h])
    )
    X_N = max_robust_invariant(constraint, cl, sys.W, max_iter=max_iter)
    if X_N.is_empty():
        raise EmptyTerminalSetError(
            "maximal robust invariant set inside the constraints is empty"
        )
    A_cl = sys.A_bar + sys.B_bar @ K
    S = P + K.T @ R @ K
    P_N = lyapunov_series(A_cl, S)
    resid = np.linalg.eigvalsh(-P_N + S + A_cl.T @ P_N @ A_cl).max()
    if resid > _EQ19_TOL:
        raise LyapunovDivergenceError(
            "terminal-cost descent residual %.2e exceeds %.0e" % (resid, _EQ19_TOL)
        )
    _recheck_invariance(X_N, cl, sys.W)
    return TerminalComponents(
        K=K,
        X_N=X_N,
        P_N=P_N,
        vertex_spectral_radii=tuple(radii),
        hull_screen_max_radius=hull_max,
        hull_screen_samples=hull_samples,
    )


def _recheck_invariance(X_N, cl_vertices, W, tol=1e-7):
    for A in cl_vertices:
        for row, off in zip(X_N.H, X_N.h):
            worst = support(X_N, A.T @ row) + support(W, row)
            if worst > off + tol:
                raise ConvergenceError(
                    "terminal set fails its invariance recheck (violation %.2e)"
                    % (worst - off)
                )


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MPCConfig:
    P: np.ndarray
    R: np.ndarray
    N: int
    terminal: TerminalComponents
    bound: NetAdditiveBound

    def __post_init__(self):
        for name in ("P", "R"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if np.linalg.eigvalsh(0.5 * (M + M.T)).min() <= 0:
                raise ValueError("%s must be positive definite" % name)
            object.__setattr__(self, name, M)
        if self.N < 1:
            raise ValueError("N must be >= 1")


def config_from_problem(prob, *, hull_samples=1000, seed=0) -> MPCConfig:
    terminal = synthesize_terminal(
        prob.system, prob.K, prob.P, prob.R, hull_samples=hull_samples, seed=seed
    )
    return MPCConfig(
        P=prob.P,
        R=prob.R,
        N=prob.N,
        terminal=terminal,
        bound=net_additive_bound(prob.system),
    )


# ---------------------------------------------------------------------------
# QP templates
# ---------------------------------------------------------------------------


class Case1Template:
    """Exact robust one-step problem: vertex-pair enumeration + W support."""

    def __init__(self, sys: UncertainSystem, terminal: TerminalComponents, P, R):
        d, m = sys.d, sys.m
        H_N, h_N = terminal.X_N.H, terminal.X_N.h
        w_sup = np.array([support(sys.W, row) for row in H_N])
        g_blocks = []
        rhs_maps = []  # rhs = h_base - map @ x_t
        h_base = []
        for dA in sys.deltaA_vertices:
            for dB in sys.deltaB_vertices:
                g_blocks.append(H_N @ (sys.B_bar + dB))
                rhs_maps.append(H_N @ (sys.A_bar + dA))
                h_base.append(h_N - w_sup)
        self.G = np.vstack(g_blocks + [sys.U.H])
        self._rhs_map = np.vstack(rhs_maps + [np.zeros((sys.U.n_rows, d))])
        self._h_base = np.concatenate(h_base + [sys.U.h])
        P_N = terminal.P_N
        self.Q = 2.0 * (R + sys.B_bar.T @ P_N @ sys.B_bar)
        self._q_map = 2.0 * sys.B_bar.T @ P_N @ sys.A_bar
        self._const_map = P + sys.A_bar.T @ P_N @ sys.A_bar
        self.n_vars = m
        self.horizon = 1
        self.d, self.m = d, m

    def parts(self, x):
        q = self._q_map @ x
        h = self._h_base - self._rhs_map @ x
        return q, h

    def constant(self, x):
        return float(x @ self._const_map @ x)

    def extract(self, z):
        u = z[: self.m].reshape(1, self.m)
        return u, FeedbackGainStack.zeros(1, self.d, self.m)


class CaseNTemplate:
    """Dual-norm tightened problem over a stacked horizon.

    Decision vector z = (ubar stack, vec of strictly-lower M blocks, one
    absolute-value variable per potentially nonzero entry of (CM+G)'f per
    tightened row).  Valid for horizon >= 1; with horizon 1 there are no M
    blocks and the construction degenerates to the fully lumped one-step
    problem (used by the conservative baseline).
    """

    def __init__(self, sys, terminal_H, terminal_h, P, R, P_N, w_tilde_max, horizon):
        d, m, N = sys.d, sys.m, horizon
        sd = build_stacked(sys.A_bar, sys.B_bar, N)
        self.stacked = sd
        self.horizon = N
        self.d, self.m = d, m
        self.w_tilde_max = float(w_tilde_max)

        self.n_u = m * N
        self._m_index = {}
        base = self.n_u
        for k in range(1, N):
            for l in range(k):
                self._m_index[(k, l)] = base
                base += m * d
        self.n_m = base - self.n_u

        # gather tightened rows: phi (input coeffs), g (constant part of
        # (CM+G)'f), the aux support size, the base offset and the x_t map
        tight = []
        Hx, hx = sys.X.H, sys.X.h
        for k in range(1, N + 1):
            Hmat, hvec = (Hx, hx) if k < N else (terminal_H, terminal_h)
            Cblk = sd.C[(k - 1) * d : k * d]
            Gblk = sd.G[(k - 1) * d : k * d]
            Ablk = sd.A_stack[(k - 1) * d : k * d]
            for i in range(Hmat.shape[0]):
                phi = Hmat[i] @ Cblk
                g = Hmat[i] @ Gblk
                tight.append(
                    dict(phi=phi, g=g, supp=k * d, h0=hvec[i], rhs_map=Hmat[i] @ Ablk)
                )
        Hu, hu = sys.U.H, sys.U.h
        for k in range(N):
            for i in range(Hu.shape[0]):
                phi = np.zeros(m * N)
                phi[k * m : (k + 1) * m] = Hu[i]
                g = np.zeros(d * N)
                tight.append(
                    dict(phi=phi, g=g, supp=k * d, h0=hu[i], rhs_map=np.zeros(d))
                )

        n_aux = sum(row["supp"] for row in tight)
        self.n_vars = self.n_u + self.n_m + n_aux
        n_main = len(tight)
        n_rows = n_main + 2 * n_aux
        G = np.zeros((n_rows, self.n_vars))
        h_base = np.zeros(n_rows)
        rhs_map = np.zeros((n_rows, d))
        aux_base = self.n_u + self.n_m
        r = 0
        for row in tight:
            phi, g, supp = row["phi"], row["g"], row["supp"]
            # main row: phi'u + w_tilde_max * sum(a) <= h0 - rhs_map @ x
            G[r, : self.n_u] = phi
            G[r, aux_base : aux_base + supp] = self.w_tilde_max
            h_base[r] = row["h0"]
            rhs_map[r] = row["rhs_map"]
            r += 1
            # abs rows: +-(M'phi + g)_t - a_t <= -+ g_t
            for t in range(supp):
                l, j = divmod(t, d)
                a_col = aux_base + t
                rp, rm = r, r + 1
                for k in range(l + 1, N):
                    mi = self._m_index.get((k, l))
                    if mi is None:
                        continue
                    for i2 in range(m):
                        coeff = phi[k * m + i2]
                        if coeff != 0.0:
                            col = mi + i2 * d + j
                            G[rp, col] = coeff
                            G[rm, col] = -coeff
                G[rp, a_col] = -1.0
                G[rm, a_col] = -1.0
                h_base[rp] = -g[t]
                h_base[rm] = g[t]
                r += 2
            aux_base += supp
        assert r == n_rows and aux_base == self.n_vars
        self.G = G
        self._h_base = h_base
        self._rhs_map = rhs_map
        self.n_main = n_main
        self._tight = tight

        # cost: quadratic in the nominal input stack only
        P_bar = np.zeros((d * N, d * N))
        for k in range(1, N):
            P_bar[(k - 1) * d : k * d, (k - 1) * d : k * d] = P
        P_bar[(N - 1) * d :, (N - 1) * d :] = P_N
        R_bar = np.kron(np.eye(N), R)
        Qu = 2.0 * (sd.C.T @ P_bar @ sd.C + R_bar)
        self.Q = np.zeros((self.n_vars, self.n_vars))
        self.Q[: self.n_u, : self.n_u] = Qu
        self._q_map = 2.0 * sd.C.T @ P_bar @ sd.A_stack
        self._const_map = P + sd.A_stack.T @ P_bar @ sd.A_stack

    def parts(self, x):
        q = np.zeros(self.n_vars)
        q[: self.n_u] = self._q_map @ x
        h = self._h_base - self._rhs_map @ x
        return q, h

    def constant(self, x):
        return float(x @ self._const_map @ x)

    def extract(self, z):
        u = z[: self.n_u].reshape(self.horizon, self.m)
        M = np.zeros((self.m * self.horizon, self.d * self.horizon))
        for (k, l), base in self._m_index.items():
            blk = z[base : base + self.m * self.d].reshape(self.m, self.d)
            M[k * self.m : (k + 1) * self.m, l * self.d : (l + 1) * self.d] = blk
        return u, FeedbackGainStack(self.horizon, self.d, self.m, M)

    def tightened_row_values(self, u_stack, M: FeedbackGainStack, x):
        """Worst-case LHS of every tightened row at a fixed policy.

        Evaluates  f'(A_stack x + C u) + w_tilde_max * ||(CM+G)'f||_1  (state
        rows) and the input analog; used by tests against sampling oracles.
        """
        u = np.asarray(u_stack, dtype=float).reshape(-1)
        vals = np.empty(self.n_main)
        for r, row in enumerate(self._tight):
            phi, g = row["phi"], row["g"]
            v = M.M.T @ phi + g  # equals (CM+G)'f for state rows, M'f for inputs
            vals[r] = float(phi @ u + row["rhs_map"] @ x + self.w_tilde_max * np.abs(v).sum())
        return vals, np.array([row["h0"] for row in self._tight])


def build_case1(sys: UncertainSystem, terminal: TerminalComponents, x_t, *, P=None, R=None):
    """Exact one-step robust QP at the measured state (as a QuadraticProgram)."""
    P = np.eye(sys.d) if P is None else P
    R = np.eye(sys.m) if R is None else R
    tpl = Case1Template(sys, terminal, np.atleast_2d(P), np.atleast_2d(R))
    x = np.asarray(x_t, dtype=float).reshape(-1)
    q, h = tpl.parts(x)
    return QuadraticProgram(Q=tpl.Q, q=q, G_ineq=tpl.G, h_ineq=h)


def build_caseN(
    sys: UncertainSystem,
    terminal: TerminalComponents,
    bound: NetAdditiveBound,
    x_t,
    N_t: int,
    *,
    P=None,
    R=None,
):
    """Dual-norm tightened horizon-N_t QP at the measured state."""
    if N_t < 2:
        raise ValueError("build_caseN needs N_t >= 2; horizon 1 is the exact case")
    P = np.eye(sys.d) if P is None else P
    R = np.eye(sys.m) if R is None else R
    tpl = CaseNTemplate(
        sys,
        terminal.X_N.H,
        terminal.X_N.h,
        np.atleast_2d(P),
        np.atleast_2d(R),
        terminal.P_N,
        bound.w_tilde_max,
        N_t,
    )
    x = np.asarray(x_t, dtype=float).reshape(-1)
    q, h = tpl.parts(x)
    return QuadraticProgram(Q=tpl.Q, q=q, G_ineq=tpl.G, h_ineq=h)


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass
class HorizonResult:
    N_t: int
    status: SolveStatus
    cost: float | None
    solve_time: float
    farkas: dict | None = None


@dataclass
class MPCSolution:
    status: SolveStatus
    N_star: int | None
    u_bar_star: np.ndarray | None
    M_star: FeedbackGainStack | None
    J_star: float | None
    per_horizon: list = field(default_factory=list)
    x_t: np.ndarray | None = None
    x_bar_next: np.ndarray | None = None  # nominal successor under the plan
    margin_x: float = float("nan")  # min slack of x_t in the state constraints
    margin_u: float = float("nan")  # min slack of the applied input

    @property
    def is_feasible(self):
        return self.status is SolveStatus.OPTIMAL

    @property
    def applied_input(self):
        return None if self.u_bar_star is None else self.u_bar_star[0]

    def report(self, tag="proposed"):
        return {
            "controller": tag,
            "status": str(self.status),
            "chosen_horizon": self.N_star,
            "optimal_cost": self.J_star,
            "applied_input": None
            if self.u_bar_star is None
            else self.applied_input.tolist(),
            "constraint_margins": {"state": self.margin_x, "input": self.margin_u},
            "per_horizon": [
                {
                    "N_t": r.N_t,
                    "status": str(r.status),
                    "cost": r.cost,
                    "solve_time": r.solve_time,
                }
                for r in self.per_horizon
            ],
        }


class AdaptiveController:
    """Prepared bank of horizon problems with cached factorizations."""

    def __init__(self, sys: UncertainSystem, cfg: MPCConfig, settings: ADMMSettings | None = None):
        self.sys = sys
        self.cfg = cfg
        t = cfg.terminal
        self.templates = {1: Case1Template(sys, t, cfg.P, cfg.R)}
        for n in range(2, cfg.N + 1):
            self.templates[n] = CaseNTemplate(
                sys, t.X_N.H, t.X_N.h, cfg.P, cfg.R, t.P_N, cfg.bound.w_tilde_max, n
            )
        self.solvers = {
            n: ParametricQP(tpl.Q, tpl.G, settings=settings)
            for n, tpl in self.templates.items()
        }

    def solve(self, x_t) -> MPCSolution:
        x = np.asarray(x_t, dtype=float).reshape(-1)
        per = []
        best = None
        failed = False
        for n in range(1, self.cfg.N + 1):
            tpl = self.templates[n]
            t0 = time.perf_counter()
            q, h = tpl.parts(x)
            out = self.solvers[n].solve(q, h)
            elapsed = time.perf_counter() - t0
            if out.status is SolveStatus.OPTIMAL:
                J = out.objective + tpl.constant(x)
                per.append(HorizonResult(n, out.status, J, elapsed))
                if best is None or J < best[1]:
                    best = (n, J, out)
            else:
                failed = failed or out.status is not SolveStatus.INFEASIBLE
                per.append(
                    HorizonResult(n, out.status, None, elapsed, farkas=out.farkas)
                )
        if best is None:
            # a numerical failure must stay distinguishable from semantic
            # infeasibility (it would otherwise silently shrink ROA masks)
            status = SolveStatus.NUMERICAL_FAILURE if failed else SolveStatus.INFEASIBLE
            return MPCSolution(
                status=status,
                N_star=None,
                u_bar_star=None,
                M_star=None,
                J_star=None,
                per_horizon=per,
                x_t=x,
            )
        n, J, out = best
        tpl = self.templates[n]
        u, M = tpl.extract(out.x_opt)
        x_next = self.sys.A_bar @ x + self.sys.B_bar @ u[0]
        return MPCSolution(
            status=SolveStatus.OPTIMAL,
            N_star=n,
            u_bar_star=u,
            M_star=M,
            J_star=J,
            per_horizon=per,
            x_t=x,
            x_bar_next=x_next,
            margin_x=float(np.min(self.sys.X.h - self.sys.X.H @ x)),
            margin_u=float(np.min(self.sys.U.h - self.sys.U.H @ u[0])),
        )

    def step(self, x_t):
        sol = self.solve(x_t)
        if not sol.is_feasible:
            raise AllHorizonsInfeasibleError(
                "all %d horizon problems infeasible at x=%s" % (self.cfg.N, x_t),
                per_horizon=sol.per_horizon,
            )
        return sol.applied_input, sol


# module-level cache so the free-function entry points stay cheap in loops
_controller_cache: dict = {}


def _controller_for(sys, cfg) -> AdaptiveController:
    key = (id(sys), id(cfg))
    ctl = _controller_cache.get(key)
    if ctl is None or ctl.sys is not sys or ctl.cfg is not cfg:
        ctl = AdaptiveController(sys, cfg)
        _controller_cache[key] = ctl
    return ctl


def adaptive_solve(sys: UncertainSystem, cfg: MPCConfig, x_t) -> MPCSolution:
    """Solve the horizon bank at x_t and select per the minimum-cost rule.

    Infeasibility of every horizon is a data outcome (status INFEASIBLE with
    per-horizon certificates attached), not an exception; ``mpc_step`` is the
    boundary that raises.
    """
    return _controller_for(sys, cfg).solve(x_t)


def mpc_step(sys: UncertainSystem, cfg: MPCConfig, x_t):
    """Applied input (first nominal input of the winning horizon) + solution."""
    return _controller_for(sys, cfg).step(x_t)


# ---------------------------------------------------------------------------
# candidate tail cost (the ISS certificate quantity)
# ---------------------------------------------------------------------------


def candidate_tail_cost(cfg: MPCConfig, sys: UncertainSystem, sol: MPCSolution, w_tilde):
    """Cost of the shifted/terminal candidate policy from the perturbed
    nominal successor; the optimal cost at the next step can never exceed it.

    With N*=1 the candidate is the terminal feedback and the tail cost is
    x'P_N x (the Lyapunov series makes the descent identity exact); with
    N*>=2 it is the cost of replaying the remaining plan, whose only nonzero
    disturbance argument is the realized net-additive residual.
    """
    if not sol.is_feasible:
        raise ValueError("candidate tail cost needs a feasible solution")
    w = np.asarray(w_tilde, dtype=float).reshape(-1)
    x = sol.x_bar_next + w
    if sol.N_star == 1:
        return float(x @ cfg.terminal.P_N @ x)
    total = 0.0
    M = sol.M_star
    for k in range(1, sol.N_star):
        u = sol.u_bar_star[k] + M.block(k, 0) @ w
        total += float(x @ cfg.P @ x + u @ cfg.R @ u)
        x = sys.A_bar @ x + sys.B_bar @ u
    return total + float(x @ cfg.terminal.P_N @ x)


# ---------------------------------------------------------------------------
# safe roll-out policy
# ---------------------------------------------------------------------------


def rollout_policy(sys: UncertainSystem, sol_0: MPCSolution, K, states, inputs):
    """Input at time t = len(inputs) under the time-0 plan, then terminal K.

    For t below the plan horizon the time-0 policy is evaluated on the
    net-additive residuals reconstructed from the history
    (w_l = x_{l+1} - A_bar x_l - B_bar u_l); afterwards the terminal
    feedback K x takes over.
    """
    if not sol_0.is_feasible:
        raise ValueError("rollout needs a feasible time-0 solution")
    states = [np.asarray(s, dtype=float).reshape(-1) for s in states]
    inputs = [np.asarray(u, dtype=float).reshape(-1) for u in inputs]
    t = len(inputs)
    if len(states) != t + 1:
        raise HistoryLengthMismatchError(
            "need %d states for %d inputs, got %d" % (t + 1, t, len(states))
        )
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if t >= sol_0.N_star:
        return K @ states[t]
    w_hist = [
        states[l + 1] - sys.A_bar @ states[l] - sys.B_bar @ inputs[l] for l in range(t)
    ]
    return policy_input(sol_0.M_star, sol_0.u_bar_star, w_hist)
