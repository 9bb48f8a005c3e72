"""Convex solve layer: LPs via HiGHS, QPs via the ADMM kernel.

Every geometry LP and every MPC subproblem in the package routes through
this layer.  The hot ADMM iteration loop has a compiled (Cython) kernel and
a numpy fallback; the compiled one is selected automatically at import when
available (see ``active_kernel``/``set_kernel``).
"""
from .admm import (
    ADMMSettings,
    ParametricQP,
    active_kernel,
    available_kernels,
    set_kernel,
    solve_qp,
)
from .lp import farkas_certificate, feasible_point, solve_lp, verify_farkas
from .types import QuadraticProgram, SolveOutcome, SolveStatus

__all__ = [
    "ADMMSettings",
    "ParametricQP",
    "QuadraticProgram",
    "SolveOutcome",
    "SolveStatus",
    "active_kernel",
    "available_kernels",
    "farkas_certificate",
    "feasible_point",
    "set_kernel",
    "solve_lp",
    "solve_qp",
    "verify_farkas",
]
