"""Exception hierarchy for the toolkit."""


class RampcError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(RampcError):
    """Operands have incompatible dimensions."""


class EmptyPolytopeError(RampcError):
    """An operation required a nonempty polytope."""


class UnboundedDirectionError(RampcError):
    """A support function / LP is unbounded in the requested direction."""


class ConvergenceError(RampcError):
    """An iterative computation hit its iteration cap before converging."""


class UnboundedConstraintSetError(RampcError):
    """A constraint set that must be compact is unbounded."""


class HistoryLengthMismatchError(RampcError):
    """A disturbance/state history has the wrong length for the query."""


class VertexUnstableError(RampcError):
    """A closed-loop vertex (or sampled hull point) has spectral radius >= 1."""

    def __init__(self, msg, vertex_pair=None):
        super().__init__(msg)
        self.vertex_pair = vertex_pair


class EmptyTerminalSetError(RampcError):
    """Terminal-set synthesis produced an empty set."""


class LyapunovDivergenceError(RampcError):
    """The terminal-cost series diverged (nominal closed loop not stable)."""


class AllHorizonsInfeasibleError(RampcError):
    """Every horizon subproblem of an MPC solve is infeasible.

    Carries the per-horizon results (with infeasibility certificates where
    available) so callers can inspect why.
    """

    def __init__(self, msg, per_horizon=()):
        super().__init__(msg)
        self.per_horizon = list(per_horizon)


class ProblemFormatError(RampcError):
    """A problem-description file failed validation.

    ``path`` names the offending field, e.g. ``"deltaA_vertices[1]"``.
    """

    def __init__(self, path, msg):
        super().__init__("%s: %s" % (path, msg))
        self.path = path


class SolverNumericalError(RampcError):
    """The QP/LP layer gave up after its bounded refinement attempts."""
