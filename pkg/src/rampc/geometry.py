"""H-representation polytope algebra backed by linear programming.

Everything here works on sets of the form {x : Hx <= h}: constraint sets,
disturbance supports and invariant sets.  Robustification only ever needs
support functions, so no vertex enumeration is required (a small 2-d
enumerator exists for plotting and polygon metrics).  Inclusion and
fixed-point tests use an absolute tolerance of 1e-7 on facet offsets, one
order above the LP layer's 1e-8 accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    EmptyPolytopeError,
    UnboundedDirectionError,
)
from .qpsolver import SolveStatus, solve_lp

FACET_TOL = 1e-7


class Polytope:
    """Immutable convex set {x : Hx <= h}.

    ``H`` has one row per facet normal, ``h`` the matching offsets.  If the
    set was constructed from axis-aligned bounds, the bounds are kept and
    support queries take an exact fast path instead of an LP.
    """

    def __init__(self, H, h, *, box=None):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        h = np.asarray(h, dtype=float).reshape(-1)
        if H.shape[0] != h.shape[0]:
            raise DimensionMismatchError(
                "H has %d rows but h has %d entries" % (H.shape[0], h.shape[0])
            )
        self._H = np.ascontiguousarray(H)
        self._h = np.ascontiguousarray(h)
        self._H.setflags(write=False)
        self._h.setflags(write=False)
        self._box = None
        if box is not None:
            lo, hi = (np.asarray(v, dtype=float).reshape(-1) for v in box)
            self._box = (lo, hi)

    @classmethod
    def from_box(cls, lo, hi):
        """Axis-aligned box {lo <= x <= hi} expanded to H-form."""
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatchError("box bounds have different lengths")
        if np.any(lo > hi):
            raise ValueError("box has lo > hi")
        d = lo.shape[0]
        H = np.vstack([np.eye(d), -np.eye(d)])
        h = np.concatenate([hi, -lo])
        return cls(H, h, box=(lo, hi))

    @classmethod
    def empty(cls, dim):
        """Canonical empty marker in R^dim ({0'x <= -1})."""
        return cls(np.zeros((1, dim)), np.array([-1.0]))

    @property
    def H(self):
        return self._H

    @property
    def h(self):
        return self._h

    @property
    def dim(self):
        return self._H.shape[1]

    @property
    def n_rows(self):
        return self._H.shape[0]

    @property
    def is_box(self):
        return self._box is not None

    @property
    def box_bounds(self):
        return self._box

    def __repr__(self):
        return "Polytope(dim=%d, facets=%d)" % (self.dim, self.n_rows)

    @cached_property
    def _empty_flag(self):
        out = solve_lp(np.zeros(self.dim), self._H, self._h)
        if out.status is SolveStatus.INFEASIBLE:
            return True
        if out.status in (SolveStatus.OPTIMAL, SolveStatus.UNBOUNDED):
            return False
        raise EmptyPolytopeError("feasibility probe failed: %s" % out.status)

    def is_empty(self):
        if self._box is not None:
            return False
        return self._empty_flag

    def contains(self, x, tol=FACET_TOL):
        x = np.asarray(x, dtype=float).reshape(-1)
        return bool(np.all(self._H @ x <= self._h + tol))

    def box_corners(self):
        """Corners of the bounding box (exact vertices when the set is a box)."""
        lo, hi = self.bounding_box()
        d = self.dim
        corners = np.empty((2**d, d))
        for i in range(2**d):
            for j in range(d):
                corners[i, j] = hi[j] if (i >> j) & 1 else lo[j]
        return corners

    def bounding_box(self):
        if self._box is not None:
            return self._box
        d = self.dim
        lo = np.empty(d)
        hi = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            hi[j] = support(self, e)
            lo[j] = -support(self, -e)
        return lo, hi

    def to_dict(self):
        if self._box is not None:
            lo, hi = self._box
            return {"box": {"lo": lo.tolist(), "hi": hi.tolist()}}
        return {"H": self._H.tolist(), "h": self._h.tolist()}

    @classmethod
    def from_dict(cls, spec):
        if "box" in spec:
            return cls.from_box(spec["box"]["lo"], spec["box"]["hi"])
        return cls(spec["H"], spec["h"])


@dataclass(frozen=True)
class PointCloudHull2D:
    """Convex hull of a 2-d point cloud with its shoelace area."""

    points: np.ndarray
    hull: np.ndarray  # counter-clockwise vertices
    area: float


def support(P: Polytope, c) -> float:
    """max_{x in P} c.x  (exact for boxes, by LP otherwise)."""
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape[0] != P.dim:
        raise DimensionMismatchError("direction has dim %d, polytope %d" % (c.shape[0], P.dim))
    if P.is_box:
        lo, hi = P.box_bounds
        return float(np.sum(np.where(c >= 0, c * hi, c * lo)))
    out = solve_lp(-c, P.H, P.h)
    if out.status is SolveStatus.OPTIMAL:
        return -out.objective
    if out.status is SolveStatus.INFEASIBLE:
        raise EmptyPolytopeError("support of an empty polytope")
    if out.status is SolveStatus.UNBOUNDED:
        raise UnboundedDirectionError("polytope unbounded in direction %s" % c)
    raise EmptyPolytopeError("support LP failed: %s" % out.status)


def is_subset(P: Polytope, Q: Polytope, tol=FACET_TOL) -> bool:
    """True iff P is contained in Q (per-facet support test)."""
    if P.dim != Q.dim:
        raise DimensionMismatchError("dim %d vs %d" % (P.dim, Q.dim))
    for row, off in zip(Q.H, Q.h):
        if support(P, row) > off + tol:
            return False
    return True


def remove_redundant(P: Polytope) -> Polytope:
    """Minimal representation of the same set; survivor order preserved.

    A row is redundant iff maximizing it subject to all other (surviving)
    rows cannot exceed its own offset.  The LP is capped at offset+1 so it
    is never unbounded in the objective.
    """
    if P.is_empty():
        raise EmptyPolytopeError("remove_redundant on an empty polytope")
    H, h = P.H.copy(), P.h.copy()
    keep = np.ones(len(h), dtype=bool)
    for i in range(len(h)):
        keep[i] = False
        rows = H[keep]
        offs = h[keep]
        keep[i] = True
        if len(offs) == 0:
            continue  # last remaining row always stays
        G = np.vstack([rows, H[i]])
        g = np.concatenate([offs, [h[i] + 1.0]])
        out = solve_lp(-H[i], G, g)
        if out.status is SolveStatus.OPTIMAL and -out.objective <= h[i] + FACET_TOL:
            keep[i] = False
    return Polytope(H[keep], h[keep])


def pre_set(S: Polytope, Acl_vertices, W: Polytope, X: Polytope) -> Polytope:
    """One-step robust predecessor of S under x+ = A x + w, intersected with X.

    ``Acl_vertices`` are the closed-loop vertex matrices; the result is
    {x in X : H_S (A_m x) <= h_S - sup_{w in W} H_S w  for every vertex m},
    with redundant rows removed.  May legitimately be empty; emptiness is
    returned as an empty marker, not raised.
    """
    w_sup = np.array([support(W, row) for row in S.H])
    blocks = [S.H @ A for A in Acl_vertices]
    H = np.vstack(blocks + [X.H])
    h = np.concatenate([S.h - w_sup] * len(blocks) + [X.h])
    cand = Polytope(H, h)
    if cand.is_empty():
        return Polytope.empty(S.dim)
    return remove_redundant(cand)


def max_robust_invariant(
    X_and_input: Polytope, Acl_vertices, W: Polytope, max_iter=500
) -> Polytope:
    """Maximal robust positive invariant subset of ``X_and_input``.

    Iterates Omega <- pre_set(Omega, ...) /\\ Omega from the constraint set
    (a shrinking outer sequence) and stops when consecutive iterates are
    mutually included within FACET_TOL.  Returns the empty marker when the
    invariant set is empty.
    """
    if X_and_input.is_empty():
        return Polytope.empty(X_and_input.dim)
    omega = remove_redundant(X_and_input)
    for _ in range(max_iter):
        nxt = pre_set(omega, Acl_vertices, W, omega)
        if nxt.is_empty():
            return Polytope.empty(X_and_input.dim)
        # nxt is contained in omega by construction; converged iff the
        # reverse inclusion also holds.
        if is_subset(omega, nxt):
            return nxt
        omega = nxt
    raise ConvergenceError("invariant-set iteration did not converge in %d steps" % max_iter)


def hull_2d(points) -> PointCloudHull2D:
    """Convex hull of 2-d points (monotone chain), CCW, with shoelace area.

    Collinear/degenerate input yields the degenerate hull and area 0.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) <= 2:
        hull = np.asarray(uniq, dtype=float).reshape(-1, 2)
        return PointCloudHull2D(points=pts, hull=hull, area=0.0)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(uniq):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    verts = np.asarray(lower[:-1] + upper[:-1], dtype=float)
    area = shoelace_area(verts)
    return PointCloudHull2D(points=pts, hull=verts, area=area)


def shoelace_area(verts) -> float:
    verts = np.asarray(verts, dtype=float).reshape(-1, 2)
    if len(verts) < 3:
        return 0.0
    x, y = verts[:, 0], verts[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def vertices_2d(P: Polytope, tol=1e-9) -> np.ndarray:
    """Vertices of a bounded 2-d polytope, ordered counter-clockwise.

    Small helper for plots and polygon metrics only; higher dimensions are
    out of scope by design.
    """
    if P.dim != 2:
        raise DimensionMismatchError("vertex enumeration implemented for dim 2 only")
    if P.is_empty():
        return np.zeros((0, 2))
    H, h = P.H, P.h
    n = len(h)
    pts = []
    scale = np.maximum(np.linalg.norm(H, axis=1), 1e-12)
    for i in range(n):
        for j in range(i + 1, n):
            M = np.array([H[i], H[j]])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, np.array([h[i], h[j]]))
            if np.all(H @ v <= h + tol * np.maximum(1.0, np.abs(h)) + FACET_TOL * scale):
                pts.append(v)
    if not pts:
        return np.zeros((0, 2))
    pts = np.asarray(pts)
    # dedupe
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    kept = [pts[0]]
    for p in pts[1:]:
        if np.max(np.abs(p - kept[-1])) > 1e-8:
            kept.append(p)
    pts = np.asarray(kept)
    centroid = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
    return pts[np.argsort(ang)]
