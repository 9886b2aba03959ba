"""Halfspace-polytope and interval-box algebra.

Boxes carry the additive-disturbance bounds and error-tube cross sections;
H-polytopes carry state/input constraint sets and terminal sets.  All
operations are pure functions of their inputs, so values can be shared
freely across threads.

Empty sets are a value, not an exception: operations that can produce an
empty set return a polytope whose ``is_empty()`` reports True.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import qp
from .errors import DimensionError, RpiIterationError, SolverError

_EMPTINESS_TOL = 1e-9
_MAX_VERTEX_COMBOS = 2_000_000


@dataclass(frozen=True)
class Box:
    """Axis-aligned interval box {x : lower <= x <= upper}."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("box bounds must be 1-D vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("box has lower > upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self):
        return 0.5 * (self.upper - self.lower)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def symmetric(cls, radius):
        r = np.atleast_1d(np.asarray(radius, dtype=float))
        if np.any(r < 0):
            raise ValueError("symmetric box needs a nonnegative radius")
        return cls(-r, r)

    def corners(self):
        """All 2^n corner points, in lexicographic sign order."""
        n = self.dim
        pts = np.empty((2 ** n, n))
        for i, signs in enumerate(itertools.product((0, 1), repeat=n)):
            pts[i] = np.where(np.asarray(signs, dtype=bool), self.upper, self.lower)
        return pts

    def contains_point(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


def support(box, direction):
    """Support function of a box: max of direction.x over the box."""
    direction = np.asarray(direction, dtype=float).ravel()
    if direction.shape[0] != box.dim:
        raise DimensionError("direction dimension does not match box")
    return float(np.sum(np.where(direction > 0, direction * box.upper,
                                 direction * box.lower)))


def affine_map_box(M, box):
    """Tightest axis-aligned box containing {Mx : x in box}."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != box.dim:
        raise DimensionError("matrix columns do not match box dimension")
    c = M @ box.center
    r = np.abs(M) @ box.radius
    return Box(c - r, c + r)


def minkowski_sum_box(a, b):
    if a.dim != b.dim:
        raise DimensionError("boxes of different dimension")
    return Box(a.lower + b.lower, a.upper + b.upper)


class HPolytope:
    """Convex set {x : H x <= g}, one row per facet."""

    def __init__(self, H, g):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        g = np.atleast_1d(np.asarray(g, dtype=float)).ravel()
        if H.shape[0] != g.shape[0]:
            raise DimensionError("row count of H must equal length of g")
        self.H = H
        self.g = g
        self._empty = None

    @property
    def dim(self):
        return self.H.shape[1]

    @property
    def nrows(self):
        return self.H.shape[0]

    @classmethod
    def from_box(cls, box):
        n = box.dim
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([box.upper, -box.lower]))

    @classmethod
    def from_bounds(cls, lower, upper):
        return cls.from_box(Box(lower, upper))

    @classmethod
    def universe(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0))

    @classmethod
    def empty_set(cls, n):
        poly = cls(np.zeros((1, n)), np.array([-1.0]))
        poly._empty = True
        return poly

    def intersect(self, other):
        if other.dim != self.dim:
            raise DimensionError("cannot intersect polytopes of different dimension")
        return HPolytope(np.vstack([self.H, other.H]),
                         np.concatenate([self.g, other.g]))

    def normalized(self):
        """Same set with unit-norm facet rows; zero rows are resolved."""
        norms = np.linalg.norm(self.H, axis=1)
        zero = norms <= 1e-14
        if np.any(zero & (self.g < 0)):
            return HPolytope.empty_set(self.dim)
        keep = ~zero
        H = self.H[keep] / norms[keep, None] if np.any(keep) \
            else np.zeros((0, self.dim))
        g = self.g[keep] / norms[keep] if np.any(keep) else np.zeros(0)
        return HPolytope(H, g)

    def is_empty(self, tol=_EMPTINESS_TOL):
        """Emptiness via a Chebyshev-radius LP; cached after first call."""
        if self._empty is not None:
            return self._empty
        poly = self.normalized()
        if poly._empty:
            self._empty = True
            return True
        if poly.nrows == 0:
            self._empty = False
            return False
        m, n = poly.nrows, poly.dim
        A = np.hstack([poly.H, np.ones((m, 1))])
        A = np.vstack([A, np.concatenate([np.zeros(n), [1.0]])])
        l = np.concatenate([np.full(m, -np.inf), [-1e9]])
        u = np.concatenate([poly.g, [1e9]])
        c = np.zeros(n + 1)
        c[-1] = -1.0
        sol = qp.solve_lp(c, A, l, u)
        if sol.status == qp.Status.PRIMAL_INFEASIBLE:
            self._empty = True
        elif sol.status == qp.Status.SOLVED:
            self._empty = bool(sol.x[-1] < -tol)
        else:
            raise SolverError(f"emptiness check failed with status {sol.status}")
        return self._empty

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, facets={self.nrows})"


def contains(poly, x, tol=0.0):
    """Membership test: H x <= g + tol componentwise."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != poly.dim:
        raise DimensionError("point dimension does not match polytope")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if poly.nrows == 0:
        return True
    return bool(np.all(poly.H @ x <= poly.g + tol))


def tighten(poly, margin):
    """Shrink each facet offset by the margin box's support in its normal.

    Exact Pontryagin difference for box margins.  The result may be empty;
    that is reported by ``is_empty()``, not raised.
    """
    if margin.dim != poly.dim:
        raise DimensionError("margin dimension does not match polytope")
    if poly.nrows == 0:
        return HPolytope.universe(poly.dim)
    offsets = np.array([support(margin, h) for h in poly.H])
    return HPolytope(poly.H.copy(), poly.g - offsets)


def support_hpoly(poly, direction):
    """Support function of an H-polytope via LP; inf when unbounded."""
    direction = np.asarray(direction, dtype=float).ravel()
    if direction.shape[0] != poly.dim:
        raise DimensionError("direction dimension does not match polytope")
    if poly.nrows == 0:
        return float("inf") if np.any(direction != 0) else 0.0
    sol = qp.solve_lp(-direction, poly.H, np.full(poly.nrows, -np.inf), poly.g)
    if sol.status == qp.Status.DUAL_INFEASIBLE:
        return float("inf")
    if sol.status != qp.Status.SOLVED:
        raise SolverError(f"support LP failed with status {sol.status}")
    return float(-sol.value)


def bounding_box(poly):
    """Axis-aligned bounding box; raises for unbounded or empty sets."""
    lo = np.empty(poly.dim)
    hi = np.empty(poly.dim)
    for i in range(poly.dim):
        e = np.zeros(poly.dim)
        e[i] = 1.0
        hi[i] = support_hpoly(poly, e)
        lo[i] = -support_hpoly(poly, -e)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("polytope is unbounded")
    return Box(np.minimum(lo, hi), np.maximum(hi, lo))


def _dedupe_rows(H, g):
    """Merge duplicate facet directions, keeping the tightest offset."""
    if H.shape[0] == 0:
        return H, g
    key = np.round(H, 10)
    order = np.lexsort(np.vstack([g[None, :], key.T[::-1]]))
    H_s, g_s, key_s = H[order], g[order], key[order]
    keep = np.ones(len(g_s), dtype=bool)
    for i in range(1, len(g_s)):
        if np.array_equal(key_s[i], key_s[i - 1]) and keep[i - 1:i + 1].any():
            keep[i] = False  # same direction, larger-or-equal offset
    return H_s[keep], g_s[keep]


def remove_redundancy(poly, tol=1e-9):
    """Drop facets implied by the others, certified row by row with LPs.

    The retained facets are exactly those whose removal would enlarge the
    set: maximising h_i . x subject to the remaining rows exceeds
    g_i + tol.  Point set is unchanged.
    """
    base = poly.normalized()
    if base._empty or base.is_empty():
        raise ValueError("remove_redundancy requires a nonempty polytope")
    H, g = _dedupe_rows(base.H, base.g)
    if H.shape[0] <= 1:
        return HPolytope(H, g)
    keep = np.ones(H.shape[0], dtype=bool)
    for i in range(H.shape[0]):
        keep[i] = False
        rest = keep.copy()
        if not np.any(rest):
            keep[i] = True
            continue
        try:
            sol = qp.solve_lp(-H[i], H[rest], np.full(int(rest.sum()), -np.inf),
                              g[rest])
        except SolverError as exc:
            raise SolverError(f"redundancy LP failed on facet {i}: {exc}") from exc
        if sol.status == qp.Status.DUAL_INFEASIBLE:
            keep[i] = True  # unbounded without this row: essential
        elif sol.status == qp.Status.SOLVED:
            keep[i] = -sol.value > g[i] + tol
        else:
            raise SolverError(f"redundancy LP on facet {i} returned {sol.status}")
    return HPolytope(H[keep], g[keep])


def _vertices_bounded(H, g, feas_tol=1e-7):
    """Vertices of a bounded polytope by facet-combination enumeration."""
    F, n = H.shape
    if F < n:
        raise ValueError("fewer facets than dimensions: polytope unbounded")
    combos = list(itertools.combinations(range(F), n))
    if len(combos) > _MAX_VERTEX_COMBOS:
        raise ValueError("facet count too large for vertex enumeration")
    idx = np.asarray(combos)
    A = H[idx]
    b = g[idx]
    dets = np.abs(np.linalg.det(A))
    ok = dets > 1e-10
    if not np.any(ok):
        return np.zeros((0, n))
    X = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
    finite = np.all(np.isfinite(X), axis=1)
    X = X[finite]
    if X.shape[0] == 0:
        return np.zeros((0, n))
    row_tol = feas_tol * (1.0 + np.abs(g))
    feas = np.all(H @ X.T <= (g + row_tol)[:, None], axis=0)
    pts = X[feas]
    if pts.shape[0] == 0:
        return np.zeros((0, n))
    return np.unique(np.round(pts, 9), axis=0)


def _prune_by_vertices(H, g, verts, act_tol=1e-7):
    """Drop rows inactive at every vertex (exact for bounded polytopes)."""
    if verts.shape[0] == 0:
        return H, g
    slack = (g[:, None] - H @ verts.T)
    active = np.any(slack <= act_tol * (1.0 + np.abs(g))[:, None], axis=1)
    if not np.any(active):
        return H, g
    return H[active], g[active]


def pre_set(omega, vertex_mats, w):
    """One-step robust predecessor of omega under a polytopic difference
    inclusion x+ = A_v x + w, intersected over all vertex matrices.

    Rows whose mapped normal vanishes are trivially satisfied (dropped) or
    witness emptiness.  Result has redundancy removed; it may be the whole
    space (no rows) or flagged empty.
    """
    mats = [np.atleast_2d(np.asarray(M, dtype=float)) for M in vertex_mats]
    n = omega.dim
    for M in mats:
        if M.shape != (n, n):
            raise DimensionError("vertex matrices must be square and match omega")
    if w.dim != n:
        raise DimensionError("disturbance box dimension does not match omega")
    offsets = omega.g - np.array([support(w, h) for h in omega.H])
    rows = []
    rhs = []
    for M in mats:
        HM = omega.H @ M
        norms = np.linalg.norm(HM, axis=1)
        zero = norms <= 1e-12
        if np.any(zero & (offsets < -1e-12)):
            return HPolytope.empty_set(n)
        rows.append(HM[~zero])
        rhs.append(offsets[~zero])
    if not rows or sum(r.shape[0] for r in rows) == 0:
        return HPolytope.universe(n)
    pre = HPolytope(np.vstack(rows), np.concatenate(rhs))
    if pre.is_empty():
        return HPolytope.empty_set(n)
    return remove_redundancy(pre)


def _dedupe_matrices(mats):
    seen = {}
    for M in mats:
        seen.setdefault(np.round(M, 12).tobytes(), np.asarray(M, dtype=float))
    return list(seen.values())


def _cut_with_row(H, g, verts, h_new, g_new, feas_tol=1e-7):
    """Exact vertex update when one facet is added to a bounded polytope.

    Surviving vertices are the old ones on the feasible side; new vertices
    can only sit on the added plane, at intersections with n-1 of the
    existing facets.
    """
    n = H.shape[1]
    row_tol = feas_tol * (1.0 + abs(g_new))
    keep = h_new @ verts.T <= g_new + row_tol
    kept = verts[keep]
    F = H.shape[0]
    pts = np.zeros((0, n))
    if n == 1:
        cand = np.array([[g_new / h_new[0]]])
        pts = cand
    elif F >= n - 1:
        idx = np.asarray(list(itertools.combinations(range(F), n - 1)))
        A = np.concatenate([H[idx], np.broadcast_to(h_new, (idx.shape[0], 1, n))],
                           axis=1)
        b = np.concatenate([g[idx], np.full((idx.shape[0], 1), g_new)], axis=1)
        dets = np.abs(np.linalg.det(A))
        ok = dets > 1e-10
        if np.any(ok):
            X = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
            X = X[np.all(np.isfinite(X), axis=1)]
            if X.shape[0]:
                tol_rows = feas_tol * (1.0 + np.abs(g))
                feas = np.all(H @ X.T <= (g + tol_rows)[:, None], axis=0)
                pts = X[feas]
    if pts.shape[0]:
        tol_new = feas_tol * (1.0 + abs(g_new))
        pts = pts[np.abs(pts @ h_new - g_new) <= tol_new + 1e-12]
    merged = np.vstack([kept, pts]) if pts.shape[0] else kept
    if merged.shape[0] == 0:
        return merged
    return np.unique(np.round(merged, 9), axis=0)


def max_rpi(vertex_mats, w, x_constraint, tol=1e-8, max_iter=200):
    """Maximal robust positive invariant subset of x_constraint for
    x+ = A_v x + w over all vertex matrices and box disturbances.

    Fixed-point iteration: Omega_0 is the constraint set; each pass pulls
    every current facet back through every vertex matrix (offset reduced
    by the disturbance support) and keeps the pullbacks that still cut the
    iterate, until every new facet is redundant within tol.  The returned
    set carries the iteration count in its ``rpi_iterations`` attribute.

    Raises RpiIterationError (with the last iterate attached) when the cap
    is hit; returns a flagged-empty polytope when no invariant subset
    exists.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    mats = _dedupe_matrices([np.atleast_2d(np.asarray(M, dtype=float))
                             for M in vertex_mats])
    n = x_constraint.dim
    for M in mats:
        if M.shape != (n, n):
            raise DimensionError("vertex matrices must be square, matching the set")
    if w.dim != n:
        raise DimensionError("disturbance box dimension mismatch")
    base = x_constraint.normalized()
    if base.is_empty():
        raise ValueError("x_constraint must be nonempty")
    bounding_box(base)  # raises when unbounded

    # With a sign-symmetric disturbance box the minimal invariant set
    # contains the origin, so any invariant subset must too: a negative
    # facet offset then certifies emptiness immediately.
    symmetric_w = bool(np.allclose(w.lower, -w.upper))

    H, g = _dedupe_rows(base.H, base.g)
    verts = _vertices_bounded(H, g)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if verts.shape[0] == 0:
            return HPolytope.empty_set(n)
        w_sup = np.array([support(w, h) for h in H])
        cand_H = []
        cand_g = []
        for M in mats:
            HM = H @ M
            off = g - w_sup
            norms = np.linalg.norm(HM, axis=1)
            zero = norms <= 1e-12
            if np.any(zero & (off < -1e-12)):
                return HPolytope.empty_set(n)
            HM, off, norms = HM[~zero], off[~zero], norms[~zero]
            cand_H.append(HM / norms[:, None])
            cand_g.append(off / norms)
        cand_H = np.vstack(cand_H)
        cand_g = np.concatenate(cand_g)

        if symmetric_w and np.any(cand_g < -tol):
            return HPolytope.empty_set(n)

        added = 0
        while True:
            viol = np.max(cand_H @ verts.T, axis=1) - cand_g
            order = np.argmax(viol)
            if viol[order] <= tol:
                break
            h_new, g_new = cand_H[order], cand_g[order]
            verts = _cut_with_row(H, g, verts, h_new, g_new)
            if verts.shape[0] == 0:
                return HPolytope.empty_set(n)
            H = np.vstack([H, h_new[None, :]])
            g = np.concatenate([g, [g_new]])
            H, g = _prune_by_vertices(H, g, verts)
            keep = viol > tol
            keep[order] = False
            cand_H, cand_g = cand_H[keep], cand_g[keep]
            added += 1
            if cand_H.shape[0] == 0:
                break
        if H.shape[0] > 400:
            last = HPolytope(H, g)
            last.rpi_iterations = iterations
            raise RpiIterationError(
                "invariant-set iterate exceeded 400 facets without converging",
                last_iterate=last, iterations=iterations)

        if added == 0:
            result = remove_redundancy(HPolytope(H, g), tol)
            result.rpi_iterations = iterations
            return result
        # Re-enumerate from scratch once per pass to stop tolerance drift.
        H, g = _dedupe_rows(H, g)
        verts = _vertices_bounded(H, g)
        if verts.shape[0] == 0:
            return HPolytope.empty_set(n)
        H, g = _prune_by_vertices(H, g, verts)
        verts = _vertices_bounded(H, g)

    last = HPolytope(H, g)
    last.rpi_iterations = iterations
    raise RpiIterationError(
        f"invariant-set iteration did not converge in {max_iter} passes",
        last_iterate=last, iterations=iterations)


def sample_points(poly, n_points, rng, include_boundary=True):
    """Deterministically seeded sample of points inside a bounded polytope.

    Rejection sampling from the bounding box, topped up with convex
    combinations of the vertices when acceptance is poor; optionally the
    vertices themselves (facet-boundary points) are appended.
    """
    base = poly.normalized()
    verts = _vertices_bounded(base.H, base.g)
    if verts.shape[0] == 0:
        raise ValueError("cannot sample from an empty polytope")
    pts = []
    if include_boundary:
        pts.append(verts)
    box_lo, box_hi = verts.min(axis=0), verts.max(axis=0)
    need = n_points
    draws = rng.uniform(box_lo, box_hi, size=(max(4 * n_points, 256), poly.dim))
    inside = np.all(base.H @ draws.T <= base.g[:, None] + 1e-12, axis=0)
    accepted = draws[inside][:need]
    pts.append(accepted)
    short = need - accepted.shape[0]
    if short > 0:
        weights = rng.exponential(size=(short, verts.shape[0]))
        weights /= weights.sum(axis=1, keepdims=True)
        pts.append(weights @ verts)
    return np.vstack(pts)


def rpi_property_violation(poly, vertex_mats, w, points):
    """Worst constraint violation of A_v x + w_extreme over given points.

    Returns the largest amount by which any image of any point under any
    vertex matrix plus any extreme disturbance leaves the set (<= 0 means
    the sampled invariance property holds exactly).
    """
    base = poly.normalized()
    H, g = base.H, base.g
    w_sup = np.array([support(w, h) for h in H])
    worst = -np.inf
    for M in vertex_mats:
        imgs = points @ np.asarray(M, dtype=float).T
        slack = H @ imgs.T - (g - w_sup)[:, None]
        worst = max(worst, float(np.max(slack)))
    return worst
