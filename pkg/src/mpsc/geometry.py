"""Convex sets and the set arithmetic used by the tube construction.

Three representations are used:

* :class:`Polytope` -- halfspaces ``{x : A x <= b}`` for state/input constraints,
* :class:`Ellipsoid` -- ``{e : e'Pe <= 1}`` for the tube cross-section,
* :class:`VertexHull` -- a vertex list for terminal sets.

Polytope minus ellipsoid is exact per facet through the ellipsoid support
function, so no polytopic approximation of the ellipsoid is ever built.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from . import _conic
from .errors import DimensionError, EmptySetWarning

DEFAULT_TOL = 1e-7


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Polytope:
    """Halfspace polytope ``{x : A x <= b}``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = _frozen(np.atleast_2d(self.A))
        b = _frozen(np.reshape(self.b, -1))
        if A.shape[0] < 1 or A.shape[0] != b.shape[0]:
            raise DimensionError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polytope data must be finite")
        if np.any(np.all(A == 0, axis=1)):
            raise ValueError("polytope has an all-zero facet normal")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        n = lower.size
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, x, tol=DEFAULT_TOL) -> bool:
        return polytope_contains(self, x, tol)

    def margin(self, x) -> np.ndarray:
        """Per-facet slack ``b - A x`` (negative entries are violations)."""
        return self.b - self.A @ np.asarray(x, dtype=float)

    def chebyshev(self):
        """Largest inscribed ball as ``(center, radius)``; radius < 0 means empty."""
        norms = np.linalg.norm(self.A, axis=1)
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.A, norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=self.b, bounds=[(None, None)] * self.dim + [(None, None)],
                      method="highs")
        if res.status == 2:
            return None, -np.inf
        if res.status == 3:
            return None, np.inf
        return res.x[:-1], float(res.x[-1])

    def is_empty(self, tol=1e-12) -> bool:
        return self.chebyshev()[1] < -tol

    def bounding_box(self):
        lo, hi = np.empty(self.dim), np.empty(self.dim)
        for i in range(self.dim):
            c = np.zeros(self.dim)
            c[i] = 1.0
            for sign, out in ((1.0, lo), (-1.0, hi)):
                res = linprog(sign * c, A_ub=self.A, b_ub=self.b,
                              bounds=[(None, None)] * self.dim, method="highs")
                if res.status != 0:
                    raise ValueError("polytope is unbounded or empty; cannot bound it")
                out[i] = res.x[i]
        return lo, hi

    def sample_uniform(self, rng, count):
        """Uniform samples by rejection from the bounding box."""
        lo, hi = self.bounding_box()
        out = []
        while len(out) < count:
            cand = rng.uniform(lo, hi, size=(max(count, 16), self.dim))
            ok = np.all(cand @ self.A.T <= self.b, axis=1)
            out.extend(cand[ok])
        return np.array(out[:count])

    def to_dict(self):
        return {"A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Origin-centred ellipsoid ``{e : e'Pe <= 1}``."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionError(f"P must be square, got {P.shape}")
        if np.abs(P - P.T).max() > 1e-10 * max(1.0, np.abs(P).max()):
            raise ValueError("P must be symmetric")
        P = 0.5 * (P + P.T)
        if np.linalg.eigvalsh(P).min() <= 0:
            raise ValueError("P must be positive definite")
        object.__setattr__(self, "P", _frozen(P))

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @cached_property
    def P_inv(self):
        Pi = np.linalg.inv(self.P)
        return 0.5 * (Pi + Pi.T)

    @cached_property
    def chol(self):
        """Lower factor ``L`` with ``P = L L'``; ``||L' e||`` is the gauge."""
        return np.linalg.cholesky(self.P)

    def gauge2(self, e) -> float:
        e = np.asarray(e, dtype=float)
        return float(e @ self.P @ e)

    def contains(self, e, tol=DEFAULT_TOL) -> bool:
        return ellipsoid_contains(self, e, tol)

    def support(self, a) -> float:
        return ellipsoid_support(self, a)

    def boundary_points(self, count):
        """Points on the boundary; evenly spaced in angle for n = 2, else quasi-random."""
        if self.dim == 2:
            th = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
            U = np.column_stack([np.cos(th), np.sin(th)])
        else:
            U = np.random.default_rng(0).standard_normal((count, self.dim))
            U /= np.linalg.norm(U, axis=1, keepdims=True)
        return np.linalg.solve(self.chol.T, U.T).T

    def sample(self, rng, count, boundary=False):
        U = rng.standard_normal((count, self.dim))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        if not boundary:
            U *= rng.uniform(size=(count, 1)) ** (1.0 / self.dim)
        return np.linalg.solve(self.chol.T, U.T).T

    def to_dict(self):
        return {"P": self.P.tolist()}


@dataclass(frozen=True, eq=False)
class VertexHull:
    """Convex hull of a vertex list (at least one vertex)."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float)
        if V.ndim == 1:
            V = V[None, :]
        if V.ndim != 2 or V.shape[0] < 1:
            raise ValueError("a hull needs at least one vertex")
        if not np.all(np.isfinite(V)):
            raise ValueError("hull vertices must be finite")
        object.__setattr__(self, "vertices", _frozen(V))

    @classmethod
    def origin(cls, n):
        return cls(np.zeros((1, n)))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return self.vertices.shape[0]

    @cached_property
    def facets(self):
        """Unit-normal facet equations ``[a, b]`` with ``a'z + b <= 0`` inside,
        or ``None`` for hulls without interior (handled by LP instead)."""
        k, n = self.vertices.shape
        if k <= n:
            return None
        try:
            return ConvexHull(self.vertices).equations
        except QhullError:
            return None

    def contains(self, z, tol=DEFAULT_TOL) -> bool:
        return hull_gap(self, z) <= tol

    def area(self) -> float:
        """Exact area for n = 2 hulls (reporting only)."""
        return polygon_area(self.vertices)

    def to_dict(self):
        return {"vertices": self.vertices.tolist()}


# --- support functions and tightening -------------------------------------


def ellipsoid_support(omega: Ellipsoid, a) -> float:
    """``max a'e`` over the ellipsoid, i.e. ``sqrt(a' P^-1 a)``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape != (omega.dim,):
        raise DimensionError(f"direction must have {omega.dim} entries")
    if not np.all(np.isfinite(a)):
        raise ValueError("direction must be finite")
    if np.linalg.cond(omega.P) > 1e14:
        raise np.linalg.LinAlgError("ellipsoid matrix is numerically singular")
    return float(np.sqrt(max(a @ omega.P_inv @ a, 0.0)))


def _warn_if_degenerate(poly: Polytope, what: str):
    _, r = poly.chebyshev()
    if r < -1e-12:
        warnings.warn(f"{what} is empty", EmptySetWarning, stacklevel=3)
    elif r <= 1e-12:
        warnings.warn(f"{what} has an empty interior", EmptySetWarning, stacklevel=3)


def tighten_state(poly: Polytope, omega: Ellipsoid) -> Polytope:
    """Pontryagin difference ``poly - omega`` (exact, per facet)."""
    if poly.dim != omega.dim:
        raise DimensionError("polytope and ellipsoid dimensions differ")
    margins = np.sqrt(np.einsum("ij,jk,ik->i", poly.A, omega.P_inv, poly.A))
    out = Polytope(poly.A, poly.b - margins)
    _warn_if_degenerate(out, "tightened state set")
    return out


def tighten_input(poly: Polytope, gain, omega: Ellipsoid) -> Polytope:
    """Pontryagin difference ``poly - K omega`` with margins ``sqrt(a'K P^-1 K'a)``."""
    K = np.asarray(gain.K if hasattr(gain, "K") else gain, dtype=float)
    if K.shape != (poly.dim, omega.dim):
        raise DimensionError("gain shape does not match input and state dimensions")
    AK = poly.A @ K
    margins = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", AK, omega.P_inv, AK), 0.0))
    out = Polytope(poly.A, poly.b - margins)
    _warn_if_degenerate(out, "tightened input set")
    return out


def ellipsoid_contains(omega: Ellipsoid, e, tol=DEFAULT_TOL) -> bool:
    e = np.asarray(e, dtype=float).reshape(-1)
    if e.shape != (omega.dim,):
        raise DimensionError(f"point must have {omega.dim} entries")
    return bool(e @ omega.P @ e <= 1.0 + tol)


def polytope_contains(poly: Polytope, x, tol=DEFAULT_TOL) -> bool:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (poly.dim,):
        raise DimensionError(f"point must have {poly.dim} entries")
    return bool(np.all(poly.A @ x <= poly.b + tol))


# --- vertex hulls -----------------------------------------------------------


def hull_distance(hull: VertexHull, z):
    """Smallest ``||V'lam - z||_inf`` over convex weights, by LP.

    Returns ``(distance, weights)``.
    """
    V = hull.vertices
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (hull.dim,):
        raise DimensionError(f"point must have {hull.dim} entries")
    k, n = V.shape
    if k == 1:
        return float(np.abs(V[0] - z).max()), np.ones(1)
    # variables [lam (k), t]
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_ub = np.block([[V.T, -np.ones((n, 1))], [-V.T, -np.ones((n, 1))]])
    b_ub = np.concatenate([z, -z])
    A_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * k + [(0, None)], method="highs")
    if res.status != 0:
        raise RuntimeError(f"hull distance LP failed: {res.message}")
    lam = np.clip(res.x[:k], 0.0, None)
    lam /= lam.sum()
    return float(np.abs(V.T @ lam - z).max()), lam


def _inside_facets(hull: VertexHull, z) -> bool:
    F = hull.facets
    return F is not None and float((F[:, :-1] @ z + F[:, -1]).max()) <= 0.0


def hull_gap(hull: VertexHull, z) -> float:
    """:func:`hull_distance` without the weights; zero for interior points
    detected through the facet equations, which avoids the LP."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape == (hull.dim,) and _inside_facets(hull, z):
        return 0.0
    return hull_distance(hull, z)[0]


def hull_membership_weights(hull: VertexHull, z, tol=DEFAULT_TOL):
    """Minimum-norm convex weights reproducing ``z`` from the hull vertices.

    Returns ``None`` when ``z`` is farther than ``tol`` (max-norm) from the hull.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    V = hull.vertices
    k = V.shape[0]
    if z.shape == (hull.dim,) and _inside_facets(hull, z):
        lam_lp, target = None, z
    else:
        dist, lam_lp = hull_distance(hull, z)
        if dist > tol:
            return None
        target = V.T @ lam_lp
    if k == 1:
        return np.ones(1)
    # min-norm weights over exact representations of the nearest hull point
    # dense assembly: these programs are tiny and sparse block stacking dominates the cost
    A = sp.csc_matrix(np.vstack([V.T, np.ones((1, k)), -np.eye(k)]))
    b = np.concatenate([target, [1.0], np.zeros(k)])
    res = _conic.solve(2.0 * sp.eye(k, format="csc"), np.zeros(k), A, b, hull.dim + 1, k,
                       opts=_conic.settings(tol=1e-10))
    if res.status == _conic.SOLVED:
        lam = np.clip(res.x, 0.0, None)
        lam /= lam.sum()
        if np.abs(V.T @ lam - z).max() <= tol:
            return lam
    if lam_lp is None:
        lam_lp = hull_distance(hull, z)[1]
    return lam_lp


def prune_indices(points, tol=1e-9, keep=()):
    """Indices of points that are not within ``tol`` of the hull of the others.

    Points listed in ``keep`` are retained unconditionally.  Exact duplicates
    collapse to the first occurrence.
    """
    pts = np.asarray(points, dtype=float)
    idx = []
    seen = {}
    for i, p in enumerate(pts):
        key = p.tobytes()
        if key in seen and i not in keep:
            continue
        seen.setdefault(key, i)
        idx.append(i)
    hull = VertexHull(pts[idx])
    if hull.facets is not None:
        # full-dimensional: start from qhull's extreme points, then drop those
        # that are extreme by no more than tol
        order = [idx[j] for j in ConvexHull(pts[idx]).vertices]
        if pts.shape[1] == 2:
            order = _prune_polygon(pts, order, tol)
        else:
            order = _prune_lp(pts, order, tol, keep)
        return sorted(set(order) | {i for i in idx if i in keep})
    return _prune_lp(pts, idx, tol, keep)


def _prune_polygon(pts, ring, tol):
    """Drop vertices of a counterclockwise polygon within tol of the chord of their neighbours."""
    ring = list(ring)
    changed = True
    while changed and len(ring) > 3:
        changed = False
        for j in range(len(ring)):
            a, p, b = pts[ring[j - 1]], pts[ring[j]], pts[ring[(j + 1) % len(ring)]]
            d = b - a
            if np.max(np.abs(p - (a + np.clip((p - a) @ d / (d @ d), 0.0, 1.0) * d))) <= tol:
                del ring[j]
                changed = True
                break
    return ring


def _prune_lp(pts, idx, tol, keep):
    kept = list(idx)
    for i in idx:
        if i in keep or len(kept) == 1:
            continue
        others = [j for j in kept if j != i]
        if hull_distance(VertexHull(pts[others]), pts[i])[0] <= tol:
            kept = others
    return kept


def hull_add_points(hull: VertexHull, points, tol=1e-9) -> VertexHull:
    """Hull of the union of ``hull`` and ``points`` with redundant vertices pruned."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size and pts.shape[1] != hull.dim:
        raise DimensionError("points do not match the hull dimension")
    allp = np.vstack([hull.vertices, pts]) if pts.size else hull.vertices
    return VertexHull(allp[prune_indices(allp, tol)])


def polygon_area(vertices) -> float:
    """Area of the convex hull of planar points; zero for degenerate sets."""
    V = np.asarray(vertices, dtype=float)
    if V.shape[1] != 2:
        raise DimensionError("area is only reported for planar hulls")
    if len(V) < 3:
        return 0.0
    try:
        return float(ConvexHull(V).volume)
    except QhullError:
        return 0.0
