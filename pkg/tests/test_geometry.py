import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpsc.errors import DimensionError, EmptySetWarning
from mpsc.geometry import (Ellipsoid, Polytope, VertexHull, ellipsoid_contains, ellipsoid_support,
                           hull_add_points, hull_distance, hull_membership_weights, polytope_contains,
                           prune_indices, tighten_input, tighten_state)
from mpsc.linsys import LinearModel, TubeGain

from .conftest import A_MODEL, B, P_PAPER


def boundary_max(P, a, count=100_000):
    """Sampling oracle for the support function: max a'e over boundary points of e'Pe = 1."""
    th = np.linspace(0, 2 * np.pi, count, endpoint=False)
    U = np.column_stack([np.cos(th), np.sin(th)])
    E = np.linalg.solve(np.linalg.cholesky(P).T, U.T).T
    return float((E @ a).max())


def in_triangle(p, a, b, c, tol=1e-12):
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])
    d = [cross(a, b, p), cross(b, c, p), cross(c, a, p)]
    return not (min(d) < -tol and max(d) > tol)


def facet_oracle(V, z, tol=1e-9):
    """Membership by brute-force facet enumeration of a planar point set."""
    V = np.unique(V, axis=0)
    if len(V) == 1:
        return np.abs(V[0] - z).max() <= tol
    facets = []
    for i, j in itertools.combinations(range(len(V)), 2):
        d = V[j] - V[i]
        nrm = np.array([d[1], -d[0]])
        s = (V - V[i]) @ nrm
        if np.all(s <= 1e-12):
            facets.append((nrm, nrm @ V[i]))
        elif np.all(s >= -1e-12):
            facets.append((-nrm, -nrm @ V[i]))
    if len(V) == 2 or all(np.allclose(f[0], 0) for f in facets):
        return hull_distance(VertexHull(V), z)[0] <= tol
    # collinear sets have facets on both sides; the check still bounds the segment's line only
    return all(a @ z - b <= tol * np.linalg.norm(a) for a, b in facets)


# --- polytopes ----------------------------------------------------------------


def test_polytope_validation():
    with pytest.raises(ValueError):
        Polytope([[0.0, 0.0]], [1.0])
    with pytest.raises(DimensionError):
        Polytope([[1.0, 0.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        Polytope([[1.0, 0.0]], [np.inf])


def test_polytope_contains_examples(X):
    assert polytope_contains(X, [-0.7, 1.0], 1e-7)
    assert not polytope_contains(X, [0.0, -0.41], 1e-7)
    assert polytope_contains(X, [1.0, 1.0], 0.0)


def test_chebyshev_and_bounding_box(X):
    c, r = X.chebyshev()
    assert r == pytest.approx(0.7)
    lo, hi = X.bounding_box()
    np.testing.assert_allclose(lo, [-1.0, -0.4])
    np.testing.assert_allclose(hi, [1.0, 1.0])
    with pytest.raises(ValueError, match="unbounded"):
        Polytope([[1.0, 0.0]], [1.0]).bounding_box()


def test_uniform_samples_inside(X):
    S = X.sample_uniform(np.random.default_rng(1), 500)
    assert S.shape == (500, 2)
    assert np.all(S @ X.A.T <= X.b)


# --- ellipsoids and tightening ------------------------------------------------------


def test_ellipsoid_validation():
    with pytest.raises(ValueError):
        Ellipsoid([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        Ellipsoid([[1.0, 0.0], [0.0, -1.0]])


def test_ellipsoid_contains_examples(omega_paper):
    P = omega_paper.P
    assert ellipsoid_contains(omega_paper, [0.0, 0.0])
    assert float(np.array([0.2, 0.0]) @ P @ np.array([0.2, 0.0])) == pytest.approx(2.158)
    assert not ellipsoid_contains(omega_paper, [0.2, 0.0])
    lam, vec = np.linalg.eigh(P)
    e = vec[:, 0] / np.sqrt(lam[0])
    assert ellipsoid_contains(omega_paper, e, tol=1e-9)


def test_support_examples(omega_paper):
    assert ellipsoid_support(Ellipsoid(np.eye(2)), [0.0, 0.0]) == 0.0
    assert ellipsoid_support(Ellipsoid(4 * np.eye(2)), [1.0, 0.0]) == pytest.approx(0.5)
    # 2x2 inverse by hand: (P^-1)_22 = P_11 / det P
    det = 53.95 * 14.55 - 11.47**2
    assert ellipsoid_support(omega_paper, [0.0, 1.0]) == pytest.approx(np.sqrt(53.95 / det))


@pytest.mark.parametrize("a", [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.3, -0.7], [-4.12, -5.32]])
def test_support_matches_boundary_sampling(omega_paper, a):
    a = np.array(a)
    exact = ellipsoid_support(omega_paper, a)
    assert exact == pytest.approx(boundary_max(omega_paper.P, a), rel=1e-3)


def test_tighten_state_examples(omega_paper, X):
    unit = tighten_state(Polytope([[1.0, 0.0]], [1.0]), Ellipsoid(np.eye(2)))
    assert unit.b[0] == pytest.approx(0.0)
    Xb = tighten_state(X, omega_paper)
    assert np.array_equal(Xb.A, X.A)
    # facet x1 <= 1 shrinks by sqrt((P^-1)_11)
    det = 53.95 * 14.55 - 11.47**2
    assert Xb.b[0] == pytest.approx(1.0 - np.sqrt(14.55 / det))
    assert Xb.b[0] == pytest.approx(0.8508, abs=1e-4)
    for i, a in enumerate(X.A):
        assert X.b[i] - Xb.b[i] == pytest.approx(boundary_max(omega_paper.P, a), rel=1e-3)


def test_tighten_state_vanishing_tube(X):
    for sigma in (1e2, 1e6, 1e10):
        Xb = tighten_state(X, Ellipsoid(sigma * np.eye(2)))
        np.testing.assert_allclose(X.b - Xb.b, 1 / np.sqrt(sigma), rtol=1e-9)


def test_tighten_input_examples(omega_paper, U, gain):
    model = LinearModel(A_MODEL, B)
    zero_gain = TubeGain([[0.0, 0.0]], model)
    Ub = tighten_input(U, zero_gain, omega_paper)
    np.testing.assert_array_equal(Ub.b, U.b)
    Ub = tighten_input(U, gain, omega_paper)
    K = np.array(gain.K)
    margin = np.sqrt(K @ np.linalg.inv(omega_paper.P) @ K.T)[0, 0]
    np.testing.assert_allclose(Ub.b, 2.5 - margin)
    assert 2.5 - Ub.b[0] == pytest.approx(boundary_max(omega_paper.P, K[0]), rel=1e-3)


def test_tighten_input_degenerate_warns():
    model = LinearModel([[0.5]], [[1.0]])
    g = TubeGain([[-1.0]], model)
    with pytest.warns(EmptySetWarning, match="empty interior"):
        Ub = tighten_input(Polytope.box([-1.0], [1.0]), g, Ellipsoid([[1.0]]))
    np.testing.assert_allclose(Ub.b, [0.0, 0.0], atol=1e-15)
    with pytest.warns(EmptySetWarning, match="is empty"):
        tighten_state(Polytope.box([-0.1, -0.1], [0.1, 0.1]), Ellipsoid(np.eye(2)))


def test_tightening_then_minkowski_readd(omega_paper, X):
    rng = np.random.default_rng(7)
    Xb = tighten_state(X, omega_paper)
    Z = Xb.sample_uniform(rng, 1000)
    E = omega_paper.sample(rng, 1000, boundary=True)
    S = Z + E
    assert np.all(S @ X.A.T <= X.b + 1e-9)


def test_ellipsoid_samples(omega_paper):
    rng = np.random.default_rng(3)
    E = omega_paper.sample(rng, 200)
    g = np.einsum("ij,jk,ik->i", E, omega_paper.P, E)
    assert g.max() <= 1.0 + 1e-12
    Eb = omega_paper.sample(rng, 200, boundary=True)
    np.testing.assert_allclose(np.einsum("ij,jk,ik->i", Eb, omega_paper.P, Eb), 1.0)
    Bp = omega_paper.boundary_points(16)
    np.testing.assert_allclose(np.einsum("ij,jk,ik->i", Bp, omega_paper.P, Bp), 1.0)


# --- hulls -----------------------------------------------------------------------


def test_hull_weights_examples():
    assert np.array_equal(hull_membership_weights(VertexHull.origin(2), [0.0, 0.0]), [1.0])
    tri = VertexHull([[0, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(hull_membership_weights(tri, [0.25, 0.25]), [0.5, 0.25, 0.25],
                               atol=1e-8)
    assert hull_membership_weights(tri, [1.0, 1.0]) is None


def test_hull_weights_min_norm_tie_break():
    # the centre of a square has many representations; the minimum-norm one is uniform
    sq = VertexHull([[0, 0], [1, 0], [1, 1], [0, 1]])
    np.testing.assert_allclose(hull_membership_weights(sq, [0.5, 0.5]), [0.25] * 4, atol=1e-7)
    # the midpoint of an edge uses the two edge vertices equally
    np.testing.assert_allclose(hull_membership_weights(sq, [0.5, 0.0]), [0.5, 0.5, 0, 0],
                               atol=1e-7)


def test_hull_weights_on_degenerate_hull():
    seg = VertexHull([[0, 0], [1, 1], [2, 2]])
    assert seg.facets is None
    lam = hull_membership_weights(seg, [1.5, 1.5])
    np.testing.assert_allclose(seg.vertices.T @ lam, [1.5, 1.5], atol=1e-7)
    assert hull_membership_weights(seg, [1.5, 1.4]) is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hull_weights_reproduce_point(seed):
    rng = np.random.default_rng(seed)
    V = rng.uniform(-1, 1, size=(rng.integers(1, 9), 2))
    z = rng.uniform(-1, 1, size=2)
    hull = VertexHull(V)
    lam = hull_membership_weights(hull, z)
    assert (lam is not None) == facet_oracle(V, z, 1e-7) or \
        abs(hull_distance(hull, z)[0] - 1e-7) < 1e-9
    if lam is not None:
        assert lam.min() >= 0 and lam.sum() == pytest.approx(1.0)
        assert np.abs(V.T @ lam - z).max() <= 1e-7


def test_membership_matches_facet_enumeration():
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(200):
        V = rng.uniform(-1, 1, size=(rng.integers(1, 9), 2))
        z = rng.uniform(-1.2, 1.2, size=2)
        mismatches += VertexHull(V).contains(z) != facet_oracle(V, z, 1e-7)
    assert mismatches == 0


def test_hull_add_points_examples():
    h = VertexHull.origin(2)
    h3 = hull_add_points(h, [[1, 0], [0, 1]])
    assert len(h3) == 3
    same = hull_add_points(h3, [[0.2, 0.2]])
    assert len(same) == 3
    sq = VertexHull([[0, 0], [1, 0], [1, 1], [0, 1]])
    grown = hull_add_points(sq, [[2, 0]])
    # (1, 0) now lies on the edge from (0, 0) to (2, 0) and is pruned
    assert sorted(map(tuple, grown.vertices.tolist())) == [(0, 0), (0, 1), (1, 1), (2, 0)]


def test_prune_matches_triangle_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        pts = rng.uniform(-1, 1, size=(rng.integers(3, 7), 2))
        kept = set(prune_indices(pts))
        for i in range(len(pts)):
            others = [pts[j] for j in range(len(pts)) if j != i]
            redundant = any(in_triangle(pts[i], *tri) for tri in itertools.combinations(others, 3))
            assert (i not in kept) == redundant


def test_prune_keeps_requested_and_dedups():
    pts = np.array([[0, 0], [1, 0], [0, 1], [0.1, 0.1], [1, 0]], dtype=float)
    assert prune_indices(pts) == [0, 1, 2]
    assert prune_indices(pts, keep=(3,)) == [0, 1, 2, 3]


def test_hull_add_points_idempotent_and_set_preserving():
    rng = np.random.default_rng(9)
    pts = rng.uniform(-1, 1, size=(30, 2))
    hull = hull_add_points(VertexHull(pts[:1]), pts[1:])
    again = hull_add_points(hull, hull.vertices)
    np.testing.assert_array_equal(np.sort(again.vertices, axis=0), np.sort(hull.vertices, axis=0))
    raw = VertexHull(pts)
    probes = rng.uniform(-1.2, 1.2, size=(1000, 2))
    assert all(raw.contains(p) == hull.contains(p) for p in probes)


def test_area():
    assert VertexHull([[0, 0], [1, 0], [1, 1], [0, 1]]).area() == pytest.approx(1.0)
    assert VertexHull([[0, 0], [1, 1]]).area() == 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert VertexHull([[0, 0], [2, 0], [0, 2], [0.5, 0.5]]).area() == pytest.approx(2.0)


def test_hull_dimension_checks():
    with pytest.raises(DimensionError):
        hull_distance(VertexHull.origin(2), [0.0])
    with pytest.raises(DimensionError):
        hull_add_points(VertexHull.origin(2), [[0.0, 0.0, 1.0]])


def test_paper_P_constant():
    assert P_PAPER == [[53.95, 11.47], [11.47, 14.55]]
