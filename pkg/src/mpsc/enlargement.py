"""Terminal safe sets: trivial initialization, growth from closed-loop data,
and the terminal control law.

The nominal terminal set is a vertex hull.  Every vertex (an *anchor*)
carries an input whose nominal successor lies inside the hull, so the law
``sigma_f(z) = sum_j lam_j v_j`` for ``z = sum_j lam_j f_j`` keeps the hull
invariant by convexity.  Anchors come for free from certified nominal
trajectories: ``(z*_j, v*_j)`` has successor ``z*_{j+1}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _conic
from .errors import EnlargementWarning, SafetyFault
from .geometry import (DEFAULT_TOL, Ellipsoid, VertexHull, hull_gap,
                       hull_membership_weights, prune_indices)
from .linsys import TubeGain

PRUNE_TOL = DEFAULT_TOL  # pruning and membership share one tolerance
VERTEX_WARN = 500


@dataclass(frozen=True, eq=False)
class TerminalController:
    """Anchor pairs ``(state, input)`` plus the tube feedback for the ellipsoid part."""

    anchors: VertexHull
    inputs: np.ndarray
    gain: TubeGain
    omega: Ellipsoid

    def __post_init__(self):
        U = np.array(self.inputs, dtype=float).reshape(len(self.anchors), -1)
        U.setflags(write=False)
        object.__setattr__(self, "inputs", U)

    def successors(self):
        A, B = self.gain.model.A, self.gain.model.B
        return self.anchors.vertices @ A.T + self.inputs @ B.T

    def invariance_gap(self, hull: VertexHull | None = None) -> float:
        """Largest distance of an anchor successor from ``hull`` (default: the anchors)."""
        hull = hull if hull is not None else self.anchors
        return max(hull_gap(hull, s) for s in self.successors())

    def sigma(self, z, tol=DEFAULT_TOL):
        """Nominal terminal law at a hull point ``z``."""
        lam = hull_membership_weights(self.anchors, z, tol)
        if lam is None:
            raise SafetyFault(f"state {np.asarray(z).tolist()} lies outside the nominal terminal set")
        return self.inputs.T @ lam


@dataclass
class EnlargementLog:
    """Closed-loop record of certified steps (the index set of feasible times)."""

    feasible_indices: list = field(default_factory=list)
    measured_states: list = field(default_factory=list)
    nominal_states: list = field(default_factory=list)
    nominal_inputs: list = field(default_factory=list)
    hull_sizes: list = field(default_factory=list)
    rollbacks: list = field(default_factory=list)

    def record(self, k, x, solution):
        if self.feasible_indices and k <= self.feasible_indices[-1]:
            raise ValueError("feasible indices must be strictly increasing")
        self.feasible_indices.append(int(k))
        self.measured_states.append(np.array(x, dtype=float))
        self.nominal_states.append(np.array(solution.z_traj))
        self.nominal_inputs.append(np.array(solution.v_traj))


@dataclass(frozen=True, eq=False)
class TubeSet:
    """Terminal safe set ``hull (+) omega`` with membership by decomposition."""

    hull: VertexHull
    omega: Ellipsoid

    def decompose(self, x):
        return decompose(self.hull, self.omega, x)

    def contains(self, x, tol=DEFAULT_TOL) -> bool:
        _, e = self.decompose(x)
        return self.omega.gauge2(e) <= 1.0 + tol

    def boundary_samples(self, count):
        E = self.omega.boundary_points(count)
        return (self.hull.vertices[:, None, :] + E[None, :, :]).reshape(-1, self.hull.dim)


def decompose(hull: VertexHull, omega: Ellipsoid, x):
    """Split ``x = z + e`` with ``z`` in the hull minimizing ``e'Pe``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    V = hull.vertices
    k = len(V)
    if k == 1:
        return V[0].copy(), x - V[0]
    if hull_gap(hull, x) <= 1e-12:
        # points of the hull (vertices included) decompose exactly
        return x.copy(), np.zeros_like(x)
    P = omega.P
    Pq = 2.0 * V @ P @ V.T
    q = -2.0 * V @ P @ x
    A = sp.csc_matrix(np.vstack([np.ones((1, k)), -np.eye(k)]))
    b = np.concatenate([[1.0], np.zeros(k)])
    res = _conic.solve(Pq + 1e-12 * np.eye(k), q, A, b, 1, k, opts=_conic.settings(tol=1e-10))
    if res.status != _conic.SOLVED:
        raise SafetyFault("terminal decomposition failed", {"x": x.tolist(), "status": res.status})
    lam = np.clip(res.x, 0.0, None)
    lam /= lam.sum()
    z = V.T @ lam
    return z, x - z


def init_trivial(omega: Ellipsoid, gain: TubeGain):
    """Nominal terminal set ``{0}``; the safe terminal set is then the tube itself."""
    n, m = gain.model.n, gain.model.m
    hull = VertexHull.origin(n)
    return hull, TerminalController(hull, np.zeros((1, m)), gain, omega)


def enlarge_nominal(log: EnlargementLog, hull: VertexHull, ctrl: TerminalController,
                    new_solution, tol=DEFAULT_TOL, prune_tol=PRUNE_TOL):
    """Add the nominal points ``z*_1..z*_N`` of a certified solution to the terminal hull.

    The origin anchor is always kept.  After the update every anchor successor
    is re-checked against the new hull; on failure the old pair is returned and
    an :class:`EnlargementWarning` is emitted.
    """
    if not new_solution.feasible:
        raise ValueError("only certified solutions may enlarge the terminal set")
    z = np.asarray(new_solution.z_traj)
    v = np.asarray(new_solution.v_traj)
    lam = hull_membership_weights(ctrl.anchors, z[-1], tol)
    if lam is None:
        raise ValueError("solution does not end in the current terminal hull")
    sigma_end = ctrl.inputs.T @ lam

    states = np.vstack([ctrl.anchors.vertices, z[1:]])
    inputs = np.vstack([ctrl.inputs, v[1:], sigma_end[None, :]])
    vertex_idx = prune_indices(states, prune_tol)
    new_hull = VertexHull(states[vertex_idx])
    origin = np.flatnonzero(np.all(states == 0.0, axis=1))
    anchor_idx = sorted(set(vertex_idx) | ({int(origin[0])} if origin.size else set()))
    new_ctrl = TerminalController(VertexHull(states[anchor_idx]), inputs[anchor_idx],
                                  ctrl.gain, ctrl.omega)

    gap = new_ctrl.invariance_gap(new_hull)
    if gap > tol:
        warnings.warn(f"enlargement rolled back: anchor successor {gap:.3g} outside the new hull",
                      EnlargementWarning, stacklevel=2)
        log.rollbacks.append(gap)
        return hull, ctrl
    if len(new_hull) > VERTEX_WARN:
        warnings.warn(f"terminal hull has {len(new_hull)} vertices", EnlargementWarning,
                      stacklevel=2)
    log.hull_sizes.append(len(new_hull))
    return new_hull, new_ctrl


class MeasuredSafeSets:
    """Union ``conv{measured feasible states} U S_f`` kept as a list of convex sets."""

    def __init__(self, base, measured: VertexHull | None = None):
        self.base = base
        self.measured = measured

    @property
    def sets(self):
        if self.measured is None:
            return [self.base]
        if self.base is None:
            return [self.measured]
        return [self.measured, self.base]

    def __len__(self):
        return len(self.sets)

    def contains(self, x, tol=DEFAULT_TOL) -> bool:
        return any(s.contains(x, tol) for s in self.sets)


def _covers(hull: VertexHull, base, tol, samples=1000) -> bool:
    if isinstance(base, VertexHull):
        pts = base.vertices
    elif isinstance(base, Ellipsoid):
        pts = base.boundary_points(samples)
    elif isinstance(base, TubeSet):
        pts = base.boundary_samples(max(samples // len(base.hull), 16))
    else:
        raise TypeError(f"cannot test containment of {type(base).__name__}")
    return all(hull_gap(hull, p) <= tol for p in pts)


def enlarge_measured(log: EnlargementLog, safe_sets: MeasuredSafeSets, new_state,
                     tol=DEFAULT_TOL, prune_tol=PRUNE_TOL) -> MeasuredSafeSets:
    """Grow the measured-state hull by one certified state.

    When the measured hull covers the initial safe set, the union collapses
    to the hull alone.
    """
    x = np.asarray(new_state, dtype=float)[None, :]
    if safe_sets.measured is None:
        hull = VertexHull(x)
    else:
        pts = np.vstack([safe_sets.measured.vertices, x])
        hull = VertexHull(pts[prune_indices(pts, prune_tol)])
    base = safe_sets.base
    if base is not None and len(hull) > hull.dim and _covers(hull, base, tol):
        base = None
    return MeasuredSafeSets(base, hull)


def terminal_control(ctrl: TerminalController, hull: VertexHull, x, tol=DEFAULT_TOL):
    """Safe input on ``hull (+) omega``: ``sigma_f(z) + K e`` for the decomposition ``x = z + e``."""
    z, e = decompose(hull, ctrl.omega, x)
    if ctrl.omega.gauge2(e) > 1.0 + tol:
        raise SafetyFault("state outside the terminal safe set",
                          {"x": np.asarray(x).tolist(), "gauge": ctrl.omega.gauge2(e)})
    return ctrl.sigma(z, tol) + ctrl.gain.K @ e
