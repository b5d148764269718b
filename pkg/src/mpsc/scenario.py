"""Scenario-based design of the ellipsoidal tube set and its confidence bound.

The tube set ``{e : e'Pe <= 1}`` is made robustly invariant for
``e+ = A_cl e + w`` on every sampled disturbance ``w`` by requiring

    [[A_cl'P A_cl - tau P,  A_cl'P w        ],
     [w'P A_cl,             w'P w + tau - 1 ]]  <= 0

while maximizing ``log det P``.  The condition is bilinear in ``(P, tau)``;
``tau`` is searched on a grid and each slice is a convex max-log-det SDP.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, QhullError
from scipy.special import gammaln, logsumexp

from .errors import DimensionError, SolverFailure
from .geometry import Ellipsoid
from .linsys import LinearModel, TubeGain, spectral_radius

log = logging.getLogger(__name__)

SOURCES = ("measurement-residual", "model-sampled", "synthetic")


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    samples: np.ndarray
    source: str = "measurement-residual"

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if W.shape[0] < 1:
            raise ValueError("scenario set is empty")
        if not np.all(np.isfinite(W)):
            raise ValueError("scenarios must be finite")
        if self.source not in SOURCES:
            raise ValueError(f"unknown scenario source {self.source!r}")
        W.setflags(write=False)
        object.__setattr__(self, "samples", W)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class ScenarioBound:
    N_s: int
    n_s: int
    epsilon: float
    confidence: float

    @classmethod
    def at_confidence(cls, N_s, n, target):
        n_s = decision_count(n)
        if N_s < n_s:
            # too few samples for any guarantee: report the vacuous bound
            return cls(N_s, n_s, 1.0, 0.0)
        eps = epsilon_for_confidence(N_s, n_s, target)
        return cls(N_s, n_s, eps, scenario_confidence(N_s, n_s, eps))


@dataclass
class RpiDesign:
    omega: Ellipsoid
    tau: float
    worst_residual: float
    bound: ScenarioBound
    log_det: float = float("nan")
    active_scenarios: int = 0
    tau_report: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "P": self.omega.P.tolist(),
            "tau": self.tau,
            "worst_residual": self.worst_residual,
            "N_s": self.bound.N_s,
            "n_s": self.bound.n_s,
            "epsilon_at_confidence": self.bound.epsilon,
            "confidence": self.bound.confidence,
            "log_det": self.log_det,
        }


def decision_count(n: int) -> int:
    """Number of scalar decision variables in the design: symmetric P plus tau."""
    return (n * n + n) // 2 + 1


def build_scenarios(data, model: LinearModel, source="measurement-residual") -> ScenarioSet:
    """Residuals ``y - A x - B u`` of measured triples against the belief model."""
    data = list(data)
    if not data:
        raise ValueError("no measurement triples given")
    W = []
    for x, u, y in data:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.size != model.n or y.size != model.n or u.size != model.m:
            raise DimensionError("measurement triple does not match model dimensions")
        W.append(y - model.A @ x - model.B @ u)
    return ScenarioSet(np.array(W), source)


def lmi_matrix(P, tau, A_cl, w):
    P = P.P if isinstance(P, Ellipsoid) else np.asarray(P, dtype=float)
    w = np.asarray(w, dtype=float).reshape(-1)
    G = np.column_stack([A_cl, w])
    M = G.T @ P @ G
    n = P.shape[0]
    M[:n, :n] -= tau * P
    M[n, n] += tau - 1.0
    return 0.5 * (M + M.T)


def lmi_residual(P, tau, A_cl, w) -> float:
    """Largest eigenvalue of the scenario LMI block; the constraint holds iff <= 0."""
    return float(np.linalg.eigvalsh(lmi_matrix(P, tau, A_cl, w))[-1])


def extreme_scenarios(W, tol=1e-12):
    """Scenarios that are extreme points of the scenario hull.

    The LMI is convex in ``w`` for fixed ``(P, tau)``, so enforcing it at the
    extreme points enforces it on every sample.  Degenerate (lower-dimensional)
    clouds are handled in their affine span.
    """
    W = np.asarray(W, dtype=float)
    if tol:
        # collapse near-duplicates but keep the original coordinates
        _, first = np.unique(np.round(W / tol), axis=0, return_index=True)
        W = W[np.sort(first)]
    if len(W) <= 2:
        return W
    c = W.mean(axis=0)
    _, s, Vt = np.linalg.svd(W - c, full_matrices=False)
    rank = int(np.sum(s > 1e-9 * max(s[0], 1e-300)))
    if rank == 0:
        return W[:1]
    Y = (W - c) @ Vt[:rank].T
    if rank == 1:
        return W[[np.argmin(Y[:, 0]), np.argmax(Y[:, 0])]]
    try:
        return W[np.sort(ConvexHull(Y).vertices)]
    except QhullError:
        return W


def _tau_grid(rho, count):
    # the top-left block forces tau >= rho(A_cl)^2
    gap = 1.0 - rho**2
    return np.sort(1.0 - gap * np.geomspace(0.999, 1e-4, count))


class _SliceProblem:
    """max log det P subject to the scenario LMIs, with tau as a parameter."""

    def __init__(self, A_cl, W, margin, solver):
        n = A_cl.shape[0]
        self.tau = cp.Parameter(nonneg=True)
        self.P = cp.Variable((n, n), symmetric=True)
        cons = []
        for w in W:
            G = np.column_stack([A_cl, w])
            D = cp.bmat([[self.tau * self.P, np.zeros((n, 1))],
                         [np.zeros((1, n)), cp.reshape(1 - self.tau, (1, 1), order="F")]])
            cons.append(D - G.T @ self.P @ G >> margin * np.eye(n + 1))
        self.problem = cp.Problem(cp.Maximize(cp.log_det(self.P)), cons)
        self.solver = solver

    def solve(self, tau):
        self.tau.value = float(tau)
        try:
            # inaccurate slices are accepted here and re-checked exactly by the caller
            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                self.problem.solve(solver=self.solver)
        except cp.SolverError as exc:
            return None, f"solver error: {exc}"
        if self.problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self.P.value is None:
            return None, self.problem.status
        return 0.5 * (self.P.value + self.P.value.T), self.problem.status


def design_rpi(scenarios: ScenarioSet, model: LinearModel, gain: TubeGain, *,
               tau_grid=50, feas_tol=1e-8, margin=1e-9, refine=True,
               confidence=0.97, solver="CLARABEL") -> RpiDesign:
    """Scenario design of the tube ellipsoid.

    Every returned design has been re-checked by exact eigenvalue evaluation
    on all scenarios; the SDP solver output is never trusted on its own.
    """
    if scenarios.dim != model.n:
        raise DimensionError("scenario dimension does not match the model")
    A_cl = model.A + model.B @ gain.K
    rho = spectral_radius(A_cl)
    if not rho < 1.0:
        raise ValueError(f"A + B K is not Schur stable (spectral radius {rho:.6g})")
    W_all = scenarios.samples
    W = extreme_scenarios(W_all)
    log.debug("design: %d scenarios reduced to %d extreme points", len(W_all), len(W))
    slice_problem = _SliceProblem(A_cl, W, margin, solver)

    report = []
    cache = {}

    def evaluate(tau):
        if tau in cache:
            return cache[tau]
        P, status = slice_problem.solve(tau)
        out = None
        if P is not None and np.linalg.eigvalsh(P)[0] > 0:
            worst = max(lmi_residual(P, tau, A_cl, w) for w in W_all)
            if worst <= feas_tol:
                out = (float(np.linalg.slogdet(P)[1]), float(tau), P, worst)
            else:
                status = f"{status}; residual check failed ({worst:.3g})"
        report.append({"tau": float(tau), "status": str(status), "feasible": out is not None,
                       "log_det": None if out is None else out[0]})
        cache[tau] = out
        return out

    grid = _tau_grid(rho, tau_grid)
    results = [evaluate(t) for t in grid]
    feasible = [(i, r) for i, r in enumerate(results) if r is not None]
    if not feasible:
        raise SolverFailure("no feasible (P, tau) on the tau grid: " +
                            "; ".join(f"tau={r['tau']:.6g}: {r['status']}" for r in report))
    i_best, best = max(feasible, key=lambda ir: ir[1][0])

    if refine:
        lo = grid[max(i_best - 1, 0)]
        hi = grid[min(i_best + 1, len(grid) - 1)]
        if hi > lo:
            def neg(t):
                r = evaluate(float(t))
                return -r[0] if r is not None else 1e12
            opt = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-6 * (hi - lo)})
            r = evaluate(float(opt.x))
            if r is not None and r[0] > best[0]:
                best = r

    log_det, tau, P, worst = best
    bound = ScenarioBound.at_confidence(len(W_all), model.n, confidence)
    return RpiDesign(Ellipsoid(P), tau, worst, bound, log_det, len(W), report)


# --- confidence bound ------------------------------------------------------


def scenario_confidence(N_s: int, n_s: int, epsilon: float) -> float:
    """``1 - sum_{i<n_s} C(N_s, i) eps^i (1-eps)^(N_s-i)``, evaluated in log space."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not (1 <= n_s <= N_s):
        raise ValueError("need 1 <= n_s <= N_s")
    i = np.arange(n_s)
    log_terms = (gammaln(N_s + 1) - gammaln(i + 1) - gammaln(N_s - i + 1)
                 + i * np.log(epsilon) + (N_s - i) * np.log1p(-epsilon))
    return float(-np.expm1(logsumexp(log_terms)))


def scenario_confidence_exact(N_s: int, n_s: int, epsilon) -> Fraction:
    """Rational-arithmetic reference for :func:`scenario_confidence`."""
    eps = Fraction(epsilon)
    return 1 - sum(comb(N_s, i) * eps**i * (1 - eps) ** (N_s - i) for i in range(n_s))


def epsilon_for_confidence(N_s: int, n_s: int, target: float, tol=1e-10) -> float:
    """Smallest epsilon (to ``tol``) whose confidence reaches ``target``."""
    if not 0.0 < target < 1.0:
        raise ValueError("target confidence must lie in (0, 1)")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if scenario_confidence(N_s, n_s, mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi
