"""The model predictive safety certification program.

For a measured state ``x`` and a proposed learning input ``u_L`` solve

    minimize    ||u_L - u~||^2
    subject to  z_{i+1} = A z_i + B v_i                 i = 0..N-1
                z_i in X_bar,  v_i in U_bar             i = 0..N-1
                z_N = sum_j lam_j f_j,  lam >= 0, sum lam = 1
                (x - z_0)' P (x - z_0) <= 1
                u~ = v_0 + K (x - z_0)

where ``f_j`` are the vertices of the nominal terminal hull.  The program is
assembled once per configuration in conic form; only the ``x``-dependent
right-hand side and the ``u_L``-dependent linear cost change between solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _conic
from .errors import DimensionError
from .geometry import Ellipsoid, Polytope, VertexHull, hull_gap, polytope_contains
from .linsys import LinearModel, TubeGain

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNKNOWN = "unknown"
# interior-point bias on u~ near the certifiable boundary reaches ~1e-6
POLISH = 1e-4


@dataclass(frozen=True, eq=False)
class MpscConfig:
    N: int
    model: LinearModel
    gain: TubeGain
    omega: Ellipsoid
    x_bar: Polytope
    u_bar: Polytope
    terminal: VertexHull
    solver_tol: float = 1e-8
    max_iter: int = 200
    check_tol: float = 1e-7

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("horizon must be at least 1")
        n, m = self.model.n, self.model.m
        if self.omega.dim != n or self.x_bar.dim != n or self.terminal.dim != n:
            raise DimensionError("state-space objects disagree on the state dimension")
        if self.u_bar.dim != m or self.gain.K.shape != (m, n):
            raise DimensionError("input-space objects disagree on the input dimension")
        for f in self.terminal.vertices:
            if not polytope_contains(self.x_bar, f, self.check_tol):
                raise ValueError(f"terminal vertex {f} lies outside the tightened state set")

    @classmethod
    def from_constraints(cls, N, model, gain, omega, X, U, terminal=None, **kw):
        """Tighten ``X`` and ``U`` by the tube and build a configuration."""
        from .geometry import tighten_input, tighten_state

        x_bar = tighten_state(X, omega)
        u_bar = tighten_input(U, gain, omega)
        terminal = terminal if terminal is not None else VertexHull.origin(model.n)
        return cls(N, model, gain, omega, x_bar, u_bar, terminal, **kw)

    def with_terminal(self, terminal: VertexHull) -> "MpscConfig":
        return MpscConfig(self.N, self.model, self.gain, self.omega, self.x_bar, self.u_bar,
                          terminal, self.solver_tol, self.max_iter, self.check_tol)

    @cached_property
    def program(self) -> "_Program":
        return _Program(self)

    @cached_property
    def pinned_program(self) -> "_Program":
        """Variant with ``u~`` fixed to the learning input (pure feasibility)."""
        return _Program(self, pin_input=True)


@dataclass
class MpscSolution:
    feasible: bool
    status: str
    z_traj: np.ndarray
    v_traj: np.ndarray
    u_tilde: np.ndarray
    hull_weights: np.ndarray
    objective: float
    kkt_residual: float
    violations: dict = field(default_factory=dict)


class _Program:
    """Static conic data for one configuration.

    Variable layout: ``[z_0..z_N, v_0..v_{N-1}, u~, lam]``.
    Rows: zero cone (dynamics, terminal, weights sum, feedback, optionally
    ``u~ = u_L``), nonnegative cone (state, input, lam >= 0), one second-order
    cone (tube).
    """

    def __init__(self, cfg: MpscConfig, pin_input=False):
        n, m, N = cfg.model.n, cfg.model.m, cfg.N
        A, B, K = cfg.model.A, cfg.model.B, cfg.gain.K
        F = cfg.terminal.vertices.T
        nf = F.shape[1]
        self.iz, self.iv, self.iu, self.il = 0, n * (N + 1), n * (N + 1) + m * N, n * (N + 1) + m * N + m
        nvar = self.il + nf
        self.shape = (n, m, N, nf, nvar)
        Zs = lambda i: slice(self.iz + n * i, self.iz + n * (i + 1))  # noqa: E731
        Vs = lambda i: slice(self.iv + m * i, self.iv + m * (i + 1))  # noqa: E731
        Us = slice(self.iu, self.iu + m)
        Ls = slice(self.il, nvar)

        blocks, rhs = [], []

        def row(k):
            # dense blocks: the program has a few hundred rows at most
            R = np.zeros((k, nvar))
            blocks.append(R)
            return R

        for i in range(N):
            R = row(n)
            R[:, Zs(i + 1)] = np.eye(n)
            R[:, Zs(i)] = -A
            R[:, Vs(i)] = -B
            rhs.append(np.zeros(n))
        R = row(n)
        R[:, Zs(N)] = np.eye(n)
        R[:, Ls] = -F
        rhs.append(np.zeros(n))
        R = row(1)
        R[0, Ls] = 1.0
        rhs.append(np.ones(1))
        R = row(m)
        R[:, Us] = np.eye(m)
        R[:, Vs(0)] = -np.eye(m)
        R[:, Zs(0)] = K
        self.feedback_row = sum(len(r) for r in rhs)
        rhs.append(np.zeros(m))  # K x, filled per solve
        self.pin_row = None
        if pin_input:
            R = row(m)
            R[:, Us] = np.eye(m)
            self.pin_row = sum(len(r) for r in rhs)
            rhs.append(np.zeros(m))  # u_L, filled per solve
        self.n_zero = sum(len(r) for r in rhs)

        Ax, bx = cfg.x_bar.A, cfg.x_bar.b
        Au, bu = cfg.u_bar.A, cfg.u_bar.b
        for i in range(N):
            R = row(len(bx))
            R[:, Zs(i)] = Ax
            rhs.append(bx)
            R = row(len(bu))
            R[:, Vs(i)] = Au
            rhs.append(bu)
        R = row(nf)
        R[:, Ls] = -np.eye(nf)
        rhs.append(np.zeros(nf))
        self.n_nonneg = sum(len(r) for r in rhs) - self.n_zero

        # ||L'(x - z_0)|| <= 1  as  s = (1, L'x - L'z_0) in SOC
        self.Lt = cfg.omega.chol.T
        R = row(n + 1)
        R[1:, Zs(0)] = self.Lt
        self.soc_row = sum(len(r) for r in rhs)
        rhs.append(np.concatenate([[1.0], np.zeros(n)]))

        self.A = sp.csc_matrix(np.vstack(blocks))
        self.b0 = np.concatenate(rhs)
        diag = np.zeros(nvar)
        if not pin_input:
            diag[self.iu:self.iu + m] = 2.0
        self.P = sp.diags(diag, format="csc")
        self.K = K
        self.opts = _conic.settings(cfg.solver_tol, cfg.max_iter)

    def data(self, x, u_learning):
        n, m, _, _, nvar = self.shape
        b = self.b0.copy()
        b[self.feedback_row:self.feedback_row + m] = self.K @ x
        b[self.soc_row + 1:self.soc_row + 1 + n] = self.Lt @ x
        q = np.zeros(nvar)
        if self.pin_row is None:
            q[self.iu:self.iu + m] = -2.0 * u_learning
        else:
            b[self.pin_row:self.pin_row + m] = u_learning
        return b, q

    def unpack(self, xs):
        n, m, N, nf, _ = self.shape
        z = xs[self.iz:self.iv].reshape(N + 1, n)
        v = xs[self.iv:self.iu].reshape(N, m)
        ut = xs[self.iu:self.iu + m]
        lam = xs[self.il:self.il + nf]
        return z, v, ut, lam


def _empty_solution(cfg, status, kkt=np.inf):
    n, m, N = cfg.model.n, cfg.model.m, cfg.N
    nan = np.nan
    return MpscSolution(False, status, np.full((N + 1, n), nan), np.full((N, m), nan),
                        np.full(m, nan), np.full(len(cfg.terminal), nan), np.inf, kkt)


def solve_mpsc(cfg: MpscConfig, x, u_learning, polish=POLISH) -> MpscSolution:
    """Solve the certification program at ``(x, u_learning)``.

    A ``feasible`` verdict is only returned after every constraint has been
    re-checked with plain arithmetic at ``cfg.check_tol``; anything the solver
    cannot settle is reported as ``unknown`` and treated as infeasible.

    Interior-point solutions carry a small bias away from ``u_L`` even when the
    learning input is certifiable.  If the optimal modification is below
    ``polish``, the program is re-solved with ``u~`` pinned to ``u_L``; when that
    pinned problem validates, it is returned with objective exactly zero.
    """
    n, m = cfg.model.n, cfg.model.m
    x = np.asarray(x, dtype=float).reshape(-1)
    u_learning = np.asarray(u_learning, dtype=float).reshape(-1)
    if x.shape != (n,) or u_learning.shape != (m,):
        raise DimensionError("state or learning input has the wrong size")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u_learning))):
        raise ValueError("state and learning input must be finite")
    sol = _solve(cfg, cfg.program, x, u_learning)
    if sol.feasible and 0.0 < sol.objective <= polish**2:
        pinned = _solve(cfg, cfg.pinned_program, x, u_learning)
        if pinned.feasible:
            return pinned
    return sol


def solve_pinned(cfg: MpscConfig, x, u_learning) -> MpscSolution:
    """Feasibility of the program with ``u~ = u_learning`` fixed."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u_learning = np.asarray(u_learning, dtype=float).reshape(-1)
    return _solve(cfg, cfg.pinned_program, x, u_learning)


def _solve(cfg, prog, x, u_learning):
    b, q = prog.data(x, u_learning)
    res = _conic.solve(prog.P, q, prog.A, b, prog.n_zero, prog.n_nonneg, (cfg.model.n + 1,),
                       prog.opts)
    kkt = max(res.r_prim, res.r_dual)
    if res.status == _conic.INFEASIBLE:
        return _empty_solution(cfg, INFEASIBLE, kkt)
    if res.status != _conic.SOLVED:
        return _empty_solution(cfg, UNKNOWN, kkt)
    z, v, ut, lam = prog.unpack(res.x)
    if prog.pin_row is not None:
        ut = u_learning.copy()
    obj = float(np.sum((u_learning - ut) ** 2))
    sol = MpscSolution(True, FEASIBLE, z, v, ut, lam, obj, kkt)
    report = validate_solution(cfg, x, sol)
    sol.violations = report
    if max(report.values()) > cfg.check_tol:
        sol.feasible = False
        sol.status = UNKNOWN
    return sol


def certify_pass_through(cfg: MpscConfig, x, u_learning, pass_tol=1e-10) -> bool:
    """True when ``u_learning`` itself is certified (``||u~ - u_L|| <= pass_tol``)."""
    sol = solve_mpsc(cfg, x, u_learning)
    return bool(sol.feasible and np.sqrt(sol.objective) <= pass_tol)


def validate_solution(cfg: MpscConfig, x, sol: MpscSolution) -> dict:
    """Maximum violation per constraint family, recomputed from scratch."""
    A, B, K = cfg.model.A, cfg.model.B, cfg.gain.K
    x = np.asarray(x, dtype=float).reshape(-1)
    z, v, ut, lam = sol.z_traj, sol.v_traj, sol.u_tilde, sol.hull_weights
    F = cfg.terminal.vertices
    dyn = np.abs(z[1:] - (z[:-1] @ A.T + v @ B.T)).max()
    state = max(0.0, float((z[:-1] @ cfg.x_bar.A.T - cfg.x_bar.b).max()))
    inp = max(0.0, float((v @ cfg.u_bar.A.T - cfg.u_bar.b).max()))
    hull = max(abs(float(lam.sum()) - 1.0), float(max(0.0, -lam.min())),
               float(np.abs(z[-1] - F.T @ lam).max()))
    e = x - z[0]
    tube = max(0.0, float(e @ cfg.omega.P @ e) - 1.0)
    feedback = float(np.abs(ut - v[0] - K @ e).max())
    return {"dynamics": float(dyn), "state": state, "input": inp, "hull": hull,
            "tube": tube, "feedback": feedback}


def tube_cannot_reach(cfg: MpscConfig, x) -> bool:
    """Cheap sufficient test for infeasibility: no ``z_0`` in the tightened
    state set lies within the tube of ``x``.

    Uses the support function: if some facet has ``a'x - b_bar > sqrt(a'P^-1 a)``
    then every ``z_0`` with ``x - z_0`` in the ellipsoid violates that facet.
    """
    x = np.asarray(x, dtype=float)
    A, b = cfg.x_bar.A, cfg.x_bar.b
    supp = np.sqrt(np.einsum("ij,jk,ik->i", A, cfg.omega.P_inv, A))
    return bool(np.any(A @ x - b > supp))


def terminal_distance(cfg: MpscConfig, z) -> float:
    return hull_gap(cfg.terminal, z)
