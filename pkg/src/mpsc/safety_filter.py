"""Online safety filter built on the certification program.

Two modes:

``algorithm1``
    General safe terminal set.  Certified inputs are applied while the program
    is feasible.  After a feasibility loss the stored nominal plan is tracked
    with the tube feedback (``v*_k + K (x - z*_k)``, k = 1..N-1 steps since the
    last certified step), after which the terminal safe controller takes over.
    The counter starts at N-1 so an initially infeasible state in the terminal
    set goes straight to the terminal controller.

``recursive``
    Invariant nominal terminal set; the certified input is applied at every
    step and a feasibility loss after a feasible step is a hard error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import MpscConfig, MpscSolution, solve_mpsc
from .enlargement import (EnlargementLog, MeasuredSafeSets, TerminalController, TubeSet,
                          enlarge_measured, enlarge_nominal, terminal_control)
from .errors import RecursiveFeasibilityError, SafetyFault
from .linsys import LinearModel, Trajectory, step_plant

ALGORITHM1 = "algorithm1"
RECURSIVE = "recursive"
MODES = (ALGORITHM1, RECURSIVE)

CERTIFIED = "certified"
BACKUP_TUBE = "backup_tube"
TERMINAL = "terminal_controller"

IN_XN = "in_X_N"
IN_TERMINAL = "in_terminal_only"
OUTSIDE = "outside"


@dataclass
class FilterState:
    cfg: MpscConfig
    terminal_controller: TerminalController
    mode: str = ALGORITHM1
    last_solution: MpscSolution | None = None
    k_inf: int = -1
    pass_tol: float = 1e-10
    measured: MeasuredSafeSets | None = None
    log: EnlargementLog = field(default_factory=EnlargementLog)
    ever_feasible: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.k_inf < 0:
            self.k_inf = self.cfg.N - 1

    @property
    def terminal_set(self) -> TubeSet:
        return TubeSet(self.cfg.terminal, self.cfg.omega)


@dataclass
class FilterDecision:
    applied_input: np.ndarray
    interfered: bool
    branch: str
    objective: float
    k_inf: int
    feasible: bool
    solution: MpscSolution | None = None


def _terminal_input(state: FilterState, x, u_learning):
    if state.terminal_set.contains(x):
        return terminal_control(state.terminal_controller, state.cfg.terminal, x)
    if state.measured is not None and state.measured.measured is not None \
            and state.measured.measured.contains(x):
        # states in the hull of certified states are feasible by convexity
        sol = solve_mpsc(state.cfg, x, u_learning)
        if sol.feasible:
            return sol.u_tilde
    raise SafetyFault("terminal controller called outside the terminal safe set",
                      {"x": np.asarray(x).tolist(), "k_inf": state.k_inf})


def filter_step(state: FilterState, x, u_learning):
    """One filter step; mutates and returns ``state`` alongside the decision."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u_learning = np.asarray(u_learning, dtype=float).reshape(-1)
    cfg = state.cfg
    sol = solve_mpsc(cfg, x, u_learning)

    if sol.feasible:
        state.last_solution = sol
        state.k_inf = 0
        state.ever_feasible = True
        applied, branch = sol.u_tilde.copy(), CERTIFIED
    elif state.mode == RECURSIVE:
        if state.ever_feasible:
            raise RecursiveFeasibilityError(
                "certification program lost feasibility in recursive mode",
                {"x": x.tolist(), "u_learning": u_learning.tolist(), "status": sol.status,
                 "kkt_residual": sol.kkt_residual,
                 "last_solution": None if state.last_solution is None else {
                     "z": state.last_solution.z_traj.tolist(),
                     "v": state.last_solution.v_traj.tolist()}})
        applied, branch = _terminal_input(state, x, u_learning), TERMINAL
    else:
        state.k_inf = min(state.k_inf + 1, cfg.N)
        j = state.k_inf
        if 1 <= j <= cfg.N - 1 and state.last_solution is not None:
            z_j = state.last_solution.z_traj[j]
            v_j = state.last_solution.v_traj[j]
            applied, branch = v_j + cfg.gain.K @ (x - z_j), BACKUP_TUBE
        else:
            applied, branch = _terminal_input(state, x, u_learning), TERMINAL

    gap = float(np.linalg.norm(applied - u_learning))
    decision = FilterDecision(applied, gap > state.pass_tol, branch,
                              sol.objective if sol.feasible else float("nan"),
                              state.k_inf, sol.feasible, sol)
    return decision, state


def is_in_safe_set(state: FilterState, x) -> str:
    x = np.asarray(x, dtype=float).reshape(-1)
    sol = solve_mpsc(state.cfg, x, np.zeros(state.cfg.model.m))
    if sol.feasible:
        return IN_XN
    if state.terminal_set.contains(x):
        return IN_TERMINAL
    if state.measured is not None and state.measured.contains(x):
        return IN_TERMINAL
    return OUTSIDE


@dataclass
class ClosedLoopResult:
    trajectory: Trajectory
    learning_inputs: np.ndarray
    decisions: list
    hull_snapshots: dict
    start_verdict: str
    log: EnlargementLog


def run_closed_loop(state: FilterState, plant: LinearModel, model: LinearModel, x0, signal,
                    steps, noise=None, enlarge=False, cadence=1, measured=False,
                    snapshots=()):
    """Iterate filter and plant for ``steps`` steps.

    ``signal(k)`` gives the learning input; ``noise(k)`` (optional) an additive
    plant disturbance.  With ``enlarge`` the nominal terminal hull grows from
    every ``cadence``-th certified solution; ``measured`` maintains the
    measured-state safe-set list.  ``snapshots`` lists steps after which the
    nominal hull is recorded.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    start = is_in_safe_set(state, x)
    if measured and state.measured is None:
        state.measured = MeasuredSafeSets(state.terminal_set)
    snapshots = set(snapshots)
    xs, us, uls, ws, decisions, hulls = [x], [], [], [], [], {}
    for k in range(steps):
        uL = np.asarray(signal(k), dtype=float).reshape(-1)
        try:
            decision, state = filter_step(state, x, uL)
        except SafetyFault as exc:
            exc.dump.setdefault("k", k)
            exc.dump.setdefault("states", np.array(xs).tolist())
            raise
        if decision.branch == CERTIFIED:
            sol = decision.solution
            state.log.record(k, x, sol)
            if enlarge and k % cadence == 0:
                hull, ctrl = enlarge_nominal(state.log, state.cfg.terminal,
                                             state.terminal_controller, sol)
                if hull is not state.cfg.terminal:
                    state.cfg = state.cfg.with_terminal(hull)
                    state.terminal_controller = ctrl
            if measured:
                state.measured = enlarge_measured(state.log, state.measured, x)
        if k in snapshots:
            hulls[k] = state.cfg.terminal
        w_k = None if noise is None else noise(k)
        x_next, w = step_plant(plant, model, x, decision.applied_input, w_k)
        decisions.append(decision)
        uls.append(uL)
        us.append(decision.applied_input)
        ws.append(w)
        xs.append(x_next)
        x = x_next
    if steps in snapshots:
        hulls[steps] = state.cfg.terminal
    traj = Trajectory(np.array(xs), np.array(us).reshape(steps, -1),
                      np.array(ws).reshape(steps, -1))
    return ClosedLoopResult(traj, np.array(uls).reshape(steps, -1), decisions, hulls, start,
                            state.log)
