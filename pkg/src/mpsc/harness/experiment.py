"""End-to-end experiment: measurements, tube design, filtered run, baseline, artifacts.

Random numbers come from numpy's ``Generator`` over the PCG64 bit generator,
seeded with the configured integer seed, so traces reproduce across platforms.
"""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .. import _conic
from ..core import MpscConfig, solve_mpsc
from ..enlargement import TubeSet, init_trivial
from ..errors import MpscError
from ..geometry import Ellipsoid, polytope_contains
from ..linsys import step_plant
from ..safety_filter import FilterState, run_closed_loop
from ..scenario import (RpiDesign, ScenarioBound, build_scenarios, design_rpi, lmi_matrix)
from . import output
from .config import ExperimentConfig

log = logging.getLogger(__name__)


def rng_for(seed, stream=0):
    """PCG64 generator for ``seed``; ``stream`` separates independent uses of one seed."""
    return np.random.Generator(np.random.PCG64([int(seed), int(stream)]))


@contextlib.contextmanager
def stage(name):
    """Tag toolkit errors raised inside the block with the pipeline stage."""
    try:
        yield
    except MpscError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


# --- measurements and design ------------------------------------------------


def sample_measurements(cfg: ExperimentConfig, count: int, seed: int, stream=0):
    """``count`` triples ``(x, u, y)`` with x uniform over X, u uniform over U and
    ``y`` the noise-free plant successor."""
    rng = rng_for(seed, stream)
    xs = cfg.state_set.sample_uniform(rng, count)
    us = cfg.input_set.sample_uniform(rng, count)
    return [(x, u, cfg.plant.A @ x + cfg.plant.B @ u) for x, u in zip(xs, us)]


def mismatch_samples(cfg: ExperimentConfig, count: int, seed: int, stream=0):
    return build_scenarios(sample_measurements(cfg, count, seed, stream), cfg.model)


def design(cfg: ExperimentConfig, samples=None) -> RpiDesign:
    samples = cfg.samples if samples is None else samples
    with stage("design"):
        scenarios = mismatch_samples(cfg, samples, cfg.seed)
        return design_rpi(scenarios, cfg.model, cfg.gain, tau_grid=cfg.tau_grid,
                          feas_tol=cfg.tolerances["lmi"], confidence=cfg.confidence)


def design_to_dict(d: RpiDesign, cfg: ExperimentConfig | None = None):
    out = d.to_dict()
    out["active_scenarios"] = d.active_scenarios
    if cfg is not None:
        out["seed"] = cfg.seed
    return out


def design_from_dict(data) -> RpiDesign:
    bound = ScenarioBound(int(data["N_s"]), int(data["n_s"]), float(data["epsilon_at_confidence"]),
                          float(data["confidence"]))
    return RpiDesign(Ellipsoid(np.asarray(data["P"], dtype=float)), float(data["tau"]),
                     float(data["worst_residual"]), bound, float(data.get("log_det", np.nan)),
                     int(data.get("active_scenarios", 0)))


def validate_design(cfg: ExperimentConfig, d: RpiDesign, trials: int, seed=None):
    """Out-of-sample check of the scenario certificate.

    Fresh mismatch disturbances are drawn from an independent random stream and
    the fraction violating the invariance LMI is compared with the design's
    epsilon plus three binomial standard errors.
    """
    seed = cfg.seed if seed is None else seed
    A_cl = cfg.gain.closed_loop
    tol = cfg.tolerances["lmi"]

    def violations(W):
        M = np.stack([lmi_matrix(d.omega, d.tau, A_cl, w) for w in W])
        return np.linalg.eigvalsh(M)[:, -1] > tol

    fresh = mismatch_samples(cfg, trials, seed, stream=1).samples
    in_sample = mismatch_samples(cfg, d.bound.N_s, seed).samples
    bad = violations(fresh)
    frac = float(bad.mean())
    eps = d.bound.epsilon
    limit = eps + 3.0 * np.sqrt(eps / trials)
    return {
        "trials": trials,
        "violations": int(bad.sum()),
        "violation_fraction": frac,
        "epsilon": eps,
        "confidence": d.bound.confidence,
        "limit": float(limit),
        "exceeds_limit": bool(frac > limit),
        "in_sample_violations": int(violations(in_sample).sum()),
        "N_s": d.bound.N_s,
    }


# --- closed loop ---------------------------------------------------------------


def build_filter(cfg: ExperimentConfig, d: RpiDesign) -> FilterState:
    with stage("filter"):
        mcfg = MpscConfig.from_constraints(cfg.horizon, cfg.model, cfg.gain, d.omega,
                                           cfg.state_set, cfg.input_set,
                                           solver_tol=cfg.tolerances["solver"],
                                           check_tol=cfg.tolerances["check"])
        _, ctrl = init_trivial(d.omega, cfg.gain)
        return FilterState(mcfg, ctrl, cfg.mode, pass_tol=cfg.tolerances["pass"])


def saturate(U, u):
    """Euclidean projection of ``u`` onto the input polytope (actuator saturation)."""
    u = np.asarray(u, dtype=float)
    if polytope_contains(U, u, 0.0):
        return u
    m = u.size
    res = _conic.solve(2.0 * np.eye(m), -2.0 * u, U.A, U.b, 0, len(U.b),
                       opts=_conic.settings(tol=1e-12))
    return np.asarray(res.x) if res.status == _conic.SOLVED else u


def run_baseline(cfg: ExperimentConfig, steps=None):
    """Apply the saturated learning input without the filter.

    Returns ``(states, inputs, learning_inputs, first_violation)`` where
    ``first_violation`` is the first step whose state leaves X (or ``None``).
    """
    steps = cfg.steps if steps is None else steps
    tol = cfg.tolerances["safety"]
    x = cfg.x0.copy()
    xs, us, uls, first = [x], [], [], None
    for k in range(steps):
        uL = cfg.signal(k)
        u = saturate(cfg.input_set, uL)
        x, _ = step_plant(cfg.plant, cfg.model, x, u)
        xs.append(x)
        us.append(u)
        uls.append(uL)
        if first is None and not polytope_contains(cfg.state_set, x, tol):
            first = k + 1
    return np.array(xs), np.array(us), np.array(uls), first


def safe_set_boundary(state: FilterState, count: int, rel_tol=1e-4):
    """Boundary points of the feasible set X_N in the plane, by ray bisection
    from the origin (X_N is convex and contains the origin here)."""
    cfg = state.cfg
    if cfg.model.n != 2:
        return np.zeros((0, cfg.model.n))
    zero = np.zeros(cfg.model.m)
    if not solve_mpsc(cfg, np.zeros(2), zero).feasible:
        return np.zeros((0, 2))
    lo_box, hi_box = cfg.x_bar.bounding_box()
    r_max = 2.0 * float(np.max(np.abs(np.concatenate([lo_box, hi_box])))) + 1.0
    pts = []
    for th in np.linspace(0.0, 2 * np.pi, count, endpoint=False):
        d = np.array([np.cos(th), np.sin(th)])
        lo, hi = 0.0, r_max
        while hi - lo > rel_tol * r_max:
            mid = 0.5 * (lo + hi)
            if solve_mpsc(cfg, mid * d, zero).feasible:
                lo = mid
            else:
                hi = mid
        pts.append(lo * d)
    return np.array(pts)


def terminal_boundary(tube: TubeSet, count: int):
    """Boundary samples of ``hull (+) omega``: hull of the Minkowski-sum samples."""
    pts = tube.boundary_samples(count)
    if tube.hull.dim != 2:
        return pts
    try:
        return pts[ConvexHull(pts).vertices]
    except QhullError:
        return pts


@dataclass
class ExperimentResult:
    design: RpiDesign
    closed_loop: object
    baseline_first_violation: int | None
    summary: dict
    files: dict = field(default_factory=dict)


def _margins(poly, pts):
    return poly.b[None, :] - pts @ poly.A.T


def summarize(cfg, d, result, baseline_first):
    traj = result.trajectory
    decisions = result.decisions
    gaps = np.linalg.norm(traj.inputs - result.learning_inputs, axis=1)
    interfered = np.array([dd.interfered for dd in decisions])
    tol = cfg.tolerances["safety"]
    xm = _margins(cfg.state_set, traj.states).min(axis=1)
    um = _margins(cfg.input_set, traj.inputs).min(axis=1)
    branches = {}
    for dd in decisions:
        branches[dd.branch] = branches.get(dd.branch, 0) + 1
    summary = {
        "name": cfg.name,
        "seed": cfg.seed,
        "steps": cfg.steps,
        "horizon": cfg.horizon,
        "mode": cfg.mode,
        "start_verdict": result.start_verdict,
        "design": design_to_dict(d),
        "interference": {
            "count": int(interfered.sum()),
            "pass_fraction": float(1.0 - interfered.mean()),
            "threshold": cfg.tolerances["pass"],
            "max_gap": float(gaps.max()),
        },
        "branches": dict(sorted(branches.items())),
        "feasible_steps": int(sum(dd.feasible for dd in decisions)),
        "constraints": {
            "state_violations": int(np.sum(xm < -tol)),
            "input_violations": int(np.sum(um < -tol)),
            "min_state_margin": float(xm.min()),
            "min_input_margin": float(um.min()),
        },
        "baseline_first_violation": baseline_first,
        "final_state": traj.states[-1].tolist(),
    }
    if cfg.enlarge:
        summary["enlargement"] = {
            "snapshots": {str(k): {"vertices": len(h), "area": h.area() if h.dim == 2 else None}
                          for k, h in sorted(result.hull_snapshots.items())},
            "rollbacks": len(result.log.rollbacks),
            "final_vertices": result.log.hull_sizes[-1] if result.log.hull_sizes else 1,
        }
    return summary


def run_experiment(cfg: ExperimentConfig, d: RpiDesign | None = None, out_dir=None,
                   plots=True) -> ExperimentResult:
    """Design (unless given), filtered closed loop, unfiltered baseline and artifacts.

    With ``out_dir`` the bundle ``trace.csv``, ``baseline.csv``, ``sets.json``,
    ``summary.json``, ``phase.svg`` and ``inputs.svg`` is written there.
    """
    if d is None:
        d = design(cfg)
    state = build_filter(cfg, d)
    with stage("filter"):
        result = run_closed_loop(state, cfg.plant, cfg.model, cfg.x0, cfg.signal, cfg.steps,
                                 enlarge=cfg.enlarge, cadence=cfg.cadence, measured=cfg.measured,
                                 snapshots=cfg.snapshots)
    with stage("baseline"):
        bx, bu, bl, first = run_baseline(cfg, cfg.baseline_steps)
    summary = summarize(cfg, d, result, first)
    out = ExperimentResult(d, result, first, summary)
    if out_dir is None:
        return out

    with stage("output"):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = {name: out_dir / name for name in
                 ("trace.csv", "baseline.csv", "sets.json", "summary.json")}
        output.write_trace(files["trace.csv"], result)
        output.write_baseline_trace(files["baseline.csv"], bx, bu, bl)
        sf = terminal_boundary(state.terminal_set, cfg.boundary_samples)
        xn = safe_set_boundary(state, cfg.boundary_samples) if plots else np.zeros((0, 2))
        output.write_json(files["sets.json"], {
            "omega": d.omega.to_dict(),
            "state_constraints": cfg.state_set.to_dict(),
            "input_constraints": cfg.input_set.to_dict(),
            "tightened_state": state.cfg.x_bar.to_dict(),
            "tightened_input": state.cfg.u_bar.to_dict(),
            "terminal_hull": state.cfg.terminal.to_dict(),
            "terminal_boundary_samples": sf,
            "safe_set_boundary_samples": xn,
            "hull_snapshots": {str(k): h.to_dict() for k, h in sorted(result.hull_snapshots.items())},
        })
        output.write_json(files["summary.json"], summary)
        if plots and cfg.model.n >= 2:
            lo, hi = cfg.state_set.bounding_box()
            ulo, uhi = cfg.input_set.bounding_box()
            files["phase.svg"] = out_dir / "phase.svg"
            files["inputs.svg"] = out_dir / "inputs.svg"
            interfered = [dd.interfered for dd in result.decisions]
            output.phase_plot(files["phase.svg"], result.trajectory.states[:-1], interfered,
                              (lo, hi), xn, sf, bx)
            output.input_plot(files["inputs.svg"], result.learning_inputs,
                              result.trajectory.inputs, (ulo[0], uhi[0]))
    out.files = {k: str(v) for k, v in files.items()}
    return out
