"""Linear models, nominal/plant propagation and the tube feedback gain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DimensionError

EIG_RESIDUAL_TOL = 1e-10


def _as_matrix(M, name):
    M = np.array(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    M.setflags(write=False)
    return M


def _as_vector(v, size, name):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (size,):
        raise DimensionError(f"{name} must have {size} entries, got {v.size}")
    return v


@dataclass(frozen=True)
class LinearModel:
    """Discrete-time model ``x+ = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
        if B.shape[1] < 1:
            raise DimensionError("B needs at least one column")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TubeGain:
    """Error feedback gain ``K`` (u = v + K (x - z)) paired with the model it stabilizes.

    Construction fails unless ``A + B K`` is Schur stable.
    """

    K: np.ndarray
    model: LinearModel

    def __post_init__(self):
        K = _as_matrix(self.K, "K")
        if K.shape != (self.model.m, self.model.n):
            raise DimensionError(f"K must be {self.model.m}x{self.model.n}, got {K.shape}")
        object.__setattr__(self, "K", K)
        rho = spectral_radius(self.closed_loop)
        if not rho < 1.0:
            raise ValueError(f"A + B K is not Schur stable (spectral radius {rho:.6g})")

    @property
    def closed_loop(self) -> np.ndarray:
        return self.model.A + self.model.B @ self.K


@dataclass
class Trajectory:
    """Closed-loop record: ``states`` is (T+1, n), ``inputs`` is (T, m)."""

    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray = field(default=None)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.states.ndim != 2 or self.inputs.ndim != 2:
            raise DimensionError("states and inputs must be 2-D arrays (time x dim)")
        if len(self.inputs) != len(self.states) - 1:
            raise DimensionError("a trajectory has exactly one fewer input than states")
        if self.disturbances is not None:
            self.disturbances = np.asarray(self.disturbances, dtype=float)
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.inputs))):
            raise ValueError("trajectory has non-finite entries")

    def __len__(self):
        return len(self.inputs)


def step_nominal(model: LinearModel, z, v) -> np.ndarray:
    z = _as_vector(z, model.n, "z")
    v = _as_vector(v, model.m, "v")
    return model.A @ z + model.B @ v


def step_plant(plant: LinearModel, model: LinearModel, x, u, noise=None):
    """Advance the true plant one step.

    Returns ``(next_x, realized_w)`` where ``realized_w`` is the mismatch
    against the belief ``model``.  ``noise`` is an optional additive term
    already drawn by the caller; it is included in both outputs.
    """
    if (plant.n, plant.m) != (model.n, model.m):
        raise DimensionError("plant and model dimensions differ")
    x = _as_vector(x, plant.n, "x")
    u = _as_vector(u, plant.m, "u")
    next_x = plant.A @ x + plant.B @ u
    if noise is not None:
        next_x = next_x + _as_vector(noise, plant.n, "noise")
    realized_w = next_x - (model.A @ x + model.B @ u)
    return next_x, realized_w


def apply_tube_feedback(gain: TubeGain, v, x, z) -> np.ndarray:
    n, m = gain.model.n, gain.model.m
    v = _as_vector(v, m, "v")
    x = _as_vector(x, n, "x")
    z = _as_vector(z, n, "z")
    return v + gain.K @ (x - z)


def riccati_residual(model: LinearModel, Q, R, P) -> float:
    A, B = model.A, model.B
    S = R + B.T @ P @ B
    rhs = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(S, B.T @ P @ A)
    scale = max(1.0, np.abs(P).max())
    return float(np.abs(P - rhs).max() / scale)


def lqr_gain(model: LinearModel, Q, R, tol=1e-12, max_iter=100_000) -> TubeGain:
    """Infinite-horizon discrete LQR gain with sign convention ``u = K x``.

    The Riccati equation is solved by fixed-point iteration from ``P = Q``.
    """
    A, B = model.A, model.B
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    if Q.shape != (model.n, model.n) or R.shape != (model.m, model.m):
        raise DimensionError("Q must be n x n and R must be m x m")
    P = Q.copy()
    res = np.inf
    for _ in range(max_iter):
        S = R + B.T @ P @ B
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(S, B.T @ P @ A)
        P_next = 0.5 * (P_next + P_next.T)
        step = np.abs(P_next - P).max() / max(1.0, np.abs(P_next).max())
        P = P_next
        if step < tol:
            res = riccati_residual(model, Q, R, P)
            if res < 1e-9:
                break
    else:
        res = riccati_residual(model, Q, R, P)
        raise ConvergenceError(f"Riccati iteration did not converge (scaled residual {res:.3g})")
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return TubeGain(K, model)


def spectral_radius(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {M.shape}")
    w, V = np.linalg.eig(M)
    scale = max(1.0, np.abs(M).max())
    resid = np.abs(M @ V - V * w).max() / scale
    if resid > EIG_RESIDUAL_TOL:
        raise ConvergenceError(f"eigensolver residual {resid:.3g} exceeds {EIG_RESIDUAL_TOL}")
    return float(np.abs(w).max())
