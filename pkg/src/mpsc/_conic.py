"""Thin wrapper around Clarabel for the small conic programs used here.

Problems are posed as

    minimize    0.5 x'Px + q'x
    subject to  A x + s = b,  s in K

with K a product of (zero, nonnegative, second-order) cones in that order.
"""

from dataclasses import dataclass

import clarabel
import numpy as np
import scipy.sparse as sp

SOLVED = "solved"
INFEASIBLE = "infeasible"
UNKNOWN = "unknown"

_STATUS = {
    "Solved": SOLVED,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
}


@dataclass
class ConicResult:
    status: str
    x: np.ndarray
    objective: float
    r_prim: float
    r_dual: float
    iterations: int


def settings(tol=1e-8, max_iter=200):
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.tol_feas = tol
    s.tol_gap_abs = tol
    s.tol_gap_rel = tol
    s.max_iter = max_iter
    # single-threaded keeps results reproducible across machines
    s.max_threads = 1
    return s


def solve(P, q, A, b, n_zero, n_nonneg, soc_sizes=(), opts=None):
    P = sp.csc_matrix(sp.triu(sp.csc_matrix(P)))
    A = sp.csc_matrix(A)
    cones = []
    if n_zero:
        cones.append(clarabel.ZeroConeT(n_zero))
    if n_nonneg:
        cones.append(clarabel.NonnegativeConeT(n_nonneg))
    for k in soc_sizes:
        cones.append(clarabel.SecondOrderConeT(k))
    solver = clarabel.DefaultSolver(P, np.asarray(q, float), A, np.asarray(b, float), cones,
                                    opts or settings())
    sol = solver.solve()
    status = _STATUS.get(str(sol.status), UNKNOWN)
    return ConicResult(status, np.array(sol.x), float(sol.obj_val), float(sol.r_prim),
                       float(sol.r_dual), int(sol.iterations))
