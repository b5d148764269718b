"""
Certifying a single learning input
==================================

Given a state and a proposed input, the certification program searches for a
nominal plan that starts with the proposal (or something close to it), keeps
the tube inside the constraints and ends in the terminal set.

Run with ``python demos/02_certify_inputs.py``.
"""

# %%
import numpy as np

from mpsc import solve_mpsc
from mpsc.harness import bundled_config_path, design, load_config
from mpsc.harness.experiment import build_filter

cfg = load_config(bundled_config_path())
state = build_filter(cfg, design(cfg))
mcfg = state.cfg
print("tightened input bound:", mcfg.u_bar.b)

# %% [markdown]
# A gentle input at the origin passes unchanged: the objective is zero.

# %%
sol = solve_mpsc(mcfg, [0.0, 0.0], [0.5])
print(sol.status, sol.u_tilde, sol.objective)

# %% [markdown]
# At the start of the mass-spring-damper run the mass is moving fast towards
# the upper velocity bound, so the filter must brake.

# %%
sol = solve_mpsc(mcfg, [-0.7, 1.0], [0.0])
print(sol.status, "u~ =", np.round(sol.u_tilde, 4), "objective =", round(sol.objective, 4))
print("nominal plan (first 5 states):\n", np.round(sol.z_traj[:5], 3))

# %% [markdown]
# Far outside the constraints no plan exists.

# %%
print(solve_mpsc(mcfg, [10.0, 10.0], [0.0]).status)
