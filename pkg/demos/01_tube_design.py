"""
Designing the tube from measured mismatch
=========================================

The filter plans with a nominal model, but the real plant differs from it.
This script samples state/input/successor triples from the plant, turns them
into model-mismatch residuals and designs the smallest ellipsoid that stays
invariant under the tube feedback for every sampled residual.

Run with ``python demos/01_tube_design.py``.
"""

# %%
import numpy as np

from mpsc import build_scenarios, design_rpi, epsilon_for_confidence, scenario_confidence
from mpsc.harness import bundled_config_path, load_config, sample_measurements
from mpsc.scenario import lmi_residual

cfg = load_config(bundled_config_path())
print("model A\n", cfg.model.A)
print("plant A\n", cfg.plant.A)

# %% [markdown]
# Measurements are drawn uniformly from the state and input boxes.  The
# residual is the part of the successor the model does not explain.

# %%
data = sample_measurements(cfg, cfg.samples, cfg.seed)
scen = build_scenarios(data, cfg.model)
W = scen.samples
print(f"{len(scen)} residuals, w2 in [{W[:, 1].min():.4f}, {W[:, 1].max():.4f}]")

# %% [markdown]
# The design maximises the log-determinant of P^-1 subject to one LMI per
# residual, sweeping the contraction factor tau.

# %%
d = design_rpi(scen, cfg.model, cfg.gain, confidence=cfg.confidence)
np.set_printoptions(precision=4, suppress=True)
print("P =\n", d.omega.P)
print(f"tau = {d.tau:.4f}, worst residual = {d.worst_residual:.2e}")
A_cl = cfg.gain.closed_loop
print("largest re-checked residual:", max(lmi_residual(d.omega, d.tau, A_cl, w) for w in W))

# %% [markdown]
# How much probability mass of future residuals may violate the design?

# %%
n_s = d.bound.n_s
eps = epsilon_for_confidence(len(scen), n_s, cfg.confidence)
print(f"with {len(scen)} samples and {n_s} decision variables: epsilon = {eps:.5f} "
      f"at confidence {scenario_confidence(len(scen), n_s, eps):.4f}")
