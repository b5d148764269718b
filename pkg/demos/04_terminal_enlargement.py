"""
Growing the terminal set
========================

Every certified plan ends in a state from which the terminal controller can
keep the system safe.  Adding the nominal plans to the terminal hull enlarges
the set of states the filter can certify.

Run with ``python demos/04_terminal_enlargement.py``.
"""

# %%
from mpsc.harness import bundled_config_path, load_config, run_experiment

cfg = load_config(bundled_config_path("mass_spring_damper_enlargement"))
print("horizon", cfg.horizon, "start", cfg.x0)
res = run_experiment(cfg)

# %%
snaps = res.closed_loop.hull_snapshots
for k in sorted(snaps):
    print(f"after step {k:3d}: {len(snaps[k])} vertices, area {snaps[k].area():.5f}")
print("rollbacks:", len(res.closed_loop.log.rollbacks))
