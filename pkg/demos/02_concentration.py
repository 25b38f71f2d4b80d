"""
Ground states concentrate in the wells as lambda grows
======================================================

Two components, one well each, repulsive coupling.  As the well depth
parameter lambda increases the mass outside the wells drains away and the
energy on each well approaches four times the single-well least energy.
"""

# %%
from pathlib import Path

from steepwell.experiments import ExperimentConfig, run_lambda_sweep
from steepwell.solvers import solve_scalar

cfg = ExperimentConfig.load(Path(__file__).resolve().parents[1] / "configs" / "concentration.json")
print("config hash", cfg.hash[:12], "lambda values", cfg.sweep_values)

# %%
# Each row is a coupled ground state.  The sweep warm-starts from the
# previous lambda, which keeps the iteration counts low.
table = run_lambda_sweep(cfg)
for r in table.rows:
    print(f"lambda={r.value:>8g}  J={r.energy:.8f}  in [{r.lower:.6f}, {r.upper:.6f}]  "
          f"tail_a={r.tail_a:.3e}  iterations={r.iterations}")

# %%
# Compare the well energies at the largest lambda with 4 m_a, 4 m_b.
pots = cfg.build()
p = cfg.make_params(cfg.sweep_values[-1])
m_a = solve_scalar(0, "a", pots, p).m
m_b = solve_scalar(0, "b", pots, p).m
last = table.rows[-1]
print(f"well energy a: {last.well_energy_a[0]:.5f}  vs 4 m_a = {4 * m_a:.5f}")
print(f"well energy b: {last.well_energy_b[0]:.5f}  vs 4 m_b = {4 * m_b:.5f}")
