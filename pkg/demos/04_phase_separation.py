"""
Strong repulsion between adjacent wells
=======================================

Two wells separated by a thin gap and a shallow plateau, so the components
do touch.  We push beta toward -infinity and watch the interaction terms.
Both |beta| * int u^2 v^2 and beta^2 * int u^2 v^2 grow over this range.
Extending the sweep to beta = -1e6 shows the first one peaking near -1e4
and then falling, while the second keeps growing roughly like |beta|^(3/4),
since the interface only thins like |beta|^(-1/4).
"""

# %%
from pathlib import Path

from steepwell.experiments import ExperimentConfig, run_beta_sweep

cfg = ExperimentConfig.load(Path(__file__).resolve().parents[1] / "configs" / "phase_separation.json")
table = run_beta_sweep(cfg)

# %%
for r, res in zip(table.rows, table.results):
    w = res.u.grid.weights()
    inner = float((w * res.u.values**2 * res.v.values**2).sum())
    print(f"beta={r.value:>8g}  beta^2*I={r.overlap:.3e}  |beta|*I={abs(r.value) * inner:.3e}  "
          f"eps-overlap share={r.eps_overlap:.3f}")
