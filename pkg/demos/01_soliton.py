"""
A one-well sanity check against the sech soliton
================================================

On a long interval the least-energy positive solution of -w'' + w = w^3 is
sqrt(2) sech(x), whose energy is 4/3.  We solve for it with the scalar
Nehari descent and compare.
"""

# %%
import warnings

import numpy as np

from steepwell import Grid, Params, PotentialSpec, Well, WellGeometry, build_potentials, solve_scalar

# A box of half-width 24 with h = 0.02.  The a-well (-20, 20) is where the
# scalar problem lives; the b-well is a small placeholder far to the right.
grid = Grid(1, 2401, 24.0)
geom = WellGeometry([Well((0.0,), (20.0,))], [Well((22.6,), (0.5,))], margin=0.5)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")      # the placeholder well sits near the box edge
    pots = build_potentials(geom, PotentialSpec(a_inf=1.0, b_inf=1.0, ramp_width=0.5), grid)

# %%
# Solve on the bare well with a0 = 1, mu1 = 1.  Lambda plays no role here.
ref = solve_scalar(0, "a", pots, Params(lam=0.0, beta=0.0))
print(f"m = {ref.m:.8f}   (exact 4/3 = {4/3:.8f})   iterations = {ref.iterations}")

# %%
# Pointwise comparison with the closed-form profile.
x = grid.axis()
exact = np.sqrt(2) / np.cosh(x)
print("max |W - sqrt(2) sech x| =", float(np.max(np.abs(ref.W.values - exact))))
