"""
Capped configuration LP
=======================

Welfare with per-item marginal caps, solved densely and by column generation.
"""

# %%
import numpy as np

from postedprices import XOS, Additive, UnitDemand, f_value, solve_config_lp

profile = [Additive([1.0, 0.4, 0.7]), UnitDemand([0.9, 0.9, 0.2]), XOS([[0.5, 0.5, 0.5], [1, 0, 0]])]

# %%
# f(q) is concave and grows to the unconstrained optimum at q = 1.
for q in (0.0, 0.25, 0.5, 1.0):
    print(f"f({q}) = {f_value(profile, q) + 0.0:.4f}")

# %%
dense = solve_config_lp(profile, 0.5, "dense")
col = solve_config_lp(profile, 0.5, "colgen")
print("objectives", dense.objective, col.objective)
print("duality gaps", dense.duality_gap, col.duality_gap)
print("item duals", np.round(dense.y, 4))
