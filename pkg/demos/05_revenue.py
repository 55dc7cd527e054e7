"""
Entry fees and rationed prices
==============================

Anonymous prices with a median entry fee, compared with one-item personalised prices.
"""

# %%
import numpy as np

from postedprices import Instance, entry_fee_bound_check, run_aspe, run_rspm, tradeoff_constant
from postedprices.generators import independent_items_distribution

rng = np.random.default_rng(11)
inst = Instance(3, [independent_items_distribution(3, rng, "xos") for _ in range(2)])
prices, beta = np.full(3, 0.2), np.full((2, 3), 0.3)

# %%
aspe = run_aspe(inst, prices, beta)
print(f"ASPE revenue {aspe.revenue:.4f} (items {aspe.item_revenue:.4f}, fees {aspe.fee_revenue:.4f})")
rspm = run_rspm(inst, np.full((2, 3), 0.4))
print(f"RSPM revenue {rspm.revenue:.4f}")

# %%
rep = entry_fee_bound_check(inst, prices, beta)
print("fee revenue", round(rep.fee_revenue, 4), "slack", round(rep.slack, 4))
print("tradeoff constant at b = 1/2:", tradeoff_constant(0.5))
