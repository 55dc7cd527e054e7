"""
Posted prices and the prophet benchmark
=======================================

Exact prices for a small Bayesian instance, then welfare under every arrival order.
"""

# %%
import itertools

from postedprices import compute_prices_exact, expected_outcome, schedule_bound
from postedprices.generators import gen_instance

inst = gen_instance("xos-random", 4, 3, 2, seed=5)
ex = compute_prices_exact(inst)
print("chosen q:", ex.q, "prices:", ex.prices.values.round(4))

# %%
for order in itertools.permutations(range(inst.n)):
    out = expected_outcome(inst, ex.prices, order)
    print(order, f"E[ALG]={out.welfare:.4f}  E[OPT]={out.opt:.4f}  ratio={out.opt / out.welfare:.3f}")
print("worst ratio allowed:", 1 / schedule_bound(inst.m))

# %%
# Sampling-based prices approach the exact ones as epsilon shrinks.
from postedprices import compute_prices, sample_counts

for eps in (4.0, 2.0, 1.0):
    plan = sample_counts(inst.m, inst.n, eps, 0.1, seed=1)
    p, diag = compute_prices(inst, plan)
    print(f"eps={eps}: N={plan.n1}, max |p - p_exact| = {abs(p.values - ex.prices.values).max():.4f}")
