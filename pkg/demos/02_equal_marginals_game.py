"""
The equal-marginals game
========================

A protagonist picks a bundle lottery, an antagonist removes items from it, both
constrained to marginals at most q.  Its value lower-bounds f(q) - f(q^2).
"""

# %%
import numpy as np

from postedprices import f_value, game_value, q_schedule, schedule_bound
from postedprices.generators import random_subadditive

rng = np.random.default_rng(3)
v = random_subadditive(8, rng)
vM = v.value((1 << 8) - 1)

# %%
for q in q_schedule(8):
    g = game_value(v, None, q)
    drop = f_value([v], q) - f_value([v], q * q)
    print(f"q={q:<8} g={g.value:.4f}  f(q)-f(q^2)={drop:.4f}")

# %%
print("guaranteed share of v(M):", schedule_bound(8) * vM, "out of", vM)
