"""
A valuation where equal marginals lose
======================================

Stacked set-cover gap functions over F_2^k.  At every schedule point the
antagonist's lottery holds the protagonist well below v(M).
"""

# %%
from postedprices import (adversary_mu, best_response_value, build_lower_bound, lemma11_report,
                          proof_bound, q_schedule)

for k in (1, 2, 3):
    print(k, lemma11_report(k))

# %%
sv = build_lower_bound(2)
print("m =", sv.m, " v(M) =", sv.value((1 << sv.m) - 1))
for q in q_schedule(sv.m):
    mu = adversary_mu(sv, q)
    print(f"q={q:<7} best response={best_response_value(sv, q, mu):.4f}  bound={proof_bound(sv, q, mu):.4f}")
