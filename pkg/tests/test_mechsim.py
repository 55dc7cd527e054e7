import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from postedprices import (Additive, Instance, ValuationDistribution, compute_prices_exact,
                          competitive_ratio, expected_outcome, expected_welfare, run_posted_price,
                          schedule_bound, verify_utility_bound)
from postedprices.generators import gen_instance, random_subadditive


class TestRun:
    def test_single_item(self):
        run = run_posted_price([Additive([1]), Additive([2])], [1.5], (0, 1))
        assert run.allocation[1].bits == 1 and run.allocation[0].bits == 0
        assert run.welfare == 2 and run.revenue == 1.5
        assert run.utilities[1] == pytest.approx(0.5)

    def test_zero_prices(self, rng):
        prof = [Additive([1, 2, 3]), random_subadditive(3, rng)]
        run = run_posted_price(prof, [0, 0, 0])
        assert run.allocation[0].bits == 7 and run.welfare == 6

    def test_two_buyers(self):
        run = run_posted_price([Additive([3, 0]), Additive([0, 3])], [1, 1])
        assert run.welfare == 6 and run.revenue == 2

    def test_order(self):
        run = run_posted_price([Additive([1]), Additive([2])], [0.5], (1, 0))
        assert run.allocation[1].bits == 1 and run.order == (1, 0)

    @given(st.integers(0, 10_000))
    def test_accounting_and_optimality(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        prof = [random_subadditive(m, rng) for _ in range(n)]
        p = rng.random(m) * rng.choice([0.3, 1.0])
        order = tuple(rng.permutation(n))
        run = run_posted_price(prof, p, order)
        assert abs(run.welfare - run.utilities.sum() - run.revenue) <= 1e-9
        sold = 0
        for i in order:
            S = run.allocation[i].bits
            assert S & sold == 0
            avail = ((1 << m) - 1) & ~sold
            u = prof[i].value(S) - sum(p[j] for j in range(m) if S >> j & 1)
            for T in range(1 << m):
                if T & ~avail == 0:
                    assert u >= prof[i].value(T) - sum(p[j] for j in range(m) if T >> j & 1) - 1e-9
            sold |= S
        assert sold == run.sold.bits
        assert np.all(run.utilities >= -1e-12)

    def test_predecessors_only(self, rng):
        # what is sold before buyer i depends only on earlier buyers
        prof = [random_subadditive(4, rng) for _ in range(3)]
        p = rng.random(4) * 0.5
        base = run_posted_price(prof, p, (0, 1, 2))
        alt = run_posted_price(prof[:2] + [random_subadditive(4, rng)], p, (0, 1, 2))
        assert base.allocation[0] == alt.allocation[0]
        assert base.allocation[1] == alt.allocation[1]


class TestExpectations:
    def test_deterministic(self, rng):
        prof = [random_subadditive(3, rng) for _ in range(2)]
        p = [0.2, 0.3, 0.1]
        assert expected_welfare(Instance.deterministic(prof), p) == pytest.approx(
            run_posted_price(prof, p).welfare)

    def test_mc_seeded(self):
        inst = gen_instance("xos-random", 3, 2, 3, seed=2)
        a = expected_welfare(inst, [0.1] * 3, n_samples=50, seed=4)
        assert a == expected_welfare(inst, [0.1] * 3, n_samples=50, seed=4)

    def test_two_profile_average(self, rng):
        vs = [random_subadditive(3, rng) for _ in range(2)]
        inst = Instance(3, [ValuationDistribution([(0.3, vs[0]), (0.7, vs[1])])])
        p = [0.2, 0.2, 0.2]
        want = 0.3 * run_posted_price([vs[0]], p).welfare + 0.7 * run_posted_price([vs[1]], p).welfare
        assert expected_welfare(inst, p) == pytest.approx(want)

    def test_ratio_single_agent_free(self, rng):
        inst = Instance.deterministic([random_subadditive(4, rng)])
        assert competitive_ratio(inst, np.zeros(4)) == pytest.approx(1.0)

    def test_ratio_zero_welfare(self):
        inst = Instance.deterministic([Additive([1, 1])])
        assert competitive_ratio(inst, [5, 5]) == np.inf

    def test_guarantee(self):
        for seed in range(6):
            inst = gen_instance("table-random-subadditive", 4, 2, 2, seed=seed)
            p = compute_prices_exact(inst).prices
            for order in itertools.permutations(range(2)):
                r = competitive_ratio(inst, p, order)
                assert 1 - 1e-9 <= r <= 1 / schedule_bound(4) + 0.01


class TestUtilityBound:
    def test_deterministic_reduces(self, rng):
        prof = [random_subadditive(3, rng) for _ in range(2)]
        inst = Instance.deterministic(prof)
        ex = compute_prices_exact(inst)
        rep = verify_utility_bound(inst, ex.prices, ex.lambdas, 1 / schedule_bound(3))
        run = run_posted_price(prof, ex.prices)
        assert rep.sold_price == pytest.approx(ex.prices.total(run.sold))
        assert rep.slack >= -1e-5

    @given(st.integers(0, 2000))
    def test_exact_prices(self, seed):
        inst = gen_instance("xos-random", 3, 2, 2, seed=seed)
        ex = compute_prices_exact(inst)
        rep = verify_utility_bound(inst, ex.prices, ex.lambdas, 1 / schedule_bound(3))
        assert rep.slack >= -1e-5
        assert rep.hallucination_slack >= -1e-5
        assert rep.hallucination + rep.sold_price >= ex.gap - 1e-5

    def test_vacuous(self):
        inst = gen_instance("unit-demand", 3, 2, 2, seed=1)
        lam = compute_prices_exact(inst).lambdas
        rep = verify_utility_bound(inst, np.zeros(3), lam, np.inf)
        assert rep.slack >= -1e-9

    def test_plain_list(self, rng):
        prof = [random_subadditive(3, rng)]
        inst = Instance.deterministic(prof)
        ex = compute_prices_exact(inst)
        rep = verify_utility_bound(inst, ex.prices, next(iter(ex.lambdas.values())), 8.0)
        assert np.isfinite(rep.slack)


def test_expected_outcome_fields():
    inst = gen_instance("additive-iid", 3, 2, 2, seed=0)
    out = expected_outcome(inst, [0.3] * 3)
    assert out.samples == 4
    assert out.welfare == pytest.approx(out.utilities.sum() + out.revenue)
