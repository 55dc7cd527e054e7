import itertools
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from postedprices import (Additive, InputError, Instance, SurplusFunction, Table,
                          ValuationDistribution, core_instance, entry_fee_bound_check,
                          is_monotone, is_subadditive, run_aspe, run_rspm, tau,
                          tradeoff_constant)
from postedprices.generators import independent_items_distribution, random_subadditive
from postedprices.revenue import (aspe_profile_run, core_restrict, core_threshold, hat_restrict,
                                  interim_allocation, item_independence_violations,
                                  lower_median, median_entry_fee, rspm_run, surplus,
                                  threshold_property_check)


def two_point_items(m, rng):
    return independent_items_distribution(m, rng, "additive")


class TestThresholds:
    def test_tau_deterministic(self):
        D = ValuationDistribution.point(Additive([5]))
        assert tau(D, [1], [0]) == pytest.approx(4)

    def test_tau_below_prices(self):
        D = ValuationDistribution.point(Additive([1, 2]))
        assert tau(D, [3, 3], [0, 0]) == 0

    def test_tau_boundary_half(self):
        # each item clears its threshold with probability 1/4; the sum is exactly 1/2
        support = []
        for a, b in itertools.product((0, 1), repeat=2):
            pa = 0.25 if a else 0.75
            pb = 0.25 if b else 0.75
            support.append((pa * pb, Additive([2.0 * a, 2.0 * b])))
        D = ValuationDistribution(support)
        assert tau(D, [1, 1], [0, 0]) == 0

    def test_core_threshold_scan(self):
        D = ValuationDistribution([(0.5, Additive([4])), (0.5, Additive([1]))])
        # Pr[v >= x] <= 1/2 first holds just above 1; the infimum is 1
        assert core_threshold(D, [0]) == pytest.approx(1)

    def test_core_restrict(self, rng):
        v = Additive([5, 1])
        assert core_restrict(v, [2, 2], 1).value(3) == 1
        w = random_subadditive(3, rng)
        assert np.array_equal(core_restrict(w, [10, 10, 10], 0).table(), w.table())
        assert np.all(core_restrict(w, [0, 0, 0], 0).table() == 0)


class TestSurplus:
    def test_empty(self, rng):
        assert surplus(random_subadditive(3, rng), [1, 1, 1], 0) == 0

    def test_zero_prices(self, rng):
        v = random_subadditive(3, rng)
        assert np.allclose(SurplusFunction(v, [0, 0, 0], 1e9).table(),
                           hat_restrict(v, [0, 0, 0], 1e9).table())

    def test_example(self):
        vhat = hat_restrict(Additive([3, 1]), [1, 2], 1e9)
        assert surplus(vhat, [1, 2], 3) == 2

    @given(st.integers(0, 5000))
    def test_properties_exhaustive(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 6))
        v = random_subadditive(m, rng)
        p = rng.random(m) * 0.5
        t = float(rng.random())
        mu = SurplusFunction(v, p, t).table()
        for S, T in itertools.product(range(1 << m), repeat=2):
            if S & ~T == 0:
                assert mu[S] <= mu[T] + 1e-9
            assert mu[S] + mu[T] >= mu[S | T] - 1e-9
            assert abs(mu[S] - mu[T]) <= t * bin(S ^ T).count("1") + 1e-9

    def test_restrictions_stay_subadditive(self, rng):
        for _ in range(10):
            v = random_subadditive(4, rng)
            for w in (core_restrict(v, rng.random(4), 0.2), hat_restrict(v, rng.random(4), 0.1)):
                assert is_subadditive(w) and is_monotone(w)


class TestFees:
    def test_lower_median(self):
        assert lower_median([1, 3], [0.5, 0.5]) == 1
        assert lower_median([3, 1, 2], [0.2, 0.3, 0.5]) == 2

    def test_deterministic_fee(self, rng):
        v = random_subadditive(3, rng)
        D = ValuationDistribution.point(v)
        assert median_entry_fee(D, [0.1] * 3, 7, 0.5) == SurplusFunction(v, [0.1] * 3, 0.5)(7)

    def test_empty_fee(self, rng):
        D = ValuationDistribution.point(random_subadditive(3, rng))
        assert median_entry_fee(D, [0.1] * 3, 0, 0.5) == 0


class TestAspe:
    def test_deterministic_everyone_pays(self, rng):
        prof = [random_subadditive(3, rng) for _ in range(2)]
        inst = Instance.deterministic(prof)
        run = aspe_profile_run(inst, [0.1] * 3, np.zeros((2, 3)), (0, 0))
        assert np.all(run.fees == run.surpluses)

    def test_zero(self):
        inst = Instance.deterministic([Additive([0, 0])])
        assert run_aspe(inst, [0, 0], np.zeros((1, 2))).revenue == 0

    def test_two_branches(self):
        D = ValuationDistribution([(0.5, Additive([3, 1])), (0.5, Additive([1, 1]))])
        inst = Instance(2, [D])
        p, beta = [0.5, 0.5], np.zeros((1, 2))
        res = run_aspe(inst, p, beta, keep_runs=True)
        branch = [aspe_profile_run(inst, p, beta, (s,)).revenue for s in (0, 1)]
        assert res.revenue == pytest.approx(np.mean(branch))
        assert res.samples == 2

    @given(st.integers(0, 3000))
    def test_accounting(self, seed):
        rng = np.random.default_rng(seed)
        inst = Instance(3, [independent_items_distribution(3, rng, "xos") for _ in range(2)])
        p = rng.random(3)
        beta = rng.random((2, 3))
        for idx in itertools.product(range(8), range(8)):
            run = aspe_profile_run(inst, p, beta, idx)
            assert run.revenue == pytest.approx(run.item_revenue + run.fee_revenue, abs=1e-12)
            assert abs(run.welfare - run.utilities.sum() - run.revenue) <= 1e-9
            assert run.allocation[0].bits & run.allocation[1].bits == 0

    def test_bad_beta(self):
        inst = Instance.deterministic([Additive([1, 1])])
        with pytest.raises(InputError):
            run_aspe(inst, [0, 0], np.zeros((2, 2)))


class TestRspm:
    def test_expensive(self):
        inst = Instance.deterministic([Additive([1, 2])])
        assert run_rspm(inst, [[5, 5]]).revenue == 0

    def test_single_buyer(self):
        run = rspm_run([Additive([3, 1])], [[1, 0.5]])
        assert run.allocation[0].bits == 1 and run.revenue == 1

    def test_utilities_nonnegative(self, rng):
        prof = [random_subadditive(3, rng) for _ in range(3)]
        run = rspm_run(prof, rng.random((3, 3)))
        assert np.all(run.utilities >= 0)
        assert sum(len(S) for S in run.allocation) <= 3


class TestEntryFeeBound:
    def test_deterministic(self, rng):
        prof = [random_subadditive(3, rng) for _ in range(2)]
        rep = entry_fee_bound_check(Instance.deterministic(prof), [0.2] * 3, np.zeros((2, 3)))
        assert rep.fee_revenue == pytest.approx(rep.surplus_sum)
        assert rep.slack == pytest.approx(0.75 * rep.surplus_sum + 0.625 * rep.tau_sum)

    def test_zero(self):
        rep = entry_fee_bound_check(Instance.deterministic([Additive([0, 0])]), [0, 0],
                                    np.zeros((1, 2)))
        assert rep.slack >= 0

    @pytest.mark.parametrize("kind", ["additive", "unit_demand", "xos"])
    def test_independent_items(self, rng, kind):
        for _ in range(3):
            inst = Instance(4, [independent_items_distribution(4, rng, kind) for _ in range(2)])
            rep = entry_fee_bound_check(inst, rng.random(4) * 0.5, rng.random((2, 4)))
            assert rep.slack >= -1e-6

    def test_correlated_counterexample_warns(self):
        # all items share one random level: τ = 2, the median surplus is 0, yet
        # (1/4) E μ = 0.49 * 6 * 1.99 / 4 exceeds (5/8) τ
        m = 6
        D = ValuationDistribution([(0.42, Additive(np.full(m, 0.0))),
                                   (0.49, Additive(np.full(m, 1.99))),
                                   (0.09, Additive(np.full(m, 2.0)))])
        inst = Instance(m, [D])
        assert item_independence_violations(D)
        with pytest.warns(RuntimeWarning):
            rep = entry_fee_bound_check(inst, np.zeros(m), np.zeros((1, m)))
        assert rep.fee_revenue == pytest.approx(0)
        assert rep.slack < 0

    def test_independent_items_no_warning(self, rng):
        inst = Instance(3, [two_point_items(3, rng)])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            entry_fee_bound_check(inst, [0.1] * 3, np.zeros((1, 3)))


class TestTradeoff:
    def test_half(self):
        assert tradeoff_constant(Fraction(1, 2)) == Fraction(1, 36)
        assert tradeoff_constant(0.5) == pytest.approx(1 / 36)

    def test_positive(self):
        assert all(tradeoff_constant(b) > 0 for b in np.linspace(0.01, 0.99, 50))

    def test_boundary(self):
        for b in (0, 1, -0.1):
            with pytest.raises(InputError):
                tradeoff_constant(b)


class TestCoreAndProperties:
    def test_core_instance(self, rng):
        inst = Instance(3, [two_point_items(3, rng) for _ in range(2)])
        core, th = core_instance(inst, rng.random((2, 3)))
        for D in core.agents:
            for v in D.valuations:
                assert is_subadditive(v) and is_monotone(v)
        assert th.c.shape == (2,)

    def test_threshold_properties_on_run(self, rng):
        inst = Instance(2, [two_point_items(2, rng) for _ in range(2)])
        pi = interim_allocation(inst, [0.3, 0.3]).pi
        big = np.full((2, 2), 100.0)
        rep = threshold_property_check(inst, big, pi, 0.5)
        # nobody clears a huge threshold, so competition holds and allocation fails
        assert np.all(rep.competition >= 0)
        assert not rep.ok

    def test_interim_lotteries(self, rng):
        inst = Instance(2, [two_point_items(2, rng) for _ in range(2)])
        sigma = interim_allocation(inst, [0.3, 0.3])
        for i, D in enumerate(inst.agents):
            for s in range(len(D.probs)):
                assert abs(sum(sigma.sigma[i][s].values()) - 1) < 1e-9
                assert np.all(sigma.pi[i][s] <= 1 + 1e-9)
                assert sigma.lottery(i, s).in_delta(1.0)

    def test_table_valuations_work(self):
        D = ValuationDistribution([(0.5, Table([0, 2, 2, 3], 2)), (0.5, Table([0, 1, 1, 1], 2))])
        res = run_aspe(Instance(2, [D]), [0.5, 0.5], np.zeros((1, 2)))
        assert res.revenue >= 0
