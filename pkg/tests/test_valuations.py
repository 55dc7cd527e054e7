import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from postedprices import (XOS, Additive, CapabilityError, InputError, Instance, ItemSet,
                          ScaledSum, SetDistribution, Table, UnitDemand, ValuationDistribution,
                          demand, is_monotone, is_subadditive)
from postedprices.generators import random_cover, random_subadditive_table, random_xos
from postedprices.lowerbound import GapFunction, StackedValuation
from postedprices.valuations import enumerate_profiles, iter_profiles


def brute_demand(v, p, A):
    best = None
    for S in range(1 << v.m):
        if S & ~A:
            continue
        u = v.value(S) - sum(p[j] for j in range(v.m) if S >> j & 1)
        key = (u, v.value(S), -S)
        if best is None or key[0] > best[0] + 1e-9 or (
                abs(key[0] - best[0]) <= 1e-9 and key[1:] > best[1:]):
            best = key
    return -best[2]


class TestItemSet:
    def test_algebra(self):
        A, B = ItemSet.of([0, 2], 4), ItemSet.of([2, 3], 4)
        assert (A | B).bits == 0b1101
        assert (A & B).bits == 0b0100
        assert (A - B).bits == 0b0001
        assert A.complement().bits == 0b1010
        assert ItemSet.of([2], 4).issubset(A)
        assert list(A) == [0, 2] and len(A) == 2

    def test_bounds(self):
        with pytest.raises(InputError):
            ItemSet.of([4], 4)
        with pytest.raises(InputError):
            ItemSet(1 << 25, 25)

    def test_set_distribution_merges_and_normalises(self):
        d = SetDistribution({1: 0.25, 3: 0.75}, 2)
        assert np.allclose(d.marginals(), [1.0, 0.75])
        assert d.in_delta(1.0) and not d.in_delta(0.9)
        with pytest.raises(InputError):
            SetDistribution({1: 0.5}, 2)


class TestValue:
    def test_additive(self):
        assert Additive([3, 1]).value({0, 1}) == 4

    def test_empty_is_zero(self):
        for v in (Additive([3, 1]), UnitDemand([1, 2]), XOS([[1, 0], [0, 2]]), GapFunction(2)):
            assert v.value(0) == 0

    def test_gap_function_full(self):
        assert GapFunction(2).value(0b111) == 2

    def test_out_of_range(self):
        with pytest.raises(InputError):
            Additive([1, 1]).value({2})

    def test_table_validation(self):
        with pytest.raises(InputError):
            Table([0, 2, 1, 1], 2)
        with pytest.raises(InputError):
            Table([1, 2, 2, 3], 2)
        with pytest.raises(InputError):
            Additive([-1, 1])


class TestDemand:
    def test_additive(self):
        v = Additive([3, 1])
        S = demand(v, [2, 2])
        assert S.bits == 0b01
        assert v.value(S) - 2 == 1

    def test_zero_prices_take_everything(self):
        for v in (Additive([3, 1, 2]), random_xos(3, np.random.default_rng(0))):
            assert demand(v, [0, 0, 0]).bits == 0b111
        # every superset of {2} ties on value; the smallest mask wins
        assert demand(UnitDemand([1, 2, 3]), [0, 0, 0]).bits == 0b100

    def test_table(self):
        v = Table([0, 5, 5, 6], 2)
        S = demand(v, [1, 1])
        # {0} and {0, 1} both give utility 4; the higher-value bundle wins the tie
        assert v.value(S) - len(S) == 4
        assert S.bits == 0b11
        assert demand(v, [1, 1.5]).bits == 0b01

    def test_infinite_price_excluded(self):
        v = Additive([3, 1])
        assert demand(v, [np.inf, 0]).bits == 0b10

    def test_available_set(self):
        assert demand(Additive([3, 1, 5]), [0, 0, 0], 0b011).bits == 0b011

    @given(st.integers(0, 10_000), st.sampled_from(["add", "unit", "xos", "cover"]))
    def test_demand_certificate(self, seed, fam):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 6))
        v = {"add": lambda: Additive(rng.random(m)), "unit": lambda: UnitDemand(rng.random(m)),
             "xos": lambda: random_xos(m, rng), "cover": lambda: random_cover(m, rng)}[fam]()
        p = rng.random(m) * rng.choice([0.0, 0.5, 1.0])
        A = int(rng.integers(0, 1 << m))
        assert demand(v, p, A).bits == brute_demand(v, p, A)


class TestSubadditivity:
    def test_additive(self):
        assert is_subadditive(Additive([1, 2, 3]))

    def test_violation(self):
        assert not is_subadditive(Table([0, 1, 1, 3], 2))

    def test_stacked_l1(self):
        assert is_subadditive(StackedValuation(1))

    def test_capability(self):
        with pytest.raises(CapabilityError):
            is_subadditive(Additive(np.ones(15)))

    def test_xos_family(self, rng):
        assert all(is_subadditive(random_xos(int(rng.integers(1, 7)), rng)) for _ in range(100))

    def test_scaled_sum(self, rng):
        v = ScaledSum([(0.5, random_xos(5, rng)), (2.0, random_cover(5, rng)),
                       (1.0, UnitDemand(rng.random(5)))])
        assert is_subadditive(v) and is_monotone(v)

    def test_random_table_generator(self, rng):
        for m in (3, 5, 7):
            v = random_subadditive_table(m, rng)
            assert is_subadditive(v) and is_monotone(v)

    @given(st.integers(0, 10_000))
    def test_monotone_families(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 8))
        for v in (Additive(rng.random(m)), UnitDemand(rng.random(m)), random_xos(m, rng),
                  random_cover(m, rng)):
            t = v.table()
            for S, T in itertools.product(range(1 << m), repeat=2):
                if S & ~T == 0:
                    assert t[S] <= t[T] + 1e-9


class TestProfiles:
    def test_counts(self):
        D2 = ValuationDistribution([(0.5, Additive([1])), (0.5, Additive([2]))])
        D3 = ValuationDistribution([(0.2, Additive([1])), (0.3, Additive([2])),
                                    (0.5, Additive([3]))])
        profiles = list(enumerate_profiles(Instance(1, [D2, D3])))
        assert len(profiles) == 6
        assert abs(sum(p for p, _ in profiles) - 1) < 1e-12

    def test_deterministic(self):
        profiles = list(enumerate_profiles(Instance.deterministic([Additive([1, 2])])))
        assert len(profiles) == 1 and profiles[0][0] == 1.0

    def test_explosion(self):
        D = ValuationDistribution([(0.5, Additive([1])), (0.5, Additive([2]))])
        with pytest.raises(CapabilityError):
            list(iter_profiles(Instance(1, [D] * 21)))

    @given(st.integers(0, 1000))
    def test_probabilities_sum_to_one(self, seed):
        from postedprices.generators import gen_instance
        rng = np.random.default_rng(seed)
        inst = gen_instance("additive-iid", 2, int(rng.integers(1, 4)),
                            int(rng.integers(1, 4)), seed)
        assert abs(sum(p for p, _ in enumerate_profiles(inst)) - 1) < 1e-9

    def test_bad_distribution(self):
        with pytest.raises(InputError):
            ValuationDistribution([(0.5, Additive([1]))])
        with pytest.raises(InputError):
            Instance(2, [ValuationDistribution.point(Additive([1]))])
