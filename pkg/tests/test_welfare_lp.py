import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from postedprices import (Additive, CapabilityError, Instance, MarginalCaps, Table,
                          ValuationDistribution, f_value, opt_welfare, solve_bayes_config_lp,
                          solve_config_lp)
from postedprices.generators import gen_instance, random_subadditive
from postedprices.welfare_lp import dual_separation, dual_violations, expected_f


def brute_opt(profile):
    m, n = profile[0].m, len(profile)
    best = 0.0
    for owners in itertools.product(range(n + 1), repeat=m):
        parts = [0] * n
        for j, o in enumerate(owners):
            if o < n:
                parts[o] |= 1 << j
        best = max(best, sum(v.value(S) for v, S in zip(profile, parts)))
    return best


def random_profile(rng, m, n):
    return [random_subadditive(m, rng) for _ in range(n)]


class TestConfigLp:
    def test_additive_cap(self):
        for q in (0.0, 0.2, 0.5, 1.0):
            assert solve_config_lp([Additive([1, 1])], q).objective == pytest.approx(2 * q, abs=1e-9)

    def test_full_cap_is_full_value(self, rng):
        v = random_subadditive(5, rng)
        assert f_value([v], 1.0) == pytest.approx(v.value(31), abs=1e-9)

    def test_zero_cap(self, rng):
        assert f_value(random_profile(rng, 4, 2), 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_f_point_three(self):
        assert f_value([Additive([1, 1])], 0.3) == pytest.approx(0.6, abs=1e-9)

    def test_feasibility_and_duals(self, rng):
        prof = random_profile(rng, 5, 3)
        sol = solve_config_lp(prof, MarginalCaps.uniform(5, 0.4))
        per_agent = np.zeros(3)
        item = np.zeros(5)
        for i, S, w in sol.columns:
            assert w > 0
            per_agent[i] += w
            for j in S:
                item[j] += w
        assert np.all(per_agent <= 1 + 1e-7) and np.all(item <= 0.4 + 1e-7)
        assert np.all(sol.y >= -1e-9) and np.all(sol.u >= -1e-9)
        assert dual_violations(prof, sol.y, sol.u, 1e-7) == []
        assert sol.duality_gap <= 1e-6

    def test_dense_matches_colgen(self, rng):
        prof = random_profile(rng, 7, 2)
        for q in (0.1, 0.5):
            a = solve_config_lp(prof, q, method="dense").objective
            b = solve_config_lp(prof, q, method="colgen").objective
            assert a == pytest.approx(b, abs=1e-6)

    def test_per_item_caps(self):
        caps = MarginalCaps([0.2, 0.7])
        assert solve_config_lp([Additive([1, 1])], caps).objective == pytest.approx(0.9)
        assert np.allclose(caps.scaled(0.5).q, [0.1, 0.35])

    def test_serialises(self):
        d = solve_config_lp([Additive([1, 1])], 0.5).to_dict()
        assert {"columns", "y", "u", "objective"} <= set(d)

    @given(st.integers(0, 5000))
    def test_monotone_in_q(self, seed):
        rng = np.random.default_rng(seed)
        prof = random_profile(rng, int(rng.integers(2, 6)), int(rng.integers(1, 3)))
        q1, q2 = sorted(rng.random(2))
        assert f_value(prof, q1) <= f_value(prof, q2) + 1e-9

    @given(st.integers(0, 5000))
    def test_crude_bounds(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 7))
        prof = random_profile(rng, m, int(rng.integers(1, 4)))
        opt = opt_welfare(prof)[0]
        assert f_value(prof, 0.5) >= opt / 2 - 1e-9
        assert f_value(prof, 1 / m ** 2) <= opt / m + 1e-9


class TestSeparation:
    def test_zero_duals(self):
        v = Table([0, 1, 2, 2.5], 2)
        i, S, slack = dual_separation([v], [0, 0], [0])
        assert (i, S.bits) == (0, 3) and slack == pytest.approx(2.5)

    def test_feasible_duals(self, rng):
        prof = random_profile(rng, 4, 2)
        sol = solve_config_lp(prof, 0.3)
        assert dual_separation(prof, sol.y, sol.u, 1e-7) is None

    def test_additive(self):
        i, S, slack = dual_separation([Additive([3, 1])], [2, 2], [0])
        assert (i, S.bits) == (0, 1) and slack == pytest.approx(1.0)


class TestOpt:
    def test_additive_pair(self):
        val, parts = opt_welfare([Additive([2, 0]), Additive([0, 3])])
        assert val == 5 and [p.bits for p in parts] == [1, 2]

    def test_single_agent(self, rng):
        v = random_subadditive(4, rng)
        assert opt_welfare([v])[0] == pytest.approx(v.value(15))

    def test_table_pair(self):
        v = Table([0, 2, 2, 3], 2)
        assert opt_welfare([v, v])[0] == pytest.approx(4)

    @given(st.integers(0, 5000))
    def test_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        prof = random_profile(rng, int(rng.integers(1, 6)), int(rng.integers(1, 4)))
        val, parts = opt_welfare(prof)
        assert val == pytest.approx(brute_opt(prof), abs=1e-9)
        union = 0
        for S in parts:
            assert union & S.bits == 0
            union |= S.bits

    def test_capability(self):
        with pytest.raises(CapabilityError):
            opt_welfare([Additive(np.ones(15)), Additive(np.ones(15))])


class TestBayesLp:
    def test_deterministic_matches(self, rng):
        prof = random_profile(rng, 4, 2)
        b = solve_bayes_config_lp(Instance.deterministic(prof), 0.3, "ex_ante")
        assert b.objective == pytest.approx(f_value(prof, 0.3), abs=1e-7)
        # the interim form caps each agent separately, so it matches only for one agent
        one = Instance.deterministic(prof[:1])
        assert solve_bayes_config_lp(one, 0.3, "interim").objective == pytest.approx(
            f_value(prof[:1], 0.3), abs=1e-7)

    def test_zero_caps(self):
        inst = gen_instance("xos-random", 3, 2, 2, seed=1)
        assert solve_bayes_config_lp(inst, 0.0).objective == pytest.approx(0, abs=1e-12)

    def test_two_profile_single_agent(self, rng):
        vs = [random_subadditive(4, rng) for _ in range(2)]
        inst = Instance(4, [ValuationDistribution([(0.5, vs[0]), (0.5, vs[1])])])
        b = solve_bayes_config_lp(inst, 0.5, "interim")
        avg = 0.5 * (f_value([vs[0]], 0.5) + f_value([vs[1]], 0.5))
        assert b.objective == pytest.approx(avg, abs=1e-7)
        assert b.duality_gap <= 1e-6

    def test_relaxation_chain(self):
        # any per-profile feasible family is feasible for both relaxed forms
        for seed in range(5):
            inst = gen_instance("xos-random", 3, 2, 2, seed=seed)
            per_profile = expected_f(inst, 0.3)
            for mode in ("interim", "ex_ante"):
                assert per_profile <= solve_bayes_config_lp(inst, 0.3, mode).objective + 1e-7

    def test_interim_marginals_respect_caps(self):
        inst = gen_instance("table-random-subadditive", 3, 2, 2, seed=4)
        b = solve_bayes_config_lp(inst, 0.4, "interim")
        for i, D in enumerate(inst.agents):
            for s in range(len(D.probs)):
                marg = np.zeros(inst.m)
                mass = 0.0
                for idx, p in b.profiles:
                    if idx[i] == s:
                        marg += p * b.lambdas[idx][i].marginals()
                        mass += p
                assert np.all(marg / mass <= 0.4 + 1e-7)
