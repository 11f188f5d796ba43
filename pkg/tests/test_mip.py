import itertools
import math

import numpy as np
import pytest

from gridfleet import lp as lpmod
from gridfleet import mip
from gridfleet.model import InputError
from helpers import make_constructed_lp


def knapsack_problem(values, weights, cap):
    # min -v x  s.t.  w x <= cap, x binary
    prob = lpmod.LinearProgram(["<="], [float(cap)])
    for v, w in zip(values, weights):
        prob.add_column(-float(v), {0: float(w)}, lb=0.0, ub=1.0)
    return mip.MipProblem(prob, np.ones(len(values), dtype=bool), name="knapsack")


def brute_force_knapsack(values, weights, cap):
    best = 0.0
    n = len(values)
    for bits in itertools.product((0, 1), repeat=n):
        if sum(b * w for b, w in zip(bits, weights)) <= cap:
            best = max(best, sum(b * v for b, v in zip(bits, values)))
    return best


class TestSolve:
    def test_pure_lp_equals_lp_solve(self):
        rng = np.random.default_rng(31)
        prob, opt = make_constructed_lp(rng, m=5, n=8)
        p = mip.MipProblem(prob, np.zeros(prob.n_cols, dtype=bool))
        sol = mip.solve(p)
        assert sol.status == mip.STATUS_OPTIMAL
        assert sol.objective == pytest.approx(opt, rel=1e-8, abs=1e-8)
        assert sol.nodes <= 3

    def test_knapsack_matches_enumeration(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            values = rng.integers(1, 30, size=10).astype(float)
            weights = rng.integers(1, 12, size=10).astype(float)
            cap = float(rng.integers(10, 45))
            sol = mip.solve(knapsack_problem(values, weights, cap))
            assert sol.status == mip.STATUS_OPTIMAL
            best = brute_force_knapsack(values, weights, cap)
            assert sol.objective == pytest.approx(-best, abs=1e-7)
            assert sol.gap <= 1e-9

    def test_bound_below_objective(self):
        sol = mip.solve(knapsack_problem([5, 4, 3], [2, 3, 4], 6))
        assert sol.bound <= sol.objective + 1e-9
        assert sol.gap >= 0.0

    def test_infeasible(self):
        prob = lpmod.LinearProgram([">=", "<="], [2.0, 1.0])
        prob.add_column(1.0, {0: 1.0, 1: 1.0}, ub=5.0)
        p = mip.MipProblem(prob, np.ones(1, dtype=bool))
        sol = mip.solve(p)
        assert sol.status == mip.STATUS_INFEASIBLE

    def test_integer_general_variables(self):
        # min x1 + 10 x2  s.t.  3 x1 + 2 x2 >= 7, integers
        prob = lpmod.LinearProgram([">="], [7.0])
        prob.add_column(1.0, {0: 3.0})
        prob.add_column(10.0, {0: 2.0})
        sol = mip.solve(mip.MipProblem(prob, np.array([True, True])))
        assert sol.objective == pytest.approx(3.0)  # x1 = 3

    def test_determinism(self):
        values = [7, 2, 9, 4, 4]
        weights = [3, 1, 4, 2, 2]
        a = mip.solve(knapsack_problem(values, weights, 7))
        b = mip.solve(knapsack_problem(values, weights, 7))
        assert a.objective == b.objective
        assert a.nodes == b.nodes
        assert np.array_equal(a.x, b.x)


class TestFirstImproving:
    def test_bound_prunes_without_branching(self):
        p = knapsack_problem([5, 4], [2, 3], 5)
        root = lpmod.solve(p.lp)
        sol = mip.solve_first_improving(p, threshold=root.objective - 1.0)
        assert sol.status == mip.STATUS_INFEASIBLE
        assert sol.x is None
        assert sol.nodes == 1  # only the root relaxation was solved

    def test_negative_infinity_proves_none(self):
        p = knapsack_problem([5, 4], [2, 3], 5)
        sol = mip.solve_first_improving(p, threshold=-math.inf)
        assert sol.status == mip.STATUS_INFEASIBLE

    def test_finds_some_subthreshold_solution(self):
        values = [5, 4, 3]
        weights = [2, 3, 4]
        full = mip.solve(knapsack_problem(values, weights, 6))
        thr = full.objective + 2.0  # something below thr exists
        sol = mip.solve_first_improving(knapsack_problem(values, weights, 6), thr)
        assert sol.feasible
        assert sol.objective < thr
        # the incumbent need not be the optimum, only sub-threshold
        assert sol.objective >= full.objective - 1e-9


class TestPool:
    def test_collects_distinct_solutions(self):
        p = knapsack_problem([5, 4, 3, 2], [2, 3, 4, 2], 8)
        sol = mip.solve(p, cutoff=-1.0, pool_target=3, prune_on_cutoff=True)
        assert 1 <= len(sol.pool) <= 3
        seen = set()
        for obj, x in sol.pool:
            assert obj < -1.0
            key = tuple(np.round(x).astype(int))
            assert key not in seen
            seen.add(key)


class TestBigM:
    def test_registry_validates(self):
        reg = mip.BigMRegistry()
        reg.register("time", 30.0, must_dominate=26.0)
        assert reg.get("time") == 30.0
        with pytest.raises(InputError):
            reg.register("soc", 100.0, must_dominate=150.0)
