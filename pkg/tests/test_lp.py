import io
import math

import numpy as np
import pytest

from gridfleet import lp as lpmod
from helpers import make_constructed_lp


def simple_cover_lp():
    prob = lpmod.LinearProgram([">="], [1.0])
    prob.add_column(1.0, {0: 1.0})
    prob.add_column(1.0, {0: 1.0})
    return prob


class TestBasics:
    def test_single_row(self):
        sol = lpmod.solve(simple_cover_lp())
        assert sol.status == lpmod.OPTIMAL
        assert sol.objective == pytest.approx(1.0)
        assert sol.duals[0] == pytest.approx(1.0)

    def test_duplicate_columns_degenerate(self):
        prob = lpmod.LinearProgram(["="], [1.0])
        for _ in range(4):
            prob.add_column(3.0, {0: 1.0})
        sol = lpmod.solve(prob)
        assert sol.status == lpmod.OPTIMAL
        assert sol.objective == pytest.approx(3.0)

    def test_infeasible(self):
        prob = lpmod.LinearProgram(["<=", ">="], [1.0, 2.0])
        prob.add_column(1.0, {0: 1.0, 1: 1.0})
        sol = lpmod.solve(prob)
        assert sol.status == lpmod.INFEASIBLE

    def test_unbounded(self):
        prob = lpmod.LinearProgram(["<="], [5.0])
        prob.add_column(-1.0, {0: -1.0})
        sol = lpmod.solve(prob)
        assert sol.status == lpmod.UNBOUNDED

    def test_upper_bounds_respected(self):
        prob = lpmod.LinearProgram([">="], [10.0])
        prob.add_column(1.0, {0: 1.0}, ub=4.0)
        prob.add_column(2.0, {0: 1.0})
        sol = lpmod.solve(prob)
        assert sol.objective == pytest.approx(4.0 + 2.0 * 6.0)
        assert sol.x[0] == pytest.approx(4.0)

    def test_equality_row_free_dual(self):
        prob = lpmod.LinearProgram(["="], [2.0])
        prob.add_column(-3.0, {0: 1.0}, ub=5.0)
        sol = lpmod.solve(prob)
        assert sol.objective == pytest.approx(-6.0)
        assert sol.duals[0] == pytest.approx(-3.0)

    def test_dual_signs(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            prob, _ = make_constructed_lp(rng, m=5, n=9)
            sol = lpmod.solve(prob)
            assert sol.status == lpmod.OPTIMAL
            for i, sense in enumerate(prob.senses):
                if sense == lpmod.LE:
                    assert sol.duals[i] <= 1e-7
                elif sense == lpmod.GE:
                    assert sol.duals[i] >= -1e-7


class TestConstructedOptima:
    def test_fifty_random_lps(self):
        rng = np.random.default_rng(42)
        for k in range(50):
            prob, opt = make_constructed_lp(rng, m=4 + k % 5, n=6 + k % 9)
            sol = lpmod.solve(prob)
            assert sol.status == lpmod.OPTIMAL, f"case {k}"
            assert sol.objective == pytest.approx(opt, abs=1e-8, rel=1e-8), f"case {k}"

    def test_kkt_residuals(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            prob, _ = make_constructed_lp(rng)
            sol = lpmod.solve(prob)
            res = lpmod.check_kkt(prob, sol)
            scale = 1.0 + abs(sol.objective)
            for name, val in res.items():
                assert val <= 1e-7 * scale, (name, val)


class TestAgainstScipy:
    def test_objective_matches_highs(self):
        scipy_opt = pytest.importorskip("scipy.optimize")
        rng = np.random.default_rng(23)
        for _ in range(25):
            m, n = 6, 10
            prob, _ = make_constructed_lp(rng, m, n)
            a = prob.dense()
            c = np.asarray(prob.costs)
            a_ub, b_ub, a_eq, b_eq = [], [], [], []
            for i, sense in enumerate(prob.senses):
                if sense == lpmod.LE:
                    a_ub.append(a[i]); b_ub.append(prob.rhs[i])
                elif sense == lpmod.GE:
                    a_ub.append(-a[i]); b_ub.append(-prob.rhs[i])
                else:
                    a_eq.append(a[i]); b_eq.append(prob.rhs[i])
            res = scipy_opt.linprog(
                c,
                A_ub=np.array(a_ub) if a_ub else None,
                b_ub=np.array(b_ub) if b_ub else None,
                A_eq=np.array(a_eq) if a_eq else None,
                b_eq=np.array(b_eq) if b_eq else None,
                bounds=[(prob.lb[j], None if math.isinf(prob.ub[j]) else prob.ub[j])
                        for j in range(n)],
                method="highs")
            sol = lpmod.solve(prob)
            assert res.status == 0 and sol.status == lpmod.OPTIMAL
            assert sol.objective == pytest.approx(res.fun, rel=1e-7, abs=1e-7)


class TestWarmStart:
    def test_resolve_unchanged(self):
        prob = simple_cover_lp()
        sol = lpmod.solve(prob)
        sol2 = lpmod.warm_start_solve(prob, sol.basis)
        assert sol2.status == lpmod.OPTIMAL
        assert sol2.objective == pytest.approx(sol.objective)
        assert sol2.iterations == 0

    def test_nonimproving_column_keeps_objective(self):
        prob = simple_cover_lp()
        sol = lpmod.solve(prob)
        prob.add_column(5.0, {0: 1.0})  # reduced cost 5 - 1 = 4 >= 0
        sol2 = lpmod.warm_start_solve(prob, sol.basis)
        assert sol2.objective == pytest.approx(sol.objective)

    def test_improving_column_matches_cold(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            prob, _ = make_constructed_lp(rng, m=5, n=8)
            sol = lpmod.solve(prob)
            duals = sol.duals
            # build a column with strictly negative reduced cost
            col = rng.normal(size=5)
            cost = float(col @ duals) - 1.0
            j = prob.add_column(cost, {i: col[i] for i in range(5)}, ub=3.0)
            warm = lpmod.warm_start_solve(prob, sol.basis)
            cold = lpmod.solve(prob)
            assert warm.status == cold.status == lpmod.OPTIMAL
            assert warm.objective == pytest.approx(cold.objective, rel=1e-8, abs=1e-8)
            assert warm.objective <= sol.objective + 1e-9
            assert j == prob.n_cols - 1

    def test_incompatible_basis_falls_back(self):
        prob = simple_cover_lp()
        sol = lpmod.solve(prob)
        other = lpmod.LinearProgram([">=", ">="], [1.0, 1.0])
        other.add_column(1.0, {0: 1.0})
        other.add_column(1.0, {1: 1.0})
        sol2 = lpmod.warm_start_solve(other, sol.basis)
        assert sol2.status == lpmod.OPTIMAL
        assert sol2.objective == pytest.approx(2.0)


class TestStrongDualityProperty:
    def test_duality_gap_scaled(self):
        rng = np.random.default_rng(99)
        for _ in range(40):
            prob, _ = make_constructed_lp(rng, m=6, n=11)
            sol = lpmod.solve(prob)
            res = lpmod.check_kkt(prob, sol)
            assert res["duality_gap"] <= 1e-7 * (1.0 + abs(sol.objective))


def test_lp_text_dump():
    prob = simple_cover_lp()
    buf = io.StringIO()
    prob.write_lp_text(buf)
    text = buf.getvalue()
    assert "Minimize" in text and "Subject To" in text and "End" in text
    assert ">= 1" in text
