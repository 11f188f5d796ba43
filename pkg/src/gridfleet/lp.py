"""Bounded-variable revised simplex with exact dual prices.

The solver keeps an explicit dense basis inverse (refactorized periodically)
and supports three entry points used elsewhere in the package:

* cold two-phase primal solves,
* primal warm starts after appending columns (column generation resolves),
* dual-simplex warm starts after tightening variable bounds (branch and
  bound child nodes).

Sign convention, fixed once for the whole package: for a minimization LP,
``<=`` rows carry nonpositive duals, ``>=`` rows nonnegative duals and ``=``
rows free duals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .model import InputError

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

# variable statuses
_AT_LO, _AT_UP, _BASIC = 0, 1, 2
# column kinds inside the solver working arrays
_K_STRUCT, _K_SLACK, _K_ART = 0, 1, 2

FEAS_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
KKT_TOL = 1e-7
_REFACTOR_EVERY = 100
_STALL_LIMIT = 60


class NumericalError(RuntimeError):
    """Simplex failed to make progress even under Bland's rule."""


class LinearProgram:
    """Sparse column-form LP: rows are fixed at construction, columns appended."""

    def __init__(self, senses: Sequence[str], rhs: Sequence[float]):
        senses = list(senses)
        rhs_arr = np.asarray(rhs, dtype=float)
        if len(senses) != len(rhs_arr):
            raise InputError("senses and rhs must have equal length")
        for s in senses:
            if s not in _SENSES:
                raise InputError(f"unknown row sense {s!r}")
        if not np.all(np.isfinite(rhs_arr)):
            raise InputError("rhs entries must be finite")
        self.senses: list[str] = senses
        self.rhs: np.ndarray = rhs_arr
        self.costs: list[float] = []
        self.col_rows: list[np.ndarray] = []
        self.col_vals: list[np.ndarray] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.names: list[str] = []

    @property
    def n_rows(self) -> int:
        return len(self.senses)

    @property
    def n_cols(self) -> int:
        return len(self.costs)

    def add_column(self, cost: float,
                   entries: Union[Mapping[int, float], Iterable[tuple[int, float]]],
                   lb: float = 0.0, ub: float = math.inf,
                   name: str = "") -> int:
        if isinstance(entries, Mapping):
            items = sorted(entries.items())
        else:
            items = sorted(entries)
        rows = np.array([r for r, _ in items], dtype=np.int64)
        vals = np.array([v for _, v in items], dtype=float)
        if len(rows) and (rows.min() < 0 or rows.max() >= self.n_rows):
            raise InputError("column entry row index out of range")
        if len(np.unique(rows)) != len(rows):
            raise InputError("column has duplicate row entries")
        if not np.all(np.isfinite(vals)) or not math.isfinite(cost):
            raise InputError("column coefficients must be finite")
        if lb > ub:
            raise InputError("column lower bound exceeds upper bound")
        if math.isinf(lb) and math.isinf(ub):
            raise InputError("fully free columns are not supported")
        self.costs.append(float(cost))
        self.col_rows.append(rows)
        self.col_vals.append(vals)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.names.append(name or f"x{self.n_cols - 1}")
        return self.n_cols - 1

    def dense(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_cols))
        for j, (rows, vals) in enumerate(zip(self.col_rows, self.col_vals)):
            a[rows, j] = vals
        return a

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.asarray(self.costs) @ x)

    def check_point(self, x: np.ndarray, tol: float = 1e-6) -> list[str]:
        """Feasibility audit of a full point against rows and bounds."""
        x = np.asarray(x, dtype=float)
        problems = []
        lhs = self.dense() @ x
        for i, (sense, b) in enumerate(zip(self.senses, self.rhs)):
            r = lhs[i] - b
            if sense == LE and r > tol:
                problems.append(f"row {i}: {lhs[i]:.9g} exceeds <= {b:.9g}")
            elif sense == GE and r < -tol:
                problems.append(f"row {i}: {lhs[i]:.9g} below >= {b:.9g}")
            elif sense == EQ and abs(r) > tol:
                problems.append(f"row {i}: {lhs[i]:.9g} != {b:.9g}")
        for j in range(self.n_cols):
            if x[j] < self.lb[j] - tol or x[j] > self.ub[j] + tol:
                problems.append(
                    f"col {j}: value {x[j]:.9g} outside [{self.lb[j]:.9g}, {self.ub[j]:.9g}]")
        return problems

    def write_lp_text(self, path) -> None:
        """Dump in the plain-text LP interchange format for external cross-checks."""
        def term(c, name, lead):
            sign = "-" if c < 0 else ("+" if not lead else "")
            return f"{sign} {abs(c):.12g} {name} ".replace("  ", " ")

        lines = ["Minimize", " obj: " + "".join(
            term(c, self.names[j], j == 0) for j, c in enumerate(self.costs))]
        lines.append("Subject To")
        by_row: dict[int, list[tuple[str, float]]] = {i: [] for i in range(self.n_rows)}
        for j, (rows, vals) in enumerate(zip(self.col_rows, self.col_vals)):
            for r, v in zip(rows, vals):
                by_row[int(r)].append((self.names[j], float(v)))
        op = {LE: "<=", GE: ">=", EQ: "="}
        for i in range(self.n_rows):
            body = "".join(term(v, nm, k == 0) for k, (nm, v) in enumerate(by_row[i]))
            if not body:
                body = "0 x0 " if self.n_cols else "0 "
            lines.append(f" c{i}: {body}{op[self.senses[i]]} {self.rhs[i]:.12g}")
        lines.append("Bounds")
        for j in range(self.n_cols):
            lo = f"{self.lb[j]:.12g}" if math.isfinite(self.lb[j]) else "-inf"
            hi = f"{self.ub[j]:.12g}" if math.isfinite(self.ub[j]) else "+inf"
            lines.append(f" {lo} <= {self.names[j]} <= {hi}")
        lines.append("End")
        text = "\n".join(lines) + "\n"
        if hasattr(path, "write"):
            path.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)


@dataclass
class Basis:
    """Opaque warm-start token.  Columns are identified by kind so the token
    survives appending new structural columns."""

    n_struct: int
    basis_kind: np.ndarray  # (m,) in {struct, slack, art}
    basis_idx: np.ndarray  # (m,)
    vstat_struct: np.ndarray
    vstat_slack: np.ndarray
    vstat_art: np.ndarray


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray]
    objective: Optional[float]
    duals: Optional[np.ndarray]
    reduced_costs: Optional[np.ndarray]
    basis: Optional[Basis]
    iterations: int = 0


class SimplexSolver:
    """Working arrays for one LP; reusable across bound overrides (B&B nodes)."""

    def __init__(self, lp: LinearProgram):
        m, n = lp.n_rows, lp.n_cols
        self.lp = lp
        self.m = m
        self.n = n
        self.ntot = n + 2 * m
        a = np.zeros((m, self.ntot))
        for j in range(n):
            a[lp.col_rows[j], j] = lp.col_vals[j]
        # slack columns: +e_i for every row
        a[np.arange(m), n + np.arange(m)] = 1.0
        self.A = a  # artificial block (last m cols) is set per cold start
        self.b = lp.rhs.copy()
        self.c = np.zeros(self.ntot)
        self.c[:n] = lp.costs
        lo = np.zeros(self.ntot)
        hi = np.zeros(self.ntot)
        lo[:n] = lp.lb
        hi[:n] = lp.ub
        for i, sense in enumerate(lp.senses):
            if sense == LE:
                lo[n + i], hi[n + i] = 0.0, math.inf
            elif sense == GE:
                lo[n + i], hi[n + i] = -math.inf, 0.0
            else:
                lo[n + i], hi[n + i] = 0.0, 0.0
        lo[n + m:] = 0.0
        hi[n + m:] = 0.0  # artificials stay fixed outside phase 1
        self.base_lo = lo
        self.base_hi = hi
        # mutable per-solve state
        self.lo = lo.copy()
        self.hi = hi.copy()
        self.basis = np.zeros(m, dtype=np.int64)
        self.vstat = np.zeros(self.ntot, dtype=np.int8)
        self.Binv = np.eye(m)
        self.xB = np.zeros(m)
        self.pivots = 0

    # -- bookkeeping -------------------------------------------------------

    def _nonbasic_values(self) -> np.ndarray:
        x = np.where(self.vstat == _AT_UP, self.hi, self.lo)
        x[self.vstat == _BASIC] = 0.0
        # nonbasic at an infinite bound cannot happen (guarded at status setup)
        return x

    def _recompute_basics(self):
        xn = self._nonbasic_values()
        resid = self.b - self.A @ xn
        self.xB = self.Binv @ resid

    def _refactorize(self) -> bool:
        bmat = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError:
            return False
        self._recompute_basics()
        return True

    def _pivot_update(self, r: int, w: np.ndarray):
        piv = w[r]
        self.Binv[r, :] /= piv
        others = np.arange(self.m) != r
        self.Binv[others, :] -= np.outer(w[others], self.Binv[r, :])
        self.pivots += 1
        if self.pivots % _REFACTOR_EVERY == 0:
            self._refactorize()

    def _duals_and_reduced(self, costs: np.ndarray):
        y = costs[self.basis] @ self.Binv
        d = costs - y @ self.A
        d[self.basis] = 0.0
        return y, d

    # -- primal simplex ----------------------------------------------------

    def _primal(self, costs: np.ndarray, max_iter: int) -> tuple[str, int]:
        movable = (self.hi - self.lo) > 0
        bland = False
        stall = 0
        last_obj = math.inf
        for it in range(max_iter):
            y, d = self._duals_and_reduced(costs)
            cand = ((self.vstat == _AT_LO) & movable & (d < -DUAL_TOL)) | \
                   ((self.vstat == _AT_UP) & movable & (d > DUAL_TOL))
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return OPTIMAL, it
            if bland:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(d[idx]))])
            s = 1.0 if self.vstat[q] == _AT_LO else -1.0
            w = self.Binv @ self.A[:, q]
            deltas = -s * w
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            ratios = np.full(self.m, math.inf)
            pos = deltas > PIVOT_TOL
            neg = deltas < -PIVOT_TOL
            with np.errstate(invalid="ignore"):
                ratios[pos] = (hi_b[pos] - self.xB[pos]) / deltas[pos]
                ratios[neg] = (lo_b[neg] - self.xB[neg]) / deltas[neg]
            ratios = np.maximum(ratios, 0.0)
            t_basic = ratios.min() if self.m else math.inf
            t_flip = self.hi[q] - self.lo[q]
            if t_flip <= t_basic:
                if math.isinf(t_flip):
                    return UNBOUNDED, it
                self.xB += deltas * t_flip
                self.vstat[q] = _AT_UP if self.vstat[q] == _AT_LO else _AT_LO
                step = t_flip
            else:
                if math.isinf(t_basic):
                    return UNBOUNDED, it
                near = np.flatnonzero(ratios <= t_basic + 1e-12)
                if bland:
                    r = int(near[np.argmin(self.basis[near])])
                else:
                    r = int(near[np.argmax(np.abs(deltas[near]))])
                t = max(ratios[r], 0.0)
                enter_val = (self.lo[q] if s > 0 else self.hi[q]) + s * t
                leave = self.basis[r]
                self.xB += deltas * t
                self.vstat[leave] = _AT_UP if deltas[r] > 0 else _AT_LO
                self.basis[r] = q
                self.vstat[q] = _BASIC
                self.xB[r] = enter_val
                self._pivot_update(r, w)
                step = t
            obj = costs[self.basis] @ self.xB + costs @ self._nonbasic_values()
            if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True
            last_obj = obj
            del step
        raise NumericalError("primal simplex iteration limit exceeded")

    # -- dual simplex ------------------------------------------------------

    def _dual(self, costs: np.ndarray, max_iter: int) -> tuple[str, int]:
        movable = (self.hi - self.lo) > 0
        for it in range(max_iter):
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            viol_lo = lo_b - self.xB
            viol_hi = self.xB - hi_b
            viol = np.maximum(viol_lo, viol_hi)
            worst = viol.max() if self.m else 0.0
            if worst <= FEAS_TOL:
                return OPTIMAL, it
            worst_rows = np.flatnonzero(viol >= worst - 1e-12)
            r = int(worst_rows[np.argmin(self.basis[worst_rows])])
            below = viol_lo[r] >= viol_hi[r]
            leave_dir = 1.0 if below else -1.0
            alphas = self.Binv[r, :] @ self.A
            _, d = self._duals_and_reduced(costs)
            s_vec = np.where(self.vstat == _AT_UP, -1.0, 1.0)
            effect = -alphas * s_vec * leave_dir
            admissible = (self.vstat != _BASIC) & movable & (effect > PIVOT_TOL)
            idx = np.flatnonzero(admissible)
            if idx.size == 0:
                return INFEASIBLE, it
            ratios = (d[idx] * s_vec[idx]) / effect[idx]
            ratios = np.maximum(ratios, 0.0)
            best = ratios.min()
            near = idx[np.flatnonzero(ratios <= best + 1e-12)]
            q = int(near.min())
            target = lo_b[r] if below else hi_b[r]
            e_q = -alphas[q] * s_vec[q]
            t = (target - self.xB[r]) / e_q
            w = self.Binv @ self.A[:, q]
            s_q = s_vec[q]
            self.xB += (-s_q * w) * t
            enter_val = (self.lo[q] if s_q > 0 else self.hi[q]) + s_q * t
            leave = self.basis[r]
            self.vstat[leave] = _AT_LO if below else _AT_UP
            self.basis[r] = q
            self.vstat[q] = _BASIC
            self.xB[r] = enter_val
            self._pivot_update(r, w)
        raise NumericalError("dual simplex iteration limit exceeded")

    # -- drivers -----------------------------------------------------------

    def _install_bounds(self, lb_override, ub_override):
        self.lo = self.base_lo.copy()
        self.hi = self.base_hi.copy()
        if lb_override is not None:
            self.lo[:self.n] = lb_override
        if ub_override is not None:
            self.hi[:self.n] = ub_override

    def _cold_statuses(self):
        vstat = np.zeros(self.ntot, dtype=np.int8)
        at_up = np.isinf(self.lo) & ~np.isinf(self.hi)
        vstat[at_up] = _AT_UP
        self.vstat = vstat

    def _phase1(self, max_iter: int) -> tuple[str, int]:
        n, m = self.n, self.m
        self._cold_statuses()
        self.basis = n + m + np.arange(m)
        # artificial signs chosen so initial basic values are nonnegative
        xn = np.where(self.vstat == _AT_UP, self.hi, self.lo)
        xn[self.basis] = 0.0
        resid = self.b - self.A[:, :n + m] @ xn[:n + m]
        sigma = np.where(resid >= 0, 1.0, -1.0)
        self.A[:, n + m:] = 0.0
        self.A[np.arange(m), n + m + np.arange(m)] = sigma
        self.lo[n + m:] = 0.0
        self.hi[n + m:] = math.inf
        self.vstat[self.basis] = _BASIC
        self.Binv = np.diag(sigma)  # inverse of diag(sigma)
        self.xB = np.abs(resid)
        costs1 = np.zeros(self.ntot)
        costs1[n + m:] = 1.0
        status, iters = self._primal(costs1, max_iter)
        if status != OPTIMAL:
            raise NumericalError("phase 1 ended abnormally")
        art_sum = float(costs1[self.basis] @ self.xB)
        self.hi[n + m:] = 0.0  # freeze artificials for phase 2
        if art_sum > 1e-7 * (1.0 + float(np.abs(self.b).max(initial=0.0))):
            return INFEASIBLE, iters
        # clip any residual artificial noise
        art_basic = np.flatnonzero(self.basis >= n + m)
        self.xB[art_basic] = 0.0
        return OPTIMAL, iters

    def solve(self, lb_override=None, ub_override=None,
              start: Optional[Basis] = None, max_iter: Optional[int] = None
              ) -> LpSolution:
        if max_iter is None:
            max_iter = 2000 + 60 * (self.m + self.ntot)
        self._install_bounds(lb_override, ub_override)
        if np.any(self.lo[:self.n] > self.hi[:self.n]):
            return LpSolution(INFEASIBLE, None, None, None, None, None, 0)
        iters = 0
        warm_ok = False
        if start is not None and start.n_struct <= self.n:
            warm_ok = self._install_basis(start)
        if warm_ok:
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            feas = np.all(self.xB >= lo_b - FEAS_TOL) and np.all(self.xB <= hi_b + FEAS_TOL)
            try:
                if feas:
                    status, it = self._primal(self.c, max_iter)
                    iters += it
                elif self._dual_feasible():
                    status, it = self._dual(self.c, max_iter)
                    iters += it
                    if status == OPTIMAL:
                        status, it2 = self._primal(self.c, max_iter)
                        iters += it2
                else:
                    warm_ok = False
                    status = None
            except NumericalError:
                warm_ok = False
                status = None
            if warm_ok and status == UNBOUNDED:
                return LpSolution(UNBOUNDED, None, None, None, None, None, iters)
            if warm_ok and status == INFEASIBLE:
                return LpSolution(INFEASIBLE, None, None, None, None, None, iters)
            if warm_ok and status == OPTIMAL:
                return self._extract(iters)
        # cold two-phase
        status, it = self._phase1(max_iter)
        iters += it
        if status == INFEASIBLE:
            return LpSolution(INFEASIBLE, None, None, None, None, None, iters)
        try:
            status, it = self._primal(self.c, max_iter)
        except NumericalError:
            # one retry from scratch under Bland-biased limits
            status, it = self._phase1(max_iter)
            iters += it
            if status == INFEASIBLE:
                return LpSolution(INFEASIBLE, None, None, None, None, None, iters)
            status, it = self._primal(self.c, max_iter * 2)
        iters += it
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, None, None, None, None, None, iters)
        return self._extract(iters)

    def _dual_feasible(self) -> bool:
        _, d = self._duals_and_reduced(self.c)
        movable = (self.hi - self.lo) > 0
        bad_lo = (self.vstat == _AT_LO) & movable & (d < -1e-7)
        bad_up = (self.vstat == _AT_UP) & movable & (d > 1e-7)
        return not (np.any(bad_lo) or np.any(bad_up))

    def _install_basis(self, start: Basis) -> bool:
        n, m = self.n, self.m
        if len(start.basis_kind) != m:
            return False
        basis = np.zeros(m, dtype=np.int64)
        for k in range(m):
            kind, idx = start.basis_kind[k], start.basis_idx[k]
            if kind == _K_STRUCT:
                if idx >= n:
                    return False
                basis[k] = idx
            elif kind == _K_SLACK:
                basis[k] = n + idx
            else:
                basis[k] = n + m + idx
        vstat = np.zeros(self.ntot, dtype=np.int8)
        vstat[:start.n_struct] = start.vstat_struct
        # columns appended after the token was made start at a finite bound
        for j in range(start.n_struct, n):
            vstat[j] = _AT_UP if math.isinf(self.lo[j]) else _AT_LO
        vstat[n:n + m] = start.vstat_slack
        vstat[n + m:] = start.vstat_art
        vstat[basis] = _BASIC
        self.basis = basis
        self.vstat = vstat
        # artificials outside phase 1 are fixed at zero with +e_i columns
        self.A[:, n + m:] = 0.0
        self.A[np.arange(m), n + m + np.arange(m)] = 1.0
        self.lo[n + m:] = 0.0
        self.hi[n + m:] = 0.0
        if not self._refactorize():
            return False
        return True

    def _extract(self, iters: int) -> LpSolution:
        n, m = self.n, self.m
        self._refactorize()
        x = self._nonbasic_values()
        x[self.basis] = self.xB
        y, d = self._duals_and_reduced(self.c)
        basis = Basis(
            n_struct=n,
            basis_kind=np.where(self.basis < n, _K_STRUCT,
                                np.where(self.basis < n + m, _K_SLACK, _K_ART)).astype(np.int8),
            basis_idx=np.where(self.basis < n, self.basis,
                               np.where(self.basis < n + m, self.basis - n,
                                        self.basis - n - m)).astype(np.int64),
            vstat_struct=self.vstat[:n].copy(),
            vstat_slack=self.vstat[n:n + m].copy(),
            vstat_art=self.vstat[n + m:].copy(),
        )
        obj = float(self.c[:n] @ x[:n])
        return LpSolution(OPTIMAL, x[:n].copy(), obj, y.copy(), d[:n].copy(),
                          basis, iters)


def solve(lp: LinearProgram) -> LpSolution:
    """Cold two-phase solve."""
    return SimplexSolver(lp).solve()


def warm_start_solve(lp: LinearProgram, basis: Optional[Basis]) -> LpSolution:
    """Re-solve after appending columns, starting from a previous basis.
    Falls back to a cold solve when the basis is missing or incompatible."""
    solver = SimplexSolver(lp)
    return solver.solve(start=basis)


def check_kkt(lp: LinearProgram, sol: LpSolution) -> dict[str, float]:
    """Residuals of the optimality conditions for an optimal solution.

    Returns primal feasibility, dual sign consistency, complementary
    slackness and the scaled duality gap; each should be below ``KKT_TOL``
    times ``1 + |objective|``.
    """
    if sol.status != OPTIMAL:
        raise InputError("KKT check requires an optimal solution")
    x, y, d = sol.x, sol.duals, sol.reduced_costs
    a = lp.dense()
    lhs = a @ x
    primal = 0.0
    compl_rows = 0.0
    for i, (sense, b) in enumerate(zip(lp.senses, lp.rhs)):
        r = lhs[i] - b
        if sense == LE:
            primal = max(primal, r)
            compl_rows = max(compl_rows, abs(y[i] * min(r, 0.0)))
        elif sense == GE:
            primal = max(primal, -r)
            compl_rows = max(compl_rows, abs(y[i] * max(r, 0.0)))
        else:
            primal = max(primal, abs(r))
    dual_sign = 0.0
    for i, sense in enumerate(lp.senses):
        if sense == LE:
            dual_sign = max(dual_sign, y[i])
        elif sense == GE:
            dual_sign = max(dual_sign, -y[i])
    # stationarity is identically satisfied by d = c - y A; check bound signs
    dual_feas = 0.0
    compl_cols = 0.0
    for j in range(lp.n_cols):
        lo, hi = lp.lb[j], lp.ub[j]
        at_lo = x[j] <= lo + 1e-7 * (1 + abs(lo)) if math.isfinite(lo) else False
        at_hi = x[j] >= hi - 1e-7 * (1 + abs(hi)) if math.isfinite(hi) else False
        if at_lo and not at_hi:
            dual_feas = max(dual_feas, -d[j])
        elif at_hi and not at_lo:
            dual_feas = max(dual_feas, d[j])
        elif not at_lo and not at_hi:
            compl_cols = max(compl_cols, abs(d[j]))
    dual_obj = float(y @ lp.rhs)
    for j in range(lp.n_cols):
        if d[j] > 0 and math.isfinite(lp.lb[j]):
            dual_obj += d[j] * lp.lb[j]
        elif d[j] < 0 and math.isfinite(lp.ub[j]):
            dual_obj += d[j] * lp.ub[j]
    gap = abs(sol.objective - dual_obj)
    return {
        "primal": float(primal),
        "dual_sign": float(dual_sign),
        "dual_feas": float(dual_feas),
        "complementarity": float(max(compl_rows, compl_cols)),
        "duality_gap": float(gap),
    }
