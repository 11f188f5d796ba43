"""Branch-and-bound mixed-integer solver over the embedded LP core.

Search rules are deterministic: branch on the most fractional variable with
ties broken by lowest index, select nodes best-bound-first with depth-first
plunging on equal bounds.  Child nodes re-solve with the dual simplex from
the parent basis.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lp as lpmod
from .model import InputError, InvariantError

INT_TOL = 1e-6

STATUS_OPTIMAL = "optimal"
STATUS_FEASIBLE = "feasible-gap"
STATUS_INFEASIBLE = "infeasible"
STATUS_TIME_LIMIT = "time-limit"


class BigMRegistry:
    """Named big-M constants, each validated to dominate the slack it relaxes."""

    def __init__(self):
        self._values: dict[str, float] = {}

    def register(self, name: str, value: float, must_dominate: float) -> float:
        if value < must_dominate - 1e-9:
            raise InputError(
                f"big-M {name!r} = {value} does not dominate required slack "
                f"{must_dominate}")
        self._values[name] = float(value)
        return float(value)

    def get(self, name: str) -> float:
        return self._values[name]

    def items(self):
        return dict(self._values)


@dataclass
class MipProblem:
    lp: lpmod.LinearProgram
    integer: np.ndarray  # bool mask per column
    big_m: Optional[BigMRegistry] = None
    name: str = "mip"

    def __post_init__(self):
        self.integer = np.asarray(self.integer, dtype=bool)
        if len(self.integer) != self.lp.n_cols:
            raise InputError("integrality mask length must match column count")


@dataclass
class MipSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    bound: float
    gap: float
    nodes: int
    pool: list[tuple[float, np.ndarray]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.x is not None


def _relative_gap(objective: float, bound: float) -> float:
    if math.isinf(objective):
        return math.inf
    return max(0.0, objective - bound) / max(1.0, abs(objective))


@dataclass(order=True)
class _Node:
    bound: float
    neg_depth: int
    node_id: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    basis: Optional[lpmod.Basis] = field(compare=False, default=None)


def solve(problem: MipProblem, time_limit: Optional[float] = None,
          gap_target: float = 0.0, node_limit: int = 200000,
          cutoff: Optional[float] = None, pool_target: int = 1,
          prune_on_cutoff: bool = False) -> MipSolution:
    """Minimize over the LP with integrality on the masked columns.

    ``cutoff`` discards any solution with objective >= cutoff; with
    ``prune_on_cutoff`` the tree is pruned against the cutoff instead of the
    incumbent, which lets the search collect up to ``pool_target`` distinct
    sub-cutoff solutions (used by the pricing harvesters) and stop early.
    """
    lp = problem.lp
    start_time = time.monotonic()
    solver = lpmod.SimplexSolver(lp)
    a_dense = lp.dense()
    costs = np.asarray(lp.costs)
    root_lb = np.asarray(lp.lb, dtype=float).copy()
    root_ub = np.asarray(lp.ub, dtype=float).copy()
    int_idx = np.flatnonzero(problem.integer)
    # integer variables need integral bounds for clean branching
    root_lb[int_idx] = np.ceil(root_lb[int_idx] - INT_TOL)
    finite_ub = int_idx[np.isfinite(root_ub[int_idx])]
    root_ub[finite_ub] = np.floor(root_ub[finite_ub] + INT_TOL)

    root_sol = solver.solve(lb_override=root_lb, ub_override=root_ub)
    nodes = 1
    if root_sol.status == lpmod.INFEASIBLE:
        return MipSolution(STATUS_INFEASIBLE, None, math.inf, math.inf, math.inf, nodes)
    if root_sol.status == lpmod.UNBOUNDED:
        raise InputError("MIP relaxation is unbounded")

    incumbent_x: Optional[np.ndarray] = None
    incumbent_obj = math.inf
    pool: list[tuple[float, np.ndarray]] = []
    pool_keys: set[tuple] = set()
    heap: list[_Node] = []
    next_id = 0
    prune_min = math.inf  # lowest bound among subtrees discarded by the cutoff level
    hit_limit = False
    early_stop = False

    def push(bound, depth, lbv, ubv, basis):
        nonlocal next_id
        heapq.heappush(heap, _Node(bound, -depth, next_id, lbv, ubv, basis))
        next_id += 1

    def prune_level():
        if prune_on_cutoff and cutoff is not None:
            return cutoff
        level = incumbent_obj
        if cutoff is not None:
            level = min(level, cutoff)
        return level

    def _check_rows(x):
        lhs = a_dense @ x
        for i, (sense, b) in enumerate(zip(lp.senses, lp.rhs)):
            r = lhs[i] - b
            if (sense == lpmod.LE and r > 1e-5) or \
               (sense == lpmod.GE and r < -1e-5) or \
               (sense == lpmod.EQ and abs(r) > 1e-5):
                return f"row {i} ({sense} {b:.6g}) lhs {lhs[i]:.6g}"
        return None

    def accept(x):
        nonlocal incumbent_x, incumbent_obj
        snapped = x.copy()
        snapped[int_idx] = np.round(snapped[int_idx])
        bad = _check_rows(snapped)
        if bad is not None:
            raise InvariantError(
                f"{problem.name}: integral incumbent violates original rows: {bad}")
        obj_s = float(costs @ snapped)
        if cutoff is not None and obj_s >= cutoff:
            return False
        key = tuple(int(round(v)) for v in snapped[int_idx])
        if key not in pool_keys:
            pool_keys.add(key)
            pool.append((obj_s, snapped))
            pool.sort(key=lambda t: t[0])
        if obj_s < incumbent_obj - 1e-12:
            incumbent_obj = obj_s
            incumbent_x = snapped
        return True

    push(root_sol.objective, 0, root_lb, root_ub, root_sol.basis)

    while heap:
        if time_limit is not None and time.monotonic() - start_time > time_limit:
            hit_limit = True
            break
        if nodes >= node_limit:
            hit_limit = True
            break
        node = heapq.heappop(heap)
        level = prune_level()
        if node.bound >= level - 1e-9 * (1 + abs(min(level, 1e30))):
            prune_min = min(prune_min, node.bound)
            continue
        if incumbent_x is not None and math.isfinite(gap_target) and \
                _relative_gap(incumbent_obj, node.bound) <= gap_target:
            heapq.heappush(heap, node)  # still open; bound accounting below
            early_stop = True
            break
        sol = solver.solve(lb_override=node.lb, ub_override=node.ub, start=node.basis)
        nodes += 1
        if sol.status != lpmod.OPTIMAL:
            continue  # infeasible child proves nothing below it
        level = prune_level()
        if sol.objective >= level - 1e-9 * (1 + abs(min(level, 1e30))):
            prune_min = min(prune_min, sol.objective)
            continue
        x = sol.x
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        fractional = np.flatnonzero(frac > INT_TOL)
        if fractional.size == 0:
            if accept(x) and prune_on_cutoff and len(pool) >= pool_target:
                early_stop = True
                break
            continue
        # most fractional; ties resolve to the lowest variable index
        scores = np.abs(frac[fractional] - 0.5)
        j = int(int_idx[fractional[int(np.argmin(scores))]])
        val = x[j]
        lb_dn, ub_dn = node.lb.copy(), node.ub.copy()
        ub_dn[j] = math.floor(val)
        lb_up, ub_up = node.lb.copy(), node.ub.copy()
        lb_up[j] = math.ceil(val)
        children = [(lb_dn, ub_dn), (lb_up, ub_up)]
        if (val - math.floor(val)) >= 0.5:
            children.reverse()
        for lbv, ubv in children:
            push(sol.objective, -node.neg_depth + 1, lbv, ubv, sol.basis)

    open_bounds = [n.bound for n in heap]
    if open_bounds:
        bound_global = min(open_bounds)
    elif hit_limit:
        bound_global = prune_min if math.isfinite(prune_min) else incumbent_obj
    elif incumbent_x is not None:
        bound_global = incumbent_obj  # tree exhausted: proven optimal at the cutoff level
    else:
        bound_global = prune_min  # exhausted without a solution below the cutoff

    if incumbent_x is None:
        status = STATUS_TIME_LIMIT if hit_limit else STATUS_INFEASIBLE
        return MipSolution(status, None, math.inf, bound_global, math.inf, nodes, pool)

    gap = _relative_gap(incumbent_obj, bound_global)
    if hit_limit and gap > gap_target:
        status = STATUS_FEASIBLE
    elif early_stop and prune_on_cutoff:
        status = STATUS_FEASIBLE  # found what was asked for, no optimality claim
    else:
        status = STATUS_OPTIMAL if gap <= gap_target + 1e-12 else STATUS_FEASIBLE
    return MipSolution(status, incumbent_x, incumbent_obj, bound_global, gap,
                       nodes, pool)


def solve_first_improving(problem: MipProblem, threshold: float,
                          time_limit: Optional[float] = None,
                          node_limit: int = 200000) -> MipSolution:
    """Find any integral solution with objective strictly below ``threshold``
    or prove none exists.  Nodes whose LP bound reaches the threshold are
    pruned, so a root bound at or above the threshold returns immediately."""
    return solve(problem, time_limit=time_limit, gap_target=math.inf,
                 node_limit=node_limit, cutoff=threshold, pool_target=1,
                 prune_on_cutoff=True)
