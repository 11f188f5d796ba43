"""Independent verification engine: forward replay of column itineraries and
brute-force enumerators used as ground truth in tests.

Replay recomputes every time, window and energy quantity from the scenario's
distances and rates; it shares no code with the LP/MILP pricing path.  The
enumerators are deliberately naive (subset DP, full action-string expansion)
and carry hard size caps so suites stay fast.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import model
from .model import (ACT_DISCHARGE, ACT_FREE, ACT_FREE_DISCHARGE, ACT_IDLE,
                    ACT_PAID, BATTERY, BATTERY_STATION, TRUCK, Column,
                    DualPrices, InputError, Scenario)

_EPS = 1e-9

V_STRUCTURAL = "structural"
V_TIME = "time-order"
V_SOC = "soc-bound"
V_RETURN = "return-energy"
V_WINDOW = "activity-window"

# action encoding shared by the enumerators
_A_IDLE, _A_PAID, _A_FREE, _A_DIS, _A_VDIS = 0, 1, 2, 3, 4
_DELTA = np.array([0, 1, 1, -1, -1], dtype=np.int64)
_ACTION_NAMES = {_A_PAID: ACT_PAID, _A_FREE: ACT_FREE,
                 _A_DIS: ACT_DISCHARGE, _A_VDIS: ACT_FREE_DISCHARGE}


@dataclass(frozen=True)
class ReplayResult:
    feasible: bool
    violations: tuple[str, ...]
    charge_paid: frozenset[tuple[int, int]]
    charge_free: frozenset[tuple[int, int]]
    discharge_grid: frozenset[tuple[int, int]]
    discharge_free: frozenset[tuple[int, int]]
    final_soc: Optional[float]


def _psi_sets(actions: Iterable[tuple[int, int, str]]):
    paid, free, dis, vdis = set(), set(), set(), set()
    table = {ACT_PAID: paid, ACT_FREE: free,
             ACT_DISCHARGE: dis, ACT_FREE_DISCHARGE: vdis}
    for sid, block, act in actions:
        if act in table:
            table[act].add((sid, block))
    return (frozenset(paid), frozenset(free), frozenset(dis), frozenset(vdis))


def replay(column: Column, scenario: Scenario) -> ReplayResult:
    """Walk the itinerary depot-to-depot, accumulating time and state of
    charge under the scenario's travel rules, and reconstruct the activity
    indicators.  Any recomputed quantity disagreeing with the recorded one is
    a violation; the oracle, not the column, is authoritative."""
    if column.kind == BATTERY:
        return _replay_battery(column, scenario)
    return _replay_truck(column, scenario)


def _replay_battery(column: Column, scenario: Scenario) -> ReplayResult:
    t_bar = scenario.horizon
    cap = scenario.energy.battery_capacity
    rate = scenario.energy.charge_rate
    violations: list[str] = []
    acts: list[tuple[int, int, str]] = []
    steps = [s for s in column.itinerary if s.node == "station"]
    if len(steps) != 1 or steps[0].ident != BATTERY_STATION:
        violations.append(f"{V_STRUCTURAL}: battery itinerary must be one depot station step")
        return _fail(violations)
    soc = cap
    for block, act in sorted(steps[0].actions):
        if not (0 <= block < t_bar):
            violations.append(f"{V_WINDOW}: block {block} outside horizon")
            continue
        if act == ACT_IDLE:
            continue
        if act not in _ACTION_NAMES.values():
            violations.append(f"{V_STRUCTURAL}: unknown action {act!r}")
            continue
        soc += rate if act in (ACT_PAID, ACT_FREE) else -rate
        if soc < -_EPS or soc > cap + _EPS:
            violations.append(f"{V_SOC}: battery soc {soc:.3f} outside [0, {cap}] at block {block}")
        acts.append((BATTERY_STATION, block, act))
    return _finish(column, violations, acts, soc)


def _replay_truck(column: Column, scenario: Scenario) -> ReplayResult:
    t_bar = scenario.horizon
    en = scenario.energy
    cap = en.battery_capacity
    rate = en.charge_rate
    depot = scenario.depot
    violations: list[str] = []
    steps = column.itinerary
    if len(steps) < 2 or steps[0].node != "depot" or steps[-1].node != "depot":
        violations.append(f"{V_STRUCTURAL}: itinerary must start and end at the depot")
        return _fail(violations)

    ev = any(s.soc_arrive is not None for s in steps) or bool(
        column.charge_paid or column.charge_free
        or column.discharge_grid or column.discharge_free)
    time = 0.0
    soc: Optional[float] = cap if ev else None
    loc = depot
    acts: list[tuple[int, int, str]] = []
    seen_trips: list[int] = []
    used_sets: list[int] = []
    prev_node = "depot"
    max_sets = scenario.max_charge_activities

    inner = steps[1:-1]
    for pos, step in enumerate(inner):
        if step.node == "trip":
            if not (0 <= step.ident < scenario.n_trips):
                violations.append(f"{V_STRUCTURAL}: unknown trip {step.ident}")
                return _fail(violations)
            trip = scenario.trips[step.ident]
            d = scenario.distance(loc, trip.start_loc)
            arrive = time + en.travel_time(d)
            if soc is not None:
                soc -= en.travel_energy(d)
                if soc < -_EPS:
                    violations.append(f"{V_SOC}: drained reaching trip {trip.id}")
            if arrive > trip.start_block + _EPS:
                violations.append(
                    f"{V_TIME}: arrive {arrive:.3f} after trip {trip.id} start {trip.start_block}")
            time = float(trip.end_block)
            if soc is not None:
                soc -= trip.energy
                if soc < -_EPS:
                    violations.append(f"{V_SOC}: drained during trip {trip.id}")
            loc = trip.end_loc
            seen_trips.append(trip.id)
            prev_node = "trip"
        elif step.node == "station":
            if not (0 <= step.ident < len(scenario.stations)):
                violations.append(f"{V_STRUCTURAL}: unknown station {step.ident}")
                return _fail(violations)
            st = scenario.stations[step.ident]
            if st.charge_set == 1 and prev_node != "depot":
                violations.append(
                    f"{V_STRUCTURAL}: set-1 station {st.id} entered from {prev_node}")
            if st.charge_set > 1 and prev_node != "trip":
                violations.append(
                    f"{V_STRUCTURAL}: set-{st.charge_set} station {st.id} entered from {prev_node}")
            if used_sets and st.charge_set <= used_sets[-1]:
                violations.append(f"{V_STRUCTURAL}: charge sets used out of order")
            if st.charge_set in used_sets:
                violations.append(f"{V_STRUCTURAL}: charge set {st.charge_set} reused")
            used_sets.append(st.charge_set)
            d = scenario.distance(loc, st.loc)
            window_start = time + en.travel_time(d)
            if soc is not None:
                soc -= en.travel_energy(d)
                if soc < -_EPS:
                    violations.append(f"{V_SOC}: drained reaching station {st.id}")
            # the departure deadline comes from the next leg, full-dwell rule
            nxt = inner[pos + 1] if pos + 1 < len(inner) else steps[-1]
            if nxt.node == "trip":
                trip = scenario.trips[nxt.ident]
                deadline = trip.start_block - en.travel_time(
                    scenario.distance(st.loc, trip.start_loc))
            else:
                deadline = t_bar - en.travel_time(scenario.distance(st.loc, depot))
            if window_start > deadline + _EPS:
                violations.append(
                    f"{V_TIME}: station {st.id} window [{window_start:.3f}, {deadline:.3f}] empty")
            for block, act in sorted(step.actions):
                if act == ACT_IDLE:
                    continue
                if act not in _ACTION_NAMES.values():
                    violations.append(f"{V_STRUCTURAL}: unknown action {act!r}")
                    continue
                if block < window_start - _EPS or block + 1 > deadline + _EPS:
                    violations.append(
                        f"{V_WINDOW}: block {block} outside station {st.id} dwell window")
                if soc is not None:
                    soc += rate if act in (ACT_PAID, ACT_FREE) else -rate
                    if soc < -_EPS or soc > cap + _EPS:
                        violations.append(
                            f"{V_SOC}: soc {soc:.3f} outside [0, {cap}] at station {st.id}")
                acts.append((st.id, block, act))
            time = max(window_start, deadline)
            loc = st.loc
            prev_node = "station"
        else:
            violations.append(f"{V_STRUCTURAL}: unexpected node {step.node!r}")
            return _fail(violations)

    if len(used_sets) > max_sets:
        violations.append(f"{V_STRUCTURAL}: {len(used_sets)} activities exceed limit {max_sets}")
    d = scenario.distance(loc, depot)
    arrive = time + en.travel_time(d)
    if arrive > t_bar + _EPS:
        violations.append(f"{V_TIME}: returns to depot at {arrive:.3f} past horizon {t_bar}")
    if soc is not None:
        soc -= en.travel_energy(d)
        if soc < -_EPS:
            violations.append(f"{V_RETURN}: not enough energy to return to the depot")
    if sorted(seen_trips) != sorted(column.trips):
        violations.append(f"{V_STRUCTURAL}: itinerary trips {sorted(seen_trips)} "
                          f"differ from coverage {sorted(column.trips)}")
    return _finish(column, violations, acts, soc)


def _fail(violations):
    return ReplayResult(False, tuple(violations), frozenset(), frozenset(),
                        frozenset(), frozenset(), None)


def _finish(column, violations, acts, soc):
    paid, free, dis, vdis = _psi_sets(acts)
    if (paid, free, dis, vdis) != (column.charge_paid, column.charge_free,
                                   column.discharge_grid, column.discharge_free):
        violations.append(f"{V_STRUCTURAL}: recorded indicators differ from replay")
    return ReplayResult(not violations, tuple(violations), paid, free, dis, vdis, soc)


# ---------------------------------------------------------------------------
# VSP enumerators
# ---------------------------------------------------------------------------

def _chain_time_feasible(scenario: Scenario, chain: Sequence[int]) -> bool:
    en = scenario.energy
    depot = scenario.depot
    trips = scenario.trips
    prev_loc = depot
    time = 0.0
    for tid in chain:
        trip = trips[tid]
        if time + en.travel_time(scenario.distance(prev_loc, trip.start_loc)) \
                > trip.start_block + _EPS:
            return False
        time = float(trip.end_block)
        prev_loc = trip.end_loc
    return time + en.travel_time(scenario.distance(prev_loc, depot)) <= scenario.horizon + _EPS


def enumerate_vsp(scenario: Scenario) -> tuple[float, tuple[tuple[int, ...], ...]]:
    """Exact VSP optimum by subset-DP over set partitions into feasible chains.

    Capped at 8 trips.  Returns (objective, partition as sorted trip tuples).
    """
    n = scenario.n_trips
    if n > 8:
        raise InputError("enumerate_vsp is capped at 8 trips")
    if n == 0:
        return 0.0, ()
    order = sorted(range(n), key=lambda i: (scenario.trips[i].start_block, i))
    feasible: dict[int, tuple[int, ...]] = {}
    for mask in range(1, 1 << n):
        chain = tuple(i for i in order if mask & (1 << i))
        if _chain_time_feasible(scenario, chain):
            feasible[mask] = chain
    c_b = scenario.costs.truck_cost
    full = (1 << n) - 1
    best = {0: (0.0, ())}
    for mask in range(1, full + 1):
        low = mask & -mask
        cand = None
        sub = mask
        while sub:
            if sub & low and sub in feasible and (mask ^ sub) in best:
                cost = best[mask ^ sub][0] + c_b
                if cand is None or cost < cand[0]:
                    cand = (cost, best[mask ^ sub][1] + (feasible[sub],))
            sub = (sub - 1) & mask
        if cand is not None:
            best[mask] = cand
    if full not in best:
        raise InputError("no feasible partition: some trip cannot be served alone")
    cost, parts = best[full]
    return cost, tuple(sorted(parts))


def enumerate_vsp_pricing(scenario: Scenario, alpha: np.ndarray
                          ) -> tuple[float, tuple[int, ...]]:
    """Minimum reduced cost over every ordered feasible trip subset (<= 6 trips)."""
    n = scenario.n_trips
    if n > 6:
        raise InputError("enumerate_vsp_pricing is capped at 6 trips")
    c_b = scenario.costs.truck_cost
    best = (math.inf, ())
    for subset in range(1, 1 << n):
        ids = [i for i in range(n) if subset & (1 << i)]
        for perm in itertools.permutations(ids):
            if _chain_time_feasible(scenario, perm):
                rc = c_b - float(sum(alpha[i] for i in perm))
                if rc < best[0] - 1e-12:
                    best = (rc, perm)
                break  # any feasible order has the same reduced cost
    return best


# ---------------------------------------------------------------------------
# battery enumerator
# ---------------------------------------------------------------------------

def _action_matrix(n_blocks: int, n_actions: int = 5) -> np.ndarray:
    count = n_actions ** n_blocks
    powers = n_actions ** np.arange(n_blocks - 1, -1, -1, dtype=np.int64)
    return (np.arange(count, dtype=np.int64)[:, None] // powers) % n_actions


def _action_matrix_mixed(allowed_lists: list[np.ndarray],
                         limit: int = 2_000_000) -> np.ndarray:
    """All action strings with position p restricted to allowed_lists[p]."""
    radices = [len(a) for a in allowed_lists]
    count = 1
    for r in radices:
        count *= r
        if count > limit:
            raise InputError("oracle pattern enumeration exceeds its size cap")
    if not radices:
        return np.zeros((1, 0), dtype=np.int64)
    digits = np.zeros((count, len(radices)), dtype=np.int64)
    idx = np.arange(count, dtype=np.int64)
    for p in range(len(radices) - 1, -1, -1):
        digits[:, p] = allowed_lists[p][idx % radices[p]]
        idx //= radices[p]
    return digits


def _battery_contrib(scenario: Scenario, duals: DualPrices, mode_solar: bool
                     ) -> np.ndarray:
    t_bar = scenario.horizon
    rate = scenario.energy.charge_rate
    eta = scenario.costs.loss_penalty
    price = scenario.costs.battery_price
    contrib = np.zeros((5, t_bar))
    contrib[_A_PAID] = rate * price * (1.0 + eta)
    contrib[_A_FREE] = -rate * duals.beta
    contrib[_A_DIS] = -rate * price - rate * duals.gamma
    contrib[_A_VDIS] = rate * duals.beta
    if mode_solar:
        contrib[_A_DIS] = math.inf
        contrib[_A_VDIS] = math.inf
    return contrib


def enumerate_battery(scenario: Scenario, duals: DualPrices,
                      allow_discharge: bool = True
                      ) -> tuple[float, tuple[int, ...]]:
    """Brute force over all 5^horizon battery action strings (horizon <= 7).

    Returns the minimum reduced cost and the best action string (encoded);
    the idle schedule gives reduced cost exactly ``battery_cost``.
    """
    t_bar = scenario.horizon
    if t_bar > 7:
        raise InputError("enumerate_battery is capped at a 7-block horizon")
    cap = scenario.energy.battery_capacity
    rate = scenario.energy.charge_rate
    seqs = _action_matrix(t_bar)
    deltas = _DELTA[seqs]
    soc = cap + rate * np.cumsum(deltas, axis=1)
    ok = np.all((soc >= -_EPS) & (soc <= cap + _EPS), axis=1)
    contrib = _battery_contrib(scenario, duals, mode_solar=not allow_discharge)
    with np.errstate(invalid="ignore"):
        costs = contrib[seqs, np.arange(t_bar)[None, :]].sum(axis=1)
    costs[~ok] = math.inf
    best = int(np.argmin(costs))
    rc = scenario.costs.battery_cost + float(costs[best])
    return rc, tuple(int(a) for a in seqs[best])


# ---------------------------------------------------------------------------
# EV route-shape enumeration (shared by the pricing and master oracles)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Shape:
    chain: tuple[int, ...]
    # station visits in route order: (slot, station_id) where slot -1 is the
    # pre-trip depot pull-out and slot g >= 0 follows chain[g]
    visits: tuple[tuple[int, int], ...]


def _window_blocks(scenario: Scenario, shape: _Shape, visit: tuple[int, int]
                   ) -> Optional[list[int]]:
    """Blocks fully inside the full-dwell window of a visit, or None if the
    visit cannot be scheduled (negative window)."""
    en = scenario.energy
    depot = scenario.depot
    slot, sid = visit
    st = scenario.stations[sid]
    chain = shape.chain
    if slot == -1:
        start = en.travel_time(scenario.distance(depot, st.loc))
        if chain:
            nxt = scenario.trips[chain[0]]
            end = nxt.start_block - en.travel_time(scenario.distance(st.loc, nxt.start_loc))
        else:
            end = scenario.horizon - en.travel_time(scenario.distance(st.loc, depot))
    else:
        prev = scenario.trips[chain[slot]]
        start = prev.end_block + en.travel_time(scenario.distance(prev.end_loc, st.loc))
        if slot + 1 < len(chain):
            nxt = scenario.trips[chain[slot + 1]]
            end = nxt.start_block - en.travel_time(scenario.distance(st.loc, nxt.start_loc))
        else:
            end = scenario.horizon - en.travel_time(scenario.distance(st.loc, depot))
    if start > end + _EPS:
        return None
    lo = int(math.ceil(start - _EPS))
    hi = int(math.floor(end + _EPS)) - 1
    return [b for b in range(lo, hi + 1) if 0 <= b < scenario.horizon]


def _shape_drains(scenario: Scenario, shape: _Shape) -> Optional[tuple[list[float], float]]:
    """Fixed energy drains before each visit (cumulative) and in total.

    Returns None when the shape is time-infeasible without charging concerns.
    Positions follow route order: depot [-> pre station] -> trips with their
    optional gap stations -> depot.
    """
    en = scenario.energy
    depot = scenario.depot
    chain = shape.chain
    visit_by_slot = dict()
    for slot, sid in shape.visits:
        visit_by_slot[slot] = sid
    # time feasibility of trip-to-trip legs (stations never relax it)
    prev_loc = depot
    time = 0.0
    for k, tid in enumerate(chain):
        trip = scenario.trips[tid]
        if time + en.travel_time(scenario.distance(prev_loc, trip.start_loc)) \
                > trip.start_block + _EPS:
            return None
        time = float(trip.end_block)
        prev_loc = trip.end_loc
    if chain and time + en.travel_time(scenario.distance(prev_loc, depot)) \
            > scenario.horizon + _EPS:
        return None

    drains: list[float] = []
    total = 0.0
    loc = depot
    if -1 in visit_by_slot:
        st = scenario.stations[visit_by_slot[-1]]
        total += en.travel_energy(scenario.distance(loc, st.loc))
        drains.append(total)
        loc = st.loc
    for k, tid in enumerate(chain):
        trip = scenario.trips[tid]
        total += en.travel_energy(scenario.distance(loc, trip.start_loc)) + trip.energy
        loc = trip.end_loc
        if k in visit_by_slot:
            st = scenario.stations[visit_by_slot[k]]
            total += en.travel_energy(scenario.distance(loc, st.loc))
            drains.append(total)
            loc = st.loc
    total += en.travel_energy(scenario.distance(loc, depot))
    return drains, total


def _iter_shapes(scenario: Scenario, max_chain: Optional[int] = None):
    """All route shapes: time-ordered trip chains with station visits whose
    charge-set labels increase along the route, at most one per set, set 1
    reachable only straight from the depot."""
    n = scenario.n_trips
    trips_sorted = sorted(range(n), key=lambda i: (scenario.trips[i].start_block, i))
    chains: list[tuple[int, ...]] = []
    for mask in range(0, 1 << n):
        chain = tuple(i for i in trips_sorted if mask & (1 << i))
        if max_chain is not None and len(chain) > max_chain:
            continue
        chains.append(chain)
    set1 = [st.id for st in scenario.stations if st.charge_set == 1]
    later = [st.id for st in scenario.stations if st.charge_set > 1]
    for chain in chains:
        gap_slots = list(range(len(chain)))
        pre_options: list[Optional[int]] = [None] + set1
        for pre in pre_options:
            if not chain and pre is None:
                continue  # a route must pull out somewhere
            base = [(-1, pre)] if pre is not None else []
            yield _Shape(tuple(chain), tuple(base))
            # add ordered combinations of later-set stations in the gaps
            for count in range(1, len(gap_slots) + 1):
                for slots in itertools.combinations(gap_slots, count):
                    for sids in itertools.permutations(later, count):
                        labels = [scenario.stations[s].charge_set for s in sids]
                        if labels != sorted(labels) or len(set(labels)) != count:
                            continue
                        yield _Shape(tuple(chain),
                                     tuple(base) + tuple(zip(slots, sids)))


def _shape_patterns(scenario: Scenario, shape: _Shape, allowed: np.ndarray):
    """Vectorized enumeration of all action patterns of a shape.

    ``allowed`` is a (5, horizon) boolean mask of admissible actions per
    block.  Yields nothing if the shape is infeasible.  Returns (positions,
    action_matrix, soc_ok) where positions is a list of (station, block).
    """
    prep = _shape_drains(scenario, shape)
    if prep is None:
        return None
    drains, total_drain = prep
    positions: list[tuple[int, int]] = []
    drain_at: list[float] = []
    for k, visit in enumerate(shape.visits):
        blocks = _window_blocks(scenario, shape, visit)
        if blocks is None:
            return None
        for b in blocks:
            positions.append((visit[1], b))
            drain_at.append(drains[k])
    cap = scenario.energy.battery_capacity
    rate = scenario.energy.charge_rate
    n_pos = len(positions)
    if cap - total_drain < -_EPS and n_pos == 0:
        return None
    if n_pos == 0:
        if any(cap - d < -_EPS for d in drains):
            return None
        return positions, np.zeros((1, 0), dtype=np.int64)
    seqs = _action_matrix_mixed(
        [np.flatnonzero(allowed[:, b]) for _, b in positions])
    deltas = _DELTA[seqs]
    cum = np.cumsum(deltas, axis=1)
    base_after = cap - np.asarray(drain_at)
    soc_after = base_after[None, :] + rate * cum
    soc_before = soc_after - rate * deltas
    ok = np.all((soc_after >= -_EPS) & (soc_after <= cap + _EPS)
                & (soc_before >= -_EPS) & (soc_before <= cap + _EPS), axis=1)
    final = cap - total_drain + rate * cum[:, -1]
    ok &= final >= -_EPS
    return positions, seqs[ok]


def _pattern_costs(scenario: Scenario, positions, seqs) -> np.ndarray:
    """Energy cost terms (paid/ discharge) per pattern, excluding fixed costs."""
    rate = scenario.energy.charge_rate
    eta = scenario.costs.loss_penalty
    price = scenario.costs.charge_price
    out = np.zeros(len(seqs))
    for p, (sid, b) in enumerate(positions):
        pr = rate * price[sid, b]
        out += np.where(seqs[:, p] == _A_PAID, pr * (1.0 + eta), 0.0)
        out -= np.where(seqs[:, p] == _A_DIS, pr, 0.0)
    return out


def _mode_allowed(scenario: Scenario, allow_discharge: bool) -> np.ndarray:
    allowed = np.ones((5, scenario.horizon), dtype=bool)
    if not allow_discharge:
        allowed[_A_DIS] = False
        allowed[_A_VDIS] = False
    return allowed


def enumerate_ev_pricing(scenario: Scenario, duals: DualPrices,
                         allow_discharge: bool = True
                         ) -> tuple[float, Optional[_Shape]]:
    """Exhaustive minimum reduced cost over all single truck routes.

    Route shapes x activity patterns, no cap constraints (pricing has none).
    Capped at 3 trips and 9 activity blocks per shape.
    """
    if scenario.n_trips > 3:
        raise InputError("enumerate_ev_pricing is capped at 3 trips")
    rate = scenario.energy.charge_rate
    allowed = _mode_allowed(scenario, allow_discharge)
    best = (math.inf, None)
    for shape in _iter_shapes(scenario):
        res = _shape_patterns(scenario, shape, allowed)
        if res is None:
            continue
        positions, seqs = res
        if len(seqs) == 0:
            continue
        cost = scenario.costs.truck_cost + _pattern_costs(scenario, positions, seqs)
        rc = cost - float(sum(duals.alpha[i] for i in shape.chain))
        for p, (sid, b) in enumerate(positions):
            rc -= rate * duals.beta[b] * ((seqs[:, p] == _A_FREE).astype(float)
                                          - (seqs[:, p] == _A_VDIS))
            rc -= rate * duals.gamma[b] * (seqs[:, p] == _A_DIS)
        k = int(np.argmin(rc))
        if rc[k] < best[0] - 1e-12:
            best = (float(rc[k]), shape)
    return best


# ---------------------------------------------------------------------------
# full EVSP-V2G master enumeration (tiny instances)
# ---------------------------------------------------------------------------

def _partitions(ids: tuple[int, ...]):
    if not ids:
        yield ()
        return
    first, rest = ids[0], ids[1:]
    for sub in _partitions(rest):
        yield ((first,),) + sub
        for k in range(len(sub)):
            yield sub[:k] + ((first,) + sub[k],) + sub[k + 1:]


def _usage_vectors(positions, seqs, horizon):
    dis = np.zeros((len(seqs), horizon), dtype=np.int64)
    fnet = np.zeros((len(seqs), horizon), dtype=np.int64)
    for p, (sid, b) in enumerate(positions):
        dis[:, b] += seqs[:, p] == _A_DIS
        fnet[:, b] += (seqs[:, p] == _A_FREE).astype(np.int64) - (seqs[:, p] == _A_VDIS)
    return dis, fnet


def _pareto(options: list[tuple[float, tuple, tuple]]):
    """Keep cost-minimal options per usage signature, then drop dominated ones
    (componentwise higher usage at no lower cost)."""
    by_sig: dict[tuple, tuple[float, tuple, tuple]] = {}
    for cost, dis, fnet in options:
        sig = (dis, fnet)
        if sig not in by_sig or cost < by_sig[sig][0] - 1e-12:
            by_sig[sig] = (cost, dis, fnet)
    items = sorted(by_sig.values())
    kept: list[tuple[float, tuple, tuple]] = []
    for cand in items:
        dominated = False
        for other in kept:
            if other[0] <= cand[0] + 1e-12 and \
                    all(o <= c for o, c in zip(other[1], cand[1])) and \
                    all(o <= c for o, c in zip(other[2], cand[2])):
                dominated = True
                break
        if not dominated:
            kept.append(cand)
    return kept


def enumerate_evsp(scenario: Scenario, allow_discharge: bool = True,
                   max_batteries: Optional[int] = None) -> float:
    """Exact integer optimum of the full EVSP master on a tiny instance by
    exhaustive enumeration: all trip partitions x all route columns per part
    x all battery multisets, under the per-block discharge and free-charge
    caps.  Capped at 3 trips, 10 blocks and small cap totals."""
    n = scenario.n_trips
    t_bar = scenario.horizon
    if n > 3:
        raise InputError("enumerate_evsp is capped at 3 trips")
    if t_bar > 10:
        raise InputError("enumerate_evsp is capped at a 10-block horizon")
    rate = scenario.energy.charge_rate
    profiles = scenario.profiles
    cap_dis = np.floor(profiles.net_pos / rate + _EPS).astype(np.int64)
    cap_fnet = np.floor(profiles.net_neg / rate + _EPS).astype(np.int64)

    allowed = _mode_allowed(scenario, allow_discharge)
    # a lone column can never discharge more than the block cap admits
    allowed[_A_DIS] &= cap_dis > 0

    # column options per trip subset (mask) served by one truck
    options_by_mask: dict[int, list[tuple[float, tuple, tuple]]] = {}
    for shape in _iter_shapes(scenario):
        res = _shape_patterns(scenario, shape, allowed)
        if res is None:
            continue
        positions, seqs, _ = res
        if len(seqs) == 0:
            continue
        mask = sum(1 << i for i in shape.chain)
        if mask == 0:
            continue  # tripless trucks are dominated by batteries here
        cost = scenario.costs.truck_cost + _pattern_costs(scenario, positions, seqs)
        dis, fnet = _usage_vectors(positions, seqs, t_bar)
        opts = options_by_mask.setdefault(mask, [])
        for k in range(len(seqs)):
            opts.append((float(cost[k]), tuple(dis[k]), tuple(fnet[k])))
    options_by_mask = {m: _pareto(v) for m, v in options_by_mask.items()}

    # battery schedule options (idle battery excluded: it only adds cost)
    batt_limit = 7 if t_bar > 7 else t_bar
    if t_bar <= 8:
        seqs = _action_matrix(t_bar)
    else:
        raise InputError("enumerate_evsp battery expansion capped at 8 blocks")
    del batt_limit
    keep = np.ones(len(seqs), dtype=bool)
    for b in range(t_bar):
        bad = np.flatnonzero(~allowed[:, b])
        if bad.size:
            keep &= ~np.isin(seqs[:, b], bad)
    seqs = seqs[keep]
    cap_kwh = scenario.energy.battery_capacity
    soc = cap_kwh + rate * np.cumsum(_DELTA[seqs], axis=1)
    seqs = seqs[np.all((soc >= -_EPS) & (soc <= cap_kwh + _EPS), axis=1)]
    eta = scenario.costs.loss_penalty
    bprice = scenario.costs.battery_price
    bcost = np.full(len(seqs), scenario.costs.battery_cost)
    for b in range(t_bar):
        pr = rate * bprice[b]
        bcost += np.where(seqs[:, b] == _A_PAID, pr * (1 + eta), 0.0)
        bcost -= np.where(seqs[:, b] == _A_DIS, pr, 0.0)
    bdis = (seqs == _A_DIS).astype(np.int64)
    bfnet = (seqs == _A_FREE).astype(np.int64) - (seqs == _A_VDIS).astype(np.int64)
    batt_opts = _pareto([
        (float(bcost[k]), tuple(bdis[k]), tuple(bfnet[k]))
        for k in range(len(seqs))
        if not np.all(seqs[k] == _A_IDLE)
    ])
    if max_batteries is None:
        max_batteries = int(cap_dis.sum() + cap_fnet.sum()) + 2

    best = math.inf

    def battery_phase(cost, dis_used, fnet_used, start, count):
        nonlocal best
        feas_dis = all(u <= c for u, c in zip(dis_used, cap_dis))
        feas_f = all(u <= c for u, c in zip(fnet_used, cap_fnet))
        if feas_dis and feas_f and cost < best - 1e-12:
            best = cost
        if count >= max_batteries:
            return
        # lower bound: remaining v2g revenue can at most offset this much
        remaining = sum(max(0, c - u) for c, u in zip(cap_dis, dis_used))
        lb = cost - remaining * rate * float(bprice.max(initial=0.0))
        if lb >= best - 1e-12:
            return
        for i in range(start, len(batt_opts)):
            bc, bd, bf = batt_opts[i]
            nd = tuple(a + b for a, b in zip(dis_used, bd))
            if any(u > c for u, c in zip(nd, cap_dis)):
                continue
            nf = tuple(a + b for a, b in zip(fnet_used, bf))
            battery_phase(cost + bc, nd, nf, i, count + 1)

    def assign(parts, idx, cost, dis_used, fnet_used):
        if cost >= best - 1e-12 and idx < len(parts):
            # optimistic: remaining parts cost at least their cheapest option
            rest = sum(min(o[0] for o in options_by_mask[m]) for m in parts[idx:])
            if cost + rest >= best - 1e-12:
                return
        if idx == len(parts):
            battery_phase(cost, dis_used, fnet_used, 0, 0)
            return
        for oc, od, of in options_by_mask[parts[idx]]:
            nd = tuple(a + b for a, b in zip(dis_used, od))
            if any(u > c for u, c in zip(nd, cap_dis)):
                continue
            nf = tuple(a + b for a, b in zip(fnet_used, of))
            assign(parts, idx + 1, cost + oc, nd, nf)

    zero = tuple(0 for _ in range(t_bar))
    for partition in _partitions(tuple(range(n))):
        masks = [sum(1 << i for i in part) for part in partition]
        if any(m not in options_by_mask for m in masks):
            continue
        assign(masks, 0, 0.0, zero, zero)
    if math.isinf(best):
        raise InputError("no feasible fleet covers the trips")
    return float(best)
