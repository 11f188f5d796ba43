"""Domain types and pure accounting operations shared by every solver stage.

Conventions used throughout the package:

* Time is discretized into ``horizon`` blocks (default 24 hourly blocks);
  block ``t`` covers the interval ``[t, t+1)``.
* Distances are Manhattan distances on integer grid coordinates.  A distance
  of ``d`` costs ``d / speed`` blocks of travel time and
  ``d * travel_energy_per_dist`` kWh of battery energy.
* Charging or discharging for one block moves ``charge_rate`` kWh.
* All types are immutable after construction; every operation here is a pure
  function and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

# Column kinds
TRUCK = "truck"
BATTERY = "battery"

# Activity labels (also used by the timeline CSV)
ACT_PAID = "paid"
ACT_FREE = "free"
ACT_DISCHARGE = "discharge"
ACT_FREE_DISCHARGE = "free-discharge"
ACT_IDLE = "idle"
ACTIVE_ACTIONS = (ACT_PAID, ACT_FREE, ACT_DISCHARGE, ACT_FREE_DISCHARGE)

#: station id used by stationary battery schedules (they sit at the depot).
BATTERY_STATION = -1


class InputError(ValueError):
    """Raised for malformed user input (scenarios, profiles, CLI configs)."""


class ContractError(TypeError):
    """Raised when an operation is called with the wrong kind of object."""


class InvariantError(RuntimeError):
    """Raised when an internal consistency check fails (a bug, not bad input)."""


def manhattan(a: Sequence[int], b: Sequence[int]) -> int:
    return abs(int(a[0]) - int(b[0])) + abs(int(a[1]) - int(b[1]))


@dataclass(frozen=True)
class Trip:
    """A timetabled task: fixed start/end blocks, locations and energy draw."""

    id: int
    start_block: int
    end_block: int
    start_loc: tuple[int, int]
    end_loc: tuple[int, int]
    energy: float  # kWh consumed by performing the trip itself

    def __post_init__(self):
        if self.start_block >= self.end_block:
            raise InputError(f"trip {self.id}: start block must precede end block")
        if self.energy <= 0:
            raise InputError(f"trip {self.id}: energy must be positive")


@dataclass(frozen=True)
class Station:
    """One charging-activity slot.  ``charge_set`` indexes the activity number
    (1..L) this copy belongs to; copies in different sets may share a location."""

    id: int
    loc: tuple[int, int]
    charge_set: int

    def __post_init__(self):
        if self.charge_set < 1:
            raise InputError(f"station {self.id}: charge_set must be >= 1")


@dataclass(frozen=True)
class Profiles:
    """Demand/solar series (kW per block) and the derived net-demand split."""

    demand: np.ndarray
    solar: np.ndarray
    net: np.ndarray = field(init=False)

    def __post_init__(self):
        d = np.asarray(self.demand, dtype=float)
        s = np.asarray(self.solar, dtype=float)
        if d.shape != s.shape or d.ndim != 1:
            raise InputError("demand and solar series must be 1-D and equal length")
        if np.any(d < 0) or np.any(s < 0):
            raise InputError("demand and solar series must be nonnegative")
        net = d - s
        for arr in (d, s, net):
            arr.setflags(write=False)
        object.__setattr__(self, "demand", d)
        object.__setattr__(self, "solar", s)
        object.__setattr__(self, "net", net)

    @property
    def horizon(self) -> int:
        return len(self.demand)

    @property
    def net_pos(self) -> np.ndarray:
        """Positive part of net demand per block (kWh to be generated)."""
        return np.maximum(self.net, 0.0)

    @property
    def net_neg(self) -> np.ndarray:
        """Negative part of net demand per block (surplus solar kWh)."""
        return np.maximum(-self.net, 0.0)


def net_demand(demand: Sequence[float], solar: Sequence[float]) -> Profiles:
    """Split demand minus solar into its positive and negative parts.

    The parts are complementary: at most one of them is nonzero per block.
    """
    return Profiles(np.asarray(demand, dtype=float), np.asarray(solar, dtype=float))


@dataclass(frozen=True)
class CostParams:
    """Cost coefficients.  ``charge_price`` is stations x blocks; the battery
    price series applies to stationary battery schedules."""

    truck_cost: float
    battery_cost: float
    gen_cost: float
    charge_price: np.ndarray  # shape (n_stations, horizon), currency per kWh
    battery_price: np.ndarray  # shape (horizon,), currency per kWh
    loss_penalty: float  # eta > 0, applied to paid charging

    def __post_init__(self):
        cp = np.asarray(self.charge_price, dtype=float)
        bp = np.asarray(self.battery_price, dtype=float)
        if cp.ndim != 2 or bp.ndim != 1:
            raise InputError("charge_price must be 2-D (stations x blocks), battery_price 1-D")
        if not (self.truck_cost > self.battery_cost > 0):
            raise InputError("expected truck_cost > battery_cost > 0")
        if self.loss_penalty <= 0:
            raise InputError("loss_penalty must be positive")
        cp.setflags(write=False)
        bp.setflags(write=False)
        object.__setattr__(self, "charge_price", cp)
        object.__setattr__(self, "battery_price", bp)

    @staticmethod
    def uniform(truck_cost: float, battery_cost: float, gen_cost: float,
                charge_price: float, loss_penalty: float,
                n_stations: int, horizon: int) -> "CostParams":
        return CostParams(
            truck_cost=truck_cost,
            battery_cost=battery_cost,
            gen_cost=gen_cost,
            charge_price=np.full((max(n_stations, 1), horizon), charge_price),
            battery_price=np.full(horizon, charge_price),
            loss_penalty=loss_penalty,
        )


@dataclass(frozen=True)
class EnergyParams:
    """Physical parameters: battery size, per-block charge rate, travel model."""

    battery_capacity: float = 700.0  # kWh
    charge_rate: float = 100.0  # kWh per block
    trip_energy: float = 200.0  # kWh per trip at the default intensity
    speed: float = 1.0  # distance units per block
    horizon: int = 24  # number of time blocks
    kwh_per_gallon: float = 33.0
    travel_energy_per_dist: Optional[float] = None  # kWh per distance unit

    def __post_init__(self):
        if self.battery_capacity <= 0 or self.charge_rate <= 0 or self.speed <= 0:
            raise InputError("battery_capacity, charge_rate and speed must be positive")
        if self.horizon < 1:
            raise InputError("horizon must be at least one block")
        if self.travel_energy_per_dist is None:
            # d then doubles as both travel time (d/speed blocks) and energy.
            object.__setattr__(self, "travel_energy_per_dist", self.charge_rate / self.speed)

    def travel_time(self, dist: float) -> float:
        return dist / self.speed

    def travel_energy(self, dist: float) -> float:
        return dist * float(self.travel_energy_per_dist)


@dataclass(frozen=True)
class ItineraryStep:
    """One visited node of a route, kept for audit and replay."""

    node: str  # "depot" | "trip" | "station"
    ident: int  # trip id, station id, or -1 for the depot
    arrive: float  # block time of arrival
    depart: float  # block time of departure
    soc_arrive: Optional[float]  # kWh on arrival; None for ICE (VSP) trucks
    actions: tuple[tuple[int, str], ...] = ()  # (block, activity) at stations


@dataclass(frozen=True)
class Column:
    """A master-problem variable: a truck route or a stationary battery schedule.

    The four indicator sets hold (station_id, block) pairs; for battery
    schedules the station id is ``BATTERY_STATION`` and ``trips`` is empty.
    """

    kind: str
    cost: float
    trips: frozenset[int]
    charge_paid: frozenset[tuple[int, int]]
    charge_free: frozenset[tuple[int, int]]
    discharge_grid: frozenset[tuple[int, int]]
    discharge_free: frozenset[tuple[int, int]]
    itinerary: tuple[ItineraryStep, ...] = ()

    def __post_init__(self):
        if self.kind not in (TRUCK, BATTERY):
            raise InputError(f"unknown column kind {self.kind!r}")
        if self.kind == BATTERY and self.trips:
            raise InputError("battery schedules cannot cover trips")
        sets = (self.charge_paid, self.charge_free,
                self.discharge_grid, self.discharge_free)
        seen: set[tuple[int, int]] = set()
        for s in sets:
            for key in s:
                if key in seen:
                    raise InputError(f"column has overlapping activity at {key}")
                seen.add(key)

    def signature(self) -> tuple:
        """Content identity used for pool deduplication."""
        return (
            self.kind,
            tuple(sorted(self.trips)),
            tuple(sorted(self.charge_paid)),
            tuple(sorted(self.charge_free)),
            tuple(sorted(self.discharge_grid)),
            tuple(sorted(self.discharge_free)),
        )

    def _block_counts(self, entries: Iterable[tuple[int, int]], horizon: int) -> np.ndarray:
        out = np.zeros(horizon, dtype=float)
        for _, t in entries:
            out[t] += 1.0
        return out

    def paid_blocks(self, horizon: int) -> np.ndarray:
        return self._block_counts(self.charge_paid, horizon)

    def free_blocks(self, horizon: int) -> np.ndarray:
        return self._block_counts(self.charge_free, horizon)

    def discharge_blocks(self, horizon: int) -> np.ndarray:
        return self._block_counts(self.discharge_grid, horizon)

    def free_discharge_blocks(self, horizon: int) -> np.ndarray:
        return self._block_counts(self.discharge_free, horizon)

    def free_net_blocks(self, horizon: int) -> np.ndarray:
        """Per-block free-charge minus free-discharge count (the surplus-cap row)."""
        return self.free_blocks(horizon) - self.free_discharge_blocks(horizon)


@dataclass(frozen=True)
class DualPrices:
    """Master duals: alpha per trip, gamma per discharge-cap row, beta per
    free-charge-cap row.  Values follow the LP sign convention: <=-rows of a
    minimization problem carry nonpositive duals."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        if b.shape != g.shape:
            raise InputError("beta and gamma must share the block horizon")
        for arr in (a, b, g):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "gamma", g)

    @staticmethod
    def zeros(n_trips: int, horizon: int) -> "DualPrices":
        return DualPrices(np.zeros(n_trips), np.zeros(horizon), np.zeros(horizon))


@dataclass(frozen=True)
class Scenario:
    """A complete problem instance."""

    trips: tuple[Trip, ...]
    stations: tuple[Station, ...]
    depot: tuple[int, int]
    profiles: Profiles
    costs: CostParams
    energy: EnergyParams

    def __post_init__(self):
        t_bar = self.energy.horizon
        if self.profiles.horizon != t_bar:
            raise InputError("profile length must equal the scenario horizon")
        for i, trip in enumerate(self.trips):
            if trip.id != i:
                raise InputError("trip ids must be consecutive from 0")
            if not (0 <= trip.start_block < trip.end_block <= t_bar):
                raise InputError(f"trip {trip.id} falls outside the horizon")
        for j, st in enumerate(self.stations):
            if st.id != j:
                raise InputError("station ids must be consecutive from 0")
        if self.stations:
            sets = sorted({st.charge_set for st in self.stations})
            if sets != list(range(1, len(sets) + 1)):
                raise InputError("charge sets must be numbered 1..L without gaps")
        if self.costs.charge_price.shape != (max(len(self.stations), 1), t_bar):
            raise InputError("charge_price must have shape (n_stations, horizon)")
        if len(self.costs.battery_price) != t_bar:
            raise InputError("battery_price must have length horizon")

    @property
    def n_trips(self) -> int:
        return len(self.trips)

    @property
    def horizon(self) -> int:
        return self.energy.horizon

    @property
    def max_charge_activities(self) -> int:
        return max((st.charge_set for st in self.stations), default=0)

    def stations_in_set(self, charge_set: int) -> tuple[Station, ...]:
        return tuple(st for st in self.stations if st.charge_set == charge_set)

    def distance(self, a: Sequence[int], b: Sequence[int]) -> int:
        return manhattan(a, b)


def route_cost(col: Column, costs: CostParams, charge_rate: float) -> float:
    """Folded cost of a truck route: fixed truck cost plus paid-charging cost
    (with the loss penalty) minus the grid-discharge credit.  Free solar
    charging and vehicle-to-vehicle transfers carry no cost term."""
    if col.kind != TRUCK:
        raise ContractError("route_cost applies to truck routes only")
    eta = costs.loss_penalty
    total = costs.truck_cost
    for h, t in col.charge_paid:
        total += charge_rate * costs.charge_price[h, t] * (1.0 + eta)
    for h, t in col.discharge_grid:
        total -= charge_rate * costs.charge_price[h, t]
    return total


def battery_cost(col: Column, costs: CostParams, charge_rate: float) -> float:
    """Folded cost of a stationary battery schedule.

    Mirrors the truck route cost: the fixed battery cost plus the same
    paid-charge / grid-discharge energy terms priced by the battery series.
    A schedule that never touches paid energy costs exactly ``battery_cost``.
    """
    if col.kind != BATTERY:
        raise ContractError("battery_cost applies to battery schedules only")
    eta = costs.loss_penalty
    total = costs.battery_cost
    for _, t in col.charge_paid:
        total += charge_rate * costs.battery_price[t] * (1.0 + eta)
    for _, t in col.discharge_grid:
        total -= charge_rate * costs.battery_price[t]
    return total


def column_cost(col: Column, costs: CostParams, charge_rate: float) -> float:
    if col.kind == TRUCK:
        return route_cost(col, costs, charge_rate)
    return battery_cost(col, costs, charge_rate)


def reduced_cost(col: Column, duals: DualPrices, charge_rate: float) -> float:
    """Column cost minus its dual-weighted master-row contributions.

    Rows are the trip-coverage equalities (alpha), the per-block discharge
    caps (gamma) and the per-block free-charge caps (beta); the cap rows are
    written in kWh, so each activity block contributes ``charge_rate`` times
    the block dual.  For VSP columns the beta/gamma terms vanish.
    """
    value = col.cost
    alpha = duals.alpha
    for i in col.trips:
        value -= alpha[i]
    if col.charge_free or col.discharge_free or col.discharge_grid:
        horizon = len(duals.beta)
        free_net = col.free_net_blocks(horizon)
        dis = col.discharge_blocks(horizon)
        value -= charge_rate * float(duals.beta @ free_net + duals.gamma @ dis)
    return value


Selection = Sequence[tuple[Column, int]]


def fleet_fuel_gallons(selected: Selection, charge_rate: float,
                       kwh_per_gallon: float) -> float:
    """Net fossil energy drawn by the fleet, in gallons.  Paid charging counts
    positive, grid discharge negative; a negative total is net export that
    offsets base-load generation.  Free charging and V2V transfers are fuel
    neutral."""
    blocks = 0.0
    for col, count in selected:
        blocks += count * (len(col.charge_paid) - len(col.discharge_grid))
    return charge_rate * blocks / kwh_per_gallon


def trip_gasoline_gallons(trips: Iterable[Trip]) -> float:
    """Gasoline burned when the trips are driven by ICE trucks: the trip
    intensity table equates 150/200/250 kWh with 15/20/25 gallons."""
    return sum(t.energy / 10.0 for t in trips)


def fossil_generation(selected: Selection, profiles: Profiles,
                      charge_rate: float) -> np.ndarray:
    """Per-block fossil generation: base net-positive demand plus fleet paid
    charging minus fleet grid discharge.  Under the discharge caps this is
    nonnegative; a negative entry means the selection violates the master
    constraints and is reported as an internal error."""
    horizon = profiles.horizon
    gen = profiles.net_pos.copy()
    for col, count in selected:
        gen += count * charge_rate * (col.paid_blocks(horizon) - col.discharge_blocks(horizon))
    if np.any(gen < -1e-6 * max(1.0, float(np.max(profiles.net_pos, initial=1.0)))):
        raise InvariantError(
            f"negative fossil generation (min {gen.min():.6f} kWh): "
            "the selection breaks the discharge caps")
    return np.maximum(gen, 0.0)
