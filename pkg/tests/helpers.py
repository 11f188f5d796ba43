"""Shared test utilities: constructed-optimum LPs and miniature scenarios."""

from __future__ import annotations

import numpy as np

from gridfleet import lp as lpmod
from gridfleet import model


def make_constructed_lp(rng: np.random.Generator, m: int = 6, n: int = 10):
    """Build a random LP together with a primal-dual pair proving its optimum.

    The pair is constructed first (x*, y*, reduced costs with consistent
    signs and complementary slackness), then c and b are derived, so the
    optimal objective value is known exactly.
    """
    senses = [("<=", "=", ">=")[rng.integers(0, 3)] for _ in range(m)]
    a = rng.normal(0.0, 1.0, size=(m, n))
    a[rng.random(size=a.shape) < 0.3] = 0.0

    ub = np.full(n, np.inf)
    ub[rng.random(n) < 0.3] = rng.uniform(1.0, 6.0)

    x = np.zeros(n)
    d = np.zeros(n)
    for j in range(n):
        mode = rng.random()
        if mode < 0.4:  # at lower bound, nonnegative reduced cost
            d[j] = rng.uniform(0.0, 2.0)
        elif mode < 0.6 and np.isfinite(ub[j]):  # at upper bound
            x[j] = ub[j]
            d[j] = -rng.uniform(0.0, 2.0)
        else:  # strictly between bounds, zero reduced cost
            hi = ub[j] if np.isfinite(ub[j]) else 5.0
            x[j] = rng.uniform(0.05, hi * 0.95 if np.isfinite(ub[j]) else hi)

    y = np.zeros(m)
    b = a @ x
    for i, sense in enumerate(senses):
        tight = rng.random() < 0.6
        if sense == "<=":
            if tight:
                y[i] = -rng.uniform(0.0, 2.0)
            else:
                b[i] += rng.uniform(0.1, 2.0)
        elif sense == ">=":
            if tight:
                y[i] = rng.uniform(0.0, 2.0)
            else:
                b[i] -= rng.uniform(0.1, 2.0)
        else:
            y[i] = rng.normal(0.0, 1.0)

    c = a.T @ y + d
    prob = lpmod.LinearProgram(senses, b)
    for j in range(n):
        entries = {i: a[i, j] for i in range(m) if a[i, j] != 0.0}
        prob.add_column(c[j], entries, lb=0.0, ub=ub[j])
    return prob, float(c @ x)


def micro_profiles(demand, solar):
    return model.net_demand(demand, solar)


def micro_scenario(trips, *, horizon=8, capacity=200.0, rate=100.0,
                   demand=None, solar=None, n_sets=2,
                   truck_cost=50.0, battery_cost=10.0, price=0.03,
                   eta=0.01, station_loc=(0, 0)):
    """Tiny EVSP instance used for oracle-vs-solver equivalence checks."""
    if demand is None:
        demand = [100.0] * horizon
    if solar is None:
        solar = [0.0] * horizon
    stations = tuple(
        model.Station(id=i, loc=station_loc, charge_set=i + 1) for i in range(n_sets))
    energy = model.EnergyParams(
        battery_capacity=capacity, charge_rate=rate, horizon=horizon,
        speed=1.0, trip_energy=100.0)
    costs = model.CostParams.uniform(
        truck_cost, battery_cost, price, price, eta,
        n_stations=len(stations), horizon=horizon)
    return model.Scenario(
        trips=tuple(trips), stations=stations, depot=(0, 0),
        profiles=micro_profiles(demand, solar), costs=costs, energy=energy)


def make_trip(i, st, et, sl, el, energy=100.0):
    return model.Trip(id=i, start_block=st, end_block=et,
                      start_loc=tuple(sl), end_loc=tuple(el), energy=energy)
