import numpy as np
import pytest

from gridfleet import model


def _col(kind=model.TRUCK, cost=50.0, trips=(), paid=(), free=(), dis=(), vdis=()):
    return model.Column(
        kind=kind, cost=cost, trips=frozenset(trips),
        charge_paid=frozenset(paid), charge_free=frozenset(free),
        discharge_grid=frozenset(dis), discharge_free=frozenset(vdis))


class TestNetDemand:
    def test_basic_split(self):
        p = model.net_demand([1000.0, 800.0], [400.0, 1200.0])
        assert np.allclose(p.net_pos, [600.0, 0.0])
        assert np.allclose(p.net_neg, [0.0, 400.0])

    def test_identical_series(self):
        d = [500.0, 700.0, 900.0]
        p = model.net_demand(d, d)
        assert np.all(p.net_pos == 0.0)
        assert np.all(p.net_neg == 0.0)

    def test_length_mismatch(self):
        with pytest.raises(model.InputError):
            model.net_demand([1.0, 2.0], [1.0])

    def test_negative_rejected(self):
        with pytest.raises(model.InputError):
            model.net_demand([-1.0], [0.0])

    def test_complementarity_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            d = rng.uniform(0, 1000, size=24)
            s = rng.uniform(0, 1000, size=24)
            p = model.net_demand(d, s)
            assert np.all(p.net_pos * p.net_neg == 0.0)
            assert np.allclose(p.net_pos - p.net_neg, p.net)


class TestRouteCost:
    def _costs(self, horizon=4):
        return model.CostParams.uniform(10.0, 1.0, 0.03, 0.03, 0.01, 2, horizon)

    def test_no_charging_is_fixed_cost(self):
        c = model.route_cost(_col(trips=(0,)), self._costs(), 100.0)
        assert c == 10.0

    def test_paid_and_discharge(self):
        col = _col(paid=((0, 1),), dis=((0, 2),))
        c = model.route_cost(col, self._costs(), 100.0)
        assert c == pytest.approx(10.0 + 100 * 0.03 * (1.01 - 1.0))

    def test_free_charging_is_free(self):
        col = _col(free=((0, 1), (1, 2)))
        assert model.route_cost(col, self._costs(), 100.0) == 10.0

    def test_battery_rejected(self):
        with pytest.raises(model.ContractError):
            model.route_cost(_col(kind=model.BATTERY, cost=1.0), self._costs(), 100.0)

    def test_monotone_in_paid_and_discharge(self):
        costs = self._costs()
        base = model.route_cost(_col(), costs, 100.0)
        more_paid = model.route_cost(_col(paid=((0, 0),)), costs, 100.0)
        more_dis = model.route_cost(_col(dis=((0, 0),)), costs, 100.0)
        assert more_paid > base
        assert more_dis < base


class TestReducedCost:
    def test_single_trip(self):
        duals = model.DualPrices(np.array([550.0]), np.zeros(4), np.zeros(4))
        col = _col(cost=10.0, trips=(0,))
        assert model.reduced_cost(col, duals, 100.0) == pytest.approx(-540.0)

    def test_idle_battery_never_improves(self):
        duals = model.DualPrices.zeros(2, 4)
        col = _col(kind=model.BATTERY, cost=1.0)
        assert model.reduced_cost(col, duals, 100.0) == pytest.approx(1.0)

    def test_cap_duals_price_usage(self):
        # gamma on the discharge cap is nonpositive; using the cap adds cost
        beta = np.zeros(4)
        gamma = np.array([0.0, -0.02, 0.0, 0.0])
        duals = model.DualPrices(np.zeros(1), beta, gamma)
        col = _col(kind=model.BATTERY, cost=1.0, dis=((model.BATTERY_STATION, 1),))
        # cost 1 minus gamma*rho*psi = 1 - (-0.02*100) = 3
        assert model.reduced_cost(col, duals, 100.0) == pytest.approx(3.0)

    def test_free_charge_and_v2v_offset(self):
        beta = np.array([-0.05, 0.0])
        duals = model.DualPrices(np.zeros(1), beta, np.zeros(2))
        charge = _col(kind=model.BATTERY, cost=1.0, free=((model.BATTERY_STATION, 0),))
        give = _col(kind=model.BATTERY, cost=1.0, vdis=((model.BATTERY_STATION, 0),))
        assert model.reduced_cost(charge, duals, 100.0) == pytest.approx(1.0 + 5.0)
        assert model.reduced_cost(give, duals, 100.0) == pytest.approx(1.0 - 5.0)


class TestFuelAccounting:
    def test_net_discharge_gallons(self):
        col = _col(dis=((0, 1), (0, 2), (0, 3)), paid=())
        sel = [(col, 1)]
        gal = model.fleet_fuel_gallons(sel, 110.0, 33.0)
        assert gal == pytest.approx(-10.0)

    def test_free_only_is_zero(self):
        col = _col(free=((0, 1), (0, 2)), vdis=((0, 3),))
        assert model.fleet_fuel_gallons([(col, 2)], 100.0, 33.0) == 0.0

    def test_gasoline_equivalence(self):
        trips = [model.Trip(0, 1, 3, (0, 0), (1, 0), 250.0),
                 model.Trip(1, 4, 6, (0, 0), (1, 0), 150.0)]
        assert model.trip_gasoline_gallons(trips) == pytest.approx(40.0)


class TestFossilGeneration:
    def _profiles(self):
        return model.net_demand([500.0, 800.0, 300.0], [200.0, 100.0, 600.0])

    def test_no_activity(self):
        p = self._profiles()
        gen = model.fossil_generation([], p, 100.0)
        assert np.allclose(gen, p.net_pos)

    def test_discharge_cancels_block(self):
        p = self._profiles()  # net_pos = [300, 700, 0]
        col = _col(dis=((0, 0), (0, 0)))  # single entry; sets dedupe duplicates
        col = _col(dis=((0, 0),))
        gen = model.fossil_generation([(col, 3)], p, 100.0)
        assert gen[0] == pytest.approx(0.0)

    def test_negative_generation_raises(self):
        p = self._profiles()
        col = _col(dis=((0, 2),))  # block 2 has no positive net demand
        with pytest.raises(model.InvariantError):
            model.fossil_generation([(col, 1)], p, 100.0)

    def test_random_feasible_selections_nonnegative(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            horizon = 6
            d = rng.uniform(0, 900, size=horizon)
            s = rng.uniform(0, 900, size=horizon)
            p = model.net_demand(d, s)
            rate = 100.0
            caps = np.floor(p.net_pos / rate).astype(int)
            sel = []
            remaining = caps.copy()
            for _ in range(rng.integers(0, 4)):
                dis = []
                paid = []
                for t in range(horizon):
                    if remaining[t] > 0 and rng.random() < 0.5:
                        dis.append((0, t))
                        remaining[t] -= 1
                    elif rng.random() < 0.3:
                        paid.append((0, t))
                sel.append((_col(dis=tuple(dis), paid=tuple(paid)), 1))
            gen = model.fossil_generation(sel, p, rate)
            assert np.all(gen >= 0.0)


class TestColumnValidation:
    def test_overlapping_indicators_rejected(self):
        with pytest.raises(model.InputError):
            _col(paid=((0, 1),), free=((0, 1),))

    def test_battery_with_trips_rejected(self):
        with pytest.raises(model.InputError):
            _col(kind=model.BATTERY, trips=(0,))

    def test_signature_identifies_content(self):
        a = _col(trips=(0, 1), paid=((0, 3),))
        b = _col(trips=(1, 0), paid=((0, 3),), cost=99.0)
        assert a.signature() == b.signature()


class TestScenarioValidation:
    def test_trip_outside_horizon(self):
        from helpers import micro_scenario, make_trip
        with pytest.raises(model.InputError):
            micro_scenario([make_trip(0, 6, 9, (1, 0), (0, 1))], horizon=8)

    def test_charge_sets_contiguous(self):
        from helpers import micro_profiles
        energy = model.EnergyParams(horizon=4)
        costs = model.CostParams.uniform(50, 10, 0.03, 0.03, 0.01, 2, 4)
        stations = (model.Station(0, (0, 0), 1), model.Station(1, (0, 0), 3))
        with pytest.raises(model.InputError):
            model.Scenario((), stations, (0, 0),
                           micro_profiles([1.0] * 4, [0.0] * 4), costs, energy)
