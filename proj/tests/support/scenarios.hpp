// SPDX-License-Identifier: Apache-2.0
//
// Scenario fixtures shared by the unit and acceptance tests.
#pragma once

#include "evpv/domain.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace evpv::testing {

inline EvSession make_ev(std::string id, int arrival, int departure, double demand, double soc_arrival,
                         double soc_max, std::string charger) {
    EvSession ev;
    ev.id = std::move(id);
    ev.arrival_step = arrival;
    ev.departure_step = departure;
    ev.demand_kwh = demand;
    ev.arrival_soc_kwh = soc_arrival;
    ev.soc_min_kwh = 5.0;
    ev.soc_max_kwh = soc_max;
    ev.charge_max_kw = 50.0;
    ev.discharge_min_kw = -10.0;
    ev.eff_charge = 0.95;
    ev.eff_discharge = 0.95;
    ev.penalty_rate = 1.0;
    ev.charger_id = std::move(charger);
    return ev;
}

inline ChargerSpec make_charger(std::string id, double pv_kw) {
    ChargerSpec c;
    c.id = std::move(id);
    c.pv_rated_kw = pv_kw;
    c.inverter_rated_kw = 10.0;
    c.ev_port_rated_kw = 10.0;
    c.dc_converter_count = 1;
    c.connection_count = 2;
    c.eff_conv = 0.96;
    c.pv_scale = 1.0;
    return c;
}

/// Smooth clear-sky bell between 06:00 and 20:00, peak 0.8 kW/kWp at 13:00.
inline std::vector<double> bell_pv(int steps, double step_hours) {
    std::vector<double> pv(static_cast<std::size_t>(steps), 0.0);
    for (int t = 0; t < steps; ++t) {
        const double h = (t + 0.5) * step_hours;
        if (h > 6.0 && h < 20.0) pv[static_cast<std::size_t>(t)] = 0.8 * std::pow(std::sin(M_PI * (h - 6.0) / 14.0), 2);
    }
    return pv;
}

/// Hourly-held day-ahead style prices: cheap night, morning shoulder,
/// afternoon peak. $/kWh.
inline std::vector<double> daily_prices(int steps, double step_hours) {
    static const double hourly[24] = {0.021, 0.019, 0.018, 0.018, 0.019, 0.022, 0.027, 0.031,
                                      0.033, 0.032, 0.030, 0.029, 0.031, 0.036, 0.045, 0.058,
                                      0.064, 0.055, 0.046, 0.040, 0.034, 0.029, 0.025, 0.022};
    std::vector<double> p(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) p[static_cast<std::size_t>(t)] = hourly[static_cast<int>(t * step_hours) % 24];
    return p;
}

inline std::vector<double> scaled(std::vector<double> v, double k) {
    for (auto& x : v) x *= k;
    return v;
}

/// The six-vehicle, four-charger desk-scale car park on a 15-minute grid.
inline ScenarioSnapshot table_one() {
    ScenarioSnapshot s;
    s.step_hours = 0.25;
    s.horizon_steps = 96;
    s.fleet = {make_ev("1", 36, 68, 40, 20, 85, "1"), make_ev("2", 34, 66, 30, 20, 60, "1"),
               make_ev("3", 38, 70, 10, 5, 24, "2"),  make_ev("4", 36, 68, 40, 20, 85, "3"),
               make_ev("5", 34, 66, 30, 20, 60, "4"), make_ev("6", 38, 70, 10, 5, 24, "4")};
    s.chargers = {make_charger("1", 10), make_charger("2", 10), make_charger("3", 0), make_charger("4", 10)};
    const auto buy = daily_prices(96, 0.25);
    s.market.buy_price = buy;
    s.market.sell_price = scaled(buy, 0.98);
    s.market.regup_price = scaled(buy, 0.32);
    s.market.regdn_price = scaled(buy, 0.25);
    s.pv.normalized_kw_per_kwp = bell_pv(96, 0.25);
    s.pv.uncertainty = 0.1;
    s.limits = SiteLimits::flat(96, 40.0, 40.0);
    return s;
}

/// Random instance with T <= 4, V <= 2, one charger: at most
/// 2*V*T + T = 20 binaries before fixing, at most 16 once absent steps are
/// pinned (each vehicle is absent at least at its departure step).
inline ScenarioSnapshot tiny_random(std::mt19937& rng) {
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScenarioSnapshot s;
    s.step_hours = 0.25 + 0.25 * coin(rng);
    s.horizon_steps = 3 + coin(rng); // departure must fit before the last step
    const int T = s.horizon_steps;
    ChargerSpec c = make_charger("c", 4.0 * u(rng));
    c.inverter_rated_kw = 6.0 + 6.0 * u(rng);
    c.ev_port_rated_kw = 5.0 + 5.0 * u(rng);
    c.eff_conv = 0.9 + 0.1 * u(rng);
    c.pv_scale = 0.5 + u(rng);
    c.dc_converter_count = 1;
    c.connection_count = 2;
    s.chargers = {c};
    const int V = 1 + coin(rng);
    for (int v = 0; v < V; ++v) {
        std::uniform_int_distribution<int> arr(0, T - 2);
        const int a = arr(rng);
        std::uniform_int_distribution<int> dep(a + 1, T - 1);
        EvSession ev = make_ev("v" + std::to_string(v), a, dep(rng), 0.0, 0.0, 0.0, "c");
        ev.soc_min_kwh = 1.0 + 2.0 * u(rng);
        ev.soc_max_kwh = 10.0 + 20.0 * u(rng);
        ev.arrival_soc_kwh = ev.soc_min_kwh + 3.0 * u(rng);
        ev.demand_kwh = (ev.soc_max_kwh - ev.arrival_soc_kwh) * 0.5 * u(rng);
        ev.charge_max_kw = 3.0 + 10.0 * u(rng);
        ev.discharge_min_kw = coin(rng) ? -(1.0 + 6.0 * u(rng)) : 0.0;
        ev.eff_charge = 0.85 + 0.15 * u(rng);
        ev.eff_discharge = 0.85 + 0.15 * u(rng);
        ev.penalty_rate = 0.2 + u(rng);
        s.fleet.push_back(ev);
    }
    for (int t = 0; t < T; ++t) {
        const double buy = 0.01 + 0.2 * u(rng);
        s.market.buy_price.push_back(buy);
        s.market.sell_price.push_back(buy * (0.5 + 0.5 * u(rng)));
        s.market.regup_price.push_back(0.05 * u(rng));
        s.market.regdn_price.push_back(0.05 * u(rng));
        s.pv.normalized_kw_per_kwp.push_back(u(rng));
        s.limits.import_cap_kw.push_back(5.0 + 20.0 * u(rng));
        s.limits.export_cap_kw.push_back(5.0 + 20.0 * u(rng));
    }
    s.pv.uncertainty = 0.2 * u(rng);
    s.wear_rate = 0.05 * u(rng);
    s.reserve_mode = coin(rng) ? ReserveMode::symmetric : ReserveMode::asymmetric;
    s.reserve_bound_convention = coin(rng) ? ReserveBoundConvention::swapped : ReserveBoundConvention::as_printed;
    s.reserves_enabled = coin(rng) == 1;
    return s;
}

} // namespace evpv::testing
