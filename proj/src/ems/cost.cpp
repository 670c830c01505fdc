// SPDX-License-Identifier: Apache-2.0
#include "evpv/ems/cost.hpp"

#include "evpv/csv.hpp"
#include "evpv/errors.hpp"

#include <ostream>

namespace evpv::ems {

namespace {

void require_shape(const Schedule& sc, const ScenarioSnapshot& s) {
    const auto T = static_cast<std::size_t>(s.horizon_steps);
    const auto V = s.fleet.size(), C = s.chargers.size();
    auto rows_ok = [&](const auto& g, std::size_t cols) {
        if (g.size() != T) return false;
        for (const auto& row : g)
            if (row.size() != cols) return false;
        return true;
    };
    const bool ok = sc.horizon_steps == s.horizon_steps && rows_ok(sc.charge, V) && rows_ok(sc.discharge, V) &&
                    rows_ok(sc.reserve_up, V) && rows_ok(sc.reserve_down, V) && rows_ok(sc.soc, V) &&
                    rows_ok(sc.pv, C) && rows_ok(sc.draw, C) && rows_ok(sc.feed, C) && sc.grid_import.size() == T &&
                    sc.grid_export.size() == T && sc.first_step >= 0 && sc.first_step <= s.horizon_steps;
    if (!ok) throw DimensionMismatch("schedule shape does not match the scenario");
}

} // namespace

CostReport cost_breakdown(const Schedule& sc, const ScenarioSnapshot& s) {
    require_shape(sc, s);
    CostReport r;
    const double dt = s.step_hours;
    for (std::size_t v = 0; v < s.fleet.size(); ++v) {
        const auto& ev = s.fleet[v];
        if (ev.departure_step < sc.first_step) continue;
        const double delivered = sc.soc[static_cast<std::size_t>(ev.departure_step)][v];
        r.penalty_usd += ev.penalty_rate * (departure_target(ev) - delivered);
    }
    for (int t = sc.first_step; t < s.horizon_steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        r.energy_trade_usd += dt * (sc.grid_import[i] * s.market.buy_price[i] - sc.grid_export[i] * s.market.sell_price[i]);
        for (std::size_t v = 0; v < s.fleet.size(); ++v) {
            const double eta = s.charger_of(s.fleet[v]).eff_conv;
            r.reserve_income_usd += dt * (1.0 - s.pv.uncertainty) * eta * eta *
                                    (sc.reserve_up[i][v] * s.market.regup_price[i] +
                                     sc.reserve_down[i][v] * s.market.regdn_price[i]);
            r.v2g_wear_usd += dt * sc.discharge[i][v] * s.wear_rate;
        }
        for (const auto& ch : s.chargers) r.pv_cost_usd += dt * ch.pv_available_kw(s.pv.normalized_kw_per_kwp[i]) * s.pv_cost;
    }
    r.total_usd = r.component_sum();
    return r;
}

void write_schedule_csv(std::ostream& out, const Schedule& sc) {
    using csv::format_number;
    out << "step,entity,series,value\n";
    for (int t = 0; t < sc.horizon_steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        for (std::size_t v = 0; v < sc.ev_ids.size(); ++v) {
            const auto& id = sc.ev_ids[v];
            out << t << ',' << id << ",charge_kw," << format_number(sc.charge[i][v]) << '\n';
            out << t << ',' << id << ",discharge_kw," << format_number(sc.discharge[i][v]) << '\n';
            out << t << ',' << id << ",reserve_up_kw," << format_number(sc.reserve_up[i][v]) << '\n';
            out << t << ',' << id << ",reserve_down_kw," << format_number(sc.reserve_down[i][v]) << '\n';
            out << t << ',' << id << ",soc_kwh," << format_number(sc.soc[i][v]) << '\n';
            out << t << ',' << id << ",connected," << sc.connected[i][v] << '\n';
        }
        for (std::size_t c = 0; c < sc.charger_ids.size(); ++c) {
            const auto& id = sc.charger_ids[c];
            out << t << ',' << id << ",pv_kw," << format_number(sc.pv[i][c]) << '\n';
            out << t << ',' << id << ",draw_kw," << format_number(sc.draw[i][c]) << '\n';
            out << t << ',' << id << ",feed_kw," << format_number(sc.feed[i][c]) << '\n';
        }
        out << t << ",site,import_kw," << format_number(sc.grid_import[i]) << '\n';
        out << t << ",site,export_kw," << format_number(sc.grid_export[i]) << '\n';
    }
}

void write_cost_report(std::ostream& out, const CostReport& r) {
    using csv::format_number;
    out << "component,usd\n"
        << "penalty," << format_number(r.penalty_usd) << '\n'
        << "energy_trade," << format_number(r.energy_trade_usd) << '\n'
        << "reserve_income," << format_number(r.reserve_income_usd) << '\n'
        << "v2g_wear," << format_number(r.v2g_wear_usd) << '\n'
        << "pv_cost," << format_number(r.pv_cost_usd) << '\n'
        << "total," << format_number(r.total_usd) << '\n'
        << "ev_cost," << format_number(r.ev_cost_usd) << '\n'
        << "pv_sales," << format_number(r.pv_sales_usd) << '\n'
        << "net," << format_number(r.net_usd) << '\n';
}

} // namespace evpv::ems
