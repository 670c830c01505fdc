// SPDX-License-Identifier: Apache-2.0
#include "evpv/baseline.hpp"

#include "evpv/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evpv::baseline {

namespace {

BaselineProfile empty_profile(const ScenarioSnapshot& s, Policy policy) {
    require_valid(s);
    BaselineProfile p;
    p.policy = policy;
    p.step_hours = s.step_hours;
    for (const auto& ev : s.fleet) p.ev_ids.push_back(ev.id);
    p.charge_kw.assign(static_cast<std::size_t>(s.horizon_steps), std::vector<double>(s.fleet.size(), 0.0));
    p.truncated.assign(s.fleet.size(), false);
    return p;
}

void require_shape(const BaselineProfile& p, const ScenarioSnapshot& s) {
    bool ok = p.steps() == s.horizon_steps && p.ev_ids.size() == s.fleet.size();
    for (const auto& row : p.charge_kw) ok = ok && row.size() == s.fleet.size();
    if (!ok) throw DimensionMismatch("baseline profile shape does not match the scenario");
}

} // namespace

double BaselineProfile::delivered_kwh(std::size_t v) const {
    double e = 0.0;
    for (const auto& row : charge_kw) e += row.at(v) * step_hours;
    return e;
}

double BaselineProfile::park_kw(int t) const {
    double p = 0.0;
    for (double x : charge_kw.at(static_cast<std::size_t>(t))) p += x;
    return p;
}

double BaselineProfile::peak_kw() const {
    double peak = 0.0;
    for (int t = 0; t < steps(); ++t) peak = std::max(peak, park_kw(t));
    return peak;
}

double rate_cap_kw(const EvSession& ev, const ChargerSpec& charger) noexcept {
    return std::min(charger.ev_port_rated_kw, ev.charge_max_kw);
}

BaselineProfile average_rate(const ScenarioSnapshot& s) {
    auto p = empty_profile(s, Policy::average_rate);
    for (std::size_t v = 0; v < s.fleet.size(); ++v) {
        const auto& ev = s.fleet[v];
        const double stay_h = ev.dwell_steps() * s.step_hours;
        const double wanted = ev.demand_kwh / stay_h;
        const double rate = std::min(wanted, rate_cap_kw(ev, s.charger_of(ev)));
        p.truncated[v] = rate < wanted;
        for (int t = ev.arrival_step; t < ev.departure_step; ++t) p.charge_kw[static_cast<std::size_t>(t)][v] = rate;
    }
    return p;
}

BaselineProfile immediate(const ScenarioSnapshot& s) {
    auto p = empty_profile(s, Policy::immediate);
    for (std::size_t v = 0; v < s.fleet.size(); ++v) {
        const auto& ev = s.fleet[v];
        const double cap = rate_cap_kw(ev, s.charger_of(ev));
        double remaining = ev.demand_kwh;
        for (int t = ev.arrival_step; t < ev.departure_step && remaining > 0.0; ++t) {
            const double rate = std::min(cap, remaining / s.step_hours);
            p.charge_kw[static_cast<std::size_t>(t)][v] = rate;
            remaining -= rate * s.step_hours;
        }
        // Float residue from the subtraction chain is not a shortfall.
        p.truncated[v] = remaining > 1e-9 * std::max(1.0, ev.demand_kwh);
    }
    return p;
}

ems::CostReport baseline_cost(const BaselineProfile& profile, const ScenarioSnapshot& s) {
    require_shape(profile, s);
    ems::CostReport r;
    const double dt = s.step_hours;
    for (int t = 0; t < s.horizon_steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        for (std::size_t v = 0; v < s.fleet.size(); ++v) {
            const double eta = s.charger_of(s.fleet[v]).eff_conv;
            r.ev_cost_usd += dt * eta * eta * profile.charge_kw[i][v] * s.market.buy_price[i];
        }
        for (const auto& ch : s.chargers) {
            const double eta = ch.eff_conv;
            r.pv_sales_usd += dt * eta * eta * ch.pv_available_kw(s.pv.normalized_kw_per_kwp[i]) *
                              (s.market.sell_price[i] - s.pv_cost);
        }
    }
    r.net_usd = r.ev_cost_usd - r.pv_sales_usd;
    r.total_usd = r.net_usd;
    return r;
}

std::optional<double> percent_reduction(double c_ar, double c_other) noexcept {
    if (c_ar == 0.0 || !std::isfinite(c_ar) || !std::isfinite(c_other)) return std::nullopt;
    return 100.0 * (c_ar - c_other) / c_ar;
}

std::vector<ConverterConflict> converter_conflicts(const BaselineProfile& profile, const ScenarioSnapshot& s) {
    require_shape(profile, s);
    std::vector<ConverterConflict> out;
    for (int t = 0; t < s.horizon_steps; ++t) {
        for (std::size_t c = 0; c < s.chargers.size(); ++c) {
            const auto& ch = s.chargers[c];
            int active = 0;
            for (std::size_t v = 0; v < s.fleet.size(); ++v)
                if (s.fleet[v].charger_id == ch.id && profile.charge_kw[static_cast<std::size_t>(t)][v] > 0.0) ++active;
            if (active > ch.dc_converter_count) out.push_back({t, ch.id, active, ch.dc_converter_count});
        }
    }
    return out;
}

Embedding embed(const BaselineProfile& profile, const ems::EmsModel& ems, const ScenarioSnapshot& s, double tol) {
    require_shape(profile, s);
    Embedding e;
    e.values = ems::embed_charging_profile(profile.charge_kw, ems, s);
    e.objective = ems.model.evaluate_objective(e.values);
    e.audit = milp::audit(ems.model, e.values, tol);
    return e;
}

std::string to_string(Policy policy) {
    return policy == Policy::immediate ? "IMM" : "AR";
}

} // namespace evpv::baseline
