// SPDX-License-Identifier: Apache-2.0
#include "evpv/ems/formulation.hpp"

#include "evpv/milp/audit.hpp"

#include <algorithm>
#include <cmath>

namespace evpv::ems {

using milp::RowSense;
using milp::Term;

namespace {

enum Block { kCharge, kDischarge, kUp, kDown, kSoc, kPv, kDraw, kFeed, kImport, kExport, kConnected, kMode, kDrawMode };

} // namespace

VariableCatalog::VariableCatalog(int first_step, int horizon_steps, int vehicles, int chargers)
    : first_(first_step), horizon_(horizon_steps), vehicles_(vehicles), chargers_(chargers) {}

// Block order: five EV continuous families, three charger continuous
// families, two site families, then the three binary families.
int VariableCatalog::ev(EvVar family, int t, int v) const {
    const int S = steps(), V = vehicles_, C = chargers_;
    const int local = (t - first_) * V + v;
    const int cont_ev = 5 * V * S, cont_ch = 3 * C * S, cont_site = 2 * S;
    switch (family) {
    case EvVar::charge: return local;
    case EvVar::discharge: return V * S + local;
    case EvVar::reserve_up: return 2 * V * S + local;
    case EvVar::reserve_down: return 3 * V * S + local;
    case EvVar::soc: return 4 * V * S + local;
    case EvVar::connected: return cont_ev + cont_ch + cont_site + local;
    case EvVar::charge_mode: return cont_ev + cont_ch + cont_site + V * S + local;
    }
    return -1;
}

int VariableCatalog::charger(ChargerVar family, int t, int c) const {
    const int S = steps(), V = vehicles_, C = chargers_;
    const int local = (t - first_) * C + c;
    const int base = 5 * V * S;
    switch (family) {
    case ChargerVar::pv: return base + local;
    case ChargerVar::draw: return base + C * S + local;
    case ChargerVar::feed: return base + 2 * C * S + local;
    case ChargerVar::draw_mode: return 5 * V * S + 3 * C * S + 2 * S + 2 * V * S + local;
    }
    return -1;
}

int VariableCatalog::site(SiteVar family, int t) const {
    const int S = steps();
    const int base = 5 * vehicles_ * S + 3 * chargers_ * S;
    return base + (family == SiteVar::import ? 0 : S) + (t - first_);
}

namespace {

std::string tag(const char* family, int t, const std::string& entity) {
    return std::string(family) + "_" + std::to_string(t) + "_" + entity;
}

std::string site_tag(const char* family, int t) { return std::string(family) + "_" + std::to_string(t); }

} // namespace

EmsModel build(const ScenarioSnapshot& s, int from_step, const std::map<std::string, double>& realized_soc) {
    require_valid(s);
    const int T = s.horizon_steps;
    if (from_step < 0 || from_step >= T)
        throw HorizonExhausted("start step " + std::to_string(from_step) + " is outside [0, " + std::to_string(T) + ")");

    const int V = static_cast<int>(s.fleet.size());
    const int C = static_cast<int>(s.chargers.size());
    EmsModel out;
    out.catalog = VariableCatalog(from_step, T, V, C);
    const auto& cat = out.catalog;
    auto& m = out.model;
    for (const auto& ev : s.fleet) out.charger_of.push_back(static_cast<int>(*s.charger_index(ev.charger_id)));

    // Variables, created in catalog order.
    const char* ev_names[] = {"xp", "xm", "rup", "rdn", "soc"};
    for (int f = 0; f < 5; ++f)
        for (int t = from_step; t < T; ++t)
            for (int v = 0; v < V; ++v) m.add_continuous(tag(ev_names[f], t, s.fleet[static_cast<std::size_t>(v)].id));
    const char* ch_names[] = {"pv", "draw", "feed"};
    for (int f = 0; f < 3; ++f)
        for (int t = from_step; t < T; ++t)
            for (int c = 0; c < C; ++c) m.add_continuous(tag(ch_names[f], t, s.chargers[static_cast<std::size_t>(c)].id));
    for (int t = from_step; t < T; ++t) m.add_continuous(site_tag("imp", t));
    for (int t = from_step; t < T; ++t) m.add_continuous(site_tag("exp", t));
    for (const char* name : {"ac", "amode"})
        for (int t = from_step; t < T; ++t)
            for (int v = 0; v < V; ++v) m.add_binary(tag(name, t, s.fleet[static_cast<std::size_t>(v)].id));
    for (int t = from_step; t < T; ++t)
        for (int c = 0; c < C; ++c) m.add_binary(tag("adf", t, s.chargers[static_cast<std::size_t>(c)].id));

    const double dt = s.step_hours;
    const double income_scale = dt * (1.0 - s.pv.uncertainty);

    for (int v = 0; v < V; ++v) {
        const auto& ev = s.fleet[static_cast<std::size_t>(v)];
        const auto& ch = s.chargers[static_cast<std::size_t>(out.charger_of[static_cast<std::size_t>(v)])];
        const double eta_c = ch.eff_conv;
        const int ta = ev.arrival_step, td = ev.departure_step;
        const double xub = ev.charge_max_kw;
        const double xlb_mag = -ev.discharge_min_kw; // >= 0
        const double target = departure_target(ev);
        const bool v2g = s.v2g_enabled && ev.v2g_enabled();

        // Where the SOC trajectory starts inside this model.
        int soc_start = ta;
        double soc_start_value = ev.arrival_soc_kwh;
        if (from_step > ta && from_step <= td) {
            const auto it = realized_soc.find(ev.id);
            if (it == realized_soc.end())
                throw InvalidScenario({"EV '" + ev.id + "': no realized SOC for step " + std::to_string(from_step)});
            soc_start = from_step;
            soc_start_value = it->second;
        }
        const bool departed = td < from_step;

        for (int t = from_step; t < T; ++t) {
            const int xp = cat.ev(EvVar::charge, t, v), xm = cat.ev(EvVar::discharge, t, v);
            const int rup = cat.ev(EvVar::reserve_up, t, v), rdn = cat.ev(EvVar::reserve_down, t, v);
            const int soc = cat.ev(EvVar::soc, t, v);
            const int ac = cat.ev(EvVar::connected, t, v), mode = cat.ev(EvVar::charge_mode, t, v);
            const bool present = ev.present_at(t);

            // SOC: zero outside [arrival, departure], pinned at the start,
            // box-bounded otherwise, capped by the target at departure.
            if (departed || t < soc_start || t > td) {
                m.fix(soc, 0.0);
            } else if (t == soc_start) {
                m.fix(soc, soc_start_value);
            } else {
                double hi = ev.soc_max_kwh;
                if (t == td) hi = std::min(hi, target);
                m.set_bounds(soc, ev.soc_min_kwh, hi);
            }

            if (!present) {
                for (int j : {xp, xm, rup, rdn, ac, mode}) m.fix(j, 0.0);
                continue;
            }

            m.set_bounds(xp, 0.0, ch.ev_port_rated_kw);
            if (v2g) m.set_bounds(xm, 0.0, ch.ev_port_rated_kw);
            else m.fix(xm, 0.0);
            if (!s.reserves_enabled) {
                m.fix(rup, 0.0);
                m.fix(rdn, 0.0);
            }

            // Indicator rows with the EV limits. Without reserve rows the port
            // bound is the only other cap on x, so it tightens M there.
            const std::string id = "_" + std::to_string(t) + "_" + ev.id;
            const double m_ch = s.reserves_enabled ? xub : std::min(xub, ch.ev_port_rated_kw);
            const double m_dis = s.reserves_enabled ? xlb_mag : std::min(xlb_mag, ch.ev_port_rated_kw);
            m.add_constraint("conn_ch" + id, {{xp, 1.0}, {ac, -m_ch}}, RowSense::less_equal, 0.0);
            m.add_constraint("mode_ch" + id, {{xp, 1.0}, {mode, -m_ch}}, RowSense::less_equal, 0.0);
            if (v2g) {
                m.add_constraint("conn_dis" + id, {{xm, 1.0}, {ac, -m_dis}}, RowSense::less_equal, 0.0);
                m.add_constraint("mode_dis" + id, {{xm, 1.0}, {mode, m_dis}}, RowSense::less_equal, m_dis);
            }

            // Taper rows need the SOC at t, which is a variable from the
            // start step onward.
            const double ch_slope = xub / ((1.0 - s.taper_charge) * ev.soc_max_kwh);
            m.add_constraint("taper_ch" + id, {{xp, 1.0}, {soc, ch_slope}}, RowSense::less_equal,
                             xub / (1.0 - s.taper_charge));
            if (v2g) {
                const double dis_slope = xlb_mag / (s.taper_discharge * ev.soc_max_kwh);
                m.add_constraint("taper_dis" + id, {{xm, 1.0}, {soc, -dis_slope}}, RowSense::less_equal, 0.0);
            }

            // SOC recursion into t+1 (t+1 <= departure <= T-1).
            if (t >= soc_start) {
                const int next = cat.ev(EvVar::soc, t + 1, v);
                m.add_constraint("soc" + id,
                                 {{next, 1.0}, {soc, -1.0}, {xp, -dt * ev.eff_charge}, {xm, dt / ev.eff_discharge}},
                                 RowSense::equal, 0.0);
            }

            if (s.reserves_enabled) {
                const double up_cap =
                    s.reserve_bound_convention == ReserveBoundConvention::as_printed ? xub : xlb_mag;
                const double dn_cap =
                    s.reserve_bound_convention == ReserveBoundConvention::as_printed ? xlb_mag : xub;
                m.add_constraint("rup_port" + id, {{xm, 1.0}, {rup, 1.0}, {ac, -ch.ev_port_rated_kw}},
                                 RowSense::less_equal, 0.0);
                m.add_constraint("rup_ev" + id, {{xm, 1.0}, {rup, 1.0}}, RowSense::less_equal, up_cap);
                m.add_constraint("rdn_port" + id, {{xp, 1.0}, {rdn, 1.0}, {ac, -ch.ev_port_rated_kw}},
                                 RowSense::less_equal, 0.0);
                m.add_constraint("rdn_ev" + id, {{xp, 1.0}, {rdn, 1.0}}, RowSense::less_equal, dn_cap);
                if (s.reserve_mode == ReserveMode::symmetric)
                    m.add_constraint("rsym" + id, {{rup, 1.0}, {rdn, -1.0}}, RowSense::equal, 0.0);
                const double eta2 = eta_c * eta_c;
                const auto i = static_cast<std::size_t>(t);
                m.add_objective_coef(rup, -income_scale * eta2 * s.market.regup_price[i]);
                m.add_objective_coef(rdn, -income_scale * eta2 * s.market.regdn_price[i]);
            }
            if (v2g) m.add_objective_coef(xm, dt * s.wear_rate);
        }

        // Shortfall penalty at the departure step.
        if (!departed) {
            m.add_objective_offset(ev.penalty_rate * target);
            m.add_objective_coef(cat.ev(EvVar::soc, td, v), -ev.penalty_rate);
        }
    }

    for (int t = from_step; t < T; ++t) {
        const auto i = static_cast<std::size_t>(t);
        std::vector<Term> exchange;
        for (int c = 0; c < C; ++c) {
            const auto& ch = s.chargers[static_cast<std::size_t>(c)];
            const int pv = cat.charger(ChargerVar::pv, t, c), draw = cat.charger(ChargerVar::draw, t, c);
            const int feed = cat.charger(ChargerVar::feed, t, c), adf = cat.charger(ChargerVar::draw_mode, t, c);
            const double avail = ch.pv_available_kw(s.pv.normalized_kw_per_kwp[i]);
            if (s.curtailment_enabled) m.set_bounds(pv, 0.0, avail);
            else m.fix(pv, avail);
            m.add_objective_offset(dt * avail * s.pv_cost);

            const double eta = ch.eff_conv;
            const std::string id = "_" + std::to_string(t) + "_" + ch.id;
            std::vector<Term> balance{{pv, eta}, {draw, eta}, {feed, -1.0 / eta}};
            std::vector<Term> up{{feed, 1.0}}, dn{{draw, 1.0}}, mux;
            // With one direction at a time, feed can only come from PV and
            // discharge, and draw only goes to charging. Implied for integer
            // points. The relaxation only gains from looping grid power
            // through the link when re-exporting pays, so rows go there only.
            const bool loop_pays = s.market.buy_price[i] < eta * eta * s.market.sell_price[i];
            std::vector<Term> source{{feed, 1.0}, {pv, -eta * eta}}, sink{{draw, eta * eta}};
            int present = 0;
            for (int v = 0; v < V; ++v) {
                if (out.charger_of[static_cast<std::size_t>(v)] != c || !s.fleet[static_cast<std::size_t>(v)].present_at(t))
                    continue;
                ++present;
                balance.push_back({cat.ev(EvVar::discharge, t, v), eta});
                balance.push_back({cat.ev(EvVar::charge, t, v), -1.0 / eta});
                source.push_back({cat.ev(EvVar::discharge, t, v), -eta * eta});
                sink.push_back({cat.ev(EvVar::charge, t, v), -1.0});
                up.push_back({cat.ev(EvVar::reserve_up, t, v), 1.0});
                dn.push_back({cat.ev(EvVar::reserve_down, t, v), 1.0});
                mux.push_back({cat.ev(EvVar::connected, t, v), 1.0});
            }
            m.add_constraint("dclink" + id, std::move(balance), RowSense::equal, 0.0);
            if (loop_pays) {
                m.add_constraint("feed_source" + id, std::move(source), RowSense::less_equal, 0.0);
                m.add_constraint("draw_sink" + id, std::move(sink), RowSense::less_equal, 0.0);
            }
            m.add_constraint("draw_mode" + id, {{draw, 1.0}, {adf, -ch.inverter_rated_kw}}, RowSense::less_equal, 0.0);
            m.add_constraint("feed_mode" + id, {{feed, 1.0}, {adf, ch.inverter_rated_kw}}, RowSense::less_equal,
                             ch.inverter_rated_kw);
            if (present > ch.dc_converter_count)
                m.add_constraint("mux" + id, std::move(mux), RowSense::less_equal, ch.dc_converter_count);
            if (s.reserves_enabled && present > 0) {
                m.add_constraint("rup_inv" + id, std::move(up), RowSense::less_equal, ch.inverter_rated_kw);
                m.add_constraint("rdn_inv" + id, std::move(dn), RowSense::less_equal, ch.inverter_rated_kw);
            }
            exchange.push_back({draw, 1.0});
            exchange.push_back({feed, -1.0});
        }
        const int imp = cat.site(SiteVar::import, t), exp = cat.site(SiteVar::export_, t);
        exchange.push_back({imp, -1.0});
        exchange.push_back({exp, 1.0});
        m.add_constraint("grid_" + std::to_string(t), std::move(exchange), RowSense::equal, 0.0);
        m.set_bounds(imp, 0.0, s.limits.import_cap_kw[i]);
        m.set_bounds(exp, 0.0, s.limits.export_cap_kw[i]);
        m.add_objective_coef(imp, dt * s.market.buy_price[i]);
        m.add_objective_coef(exp, -dt * s.market.sell_price[i]);
    }

    m.seal();
    return out;
}

namespace {

template <class T>
std::vector<std::vector<T>> grid(int rows, int cols) {
    return std::vector<std::vector<T>>(static_cast<std::size_t>(rows), std::vector<T>(static_cast<std::size_t>(cols), T{}));
}

} // namespace

Schedule Schedule::zeros(const ScenarioSnapshot& s, int first_step) {
    Schedule out;
    out.first_step = first_step;
    out.horizon_steps = s.horizon_steps;
    for (const auto& ev : s.fleet) out.ev_ids.push_back(ev.id);
    for (const auto& c : s.chargers) out.charger_ids.push_back(c.id);
    const int T = s.horizon_steps, V = static_cast<int>(s.fleet.size()), C = static_cast<int>(s.chargers.size());
    for (auto* g : {&out.charge, &out.discharge, &out.reserve_up, &out.reserve_down, &out.soc}) *g = grid<double>(T, V);
    out.connected = grid<int>(T, V);
    out.charge_mode = grid<int>(T, V);
    for (auto* g : {&out.pv, &out.draw, &out.feed}) *g = grid<double>(T, C);
    out.draw_mode = grid<int>(T, C);
    out.grid_import.assign(static_cast<std::size_t>(T), 0.0);
    out.grid_export.assign(static_cast<std::size_t>(T), 0.0);
    return out;
}

std::vector<double> to_values(const Schedule& sc, const EmsModel& ems) {
    const auto& cat = ems.catalog;
    std::vector<double> x(static_cast<std::size_t>(cat.total()), 0.0);
    auto put = [&](int j, double value) { x[static_cast<std::size_t>(j)] = value; };
    for (int t = cat.first_step(); t < cat.horizon_steps(); ++t) {
        const auto i = static_cast<std::size_t>(t);
        for (int v = 0; v < cat.vehicles(); ++v) {
            const auto k = static_cast<std::size_t>(v);
            put(cat.ev(EvVar::charge, t, v), sc.charge[i][k]);
            put(cat.ev(EvVar::discharge, t, v), sc.discharge[i][k]);
            put(cat.ev(EvVar::reserve_up, t, v), sc.reserve_up[i][k]);
            put(cat.ev(EvVar::reserve_down, t, v), sc.reserve_down[i][k]);
            put(cat.ev(EvVar::soc, t, v), sc.soc[i][k]);
            put(cat.ev(EvVar::connected, t, v), sc.connected[i][k]);
            put(cat.ev(EvVar::charge_mode, t, v), sc.charge_mode[i][k]);
        }
        for (int c = 0; c < cat.chargers(); ++c) {
            const auto k = static_cast<std::size_t>(c);
            put(cat.charger(ChargerVar::pv, t, c), sc.pv[i][k]);
            put(cat.charger(ChargerVar::draw, t, c), sc.draw[i][k]);
            put(cat.charger(ChargerVar::feed, t, c), sc.feed[i][k]);
            put(cat.charger(ChargerVar::draw_mode, t, c), sc.draw_mode[i][k]);
        }
        put(cat.site(SiteVar::import, t), sc.grid_import[i]);
        put(cat.site(SiteVar::export_, t), sc.grid_export[i]);
    }
    return x;
}

Schedule extract_schedule(const milp::MilpSolution& solution, const EmsModel& ems, const ScenarioSnapshot& s,
                          double audit_tol) {
    if (!solution.has_incumbent()) throw NoIncumbent("solution has no incumbent (status " + milp::to_string(solution.status) + ")");
    const auto& cat = ems.catalog;
    if (static_cast<int>(solution.values.size()) != cat.total())
        throw DimensionMismatch("solution has " + std::to_string(solution.values.size()) + " values, model has " +
                                std::to_string(cat.total()));
    auto values = solution.values;
    for (int j = 0; j < ems.model.num_variables(); ++j) {
        if (ems.model.variable(j).kind == milp::VarKind::binary) {
            auto& x = values[static_cast<std::size_t>(j)];
            x = x >= 0.5 ? 1.0 : 0.0;
        }
    }
    const auto report = milp::audit(ems.model, values, audit_tol);
    if (!report.clean()) throw Error("extracted schedule fails audit: " + report.summary());

    Schedule sc = Schedule::zeros(s, cat.first_step());
    auto get = [&](int j) { return values[static_cast<std::size_t>(j)]; };
    for (int t = cat.first_step(); t < cat.horizon_steps(); ++t) {
        const auto i = static_cast<std::size_t>(t);
        for (int v = 0; v < cat.vehicles(); ++v) {
            const auto k = static_cast<std::size_t>(v);
            sc.charge[i][k] = get(cat.ev(EvVar::charge, t, v));
            sc.discharge[i][k] = get(cat.ev(EvVar::discharge, t, v));
            sc.reserve_up[i][k] = get(cat.ev(EvVar::reserve_up, t, v));
            sc.reserve_down[i][k] = get(cat.ev(EvVar::reserve_down, t, v));
            sc.soc[i][k] = get(cat.ev(EvVar::soc, t, v));
            sc.connected[i][k] = static_cast<int>(get(cat.ev(EvVar::connected, t, v)));
            sc.charge_mode[i][k] = static_cast<int>(get(cat.ev(EvVar::charge_mode, t, v)));
        }
        for (int c = 0; c < cat.chargers(); ++c) {
            const auto k = static_cast<std::size_t>(c);
            sc.pv[i][k] = get(cat.charger(ChargerVar::pv, t, c));
            sc.draw[i][k] = get(cat.charger(ChargerVar::draw, t, c));
            sc.feed[i][k] = get(cat.charger(ChargerVar::feed, t, c));
            sc.draw_mode[i][k] = static_cast<int>(get(cat.charger(ChargerVar::draw_mode, t, c)));
        }
        sc.grid_import[i] = get(cat.site(SiteVar::import, t));
        sc.grid_export[i] = get(cat.site(SiteVar::export_, t));
    }
    return sc;
}

std::vector<double> embed_charging_profile(const std::vector<std::vector<double>>& profile, const EmsModel& ems,
                                           const ScenarioSnapshot& s) {
    const auto& cat = ems.catalog;
    if (static_cast<int>(profile.size()) != s.horizon_steps)
        throw DimensionMismatch("profile covers " + std::to_string(profile.size()) + " steps, horizon is " +
                                std::to_string(s.horizon_steps));
    Schedule sc = Schedule::zeros(s, cat.first_step());
    const int V = cat.vehicles();
    for (int v = 0; v < V; ++v) {
        const auto& ev = s.fleet[static_cast<std::size_t>(v)];
        const auto k = static_cast<std::size_t>(v);
        double soc = ev.arrival_soc_kwh;
        for (int t = ev.arrival_step; t <= ev.departure_step && t < s.horizon_steps; ++t) {
            const auto i = static_cast<std::size_t>(t);
            sc.soc[i][k] = soc;
            if (t == ev.departure_step) break;
            const double p = profile[i].at(k);
            sc.charge[i][k] = p;
            sc.connected[i][k] = p > 0.0 ? 1 : 0;
            sc.charge_mode[i][k] = 1;
            soc += s.step_hours * p * ev.eff_charge;
        }
    }
    for (int t = cat.first_step(); t < s.horizon_steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        double net_site = 0.0;
        for (int c = 0; c < cat.chargers(); ++c) {
            const auto& ch = s.chargers[static_cast<std::size_t>(c)];
            const auto k = static_cast<std::size_t>(c);
            const double eta = ch.eff_conv;
            sc.pv[i][k] = ch.pv_available_kw(s.pv.normalized_kw_per_kwp[i]);
            double load = 0.0;
            for (int v = 0; v < V; ++v)
                if (ems.charger_of[static_cast<std::size_t>(v)] == c) load += sc.charge[i][static_cast<std::size_t>(v)];
            // (pv + draw) * eta = (feed + load) / eta
            const double surplus = sc.pv[i][k] * eta - load / eta;
            if (surplus >= 0.0) {
                sc.feed[i][k] = surplus * eta;
            } else {
                sc.draw[i][k] = -surplus / eta;
                sc.draw_mode[i][k] = 1;
            }
            net_site += sc.draw[i][k] - sc.feed[i][k];
        }
        if (net_site >= 0.0) sc.grid_import[i] = net_site;
        else sc.grid_export[i] = -net_site;
    }
    return to_values(sc, ems);
}

} // namespace evpv::ems
