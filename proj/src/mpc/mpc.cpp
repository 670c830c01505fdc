// SPDX-License-Identifier: Apache-2.0
#include "evpv/mpc.hpp"

#include "evpv/csv.hpp"
#include "evpv/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace evpv::mpc {

namespace {

constexpr double kTol = 1e-9;

std::string step_tag(int step) { return "step " + std::to_string(step) + ": "; }

// Site exchange and per-charger draw/feed that close every DC link for the
// vehicle powers and PV in `s`.
void rebalance(Slice& s, const ScenarioSnapshot& snap) {
    double net = 0.0;
    for (std::size_t c = 0; c < snap.chargers.size(); ++c) {
        const auto& ch = snap.chargers[c];
        const double eta = ch.eff_conv;
        double charge = 0.0, discharge = 0.0;
        for (std::size_t v = 0; v < snap.fleet.size(); ++v) {
            if (snap.fleet[v].charger_id != ch.id) continue;
            charge += s.charge[v];
            discharge += s.discharge[v];
        }
        // (pv + draw + discharge) * eta = (feed + charge) / eta
        const double surplus = (s.pv[c] + discharge) * eta - charge / eta;
        s.feed[c] = surplus >= 0.0 ? surplus * eta : 0.0;
        s.draw[c] = surplus < 0.0 ? -surplus / eta : 0.0;
        net += s.draw[c] - s.feed[c];
    }
    s.grid_import = std::max(net, 0.0);
    s.grid_export = std::max(-net, 0.0);
}

// Largest k in [0,1] with excess(k) <= 0 for an excess non-decreasing in k.
// Bisection copes with the kinks the balance puts into excess.
template <class F>
double feasible_scale(F excess) {
    double lo = 0.0, hi = 1.0;
    if (excess(hi) <= 0.0) return 1.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) <= 0.0 ? lo : hi) = mid;
    }
    return lo;
}

} // namespace

double DayTimeline::multiplier(int step) const {
    if (pv_multiplier.empty()) return 1.0;
    return pv_multiplier.at(static_cast<std::size_t>(step));
}

ScenarioSnapshot DayTimeline::realized() const {
    ScenarioSnapshot s = plan;
    for (auto& ev : s.fleet) {
        if (auto it = arrival_step.find(ev.id); it != arrival_step.end()) ev.arrival_step = it->second;
        if (auto it = departure_step.find(ev.id); it != departure_step.end()) ev.departure_step = it->second;
        if (auto it = arrival_soc_kwh.find(ev.id); it != arrival_soc_kwh.end()) ev.arrival_soc_kwh = it->second;
    }
    return s;
}

std::vector<std::string> validate_timeline(const DayTimeline& tl) {
    std::vector<std::string> issues = validate_snapshot(tl.plan);
    const int T = tl.plan.horizon_steps;
    if (!tl.pv_multiplier.empty() && static_cast<int>(tl.pv_multiplier.size()) != T)
        issues.push_back("PV multipliers cover " + std::to_string(tl.pv_multiplier.size()) + " steps, horizon is " +
                         std::to_string(T));
    const double band = tl.plan.pv.uncertainty;
    for (std::size_t t = 0; t < tl.pv_multiplier.size(); ++t) {
        const double m = tl.pv_multiplier[t];
        if (!(m >= 1.0 - band - kTol && m <= 1.0 + band + kTol)) {
            std::ostringstream os;
            os << "step " << t << ": PV multiplier " << m << " outside [" << 1.0 - band << ", " << 1.0 + band << "]";
            issues.push_back(os.str());
        }
    }
    auto known = [&](const std::string& id) {
        return std::any_of(tl.plan.fleet.begin(), tl.plan.fleet.end(), [&](const EvSession& ev) { return ev.id == id; });
    };
    for (const auto* m : {&tl.arrival_step, &tl.departure_step})
        for (const auto& [id, _] : *m)
            if (!known(id)) issues.push_back("overlay names unknown vehicle '" + id + "'");
    for (const auto& [id, _] : tl.arrival_soc_kwh)
        if (!known(id)) issues.push_back("overlay names unknown vehicle '" + id + "'");
    if (issues.empty())
        for (const auto& ev : tl.realized().fleet)
            for (const auto& i : validate_session(ev, T)) issues.push_back("realized vehicle '" + ev.id + "': " + i);
    return issues;
}

DayTimeline load_overlay(const std::string& path, const ScenarioSnapshot& plan) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open overlay file '" + path + "'");
    return load_overlay(in, path, plan);
}

DayTimeline load_overlay(std::istream& in, const std::string& source, const ScenarioSnapshot& plan) {
    const csv::Table table = csv::read_stream(in, source);
    const auto c_step = table.require_column("step");
    const auto c_entity = table.require_column("entity");
    const auto c_field = table.require_column("field");
    const auto c_value = table.require_column("value");
    DayTimeline tl(plan);
    auto integral = [&](const csv::Row& row) {
        const double v = csv::to_double(table, row, c_value);
        if (v != std::floor(v)) throw ParseError(source, row.line, "step value must be a whole number");
        return static_cast<int>(v);
    };
    for (const auto& row : table.rows) {
        const std::string& field = row.cells[c_field];
        const std::string& entity = row.cells[c_entity];
        if (field == "pv_multiplier") {
            const int step = csv::to_int(table, row, c_step);
            if (step < 0 || step >= plan.horizon_steps)
                throw ParseError(source, row.line, "step " + std::to_string(step) + " outside the day");
            if (tl.pv_multiplier.empty()) tl.pv_multiplier.assign(static_cast<std::size_t>(plan.horizon_steps), 1.0);
            tl.pv_multiplier[static_cast<std::size_t>(step)] = csv::to_double(table, row, c_value);
        } else if (field == "arrival_step") {
            tl.arrival_step[entity] = integral(row);
        } else if (field == "departure_step") {
            tl.departure_step[entity] = integral(row);
        } else if (field == "arrival_soc_kwh") {
            tl.arrival_soc_kwh[entity] = csv::to_double(table, row, c_value);
        } else {
            throw ParseError(source, row.line, "unknown overlay field '" + field + "'");
        }
    }
    auto issues = validate_timeline(tl);
    if (!issues.empty()) throw InvalidScenario(std::move(issues));
    return tl;
}

Slice Slice::zeros(std::size_t vehicles, std::size_t chargers) {
    Slice s;
    for (auto* v : {&s.charge, &s.discharge, &s.reserve_up, &s.reserve_down}) v->assign(vehicles, 0.0);
    for (auto* v : {&s.pv, &s.draw, &s.feed}) v->assign(chargers, 0.0);
    return s;
}

Slice Slice::from_schedule(const ems::Schedule& sc, int step) {
    const auto i = static_cast<std::size_t>(step);
    Slice s;
    s.charge = sc.charge.at(i);
    s.discharge = sc.discharge.at(i);
    s.reserve_up = sc.reserve_up.at(i);
    s.reserve_down = sc.reserve_down.at(i);
    s.pv = sc.pv.at(i);
    s.draw = sc.draw.at(i);
    s.feed = sc.feed.at(i);
    s.grid_import = sc.grid_import.at(i);
    s.grid_export = sc.grid_export.at(i);
    return s;
}

PlantOutcome plant_step(const Slice& committed, const ScenarioSnapshot& snap, int step,
                        const std::vector<double>& soc_now, double pv_multiplier) {
    const std::size_t V = snap.fleet.size(), C = snap.chargers.size();
    if (committed.charge.size() != V || committed.pv.size() != C || soc_now.size() != V)
        throw DimensionMismatch("committed slice does not match the scenario");
    PlantOutcome out;
    out.applied = committed;
    Slice& a = out.applied;
    const auto i = static_cast<std::size_t>(step);

    for (std::size_t v = 0; v < V; ++v) {
        if (snap.fleet[v].present_at(step)) continue;
        if (a.charge[v] != 0.0 || a.discharge[v] != 0.0 || a.reserve_up[v] != 0.0 || a.reserve_down[v] != 0.0)
            out.events.push_back(step_tag(step) + "vehicle '" + snap.fleet[v].id + "' absent, powers zeroed");
        a.charge[v] = a.discharge[v] = a.reserve_up[v] = a.reserve_down[v] = 0.0;
    }
    for (std::size_t c = 0; c < C; ++c) {
        const double avail = snap.chargers[c].pv_available_kw(snap.pv.normalized_kw_per_kwp[i] * pv_multiplier);
        if (a.pv[c] > avail) {
            if (a.pv[c] - avail > kTol) {
                std::ostringstream os;
                os << step_tag(step) << "charger '" << snap.chargers[c].id << "' PV " << avail << " kW of planned "
                   << a.pv[c] << " kW";
                out.events.push_back(os.str());
            }
            a.pv[c] = avail;
        }
    }
    rebalance(a, snap);

    const double imp_cap = snap.limits.import_cap_kw[i], exp_cap = snap.limits.export_cap_kw[i];
    if (a.grid_import > imp_cap + kTol) {
        const Slice base = a;
        const double k = feasible_scale([&](double k) {
            Slice t = base;
            for (auto& x : t.charge) x *= k;
            rebalance(t, snap);
            return t.grid_import - imp_cap;
        });
        for (auto& x : a.charge) x *= k;
        rebalance(a, snap);
        std::ostringstream os;
        os << step_tag(step) << "import cap " << imp_cap << " kW exceeded, charging scaled by " << k;
        out.events.push_back(os.str());
    }
    if (a.grid_export > exp_cap + kTol) {
        const Slice base = a;
        const double k = feasible_scale([&](double k) {
            Slice t = base;
            for (auto& x : t.pv) x *= k;
            for (auto& x : t.discharge) x *= k;
            rebalance(t, snap);
            return t.grid_export - exp_cap;
        });
        for (auto& x : a.pv) x *= k;
        for (auto& x : a.discharge) x *= k;
        rebalance(a, snap);
        std::ostringstream os;
        os << step_tag(step) << "export cap " << exp_cap << " kW exceeded, PV and discharge scaled by " << k;
        out.events.push_back(os.str());
    }

    out.soc_next = soc_now;
    for (std::size_t v = 0; v < V; ++v) {
        const auto& ev = snap.fleet[v];
        if (!ev.present_at(step)) continue;
        double b = soc_now[v] + snap.step_hours * (a.charge[v] * ev.eff_charge - a.discharge[v] / ev.eff_discharge);
        const double clamped = std::clamp(b, ev.soc_min_kwh, ev.soc_max_kwh);
        if (std::abs(clamped - b) > kTol) {
            std::ostringstream os;
            os << step_tag(step) << "vehicle '" << ev.id << "' SOC " << b << " kWh clamped to " << clamped;
            out.events.push_back(os.str());
        }
        out.soc_next[v] = clamped;
    }
    return out;
}

namespace {

// The fleet as the controller sees it at `step`: exact for vehicles that
// have plugged in, announced (and delayed if overdue) for the rest. Vehicles
// that can no longer be served are left out.
ScenarioSnapshot controller_view(const ScenarioSnapshot& plan, const ScenarioSnapshot& real, int step,
                                 std::vector<int>& positions) {
    ScenarioSnapshot s = plan;
    s.fleet.clear();
    positions.clear();
    for (std::size_t v = 0; v < real.fleet.size(); ++v) {
        const auto& actual = real.fleet[v];
        EvSession ev = actual;
        if (actual.arrival_step > step) {
            ev = plan.fleet[v];
            ev.arrival_step = std::max(ev.arrival_step, step + 1);
            if (ev.arrival_step >= ev.departure_step) continue;
        }
        s.fleet.push_back(std::move(ev));
        positions.push_back(static_cast<int>(v));
    }
    return s;
}

} // namespace

MpcTrace run_day(const DayTimeline& timeline, const MpcOptions& options) {
    auto issues = validate_timeline(timeline);
    if (!issues.empty()) throw InvalidScenario(std::move(issues));
    MpcTrace trace;
    trace.realized = timeline.realized();
    const ScenarioSnapshot& real = trace.realized;
    const int T = real.horizon_steps;
    const std::size_t V = real.fleet.size(), C = real.chargers.size();
    const double dt = real.step_hours;
    trace.applied = ems::Schedule::zeros(real, 0);
    auto& cost = trace.cost;

    std::vector<double> soc(V, 0.0);
    std::optional<ems::Schedule> previous;
    std::vector<std::string> previous_ids;

    for (int s = 0; s < T; ++s) {
        const auto i = static_cast<std::size_t>(s);
        StepRecord rec;
        rec.step = s;
        for (std::size_t v = 0; v < V; ++v)
            if (real.fleet[v].arrival_step == s) soc[v] = real.fleet[v].arrival_soc_kwh;

        std::vector<int> pos;
        const ScenarioSnapshot view = controller_view(timeline.plan, real, s, pos);
        std::map<std::string, double> realized_soc;
        for (std::size_t k = 0; k < pos.size(); ++k) {
            const auto& ev = view.fleet[k];
            if (ev.arrival_step < s && s <= ev.departure_step) realized_soc[ev.id] = soc[static_cast<std::size_t>(pos[k])];
        }

        const double incurred = cost.component_sum();
        Slice commit = Slice::zeros(V, C);
        std::vector<int> connected(V, 0), mode(V, 0);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto model = ems::build(view, s, realized_soc);
            std::vector<std::string> ids;
            for (const auto& ev : view.fleet) ids.push_back(ev.id);
            milp::MilpSolution sol;
            if (options.warm_start && previous && ids == previous_ids) {
                ems::Schedule seed = *previous;
                seed.first_step = s;
                sol = milp::solve_milp(model.model, options.solver, ems::to_values(seed, model));
            } else {
                sol = milp::solve_milp(model.model, options.solver);
            }
            rec.status = sol.status;
            rec.nodes = sol.nodes;
            rec.gap = sol.gap;
            if (!sol.has_incumbent()) throw ems::NoIncumbent("re-solve at step " + std::to_string(s) + " found no schedule");
            const auto plan = ems::extract_schedule(sol, model, view);
            rec.projected_total = incurred + sol.objective;
            const Slice part = Slice::from_schedule(plan, s);
            for (std::size_t k = 0; k < pos.size(); ++k) {
                const auto v = static_cast<std::size_t>(pos[k]);
                commit.charge[v] = part.charge[k];
                commit.discharge[v] = part.discharge[k];
                commit.reserve_up[v] = part.reserve_up[k];
                commit.reserve_down[v] = part.reserve_down[k];
                connected[v] = plan.connected[i][k];
                mode[v] = plan.charge_mode[i][k];
            }
            commit.pv = part.pv;
            commit.draw = part.draw;
            commit.feed = part.feed;
            commit.grid_import = part.grid_import;
            commit.grid_export = part.grid_export;
            previous = plan;
            previous_ids = std::move(ids);
        } catch (const Error& e) {
            rec.fallback = true;
            rec.events.push_back(step_tag(s) + "re-solve failed (" + e.what() + "), zero power committed");
            rec.projected_total = std::nan("");
            previous.reset();
            // Zero power with PV at forecast: plant_step closes the balance.
            for (std::size_t c = 0; c < C; ++c)
                commit.pv[c] = real.chargers[c].pv_available_kw(real.pv.normalized_kw_per_kwp[i]);
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        // Departures at this step settle their shortfall from the SOC now.
        for (std::size_t v = 0; v < V; ++v) {
            const auto& ev = real.fleet[v];
            if (ev.departure_step != s) continue;
            trace.applied.soc[i][v] = soc[v];
            cost.penalty_usd += ev.penalty_rate * (departure_target(ev) - soc[v]);
        }

        auto outcome = plant_step(commit, real, s, soc, timeline.multiplier(s));
        const Slice& a = outcome.applied;
        for (auto& e : outcome.events) rec.events.push_back(std::move(e));
        for (std::size_t v = 0; v < V; ++v) {
            if (!real.fleet[v].present_at(s)) continue;
            trace.applied.charge[i][v] = a.charge[v];
            trace.applied.discharge[i][v] = a.discharge[v];
            trace.applied.reserve_up[i][v] = a.reserve_up[v];
            trace.applied.reserve_down[i][v] = a.reserve_down[v];
            trace.applied.soc[i][v] = soc[v];
            trace.applied.connected[i][v] = connected[v];
            trace.applied.charge_mode[i][v] = mode[v];
        }
        for (std::size_t c = 0; c < C; ++c) {
            trace.applied.pv[i][c] = a.pv[c];
            trace.applied.draw[i][c] = a.draw[c];
            trace.applied.feed[i][c] = a.feed[c];
            trace.applied.draw_mode[i][c] = a.draw[c] > 0.0 ? 1 : 0;
        }
        trace.applied.grid_import[i] = a.grid_import;
        trace.applied.grid_export[i] = a.grid_export;

        cost.energy_trade_usd += dt * (a.grid_import * real.market.buy_price[i] - a.grid_export * real.market.sell_price[i]);
        for (std::size_t v = 0; v < V; ++v) {
            const double eta = real.charger_of(real.fleet[v]).eff_conv;
            cost.reserve_income_usd += dt * (1.0 - real.pv.uncertainty) * eta * eta *
                                       (a.reserve_up[v] * real.market.regup_price[i] +
                                        a.reserve_down[v] * real.market.regdn_price[i]);
            cost.v2g_wear_usd += dt * a.discharge[v] * real.wear_rate;
        }
        for (const auto& ch : real.chargers)
            cost.pv_cost_usd += dt * ch.pv_available_kw(real.pv.normalized_kw_per_kwp[i]) * real.pv_cost;

        soc = std::move(outcome.soc_next);
        trace.steps.push_back(std::move(rec));
    }
    cost.total_usd = cost.component_sum();
    return trace;
}

void write_trace_csv(std::ostream& out, const MpcTrace& trace) {
    using csv::format_number;
    out << "step,status,fallback,nodes,gap,projected_total_usd,import_kw,export_kw\n";
    for (const auto& r : trace.steps) {
        const auto i = static_cast<std::size_t>(r.step);
        out << r.step << ',' << (r.fallback ? "fallback" : milp::to_string(r.status)) << ',' << (r.fallback ? 1 : 0)
            << ',' << r.nodes << ',' << format_number(r.gap) << ','
            << (std::isnan(r.projected_total) ? std::string("nan") : format_number(r.projected_total)) << ','
            << format_number(trace.applied.grid_import[i]) << ',' << format_number(trace.applied.grid_export[i])
            << '\n';
    }
}

} // namespace evpv::mpc
