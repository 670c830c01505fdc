// SPDX-License-Identifier: Apache-2.0
#include "evpv/domain.hpp"

#include "evpv/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace evpv {

namespace {

constexpr double kGridSnap = 1e-9;

std::string session_tag(const EvSession& ev) { return "EV '" + ev.id + "': "; }

bool in_unit_interval(double v) { return std::isfinite(v) && v > 0.0 && v <= 1.0; }

void check_series(std::vector<std::string>& issues, const std::vector<double>& series,
                  const char* name, int horizon) {
    if (static_cast<int>(series.size()) != horizon) {
        issues.push_back(std::string(name) + " has " + std::to_string(series.size()) +
                         " entries, expected " + std::to_string(horizon));
        return;
    }
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (!std::isfinite(series[t])) {
            issues.push_back(std::string(name) + "[" + std::to_string(t) + "] is not finite");
            return;
        }
    }
}

} // namespace

SiteLimits SiteLimits::flat(int steps, double import_kw, double export_kw) {
    SiteLimits limits;
    limits.import_cap_kw.assign(static_cast<std::size_t>(steps), import_kw);
    limits.export_cap_kw.assign(static_cast<std::size_t>(steps), export_kw);
    return limits;
}

std::optional<std::size_t> ScenarioSnapshot::charger_index(const std::string& id) const {
    for (std::size_t c = 0; c < chargers.size(); ++c) {
        if (chargers[c].id == id) return c;
    }
    return std::nullopt;
}

const ChargerSpec& ScenarioSnapshot::charger_of(const EvSession& ev) const {
    const auto idx = charger_index(ev.charger_id);
    if (!idx) throw InvalidScenario({session_tag(ev) + "unknown charger '" + ev.charger_id + "'"});
    return chargers[*idx];
}

std::vector<std::string> validate_session(const EvSession& ev, int horizon_steps) {
    std::vector<std::string> issues;
    const std::string tag = session_tag(ev);
    if (ev.id.empty()) issues.push_back("EV with empty id");
    if (ev.arrival_step < 0) issues.push_back(tag + "arrival step is negative");
    if (ev.departure_step <= ev.arrival_step)
        issues.push_back(tag + "departure step " + std::to_string(ev.departure_step) +
                         " is not after arrival step " + std::to_string(ev.arrival_step));
    // The SOC at the departure step is a model variable, so the departure
    // step itself has to be on the grid.
    if (ev.departure_step > horizon_steps - 1)
        issues.push_back(tag + "departure step " + std::to_string(ev.departure_step) +
                         " is beyond the last grid step " + std::to_string(horizon_steps - 1));
    const double values[] = {ev.demand_kwh,    ev.arrival_soc_kwh,  ev.soc_min_kwh,
                             ev.soc_max_kwh,   ev.charge_max_kw,    ev.discharge_min_kw,
                             ev.eff_charge,    ev.eff_discharge,    ev.penalty_rate};
    if (!std::all_of(std::begin(values), std::end(values), [](double v) { return std::isfinite(v); })) {
        issues.push_back(tag + "non-finite parameter");
        return issues;
    }
    if (ev.demand_kwh < 0.0) issues.push_back(tag + "negative demand");
    if (ev.soc_min_kwh < 0.0) issues.push_back(tag + "negative minimum SOC");
    if (ev.arrival_soc_kwh < 0.0) issues.push_back(tag + "negative arrival SOC");
    if (ev.soc_min_kwh > ev.soc_max_kwh) issues.push_back(tag + "minimum SOC above maximum SOC");
    if (ev.arrival_soc_kwh > ev.soc_max_kwh) issues.push_back(tag + "arrival SOC above maximum SOC");
    if (ev.arrival_soc_kwh + ev.demand_kwh > ev.soc_max_kwh + 1e-9)
        issues.push_back(tag + "arrival SOC plus demand exceeds maximum SOC");
    if (!(ev.charge_max_kw > 0.0)) issues.push_back(tag + "charge limit must be positive");
    if (ev.discharge_min_kw > 0.0) issues.push_back(tag + "discharge limit must be <= 0");
    if (!in_unit_interval(ev.eff_charge)) issues.push_back(tag + "charging efficiency outside (0,1]");
    if (!in_unit_interval(ev.eff_discharge)) issues.push_back(tag + "discharging efficiency outside (0,1]");
    if (ev.penalty_rate < 0.0) issues.push_back(tag + "negative penalty rate");
    if (ev.charger_id.empty()) issues.push_back(tag + "no charger assigned");
    return issues;
}

std::vector<std::string> validate_charger(const ChargerSpec& c) {
    std::vector<std::string> issues;
    const std::string tag = "charger '" + c.id + "': ";
    if (c.id.empty()) issues.push_back("charger with empty id");
    const double values[] = {c.pv_rated_kw, c.inverter_rated_kw, c.ev_port_rated_kw, c.eff_conv, c.pv_scale};
    if (!std::all_of(std::begin(values), std::end(values), [](double v) { return std::isfinite(v); })) {
        issues.push_back(tag + "non-finite parameter");
        return issues;
    }
    if (c.pv_rated_kw < 0.0) issues.push_back(tag + "negative PV rating");
    if (!(c.inverter_rated_kw > 0.0)) issues.push_back(tag + "inverter rating must be positive");
    if (!(c.ev_port_rated_kw > 0.0)) issues.push_back(tag + "EV port rating must be positive");
    if (c.pv_rated_kw > c.inverter_rated_kw) issues.push_back(tag + "PV rating exceeds inverter rating");
    if (c.dc_converter_count < 1) issues.push_back(tag + "needs at least one DC converter");
    if (c.dc_converter_count > c.connection_count)
        issues.push_back(tag + "more DC converters than connections");
    if (!in_unit_interval(c.eff_conv)) issues.push_back(tag + "converter efficiency outside (0,1]");
    if (c.pv_scale < 0.0) issues.push_back(tag + "negative PV scale");
    return issues;
}

std::vector<std::string> validate_snapshot(const ScenarioSnapshot& s) {
    std::vector<std::string> issues;
    if (!(s.step_hours > 0.0) || !std::isfinite(s.step_hours)) issues.push_back("step length must be positive");
    if (s.horizon_steps < 1) {
        issues.push_back("horizon must have at least one step");
        return issues;
    }
    const int T = s.horizon_steps;
    check_series(issues, s.market.buy_price, "buy price", T);
    check_series(issues, s.market.sell_price, "sell price", T);
    check_series(issues, s.market.regup_price, "up-regulation price", T);
    check_series(issues, s.market.regdn_price, "down-regulation price", T);
    check_series(issues, s.pv.normalized_kw_per_kwp, "PV forecast", T);
    check_series(issues, s.limits.import_cap_kw, "import cap", T);
    check_series(issues, s.limits.export_cap_kw, "export cap", T);
    if (issues.empty()) {
        for (int t = 0; t < T; ++t) {
            const auto i = static_cast<std::size_t>(t);
            if (s.market.sell_price[i] > s.market.buy_price[i])
                issues.push_back("sell price above buy price at step " + std::to_string(t));
            if (s.pv.normalized_kw_per_kwp[i] < 0.0)
                issues.push_back("negative PV forecast at step " + std::to_string(t));
            if (s.limits.import_cap_kw[i] < 0.0 || s.limits.export_cap_kw[i] < 0.0)
                issues.push_back("negative network cap at step " + std::to_string(t));
        }
    }
    if (!(s.pv.uncertainty >= 0.0 && s.pv.uncertainty < 1.0)) issues.push_back("PV uncertainty outside [0,1)");
    if (!(s.taper_charge > 0.0 && s.taper_charge < 1.0)) issues.push_back("charge taper start outside (0,1)");
    if (!(s.taper_discharge > 0.0 && s.taper_discharge < 1.0))
        issues.push_back("discharge taper start outside (0,1)");
    if (!(s.wear_rate >= 0.0) || !std::isfinite(s.wear_rate)) issues.push_back("V2G wear rate must be >= 0");
    if (!std::isfinite(s.pv_cost)) issues.push_back("PV cost is not finite");

    std::set<std::string> charger_ids;
    for (const auto& c : s.chargers) {
        auto more = validate_charger(c);
        issues.insert(issues.end(), more.begin(), more.end());
        if (!charger_ids.insert(c.id).second) issues.push_back("duplicate charger id '" + c.id + "'");
    }
    std::set<std::string> ev_ids;
    for (const auto& ev : s.fleet) {
        auto more = validate_session(ev, T);
        issues.insert(issues.end(), more.begin(), more.end());
        if (!ev_ids.insert(ev.id).second) issues.push_back("duplicate EV id '" + ev.id + "'");
        if (!s.charger_index(ev.charger_id))
            issues.push_back(session_tag(ev) + "unknown charger '" + ev.charger_id + "'");
    }
    // Physical connections: at no step may a charger hold more plugged-in
    // vehicles than it has connectors.
    for (const auto& c : s.chargers) {
        for (int t = 0; t < T; ++t) {
            const auto plugged = std::count_if(s.fleet.begin(), s.fleet.end(), [&](const EvSession& ev) {
                return ev.charger_id == c.id && ev.present_at(t);
            });
            if (plugged > c.connection_count) {
                issues.push_back("charger '" + c.id + "' has " + std::to_string(plugged) +
                                 " vehicles plugged in at step " + std::to_string(t) + " but only " +
                                 std::to_string(c.connection_count) + " connections");
                break;
            }
        }
    }
    return issues;
}

void require_valid(const ScenarioSnapshot& snapshot) {
    auto issues = validate_snapshot(snapshot);
    if (!issues.empty()) throw InvalidScenario(std::move(issues));
}

double departure_target(const EvSession& ev) noexcept { return ev.arrival_soc_kwh + ev.demand_kwh; }

std::vector<AcceptanceVerdict> check_acceptance(const ScenarioSnapshot& s) {
    std::vector<AcceptanceVerdict> verdicts;
    verdicts.reserve(s.fleet.size());
    for (const auto& ev : s.fleet) verdicts.push_back({ev.id, true, AdmissionRule::none, {}});

    for (std::size_t v = 0; v < s.fleet.size(); ++v) {
        const auto& ev = s.fleet[v];
        if (ev.arrival_soc_kwh < ev.soc_min_kwh) {
            verdicts[v].accepted = false;
            verdicts[v].violated = AdmissionRule::arrival_soc;
            std::ostringstream os;
            os << "arrival SOC " << ev.arrival_soc_kwh << " kWh below minimum SOC " << ev.soc_min_kwh << " kWh";
            verdicts[v].reason = os.str();
        }
    }

    for (const auto& c : s.chargers) {
        const double capacity = std::min(c.dc_converter_count * c.ev_port_rated_kw, c.inverter_rated_kw);
        std::vector<std::size_t> members;
        for (std::size_t v = 0; v < s.fleet.size(); ++v) {
            if (s.fleet[v].charger_id == c.id && verdicts[v].accepted) members.push_back(v);
        }
        auto load_of = [&](std::size_t v) {
            const auto& ev = s.fleet[v];
            return ev.demand_kwh / (ev.dwell_steps() * s.step_hours);
        };
        while (!members.empty()) {
            double load = 0.0;
            for (auto v : members) load += load_of(v);
            if (load <= capacity * (1.0 + 1e-12)) break;
            auto worst = std::max_element(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                const double la = load_of(a), lb = load_of(b);
                if (la != lb) return la < lb;
                return s.fleet[a].id > s.fleet[b].id;
            });
            auto& verdict = verdicts[*worst];
            verdict.accepted = false;
            verdict.violated = AdmissionRule::charger_capacity;
            std::ostringstream os;
            os << "charger '" << c.id << "' average-rate load " << load << " kW exceeds capacity " << capacity
               << " kW";
            verdict.reason = os.str();
            members.erase(worst);
        }
    }
    return verdicts;
}

ScenarioSnapshot admitted_only(const ScenarioSnapshot& snapshot, const std::vector<AcceptanceVerdict>& verdicts) {
    if (verdicts.size() != snapshot.fleet.size())
        throw DimensionMismatch("verdict count does not match fleet size");
    ScenarioSnapshot out = snapshot;
    out.fleet.clear();
    for (std::size_t v = 0; v < snapshot.fleet.size(); ++v) {
        if (verdicts[v].accepted) out.fleet.push_back(snapshot.fleet[v]);
    }
    return out;
}

int to_step_grid(double hours, double step_hours, GridRounding rounding) {
    if (!(step_hours > 0.0)) throw InvalidScenario({"step length must be positive"});
    if (!(hours >= 0.0 && hours <= 24.0)) throw InvalidScenario({"time outside the day: " + std::to_string(hours)});
    const double steps = hours / step_hours;
    const double snapped = rounding == GridRounding::up ? std::ceil(steps - kGridSnap) : std::floor(steps + kGridSnap);
    return static_cast<int>(snapped);
}

StepWindow to_step_window(double arrival_hours, double departure_hours, double step_hours) {
    StepWindow w{to_step_grid(arrival_hours, step_hours, GridRounding::up),
                 to_step_grid(departure_hours, step_hours, GridRounding::down)};
    if (w.departure_step <= w.arrival_step) {
        std::ostringstream os;
        os << "visit " << arrival_hours << " h to " << departure_hours << " h leaves no whole step on a "
           << step_hours << " h grid";
        throw InvalidScenario({os.str()});
    }
    return w;
}

double parse_clock_hours(const std::string& raw) {
    std::string text = raw;
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    std::size_t start = 0;
    while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
    text = text.substr(start);
    // Date prefix "YYYY-MM-DD" followed by 'T' or ' '.
    if (text.size() > 10 && text[4] == '-' && text[7] == '-' && (text[10] == 'T' || text[10] == ' '))
        text = text.substr(11);
    // Strip a trailing zone designator; only one zone per file is supported.
    if (!text.empty() && text.back() == 'Z') text.pop_back();
    if (auto pos = text.find_first_of("+-", 1); pos != std::string::npos) text = text.substr(0, pos);

    int h = 0, m = 0;
    double sec = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    is >> h >> c1 >> m;
    if (!is || c1 != ':') throw std::invalid_argument("not a clock time: '" + raw + "'");
    if (is >> c2) {
        if (c2 != ':' || !(is >> sec)) throw std::invalid_argument("not a clock time: '" + raw + "'");
    }
    if (h < 0 || h > 24 || m < 0 || m > 59 || sec < 0.0 || sec >= 60.0 || (h == 24 && (m != 0 || sec != 0.0)))
        throw std::invalid_argument("clock time out of range: '" + raw + "'");
    return h + m / 60.0 + sec / 3600.0;
}

std::string to_string(AdmissionRule rule) {
    switch (rule) {
    case AdmissionRule::none: return "none";
    case AdmissionRule::charger_capacity: return "charger-capacity";
    case AdmissionRule::arrival_soc: return "arrival-soc";
    }
    return "unknown";
}

std::string to_string(ReserveMode mode) { return mode == ReserveMode::symmetric ? "symmetric" : "asymmetric"; }

std::string to_string(ReserveBoundConvention convention) {
    return convention == ReserveBoundConvention::swapped ? "swapped" : "printed";
}

InvalidScenario::InvalidScenario(std::vector<std::string> issues)
    : Error([&] {
          std::string msg = "invalid scenario";
          for (const auto& i : issues) msg += "\n  - " + i;
          return msg;
      }()),
      issues_(std::move(issues)) {}

ParseError::ParseError(std::string file, std::size_t line, const std::string& what)
    : Error(file + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what), file_(std::move(file)),
      line_(line) {}

} // namespace evpv
