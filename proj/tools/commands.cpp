// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include "evpv/baseline.hpp"
#include "evpv/csv.hpp"
#include "evpv/errors.hpp"
#include "evpv/milp/audit.hpp"
#include "evpv/milp/oracle.hpp"
#include "evpv/mpc.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace evpv::cli {

namespace fs = std::filesystem;
using csv::format_number;

namespace {

std::ofstream open_output(const RunConfig& config, const std::string& name) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    const auto path = fs::path(config.out_dir) / name;
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    return f;
}

ingest::Bundle load(const RunConfig& config, std::ostream& out) {
    auto b = ingest::load_bundle(config.bundle, config.overrides);
    for (const auto& w : b.warnings) out << "warning: " << w << '\n';
    return b;
}

void require_day(const ingest::Bundle& b, int day) {
    if (day < 0 || day >= b.days)
        throw Error("day " + std::to_string(day) + " outside the bundle (" + std::to_string(b.days) + " days)");
}

// The day with rejected vehicles removed; rejections are reported.
ScenarioSnapshot admitted_day(const ingest::Bundle& b, int day, std::ostream* out) {
    require_day(b, day);
    const auto s = b.snapshot(day);
    const auto verdicts = check_acceptance(s);
    if (out)
        for (const auto& v : verdicts)
            if (!v.accepted) *out << "vehicle " << v.ev_id << " rejected: " << v.reason << '\n';
    return admitted_only(s, verdicts);
}

int exit_for(milp::SolveStatus status) {
    switch (status) {
    case milp::SolveStatus::optimal:
    case milp::SolveStatus::gap_limit: return ok;
    case milp::SolveStatus::time_limit:
    case milp::SolveStatus::node_limit: return solver_limit;
    case milp::SolveStatus::infeasible:
    case milp::SolveStatus::unbounded: return infeasible;
    }
    return infeasible;
}

// Port-side charging cost under the baseline accounting, for the optimizer.
double ev_cost(const ems::Schedule& sc, const ScenarioSnapshot& s) {
    double c = 0.0;
    for (int t = 0; t < s.horizon_steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        for (std::size_t v = 0; v < s.fleet.size(); ++v) {
            const double eta = s.charger_of(s.fleet[v]).eff_conv;
            c += s.step_hours * eta * eta * sc.charge[i][v] * s.market.buy_price[i];
        }
    }
    return c;
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string("nan"); }

struct Stat {
    double mean = std::nan("");
    double sd = std::nan("");
    std::size_t n = 0;
};

// Sample standard deviation; undefined below two samples.
Stat stats(const std::vector<double>& xs) {
    Stat s;
    s.n = xs.size();
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(sq / static_cast<double>(xs.size() - 1));
    }
    return s;
}

// Same generator family as the unit-test fixtures: T <= 4, V <= 2, C = 1.
ScenarioSnapshot random_tiny(std::mt19937& rng) {
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ScenarioSnapshot s;
    s.step_hours = 0.25 + 0.25 * coin(rng);
    s.horizon_steps = 3 + coin(rng);
    const int T = s.horizon_steps;
    ChargerSpec c;
    c.id = "c";
    c.pv_rated_kw = 4.0 * u(rng);
    c.inverter_rated_kw = 6.0 + 6.0 * u(rng);
    c.ev_port_rated_kw = 5.0 + 5.0 * u(rng);
    c.eff_conv = 0.9 + 0.1 * u(rng);
    c.pv_scale = 0.5 + u(rng);
    c.dc_converter_count = 1;
    c.connection_count = 2;
    s.chargers = {c};
    const int V = 1 + coin(rng);
    for (int v = 0; v < V; ++v) {
        EvSession ev;
        ev.id = "v" + std::to_string(v);
        ev.charger_id = "c";
        ev.arrival_step = std::uniform_int_distribution<int>(0, T - 2)(rng);
        ev.departure_step = std::uniform_int_distribution<int>(ev.arrival_step + 1, T - 1)(rng);
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

void write_solver_csv(std::ostream& f, const milp::MilpSolution& sol) {
    f << "key,value\n"
      << "status," << milp::to_string(sol.status) << '\n'
      << "objective," << format_number(sol.objective) << '\n'
      << "bound," << format_number(sol.bound) << '\n'
      << "gap," << format_number(sol.gap) << '\n'
      << "nodes," << sol.nodes << '\n'
      << "lp_iterations," << sol.lp_iterations << '\n';
}

int run_comparison(const RunConfig& config, std::ostream& out, int first, int count) {
    const auto b = load(config, out);
    if (count <= 0) throw Error("no days selected");
    require_day(b, first);
    require_day(b, first + count - 1);
    std::vector<DayComparison> rows;
    int code = ok;
    for (int d = first; d < first + count; ++d) {
        rows.push_back(compare_day(b, d, config.solver));
        const auto& r = rows.back();
        out << "day " << d << ": AR " << format_number(r.net_ar) << "  IMM " << format_number(r.net_imm) << "  OPT "
            << format_number(r.net_opt) << " (" << milp::to_string(r.status) << ", " << std::setprecision(3)
            << r.seconds << " s)" << std::setprecision(6) << '\n';
        code = std::max(code, exit_for(r.status));
    }
    auto f = open_output(config, "comparison.csv");
    write_comparison_csv(f, rows);
    auto g = open_output(config, "summary.csv");
    write_summary(g, rows, true);
    write_summary(out, rows, false);
    return code;
}

} // namespace

int guarded(const std::function<int()>& command, std::ostream& err) {
    try {
        return command();
    } catch (const InvalidScenario& e) {
        err << "invalid scenario:\n";
        for (const auto& issue : e.issues()) err << "  " << issue << '\n';
        return validation_failed;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return io_error;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return io_error;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return validation_failed;
    }
}

int cmd_validate(const RunConfig& config, std::ostream& out) {
    const auto b = load(config, out);
    require_day(b, config.day);
    const auto s = b.snapshot(config.day);
    require_valid(s);
    const auto verdicts = check_acceptance(s);
    std::size_t accepted = 0;
    for (const auto& v : verdicts) {
        out << "vehicle " << v.ev_id << ": ";
        if (v.accepted) {
            ++accepted;
            out << "accepted\n";
        } else {
            out << "rejected [" << to_string(v.violated) << "] " << v.reason << '\n';
        }
    }
    out << accepted << " of " << verdicts.size() << " vehicles accepted on day " << config.day << " of " << b.days
        << '\n';
    return accepted == verdicts.size() ? ok : validation_failed;
}

int cmd_solve_day(const RunConfig& config, std::ostream& out) {
    const auto b = load(config, out);
    const auto s = admitted_day(b, config.day, &out);
    const auto model = ems::build(s);
    const auto sol = milp::solve_milp(model.model, config.solver);
    auto f = open_output(config, "solver.csv");
    write_solver_csv(f, sol);
    out << "status " << milp::to_string(sol.status) << ", nodes " << sol.nodes << ", gap " << format_number(sol.gap)
        << ", " << std::setprecision(3) << sol.seconds << " s" << std::setprecision(6) << '\n';
    if (sol.has_incumbent()) {
        const auto sc = ems::extract_schedule(sol, model, s);
        auto g = open_output(config, "schedule.csv");
        ems::write_schedule_csv(g, sc);
        const auto cost = ems::cost_breakdown(sc, s);
        auto h = open_output(config, "cost.csv");
        ems::write_cost_report(h, cost);
        out << "total cost " << format_number(cost.total_usd) << " $\n";
    }
    return exit_for(sol.status);
}

int cmd_compare(const RunConfig& config, std::ostream& out) { return run_comparison(config, out, config.day, 1); }

int cmd_sweep(const RunConfig& config, std::ostream& out) {
    const auto b = ingest::load_bundle(config.bundle, config.overrides);
    const int count = config.day_count.value_or(b.days - config.first_day);
    return run_comparison(config, out, config.first_day, count);
}

int cmd_mpc(const RunConfig& config, std::ostream& out) {
    const auto b = load(config, out);
    const auto s = admitted_day(b, config.day, &out);
    const auto overlay = config.overlay ? config.overlay : b.overlay_path;
    const mpc::DayTimeline timeline = overlay ? mpc::load_overlay(*overlay, s) : mpc::DayTimeline(s);
    mpc::MpcOptions options;
    options.solver = config.solver;
    options.warm_start = config.warm_start;
    const auto trace = mpc::run_day(timeline, options);

    auto f = open_output(config, "trace.csv");
    mpc::write_trace_csv(f, trace);
    auto g = open_output(config, "schedule.csv");
    ems::write_schedule_csv(g, trace.applied);
    auto h = open_output(config, "cost.csv");
    ems::write_cost_report(h, trace.cost);
    auto e = open_output(config, "events.txt");
    int fallbacks = 0;
    double seconds = 0.0;
    for (const auto& step : trace.steps) {
        fallbacks += step.fallback ? 1 : 0;
        seconds += step.seconds;
        for (const auto& ev : step.events) e << ev << '\n';
    }
    out << trace.steps.size() << " steps, " << fallbacks << " fallback, " << std::setprecision(3) << seconds
        << " s solving" << std::setprecision(6) << '\n'
        << "total cost " << format_number(trace.cost.total_usd) << " $\n";
    return ok;
}

int cmd_oracle_check(const RunConfig& config, std::ostream& out) {
    std::mt19937 rng(config.seed);
    milp::SolverConfig cfg = config.solver;
    cfg.rel_gap_tol = 1e-9;
    auto f = open_output(config, "oracle_check.csv");
    f << "instance,free_binaries,milp_status,milp_objective,oracle_objective,rel_diff,audit_violations,result\n";
    int failures = 0;
    for (int i = 0; i < config.instances; ++i) {
        const auto s = random_tiny(rng);
        const auto model = ems::build(s);
        int free_binaries = 0;
        for (const auto& var : model.model.variables())
            if (var.kind == milp::VarKind::binary && var.lower < var.upper) ++free_binaries;
        const auto sol = milp::solve_milp(model.model, cfg);
        const auto ref = milp::enumerate_oracle(model.model, 20);
        bool pass = sol.has_incumbent() == ref.has_incumbent();
        double diff = 0.0;
        std::size_t violations = 0;
        if (pass && sol.has_incumbent()) {
            diff = std::abs(sol.objective - ref.objective) / std::max(std::abs(ref.objective), 1e-12);
            pass = std::abs(sol.objective - ref.objective) <= 1e-6 * std::abs(ref.objective) + 1e-12;
            violations = milp::audit(model.model, sol.values, 1e-6).violations.size();
            pass = pass && violations == 0;
        }
        if (!pass) {
            ++failures;
            out << "instance " << i << ": FAIL (milp " << format_number(sol.objective) << ", oracle "
                << format_number(ref.objective) << ", " << violations << " violations)\n";
        }
        f << i << ',' << free_binaries << ',' << milp::to_string(sol.status) << ',' << format_number(sol.objective)
          << ',' << format_number(ref.objective) << ',' << format_number(diff) << ',' << violations << ','
          << (pass ? "pass" : "fail") << '\n';
    }
    out << config.instances - failures << " of " << config.instances << " instances agree with the oracle\n";
    return failures == 0 ? ok : validation_failed;
}

DayComparison compare_day(const ingest::Bundle& bundle, int day, const milp::SolverConfig& solver) {
    const auto s = admitted_day(bundle, day, nullptr);
    DayComparison r;
    r.day = day;
    const auto ar = baseline::baseline_cost(baseline::average_rate(s), s);
    const auto imm = baseline::baseline_cost(baseline::immediate(s), s);
    r.pv_sales = ar.pv_sales_usd;
    r.ev_cost_ar = ar.ev_cost_usd;
    r.ev_cost_imm = imm.ev_cost_usd;
    r.net_ar = ar.net_usd;
    r.net_imm = imm.net_usd;

    const auto model = ems::build(s);
    const auto sol = milp::solve_milp(model.model, solver);
    r.status = sol.status;
    r.gap = sol.gap;
    r.seconds = sol.seconds;
    if (sol.has_incumbent()) {
        const auto sc = ems::extract_schedule(sol, model, s);
        r.ev_cost_opt = ev_cost(sc, s);
        r.net_opt = ems::cost_breakdown(sc, s).total_usd;
    } else {
        r.ev_cost_opt = r.net_opt = std::nan("");
    }
    r.pct_imm = baseline::percent_reduction(r.net_ar, r.net_imm);
    r.pct_opt = baseline::percent_reduction(r.net_ar, r.net_opt);
    return r;
}

void write_comparison_csv(std::ostream& out, const std::vector<DayComparison>& days) {
    out << "day,pv_sales_usd,ev_cost_ar_usd,ev_cost_imm_usd,ev_cost_opt_usd,net_ar_usd,net_imm_usd,net_opt_usd,"
           "reduction_imm_pct,reduction_opt_pct,opt_status,opt_gap\n";
    for (const auto& r : days)
        out << r.day << ',' << format_number(r.pv_sales) << ',' << format_number(r.ev_cost_ar) << ','
            << format_number(r.ev_cost_imm) << ',' << format_number(r.ev_cost_opt) << ',' << format_number(r.net_ar)
            << ',' << format_number(r.net_imm) << ',' << format_number(r.net_opt) << ',' << opt_number(r.pct_imm)
            << ',' << opt_number(r.pct_opt) << ',' << milp::to_string(r.status) << ',' << format_number(r.gap)
            << '\n';
}

void write_summary(std::ostream& out, const std::vector<DayComparison>& days, bool csv) {
    using Getter = std::optional<double> (*)(const DayComparison&);
    struct Cell {
        const char* policy;
        Getter get;
    };
    struct Line {
        const char* quantity;
        std::vector<Cell> cells;
    };
    const std::vector<Line> lines = {
        {"S_PV", {{"AR", [](const DayComparison& r) { return std::optional(r.pv_sales); }},
                  {"IMM", [](const DayComparison& r) { return std::optional(r.pv_sales); }},
                  {"OPT", nullptr}}},
        {"C_ev", {{"AR", [](const DayComparison& r) { return std::optional(r.ev_cost_ar); }},
                  {"IMM", [](const DayComparison& r) { return std::optional(r.ev_cost_imm); }},
                  {"OPT", [](const DayComparison& r) { return std::optional(r.ev_cost_opt); }}}},
        {"C_net", {{"AR", [](const DayComparison& r) { return std::optional(r.net_ar); }},
                   {"IMM", [](const DayComparison& r) { return std::optional(r.net_imm); }},
                   {"OPT", [](const DayComparison& r) { return std::optional(r.net_opt); }}}},
        {"C_pct", {{"AR", nullptr},
                   {"IMM", [](const DayComparison& r) { return r.pct_imm; }},
                   {"OPT", [](const DayComparison& r) { return r.pct_opt; }}}},
    };
    auto stat_of = [&](Getter get) {
        std::vector<double> xs;
        for (const auto& r : days)
            if (auto v = get(r); v && std::isfinite(*v)) xs.push_back(*v);
        return stats(xs);
    };
    if (csv) {
        out << "quantity,policy,mean,sd,days\n";
        for (const auto& line : lines)
            for (const auto& cell : line.cells) {
                if (!cell.get) continue;
                const auto st = stat_of(cell.get);
                out << line.quantity << ',' << cell.policy << ',' << format_number(st.mean) << ','
                    << format_number(st.sd) << ',' << st.n << '\n';
            }
        return;
    }
    auto pair = [](const Stat& st) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(2) << st.mean << ", ";
        if (std::isnan(st.sd)) os << "-";
        else os << st.sd;
        return os.str();
    };
    out << "\n[Mean, SD] over " << days.size() << " day(s), $ and %\n";
    out << std::left << std::setw(8) << "" << std::setw(18) << "AR" << std::setw(18) << "IMM" << "OPT\n";
    for (const auto& line : lines) {
        out << std::setw(8) << line.quantity;
        for (std::size_t k = 0; k < line.cells.size(); ++k) {
            const std::string text = line.cells[k].get ? pair(stat_of(line.cells[k].get)) : "-";
            if (k + 1 < line.cells.size()) out << std::setw(18) << text;
            else out << text;
        }
        out << '\n';
    }
    out << std::right;
}

} // namespace evpv::cli
