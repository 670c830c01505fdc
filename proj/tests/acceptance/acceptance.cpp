// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run over the bundled synthetic data. Prints one PASS/FAIL line
// per criterion and exits non-zero if any criterion fails.
#include "commands.hpp"

#include "evpv/baseline.hpp"
#include "evpv/csv.hpp"
#include "evpv/ems/cost.hpp"
#include "evpv/ems/formulation.hpp"
#include "evpv/ingest.hpp"
#include "evpv/milp/audit.hpp"
#include "evpv/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace evpv;
namespace fs = std::filesystem;

namespace {

// Tolerances, pinned.
constexpr double kOracleRel = 1e-6;
constexpr double kAuditTol = 1e-6;
constexpr double kDominanceSlack = 1e-6;
constexpr double kPaperGap = 1.5e-4;
constexpr double kGapSeconds = 600.0;
constexpr double kBalanceTol = 1e-6;
constexpr double kResampleRel = 1e-9;
constexpr double kScalingRel = 1e-12;
constexpr double kBaselineSeconds = 1.0;
constexpr double kOracleSeconds = 60.0;

const std::string kData = EVPV_DATA_DIR "/synthetic";

constexpr double kBundledPvKwp = 5.0; // rated size of the array in the PV files

long audited = 0;
std::vector<std::string> audit_failures;
double single_shot_balance = 0.0;

struct Verdict {
    bool pass = false;
    std::string detail = "not run";
};
std::map<int, Verdict> verdicts;

void report(int n, bool pass, const std::string& detail) { verdicts[n] = {pass, detail}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// Solves and audits the incumbent for criterion 4.
milp::MilpSolution solve_audited(const ems::EmsModel& model, const milp::SolverConfig& cfg, const std::string& what) {
    auto sol = milp::solve_milp(model.model, cfg);
    if (sol.has_incumbent()) {
        ++audited;
        if (!milp::audit(model.model, sol.values, kAuditTol).clean()) audit_failures.push_back(what);
    }
    return sol;
}

double worst_balance(const ems::Schedule& sc, const ScenarioSnapshot& s) {
    double worst = 0.0;
    for (int t = 0; t < s.horizon_steps; ++t) {
        const auto i = static_cast<std::size_t>(t);
        for (std::size_t c = 0; c < s.chargers.size(); ++c) {
            const double eta = s.chargers[c].eff_conv;
            double in = sc.pv[i][c] + sc.draw[i][c], out = sc.feed[i][c];
            for (std::size_t v = 0; v < s.fleet.size(); ++v) {
                if (s.fleet[v].charger_id != s.chargers[c].id) continue;
                in += sc.discharge[i][v];
                out += sc.charge[i][v];
            }
            worst = std::max(worst, std::abs(in * eta - out / eta));
        }
    }
    return worst;
}

ScenarioSnapshot day_of(const std::string& bundle, const ingest::BundleOverrides& ov = {}) {
    const auto b = ingest::load_bundle(kData + "/" + bundle, ov);
    const auto s = b.snapshot(0);
    return admitted_only(s, check_acceptance(s));
}

ingest::BundleOverrides reserve_free() {
    ingest::BundleOverrides ov;
    ov.v2g = false;
    ov.reserves = false;
    return ov;
}

void baseline_criteria() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = day_of("desk_day");
    const auto imm = baseline::immediate(s);
    const auto ar = baseline::average_rate(s);
    const double elapsed = seconds_since(t0);

    // 09:30 is step 38, 10:30 step 42; 16:30 (first departures) step 66.
    bool overlap_imm = true, overlap_ar = true;
    for (int t = 38; t < 42; ++t) overlap_imm = overlap_imm && imm.park_kw(t) == 60.0;
    for (int t = 38; t < 66; ++t) overlap_ar = overlap_ar && ar.park_kw(t) == 20.0;
    report(1, imm.peak_kw() == 60.0 && overlap_imm && overlap_ar && elapsed < kBaselineSeconds,
           "IMM peak " + num(imm.peak_kw()) + " kW (60 throughout 09:30-10:30: " + (overlap_imm ? "yes" : "no") +
               "), AR overlap total 20 kW: " + (overlap_ar ? "yes" : "no") + ", " + num(elapsed) + " s");

    const double expected[6] = {5, 3.75, 1.25, 5, 3.75, 1.25};
    bool exact = s.fleet.size() == 6;
    std::string rates;
    for (std::size_t v = 0; exact && v < 6; ++v) {
        const auto& ev = s.fleet[v];
        for (int t = 0; t < s.horizon_steps; ++t)
            exact = exact && ar.charge_kw[static_cast<std::size_t>(t)][v] == (ev.present_at(t) ? expected[v] : 0.0);
        rates += (v ? ", " : "") + num(ar.charge_kw[static_cast<std::size_t>(ev.arrival_step)][v]);
    }
    report(2, exact, "AR powers {" + rates + "} kW");
}

void oracle_criterion() {
    cli::RunConfig cfg;
    cfg.out_dir = (fs::temp_directory_path() / "evpv_acceptance_oracle").string();
    cfg.instances = 100;
    cfg.seed = 1;
    std::ostringstream log;
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli::guarded([&] { return cli::cmd_oracle_check(cfg, log); }, log);
    const double elapsed = seconds_since(t0);

    const auto table = csv::read_file(cfg.out_dir + "/oracle_check.csv");
    const auto c_bin = table.require_column("free_binaries");
    const auto c_m = table.require_column("milp_objective");
    const auto c_o = table.require_column("oracle_objective");
    const auto c_a = table.require_column("audit_violations");
    bool agree = table.rows.size() == 100;
    int max_bin = 0;
    for (const auto& row : table.rows) {
        max_bin = std::max(max_bin, csv::to_int(table, row, c_bin));
        const double m = csv::to_double(table, row, c_m), o = csv::to_double(table, row, c_o);
        const bool both_empty = std::isinf(m) && std::isinf(o);
        agree = agree && (both_empty || std::abs(m - o) <= kOracleRel * std::abs(o) + 1e-12);
        audited += 1;
        if (csv::to_int(table, row, c_a) != 0) audit_failures.push_back("oracle instance line " + std::to_string(row.line));
    }
    report(3, code == 0 && agree && max_bin <= 16 && elapsed < kOracleSeconds,
           std::to_string(table.rows.size()) + " instances, at most " + std::to_string(max_bin) +
               " free binaries, all agree: " + (agree ? "yes" : "no") + ", " + num(elapsed) + " s");
}

void dominance_criterion() {
    int compared = 0;
    bool ok = true;
    std::string detail;
    for (const auto& [bundle, ov] : {std::pair{std::string("desk_day"), reserve_free()},
                                     std::pair{std::string("dominance_day"), reserve_free()}}) {
        const auto s = day_of(bundle, ov);
        const auto model = ems::build(s);
        const auto sol = solve_audited(model, {}, bundle + " reserve-free");
        detail += bundle + ": OPT " + num(sol.objective);
        for (const auto& p : {baseline::average_rate(s), baseline::immediate(s)}) {
            const auto e = baseline::embed(p, model, s, kAuditTol);
            const auto printed = baseline::baseline_cost(p, s);
            detail += ", " + baseline::to_string(p.policy) + " ";
            if (!e.feasible()) {
                detail += "outside the MILP set (" + std::to_string(e.audit.violations.size()) + " violations)";
                continue;
            }
            ++compared;
            ok = ok && sol.has_incumbent() && sol.objective <= e.objective + kDominanceSlack;
            detail += num(e.objective) + " [net as printed " + num(printed.net_usd) + "]";
        }
        detail += "; ";
    }
    report(5, ok && compared > 0, detail + std::to_string(compared) + " feasible baseline(s) compared");
}

void gap_criterion() {
    const auto s = day_of("desk_day");
    const auto model = ems::build(s);
    milp::SolverConfig cfg;
    cfg.rel_gap_tol = kPaperGap;
    cfg.time_limit_seconds = kGapSeconds;
    const auto sol = solve_audited(model, cfg, "desk_day full");
    const bool ok = sol.has_incumbent() && sol.gap <= kPaperGap && sol.seconds <= kGapSeconds;
    report(6, ok,
           "V=" + std::to_string(s.fleet.size()) + " C=" + std::to_string(s.chargers.size()) + " T=" +
               std::to_string(s.horizon_steps) + ", " + std::to_string(model.catalog.binary_count()) +
               " binaries pre-fixing, status " + milp::to_string(sol.status) + ", gap " + num(sol.gap) + " in " +
               num(sol.seconds) + " s");

    // Criterion 9 reuses this incumbent's reserve quantities.
    const auto sc = ems::extract_schedule(sol, model, s);
    auto s0 = s;
    s0.pv.uncertainty = 0.0;
    auto s1 = s;
    s1.pv.uncertainty = 0.1;
    const double inc0 = ems::cost_breakdown(sc, s0).reserve_income_usd;
    const double inc1 = ems::cost_breakdown(sc, s1).reserve_income_usd;
    // Second route: objective coefficients of two models on the same vector.
    const auto x = ems::to_values(sc, model);
    const double obj0 = ems::build(s0).model.evaluate_objective(x);
    const double obj1 = ems::build(s1).model.evaluate_objective(x);
    const bool ratio_ok = inc0 > 0.0 && std::abs(inc1 - 0.9 * inc0) <= kScalingRel * inc0;
    const bool objective_ok = std::abs((obj1 - obj0) - 0.1 * inc0) <= 1e-9 * std::max(1.0, std::abs(obj0));
    report(9, ratio_ok && objective_ok,
           "reserve income " + num(inc0) + " $ at y=0, " + num(inc1) + " $ at y=0.1 (ratio " + num(inc1 / inc0) +
               "), objective shift " + num(obj1 - obj0) + " $");

    single_shot_balance = worst_balance(sc, s);
}

struct MpcCheck {
    mpc::MpcTrace trace;
    double single = 0.0, diff = 0.0, tol = 0.0;
    bool recursion = true;
    int fallbacks = 0;
};

// Zero-disturbance run against a single-shot solve at the same settings.
MpcCheck mpc_check(const ScenarioSnapshot& s, const milp::SolverConfig& cfg, const std::string& label) {
    MpcCheck out;
    const auto model = ems::build(s);
    const auto sol = solve_audited(model, cfg, label + " single shot");
    out.single = ems::cost_breakdown(ems::extract_schedule(sol, model, s), s).total_usd;

    mpc::MpcOptions opt;
    opt.solver = cfg;
    out.trace = mpc::run_day(mpc::DayTimeline(s), opt);
    out.tol = 2.0 * cfg.rel_gap_tol * s.horizon_steps * std::abs(out.single);
    out.diff = std::abs(out.trace.cost.total_usd - out.single);
    const auto& a = out.trace.applied;
    for (std::size_t v = 0; v < s.fleet.size(); ++v) {
        const auto& ev = s.fleet[v];
        for (int t = ev.arrival_step; t < ev.departure_step; ++t) {
            const auto i = static_cast<std::size_t>(t);
            out.recursion = out.recursion && a.soc[i + 1][v] == a.soc[i][v] + s.step_hours * (a.charge[i][v] * ev.eff_charge -
                                                                                              a.discharge[i][v] / ev.eff_discharge);
        }
    }
    for (const auto& st : out.trace.steps) out.fallbacks += st.fallback ? 1 : 0;
    return out;
}

void mpc_and_conservation_criteria() {
    milp::SolverConfig cfg;
    const auto full = mpc_check(day_of("desk_day"), cfg, "desk_day");
    const auto s = day_of("desk_day", reserve_free());
    const auto lean = mpc_check(s, cfg, "desk_day reserve-free");
    bool ok = true;
    std::string detail;
    for (const auto& [name, c] : {std::pair{"full", &full}, std::pair{"reserve-free", &lean}}) {
        ok = ok && c->diff <= c->tol && c->recursion && c->fallbacks == 0;
        detail += std::string(detail.empty() ? "" : "; ") + name + ": MPC " + num(c->trace.cost.total_usd) +
                  " $ vs single shot " + num(c->single) + " $ (|diff| " + num(c->diff) + ", allowed " + num(c->tol) +
                  "), SOC recursion exact: " + (c->recursion ? "yes" : "no") + ", fallbacks " +
                  std::to_string(c->fallbacks);
    }
    report(7, ok, detail);
    const auto& trace = lean.trace;
    mpc::MpcOptions opt;
    opt.solver = cfg;

    // Conservation: balance on the single-shot and both MPC traces, and PV
    // resampling checked against an independent read of the minute file.
    double worst = std::max({single_shot_balance, worst_balance(trace.applied, trace.realized),
                              worst_balance(full.trace.applied, full.trace.realized)});
    const auto disturbed = mpc::run_day(mpc::load_overlay(kData + "/desk_day/disturbed_overlay.csv", s), opt);
    worst = std::max(worst, worst_balance(disturbed.applied, disturbed.realized));

    std::ifstream pv(kData + "/desk_day/pv.csv");
    std::string line;
    std::getline(pv, line);
    double minute_kwh = 0.0;
    while (std::getline(pv, line)) minute_kwh += std::stod(line.substr(line.find(',') + 1)) / 60.0;
    const auto bundle = ingest::load_bundle(kData + "/desk_day");
    double bucket_kwh = 0.0;
    for (double x : bundle.pv_normalized) bucket_kwh += x * kBundledPvKwp * bundle.base.step_hours;
    const double rel = std::abs(bucket_kwh - minute_kwh) / minute_kwh;
    report(8, worst <= kBalanceTol && rel <= kResampleRel,
           "worst DC-link residual " + num(worst) + " kW, PV resampling " + num(minute_kwh) + " kWh vs " +
               num(bucket_kwh) + " kWh (rel " + num(rel) + ")");
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void sweep_criterion() {
    cli::RunConfig cfg;
    cfg.bundle = kData + "/two_days";
    std::ostringstream log;
    std::string first_csv;
    bool identical = true;
    int code = 0;
    for (int run = 0; run < 2; ++run) {
        cfg.out_dir = (fs::temp_directory_path() / ("evpv_acceptance_sweep" + std::to_string(run))).string();
        code = std::max(code, cli::guarded([&] { return cli::cmd_sweep(cfg, log); }, log));
        const auto text = slurp(cfg.out_dir + "/comparison.csv") + slurp(cfg.out_dir + "/summary.csv");
        if (run == 0) first_csv = text;
        else identical = text == first_csv;
    }
    const auto rows = csv::read_file(cfg.out_dir + "/comparison.csv").rows.size();
    const auto summary = csv::read_file(cfg.out_dir + "/summary.csv");
    // Filled cells of the mean/SD table: PV sales are common to both
    // baselines, reductions are relative to AR.
    const std::set<std::pair<std::string, std::string>> cells = {
        {"S_PV", "AR"},  {"S_PV", "IMM"},  {"C_ev", "AR"},  {"C_ev", "IMM"},  {"C_ev", "OPT"},
        {"C_net", "AR"}, {"C_net", "IMM"}, {"C_net", "OPT"}, {"C_pct", "IMM"}, {"C_pct", "OPT"}};
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : summary.rows) seen.emplace(r.cells.at(0), r.cells.at(1));
    const bool layout = summary.rows.size() == cells.size() && seen == cells;
    report(10, code == 0 && rows == 2 && layout && identical,
           "substitute: full-year statistics need the real market and PV datasets; two-day sweep gives " +
               std::to_string(rows) + " rows and a mean/SD summary, reruns byte-identical: " +
               (identical ? "yes" : "no"));
}

} // namespace

int main() {
    // Criterion 8 reads the single-shot balance, so 6 runs before 7 and 8.
    try {
        baseline_criteria();
        oracle_criterion();
        dominance_criterion();
        gap_criterion();
        mpc_and_conservation_criteria();
        sweep_criterion();
        report(4, audit_failures.empty(),
               std::to_string(audited) + " incumbents audited at " + num(kAuditTol) +
                   (audit_failures.empty() ? ", no violations" : ", failing: " + audit_failures.front()));
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
    }
    int failures = 0;
    for (int n = 1; n <= 10; ++n) {
        const auto& v = verdicts[n];
        std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << '\n';
        failures += v.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
