// SPDX-License-Identifier: Apache-2.0
//
// The command implementations behind the `evpv` executable. Each command
// reads a scenario bundle, writes its files under `out_dir` and a short
// report to `out`, and returns the process exit code.
#pragma once

#include "evpv/ingest.hpp"
#include "evpv/milp/branch_and_bound.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace evpv::cli {

enum ExitCode : int { ok = 0, validation_failed = 1, io_error = 2, solver_limit = 3, infeasible = 4 };

struct RunConfig {
    std::string bundle;
    ingest::BundleOverrides overrides;
    milp::SolverConfig solver;
    std::string out_dir = "out";
    std::optional<std::string> overlay;
    int day = 0;
    int first_day = 0;
    std::optional<int> day_count;
    unsigned seed = 1;
    int instances = 100;
    bool warm_start = true;
};

int cmd_validate(const RunConfig& config, std::ostream& out);
int cmd_solve_day(const RunConfig& config, std::ostream& out);
int cmd_compare(const RunConfig& config, std::ostream& out);
int cmd_mpc(const RunConfig& config, std::ostream& out);
int cmd_sweep(const RunConfig& config, std::ostream& out);
int cmd_oracle_check(const RunConfig& config, std::ostream& out);

/// Runs `command` and maps library exceptions onto exit codes, printing the
/// message to `err`.
int guarded(const std::function<int()>& command, std::ostream& err);

/// One day of the baseline-versus-optimizer comparison.
struct DayComparison {
    int day = 0;
    double pv_sales = 0.0;
    double ev_cost_ar = 0.0, ev_cost_imm = 0.0, ev_cost_opt = 0.0;
    double net_ar = 0.0, net_imm = 0.0, net_opt = 0.0;
    std::optional<double> pct_imm, pct_opt;
    milp::SolveStatus status = milp::SolveStatus::optimal;
    double gap = 0.0;
    double seconds = 0.0;
};

DayComparison compare_day(const ingest::Bundle& bundle, int day, const milp::SolverConfig& solver);

/// Per-day rows as CSV.
void write_comparison_csv(std::ostream& out, const std::vector<DayComparison>& days);
/// Mean and SD of every quantity, laid out as quantity by policy.
void write_summary(std::ostream& out, const std::vector<DayComparison>& days, bool csv);

} // namespace evpv::cli
