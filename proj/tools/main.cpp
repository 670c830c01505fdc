// SPDX-License-Identifier: Apache-2.0
//
// evpv: validate scenario bundles, solve days, compare against baseline
// charging, run receding-horizon control, sweep days, cross-check the solver.
#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace evpv;

int main(int argc, char** argv) {
    CLI::App app{"Scheduling for a workplace EV car park with integrated PV chargers"};
    app.require_subcommand(1);
    cli::RunConfig cfg;

    std::optional<double> dt_minutes, sell_factor;
    bool no_v2g = false, no_reserves = false, no_curtailment = false, symmetric = false, verbose = false;
    bool no_warm_start = false;
    std::string reserve_bounds;
    double gap = cfg.solver.rel_gap_tol, time_limit = cfg.solver.time_limit_seconds;

    auto common = [&](CLI::App* sub, bool needs_bundle) {
        if (needs_bundle)
            sub->add_option("bundle", cfg.bundle, "scenario.json or a directory holding one")
                ->required()
                ->envname("EVPV_BUNDLE");
        sub->add_option("--dt-minutes", dt_minutes, "step length in minutes")->envname("EVPV_DT_MINUTES");
        sub->add_flag("--no-v2g", no_v2g, "disable discharging")->envname("EVPV_NO_V2G");
        sub->add_flag("--no-reserves", no_reserves, "disable reserve offers")->envname("EVPV_NO_RESERVES");
        sub->add_flag("--no-curtailment", no_curtailment, "take all available PV")->envname("EVPV_NO_CURTAILMENT");
        sub->add_flag("--symmetric-reserves", symmetric, "tie up and down reserve offers")
            ->envname("EVPV_SYMMETRIC_RESERVES");
        sub->add_option("--reserve-bounds", reserve_bounds, "pairing of EV limits in the reserve rows")
            ->check(CLI::IsMember({"printed", "swapped"}))
            ->envname("EVPV_RESERVE_BOUNDS");
        sub->add_option("--gap", gap, "relative MILP gap")->envname("EVPV_GAP");
        sub->add_option("--time-limit", time_limit, "seconds per MILP solve")->envname("EVPV_TIME_LIMIT");
        sub->add_option("--sell-factor", sell_factor, "sell price as a fraction of buy when absent")
            ->envname("EVPV_SELL_FACTOR");
        sub->add_option("--seed", cfg.seed, "random seed")->envname("EVPV_SEED");
        sub->add_option("--out", cfg.out_dir, "output directory")->envname("EVPV_OUT");
        sub->add_flag("-v,--verbose", verbose, "solver progress on stderr");
    };

    auto* validate = app.add_subcommand("validate", "load a bundle and run the admission check");
    common(validate, true);
    validate->add_option("--day", cfg.day, "day index within the bundle");

    auto* solve = app.add_subcommand("solve-day", "single-shot schedule for one day");
    common(solve, true);
    solve->add_option("--day", cfg.day, "day index within the bundle");

    auto* compare = app.add_subcommand("compare", "average-rate, immediate and optimized costs for one day");
    common(compare, true);
    compare->add_option("--day", cfg.day, "day index within the bundle");

    auto* mpc = app.add_subcommand("mpc", "receding-horizon control over one day");
    common(mpc, true);
    mpc->add_option("--day", cfg.day, "day index within the bundle");
    mpc->add_option("--overlay", cfg.overlay, "realization overlay CSV");
    mpc->add_flag("--no-warm-start", no_warm_start, "solve every step from scratch");

    auto* sweep = app.add_subcommand("sweep", "comparison over a range of days");
    common(sweep, true);
    sweep->add_option("--first-day", cfg.first_day, "first day index");
    sweep->add_option("--days", cfg.day_count, "number of days (default: to the end)");

    auto* oracle = app.add_subcommand("oracle-check", "solver against exhaustive enumeration on random instances");
    common(oracle, false);
    oracle->add_option("--instances", cfg.instances, "number of instances")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? cli::ok : cli::validation_failed;
    }

    cfg.overrides.step_minutes = dt_minutes;
    cfg.overrides.sell_factor = sell_factor;
    if (no_v2g) cfg.overrides.v2g = false;
    if (no_reserves) cfg.overrides.reserves = false;
    if (no_curtailment) cfg.overrides.curtailment = false;
    if (symmetric) cfg.overrides.reserve_mode = ReserveMode::symmetric;
    if (!reserve_bounds.empty())
        cfg.overrides.reserve_bounds =
            reserve_bounds == "swapped" ? ReserveBoundConvention::swapped : ReserveBoundConvention::as_printed;
    cfg.solver.rel_gap_tol = gap;
    cfg.solver.time_limit_seconds = time_limit;
    cfg.solver.log = verbose;
    cfg.warm_start = !no_warm_start;

    return cli::guarded(
        [&] {
            if (*validate) return cli::cmd_validate(cfg, std::cout);
            if (*solve) return cli::cmd_solve_day(cfg, std::cout);
            if (*compare) return cli::cmd_compare(cfg, std::cout);
            if (*mpc) return cli::cmd_mpc(cfg, std::cout);
            if (*sweep) return cli::cmd_sweep(cfg, std::cout);
            return cli::cmd_oracle_check(cfg, std::cout);
        },
        std::cerr);
}
