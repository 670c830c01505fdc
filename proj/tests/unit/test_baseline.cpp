// SPDX-License-Identifier: Apache-2.0
#include "evpv/baseline.hpp"
#include "evpv/errors.hpp"
#include "evpv/milp/branch_and_bound.hpp"

#include "scenarios.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace evpv;
using namespace evpv::baseline;
using evpv::testing::make_charger;
using evpv::testing::make_ev;
using evpv::testing::table_one;

namespace {

// One charger, one vehicle present for step 0 only; prices at 3.9 c/kWh.
ScenarioSnapshot single_step(double pv_kwp, double pv_norm) {
    ScenarioSnapshot s;
    s.horizon_steps = 2;
    s.step_hours = 0.25;
    s.chargers = {make_charger("c", pv_kwp)};
    s.fleet = {make_ev("ev", 0, 1, 2.5, 10, 40, "c")};
    s.market.buy_price = {0.039, 0.039};
    s.market.sell_price = {0.98 * 0.039, 0.98 * 0.039};
    s.market.regup_price = {0, 0};
    s.market.regdn_price = {0, 0};
    s.pv.normalized_kw_per_kwp = {pv_norm, 0.0};
    s.limits = SiteLimits::flat(2, 40, 40);
    return s;
}

} // namespace

TEST_CASE("average rate on the desk-scale fleet") {
    const auto s = table_one();
    const auto p = average_rate(s);
    const double expected[6] = {5, 3.75, 1.25, 5, 3.75, 1.25};
    for (std::size_t v = 0; v < 6; ++v) {
        const auto& ev = s.fleet[v];
        for (int t = 0; t < s.horizon_steps; ++t) {
            const double x = p.charge_kw[static_cast<std::size_t>(t)][v];
            CHECK(x == (ev.present_at(t) ? expected[v] : 0.0));
        }
        CHECK(p.delivered_kwh(v) == doctest::Approx(ev.demand_kwh).epsilon(1e-12));
        CHECK_FALSE(p.truncated[v]);
    }
    // 09:30 to 16:30 every vehicle is plugged in.
    for (int t = 38; t < 66; ++t) CHECK(p.park_kw(t) == 20.0);
    CHECK(p.peak_kw() == 20.0);
}

TEST_CASE("average rate: zero demand charges nothing") {
    auto s = table_one();
    s.fleet[0].demand_kwh = 0.0;
    CHECK(average_rate(s).delivered_kwh(0) == 0.0);
}

TEST_CASE("average rate is capped by the vehicle limit") {
    auto s = table_one();
    s.fleet[2].charge_max_kw = 1.0;
    const auto p = average_rate(s);
    CHECK(p.charge_kw[40][2] == 1.0);
    CHECK(p.truncated[2]);
}

TEST_CASE("immediate on the desk-scale fleet") {
    const auto s = table_one();
    const auto p = immediate(s);
    // Vehicle 1: 10 kW from 09:00 until 13:00.
    for (int t = 0; t < 96; ++t) CHECK(p.charge_kw[static_cast<std::size_t>(t)][0] == (t >= 36 && t < 52 ? 10.0 : 0.0));
    for (int t = 38; t < 42; ++t) CHECK(p.park_kw(t) == 60.0);
    CHECK(p.park_kw(42) < 60.0);
    CHECK(p.peak_kw() == 60.0);
    for (std::size_t v = 0; v < 6; ++v) {
        CHECK(p.delivered_kwh(v) == doctest::Approx(s.fleet[v].demand_kwh).epsilon(1e-12));
        CHECK_FALSE(p.truncated[v]);
    }
    CHECK_FALSE(converter_conflicts(p, s).empty());
}

TEST_CASE("immediate: fractional last step and truncation") {
    auto s = table_one();
    s.fleet[2].demand_kwh = 3.0; // 1.2 steps at 10 kW
    auto p = immediate(s);
    CHECK(p.charge_kw[38][2] == 10.0);
    CHECK(p.charge_kw[39][2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(p.charge_kw[40][2] == 0.0);
    s.fleet[2].charge_max_kw = 0.1;
    p = immediate(s);
    CHECK(p.truncated[2]);
}

TEST_CASE("immediate out-paces average rate while it is active") {
    // Per vehicle only: staggered fleets can peak higher under average rate.
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = table_one();
        for (auto& ev : s.fleet) {
            ev.arrival_step = 20 + static_cast<int>(30 * u(rng));
            ev.departure_step = ev.arrival_step + 1 + static_cast<int>(40 * u(rng));
            ev.demand_kwh = (ev.soc_max_kwh - ev.arrival_soc_kwh) * u(rng);
            ev.charge_max_kw = 1.0 + 15.0 * u(rng);
        }
        const auto imm = immediate(s), ar = average_rate(s);
        for (std::size_t v = 0; v < s.fleet.size(); ++v) {
            double imm_peak = 0.0, ar_peak = 0.0;
            for (int t = 0; t < s.horizon_steps; ++t) {
                const auto i = static_cast<std::size_t>(t);
                imm_peak = std::max(imm_peak, imm.charge_kw[i][v]);
                ar_peak = std::max(ar_peak, ar.charge_kw[i][v]);
                // Every step but the fractional last one runs at the cap.
                const bool full = imm.charge_kw[i][v] > 0.0 && (t + 1 < s.horizon_steps && imm.charge_kw[i + 1][v] > 0.0);
                if (full) CHECK(imm.charge_kw[i][v] >= ar.charge_kw[i][v]);
            }
            CHECK(imm_peak >= ar_peak - 1e-12);
        }
    }
}

TEST_CASE("baselines never discharge") {
    for (const auto& p : {average_rate(table_one()), immediate(table_one())})
        for (const auto& row : p.charge_kw)
            for (double x : row) CHECK(x >= 0.0);
}

TEST_CASE("baseline cost: one step of charging") {
    const auto s = single_step(0.0, 0.0);
    auto p = average_rate(s);
    REQUIRE(p.charge_kw[0][0] == 10.0);
    const auto r = baseline_cost(p, s);
    CHECK(r.ev_cost_usd == doctest::Approx(2.5 * 0.9216 * 0.039).epsilon(1e-12));
    CHECK(r.ev_cost_usd == doctest::Approx(0.0899).epsilon(1e-3));
    CHECK(r.pv_sales_usd == 0.0);
    CHECK(r.net_usd == r.ev_cost_usd);
}

TEST_CASE("baseline cost: PV sales") {
    auto s = single_step(10.0, 1.0);
    s.fleet.clear();
    const auto r = baseline_cost(average_rate(s), s);
    CHECK(r.pv_sales_usd == doctest::Approx(2.5 * 0.9216 * 0.03822).epsilon(1e-12));
    CHECK(r.pv_sales_usd == doctest::Approx(0.08806).epsilon(1e-4));
    CHECK(r.net_usd == -r.pv_sales_usd);
}

TEST_CASE("baseline cost: empty day costs nothing") {
    auto s = single_step(0.0, 0.0);
    s.fleet.clear();
    const auto r = baseline_cost(average_rate(s), s);
    CHECK(r.net_usd == 0.0);
}

TEST_CASE("baseline cost: mismatched profile") {
    auto p = average_rate(table_one());
    p.charge_kw.pop_back();
    CHECK_THROWS_AS(baseline_cost(p, table_one()), DimensionMismatch);
}

TEST_CASE("percent reduction") {
    CHECK(*percent_reduction(3.79, -1.53) == doctest::Approx(140.369).epsilon(1e-5));
    CHECK(*percent_reduction(3.79, 2.90) == doctest::Approx(23.483).epsilon(1e-4));
    CHECK(*percent_reduction(3.79, 3.79) == 0.0);
    CHECK_FALSE(percent_reduction(0.0, 1.0).has_value());
}

TEST_CASE("embedded baselines never beat the optimum") {
    std::mt19937 rng(3);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        auto s = evpv::testing::tiny_random(rng);
        s.v2g_enabled = false;
        s.reserves_enabled = false;
        const auto ems = ems::build(s);
        milp::SolverConfig cfg;
        cfg.rel_gap_tol = 1e-9;
        const auto sol = milp::solve_milp(ems.model, cfg);
        for (const auto& p : {average_rate(s), immediate(s)}) {
            const auto e = embed(p, ems, s);
            if (!e.feasible()) continue;
            ++checked;
            REQUIRE(sol.has_incumbent());
            CHECK(sol.objective <= e.objective + 1e-6);
        }
    }
    CHECK(checked > 0);
}
