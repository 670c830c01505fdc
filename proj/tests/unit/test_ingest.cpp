// SPDX-License-Identifier: Apache-2.0
#include "evpv/csv.hpp"
#include "evpv/errors.hpp"
#include "evpv/ingest.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

using namespace evpv;
using namespace evpv::ingest;

namespace {

std::string hourly_prices(int hours, bool with_sell = false) {
    std::ostringstream os;
    os << "timestamp,spp_buy,regup,regdn" << (with_sell ? ",spp_sell" : "") << "\n";
    for (int h = 0; h < hours; ++h) {
        os << "2014-03-01T" << (h < 10 ? "0" : "") << h << ":00," << 0.02 + 0.001 * h << ",0.01,0.005";
        if (with_sell) os << "," << 0.019 + 0.001 * h;
        os << "\n";
    }
    return os.str();
}

const char* kFleetHeader =
    "id,arrival,departure,demand_kwh,arrival_soc_kwh,soc_min_kwh,soc_max_kwh,charge_max_kw,discharge_min_kw,"
    "eff_charge,eff_discharge,penalty_rate,charger_id\n";

} // namespace

TEST_CASE("timestamps") {
    const auto a = parse_timestamp("2014-03-01T09:30");
    const auto b = parse_timestamp("2014-03-01 09:30:00");
    CHECK(a.day == b.day);
    CHECK(a.minute == 570.0);
    CHECK(parse_timestamp("1970-01-02T00:00Z").day == 1);
    CHECK(parse_timestamp("17:15").day == 0);
    CHECK(parse_timestamp("17:15").minute == 1035.0);
    CHECK_THROWS_AS(parse_timestamp("9h30"), std::invalid_argument);
    CHECK_THROWS_AS(parse_timestamp("2014-13-01T00:00"), std::invalid_argument);
}

TEST_CASE("market: zero-order hold onto the step grid") {
    std::istringstream in(hourly_prices(24));
    const auto m = to_market(read_prices(in, "prices.csv"), 0.25);
    REQUIRE(m.buy_price.size() == 96);
    for (int t = 0; t < 96; ++t) {
        std::ostringstream printed;
        printed << 0.02 + 0.001 * (t / 4);
        const double hour_price = std::stod(printed.str());
        CHECK(m.buy_price[static_cast<std::size_t>(t)] == hour_price);
        CHECK(m.sell_price[static_cast<std::size_t>(t)] == 0.98 * hour_price);
        CHECK(m.regup_price[static_cast<std::size_t>(t)] == 0.01);
    }
}

TEST_CASE("market: sell price from the factor") {
    std::istringstream in("timestamp,spp_buy,regup,regdn\n00:00,0.039,0,0\n01:00,0.039,0,0\n");
    const auto m = to_market(read_prices(in, "p"), 0.25);
    CHECK(m.sell_price[0] == doctest::Approx(0.03822).epsilon(1e-12));
}

TEST_CASE("market: units") {
    std::istringstream in("timestamp,spp_buy,regup,regdn\n00:00,39,10,5\n01:00,39,10,5\n");
    const auto m = to_market(read_prices(in, "p"), 0.5, 0.98, PriceUnit::usd_per_mwh);
    CHECK(m.buy_price.size() == 4);
    CHECK(m.buy_price[0] == doctest::Approx(0.039).epsilon(1e-12));
    CHECK(to_usd_per_kwh(parse_price_unit("cents_per_kwh")) == 0.01);
}

TEST_CASE("market: malformed input") {
    std::istringstream empty("");
    CHECK_THROWS_AS(read_prices(empty, "p"), Error);
    std::istringstream header_only("timestamp,spp_buy,regup,regdn\n");
    CHECK_THROWS_AS(read_prices(header_only, "p"), Error);

    std::istringstream gap("timestamp,spp_buy,regup,regdn\n00:00,1,0,0\n01:00,1,0,0\n03:00,1,0,0\n");
    try {
        read_prices(gap, "gap.csv");
        FAIL("gap accepted");
    } catch (const ParseError& e) {
        const std::string what = e.what();
        CHECK(what.find("gap.csv") != std::string::npos);
        CHECK(what.find("01:00") != std::string::npos);
        CHECK(what.find("03:00") != std::string::npos);
    }
    std::istringstream bad("timestamp,spp_buy,regup,regdn\n00:00,1,0,0\n01:00,abc,0,0\n");
    try {
        read_prices(bad, "bad.csv");
        FAIL("bad number accepted");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    std::istringstream high_sell("timestamp,spp_buy,regup,regdn,spp_sell\n00:00,1,0,0,2\n01:00,1,0,0,0.5\n");
    CHECK_THROWS_AS(to_market(read_prices(high_sell, "p"), 0.25), ParseError);
}

TEST_CASE("market: write then read round-trips exactly") {
    for (bool sell : {false, true}) {
        const std::string text = hourly_prices(24, sell);
        std::istringstream in(text);
        std::ostringstream out;
        write_prices(out, read_prices(in, "p"));
        CHECK(out.str() == text);
    }
}

TEST_CASE("pv: self-normalization and bucket means") {
    std::ostringstream os;
    os << "timestamp,power_kw\n";
    for (int m = 0; m < 1440; ++m) os << "2014-03-01T" << m / 60 / 10 << m / 60 % 10 << ":" << m % 60 / 10 << m % 10 << ",11.1\n";
    std::istringstream in(os.str());
    const auto pv = load_pv(in, "pv", 11.1, 0.25);
    REQUIRE(pv.forecast.normalized_kw_per_kwp.size() == 96);
    for (double x : pv.forecast.normalized_kw_per_kwp) CHECK(x == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pv.warnings.empty());
    CHECK(pv.forecast.uncertainty == 0.10);

    std::istringstream wobble("timestamp,power_kw\n00:00,0.8\n00:01,1.0\n00:02,1.2\n00:03,1.0\n");
    const auto w = load_pv(wobble, "pv", 1.0, 1.0 / 15.0);
    CHECK(w.forecast.normalized_kw_per_kwp[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pv: missing minutes warn, negative power fails") {
    std::istringstream sparse("timestamp,power_kw\n00:00,1.0\n00:05,1.0\n00:20,2.0\n");
    const auto pv = load_pv(sparse, "pv", 1.0, 0.25);
    CHECK(pv.forecast.normalized_kw_per_kwp[0] == 1.0);
    CHECK(pv.forecast.normalized_kw_per_kwp[1] == 2.0);
    CHECK_FALSE(pv.warnings.empty());
    std::istringstream neg("timestamp,power_kw\n00:00,1.0\n00:01,-0.1\n");
    CHECK_THROWS_AS(load_pv(neg, "pv", 1.0, 0.25), ParseError);
    std::istringstream ok("timestamp,power_kw\n00:00,1.0\n");
    CHECK_THROWS(load_pv(ok, "pv", 0.0, 0.25));
}

TEST_CASE("pv: resampling conserves energy") {
    std::ostringstream os;
    os << "timestamp,power_kw\n";
    double minute_energy = 0.0;
    for (int m = 0; m < 2880; ++m) {
        const double p = std::max(0.0, 5.0 * std::sin(M_PI * ((m % 1440) - 360) / 840.0)) + 0.001 * (m % 7);
        minute_energy += p / 60.0;
        os << "2014-03-0" << 1 + m / 1440 << "T" << (m % 1440) / 600 << (m % 1440) / 60 % 10 << ":"
           << m % 60 / 10 << m % 10 << "," << csv::format_number(p) << "\n";
    }
    std::istringstream in(os.str());
    const auto pv = load_pv(in, "pv", 2.5, 0.25);
    REQUIRE(pv.forecast.normalized_kw_per_kwp.size() == 192);
    double bucket_energy = 0.0;
    for (double x : pv.forecast.normalized_kw_per_kwp) bucket_energy += x * 2.5 * 0.25;
    CHECK(std::abs(bucket_energy - minute_energy) <= 1e-9 * minute_energy);
}

TEST_CASE("fleet: desk-scale rows") {
    std::istringstream in(std::string(kFleetHeader) +
                          "1,09:00,17:00,40,20,5,85,50,-10,0.95,0.95,1,1\n"
                          "6,2014-03-01T09:30,2014-03-01T17:30,10,5,5,24,50,-10,0.95,0.95,1,4\n");
    const auto fleet = load_fleet(in, "fleet.csv", 0.25, 96);
    REQUIRE(fleet.size() == 2);
    CHECK(fleet[0].id == "1");
    CHECK(fleet[0].arrival_step == 36);
    CHECK(fleet[0].departure_step == 68);
    CHECK(fleet[0].demand_kwh == 40.0);
    CHECK(fleet[0].arrival_soc_kwh == 20.0);
    CHECK(fleet[0].soc_max_kwh == 85.0);
    CHECK(fleet[0].charger_id == "1");
    CHECK(fleet[1].charger_id == "4");
    CHECK(fleet[1].demand_kwh == 10.0);
    CHECK(fleet[1].arrival_soc_kwh == 5.0);
}

TEST_CASE("fleet: bad rows are reported together") {
    std::istringstream in(std::string(kFleetHeader) +
                          "1,17:00,09:00,40,20,5,85,50,-10,0.95,0.95,1,1\n"
                          "2,09:00,17:00,40,20,5,85,50,-10,0.95,0.95,1,1\n"
                          "2,09:00,17:00,99,20,5,85,50,-10,0.95,0.95,1,1\n");
    try {
        load_fleet(in, "fleet.csv", 0.25, 96);
        FAIL("bad fleet accepted");
    } catch (const InvalidScenario& e) {
        const std::string what = e.what();
        CHECK(what.find("fleet.csv:2") != std::string::npos);
        CHECK(what.find("fleet.csv:4") != std::string::npos);
    }
}

TEST_CASE("chargers and limits") {
    std::istringstream ch("id,pv_rated_kw,inverter_rated_kw,ev_port_rated_kw,dc_converter_count,connection_count,"
                          "eff_conv,pv_scale\n1,10,10,10,1,2,0.96,1\n");
    const auto chargers = load_chargers(ch, "c");
    REQUIRE(chargers.size() == 1);
    CHECK(chargers[0].connection_count == 2);
    CHECK(chargers[0].eff_conv == 0.96);

    std::istringstream lim("start,import_cap_kw,export_cap_kw\n00:00,40,40\n12:00,30,20\n");
    const auto limits = load_limits(lim, "l", 0.25, 96);
    CHECK(limits.import_cap_kw[47] == 40.0);
    CHECK(limits.import_cap_kw[48] == 30.0);
    CHECK(limits.export_cap_kw[95] == 20.0);
    std::istringstream late("start,import_cap_kw,export_cap_kw\n01:00,40,40\n");
    CHECK_THROWS_AS(load_limits(late, "l", 0.25, 96), ParseError);
}
