// SPDX-License-Identifier: Apache-2.0
//
// Loaders for the scenario inputs: day-ahead and reserve prices, minute PV
// traces, fleet and charger tables, site limits, and the JSON bundle that
// ties them together. Every loader reports the file and line of a bad row.
#pragma once

#include "evpv/domain.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace evpv::ingest {

/// A timestamp as whole days since 1970-01-01 plus minutes into that day.
/// Clock-only text ("HH:MM") lands on day 0.
struct Timestamp {
    std::int64_t day = 0;
    double minute = 0.0;

    double absolute_minutes() const noexcept { return static_cast<double>(day) * 1440.0 + minute; }
};

/// "YYYY-MM-DD[T| ]HH:MM[:SS]" or "HH:MM[:SS]"; a trailing zone designator is
/// ignored. Throws std::invalid_argument on anything else.
Timestamp parse_timestamp(const std::string& text);

enum class PriceUnit { usd_per_kwh, cents_per_kwh, usd_per_mwh };

PriceUnit parse_price_unit(const std::string& text);
std::string to_string(PriceUnit unit);
/// Multiplier taking a price in `unit` to $/kWh.
double to_usd_per_kwh(PriceUnit unit) noexcept;

/// One row of a price file, in the file's own unit. The timestamp text is
/// kept verbatim so a table can be written back unchanged.
struct RawPriceRow {
    std::string timestamp;
    double spp_buy = 0.0;
    double regup = 0.0;
    double regdn = 0.0;
    std::optional<double> spp_sell;
};

struct PriceTable {
    std::string source;
    bool has_sell = false;
    std::vector<RawPriceRow> rows;
    std::vector<Timestamp> times;
};

/// Columns `timestamp,spp_buy,regup,regdn[,spp_sell]`. Timestamps must be
/// strictly increasing at one constant cadence; a hole is reported with the
/// two timestamps around it.
PriceTable read_prices(const std::string& path);
PriceTable read_prices(std::istream& in, const std::string& source);

/// Writes the table in the layout read_prices accepts.
void write_prices(std::ostream& out, const PriceTable& table);

/// Prices on the step grid by zero-order hold, converted to $/kWh. Missing
/// sell prices become sell_factor * buy. Throws ParseError if a sell price
/// exceeds its buy price, or if the file span is not a whole number of steps.
MarketSeries load_market(const std::string& path, double step_hours, double sell_factor = 0.98,
                         PriceUnit unit = PriceUnit::usd_per_kwh);
MarketSeries to_market(const PriceTable& table, double step_hours, double sell_factor = 0.98,
                       PriceUnit unit = PriceUnit::usd_per_kwh);

struct PvLoad {
    PvForecast forecast;
    /// First day (days since epoch) covered by the grid.
    std::int64_t first_day = 0;
    std::vector<std::string> warnings;
};

/// Columns `timestamp,power_kw`, one-minute cadence expected. Samples are
/// divided by rated_kwp and averaged inside each step bucket; the grid spans
/// whole days from midnight of the first sample. Buckets with missing
/// minutes average what is present and add a warning; empty buckets read 0.
PvLoad load_pv(const std::string& path, double rated_kwp, double step_hours, double uncertainty = 0.10);
PvLoad load_pv(std::istream& in, const std::string& source, double rated_kwp, double step_hours,
               double uncertainty = 0.10);

/// Fleet table: `id,arrival,departure,demand_kwh,arrival_soc_kwh,soc_min_kwh,
/// soc_max_kwh,charge_max_kw,discharge_min_kw,eff_charge,eff_discharge,
/// penalty_rate,charger_id`, times as clock or ISO date-time (the date is
/// ignored). Every bad row is collected into one InvalidScenario.
std::vector<EvSession> load_fleet(const std::string& path, double step_hours, int horizon_steps);
std::vector<EvSession> load_fleet(std::istream& in, const std::string& source, double step_hours, int horizon_steps);

/// Charger table: `id,pv_rated_kw,inverter_rated_kw,ev_port_rated_kw,
/// dc_converter_count,connection_count,eff_conv,pv_scale`.
std::vector<ChargerSpec> load_chargers(const std::string& path);
std::vector<ChargerSpec> load_chargers(std::istream& in, const std::string& source);

/// Piecewise-constant caps: `start,import_cap_kw,export_cap_kw`, each row
/// holding from its clock time until the next. The first row starts at 00:00.
SiteLimits load_limits(const std::string& path, double step_hours, int horizon_steps);
SiteLimits load_limits(std::istream& in, const std::string& source, double step_hours, int horizon_steps);

/// Everything a scenario file names, loaded and aligned. Market and PV may
/// span several days; snapshot(d) cuts day d out of them.
struct Bundle {
    std::string directory;
    ScenarioSnapshot base; ///< fleet, chargers, limits and switches; no series
    MarketSeries market;   ///< whole file span
    std::vector<double> pv_normalized;
    int days = 0;
    std::optional<std::string> overlay_path;
    std::vector<std::string> warnings;

    int steps_per_day() const noexcept { return base.horizon_steps; }
    ScenarioSnapshot snapshot(int day) const;
};

/// Settings that may override the scenario file.
struct BundleOverrides {
    std::optional<double> step_minutes;
    std::optional<double> sell_factor;
    std::optional<bool> v2g;
    std::optional<bool> reserves;
    std::optional<bool> curtailment;
    std::optional<ReserveMode> reserve_mode;
    std::optional<ReserveBoundConvention> reserve_bounds;
};

/// Reads `scenario.json` (or a directory containing one). Relative file names
/// resolve against the scenario file's directory.
Bundle load_bundle(const std::string& path, const BundleOverrides& overrides = {});

} // namespace evpv::ingest
