// SPDX-License-Identifier: Apache-2.0
//
// Domain types for a workplace EV-PV car park: vehicles, chargers, market and
// PV inputs, site limits, and the admission gate applied before scheduling.
// All energies are kWh, powers kW, prices $/kWh, times are step indices on a
// uniform grid of `step_hours`.
#pragma once

#include <optional>
#include <string>
#include <vector>

namespace evpv {

/// One vehicle's visit to the car park.
struct EvSession {
    std::string id;
    int arrival_step = 0;   ///< first step the EV is plugged in
    int departure_step = 0; ///< first step the EV is gone; SOC is read here
    double demand_kwh = 0.0;
    double arrival_soc_kwh = 0.0;
    double soc_min_kwh = 0.0;
    double soc_max_kwh = 0.0;
    double charge_max_kw = 0.0;    ///< > 0
    double discharge_min_kw = 0.0; ///< <= 0, zero disables V2G
    double eff_charge = 1.0;
    double eff_discharge = 1.0;
    double penalty_rate = 0.0; ///< $ per kWh short of the departure target
    std::string charger_id;

    bool v2g_enabled() const noexcept { return discharge_min_kw < 0.0; }
    int dwell_steps() const noexcept { return departure_step - arrival_step; }
    bool present_at(int step) const noexcept { return step >= arrival_step && step < departure_step; }
};

/// An integrated three-port EV-PV charger.
struct ChargerSpec {
    std::string id;
    double pv_rated_kw = 0.0;
    double inverter_rated_kw = 0.0;
    double ev_port_rated_kw = 0.0;
    int dc_converter_count = 1; ///< EVs that may (dis)charge simultaneously
    int connection_count = 1;   ///< EVs that may be plugged in simultaneously
    double eff_conv = 1.0;
    double pv_scale = 1.0;

    /// MPPT power available at this charger for a normalized forecast value.
    double pv_available_kw(double normalized_kw_per_kwp) const noexcept {
        return pv_scale * pv_rated_kw * normalized_kw_per_kwp;
    }
};

struct MarketSeries {
    std::vector<double> buy_price;
    std::vector<double> sell_price;
    std::vector<double> regup_price;
    std::vector<double> regdn_price;
};

struct PvForecast {
    std::vector<double> normalized_kw_per_kwp;
    double uncertainty = 0.10;
};

struct SiteLimits {
    std::vector<double> import_cap_kw;
    std::vector<double> export_cap_kw;

    static SiteLimits flat(int steps, double import_kw, double export_kw);
};

enum class ReserveMode { asymmetric, symmetric };

/// Which way round the EV power limits enter the reserve headroom rows.
/// `as_printed`: discharge + up-reserve <= charge limit, charge + down-reserve
/// <= |discharge limit|. `swapped` pairs each direction with its own limit.
enum class ReserveBoundConvention { as_printed, swapped };

struct ScenarioSnapshot {
    std::vector<EvSession> fleet;
    std::vector<ChargerSpec> chargers;
    MarketSeries market;
    PvForecast pv;
    SiteLimits limits;
    double step_hours = 0.25;
    int horizon_steps = 96;
    double taper_charge = 0.9;
    double taper_discharge = 0.1;
    double wear_rate = 0.042;
    double pv_cost = 0.0;
    ReserveMode reserve_mode = ReserveMode::asymmetric;
    ReserveBoundConvention reserve_bound_convention = ReserveBoundConvention::as_printed;
    bool v2g_enabled = true;
    bool reserves_enabled = true;
    bool curtailment_enabled = true;

    /// Index of the charger with the given id, or nullopt.
    std::optional<std::size_t> charger_index(const std::string& id) const;
    const ChargerSpec& charger_of(const EvSession& ev) const;
};

/// Structural issues with one session, empty when valid. `horizon_steps`
/// bounds the step indices; departure must leave room for the SOC read-out.
std::vector<std::string> validate_session(const EvSession& ev, int horizon_steps);
std::vector<std::string> validate_charger(const ChargerSpec& charger);
std::vector<std::string> validate_snapshot(const ScenarioSnapshot& snapshot);

/// Throws InvalidScenario listing every issue found.
void require_valid(const ScenarioSnapshot& snapshot);

/// Departure SOC target: arrival SOC plus requested energy.
double departure_target(const EvSession& ev) noexcept;

enum class AdmissionRule { none, charger_capacity, arrival_soc };

struct AcceptanceVerdict {
    std::string ev_id;
    bool accepted = true;
    AdmissionRule violated = AdmissionRule::none;
    std::string reason;
};

/// Admission gate. A vehicle is rejected when its arrival SOC is below its
/// minimum, or when the average-rate load of its charger exceeds
/// min(converters * port rating, inverter rating); in the latter case the
/// largest contributor (ties: lexicographically smallest id) is dropped and
/// the charger re-evaluated. Verdicts come back in fleet order.
std::vector<AcceptanceVerdict> check_acceptance(const ScenarioSnapshot& snapshot);

/// The snapshot with every rejected vehicle removed.
ScenarioSnapshot admitted_only(const ScenarioSnapshot& snapshot,
                               const std::vector<AcceptanceVerdict>& verdicts);

enum class GridRounding { up, down };

/// Maps a wall-clock time (hours since midnight) onto the step grid. Arrivals
/// round up, departures round down, so a vehicle is never scheduled while
/// absent.
int to_step_grid(double hours_since_midnight, double step_hours, GridRounding rounding);

struct StepWindow {
    int arrival_step;
    int departure_step;
};

/// Grid-aligns a visit; throws InvalidScenario if nothing of it survives.
StepWindow to_step_window(double arrival_hours, double departure_hours, double step_hours);

/// Parses "HH:MM[:SS]" or an ISO-8601 date-time ("YYYY-MM-DDTHH:MM[:SS]",
/// a space also accepted as separator) into hours since midnight.
double parse_clock_hours(const std::string& text);

std::string to_string(AdmissionRule rule);
std::string to_string(ReserveMode mode);
std::string to_string(ReserveBoundConvention convention);

} // namespace evpv
