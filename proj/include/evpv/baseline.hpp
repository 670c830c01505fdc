// SPDX-License-Identifier: Apache-2.0
//
// Uncontrolled reference policies: immediate charging at full rate and
// average-rate charging spread over the whole stay. Neither discharges,
// offers reserves, or respects converter multiplexing.
#pragma once

#include "evpv/domain.hpp"
#include "evpv/ems/cost.hpp"
#include "evpv/ems/formulation.hpp"
#include "evpv/milp/audit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace evpv::baseline {

enum class Policy { immediate, average_rate };

struct BaselineProfile {
    Policy policy = Policy::average_rate;
    std::vector<std::string> ev_ids;
    double step_hours = 0.25;
    /// charge_kw[t][v], power at the EV port.
    std::vector<std::vector<double>> charge_kw;
    /// Per vehicle: the demand could not be met before departure.
    std::vector<bool> truncated;

    int steps() const noexcept { return static_cast<int>(charge_kw.size()); }
    /// Port energy delivered to vehicle v over the day.
    double delivered_kwh(std::size_t v) const;
    /// Sum over vehicles at step t.
    double park_kw(int t) const;
    double peak_kw() const;
};

/// Rate limit shared by both policies: min(port rating, vehicle limit).
double rate_cap_kw(const EvSession& ev, const ChargerSpec& charger) noexcept;

/// Constant d / stay for every present step, capped by rate_cap_kw. Port
/// energy counts toward the demand; charging losses are ignored.
BaselineProfile average_rate(const ScenarioSnapshot& snapshot);

/// Full rate from arrival until the demand is delivered, the last step at a
/// fractional rate so the delivered energy is exact. Vehicles that cannot be
/// served before departure charge throughout and are flagged.
BaselineProfile immediate(const ScenarioSnapshot& snapshot);

/// Charging cost, PV sales and net cost. Both grid-side terms carry the
/// squared converter efficiency. `total_usd` holds the net cost; the
/// objective components are left at zero.
ems::CostReport baseline_cost(const BaselineProfile& profile, const ScenarioSnapshot& snapshot);

/// 100 * (c_ar - c_other) / c_ar, or nullopt when c_ar is zero.
std::optional<double> percent_reduction(double c_ar, double c_other) noexcept;

struct ConverterConflict {
    int step;
    std::string charger_id;
    int active;   ///< vehicles drawing power
    int capacity; ///< converters on the charger
};

/// Steps at which a profile runs more vehicles on a charger than it has DC
/// converters. Reported only; the policies do not respect the limit.
std::vector<ConverterConflict> converter_conflicts(const BaselineProfile& profile, const ScenarioSnapshot& snapshot);

/// A baseline profile laid into the scheduling model: its objective under the
/// same accounting as the optimizer, and whether it satisfies every row.
struct Embedding {
    std::vector<double> values;
    double objective = 0.0;
    milp::AuditReport audit;

    bool feasible() const noexcept { return audit.clean(); }
};

Embedding embed(const BaselineProfile& profile, const ems::EmsModel& ems, const ScenarioSnapshot& snapshot,
                double tol = 1e-6);

std::string to_string(Policy policy);

} // namespace evpv::baseline
