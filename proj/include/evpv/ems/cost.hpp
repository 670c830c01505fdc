// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evpv/domain.hpp"
#include "evpv/ems/formulation.hpp"

#include <iosfwd>
#include <string>

namespace evpv::ems {

/// Objective decomposition. `reserve_income_usd` is reported as a positive
/// income and enters the total with a minus sign. The baseline fields are
/// filled only by baseline accounting.
struct CostReport {
    double penalty_usd = 0.0;
    double energy_trade_usd = 0.0;
    double reserve_income_usd = 0.0;
    double v2g_wear_usd = 0.0;
    double pv_cost_usd = 0.0;
    double total_usd = 0.0;

    double ev_cost_usd = 0.0;
    double pv_sales_usd = 0.0;
    double net_usd = 0.0;

    double component_sum() const noexcept {
        return penalty_usd + energy_trade_usd - reserve_income_usd + v2g_wear_usd + pv_cost_usd;
    }
};

/// Recomputes the objective components of a schedule from the snapshot data
/// alone, over steps [schedule.first_step, T). Penalties count for vehicles
/// departing at or after first_step. Throws DimensionMismatch on a shape
/// disagreement.
CostReport cost_breakdown(const Schedule& schedule, const ScenarioSnapshot& snapshot);

/// Long-format CSV: `step,entity,series,value`, one row per nonzero-capable
/// quantity. Entities are vehicle ids, charger ids, or `site`.
void write_schedule_csv(std::ostream& out, const Schedule& schedule);

/// `key,value` lines for every field of the report.
void write_cost_report(std::ostream& out, const CostReport& report);

} // namespace evpv::ems
