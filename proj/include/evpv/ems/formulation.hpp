// SPDX-License-Identifier: Apache-2.0
//
// Car-park scheduling MILP. For steps t in [from_step, T), vehicles v and
// chargers c the decision variables are
//   per (t,v): charge, discharge, reserve up, reserve down, SOC,
//              connected (binary), charge-mode (binary, 1 = charging)
//   per (t,c): PV extraction, grid draw, grid feed, draw-mode (binary)
//   per t:     site import, site export
// and the objective is penalty + energy trade - reserve income + V2G wear +
// PV cost. Variables outside a vehicle's presence window are pinned to zero
// through the model's fix() hook.
#pragma once

#include "evpv/domain.hpp"
#include "evpv/errors.hpp"
#include "evpv/milp/branch_and_bound.hpp"
#include "evpv/milp/model.hpp"

#include <map>
#include <string>
#include <vector>

namespace evpv::ems {

/// from_step lies at or beyond the end of the horizon.
class HorizonExhausted : public Error {
public:
    using Error::Error;
};

/// A solution without an incumbent was handed to extract_schedule.
class NoIncumbent : public Error {
public:
    using Error::Error;
};

enum class EvVar { charge, discharge, reserve_up, reserve_down, soc, connected, charge_mode };
enum class ChargerVar { pv, draw, feed, draw_mode };
enum class SiteVar { import, export_ };

/// Index maps from (family, step, entity) to model variable ids. Families
/// are laid out in contiguous blocks, steps outermost within each block.
class VariableCatalog {
public:
    VariableCatalog() = default;
    VariableCatalog(int first_step, int horizon_steps, int vehicles, int chargers);

    int first_step() const noexcept { return first_; }
    int horizon_steps() const noexcept { return horizon_; }
    int steps() const noexcept { return horizon_ - first_; }
    int vehicles() const noexcept { return vehicles_; }
    int chargers() const noexcept { return chargers_; }

    /// `t` is an absolute step in [first_step, horizon_steps).
    int ev(EvVar family, int t, int v) const;
    int charger(ChargerVar family, int t, int c) const;
    int site(SiteVar family, int t) const;

    int continuous_count() const noexcept { return 5 * vehicles_ * steps() + 3 * chargers_ * steps() + 2 * steps(); }
    int binary_count() const noexcept { return 2 * vehicles_ * steps() + chargers_ * steps(); }
    int total() const noexcept { return continuous_count() + binary_count(); }

private:
    int first_ = 0;
    int horizon_ = 0;
    int vehicles_ = 0;
    int chargers_ = 0;
};

struct EmsModel {
    milp::MilpModel model;
    VariableCatalog catalog;
    /// Fleet position -> charger position.
    std::vector<int> charger_of;
};

/// Builds the MILP for steps [from_step, T). Vehicles already plugged in at
/// from_step (arrival < from_step <= departure) take their SOC at from_step
/// from `realized_soc`, keyed by vehicle id; a missing entry is an error.
/// Vehicles that left before from_step contribute nothing.
EmsModel build(const ScenarioSnapshot& snapshot, int from_step = 0,
               const std::map<std::string, double>& realized_soc = {});

/// Per-step dispatch over the whole horizon; steps before `first_step` are
/// zero. Matrices are indexed [t][v] or [t][c].
struct Schedule {
    int first_step = 0;
    int horizon_steps = 0;
    std::vector<std::string> ev_ids;
    std::vector<std::string> charger_ids;
    std::vector<std::vector<double>> charge, discharge, reserve_up, reserve_down, soc;
    std::vector<std::vector<int>> connected, charge_mode;
    std::vector<std::vector<double>> pv, draw, feed;
    std::vector<std::vector<int>> draw_mode;
    std::vector<double> grid_import, grid_export;

    static Schedule zeros(const ScenarioSnapshot& snapshot, int first_step = 0);
};

/// Maps the incumbent back through the catalog with binaries rounded to
/// exact 0/1 and re-audits the rounded vector. Throws NoIncumbent, or Error
/// if the audit finds violations.
Schedule extract_schedule(const milp::MilpSolution& solution, const EmsModel& ems, const ScenarioSnapshot& snapshot,
                          double audit_tol = 1e-6);

/// Inverse of extract_schedule: lays a schedule out as a model vector.
std::vector<double> to_values(const Schedule& schedule, const EmsModel& ems);

/// Model vector for a charge-only profile (profile[t][v] in kW at the EV
/// port): SOC follows the recursion, PV runs at its forecast, and each
/// charger's grid exchange closes the DC-link balance. Used to test whether
/// a baseline lies inside the MILP's feasible set.
std::vector<double> embed_charging_profile(const std::vector<std::vector<double>>& profile, const EmsModel& ems,
                                           const ScenarioSnapshot& snapshot);

} // namespace evpv::ems
