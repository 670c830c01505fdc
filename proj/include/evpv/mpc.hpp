// SPDX-License-Identifier: Apache-2.0
//
// Shrinking-horizon receding control: at every step the remaining day is
// re-planned from the realized state, the first step of the plan is applied
// to a plant model, and the plant's outcome seeds the next plan.
#pragma once

#include "evpv/domain.hpp"
#include "evpv/ems/cost.hpp"
#include "evpv/ems/formulation.hpp"
#include "evpv/milp/branch_and_bound.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evpv::mpc {

/// The planned day plus what actually happens. PV multipliers scale the
/// forecast step by step; vehicle overrides replace planned arrival and
/// departure steps and the arrival SOC.
struct DayTimeline {
    ScenarioSnapshot plan;
    std::vector<double> pv_multiplier; ///< empty or one per step
    std::map<std::string, int> arrival_step;
    std::map<std::string, int> departure_step;
    std::map<std::string, double> arrival_soc_kwh;

    explicit DayTimeline(ScenarioSnapshot planned = {}) : plan(std::move(planned)) {}

    double multiplier(int step) const;
    /// The plan with every vehicle override applied.
    ScenarioSnapshot realized() const;
};

/// Overlays referencing unknown vehicles, multipliers outside the declared
/// PV band, or overrides that break a session's invariants.
std::vector<std::string> validate_timeline(const DayTimeline& timeline);

/// Reads `step,entity,field,value` rows into a timeline over `plan`.
/// Fields: `pv_multiplier` (entity `site`, step required), and per vehicle
/// `arrival_step`, `departure_step`, `arrival_soc_kwh` (step column ignored,
/// may be `*`). Throws ParseError on malformed rows, InvalidScenario when
/// validate_timeline objects.
DayTimeline load_overlay(const std::string& path, const ScenarioSnapshot& plan);
DayTimeline load_overlay(std::istream& in, const std::string& source, const ScenarioSnapshot& plan);

/// One step's applied dispatch for every vehicle and charger.
struct Slice {
    std::vector<double> charge, discharge, reserve_up, reserve_down;
    std::vector<double> pv, draw, feed;
    double grid_import = 0.0;
    double grid_export = 0.0;

    static Slice zeros(std::size_t vehicles, std::size_t chargers);
    static Slice from_schedule(const ems::Schedule& schedule, int step);
};

struct PlantOutcome {
    Slice applied;                ///< after PV substitution and any scaling
    std::vector<double> soc_next; ///< per vehicle, SOC at step + 1
    std::vector<std::string> events;
};

/// Advances the plant one step. SOC follows the charge/discharge recursion
/// with the applied powers; PV is the planned extraction capped by what the
/// realized irradiance makes available; each charger's grid exchange is
/// recomputed so its DC link balances; if a network cap is then exceeded,
/// charging (import side) or PV and discharge (export side) are scaled down
/// by a common factor until the cap holds. SOC is clamped to the vehicle's
/// box and every adjustment is logged in `events`. Vehicles outside their
/// stay keep their SOC.
PlantOutcome plant_step(const Slice& committed, const ScenarioSnapshot& realized, int step,
                        const std::vector<double>& soc_now, double pv_multiplier);

struct StepRecord {
    int step = 0;
    milp::SolveStatus status = milp::SolveStatus::optimal;
    bool fallback = false; ///< zero power committed because the re-solve failed
    long nodes = 0;
    double gap = 0.0;
    double seconds = 0.0;
    /// Plan objective for the remaining day plus cost already incurred.
    double projected_total = 0.0;
    std::vector<std::string> events;
};

struct MpcTrace {
    ScenarioSnapshot realized; ///< plan with vehicle overrides applied
    ems::Schedule applied;     ///< realized dispatch, SOC at the start of each step
    std::vector<StepRecord> steps;
    ems::CostReport cost; ///< accumulated step by step
};

struct MpcOptions {
    milp::SolverConfig solver;
    /// Seed every re-solve with the previous plan when it is still feasible.
    bool warm_start = true;
};

/// Runs the whole day. Vehicles that have not yet arrived are planned with
/// their announced data, delayed to the next step if overdue; vehicles are
/// known exactly from the step they plug in.
MpcTrace run_day(const DayTimeline& timeline, const MpcOptions& options = {});

/// Per-step trace: step, status, fallback flag, nodes, gap, projected total
/// and the applied site exchange. Wall time is left out so reruns compare
/// byte for byte.
void write_trace_csv(std::ostream& out, const MpcTrace& trace);

} // namespace evpv::mpc
