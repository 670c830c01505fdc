// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evpv/milp/lp_solver.hpp"
#include "evpv/milp/model.hpp"

#include <string>
#include <vector>

namespace evpv::milp {

enum class BranchRule { most_fractional };
enum class NodeSelection { best_bound };

struct SolverConfig {
    double rel_gap_tol = 1.5e-4;
    double time_limit_seconds = 600.0;
    long max_nodes = 10'000'000;
    BranchRule branch_rule = BranchRule::most_fractional;
    NodeSelection node_selection = NodeSelection::best_bound;
    /// Row residual tolerance used by audit, scaled by max(1, |rhs|).
    double feasibility_tol = 1e-6;
    /// A binary within this distance of 0 or 1 counts as integral.
    double integrality_tol = 1e-9;
    /// Run a fractional dive every this many nodes (0 disables; the root
    /// always dives).
    long dive_interval = 200;
    /// Every this many nodes, binaries on which the incumbent and the node
    /// LP agree are pinned and the rest is searched with at most
    /// `neighborhood_nodes` nodes (0 disables; also tried once at the root).
    /// Alternate calls instead free a cluster of `neighborhood_size`
    /// binaries linked through rows of at most `neighborhood_row_terms`
    /// terms; the root sweeps every binary.
    long neighborhood_interval = 500;
    long neighborhood_nodes = 200;
    long neighborhood_size = 48;
    long neighborhood_row_terms = 4;
    /// Progress lines on stderr: new incumbents and periodic bound updates.
    bool log = false;
    LpOptions lp;
};

enum class SolveStatus { optimal, gap_limit, time_limit, node_limit, infeasible, unbounded };

struct MilpSolution {
    SolveStatus status = SolveStatus::infeasible;
    std::vector<double> values; ///< incumbent, empty when none was found
    double objective = kInfinity;
    double bound = -kInfinity;
    double gap = kInfinity;
    long nodes = 0;
    long lp_iterations = 0;
    double seconds = 0.0;

    bool has_incumbent() const noexcept { return !values.empty(); }
};

/// |incumbent - bound| / max(|incumbent|, 1e-9).
double relative_gap(double incumbent, double bound) noexcept;

/// Branch-and-bound over the LP relaxation: best-bound node selection,
/// most-fractional branching (ties to the lowest variable id), warm-started
/// child LPs and fractional diving for incumbents. Binaries fixed in the
/// model are never branched on.
MilpSolution solve_milp(const MilpModel& model, const SolverConfig& config = {});

/// As above, seeded with `start` (binaries rounded) when it passes audit at
/// the feasibility tolerance; an infeasible start is ignored.
MilpSolution solve_milp(const MilpModel& model, const SolverConfig& config, const std::vector<double>& start);

std::string to_string(SolveStatus status);

} // namespace evpv::milp
