// SPDX-License-Identifier: Apache-2.0
//
// Bounded-variable primal simplex. Each row i of the model becomes
//     a_i . x - s_i = 0,   s_i in [row lower, row upper]
// so the all-logical basis is always available as a cold start. Phase 1
// minimizes the sum of bound violations of the basic variables starting from
// whatever basis is loaded, which lets branch-and-bound children restart from
// their parent's optimal basis after a bound change. Phase 2 uses Dantzig
// pricing with a Harris ratio test and falls back to Bland's rule after a run
// of degenerate pivots. The basis is held as a sparse LU factorization plus a
// product-form eta file that is rebuilt every `refactor_interval` pivots.
#pragma once

#include "evpv/errors.hpp"
#include "evpv/milp/model.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace evpv::milp {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpOptions {
    double primal_tol = 1e-9; ///< scaled by max(1, |bound|)
    double dual_tol = 1e-9;
    double pivot_tol = 1e-9;
    int refactor_interval = 100;
    /// Consecutive pivots without objective progress before Bland's rule.
    int stall_pivots = 100;
    /// Pivot limit per solve() call; exceeding it raises NumericalStall.
    long max_iterations = 500000;
};

/// Raised when the pivot limit is hit or the basis cannot be refactored.
class NumericalStall : public Error {
public:
    using Error::Error;
};

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> values; ///< structural variables only
    double objective = 0.0;     ///< includes the model's constant offset
    long iterations = 0;
};

/// Opaque snapshot of a simplex basis for warm starts.
struct Basis {
    std::vector<int> head;
    std::vector<std::int8_t> state;
    bool empty() const noexcept { return head.empty() && state.empty(); }
};

/// LP relaxation solver over a fixed constraint matrix with mutable variable
/// bounds. Binary variables are treated as continuous within their bounds.
class SimplexSolver {
public:
    explicit SimplexSolver(const MilpModel& model, LpOptions options = {});
    ~SimplexSolver();
    SimplexSolver(SimplexSolver&&) noexcept;
    SimplexSolver& operator=(SimplexSolver&&) noexcept;

    void set_bounds(int var, double lower, double upper);
    double lower(int var) const;
    double upper(int var) const;
    /// Restores every structural bound to the model's.
    void reset_bounds();

    /// Solves from the currently loaded basis.
    LpResult solve();

    Basis basis() const;
    /// Loads a basis saved from a solver on the same model. Nonbasic
    /// variables are placed on their current bounds.
    void load_basis(const Basis& basis);
    /// All-logical starting basis.
    void reset_basis();

    long total_iterations() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot LP solve of the model with binaries relaxed, from a cold start.
LpResult solve_lp(const MilpModel& model, const LpOptions& options = {});

std::string to_string(LpStatus status);

} // namespace evpv::milp
