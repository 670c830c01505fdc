// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evpv/milp/model.hpp"

#include <string>
#include <vector>

namespace evpv::milp {

struct Violation {
    enum class Kind { row, bound, integrality };
    Kind kind;
    int index; ///< constraint index for rows, variable index otherwise
    std::string name;
    double residual;
};

struct AuditReport {
    std::vector<Violation> violations;
    double max_row_residual = 0.0;

    bool clean() const noexcept { return violations.empty(); }
    std::string summary(std::size_t max_lines = 10) const;
};

/// Every row whose residual exceeds tol * max(1, |rhs|), every bound missed
/// by more than tol * max(1, |bound|), and every binary farther than tol from
/// 0 or 1. Throws DimensionMismatch if `values` does not cover the model.
AuditReport audit(const MilpModel& model, const std::vector<double>& values, double tol = 1e-6);

} // namespace evpv::milp
