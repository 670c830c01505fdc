// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evpv/milp/branch_and_bound.hpp"

namespace evpv::milp {

class TooManyBinaries : public Error {
public:
    using Error::Error;
};

/// Exact optimum by brute force: every assignment of the free binaries is
/// pinned and its LP solved from a cold start. Ties keep the assignment
/// enumerated first (binary counting over free binaries in id order).
MilpSolution enumerate_oracle(const MilpModel& model, int max_binaries = 20, const LpOptions& lp = {});

} // namespace evpv::milp
