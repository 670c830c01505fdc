// SPDX-License-Identifier: Apache-2.0
#include "evpv/milp/oracle.hpp"

#include <chrono>
#include <cstdint>

namespace evpv::milp {

MilpSolution enumerate_oracle(const MilpModel& model, int max_binaries, const LpOptions& lp_options) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<int> free;
    for (int j = 0; j < model.num_variables(); ++j) {
        const auto& v = model.variable(j);
        if (v.kind == VarKind::binary && v.lower < v.upper) free.push_back(j);
    }
    if (static_cast<int>(free.size()) > max_binaries || free.size() >= 63)
        throw TooManyBinaries("model has " + std::to_string(free.size()) + " free binaries, oracle limit is " +
                              std::to_string(max_binaries));

    SimplexSolver lp(model, lp_options);
    MilpSolution best;
    best.status = SolveStatus::infeasible;
    const std::uint64_t count = std::uint64_t{1} << free.size();
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        for (std::size_t k = 0; k < free.size(); ++k) {
            const double v = (mask >> k) & 1U ? 1.0 : 0.0;
            lp.set_bounds(free[k], v, v);
        }
        lp.reset_basis();
        const auto r = lp.solve();
        ++best.nodes;
        if (r.status == LpStatus::unbounded) {
            best.status = SolveStatus::unbounded;
            best.values.clear();
            best.objective = -kInfinity;
            break;
        }
        if (r.status != LpStatus::optimal) continue;
        if (best.values.empty() || r.objective < best.objective) {
            best.values = r.values;
            best.objective = r.objective;
            best.status = SolveStatus::optimal;
        }
    }
    best.lp_iterations = lp.total_iterations();
    if (best.status == SolveStatus::optimal) {
        best.bound = best.objective;
        best.gap = 0.0;
    } else if (best.status == SolveStatus::infeasible) {
        best.bound = kInfinity;
    }
    best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return best;
}

} // namespace evpv::milp
