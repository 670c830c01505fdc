// SPDX-License-Identifier: Apache-2.0
#include "evpv/milp/audit.hpp"

#include "evpv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace evpv::milp {

AuditReport audit(const MilpModel& model, const std::vector<double>& values, double tol) {
    if (static_cast<int>(values.size()) != model.num_variables())
        throw DimensionMismatch("audit: " + std::to_string(values.size()) + " values for " +
                                std::to_string(model.num_variables()) + " variables");
    AuditReport report;
    for (int i = 0; i < model.num_constraints(); ++i) {
        const auto& c = model.constraint(i);
        double activity = 0.0;
        for (const auto& t : c.terms) activity += t.coef * values[static_cast<std::size_t>(t.var)];
        double residual = 0.0;
        switch (c.sense) {
        case RowSense::less_equal: residual = std::max(0.0, activity - c.rhs); break;
        case RowSense::greater_equal: residual = std::max(0.0, c.rhs - activity); break;
        case RowSense::equal: residual = std::abs(activity - c.rhs); break;
        }
        if (std::isnan(activity)) residual = kInfinity;
        report.max_row_residual = std::max(report.max_row_residual, residual);
        if (residual > tol * std::max(1.0, std::abs(c.rhs)))
            report.violations.push_back({Violation::Kind::row, i, c.name, residual});
    }
    for (int j = 0; j < model.num_variables(); ++j) {
        const auto& v = model.variable(j);
        const double x = values[static_cast<std::size_t>(j)];
        double below = v.lower - x;
        double above = x - v.upper;
        if (std::isnan(x)) below = kInfinity;
        if (below > tol * std::max(1.0, std::abs(v.lower))) {
            report.violations.push_back({Violation::Kind::bound, j, v.name, below});
        } else if (std::isfinite(v.upper) && above > tol * std::max(1.0, std::abs(v.upper))) {
            report.violations.push_back({Violation::Kind::bound, j, v.name, above});
        }
        if (v.kind == VarKind::binary) {
            const double off = std::abs(x - std::round(x));
            if (off > tol || std::isnan(x)) report.violations.push_back({Violation::Kind::integrality, j, v.name, off});
        }
    }
    return report;
}

std::string AuditReport::summary(std::size_t max_lines) const {
    std::ostringstream os;
    os << violations.size() << " violation(s)";
    for (std::size_t k = 0; k < violations.size() && k < max_lines; ++k) {
        const auto& v = violations[k];
        const char* kind = v.kind == Violation::Kind::row ? "row" : v.kind == Violation::Kind::bound ? "bound" : "integrality";
        os << "\n  " << kind << " " << v.index << " " << v.name << " residual " << v.residual;
    }
    return os.str();
}

} // namespace evpv::milp
