// SPDX-License-Identifier: Apache-2.0
#include "evpv/milp/model.hpp"

#include "evpv/errors.hpp"

#include <algorithm>
#include <cmath>

namespace evpv::milp {

void MilpModel::require_mutable() const {
    if (sealed_) throw Error("model is sealed");
}

int MilpModel::add_variable(std::string name, VarKind kind, double lower, double upper) {
    require_mutable();
    if (kind == VarKind::binary) {
        lower = std::max(lower, 0.0);
        upper = std::min(upper, 1.0);
    }
    variables_.push_back({std::move(name), kind, lower, upper});
    objective_.push_back(0.0);
    return static_cast<int>(variables_.size()) - 1;
}

int MilpModel::add_constraint(std::string name, std::vector<Term> terms, RowSense sense, double rhs) {
    require_mutable();
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> merged;
    merged.reserve(terms.size());
    for (const auto& t : terms) {
        if (!merged.empty() && merged.back().var == t.var) {
            merged.back().coef += t.coef;
        } else {
            merged.push_back(t);
        }
    }
    std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
    constraints_.push_back({std::move(name), std::move(merged), sense, rhs});
    return static_cast<int>(constraints_.size()) - 1;
}

void MilpModel::set_objective_coef(int var, double coef) {
    require_mutable();
    objective_.at(static_cast<std::size_t>(var)) = coef;
}

void MilpModel::add_objective_coef(int var, double coef) {
    require_mutable();
    objective_.at(static_cast<std::size_t>(var)) += coef;
}

void MilpModel::set_objective_offset(double offset) {
    require_mutable();
    offset_ = offset;
}

void MilpModel::add_objective_offset(double delta) {
    require_mutable();
    offset_ += delta;
}

void MilpModel::fix(int var, double value) { set_bounds(var, value, value); }

void MilpModel::set_bounds(int var, double lower, double upper) {
    require_mutable();
    auto& v = variables_.at(static_cast<std::size_t>(var));
    v.lower = lower;
    v.upper = upper;
}

int MilpModel::num_binaries() const noexcept {
    return static_cast<int>(std::count_if(variables_.begin(), variables_.end(),
                                          [](const Variable& v) { return v.kind == VarKind::binary; }));
}

int MilpModel::num_free_binaries() const noexcept {
    return static_cast<int>(std::count_if(variables_.begin(), variables_.end(), [](const Variable& v) {
        return v.kind == VarKind::binary && v.lower < v.upper;
    }));
}

std::vector<std::string> MilpModel::validation_issues() const {
    std::vector<std::string> issues;
    const int n = num_variables();
    for (int j = 0; j < n; ++j) {
        const auto& v = variables_[static_cast<std::size_t>(j)];
        const std::string tag = "variable " + std::to_string(j) + " (" + v.name + "): ";
        if (!std::isfinite(v.lower) || v.lower < 0.0) issues.push_back(tag + "lower bound must be finite and >= 0");
        if (std::isnan(v.upper) || v.upper < v.lower) issues.push_back(tag + "upper bound below lower bound");
        if (v.kind == VarKind::binary) {
            const bool ok = (v.lower == 0.0 || v.lower == 1.0) && (v.upper == 0.0 || v.upper == 1.0);
            if (!ok) issues.push_back(tag + "binary bounds must be 0 or 1");
        }
        if (!std::isfinite(objective_[static_cast<std::size_t>(j)])) issues.push_back(tag + "non-finite cost");
    }
    if (!std::isfinite(offset_)) issues.push_back("non-finite objective offset");
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        const auto& c = constraints_[i];
        const std::string tag = "constraint " + std::to_string(i) + " (" + c.name + "): ";
        if (!std::isfinite(c.rhs)) issues.push_back(tag + "non-finite right-hand side");
        for (const auto& t : c.terms) {
            if (t.var < 0 || t.var >= n) {
                issues.push_back(tag + "references unknown variable " + std::to_string(t.var));
            } else if (!std::isfinite(t.coef)) {
                issues.push_back(tag + "non-finite coefficient");
            }
        }
    }
    return issues;
}

void MilpModel::seal() {
    if (sealed_) return;
    auto issues = validation_issues();
    if (!issues.empty()) {
        std::string msg = "malformed model";
        for (const auto& i : issues) msg += "\n  - " + i;
        throw Error(msg);
    }
    sealed_ = true;
}

double MilpModel::evaluate_objective(const std::vector<double>& values) const {
    if (values.size() != variables_.size()) throw DimensionMismatch("value vector does not match model");
    double total = offset_;
    for (std::size_t j = 0; j < values.size(); ++j) total += objective_[j] * values[j];
    return total;
}

MilpModel MilpModel::relaxed() const {
    MilpModel out = *this;
    for (auto& v : out.variables_) v.kind = VarKind::continuous;
    return out;
}

} // namespace evpv::milp
