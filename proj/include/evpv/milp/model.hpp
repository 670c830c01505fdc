// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

namespace evpv::milp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class VarKind { continuous, binary };
enum class RowSense { less_equal, equal, greater_equal };

struct Variable {
    std::string name;
    VarKind kind = VarKind::continuous;
    double lower = 0.0;
    double upper = kInfinity;
};

struct Term {
    int var;
    double coef;
};

struct Constraint {
    std::string name;
    std::vector<Term> terms;
    RowSense sense = RowSense::less_equal;
    double rhs = 0.0;
};

/// Sparse minimization MILP. Every variable is non-negative: lower bounds are
/// finite and >= 0, upper bounds may be infinite. Binaries live in [0,1] and
/// may be narrowed to a single value with fix(). Once sealed the model is
/// read-only.
class MilpModel {
public:
    int add_variable(std::string name, VarKind kind, double lower = 0.0, double upper = kInfinity);
    int add_continuous(std::string name, double lower = 0.0, double upper = kInfinity) {
        return add_variable(std::move(name), VarKind::continuous, lower, upper);
    }
    int add_binary(std::string name) { return add_variable(std::move(name), VarKind::binary, 0.0, 1.0); }

    /// Duplicate variable references are merged, zero coefficients dropped.
    int add_constraint(std::string name, std::vector<Term> terms, RowSense sense, double rhs);

    void set_objective_coef(int var, double coef);
    void add_objective_coef(int var, double coef);
    void set_objective_offset(double offset);
    void add_objective_offset(double delta);

    /// Presolve hook: pins a variable to one value. Pinned binaries are never
    /// branched on.
    void fix(int var, double value);
    void set_bounds(int var, double lower, double upper);

    /// Validates and freezes the model. Throws evpv::Error on a broken
    /// invariant (non-finite coefficient, bad bounds, dangling reference).
    void seal();
    bool sealed() const noexcept { return sealed_; }

    int num_variables() const noexcept { return static_cast<int>(variables_.size()); }
    int num_constraints() const noexcept { return static_cast<int>(constraints_.size()); }
    int num_binaries() const noexcept;
    /// Binaries whose bounds still allow both 0 and 1.
    int num_free_binaries() const noexcept;

    const Variable& variable(int j) const { return variables_.at(static_cast<std::size_t>(j)); }
    const Constraint& constraint(int i) const { return constraints_.at(static_cast<std::size_t>(i)); }
    const std::vector<Variable>& variables() const noexcept { return variables_; }
    const std::vector<Constraint>& constraints() const noexcept { return constraints_; }
    const std::vector<double>& objective() const noexcept { return objective_; }
    double objective_offset() const noexcept { return offset_; }

    double evaluate_objective(const std::vector<double>& values) const;

    /// Same model with every binary relaxed to a continuous [lb,ub] variable.
    MilpModel relaxed() const;

    std::vector<std::string> validation_issues() const;

private:
    void require_mutable() const;

    std::vector<Variable> variables_;
    std::vector<Constraint> constraints_;
    std::vector<double> objective_;
    double offset_ = 0.0;
    bool sealed_ = false;
};

} // namespace evpv::milp
