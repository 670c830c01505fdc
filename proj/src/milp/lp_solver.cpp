// SPDX-License-Identifier: Apache-2.0
#include "evpv/milp/lp_solver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace evpv::milp {

namespace {

enum : std::int8_t { kBasic = 0, kAtLower = 1, kAtUpper = 2 };

using SparseMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using LuSolver = Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>>;

struct Eta {
    int pos;
    double pivot;
    std::vector<int> index;
    std::vector<double> value; // alpha entries other than the pivot
};

double tol_for(double bound, double tol) { return tol * std::max(1.0, std::isfinite(bound) ? std::abs(bound) : 1.0); }

} // namespace

struct SimplexSolver::Impl {
    LpOptions opt;
    int n = 0; // structural
    int m = 0; // rows == logicals
    double offset = 0.0;

    // Structural columns in CSC form.
    std::vector<int> col_start;
    std::vector<int> row_index;
    std::vector<double> col_value;

    std::vector<double> model_lo, model_up;
    std::vector<double> lo, up, cost, x;
    std::vector<std::int8_t> state;
    std::vector<int> head; // basic variable at each position
    std::vector<int> pos;  // position of a basic variable, -1 otherwise

    LuSolver lu;
    bool factored = false;
    std::vector<Eta> etas;
    long total_iters = 0;

    // Scratch.
    Eigen::VectorXd work_m;
    std::vector<double> cb, y, alpha;

    Impl(const MilpModel& model, LpOptions o) : opt(o) {
        n = model.num_variables();
        m = model.num_constraints();
        offset = model.objective_offset();
        const int N = n + m;
        lo.assign(static_cast<std::size_t>(N), 0.0);
        up.assign(static_cast<std::size_t>(N), 0.0);
        cost.assign(static_cast<std::size_t>(N), 0.0);
        for (int j = 0; j < n; ++j) {
            const auto& v = model.variable(j);
            lo[j] = v.lower;
            up[j] = v.upper;
            cost[j] = model.objective()[static_cast<std::size_t>(j)];
        }
        model_lo.assign(lo.begin(), lo.begin() + n);
        model_up.assign(up.begin(), up.begin() + n);

        std::vector<int> counts(static_cast<std::size_t>(n) + 1, 0);
        for (const auto& c : model.constraints())
            for (const auto& t : c.terms) ++counts[static_cast<std::size_t>(t.var) + 1];
        col_start.assign(static_cast<std::size_t>(n) + 1, 0);
        for (int j = 0; j < n; ++j) col_start[j + 1] = col_start[j] + counts[j + 1];
        row_index.resize(static_cast<std::size_t>(col_start[n]));
        col_value.resize(static_cast<std::size_t>(col_start[n]));
        std::vector<int> fill(col_start.begin(), col_start.end() - 1);
        for (int i = 0; i < m; ++i) {
            const auto& c = model.constraint(i);
            for (const auto& t : c.terms) {
                const int k = fill[t.var]++;
                row_index[k] = i;
                col_value[k] = t.coef;
            }
            const int s = n + i;
            switch (c.sense) {
            case RowSense::less_equal: lo[s] = -kInfinity; up[s] = c.rhs; break;
            case RowSense::greater_equal: lo[s] = c.rhs; up[s] = kInfinity; break;
            case RowSense::equal: lo[s] = c.rhs; up[s] = c.rhs; break;
            }
        }
        x.assign(static_cast<std::size_t>(N), 0.0);
        state.assign(static_cast<std::size_t>(N), kAtLower);
        pos.assign(static_cast<std::size_t>(N), -1);
        head.assign(static_cast<std::size_t>(m), -1);
        work_m.resize(m);
        cb.assign(static_cast<std::size_t>(m), 0.0);
        y.assign(static_cast<std::size_t>(m), 0.0);
        alpha.assign(static_cast<std::size_t>(m), 0.0);
        reset_basis();
    }

    int N() const { return n + m; }

    void place_nonbasic(int j) {
        if (state[j] == kAtUpper && std::isfinite(up[j])) {
            x[j] = up[j];
        } else if (std::isfinite(lo[j])) {
            state[j] = kAtLower;
            x[j] = lo[j];
        } else {
            state[j] = kAtUpper;
            x[j] = up[j];
        }
    }

    void reset_basis() {
        for (int j = 0; j < n; ++j) {
            state[j] = kAtLower;
            pos[j] = -1;
            place_nonbasic(j);
        }
        for (int i = 0; i < m; ++i) {
            head[i] = n + i;
            state[n + i] = kBasic;
            pos[n + i] = i;
        }
        factored = false;
    }

    void load_basis(const Basis& b) {
        if (static_cast<int>(b.head.size()) != m || static_cast<int>(b.state.size()) != N())
            throw DimensionMismatch("basis does not match the LP dimensions");
        head = b.head;
        state = b.state;
        std::fill(pos.begin(), pos.end(), -1);
        for (int r = 0; r < m; ++r) pos[head[r]] = r;
        for (int j = 0; j < N(); ++j) {
            if (state[j] != kBasic) place_nonbasic(j);
        }
        factored = false;
    }

    Basis basis() const { return Basis{head, state}; }

    // ---- linear algebra -------------------------------------------------

    bool refactor() {
        etas.clear();
        factored = false;
        if (m == 0) return true;
        std::vector<Eigen::Triplet<double, int>> trip;
        trip.reserve(static_cast<std::size_t>(m) * 2);
        for (int r = 0; r < m; ++r) {
            const int j = head[r];
            if (j < n) {
                for (int k = col_start[j]; k < col_start[j + 1]; ++k) trip.emplace_back(row_index[k], r, col_value[k]);
            } else {
                trip.emplace_back(j - n, r, -1.0);
            }
        }
        SparseMat B(m, m);
        B.setFromTriplets(trip.begin(), trip.end());
        B.makeCompressed();
        lu.analyzePattern(B);
        lu.factorize(B);
        if (lu.info() != Eigen::Success) return false;
        factored = true;
        return true;
    }

    // alpha = B^-1 * column j
    void ftran_column(int j) {
        work_m.setZero();
        if (j < n) {
            for (int k = col_start[j]; k < col_start[j + 1]; ++k) work_m[row_index[k]] = col_value[k];
        } else {
            work_m[j - n] = -1.0;
        }
        ftran_work();
        for (int i = 0; i < m; ++i) alpha[i] = work_m[i];
    }

    void ftran_work() {
        Eigen::VectorXd z = lu.solve(work_m);
        for (const auto& e : etas) {
            const double zr = z[e.pos] / e.pivot;
            if (zr != 0.0) {
                for (std::size_t k = 0; k < e.index.size(); ++k) z[e.index[k]] -= e.value[k] * zr;
            }
            z[e.pos] = zr;
        }
        work_m = std::move(z);
    }

    // y = B^-T * cb
    void btran() {
        for (int i = 0; i < m; ++i) work_m[i] = cb[i];
        for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
            double s = 0.0;
            for (std::size_t k = 0; k < it->index.size(); ++k) s += it->value[k] * work_m[it->index[k]];
            work_m[it->pos] = (work_m[it->pos] - s) / it->pivot;
        }
        Eigen::VectorXd z = lu.transpose().solve(work_m);
        for (int i = 0; i < m; ++i) y[i] = z[i];
    }

    void recompute_basics() {
        if (m == 0) return;
        work_m.setZero();
        for (int j = 0; j < N(); ++j) {
            if (state[j] == kBasic || x[j] == 0.0) continue;
            if (j < n) {
                for (int k = col_start[j]; k < col_start[j + 1]; ++k) work_m[row_index[k]] -= col_value[k] * x[j];
            } else {
                work_m[j - n] += x[j];
            }
        }
        ftran_work();
        for (int r = 0; r < m; ++r) x[head[r]] = work_m[r];
    }

    double column_dot_y(int j) const {
        if (j >= n) return -y[j - n];
        double s = 0.0;
        for (int k = col_start[j]; k < col_start[j + 1]; ++k) s += col_value[k] * y[row_index[k]];
        return s;
    }

    // ---- simplex --------------------------------------------------------

    void ensure_factored(int& resets) {
        if (factored) return;
        while (!refactor()) {
            // Singular basis: fall back to the logical basis.
            if (++resets > 3) throw NumericalStall("basis matrix is singular and cannot be repaired");
            reset_basis();
        }
        recompute_basics();
    }

    LpResult solve() {
        LpResult result;
        if (m == 0) return solve_unconstrained();

        long iters = 0;
        int resets = 0;
        int degenerate_run = 0;
        bool bland = false;
        bool fresh = false;
        for (;;) {
            if (!factored || static_cast<int>(etas.size()) >= opt.refactor_interval) {
                factored = false;
                ensure_factored(resets);
                fresh = true;
            }

            // Phase selection and basic costs.
            double infeasibility = 0.0;
            bool phase1 = false;
            for (int r = 0; r < m; ++r) {
                const int j = head[r];
                const double v = x[j];
                if (v < lo[j] - tol_for(lo[j], opt.primal_tol)) {
                    cb[r] = -1.0;
                    infeasibility += lo[j] - v;
                    phase1 = true;
                } else if (v > up[j] + tol_for(up[j], opt.primal_tol)) {
                    cb[r] = 1.0;
                    infeasibility += v - up[j];
                    phase1 = true;
                } else {
                    cb[r] = 0.0;
                }
            }
            if (!phase1) {
                for (int r = 0; r < m; ++r) cb[r] = cost[head[r]];
            }
            btran();

            // Pricing.
            int q = -1;
            double best = 0.0;
            double dq = 0.0;
            for (int j = 0; j < N(); ++j) {
                const auto st = state[j];
                if (st == kBasic || lo[j] == up[j]) continue;
                const double cj = phase1 ? 0.0 : cost[j];
                const double d = cj - column_dot_y(j);
                const bool eligible = (st == kAtLower && d < -opt.dual_tol) || (st == kAtUpper && d > opt.dual_tol);
                if (!eligible) continue;
                if (bland) {
                    q = j;
                    dq = d;
                    break;
                }
                if (std::abs(d) > best) {
                    best = std::abs(d);
                    q = j;
                    dq = d;
                }
            }

            if (q < 0) {
                if (!fresh) {
                    factored = false; // confirm on a clean factorization
                    continue;
                }
                result.status = phase1 ? LpStatus::infeasible : LpStatus::optimal;
                break;
            }
            fresh = false;

            if (++iters > opt.max_iterations)
                throw NumericalStall("simplex pivot limit of " + std::to_string(opt.max_iterations) + " reached");

            const double dir = state[q] == kAtLower ? 1.0 : -1.0;
            ftran_column(q);

            // Ratio test. Basic r moves at rate g = -dir * alpha_r per unit step.
            auto breakpoint = [&](int r, double& target) -> bool {
                const double g = -dir * alpha[r];
                const int j = head[r];
                const double v = x[j];
                const double tl = tol_for(lo[j], opt.primal_tol);
                const double tu = tol_for(up[j], opt.primal_tol);
                if (g < 0.0) {
                    if (v > up[j] + tu) {
                        target = up[j];
                    } else if (v < lo[j] - tl || !std::isfinite(lo[j])) {
                        return false;
                    } else {
                        target = lo[j];
                    }
                } else {
                    if (v < lo[j] - tl) {
                        target = lo[j];
                    } else if (v > up[j] + tu || !std::isfinite(up[j])) {
                        return false;
                    } else {
                        target = up[j];
                    }
                }
                return true;
            };

            const double range = up[q] - lo[q];
            int leave = -1;
            double theta = kInfinity;
            double leave_target = 0.0;
            if (bland) {
                int leave_var = std::numeric_limits<int>::max();
                for (int r = 0; r < m; ++r) {
                    if (std::abs(alpha[r]) <= opt.pivot_tol) continue;
                    double target;
                    if (!breakpoint(r, target)) continue;
                    const double ratio = std::max(0.0, (target - x[head[r]]) / (-dir * alpha[r]));
                    if (ratio < theta - 1e-12 || (ratio <= theta + 1e-12 && head[r] < leave_var)) {
                        theta = ratio;
                        leave = r;
                        leave_var = head[r];
                        leave_target = target;
                    }
                }
            } else {
                double theta_max = kInfinity;
                for (int r = 0; r < m; ++r) {
                    if (std::abs(alpha[r]) <= opt.pivot_tol) continue;
                    double target;
                    if (!breakpoint(r, target)) continue;
                    const double g = -dir * alpha[r];
                    const double slack = tol_for(target, opt.primal_tol);
                    const double relaxed = g < 0.0 ? (x[head[r]] - target + slack) / (-g)
                                                   : (target - x[head[r]] + slack) / g;
                    theta_max = std::min(theta_max, relaxed);
                }
                double best_alpha = 0.0;
                for (int r = 0; r < m; ++r) {
                    const double a = std::abs(alpha[r]);
                    if (a <= opt.pivot_tol) continue;
                    double target;
                    if (!breakpoint(r, target)) continue;
                    const double ratio = (target - x[head[r]]) / (-dir * alpha[r]);
                    if (ratio <= theta_max && a > best_alpha) {
                        best_alpha = a;
                        leave = r;
                        theta = std::max(0.0, ratio);
                        leave_target = target;
                    }
                }
            }

            const bool flip = std::isfinite(range) && range <= theta;
            if (leave < 0 && !flip) {
                if (phase1) {
                    // Cannot happen in exact arithmetic; retry on a fresh factorization.
                    factored = false;
                    if (++resets > 3) throw NumericalStall("phase 1 ratio test found no blocking variable");
                    continue;
                }
                result.status = LpStatus::unbounded;
                break;
            }
            if (flip) theta = range;

            const double progress = theta * std::abs(dq);
            const double scale = std::max(1.0, phase1 ? infeasibility : std::abs(current_objective()));
            if (progress <= 1e-12 * scale) {
                if (++degenerate_run >= opt.stall_pivots) bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }

            if (theta > 0.0) {
                for (int r = 0; r < m; ++r) {
                    if (alpha[r] != 0.0) x[head[r]] -= dir * theta * alpha[r];
                }
                x[q] += dir * theta;
            }
            if (flip) {
                state[q] = dir > 0 ? kAtUpper : kAtLower;
                x[q] = dir > 0 ? up[q] : lo[q];
                continue;
            }

            const int out = head[leave];
            x[out] = leave_target;
            state[out] = leave_target == lo[out] ? kAtLower : kAtUpper;
            pos[out] = -1;
            head[leave] = q;
            state[q] = kBasic;
            pos[q] = leave;

            Eta eta;
            eta.pos = leave;
            eta.pivot = alpha[leave];
            for (int r = 0; r < m; ++r) {
                if (r != leave && std::abs(alpha[r]) > 1e-14) {
                    eta.index.push_back(r);
                    eta.value.push_back(alpha[r]);
                }
            }
            etas.push_back(std::move(eta));
        }

        total_iters += iters;
        result.iterations = iters;
        if (result.status == LpStatus::optimal) {
            result.values.assign(x.begin(), x.begin() + n);
            // Clip round-off so reported values respect their own bounds.
            for (int j = 0; j < n; ++j) result.values[j] = std::clamp(result.values[j], lo[j], up[j]);
            result.objective = offset;
            for (int j = 0; j < n; ++j) result.objective += cost[j] * result.values[j];
        }
        return result;
    }

    double current_objective() const {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += cost[j] * x[j];
        return s;
    }

    LpResult solve_unconstrained() {
        LpResult result;
        result.status = LpStatus::optimal;
        result.values.resize(static_cast<std::size_t>(n));
        result.objective = offset;
        for (int j = 0; j < n; ++j) {
            double v = lo[j];
            if (cost[j] < 0.0) {
                if (!std::isfinite(up[j])) {
                    result.status = LpStatus::unbounded;
                    result.values.clear();
                    return result;
                }
                v = up[j];
            }
            result.values[j] = v;
            result.objective += cost[j] * v;
        }
        for (int j = 0; j < n; ++j) {
            x[j] = result.values[j];
            state[j] = x[j] == lo[j] ? kAtLower : kAtUpper;
        }
        return result;
    }
};

SimplexSolver::SimplexSolver(const MilpModel& model, LpOptions options)
    : impl_(std::make_unique<Impl>(model, options)) {
    auto issues = model.validation_issues();
    if (!issues.empty()) throw Error("malformed model: " + issues.front());
}

SimplexSolver::~SimplexSolver() = default;
SimplexSolver::SimplexSolver(SimplexSolver&&) noexcept = default;
SimplexSolver& SimplexSolver::operator=(SimplexSolver&&) noexcept = default;

void SimplexSolver::set_bounds(int var, double lower, double upper) {
    auto& s = *impl_;
    if (var < 0 || var >= s.n) throw DimensionMismatch("variable index out of range");
    s.lo[var] = lower;
    s.up[var] = upper;
    // A basic variable pushed out of its new range is repaired by phase 1.
    if (s.state[var] != kBasic) s.place_nonbasic(var);
}

double SimplexSolver::lower(int var) const { return impl_->lo.at(static_cast<std::size_t>(var)); }
double SimplexSolver::upper(int var) const { return impl_->up.at(static_cast<std::size_t>(var)); }

void SimplexSolver::reset_bounds() {
    auto& s = *impl_;
    for (int j = 0; j < s.n; ++j) set_bounds(j, s.model_lo[j], s.model_up[j]);
}

LpResult SimplexSolver::solve() {
    auto& s = *impl_;
    // Nonbasic values depend only on bounds; basic values need a recompute
    // whenever nonbasic values may have moved.
    if (s.factored) s.recompute_basics();
    return s.solve();
}

Basis SimplexSolver::basis() const { return impl_->basis(); }
void SimplexSolver::load_basis(const Basis& basis) { impl_->load_basis(basis); }
void SimplexSolver::reset_basis() { impl_->reset_basis(); }
long SimplexSolver::total_iterations() const noexcept { return impl_->total_iters; }

LpResult solve_lp(const MilpModel& model, const LpOptions& options) {
    SimplexSolver solver(model, options);
    return solver.solve();
}

std::string to_string(LpStatus status) {
    switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

} // namespace evpv::milp
