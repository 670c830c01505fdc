// SPDX-License-Identifier: Apache-2.0
#include "evpv/milp/branch_and_bound.hpp"

#include "evpv/milp/audit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <memory>
#include <queue>

namespace evpv::milp {

namespace {

struct BoundChange {
    int var;
    double lower;
    double upper;
};

struct Node {
    long id = 0;
    int depth = 0;
    double bound = -kInfinity;
    double key = 0.0; // bound snapped to a grid so near-equal bounds tie
    std::vector<BoundChange> changes;
    std::shared_ptr<const Basis> warm;
};

// Lowest bound first; among ties the deepest, then the newest node.
struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.key != b.key) return a.key > b.key;
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.id < b.id;
    }
};

// Beyond this many open nodes children no longer keep their parent's basis.
constexpr std::size_t kMaxWarmNodes = 4000;

class BranchAndBound {
public:
    // `pinned` narrows binaries for a neighborhood search; `warm` and
    // `incumbent` seed it from the parent search.
    BranchAndBound(const MilpModel& model, const SolverConfig& config, const std::vector<BoundChange>& pinned = {},
                   const Basis* warm = nullptr, const std::vector<double>* incumbent = nullptr)
        : model_(model), config_(config), lp_(model, config.lp), start_(std::chrono::steady_clock::now()) {
        std::vector<char> is_pinned(static_cast<std::size_t>(model.num_variables()), 0);
        for (const auto& p : pinned) {
            lp_.set_bounds(p.var, p.lower, p.upper);
            is_pinned[static_cast<std::size_t>(p.var)] = 1;
        }
        free_mask_.assign(static_cast<std::size_t>(model.num_variables()), 0);
        for (int j = 0; j < model.num_variables(); ++j) {
            const auto& v = model.variable(j);
            if (v.kind == VarKind::binary && v.lower < v.upper && !is_pinned[static_cast<std::size_t>(j)]) {
                free_binaries_.push_back(j);
                free_mask_[static_cast<std::size_t>(j)] = 1;
            }
        }
        if (warm) lp_.load_basis(*warm);
        if (incumbent) {
            incumbent_ = *incumbent;
            incumbent_obj_ = model.evaluate_objective(incumbent_);
        }
        // Row locks: how many rows may become violated when the variable
        // moves up or down.
        up_locks_.assign(static_cast<std::size_t>(model.num_variables()), 0);
        down_locks_.assign(static_cast<std::size_t>(model.num_variables()), 0);
        columns_.resize(static_cast<std::size_t>(model.num_variables()));
        for (int i = 0; i < model.num_constraints(); ++i) {
            const auto& c = model.constraint(i);
            for (const auto& t : c.terms) {
                columns_[static_cast<std::size_t>(t.var)].emplace_back(i, t.coef);
                const bool pos = t.coef > 0.0;
                const auto j = static_cast<std::size_t>(t.var);
                if (c.sense != RowSense::greater_equal) ++(pos ? up_locks_[j] : down_locks_[j]);
                if (c.sense != RowSense::less_equal) ++(pos ? down_locks_[j] : up_locks_[j]);
            }
        }
    }

    MilpSolution run() {
        MilpSolution out;
        LpResult root;
        try {
            root = lp_.solve();
        } catch (const NumericalStall&) {
            lp_.reset_basis();
            root = lp_.solve();
        }
        if (root.status == LpStatus::infeasible) return finish(out, SolveStatus::infeasible);
        if (root.status == LpStatus::unbounded) return finish(out, SolveStatus::unbounded);

        nodes_ = 1; // the root
        key_quantum_ = 1e-9 * std::max(1.0, std::abs(root.objective));
        root_bound_ = root.objective;
        const auto root_basis = std::make_shared<const Basis>(lp_.basis());

        // Root heuristics stop as soon as the incumbent meets the gap target.
        auto done = [&] {
            return has_incumbent() && relative_gap(incumbent_obj_, root.objective) <= config_.rel_gap_tol;
        };
        source_ = "coefficient dive";
        dive({}, root, root_basis, DiveRule::coefficient);
        source_ = "fractional dive";
        if (!done()) dive({}, root, root_basis, DiveRule::fractional);
        source_ = "neighborhood";
        if (!done()) neighborhood(root.values, *root_basis);
        source_ = "cluster neighborhood";
        while (!done() && elapsed() < config_.time_limit_seconds && cluster_neighborhood(*root_basis)) {
        }
        lp_.load_basis(*root_basis);
        source_ = "node";

        Node first;
        first.id = next_id_++;
        first.bound = root.objective;
        first.key = snap(root.objective);
        first.warm = root_basis;
        open_.push(std::move(first));

        SolveStatus status = SolveStatus::optimal;
        for (;;) {
            if (has_incumbent() && relative_gap(incumbent_obj_, global_bound()) <= config_.rel_gap_tol) break;
            if (open_.empty()) break;
            if (elapsed() > config_.time_limit_seconds) {
                status = SolveStatus::time_limit;
                break;
            }
            if (nodes_ >= config_.max_nodes) {
                status = SolveStatus::node_limit;
                break;
            }
            Node node = open_.top();
            open_.pop();
            process(node);
        }

        if (!has_incumbent()) {
            if (status == SolveStatus::optimal) status = SolveStatus::infeasible;
            return finish(out, status);
        }
        out.values = incumbent_;
        out.objective = incumbent_obj_;
        out.bound = std::min(global_bound(), incumbent_obj_);
        out.gap = relative_gap(out.objective, out.bound);
        if (status == SolveStatus::optimal) {
            const bool closed = out.bound >= incumbent_obj_ - 1e-9 * std::max(1.0, std::abs(incumbent_obj_));
            status = closed ? SolveStatus::optimal : SolveStatus::gap_limit;
            if (closed) {
                out.bound = incumbent_obj_;
                out.gap = 0.0;
            }
        }
        return finish(out, status);
    }

private:
    bool has_incumbent() const { return !incumbent_.empty(); }

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    double snap(double bound) const { return std::floor(bound / key_quantum_); }

    double global_bound() const {
        double b = discarded_bound_;
        if (!open_.empty()) b = std::min(b, open_.top().bound);
        if (has_incumbent()) b = std::min(b, incumbent_obj_);
        return b;
    }

    // Nodes whose bound cannot beat the incumbent by more than the gap
    // tolerance are dropped; their bound still counts toward the global one.
    bool prunable(double bound) {
        if (!has_incumbent()) return false;
        const double strict = incumbent_obj_ - 1e-9 * std::max(1.0, std::abs(incumbent_obj_));
        if (bound >= strict) return true;
        const double loose = incumbent_obj_ - config_.rel_gap_tol * std::abs(incumbent_obj_);
        if (bound >= loose) {
            discarded_bound_ = std::min(discarded_bound_, bound);
            return true;
        }
        return false;
    }

    MilpSolution& finish(MilpSolution& out, SolveStatus status) {
        out.status = status;
        out.nodes = nodes_;
        out.lp_iterations = lp_.total_iterations();
        out.seconds = elapsed();
        if (!has_incumbent() && status != SolveStatus::infeasible && status != SolveStatus::unbounded) {
            out.bound = global_bound();
        }
        if (status == SolveStatus::infeasible) {
            out.bound = kInfinity;
        }
        return out;
    }

    void apply(const std::vector<BoundChange>& changes) {
        for (int j : free_binaries_) {
            const auto& v = model_.variable(j);
            lp_.set_bounds(j, v.lower, v.upper);
        }
        for (const auto& c : changes) lp_.set_bounds(c.var, c.lower, c.upper);
    }

    LpResult solve_guarded() {
        try {
            return lp_.solve();
        } catch (const NumericalStall&) {
            lp_.reset_basis();
            return lp_.solve();
        }
    }

    // Most fractional free binary, ties to the lowest id; -1 when integral.
    int branching_variable(const std::vector<double>& values) const {
        int best = -1;
        double best_frac = config_.integrality_tol;
        for (int j : free_binaries_) {
            if (lp_.lower(j) == lp_.upper(j)) continue;
            const double v = values[static_cast<std::size_t>(j)];
            const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
            if (frac > best_frac) {
                best_frac = frac;
                best = j;
            }
        }
        return best;
    }

    // Pins every free binary on which the incumbent and `lp_values` agree
    // and searches the remainder.
    void neighborhood(const std::vector<double>& lp_values, const Basis& warm) {
        if (!neighborhoods_enabled()) return;
        std::vector<BoundChange> pins;
        for (int j : free_binaries_) {
            const double inc = incumbent_[static_cast<std::size_t>(j)];
            if (std::abs(lp_values[static_cast<std::size_t>(j)] - inc) <= config_.integrality_tol)
                pins.push_back({j, inc, inc});
        }
        if (pins.size() == free_binaries_.size()) return;
        search_pinned(pins, warm);
    }

    // Frees the binaries found by a breadth-first walk over short shared rows from
    // the first binary not freed by an earlier walk, and pins the rest to the
    // incumbent. Successive calls sweep all free binaries; returns false
    // once a sweep is complete.
    bool cluster_neighborhood(const Basis& warm) {
        if (!neighborhoods_enabled() || config_.neighborhood_size <= 0) return false;
        const auto n = static_cast<std::size_t>(model_.num_variables());
        if (covered_.size() != n) covered_.assign(n, 0);
        int seed = -1;
        for (int j : free_binaries_)
            if (!covered_[static_cast<std::size_t>(j)]) {
                seed = j;
                break;
            }
        if (seed < 0) {
            covered_.assign(n, 0);
            return false;
        }
        std::vector<char> seen_var(n, 0), freed(n, 0);
        std::vector<char> seen_row(static_cast<std::size_t>(model_.num_constraints()), 0);
        std::deque<int> queue{seed};
        seen_var[static_cast<std::size_t>(seed)] = 1;
        long count = 0;
        while (!queue.empty() && count < config_.neighborhood_size) {
            const int j = queue.front();
            queue.pop_front();
            if (free_mask_[static_cast<std::size_t>(j)]) {
                freed[static_cast<std::size_t>(j)] = 1;
                covered_[static_cast<std::size_t>(j)] = 1;
                ++count;
            }
            for (const auto& [row, coef] : columns_[static_cast<std::size_t>(j)]) {
                if (seen_row[static_cast<std::size_t>(row)]) continue;
                seen_row[static_cast<std::size_t>(row)] = 1;
                if (static_cast<long>(model_.constraint(row).terms.size()) > config_.neighborhood_row_terms) continue;
                for (const auto& t : model_.constraint(row).terms)
                    if (!seen_var[static_cast<std::size_t>(t.var)]) {
                        seen_var[static_cast<std::size_t>(t.var)] = 1;
                        queue.push_back(t.var);
                    }
            }
        }
        std::vector<BoundChange> pins;
        for (int j : free_binaries_)
            if (!freed[static_cast<std::size_t>(j)]) {
                const double inc = incumbent_[static_cast<std::size_t>(j)];
                pins.push_back({j, inc, inc});
            }
        search_pinned(pins, warm);
        return true;
    }

    bool neighborhoods_enabled() const {
        return has_incumbent() && config_.neighborhood_interval > 0 && config_.neighborhood_nodes > 0;
    }

    void search_pinned(const std::vector<BoundChange>& pins, const Basis& warm) {
        SolverConfig sub = config_;
        sub.neighborhood_interval = 0;
        sub.max_nodes = config_.neighborhood_nodes;
        sub.time_limit_seconds = config_.time_limit_seconds - elapsed();
        sub.dive_interval = std::max<long>(1, config_.neighborhood_nodes / 8);
        sub.log = false;
        if (sub.time_limit_seconds <= 0.0) return;
        BranchAndBound inner(model_, sub, pins, &warm, &incumbent_);
        const auto found = inner.run();
        if (found.has_incumbent()) consider(found.values);
    }

    // Accepts an already-integral full vector when it improves the incumbent.
    void consider(const std::vector<double>& values) {
        const double obj = model_.evaluate_objective(values);
        if (has_incumbent() && obj >= incumbent_obj_ - 1e-12 * std::max(1.0, std::abs(obj))) return;
        incumbent_ = values;
        incumbent_obj_ = obj;
        if (config_.log)
            std::fprintf(stderr, "[bnb] %8.2fs nodes %ld incumbent %.8g bound %.8g (%s)\n", elapsed(), nodes_, obj,
                         nodes_ <= 1 && open_.empty() ? root_bound_ : global_bound(), source_);
    }

    void compute_activity(const std::vector<double>& values) {
        activity_.assign(static_cast<std::size_t>(model_.num_constraints()), 0.0);
        for (int i = 0; i < model_.num_constraints(); ++i) {
            double a = 0.0;
            for (const auto& t : model_.constraint(i).terms) a += t.coef * values[static_cast<std::size_t>(t.var)];
            activity_[static_cast<std::size_t>(i)] = a;
        }
    }

    void shift_activity(int j, double delta) {
        for (const auto& [row, coef] : columns_[static_cast<std::size_t>(j)]) activity_[static_cast<std::size_t>(row)] += coef * delta;
    }

    // Rows containing j that would be violated if x_j moved by delta with
    // everything else held at the activity snapshot.
    int rows_broken(int j, double delta) const {
        int broken = 0;
        for (const auto& [row, coef] : columns_[static_cast<std::size_t>(j)]) {
            const auto& c = model_.constraint(row);
            const double a = activity_[static_cast<std::size_t>(row)] + coef * delta;
            const double tol = config_.feasibility_tol * std::max(1.0, std::abs(c.rhs));
            if ((c.sense != RowSense::greater_equal && a > c.rhs + tol) ||
                (c.sense != RowSense::less_equal && a < c.rhs - tol))
                ++broken;
        }
        return broken;
    }

    // Re-solves with every binary pinned to its rounded value so the
    // continuous part is consistent with exact 0/1 values.
    void offer_incumbent(const std::vector<double>& values) {
        std::vector<std::pair<double, double>> saved;
        saved.reserve(free_binaries_.size());
        for (int j : free_binaries_) {
            saved.emplace_back(lp_.lower(j), lp_.upper(j));
            const double r = std::round(values[static_cast<std::size_t>(j)]);
            lp_.set_bounds(j, r, r);
        }
        LpResult polished;
        try {
            polished = lp_.solve();
        } catch (const NumericalStall&) {
            polished.status = LpStatus::infeasible;
        }
        for (std::size_t k = 0; k < free_binaries_.size(); ++k)
            lp_.set_bounds(free_binaries_[k], saved[k].first, saved[k].second);
        if (polished.status != LpStatus::optimal) return;
        for (int j : free_binaries_) polished.values[static_cast<std::size_t>(j)] = std::round(polished.values[j]);
        consider(polished.values);
    }

    enum class DiveRule { fractional, coefficient };

    // Diving from a node LP solution: repeatedly pin a batch of fractional
    // binaries and re-solve until the LP is integral. `fractional` rounds the
    // least fractional binaries to their nearest value; `coefficient` rounds
    // each binary toward the side with fewer row locks, preferring binaries
    // with the fewest locks.
    void dive(const std::vector<BoundChange>& node_changes, LpResult current,
              const std::shared_ptr<const Basis>& restore, DiveRule rule) {
        std::vector<BoundChange> pinned;
        bool retried = false;
        const std::size_t depth_limit = free_binaries_.size() + 1;
        for (std::size_t step = 0; step < depth_limit; ++step) {
            if (elapsed() > config_.time_limit_seconds) break;
            if (current.status != LpStatus::optimal) break;
            if (has_incumbent() && current.objective >= incumbent_obj_) break;

            struct Candidate {
                double key1, key2;
                int var;
                double target;
            };
            if (rule == DiveRule::coefficient) compute_activity(current.values);
            std::vector<Candidate> cands;
            for (int j : free_binaries_) {
                if (lp_.lower(j) == lp_.upper(j)) continue;
                const double v = current.values[static_cast<std::size_t>(j)];
                const double f = std::abs(v - std::round(v));
                if (f <= config_.integrality_tol) continue;
                if (rule == DiveRule::fractional) {
                    cands.push_back({f, 0.0, j, std::round(v)});
                    continue;
                }
                // Prefer the side that keeps every row satisfied at the
                // current point, then the side with fewer static locks.
                const int viol_up = rows_broken(j, 1.0 - v), viol_down = rows_broken(j, -v);
                const auto uj = static_cast<std::size_t>(j);
                bool go_up;
                if (viol_up != viol_down) go_up = viol_up < viol_down;
                else if (up_locks_[uj] != down_locks_[uj]) go_up = up_locks_[uj] < down_locks_[uj];
                else go_up = v >= 0.5;
                cands.push_back({static_cast<double>(go_up ? viol_up : viol_down), go_up ? 1.0 - v : v, j,
                                 go_up ? 1.0 : 0.0});
            }
            if (cands.empty()) {
                offer_incumbent(current.values);
                break;
            }
            std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
                if (a.key1 != b.key1) return a.key1 < b.key1;
                if (a.key2 != b.key2) return a.key2 < b.key2;
                return a.var < b.var;
            });
            const std::size_t batch = retried ? 1 : std::max<std::size_t>(1, cands.size() / 8);
            std::vector<BoundChange> fixes;
            for (const auto& c : cands) {
                if (fixes.size() >= batch) break;
                if (rule == DiveRule::coefficient) {
                    // Batch members must not jointly break a row.
                    const double delta = c.target - current.values[static_cast<std::size_t>(c.var)];
                    if (!fixes.empty() && rows_broken(c.var, delta) > 0) continue;
                    shift_activity(c.var, delta);
                }
                fixes.push_back({c.var, c.target, c.target});
            }
            for (const auto& f : fixes) lp_.set_bounds(f.var, f.lower, f.upper);
            LpResult next = solve_guarded();
            if (next.status != LpStatus::optimal) {
                for (const auto& f : fixes) {
                    const auto& v = model_.variable(f.var);
                    lp_.set_bounds(f.var, v.lower, v.upper);
                }
                for (const auto& p : pinned) lp_.set_bounds(p.var, p.lower, p.upper);
                for (const auto& c : node_changes) lp_.set_bounds(c.var, c.lower, c.upper);
                if (batch > 1) {
                    retried = true;
                    current = solve_guarded();
                    continue;
                }
                // Single pin failed: try the other side once.
                const int j = fixes.front().var;
                const double other = 1.0 - fixes.front().lower;
                lp_.set_bounds(j, other, other);
                next = solve_guarded();
                if (next.status != LpStatus::optimal) break;
                fixes.front() = {j, other, other};
            }
            // A single pin that costs objective gets compared with its
            // opposite value; the cheaper side stays.
            if (fixes.size() == 1 && next.status == LpStatus::optimal &&
                next.objective > current.objective + 1e-9 * std::max(1.0, std::abs(current.objective))) {
                const int j = fixes.front().var;
                const double other = 1.0 - fixes.front().lower;
                const Basis keep = lp_.basis();
                lp_.set_bounds(j, other, other);
                LpResult alt = solve_guarded();
                if (alt.status == LpStatus::optimal && alt.objective < next.objective) {
                    next = std::move(alt);
                    fixes.front() = {j, other, other};
                } else {
                    lp_.set_bounds(j, fixes.front().lower, fixes.front().upper);
                    lp_.load_basis(keep);
                    next = solve_guarded();
                }
            }
            pinned.insert(pinned.end(), fixes.begin(), fixes.end());
            current = std::move(next);
        }
        apply(node_changes);
        if (restore) lp_.load_basis(*restore);
    }

    void process(const Node& node) {
        if (prunable(node.bound)) return;
        if (node.depth > 0) ++nodes_;
        apply(node.changes);
        if (node.warm) lp_.load_basis(*node.warm);
        LpResult lp;
        try {
            lp = solve_guarded();
        } catch (const NumericalStall&) {
            // Give up on this subtree but keep its bound honest.
            discarded_bound_ = std::min(discarded_bound_, node.bound);
            return;
        }
        if (lp.status != LpStatus::optimal) return;
        const double bound = std::max(lp.objective, node.bound);
        if (prunable(bound)) return;

        const int j = branching_variable(lp.values);
        if (j < 0) {
            offer_incumbent(lp.values);
            return;
        }

        std::shared_ptr<const Basis> basis;
        if (open_.size() < kMaxWarmNodes) basis = std::make_shared<const Basis>(lp_.basis());

        if (config_.neighborhood_interval > 0 && nodes_ % config_.neighborhood_interval == 0 && basis) {
            const bool rins = (nodes_ / config_.neighborhood_interval) % 2 == 1;
            source_ = rins ? "neighborhood" : "cluster neighborhood";
            if (rins) neighborhood(lp.values, *basis);
            else cluster_neighborhood(*basis);
            apply(node.changes);
            lp_.load_basis(*basis);
            source_ = "node";
        }
        if (config_.dive_interval > 0 && nodes_ % config_.dive_interval == 0) {
            const bool coef = (nodes_ / config_.dive_interval) % 2 == 1;
            source_ = coef ? "coefficient dive" : "fractional dive";
            dive(node.changes, lp, basis, coef ? DiveRule::coefficient : DiveRule::fractional);
            source_ = "node";
        }

        for (double value : {0.0, 1.0}) {
            Node child;
            child.id = next_id_++;
            child.depth = node.depth + 1;
            child.bound = bound;
            child.key = snap(bound);
            child.changes = node.changes;
            child.changes.push_back({j, value, value});
            child.warm = basis;
            open_.push(std::move(child));
        }
    }

    const MilpModel& model_;
    SolverConfig config_;
    SimplexSolver lp_;
    std::chrono::steady_clock::time_point start_;
    std::vector<int> free_binaries_;
    std::vector<char> free_mask_, covered_;
    std::vector<int> up_locks_, down_locks_;
    std::vector<std::vector<std::pair<int, double>>> columns_;
    std::vector<double> activity_;
    const char* source_ = "node";
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open_;
    std::vector<double> incumbent_;
    double incumbent_obj_ = kInfinity;
    double discarded_bound_ = kInfinity;
    double root_bound_ = -kInfinity; // reported while the queue is still empty
    double key_quantum_ = 1e-9;
    long next_id_ = 0;
    long nodes_ = 0;
};

} // namespace

double relative_gap(double incumbent, double bound) noexcept {
    if (!std::isfinite(incumbent) || !std::isfinite(bound)) return kInfinity;
    return std::abs(incumbent - bound) / std::max(std::abs(incumbent), 1e-9);
}

MilpSolution solve_milp(const MilpModel& model, const SolverConfig& config) {
    auto issues = model.validation_issues();
    if (!issues.empty()) throw Error("malformed model: " + issues.front());
    BranchAndBound bnb(model, config);
    return bnb.run();
}

MilpSolution solve_milp(const MilpModel& model, const SolverConfig& config, const std::vector<double>& start) {
    auto issues = model.validation_issues();
    if (!issues.empty()) throw Error("malformed model: " + issues.front());
    std::vector<double> seed = start;
    bool usable = static_cast<int>(seed.size()) == model.num_variables();
    if (usable) {
        for (int j = 0; j < model.num_variables(); ++j)
            if (model.variable(j).kind == VarKind::binary) {
                auto& x = seed[static_cast<std::size_t>(j)];
                x = x >= 0.5 ? 1.0 : 0.0;
            }
        usable = audit(model, seed, config.feasibility_tol).clean();
    }
    BranchAndBound bnb(model, config, {}, nullptr, usable ? &seed : nullptr);
    return bnb.run();
}

std::string to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::gap_limit: return "gap_limit";
    case SolveStatus::time_limit: return "time_limit";
    case SolveStatus::node_limit: return "node_limit";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

} // namespace evpv::milp
