#include "gocleak/policy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>

#include "gocleak/errors.hpp"

namespace gocleak {

void PlannerConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError(fmt::format("gamma {} outside [0, 1)", gamma));
    if (!(beta >= 0.0)) throw DomainError(fmt::format("beta {} must be nonnegative", beta));
    if (t_max < 1) throw DomainError(fmt::format("t_max {} must be positive", t_max));
    if (!(value_tolerance > 0.0)) throw DomainError("value_tolerance must be positive");
    if (max_iterations < 1) throw DomainError("max_iterations must be positive");
}

SchedulingFunction::SchedulingFunction(std::vector<int> intervals, int t_max)
    : intervals_(std::move(intervals)), t_max_(t_max) {
    if (t_max_ < 1) throw DomainError("t_max must be positive");
    for (std::size_t s = 0; s < intervals_.size(); ++s)
        if (intervals_[s] < 1 || intervals_[s] > t_max_)
            throw DomainError(fmt::format("sigma({}) = {} outside [1, {}]", s + 1, intervals_[s], t_max_));
}

JointPolicy::JointPolicy(int num_states, int t_max, std::vector<std::uint8_t> transmit_map, ControlPlan control)
    : num_states_(num_states), t_max_(t_max), transmit_(std::move(transmit_map)), control_(std::move(control)) {
    if (transmit_.size() != static_cast<std::size_t>(num_states) * (t_max + 1))
        throw DomainError("transmit map has the wrong size");
    if (control_.num_states() != num_states || control_.horizon() != t_max)
        throw DomainError("control map has the wrong shape");
    for (int s = 0; s < num_states; ++s)
        if (!transmit(s, t_max)) throw DomainError(fmt::format("psi({}, t_max) must be 1", s + 1));
}

JointPolicy JointPolicy::from_schedule(const SchedulingFunction& sigma, ControlPlan control) {
    const int n = sigma.num_states();
    const int t_max = sigma.t_max();
    std::vector<std::uint8_t> transmit(static_cast<std::size_t>(n) * (t_max + 1), 0);
    for (int s = 0; s < n; ++s)
        for (int d = sigma(s); d <= t_max; ++d) transmit[static_cast<std::size_t>(s) * (t_max + 1) + d] = 1;
    return {n, t_max, std::move(transmit), std::move(control)};
}

bool JointPolicy::transmit(int state_index, int delta) const {
    if (state_index < 0 || state_index >= num_states_ || delta < 0 || delta > t_max_)
        throw DomainError(fmt::format("psi({}, {}) out of range", state_index + 1, delta));
    return transmit_[static_cast<std::size_t>(state_index) * (t_max_ + 1) + delta] != 0;
}

SchedulingFunction extract_sigma(const JointPolicy& policy) {
    std::vector<int> intervals(policy.num_states(), policy.t_max());
    for (int s = 0; s < policy.num_states(); ++s) {
        for (int d = 1; d <= policy.t_max(); ++d) {
            if (policy.transmit(s, d)) {
                intervals[s] = d;
                break;
            }
        }
    }
    return {std::move(intervals), policy.t_max()};
}

double policy_entropy(const SchedulingFunction& sigma) {
    std::map<int, int> counts;
    for (int tau : sigma.intervals()) ++counts[tau];
    const double n = sigma.num_states();
    double h = 0.0;
    for (const auto& [tau, count] : counts) {
        const double p = count / n;
        h -= p * std::log2(p);
    }
    return std::max(0.0, h);
}

SchedulingFunction single_state_deviation(const SchedulingFunction& sigma, int state_index, int tau) {
    if (tau < 1 || tau > sigma.t_max())
        throw DomainError(fmt::format("deviation interval {} outside [1, {}]", tau, sigma.t_max()));
    if (state_index < 0 || state_index >= sigma.num_states())
        throw DomainError(fmt::format("deviation state {} out of range", state_index + 1));
    std::vector<int> intervals = sigma.intervals();
    intervals[state_index] = tau;
    return {std::move(intervals), sigma.t_max()};
}

double stage_reward(const MarkovModel& model, std::span<const double> belief) {
    if (model.scenario() == Scenario::Estimation) return *std::max_element(belief.begin(), belief.end());
    return simd::dot(belief, model.control_rewards());
}

Belief value_weights(const MarkovModel& model) {
    return steady_state(model, ControlPlan::no_op(model.num_states()));
}

namespace {

using Plan = ScheduleSolver::Plan;

double tie_tolerance(double value) { return 1e-12 * std::max(1.0, std::abs(value)); }

// Lexicographic order on (interval, actions): the preferred plan among ties.
bool key_less(int tau_a, std::span<const int> actions_a, int tau_b, std::span<const int> actions_b) {
    if (tau_a != tau_b) return tau_a < tau_b;
    return std::lexicographical_compare(actions_a.begin(), actions_a.end(), actions_b.begin(), actions_b.end());
}

// Full-information upper bounds: exact_[k][s] is the best value obtainable
// when the true state is known, exactly k steps remain before the next
// report, and the report is worth -beta + V(s) on arrival.
class UpperBounds {
public:
    UpperBounds(const MarkovModel& model, const PlannerConfig& config, std::span<const double> values) {
        const int n = model.num_states();
        exact_.assign(config.t_max + 1, Vector(n));
        for (int s = 0; s < n; ++s) exact_[0][s] = -config.beta + values[s];
        Vector next(n);
        for (int k = 1; k <= config.t_max; ++k) {
            for (int s = 0; s < n; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < model.num_actions(); ++a)
                    best = std::max(best, simd::dot(model.transition(a).row(s), exact_[k - 1]));
                const double reward =
                    model.scenario() == Scenario::Estimation ? 1.0 : model.control_rewards()[s];
                exact_[k][s] = reward + config.gamma * best;
            }
        }
    }

    const Vector& exact(int k) const { return exact_[k]; }

private:
    std::vector<Vector> exact_;
};

class AnchorSearch {
public:
    AnchorSearch(const MarkovModel& model, const PlannerConfig& config, const UpperBounds& bounds,
                 std::span<const double> values, int anchor, int lo, int hi)
        : model_(model), config_(config), values_(values), lo_(lo), hi_(hi) {
        const int n = model.num_states();
        beliefs_.assign(hi + 1, Belief(n));
        beliefs_[0] = point_belief(n, anchor);
        prefix_.assign(hi, 0);
        gamma_pow_.assign(hi + 1, 1.0);
        for (int d = 1; d <= hi; ++d) gamma_pow_[d] = gamma_pow_[d - 1] * config.gamma;
        // continuation_[d][s]: bound on what is still reachable from depth d
        // (strictly deeper reports only), excluding the gamma^d factor.
        continuation_.assign(hi, Vector(n, -std::numeric_limits<double>::infinity()));
        for (int d = 0; d < hi; ++d)
            for (int tau = std::max(lo, d + 1); tau <= hi; ++tau)
                for (int s = 0; s < n; ++s)
                    continuation_[d][s] = std::max(continuation_[d][s], bounds.exact(tau - d)[s]);
    }

    Plan run() {
        visit(0, 0.0);
        Plan plan;
        plan.interval = best_tau_;
        plan.actions = best_actions_;
        plan.immediate = best_immediate_;
        plan.landing = best_landing_;
        return plan;
    }

private:
    void visit(int depth, double accumulated) {
        const Belief& b = beliefs_[depth];
        if (depth >= lo_ && depth >= 1) {
            const double candidate =
                accumulated + gamma_pow_[depth] * (-config_.beta + simd::dot(b, values_));
            consider(depth, candidate, accumulated);
        }
        if (depth == hi_) return;
        if (best_tau_ > 0) {
            const double bound = accumulated + gamma_pow_[depth] * simd::dot(b, continuation_[depth]);
            if (bound < best_value_ - tie_tolerance(best_value_)) return;
        }
        const double next_accumulated = accumulated + gamma_pow_[depth] * stage_reward(model_, b);
        for (int a = 0; a < model_.num_actions(); ++a) {
            prefix_[depth] = a;
            vec_mat(b, model_.transition(a), beliefs_[depth + 1]);
            visit(depth + 1, next_accumulated);
        }
    }

    void consider(int depth, double candidate, double accumulated) {
        const std::span<const int> actions(prefix_.data(), depth);
        bool take = best_tau_ == 0 || candidate > best_value_ + tie_tolerance(best_value_);
        if (!take && std::abs(candidate - best_value_) <= tie_tolerance(best_value_))
            take = key_less(depth, actions, best_tau_, best_actions_);
        if (!take) return;
        best_value_ = candidate;
        best_tau_ = depth;
        best_actions_.assign(actions.begin(), actions.end());
        best_immediate_ = accumulated;
        best_landing_ = beliefs_[depth];
    }

    const MarkovModel& model_;
    const PlannerConfig& config_;
    std::span<const double> values_;
    int lo_;
    int hi_;
    std::vector<Belief> beliefs_;
    std::vector<int> prefix_;
    std::vector<double> gamma_pow_;
    std::vector<Vector> continuation_;

    double best_value_ = -std::numeric_limits<double>::infinity();
    int best_tau_ = 0;
    std::vector<int> best_actions_;
    double best_immediate_ = 0.0;
    Belief best_landing_;
};

// Plan value against a continuation value vector.
double plan_value(const PlannerConfig& config, const Plan& plan, std::span<const double> values) {
    return plan.immediate +
           std::pow(config.gamma, plan.interval) * (-config.beta + simd::dot(plan.landing, values));
}

Plan make_plan(const MarkovModel& model, const PlannerConfig& config, int anchor, std::vector<int> actions) {
    Plan plan;
    plan.interval = static_cast<int>(actions.size());
    plan.actions = std::move(actions);
    Belief b = point_belief(model.num_states(), anchor);
    Belief next(b.size());
    double discount = 1.0;
    for (int d = 0; d < plan.interval; ++d) {
        plan.immediate += discount * stage_reward(model, b);
        discount *= config.gamma;
        const int a = model.num_actions() == 1 ? 0 : plan.actions[d];
        vec_mat(b, model.transition(a), next);
        b.swap(next);
    }
    plan.landing = std::move(b);
    return plan;
}

struct Ranges {
    std::vector<int> lo;
    std::vector<int> hi;
};

// Policy iteration over anchor plans; plans are improved in place.
void policy_iteration(const MarkovModel& model, const PlannerConfig& config, const Ranges& ranges,
                      std::vector<Plan>& plans, Vector& values) {
    const int n = model.num_states();
    values = detail::evaluate_plans(config, plans);
    for (int iteration = 0;; ++iteration) {
        if (iteration >= config.max_iterations)
            throw NumericalError(fmt::format("policy iteration did not converge within {} iterations",
                                             config.max_iterations));
        const UpperBounds bounds(model, config, values);
        bool changed = false;
        for (int s = 0; s < n; ++s) {
            AnchorSearch search(model, config, bounds, values, s, ranges.lo[s], ranges.hi[s]);
            Plan candidate = search.run();
            const double current = plan_value(config, plans[s], values);
            const double proposed = plan_value(config, candidate, values);
            if (proposed > current + std::max(tie_tolerance(current), 1e-3 * config.value_tolerance)) {
                plans[s] = std::move(candidate);
                changed = true;
            }
        }
        if (!changed) break;
        values = detail::evaluate_plans(config, plans);
    }
    // Canonical representative among tied optimal plans.
    const UpperBounds bounds(model, config, values);
    for (int s = 0; s < n; ++s) {
        AnchorSearch search(model, config, bounds, values, s, ranges.lo[s], ranges.hi[s]);
        plans[s] = search.run();
    }
    values = detail::evaluate_plans(config, plans);
}

std::vector<Plan> initial_plans(const MarkovModel& model, const PlannerConfig& config, const Ranges& ranges) {
    std::vector<Plan> plans;
    for (int s = 0; s < model.num_states(); ++s)
        plans.push_back(make_plan(model, config, s, std::vector<int>(ranges.hi[s], 0)));
    return plans;
}

double weighted(std::span<const double> weights, std::span<const double> values) {
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * values[i];
    return total;
}

SolvedPolicy to_solved(const MarkovModel& model, const PlannerConfig& config, const std::vector<Plan>& plans,
                       const Vector& values, std::span<const double> weights) {
    const int n = model.num_states();
    std::vector<int> intervals(n);
    ControlPlan control(n, config.t_max, 0);
    for (int s = 0; s < n; ++s) {
        intervals[s] = plans[s].interval;
        if (model.scenario() == Scenario::Control)
            for (int d = 0; d < plans[s].interval; ++d) control.set(s, d, plans[s].actions[d]);
    }
    SolvedPolicy out{JointPolicy::from_schedule(SchedulingFunction(std::move(intervals), config.t_max),
                                                std::move(control)),
                     PolicyValue{values, weighted(weights, values)}};
    return out;
}

SolvedPolicy solve_ranges(const MarkovModel& model, const PlannerConfig& config, const Ranges& ranges) {
    config.validate();
    std::vector<Plan> plans = initial_plans(model, config, ranges);
    Vector values;
    policy_iteration(model, config, ranges, plans, values);
    return to_solved(model, config, plans, values, value_weights(model));
}

Ranges fixed_ranges(const SchedulingFunction& sigma) {
    return Ranges{sigma.intervals(), sigma.intervals()};
}

}  // namespace

namespace detail {

ScheduleSolver::Plan best_anchor_plan(const MarkovModel& model, const PlannerConfig& config, int anchor,
                                      int min_interval, int max_interval, std::span<const double> values) {
    const UpperBounds bounds(model, config, values);
    AnchorSearch search(model, config, bounds, values, anchor, min_interval, max_interval);
    return search.run();
}

Vector evaluate_plans(const PlannerConfig& config, const std::vector<ScheduleSolver::Plan>& plans) {
    const int n = static_cast<int>(plans.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (int s = 0; s < n; ++s) {
        const double discount = std::pow(config.gamma, plans[s].interval);
        for (int t = 0; t < n; ++t) system(s, t) -= discount * plans[s].landing[t];
        rhs(s) = plans[s].immediate - discount * config.beta;
    }
    const Eigen::VectorXd solution = system.partialPivLu().solve(rhs);
    return Vector(solution.data(), solution.data() + n);
}

}  // namespace detail

SolvedPolicy solve_goc(const MarkovModel& model, const PlannerConfig& config) {
    const int n = model.num_states();
    return solve_ranges(model, config, Ranges{std::vector<int>(n, 1), std::vector<int>(n, config.t_max)});
}

SolvedPolicy solve_for_schedule(const MarkovModel& model, const SchedulingFunction& sigma,
                                const PlannerConfig& config) {
    if (sigma.t_max() != config.t_max) throw DomainError("schedule and planner disagree on t_max");
    return solve_ranges(model, config, fixed_ranges(sigma));
}

SolvedPolicy solve_fixed_period(const MarkovModel& model, int period, const PlannerConfig& config) {
    return solve_for_schedule(model, SchedulingFunction::constant(model.num_states(), period, config.t_max),
                              config);
}

PeriodicSolution solve_periodic(const MarkovModel& model, const PlannerConfig& config) {
    PeriodicSolution best;
    bool have = false;
    for (int period = 1; period <= config.t_max; ++period) {
        SolvedPolicy solved = solve_fixed_period(model, period, config);
        best.expected_by_period.push_back(solved.value.expected);
        if (!have || solved.value.expected > best.solution.value.expected + tie_tolerance(best.solution.value.expected)) {
            best.period = period;
            best.solution = std::move(solved);
            have = true;
        }
    }
    return best;
}

PolicyValue evaluate_policy(const MarkovModel& model, const SchedulingFunction& sigma, const JointPolicy& policy,
                            const PlannerConfig& config) {
    config.validate();
    if (sigma.num_states() != model.num_states()) throw DomainError("schedule size does not match the model");
    std::vector<Plan> plans;
    for (int s = 0; s < model.num_states(); ++s) {
        std::vector<int> actions(sigma(s));
        for (int d = 0; d < sigma(s); ++d) actions[d] = policy.control(s, d);
        plans.push_back(make_plan(model, config, s, std::move(actions)));
    }
    Vector values = detail::evaluate_plans(config, plans);
    const double expected = weighted(value_weights(model), values);
    return {std::move(values), expected};
}

ScheduleSolver::ScheduleSolver(const MarkovModel& model, const PlannerConfig& config, SchedulingFunction sigma)
    : model_(model), config_(config), sigma_(std::move(sigma)), weights_(value_weights(model)) {
    config_.validate();
    const Ranges ranges = fixed_ranges(sigma_);
    plans_ = initial_plans(model_, config_, ranges);
    values_ = detail::evaluate_plans(config_, plans_);
    expected_ = weighted(weights_, values_);
}

void ScheduleSolver::solve() {
    policy_iteration(model_, config_, fixed_ranges(sigma_), plans_, values_);
    expected_ = weighted(weights_, values_);
}

double ScheduleSolver::score_deviation(int anchor, int tau) const {
    if (tau == sigma_(anchor)) return expected_;
    std::vector<Plan> plans = plans_;
    plans[anchor] = detail::best_anchor_plan(model_, config_, anchor, tau, tau, values_);
    return weighted(weights_, detail::evaluate_plans(config_, plans));
}

void ScheduleSolver::apply_deviation(int anchor, int tau) {
    sigma_ = single_state_deviation(sigma_, anchor, tau);
    plans_[anchor] = detail::best_anchor_plan(model_, config_, anchor, tau, tau, values_);
    solve();
}

SolvedPolicy ScheduleSolver::result() const { return to_solved(model_, config_, plans_, values_, weights_); }

}  // namespace gocleak
