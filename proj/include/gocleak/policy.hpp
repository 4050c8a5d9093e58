#pragma once

#include <cstdint>
#include <vector>

#include "gocleak/markov.hpp"

namespace gocleak {

struct PlannerConfig {
    double gamma = 0.9;
    double beta = 1.0;
    int t_max = 10;
    double value_tolerance = 1e-9;
    int max_iterations = 100'000;

    void validate() const;
};

// Inter-transmission interval chosen after each state report: interval[i] is
// sigma(i + 1), always in {1..t_max}.
class SchedulingFunction {
public:
    SchedulingFunction() = default;
    SchedulingFunction(std::vector<int> intervals, int t_max);

    static SchedulingFunction constant(int num_states, int interval, int t_max) {
        return {std::vector<int>(num_states, interval), t_max};
    }

    int operator()(int state_index) const { return intervals_.at(state_index); }
    int t_max() const { return t_max_; }
    int num_states() const { return static_cast<int>(intervals_.size()); }
    const std::vector<int>& intervals() const { return intervals_; }

    friend bool operator==(const SchedulingFunction&, const SchedulingFunction&) = default;

private:
    std::vector<int> intervals_;
    int t_max_ = 0;
};

// Transmit map psi(s, delta) for 0 <= delta <= t_max and control map
// pi(s, delta) for 0 <= delta < t_max. psi(s, t_max) = 1 always.
class JointPolicy {
public:
    JointPolicy() = default;
    JointPolicy(int num_states, int t_max, std::vector<std::uint8_t> transmit, ControlPlan control);

    // psi(s, delta) = 1 iff delta >= sigma(s).
    static JointPolicy from_schedule(const SchedulingFunction& sigma, ControlPlan control);

    int num_states() const { return num_states_; }
    int t_max() const { return t_max_; }
    bool transmit(int state_index, int delta) const;
    int control(int state_index, int delta) const { return control_.action(state_index, delta); }
    const ControlPlan& control_plan() const { return control_; }

    friend bool operator==(const JointPolicy&, const JointPolicy&) = default;

private:
    int num_states_ = 0;
    int t_max_ = 0;
    std::vector<std::uint8_t> transmit_;
    ControlPlan control_;
};

SchedulingFunction extract_sigma(const JointPolicy& policy);

// Entropy (bits) of the distribution of sigma values across states.
double policy_entropy(const SchedulingFunction& sigma);

SchedulingFunction single_state_deviation(const SchedulingFunction& sigma, int state_index, int tau);

struct PolicyValue {
    Vector per_anchor;      // discounted return right after a report of each state
    double expected = 0.0;  // per_anchor weighted by the passive steady state
};

struct SolvedPolicy {
    JointPolicy policy;
    PolicyValue value;
};

// Jointly optimal transmit/control policy over the (last report, elapsed) statistic.
SolvedPolicy solve_goc(const MarkovModel& model, const PlannerConfig& config);

// Best control for a fixed schedule (transmissions forced at delta = sigma(s)).
SolvedPolicy solve_for_schedule(const MarkovModel& model, const SchedulingFunction& sigma,
                                const PlannerConfig& config);

struct PeriodicSolution {
    int period = 1;
    SolvedPolicy solution;
    std::vector<double> expected_by_period;  // index T - 1
};

SolvedPolicy solve_fixed_period(const MarkovModel& model, int period, const PlannerConfig& config);

// Best fixed-period policy over T in {1..t_max}; ties go to the smaller T.
PeriodicSolution solve_periodic(const MarkovModel& model, const PlannerConfig& config);

// Exact discounted value of running `policy`'s control with transmissions at sigma.
PolicyValue evaluate_policy(const MarkovModel& model, const SchedulingFunction& sigma,
                            const JointPolicy& policy, const PlannerConfig& config);

// Expected task reward collected at a step where Bob holds `belief` and acts
// optimally for that step (MAP estimate, or the state reward in control).
double stage_reward(const MarkovModel& model, std::span<const double> belief);

// Steady state used to weight anchor values into a single number.
Belief value_weights(const MarkovModel& model);

// Incremental solver for a fixed schedule. Keeps the per-anchor plans and the
// value vector so that single-anchor changes can be re-solved cheaply.
class ScheduleSolver {
public:
    ScheduleSolver(const MarkovModel& model, const PlannerConfig& config, SchedulingFunction sigma);

    // Policy iteration to convergence from the current plans.
    void solve();

    // Value of the schedule with `anchor` moved to interval `tau`: the moved
    // anchor gets its best plan against the current value vector, every other
    // anchor keeps its plan, and the result is evaluated exactly.
    double score_deviation(int anchor, int tau) const;

    // Replace sigma(anchor) by tau, then re-solve.
    void apply_deviation(int anchor, int tau);

    const SchedulingFunction& sigma() const { return sigma_; }
    SolvedPolicy result() const;
    double expected_value() const { return expected_; }

    struct Plan {
        int interval = 1;
        std::vector<int> actions;  // one per step before the next report
        double immediate = 0.0;    // discounted task reward before the report
        Belief landing;            // state distribution at the report
    };

private:
    const MarkovModel& model_;
    PlannerConfig config_;
    SchedulingFunction sigma_;
    Belief weights_;
    std::vector<Plan> plans_;
    Vector values_;
    double expected_ = 0.0;
};

namespace detail {

// Best open-loop plan for one anchor against a continuation value vector,
// restricted to intervals in [min_interval, max_interval]. Exposed for tests.
ScheduleSolver::Plan best_anchor_plan(const MarkovModel& model, const PlannerConfig& config,
                                      int anchor, int min_interval, int max_interval,
                                      std::span<const double> values);

// Discounted value of a set of anchor plans (solves the linear Bellman system).
Vector evaluate_plans(const PlannerConfig& config, const std::vector<ScheduleSolver::Plan>& plans);

}  // namespace detail

}  // namespace gocleak
