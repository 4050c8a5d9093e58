#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "gocleak/matrix.hpp"

namespace gocleak {

enum class Scenario { Estimation, Control };

std::string_view to_string(Scenario scenario);
Scenario scenario_from_string(std::string_view name);

// Probability vector over the states of a model (index i is state i + 1).
using Belief = Vector;

// Reward shaping for the control task: r(s) = scale * exp(-|s - target|).
struct ControlTask {
    int target_state = 14;  // 1-based
    double scale = 5.0;
};

// Finite Markov process with per-action transition matrices.
//
// In the Estimation scenario the process does not depend on Bob's action:
// the model carries a single matrix and Bob's "action" is his state estimate.
class MarkovModel {
public:
    MarkovModel(std::vector<Matrix> transitions, Scenario scenario, double density_decay = 0.0,
                ControlTask task = {});

    int num_states() const { return num_states_; }
    int num_actions() const { return static_cast<int>(transitions_.size()); }
    Scenario scenario() const { return scenario_; }
    double density_decay() const { return density_decay_; }
    const ControlTask& control_task() const { return task_; }

    const Matrix& transition(int action) const;

    // Per-state task reward of the control scenario (index i is state i + 1).
    const Vector& control_rewards() const { return control_rewards_; }

private:
    int num_states_ = 0;
    Scenario scenario_;
    double density_decay_;
    ControlTask task_;
    std::vector<Matrix> transitions_;
    Vector control_rewards_;
};

// Action to apply as a function of the last reported (anchor) state and the
// number of steps elapsed since that report. Stored for 0 <= delta < horizon.
class ControlPlan {
public:
    ControlPlan() = default;
    ControlPlan(int num_states, int horizon, int fill = 0);

    static ControlPlan no_op(int num_states, int horizon = 1) { return {num_states, horizon, 0}; }

    int num_states() const { return num_states_; }
    int horizon() const { return horizon_; }

    // Elapsed times at or beyond the horizon reuse the last stored action.
    int action(int anchor, int delta) const;
    void set(int anchor, int delta, int action);

    friend bool operator==(const ControlPlan&, const ControlPlan&) = default;

private:
    int num_states_ = 0;
    int horizon_ = 0;
    std::vector<int> actions_;
};

// g(s, theta) = min(1, |2(s-2)/(|S|-2) - 1|^theta) for 1-based s.
double g_factor(int state, double theta, int num_states);

// Ring process with three landing states per row: chi(+)1, chi(+)3, chi(-)2,
// where chi(s, a) = s (estimation) or s + a with a in {0, 1, 2} (control).
MarkovModel build_model(double theta, int num_states, Scenario scenario, ControlTask task = {});

// Stationary distribution of the chain in which state s applies plan(s, 0).
// Lazy power iteration from the uniform vector; for reducible chains this
// returns the limit reached from uniform.
Belief steady_state(const MarkovModel& model, const ControlPlan& plan,
                    double tolerance = 1e-12, std::int64_t max_iterations = 1'000'000);

// Applies `steps` transitions to `start`; step j uses plan(anchor, start_delta + j).
Belief propagate_belief(const MarkovModel& model, std::span<const double> start,
                        const ControlPlan& plan, int steps, int anchor = 0, int start_delta = 0);

// Shannon entropy in bits, with 0 log 0 = 0.
double shannon_entropy(std::span<const double> belief);

bool is_distribution(std::span<const double> p, double tolerance = 1e-9);

Belief uniform_belief(int num_states);
Belief point_belief(int num_states, int index);

// Index of the largest entry; ties go to the smallest index.
int argmax(std::span<const double> p);

// Rescales p to sum to one and returns the previous sum (zero leaves p untouched).
double normalize(std::span<double> p);

}  // namespace gocleak
