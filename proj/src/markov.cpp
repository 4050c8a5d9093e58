#include "gocleak/markov.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <string>

#include "gocleak/errors.hpp"

namespace gocleak {

std::string_view to_string(Scenario scenario) {
    return scenario == Scenario::Estimation ? "estimation" : "control";
}

Scenario scenario_from_string(std::string_view name) {
    if (name == "estimation") return Scenario::Estimation;
    if (name == "control") return Scenario::Control;
    throw DomainError(fmt::format("unknown scenario '{}'", name));
}

MarkovModel::MarkovModel(std::vector<Matrix> transitions, Scenario scenario, double density_decay,
                         ControlTask task)
    : scenario_(scenario), density_decay_(density_decay), task_(task),
      transitions_(std::move(transitions)) {
    if (transitions_.empty()) throw DomainError("model needs at least one transition matrix");
    num_states_ = static_cast<int>(transitions_.front().rows());
    if (num_states_ < 1) throw DomainError("model needs at least one state");
    for (std::size_t a = 0; a < transitions_.size(); ++a) {
        const Matrix& p = transitions_[a];
        if (p.rows() != static_cast<std::size_t>(num_states_) || p.cols() != p.rows())
            throw DomainError(fmt::format("transition matrix {} is not {}x{}", a, num_states_, num_states_));
        for (int s = 0; s < num_states_; ++s) {
            double row_sum = 0.0;
            for (int t = 0; t < num_states_; ++t) {
                const double v = p(s, t);
                if (!(v >= 0.0 && v <= 1.0))
                    throw DomainError(fmt::format("P[{}]({}, {}) = {} outside [0, 1]", a, s + 1, t + 1, v));
                row_sum += v;
            }
            if (std::abs(row_sum - 1.0) > 1e-9)
                throw DomainError(fmt::format("row {} of P[{}] sums to {}", s + 1, a, row_sum));
        }
    }
    if (scenario_ == Scenario::Estimation) {
        for (std::size_t a = 1; a < transitions_.size(); ++a)
            if (!(transitions_[a] == transitions_.front()))
                throw DomainError("estimation dynamics must not depend on the action");
    }
    control_rewards_.resize(num_states_);
    for (int s = 0; s < num_states_; ++s)
        control_rewards_[s] = task_.scale * std::exp(-std::abs((s + 1) - task_.target_state));
}

const Matrix& MarkovModel::transition(int action) const {
    if (action < 0 || action >= num_actions())
        throw DomainError(fmt::format("action {} outside [0, {})", action, num_actions()));
    return transitions_[action];
}

ControlPlan::ControlPlan(int num_states, int horizon, int fill)
    : num_states_(num_states), horizon_(horizon),
      actions_(static_cast<std::size_t>(num_states) * horizon, fill) {
    if (num_states < 1 || horizon < 1) throw DomainError("control plan needs positive dimensions");
}

int ControlPlan::action(int anchor, int delta) const {
    if (anchor < 0 || anchor >= num_states_ || delta < 0)
        throw DomainError(fmt::format("control plan lookup ({}, {}) out of range", anchor, delta));
    return actions_[static_cast<std::size_t>(anchor) * horizon_ + std::min(delta, horizon_ - 1)];
}

void ControlPlan::set(int anchor, int delta, int action) {
    if (anchor < 0 || anchor >= num_states_ || delta < 0 || delta >= horizon_)
        throw DomainError(fmt::format("control plan entry ({}, {}) out of range", anchor, delta));
    actions_[static_cast<std::size_t>(anchor) * horizon_ + delta] = action;
}

double g_factor(int state, double theta, int num_states) {
    if (num_states < 3) throw DomainError("g_factor needs at least 3 states");
    if (state < 1 || state > num_states)
        throw DomainError(fmt::format("state {} outside [1, {}]", state, num_states));
    if (!(theta > 0.0)) throw DomainError("density decay must be positive");
    const double base = std::abs(2.0 * (state - 2) / (num_states - 2) - 1.0);
    return std::min(1.0, std::pow(base, theta));
}

MarkovModel build_model(double theta, int num_states, Scenario scenario, ControlTask task) {
    if (num_states < 5) throw DomainError("ring model needs at least 5 states");
    if (!(theta > 0.0)) throw DomainError("density decay must be positive");
    const int num_actions = scenario == Scenario::Estimation ? 1 : 3;
    auto ring = [num_states](int s, int k) {  // 1-based in, 1-based out
        return ((s - 1 + k) % num_states + num_states) % num_states + 1;
    };
    std::vector<Matrix> transitions;
    for (int a = 0; a < num_actions; ++a) {
        Matrix p(num_states, num_states);
        for (int s = 1; s <= num_states; ++s) {
            const double g = g_factor(s, theta, num_states);
            const int chi = ring(s, a);
            double near, far;
            if (s % 4 == 2) {
                near = (2.0 - 2.0 * g) / 6.0;
                far = (2.0 + g) / 6.0;
            } else {
                near = (1.0 + 2.0 * g) / 3.0;
                far = (1.0 - g) / 3.0;
            }
            p(s - 1, ring(chi, 1) - 1) += near;
            p(s - 1, ring(chi, 3) - 1) += far;
            p(s - 1, ring(chi, -2) - 1) += far;
        }
        transitions.push_back(std::move(p));
    }
    return MarkovModel(std::move(transitions), scenario, theta, task);
}

Belief steady_state(const MarkovModel& model, const ControlPlan& plan, double tolerance,
                    std::int64_t max_iterations) {
    const int n = model.num_states();
    Matrix chain(n, n);
    for (int s = 0; s < n; ++s) {
        const int a = model.num_actions() == 1 ? 0 : plan.action(s, 0);
        const auto row = model.transition(a).row(s);
        for (int t = 0; t < n; ++t) chain(s, t) = 0.5 * row[t];
        chain(s, s) += 0.5;
    }
    Belief mu = uniform_belief(n);
    Belief next(n);
    double change = 0.0;
    for (std::int64_t it = 0; it < max_iterations; ++it) {
        vec_mat(mu, chain, next);
        normalize(next);
        change = 0.0;
        for (int s = 0; s < n; ++s) change += std::abs(next[s] - mu[s]);
        mu.swap(next);
        if (change < tolerance) return mu;
    }
    throw NumericalError(fmt::format(
        "steady state did not converge after {} iterations (last L1 change {:.3e}, tolerance {:.1e})",
        max_iterations, change, tolerance));
}

Belief propagate_belief(const MarkovModel& model, std::span<const double> start,
                        const ControlPlan& plan, int steps, int anchor, int start_delta) {
    if (steps < 0) throw DomainError("negative step count");
    Belief current(start.begin(), start.end());
    Belief next(current.size());
    for (int j = 0; j < steps; ++j) {
        const int a = model.num_actions() == 1 ? 0 : plan.action(anchor, start_delta + j);
        vec_mat(current, model.transition(a), next);
        current.swap(next);
    }
    return current;
}

double shannon_entropy(std::span<const double> belief) {
    double h = 0.0;
    for (double p : belief)
        if (p > 0.0) h -= p * std::log2(p);
    return std::max(0.0, h);
}

bool is_distribution(std::span<const double> p, double tolerance) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) return false;
        total += v;
    }
    return std::abs(total - 1.0) <= tolerance;
}

Belief uniform_belief(int num_states) { return Belief(num_states, 1.0 / num_states); }

Belief point_belief(int num_states, int index) {
    Belief b(num_states, 0.0);
    b.at(index) = 1.0;
    return b;
}

int argmax(std::span<const double> p) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(p.size()); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

double normalize(std::span<double> p) {
    const double total = simd::sum(p);
    if (total > 0.0) simd::scale(1.0 / total, p);
    return total;
}

}  // namespace gocleak
