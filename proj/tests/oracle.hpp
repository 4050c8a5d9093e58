#pragma once

// Brute-force references shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "gocleak/eavesdropper.hpp"
#include "gocleak/markov.hpp"
#include "gocleak/policy.hpp"

namespace gocleak::oracle {

struct Instance {
    std::shared_ptr<MarkovModel> model;
    SchedulingFunction sigma;
    ControlPlan plan;
    Belief prior;
    int horizon = 0;
    std::vector<int> intervals;  // observed, all reports at times <= horizon

    std::vector<int> times() const {
        std::vector<int> t{0};
        for (int tau : intervals) t.push_back(t.back() + tau);
        return t;
    }
};

inline Matrix random_stochastic(std::mt19937_64& rng, int n, double zero_probability) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix p(n, n);
    for (int s = 0; s < n; ++s) {
        double total = 0.0;
        for (int t = 0; t < n; ++t) {
            p(s, t) = u(rng) < zero_probability ? 0.0 : u(rng) + 0.05;
            total += p(s, t);
        }
        if (total == 0.0) {
            p(s, std::uniform_int_distribution<int>(0, n - 1)(rng)) = 1.0;
            total = 1.0;
        }
        for (int t = 0; t < n; ++t) p(s, t) /= total;
    }
    return p;
}

// Draws a trajectory from the instance's own process and records the reports.
inline std::vector<int> sample_intervals(std::mt19937_64& rng, const Instance& in) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto draw = [&](std::span<const double> p) {
        double x = u(rng), c = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            c += p[i];
            if (x < c && p[i] > 0.0) return static_cast<int>(i);
        }
        for (std::size_t i = p.size(); i-- > 0;)
            if (p[i] > 0.0) return static_cast<int>(i);
        return 0;
    };
    int x = draw(in.prior), anchor = x, anchor_time = 0;
    std::vector<int> intervals;
    for (int t = 1; t <= in.horizon; ++t) {
        const int a = in.model->num_actions() == 1 ? 0 : in.plan.action(anchor, t - 1 - anchor_time);
        x = draw(in.model->transition(a).row(x));
        if (t - anchor_time == in.sigma(anchor)) {
            intervals.push_back(t - anchor_time);
            anchor = x;
            anchor_time = t;
        }
    }
    return intervals;
}

// Random small instance: |S| in [2, max_states], t_max in [1, max_t], horizon
// in [1, max_horizon]; control dynamics (2 or 3 actions) with probability 1/2.
inline Instance random_instance(std::mt19937_64& rng, int max_states = 5, int max_t = 4, int max_horizon = 8) {
    std::uniform_int_distribution<int> states(2, max_states), tmax(1, max_t), horizon(1, max_horizon);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance in;
    const int n = states(rng);
    const int t_max = tmax(rng);
    const bool control = u(rng) < 0.5;
    const int actions = control ? std::uniform_int_distribution<int>(2, 3)(rng) : 1;
    std::vector<Matrix> ps;
    for (int a = 0; a < actions; ++a) ps.push_back(random_stochastic(rng, n, 0.4));
    in.model = std::make_shared<MarkovModel>(std::move(ps), control ? Scenario::Control : Scenario::Estimation);
    std::vector<int> sigma(n);
    for (int& s : sigma) s = std::uniform_int_distribution<int>(1, t_max)(rng);
    in.sigma = SchedulingFunction(sigma, t_max);
    in.plan = ControlPlan(n, t_max, 0);
    for (int s = 0; s < n; ++s)
        for (int d = 0; d < t_max; ++d) in.plan.set(s, d, std::uniform_int_distribution<int>(0, actions - 1)(rng));
    in.prior.assign(n, 0.0);
    for (double& p : in.prior) p = u(rng) < 0.3 ? 0.0 : u(rng) + 0.05;
    if (std::all_of(in.prior.begin(), in.prior.end(), [](double p) { return p == 0.0; })) in.prior[0] = 1.0;
    normalize(in.prior);
    in.horizon = horizon(rng);
    in.intervals = sample_intervals(rng, in);
    return in;
}

// posterior[n][m]: distribution of X_m given the first K(n) intervals, where
// K(n) counts the observed reports at times in (0, n]. The conditioning event
// says nothing about reports after the last visible one. Computed by
// enumerating every trajectory x_0..x_horizon of the true (re-anchoring)
// process. Entries stay empty when the event has zero probability.
inline std::vector<std::vector<Belief>> enumerate_posteriors(const Instance& in) {
    const int n_states = in.model->num_states();
    const int H = in.horizon;
    const auto times = in.times();
    std::vector<std::vector<Belief>> post(H + 1);
    for (int n = 0; n <= H; ++n) post[n].assign(n + 1, Belief(n_states, 0.0));
    std::vector<int> path(H + 1);

    // c: observed reports matched so far; shadow: a report was generated at a
    // time with no observed report, so the next observed report cannot match.
    std::function<void(int, double, int, int, int, bool)> visit = [&](int t, double w, int anchor, int anchor_time,
                                                                      int c, bool shadow) {
        for (int m = 0; m <= t; ++m) post[t][m][path[m]] += w;
        if (t == H) return;
        const int a = in.model->num_actions() == 1 ? 0 : in.plan.action(anchor, t - anchor_time);
        const auto row = in.model->transition(a).row(path[t]);
        const int next = t + 1;
        for (int x = 0; x < n_states; ++x) {
            if (row[x] == 0.0) continue;
            path[next] = x;
            const bool generated = next - anchor_time == in.sigma(anchor);
            const bool observed = c + 1 < static_cast<int>(times.size()) && times[c + 1] == next;
            if (observed) {
                if (!generated || shadow) continue;
                visit(next, w * row[x], x, next, c + 1, false);
            } else if (generated) {
                const bool more_observed = c + 1 < static_cast<int>(times.size());
                visit(next, w * row[x], x, next, c, shadow || more_observed);
            } else {
                visit(next, w * row[x], anchor, anchor_time, c, shadow);
            }
        }
    };
    for (int x = 0; x < n_states; ++x) {
        if (in.prior[x] == 0.0) continue;
        path[0] = x;
        visit(0, in.prior[x], x, 0, 0, false);
    }
    for (auto& row : post)
        for (auto& b : row) normalize(b);
    return post;
}

// Whether the estimator's open-interval model (no new report after the last
// visible one) describes X_m exactly: always for action-independent dynamics,
// otherwise only before the earliest possible unseen report.
inline bool open_model_exact(const Instance& in, int n, int m) {
    if (in.model->num_actions() == 1) return true;
    const auto times = in.times();
    const int k = static_cast<int>(std::upper_bound(times.begin(), times.end(), n) - times.begin()) - 1;
    if (m <= times[k]) return true;
    const auto& iv = in.sigma.intervals();
    return m - times[k] < *std::min_element(iv.begin(), iv.end());
}

inline double l1(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

struct OracleReport {
    int compared = 0;
    double worst = 0.0;
};

// Compares belief_at_time and window against the enumeration for every (n, m)
// with m covered exactly by the estimator's model.
inline OracleReport compare_with_oracle(const Instance& in) {
    auto regime = std::make_shared<const Regime>(*in.model, in.sigma, in.plan);
    EveEstimator est({regime}, in.prior);
    for (int tau : in.intervals) est.observe(tau);
    const auto post = enumerate_posteriors(in);
    OracleReport report;
    for (int n = 0; n <= in.horizon; ++n) {
        const auto win = est.window(n, n);
        for (int m = 0; m <= n; ++m) {
            if (!open_model_exact(in, n, m)) continue;
            const Belief b = est.belief_at_time(n, n - m).belief;
            report.worst = std::max(report.worst, l1(b, post[n][m]));
            report.worst = std::max(report.worst, l1(win[n - m], post[n][m]));
            ++report.compared;
        }
    }
    return report;
}

}  // namespace gocleak::oracle
