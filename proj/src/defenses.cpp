#include "gocleak/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>

#include "gocleak/errors.hpp"
#include "gocleak/parallel.hpp"

namespace gocleak {

std::string_view to_string(ForecastMode mode) {
    return mode == ForecastMode::Instant ? "instant" : "interval_max";
}

ForecastMode forecast_mode_from_string(std::string_view name) {
    if (name == "instant") return ForecastMode::Instant;
    if (name == "interval_max") return ForecastMode::IntervalMax;
    throw DomainError(fmt::format("unknown forecast mode '{}'", name));
}

std::string_view to_string(AdeMode mode) { return mode == AdeMode::Goc ? "goc" : "periodic"; }

double forecast_leakage(const EveEstimator& est, int planned_interval, int gap, int regime, ForecastMode mode) {
    if (gap < 0) throw DomainError("negative opacity gap");
    EveEstimator future = est;
    future.observe(planned_interval, regime);
    const int report = future.last_time();
    if (mode == ForecastMode::Instant) return future.leakage(report, gap);
    double worst = 0.0;
    for (int n = est.last_time() + 1; n <= report; ++n) worst = std::max(worst, future.leakage(n, gap));
    return worst;
}

void AdeState::validate(int t_max) const {
    if (!(l_low >= 0.0 && l_low < l_high && l_high <= 1.0))
        throw DomainError(fmt::format("ADE thresholds need 0 <= l_low < l_high <= 1 (got {}, {})", l_low, l_high));
    if (period < 1 || period > t_max) throw DomainError(fmt::format("ADE period {} outside [1, {}]", period, t_max));
}

AdeDecision ade_schedule(int state_index, const AdeState& ade, const SchedulingFunction& sigma,
                         const EveEstimator& est, int gap) {
    ade.validate(sigma.t_max());
    const int goc_interval = sigma(state_index);
    if (ade.mode == AdeMode::Goc) {
        const double f = forecast_leakage(est, goc_interval, gap, ade.goc_regime, ade.forecast);
        if (f >= ade.l_high) return {ade.period, AdeMode::Periodic, f};
        return {goc_interval, AdeMode::Goc, f};
    }
    const double f = forecast_leakage(est, ade.period, gap, ade.periodic_regime, ade.forecast);
    if (f < ade.l_low) return {goc_interval, AdeMode::Goc, f};
    return {ade.period, AdeMode::Periodic, f};
}

Vector ade_observation_weights(const AdeState& before, AdeMode after, int interval, const SchedulingFunction& sigma,
                               const EveEstimator& est, int gap) {
    const int n = sigma.num_states();
    Vector w(n, 0.0);
    if (before.mode == AdeMode::Periodic) {
        // The switch test only involves the periodic forecast, which does not
        // depend on the hidden state.
        for (int a = 0; a < n; ++a) w[a] = after == AdeMode::Periodic || sigma(a) == interval ? 1.0 : 0.0;
        return w;
    }
    if (after == AdeMode::Goc) {
        for (int a = 0; a < n; ++a) w[a] = sigma(a) == interval ? 1.0 : 0.0;
        return w;
    }
    // GOC -> periodic: the anchors whose own GOC interval would have crossed l_high.
    // Intervals that no state in Eve's current support would request are
    // skipped: those anchors already carry zero forward mass.
    const Belief& f = est.forward(est.last_index());
    std::map<int, bool> crosses;
    for (int a = 0; a < n; ++a) {
        if (f[a] == 0.0) continue;
        auto [it, fresh] = crosses.try_emplace(sigma(a), false);
        if (fresh)
            it->second = forecast_leakage(est, sigma(a), gap, before.goc_regime, before.forecast) >= before.l_high;
        w[a] = it->second ? 1.0 : 0.0;
    }
    return w;
}

void PdeConfig::validate() const {
    if (!(target_entropy >= 0.0)) throw DomainError("PDE target entropy must be nonnegative");
    if (t_max < 1) throw DomainError("PDE t_max must be positive");
}

PdeResult pack_pde(const SchedulingFunction& sigma0, const PdeConfig& cfg, const MarkovModel& model,
                   const PlannerConfig& planner, int workers) {
    cfg.validate();
    if (sigma0.t_max() != cfg.t_max) throw DomainError("schedule and PDE config disagree on t_max");
    ScheduleSolver solver(model, planner, sigma0);
    solver.solve();
    PdeResult result;
    result.path.push_back({sigma0, policy_entropy(sigma0), solver.expected_value(), -1, 0});

    constexpr double kEntropyTolerance = 1e-12;
    const int n = sigma0.num_states();
    while (result.path.back().entropy > cfg.target_entropy + kEntropyTolerance) {
        const SchedulingFunction& current = solver.sigma();
        const double entropy = result.path.back().entropy;
        struct Candidate {
            int state;
            int tau;
            double entropy;
            double value;
        };
        std::vector<Candidate> candidates;
        for (int s = 0; s < n; ++s)
            for (int tau = 1; tau <= cfg.t_max; ++tau) {
                if (tau == current(s)) continue;
                const double h = policy_entropy(single_state_deviation(current, s, tau));
                if (h < entropy - kEntropyTolerance) candidates.push_back({s, tau, h, 0.0});
            }
        if (candidates.empty()) break;
        parallel_for(candidates.size(), workers, [&](std::size_t i) {
            candidates[i].value = solver.score_deviation(candidates[i].state, candidates[i].tau);
        });
        const Candidate* best = &candidates.front();
        for (const auto& c : candidates)
            if (c.value > best->value) best = &c;
        solver.apply_deviation(best->state, best->tau);
        result.path.push_back({solver.sigma(), best->entropy, solver.expected_value(), best->state, best->tau});
    }
    result.solution = solver.result();
    return result;
}

const PdeStep& pde_cut(const std::vector<PdeStep>& path, double target_entropy) {
    if (path.empty()) throw DomainError("empty packing path");
    for (const auto& step : path)
        if (step.entropy <= target_entropy + 1e-12) return step;
    return path.back();
}

double weighted_performance(std::span<const double> rewards, std::span<const double> leakages, double epsilon) {
    if (rewards.size() != leakages.size()) throw DomainError("reward and leakage series differ in length");
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be nonnegative");
    double total = 0.0;
    for (std::size_t i = 0; i < rewards.size(); ++i) total += rewards[i] - epsilon * leakages[i];
    return total;
}

}  // namespace gocleak
