#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "gocleak/eavesdropper.hpp"
#include "gocleak/policy.hpp"

namespace gocleak {

enum class ForecastMode {
    Instant,      // leakage at the anticipated next report time
    IntervalMax,  // max leakage over the steps up to and including the next report
};

std::string_view to_string(ForecastMode mode);
ForecastMode forecast_mode_from_string(std::string_view name);

// Leakage Eve would reach if the next interval were `planned_interval`,
// given everything she has seen so far. The hypothetical interval is scored
// with the default consistency weights of `regime`.
double forecast_leakage(const EveEstimator& est, int planned_interval, int gap, int regime = 0,
                        ForecastMode mode = ForecastMode::Instant);

enum class AdeMode { Goc, Periodic };

std::string_view to_string(AdeMode mode);

struct AdeState {
    AdeMode mode = AdeMode::Goc;
    double l_low = 0.4;
    double l_high = 0.6;
    int period = 1;
    // Estimator regimes for the two modes.
    int goc_regime = 0;
    int periodic_regime = 1;
    ForecastMode forecast = ForecastMode::Instant;

    void validate(int t_max) const;
};

struct AdeDecision {
    int interval = 1;
    AdeMode mode = AdeMode::Goc;
    double forecast = 0.0;  // the leakage forecast the decision was based on
};

// One step of the alternating defense for a report of state_index.
AdeDecision ade_schedule(int state_index, const AdeState& ade, const SchedulingFunction& sigma,
                         const EveEstimator& est, int gap);

// Per-anchor weights with which Eve scores an interval produced by the
// alternating defense when she knows the mode before and after the decision
// (she can replay every forecast herself, only the anchor is hidden).
Vector ade_observation_weights(const AdeState& before, AdeMode after, int interval, const SchedulingFunction& sigma,
                               const EveEstimator& est, int gap);

struct PdeConfig {
    double target_entropy = 0.0;
    int t_max = 10;

    void validate() const;
};

struct PdeStep {
    SchedulingFunction sigma;
    double entropy = 0.0;
    double value = 0.0;   // expected value of the schedule with its re-optimized control
    int state_index = -1; // deviation that produced this step (-1 for the start)
    int interval = 0;
};

// Greedy entropy packing. path.front() is the input schedule; every later
// entry applies the best entropy-reducing single-state deviation. The search
// stops once the entropy is at most the target or no deviation lowers it.
struct PdeResult {
    std::vector<PdeStep> path;
    SolvedPolicy solution;  // jointly optimal control for path.back().sigma

    const SchedulingFunction& sigma() const { return path.back().sigma; }
};

PdeResult pack_pde(const SchedulingFunction& sigma0, const PdeConfig& cfg, const MarkovModel& model,
                   const PlannerConfig& planner, int workers = 1);

// First schedule on a recorded packing path whose entropy is at most target.
// Paths produced with a lower target share their prefix with higher ones.
const PdeStep& pde_cut(const std::vector<PdeStep>& path, double target_entropy);

// sum_n R(n) - epsilon * L(n), undiscounted.
double weighted_performance(std::span<const double> rewards, std::span<const double> leakages, double epsilon);

}  // namespace gocleak
