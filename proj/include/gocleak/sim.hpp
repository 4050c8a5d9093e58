#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gocleak/defenses.hpp"

namespace gocleak {

// std::mt19937_64 (its output sequence is fixed by the standard) with a
// 53-bit mapping to [0, 1) that does not depend on the library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next_u64() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    // Index drawn from a probability vector by inverse CDF.
    int categorical(std::span<const double> p);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seed of episode `index` in a batch started from `master`.
std::uint64_t episode_seed(std::uint64_t master, std::uint64_t index);

enum class PolicyKind { Mpi, Pp, Ade, Pde };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view name);

struct EpisodeConfig {
    Scenario scenario = Scenario::Estimation;
    int num_states = 30;
    double theta = 32.0;
    double beta = 1.0;
    double gamma = 0.9;
    int t_max = 10;
    int d_gap = 5;
    int n_steps = 200;
    std::uint64_t seed = 1;
    PolicyKind policy = PolicyKind::Mpi;
    double l_low = 0.4;
    double l_high = 0.6;
    // PDE target entropy as a fraction of H(sigma_MPI), unless target_entropy is set.
    double pde_fraction = 0.5;
    std::optional<double> pde_target_entropy;
    ForecastMode forecast = ForecastMode::Instant;
    double epsilon = 1.0;

    void validate() const;
    PlannerConfig planner() const;
};

struct StepRecord {
    int n = 0;
    int state = 0;         // 1-based
    int action = 0;        // estimate (1-based) or control action
    int transmit = 0;
    double r_task = 0.0;
    double r_comm = 0.0;
    double leakage = 0.0;
    int eve_hit = 0;
    bool eve_truncated = false;  // fewer than D steps of lookahead were available
    std::string mode;
};

struct EpisodeMetrics {
    double mean_leakage = 0.0;
    double mean_total_reward = 0.0;
    double mean_task_reward = 0.0;
    double eve_accuracy = 0.0;
    double transmission_probability = 0.0;
    double weighted_performance = 0.0;
};

struct EpisodeResult {
    std::vector<StepRecord> steps;
    EpisodeMetrics metrics;
    double policy_entropy = 0.0;
};

// Everything solved offline for one model configuration. PDE packing is done
// once down to zero entropy and cut at the requested target on demand.
class PolicyBundle {
public:
    PolicyBundle(Scenario scenario, int num_states, double theta, const PlannerConfig& planner, int workers = 1);

    // Bundle around policies solved elsewhere (for instance loaded from disk).
    PolicyBundle(MarkovModel model, const PlannerConfig& planner, SolvedPolicy mpi, PeriodicSolution periodic,
                 int workers = 1);

    // Registers a packed schedule for an exact target so pde(target) skips packing.
    void preset_pde(double target_entropy, SolvedPolicy solved);

    const MarkovModel& model() const { return model_; }
    const PlannerConfig& planner() const { return planner_; }
    const SolvedPolicy& mpi() const { return mpi_; }
    const PeriodicSolution& periodic() const { return periodic_; }
    const SchedulingFunction& mpi_sigma() const { return mpi_sigma_; }

    // Thread-safe; packs on first use.
    const std::vector<PdeStep>& pde_path() const;
    // Schedule and jointly optimal control at the given target entropy.
    const SolvedPolicy& pde(double target_entropy) const;

private:
    MarkovModel model_;
    PlannerConfig planner_;
    int workers_;
    SolvedPolicy mpi_;
    SchedulingFunction mpi_sigma_;
    PeriodicSolution periodic_;
    mutable std::mutex mutex_;
    mutable std::vector<PdeStep> pde_path_;
    mutable bool packed_ = false;
    mutable std::map<std::size_t, std::unique_ptr<SolvedPolicy>> pde_cuts_;  // by path index
    std::map<double, std::unique_ptr<SolvedPolicy>> pde_presets_;
};

using BundlePtr = std::shared_ptr<const PolicyBundle>;

// Solves each (scenario, |S|, theta, planner) combination once.
class PolicyCache {
public:
    explicit PolicyCache(int workers = 1) : workers_(workers) {}
    BundlePtr get(const EpisodeConfig& cfg);

private:
    int workers_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<std::once_flag>> flags_;
    std::map<std::string, BundlePtr> bundles_;
};

double pde_target(const EpisodeConfig& cfg, const PolicyBundle& bundle);

EpisodeResult run_episode(const EpisodeConfig& cfg, const PolicyBundle& bundle);
EpisodeResult run_episode(const EpisodeConfig& cfg);

struct MetricSummary {
    double mean = 0.0;
    double std_error = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct BatchMetrics {
    int episodes = 0;
    MetricSummary mean_leakage;
    MetricSummary mean_total_reward;
    MetricSummary mean_task_reward;
    MetricSummary eve_accuracy;
    MetricSummary transmission_probability;
    MetricSummary weighted_performance;
    double policy_entropy = 0.0;
};

BatchMetrics aggregate(const std::vector<EpisodeMetrics>& episodes, double policy_entropy);

// Episode i uses episode_seed(cfg.seed, i). Results do not depend on `workers`.
BatchMetrics run_batch(const EpisodeConfig& cfg, const PolicyBundle& bundle, int n_episodes, int workers = 1);

struct SweepGrid {
    std::vector<double> thetas;
    std::vector<double> betas;
    std::vector<int> gaps;
    std::vector<PolicyKind> policies;
};

struct SweepRow {
    Scenario scenario;
    double theta = 0.0;
    double beta = 0.0;
    int d_gap = 0;
    PolicyKind policy = PolicyKind::Mpi;
    std::optional<BatchMetrics> metrics;
    std::string error;  // set when the cell failed
};

std::vector<SweepRow> sweep(const SweepGrid& grid, const EpisodeConfig& base, int n_episodes, PolicyCache& cache,
                            int workers = 1);

struct ParetoPoint {
    std::string defense;  // "mpi", "pp", "ade", "pde"
    double parameter = 0.0;  // l_low for ADE, H* for PDE
    BatchMetrics metrics;
    bool on_frontier = false;  // not dominated within its own defense family
};

std::vector<ParetoPoint> pareto_sweep(const EpisodeConfig& base, const std::vector<double>& ade_l_low,
                                      const std::vector<double>& pde_targets, int n_episodes, PolicyCache& cache,
                                      int workers = 1, double ade_band = 0.2);
std::vector<ParetoPoint> pareto_sweep(const EpisodeConfig& base, const PolicyBundle& bundle,
                                      const std::vector<double>& ade_l_low, const std::vector<double>& pde_targets,
                                      int n_episodes, int workers = 1, double ade_band = 0.2);

// Marks points that no other point of the same defense beats on both
// leakage (lower) and reward (higher).
void mark_frontier(std::vector<ParetoPoint>& points);

}  // namespace gocleak
