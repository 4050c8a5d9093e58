#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gocleak/sim.hpp"

namespace gocleak {

inline constexpr std::string_view kToolVersion = "0.3.0";

// Parsed experiment file. See README.md for the schema.
struct ExperimentConfig {
    std::string source;  // path or "<string>"

    // model
    Scenario scenario = Scenario::Estimation;
    int num_states = 30;
    std::vector<double> thetas{32.0};

    // planner
    double gamma = 0.9;
    std::vector<double> betas{1.0};
    int t_max = 10;
    double value_tolerance = 1e-9;
    int max_iterations = 100'000;

    // defense
    double l_low = 0.4;
    double l_high = 0.6;
    double pde_fraction = 0.5;
    std::optional<double> pde_target_entropy;
    ForecastMode forecast = ForecastMode::Instant;
    std::vector<double> ade_l_low_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    double ade_band = 0.2;
    std::vector<double> pde_fraction_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

    // simulation
    std::vector<PolicyKind> policies{PolicyKind::Mpi, PolicyKind::Pp, PolicyKind::Ade, PolicyKind::Pde};
    std::vector<int> gaps{5};
    int n_steps = 200;
    int n_episodes = 10;
    int pareto_episodes = 50;
    double epsilon = 1.0;
    std::uint64_t seed = 1;

    // output
    std::string out_dir = "out";
    std::string traces = "first";  // "none", "first" or "all" episodes per cell

    // Episode settings for one grid cell.
    EpisodeConfig episode(double theta, double beta, int gap, PolicyKind kind) const;
    PlannerConfig planner(double beta) const;
    nlohmann::json to_json() const;
};

// Throws ConfigError whose message names the offending line when it can.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

std::string fnv1a_hex(std::string_view bytes);

// Serialized joint policy: sigma, the transmit map psi (|S| x (t_max + 1)),
// the control map pi (|S| x t_max) and the per-anchor values.
nlohmann::json policy_to_json(const SolvedPolicy& solved, const nlohmann::json& meta);
SolvedPolicy policy_from_json(const nlohmann::json& doc);

std::string episode_csv(const std::vector<StepRecord>& steps);
nlohmann::json batch_to_json(const BatchMetrics& metrics);

struct RunOptions {
    std::filesystem::path config_path;  // recorded in the manifest
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    int workers = 1;
};

// Each command writes its files plus manifest.json under the output directory
// and returns the list of written files (relative paths) with their hashes.
using FileHashes = std::map<std::string, std::string>;

FileHashes cmd_solve(const ExperimentConfig& cfg, const RunOptions& opts);
FileHashes cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opts);
FileHashes cmd_pareto(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace gocleak
