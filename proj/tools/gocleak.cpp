// gocleak: solve, simulate and sweep goal-oriented schedulers under a timing eavesdropper.

#include <CLI11.hpp>
#include <cstdlib>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gocleak/errors.hpp"
#include "gocleak/experiments.hpp"
#include "gocleak/parallel.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("gocleak");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("GOCLEAK_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept it when asked for.
        if (level != spdlog::level::off || std::string_view(env) == "off")
            spdlog::set_level(level);
        else
            spdlog::warn("ignoring unknown GOCLEAK_LOG level '{}'", env);
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Goal-oriented scheduling under a timing side channel"};
    app.set_version_flag("--version", std::string(gocleak::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    int workers = gocleak::default_workers();

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment JSON file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "master seed (overrides simulation.seed)");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    };
    auto* solve = app.add_subcommand("solve", "solve and store the MPI, PP and PDE policies");
    auto* simulate = app.add_subcommand("simulate", "run episodes over the configured grid");
    auto* pareto = app.add_subcommand("pareto", "sweep ADE thresholds and PDE targets");
    for (auto* sub : {solve, simulate, pareto}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        const gocleak::ExperimentConfig cfg = gocleak::load_config(config_path);
        const gocleak::RunOptions opts{config_path, out_dir, seed, workers};
        spdlog::info("config {} ({} theta x {} beta, {} workers)", config_path, cfg.thetas.size(), cfg.betas.size(),
                     workers);
        gocleak::FileHashes files;
        if (solve->parsed())
            files = gocleak::cmd_solve(cfg, opts);
        else if (simulate->parsed())
            files = gocleak::cmd_simulate(cfg, opts);
        else
            files = gocleak::cmd_pareto(cfg, opts);
        for (const auto& [name, hash] : files) spdlog::debug("wrote {} {}", name, hash);
        spdlog::info("{} files written to {}", files.size() + 1, out_dir.value_or(cfg.out_dir));
        return 0;
    } catch (const gocleak::ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    } catch (const gocleak::DomainError& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    } catch (const gocleak::NumericalError& e) {
        spdlog::error("numerical failure: {}", e.what());
        return kExitNumerical;
    } catch (const gocleak::InconsistencyError& e) {
        spdlog::error("numerical failure: {}", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
