#include "gocleak/experiments.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include "gocleak/errors.hpp"
#include "gocleak/parallel.hpp"

namespace gocleak {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int line_at(const std::string& text, std::size_t pos) {
    pos = std::min(pos, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Best-effort line of `"key"` inside `"section"`.
int line_of_key(const std::string& text, std::string_view section, std::string_view key) {
    std::size_t from = 0;
    if (!section.empty()) {
        const auto s = text.find(fmt::format("\"{}\"", section));
        if (s != std::string::npos) from = s;
    }
    auto k = text.find(fmt::format("\"{}\"", key), from);
    if (k == std::string::npos) k = text.find(fmt::format("\"{}\"", key));
    return k == std::string::npos ? 0 : line_at(text, k);
}

class SectionReader {
public:
    SectionReader(const json& root, std::string section, const std::string& text, const std::string& source,
                  std::set<std::string> allowed)
        : section_(std::move(section)), text_(text), source_(source) {
        if (!root.contains(section_)) return;
        node_ = &root.at(section_);
        if (!node_->is_object()) fail(section_, fmt::format("section '{}' must be an object", section_), true);
        for (const auto& [key, value] : node_->items())
            if (!allowed.count(key)) fail(key, fmt::format("unknown key '{}' in section '{}'", key, section_));
    }

    const json* find(const std::string& key) const {
        if (!node_ || !node_->contains(key)) return nullptr;
        return &node_->at(key);
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message, bool top_level = false) const {
        const int line = top_level ? line_of_key(text_, "", key) : line_of_key(text_, section_, key);
        if (line > 0) throw ConfigError(fmt::format("{}:{}: {}", source_, line, message));
        throw ConfigError(fmt::format("{}: {}", source_, message));
    }

    double number(const std::string& key, double fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number()) fail(key, fmt::format("'{}.{}' must be a number", section_, key));
        return v->get<double>();
    }

    int integer(const std::string& key, int fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) fail(key, fmt::format("'{}.{}' must be an integer", section_, key));
        return v->get<int>();
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number_unsigned()) fail(key, fmt::format("'{}.{}' must be a nonnegative integer", section_, key));
        return v->get<std::uint64_t>();
    }

    std::string string(const std::string& key, const std::string& fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_string()) fail(key, fmt::format("'{}.{}' must be a string", section_, key));
        return v->get<std::string>();
    }

    // A number or a nonempty list of numbers (empty allowed when allow_empty).
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback, bool allow_empty = false) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (v->is_number()) return {v->get<double>()};
        if (!v->is_array() || (v->empty() && !allow_empty))
            fail(key, fmt::format("'{}.{}' must be a number or a nonempty list of numbers", section_, key));
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number()) fail(key, fmt::format("'{}.{}' must contain only numbers", section_, key));
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<int> integers(const std::string& key, std::vector<int> fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (v->is_number_integer()) return {v->get<int>()};
        if (!v->is_array() || v->empty())
            fail(key, fmt::format("'{}.{}' must be an integer or a nonempty list of integers", section_, key));
        std::vector<int> out;
        for (const auto& e : *v) {
            if (!e.is_number_integer()) fail(key, fmt::format("'{}.{}' must contain only integers", section_, key));
            out.push_back(e.get<int>());
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) const {
        const json* v = find(key);
        if (!v) return fallback;
        if (v->is_string()) return {v->get<std::string>()};
        if (!v->is_array() || v->empty())
            fail(key, fmt::format("'{}.{}' must be a string or a nonempty list of strings", section_, key));
        std::vector<std::string> out;
        for (const auto& e : *v) {
            if (!e.is_string()) fail(key, fmt::format("'{}.{}' must contain only strings", section_, key));
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    template <class Check>
    void require(const std::string& key, bool ok, Check&& message) const {
        if (!ok) fail(key, message());
    }

private:
    std::string section_;
    const std::string& text_;
    const std::string& source_;
    const json* node_ = nullptr;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_number(double v) { return fmt::format("{:g}", v); }

}  // namespace

EpisodeConfig ExperimentConfig::episode(double theta, double beta, int gap, PolicyKind kind) const {
    EpisodeConfig e;
    e.scenario = scenario;
    e.num_states = num_states;
    e.theta = theta;
    e.beta = beta;
    e.gamma = gamma;
    e.t_max = t_max;
    e.d_gap = gap;
    e.n_steps = n_steps;
    e.seed = seed;
    e.policy = kind;
    e.l_low = l_low;
    e.l_high = l_high;
    e.pde_fraction = pde_fraction;
    e.pde_target_entropy = pde_target_entropy;
    e.forecast = forecast;
    e.epsilon = epsilon;
    return e;
}

PlannerConfig ExperimentConfig::planner(double beta) const {
    PlannerConfig p;
    p.gamma = gamma;
    p.beta = beta;
    p.t_max = t_max;
    p.value_tolerance = value_tolerance;
    p.max_iterations = max_iterations;
    return p;
}

json ExperimentConfig::to_json() const {
    std::vector<std::string> kinds;
    for (auto k : policies) kinds.emplace_back(to_string(k));
    json defense = {{"l_low", l_low},
                    {"l_high", l_high},
                    {"pde_fraction", pde_fraction},
                    {"forecast", std::string(gocleak::to_string(forecast))},
                    {"ade_l_low_grid", ade_l_low_grid},
                    {"ade_band", ade_band},
                    {"pde_fraction_grid", pde_fraction_grid}};
    if (pde_target_entropy) defense["pde_target_entropy"] = *pde_target_entropy;
    return {{"model", {{"scenario", std::string(gocleak::to_string(scenario))}, {"num_states", num_states}, {"theta", thetas}}},
            {"planner",
             {{"gamma", gamma},
              {"beta", betas},
              {"t_max", t_max},
              {"value_tolerance", value_tolerance},
              {"max_iterations", max_iterations}}},
            {"defense", defense},
            {"simulation",
             {{"policies", kinds},
              {"d_gap", gaps},
              {"n_steps", n_steps},
              {"n_episodes", n_episodes},
              {"pareto_episodes", pareto_episodes},
              {"epsilon", epsilon},
              {"seed", seed}}},
            {"output", {{"dir", out_dir}, {"traces", traces}}}};
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}:{}: invalid JSON: {}", source, line_at(text, e.byte > 0 ? e.byte - 1 : 0),
                                      e.what()));
    }
    if (!root.is_object()) throw ConfigError(fmt::format("{}:1: top level must be an object", source));
    const std::set<std::string> sections{"model", "planner", "defense", "simulation", "output"};
    for (const auto& [key, value] : root.items())
        if (!sections.count(key)) {
            const int line = line_of_key(text, "", key);
            throw ConfigError(fmt::format("{}:{}: unknown section '{}'", source, line, key));
        }

    ExperimentConfig cfg;
    cfg.source = source;

    const SectionReader model(root, "model", text, source, {"scenario", "num_states", "theta"});
    try {
        cfg.scenario = scenario_from_string(model.string("scenario", "estimation"));
    } catch (const DomainError& e) {
        model.fail("scenario", e.what());
    }
    cfg.num_states = model.integer("num_states", cfg.num_states);
    model.require("num_states", cfg.num_states >= 5, [] { return std::string("'model.num_states' must be at least 5"); });
    cfg.thetas = model.numbers("theta", cfg.thetas);
    for (double t : cfg.thetas)
        model.require("theta", t > 0.0, [] { return std::string("'model.theta' values must be positive"); });

    const SectionReader planner(root, "planner", text, source,
                                {"gamma", "beta", "t_max", "value_tolerance", "max_iterations"});
    cfg.gamma = planner.number("gamma", cfg.gamma);
    planner.require("gamma", cfg.gamma >= 0.0 && cfg.gamma < 1.0,
                    [] { return std::string("'planner.gamma' must be in [0, 1)"); });
    cfg.betas = planner.numbers("beta", cfg.betas);
    for (double b : cfg.betas)
        planner.require("beta", b >= 0.0, [] { return std::string("'planner.beta' values must be nonnegative"); });
    cfg.t_max = planner.integer("t_max", cfg.t_max);
    planner.require("t_max", cfg.t_max >= 1, [] { return std::string("'planner.t_max' must be positive"); });
    cfg.value_tolerance = planner.number("value_tolerance", cfg.value_tolerance);
    planner.require("value_tolerance", cfg.value_tolerance > 0.0,
                    [] { return std::string("'planner.value_tolerance' must be positive"); });
    cfg.max_iterations = planner.integer("max_iterations", cfg.max_iterations);
    planner.require("max_iterations", cfg.max_iterations >= 1,
                    [] { return std::string("'planner.max_iterations' must be positive"); });

    const SectionReader defense(root, "defense", text, source,
                                {"l_low", "l_high", "pde_fraction", "pde_target_entropy", "forecast", "ade_l_low_grid",
                                 "ade_band", "pde_fraction_grid"});
    cfg.l_low = defense.number("l_low", cfg.l_low);
    cfg.l_high = defense.number("l_high", cfg.l_high);
    defense.require("l_high", cfg.l_low >= 0.0 && cfg.l_low < cfg.l_high && cfg.l_high <= 1.0,
                    [] { return std::string("ADE thresholds need 0 <= l_low < l_high <= 1"); });
    cfg.pde_fraction = defense.number("pde_fraction", cfg.pde_fraction);
    defense.require("pde_fraction", cfg.pde_fraction >= 0.0 && cfg.pde_fraction <= 1.0,
                    [] { return std::string("'defense.pde_fraction' must be in [0, 1]"); });
    if (defense.find("pde_target_entropy")) {
        cfg.pde_target_entropy = defense.number("pde_target_entropy", 0.0);
        defense.require("pde_target_entropy", *cfg.pde_target_entropy >= 0.0,
                        [] { return std::string("'defense.pde_target_entropy' must be nonnegative"); });
    }
    try {
        cfg.forecast = forecast_mode_from_string(defense.string("forecast", "instant"));
    } catch (const DomainError& e) {
        defense.fail("forecast", e.what());
    }
    cfg.ade_l_low_grid = defense.numbers("ade_l_low_grid", cfg.ade_l_low_grid, true);
    cfg.ade_band = defense.number("ade_band", cfg.ade_band);
    defense.require("ade_band", cfg.ade_band > 0.0, [] { return std::string("'defense.ade_band' must be positive"); });
    for (double l : cfg.ade_l_low_grid)
        defense.require("ade_l_low_grid", l >= 0.0 && l < 1.0,
                        [] { return std::string("'defense.ade_l_low_grid' values must be in [0, 1)"); });
    cfg.pde_fraction_grid = defense.numbers("pde_fraction_grid", cfg.pde_fraction_grid, true);
    for (double f : cfg.pde_fraction_grid)
        defense.require("pde_fraction_grid", f >= 0.0 && f <= 1.0,
                        [] { return std::string("'defense.pde_fraction_grid' values must be in [0, 1]"); });

    const SectionReader sim(root, "simulation", text, source,
                            {"policies", "d_gap", "n_steps", "n_episodes", "pareto_episodes", "epsilon", "seed"});
    cfg.policies.clear();
    for (const auto& name : sim.strings("policies", {"mpi", "pp", "ade", "pde"})) {
        try {
            cfg.policies.push_back(policy_kind_from_string(name));
        } catch (const DomainError& e) {
            sim.fail("policies", e.what());
        }
    }
    cfg.gaps = sim.integers("d_gap", cfg.gaps);
    for (int d : cfg.gaps)
        sim.require("d_gap", d >= 0, [] { return std::string("'simulation.d_gap' values must be nonnegative"); });
    cfg.n_steps = sim.integer("n_steps", cfg.n_steps);
    sim.require("n_steps", cfg.n_steps >= 1, [] { return std::string("'simulation.n_steps' must be positive"); });
    cfg.n_episodes = sim.integer("n_episodes", cfg.n_episodes);
    sim.require("n_episodes", cfg.n_episodes >= 1, [] { return std::string("'simulation.n_episodes' must be positive"); });
    cfg.pareto_episodes = sim.integer("pareto_episodes", cfg.pareto_episodes);
    sim.require("pareto_episodes", cfg.pareto_episodes >= 1,
                [] { return std::string("'simulation.pareto_episodes' must be positive"); });
    cfg.epsilon = sim.number("epsilon", cfg.epsilon);
    sim.require("epsilon", cfg.epsilon >= 0.0, [] { return std::string("'simulation.epsilon' must be nonnegative"); });
    cfg.seed = sim.u64("seed", cfg.seed);

    const SectionReader output(root, "output", text, source, {"dir", "traces"});
    cfg.out_dir = output.string("dir", cfg.out_dir);
    cfg.traces = output.string("traces", cfg.traces);
    output.require("traces", cfg.traces == "none" || cfg.traces == "first" || cfg.traces == "all",
                   [] { return std::string("'output.traces' must be \"none\", \"first\" or \"all\""); });
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(read_file(path), path.string()); }

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

json policy_to_json(const SolvedPolicy& solved, const json& meta) {
    const JointPolicy& p = solved.policy;
    const SchedulingFunction sigma = extract_sigma(p);
    json psi = json::array(), pi = json::array();
    for (int s = 0; s < p.num_states(); ++s) {
        json row_psi = json::array(), row_pi = json::array();
        for (int d = 0; d <= p.t_max(); ++d) row_psi.push_back(p.transmit(s, d) ? 1 : 0);
        for (int d = 0; d < p.t_max(); ++d) row_pi.push_back(p.control(s, d));
        psi.push_back(std::move(row_psi));
        pi.push_back(std::move(row_pi));
    }
    json doc = meta;
    doc["num_states"] = p.num_states();
    doc["t_max"] = p.t_max();
    doc["sigma"] = sigma.intervals();
    doc["entropy"] = policy_entropy(sigma);
    doc["psi"] = std::move(psi);
    doc["pi"] = std::move(pi);
    doc["value"] = solved.value.per_anchor;
    doc["expected_value"] = solved.value.expected;
    return doc;
}

SolvedPolicy policy_from_json(const json& doc) {
    try {
        const int n = doc.at("num_states").get<int>();
        const int t_max = doc.at("t_max").get<int>();
        const auto& psi = doc.at("psi");
        const auto& pi = doc.at("pi");
        if (n < 1 || t_max < 1 || static_cast<int>(psi.size()) != n || static_cast<int>(pi.size()) != n)
            throw DomainError("policy maps have the wrong number of rows");
        std::vector<std::uint8_t> transmit;
        ControlPlan control(n, t_max, 0);
        for (int s = 0; s < n; ++s) {
            if (static_cast<int>(psi[s].size()) != t_max + 1 || static_cast<int>(pi[s].size()) != t_max)
                throw DomainError(fmt::format("policy row {} has the wrong length", s + 1));
            for (int d = 0; d <= t_max; ++d) transmit.push_back(psi[s][d].get<int>() != 0 ? 1 : 0);
            for (int d = 0; d < t_max; ++d) control.set(s, d, pi[s][d].get<int>());
        }
        SolvedPolicy out{JointPolicy(n, t_max, std::move(transmit), std::move(control)), {}};
        out.value.per_anchor = doc.at("value").get<std::vector<double>>();
        out.value.expected = doc.at("expected_value").get<double>();
        if (extract_sigma(out.policy).intervals() != doc.at("sigma").get<std::vector<int>>())
            throw DomainError("stored sigma disagrees with the transmit map");
        return out;
    } catch (const json::exception& e) {
        throw DomainError(fmt::format("malformed policy file: {}", e.what()));
    }
}

std::string episode_csv(const std::vector<StepRecord>& steps) {
    std::string out = "n,s,a,c,r_task,r_comm,leakage,eve_hit,mode\n";
    for (const auto& r : steps)
        out += fmt::format("{},{},{},{},{},{},{:.17g},{},{}\n", r.n, r.state, r.action, r.transmit, r.r_task, r.r_comm,
                           r.leakage, r.eve_hit, r.mode);
    return out;
}

json batch_to_json(const BatchMetrics& m) {
    const auto summary = [](const MetricSummary& s) {
        return json{{"mean", s.mean}, {"std_error", s.std_error}, {"min", s.min}, {"max", s.max}};
    };
    return {{"episodes", m.episodes},
            {"policy_entropy", m.policy_entropy},
            {"mean_leakage", summary(m.mean_leakage)},
            {"mean_total_reward", summary(m.mean_total_reward)},
            {"mean_task_reward", summary(m.mean_task_reward)},
            {"eve_accuracy", summary(m.eve_accuracy)},
            {"transmission_probability", summary(m.transmission_probability)},
            {"weighted_performance", summary(m.weighted_performance)}};
}

namespace {

class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    const fs::path& root() const { return root_; }

    void write(const std::string& relative, const std::string& content) {
        const fs::path path = root_ / relative;
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
        out << content;
        if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
        std::lock_guard lock(mutex_);
        files_[relative] = fnv1a_hex(content);
    }

    void write_manifest(std::string_view command, const ExperimentConfig& cfg, const RunOptions& opts) {
        json manifest = {{"tool", "gocleak"},
                         {"version", std::string(kToolVersion)},
                         {"command", std::string(command)},
                         {"config_path", opts.config_path.string()},
                         {"config", cfg.to_json()},
                         {"out_dir", cfg.out_dir},
                         {"seed", cfg.seed},
                         {"files", files_}};
        const std::string text = manifest.dump(2) + "\n";
        const fs::path path = root_ / "manifest.json";
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }

    const FileHashes& files() const { return files_; }

private:
    fs::path root_;
    std::mutex mutex_;
    FileHashes files_;
};

ExperimentConfig resolve(const ExperimentConfig& cfg, const RunOptions& opts) {
    ExperimentConfig out = cfg;
    if (opts.out_dir) out.out_dir = *opts.out_dir;
    if (opts.seed) out.seed = *opts.seed;
    return out;
}

struct Cell {
    double theta;
    double beta;
};

std::vector<Cell> model_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    for (double theta : cfg.thetas)
        for (double beta : cfg.betas) cells.push_back({theta, beta});
    return cells;
}

std::string cell_tag(const ExperimentConfig& cfg, const Cell& c) {
    return fmt::format("{}_theta{}_beta{}", to_string(cfg.scenario), format_number(c.theta), format_number(c.beta));
}

json policy_meta(const ExperimentConfig& cfg, const Cell& c, PolicyKind kind) {
    const PlannerConfig p = cfg.planner(c.beta);
    json key = {{"kind", std::string(to_string(kind))},
                {"scenario", std::string(to_string(cfg.scenario))},
                {"num_states", cfg.num_states},
                {"theta", c.theta},
                {"beta", p.beta},
                {"gamma", p.gamma},
                {"t_max", p.t_max},
                {"value_tolerance", p.value_tolerance},
                {"max_iterations", p.max_iterations}};
    if (kind == PolicyKind::Pde) {
        if (cfg.pde_target_entropy)
            key["pde_target_entropy"] = *cfg.pde_target_entropy;
        else
            key["pde_fraction"] = cfg.pde_fraction;
    }
    json meta = key;
    meta["key"] = fnv1a_hex(key.dump());
    return meta;
}

std::string policy_file(const ExperimentConfig& cfg, const Cell& c, PolicyKind kind) {
    return fmt::format("policies/{}_{}.json", cell_tag(cfg, c), to_string(kind));
}

struct SolvedCell {
    std::shared_ptr<PolicyBundle> bundle;
    bool loaded = false;
};

double cell_pde_target(const ExperimentConfig& cfg, const PolicyBundle& bundle) {
    return cfg.pde_target_entropy ? *cfg.pde_target_entropy : cfg.pde_fraction * policy_entropy(bundle.mpi_sigma());
}

void write_policies(OutputDir& out, const ExperimentConfig& cfg, const Cell& c, const PolicyBundle& bundle) {
    const auto dump = [&](PolicyKind kind, const SolvedPolicy& solved, json extra) {
        json meta = policy_meta(cfg, c, kind);
        for (auto& [k, v] : extra.items()) meta[k] = v;
        out.write(policy_file(cfg, c, kind), policy_to_json(solved, meta).dump(1) + "\n");
    };
    dump(PolicyKind::Mpi, bundle.mpi(), json::object());
    dump(PolicyKind::Pp, bundle.periodic().solution, {{"period", bundle.periodic().period}});
    const double target = cell_pde_target(cfg, bundle);
    dump(PolicyKind::Pde, bundle.pde(target), {{"target_entropy", target}});
}

// Loads the three policy files of a cell when all exist with matching keys.
std::shared_ptr<PolicyBundle> try_load(const fs::path& root, const ExperimentConfig& cfg, const Cell& c) {
    std::map<PolicyKind, json> docs;
    for (PolicyKind kind : {PolicyKind::Mpi, PolicyKind::Pp, PolicyKind::Pde}) {
        const fs::path path = root / policy_file(cfg, c, kind);
        if (!fs::exists(path)) return nullptr;
        json doc;
        try {
            doc = json::parse(read_file(path));
        } catch (const std::exception&) {
            return nullptr;
        }
        if (!doc.is_object() || doc.value("key", "") != policy_meta(cfg, c, kind).at("key")) return nullptr;
        docs[kind] = std::move(doc);
    }
    const PlannerConfig planner = cfg.planner(c.beta);
    PeriodicSolution periodic;
    periodic.period = docs[PolicyKind::Pp].at("period").get<int>();
    periodic.solution = policy_from_json(docs[PolicyKind::Pp]);
    auto bundle = std::make_shared<PolicyBundle>(build_model(c.theta, cfg.num_states, cfg.scenario), planner,
                                                 policy_from_json(docs[PolicyKind::Mpi]), std::move(periodic));
    const double target = docs[PolicyKind::Pde].at("target_entropy").get<double>();
    if (target != cell_pde_target(cfg, *bundle)) return nullptr;
    bundle->preset_pde(target, policy_from_json(docs[PolicyKind::Pde]));
    return bundle;
}

// Solves (or loads from the policy cache under `root`) every (theta, beta) cell.
std::vector<SolvedCell> solve_cells(OutputDir& out, const ExperimentConfig& cfg, int workers, bool use_cache) {
    const auto cells = model_cells(cfg);
    std::vector<SolvedCell> solved(cells.size());
    parallel_for(cells.size(), workers, [&](std::size_t i) {
        if (use_cache) {
            if (auto b = try_load(out.root(), cfg, cells[i])) solved[i] = {std::move(b), true};
        }
        if (!solved[i].bundle)
            solved[i].bundle = std::make_shared<PolicyBundle>(cfg.scenario, cfg.num_states, cells[i].theta,
                                                              cfg.planner(cells[i].beta));
        // Rewritten even when loaded so the manifest lists the same files either way.
        write_policies(out, cfg, cells[i], *solved[i].bundle);
    });
    return solved;
}

std::string csv_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

std::string summary_header() {
    return "scenario,theta,beta,d_gap,policy,episodes,policy_entropy,mean_leakage,mean_leakage_se,"
           "mean_total_reward,mean_total_reward_se,mean_task_reward,mean_task_reward_se,eve_accuracy,"
           "eve_accuracy_se,transmission_probability,transmission_probability_se,weighted_performance,"
           "weighted_performance_se,error\n";
}

std::string summary_row(Scenario scenario, double theta, double beta, int gap, std::string_view policy,
                        const std::optional<BatchMetrics>& m, const std::string& error) {
    if (!m)
        return fmt::format("{},{},{},{},{},0,,,,,,,,,,,,,,\"{}\"\n", to_string(scenario), format_number(theta),
                           format_number(beta), gap, policy, csv_escape(error));
    const auto pair = [](const MetricSummary& s) { return fmt::format("{:.17g},{:.17g}", s.mean, s.std_error); };
    return fmt::format("{},{},{},{},{},{},{:.17g},{},{},{},{},{},{},\n", to_string(scenario), format_number(theta),
                       format_number(beta), gap, policy, m->episodes, m->policy_entropy, pair(m->mean_leakage),
                       pair(m->mean_total_reward), pair(m->mean_task_reward), pair(m->eve_accuracy),
                       pair(m->transmission_probability), pair(m->weighted_performance));
}

}  // namespace

FileHashes cmd_solve(const ExperimentConfig& config, const RunOptions& opts) {
    const ExperimentConfig cfg = resolve(config, opts);
    OutputDir out(cfg.out_dir);
    solve_cells(out, cfg, opts.workers, false);
    out.write_manifest("solve", cfg, opts);
    return out.files();
}

FileHashes cmd_simulate(const ExperimentConfig& config, const RunOptions& opts) {
    const ExperimentConfig cfg = resolve(config, opts);
    OutputDir out(cfg.out_dir);
    const auto cells = model_cells(cfg);
    const auto solved = solve_cells(out, cfg, opts.workers, true);

    struct Job {
        std::size_t cell;
        int gap;
        PolicyKind kind;
        std::optional<BatchMetrics> metrics;
        std::string error;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (int gap : cfg.gaps)
            for (PolicyKind kind : cfg.policies) jobs.push_back({c, gap, kind, {}, {}});

    parallel_for(jobs.size(), opts.workers, [&](std::size_t j) {
        Job& job = jobs[j];
        const Cell& cell = cells[job.cell];
        const PolicyBundle& bundle = *solved[job.cell].bundle;
        try {
            EpisodeConfig ec = cfg.episode(cell.theta, cell.beta, job.gap, job.kind);
            std::vector<EpisodeMetrics> metrics;
            double entropy = 0.0;
            for (int i = 0; i < cfg.n_episodes; ++i) {
                EpisodeConfig e = ec;
                e.seed = episode_seed(cfg.seed, i);
                const EpisodeResult r = run_episode(e, bundle);
                metrics.push_back(r.metrics);
                entropy = r.policy_entropy;
                if (cfg.traces == "all" || (cfg.traces == "first" && i == 0))
                    out.write(fmt::format("traces/{}_D{}_{}_ep{}.csv", cell_tag(cfg, cell), job.gap, to_string(job.kind), i),
                              episode_csv(r.steps));
            }
            job.metrics = aggregate(metrics, entropy);
        } catch (const NumericalError&) {
            throw;
        } catch (const std::exception& e) {
            job.error = e.what();
        }
    });

    std::string csv = summary_header();
    json rows = json::array();
    for (const Job& job : jobs) {
        const Cell& cell = cells[job.cell];
        csv += summary_row(cfg.scenario, cell.theta, cell.beta, job.gap, to_string(job.kind), job.metrics, job.error);
        json row = {{"scenario", std::string(to_string(cfg.scenario))},
                    {"theta", cell.theta},
                    {"beta", cell.beta},
                    {"d_gap", job.gap},
                    {"policy", std::string(to_string(job.kind))}};
        if (job.metrics)
            row["metrics"] = batch_to_json(*job.metrics);
        else
            row["error"] = job.error;
        rows.push_back(std::move(row));
    }
    out.write("summary.csv", csv);
    out.write("summary.json", json{{"rows", rows}}.dump(2) + "\n");
    out.write_manifest("simulate", cfg, opts);
    return out.files();
}

FileHashes cmd_pareto(const ExperimentConfig& config, const RunOptions& opts) {
    const ExperimentConfig cfg = resolve(config, opts);
    OutputDir out(cfg.out_dir);
    const auto cells = model_cells(cfg);
    const auto solved = solve_cells(out, cfg, opts.workers, true);

    std::string all = "scenario,theta,beta,d_gap,defense,parameter,episodes,mean_leakage,mean_leakage_se,"
                      "mean_total_reward,mean_total_reward_se,eve_accuracy,on_frontier\n";
    std::string frontier = all;
    json rows = json::array();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const PolicyBundle& bundle = *solved[c].bundle;
        std::vector<double> pde_targets;
        const double h_mpi = policy_entropy(bundle.mpi_sigma());
        for (double f : cfg.pde_fraction_grid) pde_targets.push_back(f * h_mpi);
        for (int gap : cfg.gaps) {
            EpisodeConfig base = cfg.episode(cells[c].theta, cells[c].beta, gap, PolicyKind::Mpi);
            base.seed = cfg.seed;
            const auto points = pareto_sweep(base, bundle, cfg.ade_l_low_grid, pde_targets, cfg.pareto_episodes,
                                             opts.workers, cfg.ade_band);
            for (const auto& p : points) {
                const std::string line = fmt::format(
                    "{},{},{},{},{},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", to_string(cfg.scenario),
                    format_number(cells[c].theta), format_number(cells[c].beta), gap, p.defense, p.parameter,
                    p.metrics.episodes, p.metrics.mean_leakage.mean, p.metrics.mean_leakage.std_error,
                    p.metrics.mean_total_reward.mean, p.metrics.mean_total_reward.std_error,
                    p.metrics.eve_accuracy.mean, p.on_frontier ? 1 : 0);
                all += line;
                if (p.on_frontier) frontier += line;
                rows.push_back({{"theta", cells[c].theta},
                                {"beta", cells[c].beta},
                                {"d_gap", gap},
                                {"defense", p.defense},
                                {"parameter", p.parameter},
                                {"on_frontier", p.on_frontier},
                                {"metrics", batch_to_json(p.metrics)}});
            }
        }
    }
    out.write("pareto.csv", all);
    out.write("pareto_frontier.csv", frontier);
    out.write("pareto.json", json{{"points", rows}}.dump(2) + "\n");
    out.write_manifest("pareto", cfg, opts);
    return out.files();
}

}  // namespace gocleak
