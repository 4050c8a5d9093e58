#include "gocleak/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "gocleak/errors.hpp"
#include "gocleak/parallel.hpp"

namespace gocleak {

int Rng::categorical(std::span<const double> p) {
    const double u = uniform();
    double cumulative = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
        if (p[i] <= 0.0) continue;
        cumulative += p[i];
        last_positive = i;
        if (u < cumulative) return i;
    }
    if (last_positive < 0) throw DomainError("cannot sample from an all-zero distribution");
    return last_positive;  // rounding left u just above the total
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t episode_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) + index);
}

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::Mpi: return "mpi";
        case PolicyKind::Pp: return "pp";
        case PolicyKind::Ade: return "ade";
        case PolicyKind::Pde: return "pde";
    }
    return "?";
}

PolicyKind policy_kind_from_string(std::string_view name) {
    if (name == "mpi") return PolicyKind::Mpi;
    if (name == "pp") return PolicyKind::Pp;
    if (name == "ade") return PolicyKind::Ade;
    if (name == "pde") return PolicyKind::Pde;
    throw DomainError(fmt::format("unknown policy kind '{}'", name));
}

void EpisodeConfig::validate() const {
    planner().validate();
    if (num_states < 5) throw DomainError("num_states must be at least 5");
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    if (d_gap < 0) throw DomainError("d_gap must be nonnegative");
    if (n_steps < 1) throw DomainError("n_steps must be positive");
    if (!(l_low >= 0.0 && l_low < l_high && l_high <= 1.0))
        throw DomainError(fmt::format("ADE thresholds need 0 <= l_low < l_high <= 1 (got {}, {})", l_low, l_high));
    if (!(pde_fraction >= 0.0 && pde_fraction <= 1.0)) throw DomainError("pde_fraction must be in [0, 1]");
    if (pde_target_entropy && !(*pde_target_entropy >= 0.0)) throw DomainError("PDE target entropy must be nonnegative");
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be nonnegative");
}

PlannerConfig EpisodeConfig::planner() const {
    PlannerConfig p;
    p.gamma = gamma;
    p.beta = beta;
    p.t_max = t_max;
    return p;
}

PolicyBundle::PolicyBundle(Scenario scenario, int num_states, double theta, const PlannerConfig& planner, int workers)
    : model_(build_model(theta, num_states, scenario)), planner_(planner), workers_(workers),
      mpi_(solve_goc(model_, planner_)), mpi_sigma_(extract_sigma(mpi_.policy)),
      periodic_(solve_periodic(model_, planner_)) {}

PolicyBundle::PolicyBundle(MarkovModel model, const PlannerConfig& planner, SolvedPolicy mpi, PeriodicSolution periodic,
                           int workers)
    : model_(std::move(model)), planner_(planner), workers_(workers), mpi_(std::move(mpi)),
      mpi_sigma_(extract_sigma(mpi_.policy)), periodic_(std::move(periodic)) {
    if (mpi_sigma_.num_states() != model_.num_states() || mpi_sigma_.t_max() != planner_.t_max)
        throw DomainError("MPI policy does not match the model or planner");
    if (periodic_.period < 1 || periodic_.period > planner_.t_max) throw DomainError("periodic policy out of range");
}

void PolicyBundle::preset_pde(double target_entropy, SolvedPolicy solved) {
    std::lock_guard lock(mutex_);
    pde_presets_[target_entropy] = std::make_unique<SolvedPolicy>(std::move(solved));
}

const std::vector<PdeStep>& PolicyBundle::pde_path() const {
    std::lock_guard lock(mutex_);
    if (!packed_) {
        pde_path_ = pack_pde(mpi_sigma_, PdeConfig{0.0, planner_.t_max}, model_, planner_, workers_).path;
        packed_ = true;
    }
    return pde_path_;
}

const SolvedPolicy& PolicyBundle::pde(double target_entropy) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = pde_presets_.find(target_entropy); it != pde_presets_.end()) return *it->second;
    }
    const auto& path = pde_path();
    const std::size_t index = &pde_cut(path, target_entropy) - path.data();
    if (index == 0) return mpi_;
    std::lock_guard lock(mutex_);
    auto& slot = pde_cuts_[index];
    if (!slot) slot = std::make_unique<SolvedPolicy>(solve_for_schedule(model_, path[index].sigma, planner_));
    return *slot;
}

BundlePtr PolicyCache::get(const EpisodeConfig& cfg) {
    const PlannerConfig planner = cfg.planner();
    const std::string key = fmt::format("{}|{}|{:.17g}|{:.17g}|{:.17g}|{}|{:.17g}|{}", to_string(cfg.scenario),
                                        cfg.num_states, cfg.theta, planner.gamma, planner.beta, planner.t_max,
                                        planner.value_tolerance, planner.max_iterations);
    std::shared_ptr<std::once_flag> flag;
    {
        std::lock_guard lock(mutex_);
        auto& f = flags_[key];
        if (!f) f = std::make_shared<std::once_flag>();
        flag = f;
    }
    std::call_once(*flag, [&] {
        auto bundle = std::make_shared<const PolicyBundle>(cfg.scenario, cfg.num_states, cfg.theta, planner, workers_);
        std::lock_guard lock(mutex_);
        bundles_[key] = std::move(bundle);
    });
    std::lock_guard lock(mutex_);
    return bundles_.at(key);
}

double pde_target(const EpisodeConfig& cfg, const PolicyBundle& bundle) {
    return cfg.pde_target_entropy ? *cfg.pde_target_entropy : cfg.pde_fraction * policy_entropy(bundle.mpi_sigma());
}

namespace {

struct ActivePolicy {
    std::vector<RegimePtr> regimes;  // ADE: {GOC, periodic}
    SchedulingFunction sigma;        // schedule of regime 0
    double entropy = 0.0;
};

ActivePolicy select_policy(const EpisodeConfig& cfg, const PolicyBundle& bundle) {
    const MarkovModel& model = bundle.model();
    const auto regime = [&](const SchedulingFunction& sigma, const SolvedPolicy& solved) {
        return std::make_shared<const Regime>(model, sigma, solved.policy.control_plan());
    };
    const PeriodicSolution& pp = bundle.periodic();
    const auto pp_sigma = SchedulingFunction::constant(model.num_states(), pp.period, cfg.t_max);
    ActivePolicy out;
    switch (cfg.policy) {
        case PolicyKind::Mpi:
            out.sigma = bundle.mpi_sigma();
            out.regimes = {regime(out.sigma, bundle.mpi())};
            break;
        case PolicyKind::Pp:
            out.sigma = pp_sigma;
            out.regimes = {regime(pp_sigma, pp.solution)};
            break;
        case PolicyKind::Pde: {
            const SolvedPolicy& solved = bundle.pde(pde_target(cfg, bundle));
            out.sigma = extract_sigma(solved.policy);
            out.regimes = {regime(out.sigma, solved)};
            break;
        }
        case PolicyKind::Ade:
            out.sigma = bundle.mpi_sigma();
            out.regimes = {regime(out.sigma, bundle.mpi()), regime(pp_sigma, pp.solution)};
            break;
    }
    out.entropy = policy_entropy(out.sigma);
    return out;
}

double mean_of(const std::vector<StepRecord>& steps, auto field) {
    double total = 0.0;
    for (const auto& r : steps) total += field(r);
    return total / static_cast<double>(steps.size());
}

}  // namespace

EpisodeResult run_episode(const EpisodeConfig& cfg, const PolicyBundle& bundle) {
    cfg.validate();
    const MarkovModel& model = bundle.model();
    if (model.scenario() != cfg.scenario || model.num_states() != cfg.num_states)
        throw DomainError("policy bundle does not match the episode configuration");
    const bool estimation = model.scenario() == Scenario::Estimation;
    const ActivePolicy active = select_policy(cfg, bundle);
    const bool ade_on = cfg.policy == PolicyKind::Ade;

    EveEstimator eve(active.regimes, active.regimes.front()->stationary());
    AdeState ade;
    ade.l_low = cfg.l_low;
    ade.l_high = cfg.l_high;
    ade.period = bundle.periodic().period;
    ade.forecast = cfg.forecast;

    Rng rng(cfg.seed);
    int state = rng.categorical(eve.prior());
    int anchor = state;
    int last_report = 0;
    int interval = 0;
    int regime = 0;
    Vector weights;
    std::string mode;

    const auto decide = [&] {
        if (ade_on) {
            const AdeDecision d = ade_schedule(anchor, ade, active.sigma, eve, cfg.d_gap);
            weights = ade_observation_weights(ade, d.mode, d.interval, active.sigma, eve, cfg.d_gap);
            ade.mode = d.mode;
            interval = d.interval;
            regime = d.mode == AdeMode::Goc ? ade.goc_regime : ade.periodic_regime;
            mode = std::string(to_string(d.mode));
        } else {
            interval = active.sigma(anchor);
            regime = 0;
            mode = cfg.policy == PolicyKind::Pp ? "periodic" : "goc";
        }
        eve.set_open_regime(regime);
    };
    decide();

    EpisodeResult result;
    result.policy_entropy = active.entropy;
    result.steps.reserve(cfg.n_steps);
    std::vector<int> states;
    states.reserve(cfg.n_steps);
    for (int n = 0; n < cfg.n_steps; ++n) {
        const Regime& r = *active.regimes[regime];
        const int elapsed = n - last_report;
        StepRecord rec;
        rec.n = n;
        rec.state = state + 1;
        rec.transmit = elapsed == 0 ? 1 : 0;
        int control = 0;
        if (estimation) {
            const int estimate = argmax(r.reach(anchor, elapsed));
            rec.action = estimate + 1;
            rec.r_task = estimate == state ? 1.0 : 0.0;
        } else {
            control = r.action(anchor, elapsed);
            rec.action = control;
            rec.r_task = model.control_rewards()[state];
        }
        rec.r_comm = -cfg.beta * rec.transmit;
        rec.leakage = eve.leakage(n, cfg.d_gap);
        rec.mode = mode;
        result.steps.push_back(std::move(rec));
        states.push_back(state);

        if (n + 1 == cfg.n_steps) break;
        state = rng.categorical(model.transition(control).row(state));
        if (n + 1 - last_report == interval) {
            eve.observe(interval, regime, ade_on ? std::span<const double>(weights) : std::span<const double>());
            anchor = state;
            last_report = n + 1;
            decide();
        }
    }

    const int last = cfg.n_steps - 1;
    for (int n = 0; n <= last; ++n) {
        const int horizon = std::min(n + cfg.d_gap, last);
        StepRecord& rec = result.steps[n];
        rec.eve_truncated = n + cfg.d_gap > last;
        rec.eve_hit = argmax(eve.belief_at_time(horizon, horizon - n).belief) == states[n] ? 1 : 0;
    }

    auto& steps = result.steps;
    EpisodeMetrics& m = result.metrics;
    m.mean_leakage = mean_of(steps, [](const StepRecord& r) { return r.leakage; });
    m.mean_total_reward = mean_of(steps, [](const StepRecord& r) { return r.r_task + r.r_comm; });
    m.mean_task_reward = mean_of(steps, [](const StepRecord& r) { return r.r_task; });
    m.eve_accuracy = mean_of(steps, [](const StepRecord& r) { return double(r.eve_hit); });
    m.transmission_probability = mean_of(steps, [](const StepRecord& r) { return double(r.transmit); });
    std::vector<double> rewards, leakages;
    for (const auto& r : steps) {
        rewards.push_back(r.r_task + r.r_comm);
        leakages.push_back(r.leakage);
    }
    m.weighted_performance = weighted_performance(rewards, leakages, cfg.epsilon);
    return result;
}

EpisodeResult run_episode(const EpisodeConfig& cfg) {
    cfg.validate();
    const PolicyBundle bundle(cfg.scenario, cfg.num_states, cfg.theta, cfg.planner());
    return run_episode(cfg, bundle);
}

namespace {

MetricSummary summarize(const std::vector<EpisodeMetrics>& episodes, double EpisodeMetrics::*field) {
    MetricSummary s;
    const double n = static_cast<double>(episodes.size());
    s.min = s.max = episodes.front().*field;
    double total = 0.0;
    for (const auto& e : episodes) {
        total += e.*field;
        s.min = std::min(s.min, e.*field);
        s.max = std::max(s.max, e.*field);
    }
    s.mean = total / n;
    if (episodes.size() > 1) {
        double sq = 0.0;
        for (const auto& e : episodes) sq += (e.*field - s.mean) * (e.*field - s.mean);
        s.std_error = std::sqrt(sq / (n - 1.0) / n);
    }
    return s;
}

}  // namespace

BatchMetrics aggregate(const std::vector<EpisodeMetrics>& episodes, double policy_entropy) {
    if (episodes.empty()) throw DomainError("cannot aggregate zero episodes");
    BatchMetrics b;
    b.episodes = static_cast<int>(episodes.size());
    b.mean_leakage = summarize(episodes, &EpisodeMetrics::mean_leakage);
    b.mean_total_reward = summarize(episodes, &EpisodeMetrics::mean_total_reward);
    b.mean_task_reward = summarize(episodes, &EpisodeMetrics::mean_task_reward);
    b.eve_accuracy = summarize(episodes, &EpisodeMetrics::eve_accuracy);
    b.transmission_probability = summarize(episodes, &EpisodeMetrics::transmission_probability);
    b.weighted_performance = summarize(episodes, &EpisodeMetrics::weighted_performance);
    b.policy_entropy = policy_entropy;
    return b;
}

BatchMetrics run_batch(const EpisodeConfig& cfg, const PolicyBundle& bundle, int n_episodes, int workers) {
    if (n_episodes < 1) throw DomainError("n_episodes must be positive");
    cfg.validate();
    // Resolve lazily solved policies before fanning out.
    if (cfg.policy == PolicyKind::Pde) bundle.pde(pde_target(cfg, bundle));
    std::vector<EpisodeMetrics> metrics(n_episodes);
    double entropy = 0.0;
    parallel_for(n_episodes, workers, [&](std::size_t i) {
        EpisodeConfig episode = cfg;
        episode.seed = episode_seed(cfg.seed, i);
        EpisodeResult r = run_episode(episode, bundle);
        metrics[i] = r.metrics;
        if (i == 0) entropy = r.policy_entropy;
    });
    return aggregate(metrics, entropy);
}

std::vector<SweepRow> sweep(const SweepGrid& grid, const EpisodeConfig& base, int n_episodes, PolicyCache& cache,
                            int workers) {
    if (grid.thetas.empty() || grid.betas.empty() || grid.gaps.empty() || grid.policies.empty())
        throw DomainError("sweep grid has an empty axis");
    std::vector<SweepRow> rows;
    for (double theta : grid.thetas)
        for (double beta : grid.betas)
            for (int gap : grid.gaps)
                for (PolicyKind kind : grid.policies) rows.push_back({base.scenario, theta, beta, gap, kind, {}, {}});
    parallel_for(rows.size(), workers, [&](std::size_t i) {
        SweepRow& row = rows[i];
        EpisodeConfig cfg = base;
        cfg.theta = row.theta;
        cfg.beta = row.beta;
        cfg.d_gap = row.d_gap;
        cfg.policy = row.policy;
        try {
            row.metrics = run_batch(cfg, *cache.get(cfg), n_episodes);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    return rows;
}

std::vector<ParetoPoint> pareto_sweep(const EpisodeConfig& base, const std::vector<double>& ade_l_low,
                                      const std::vector<double>& pde_targets, int n_episodes, PolicyCache& cache,
                                      int workers, double ade_band) {
    return pareto_sweep(base, *cache.get(base), ade_l_low, pde_targets, n_episodes, workers, ade_band);
}

std::vector<ParetoPoint> pareto_sweep(const EpisodeConfig& base, const PolicyBundle& bundle,
                                      const std::vector<double>& ade_l_low, const std::vector<double>& pde_targets,
                                      int n_episodes, int workers, double ade_band) {
    struct Job {
        PolicyKind kind;
        double parameter;
    };
    std::vector<Job> jobs{{PolicyKind::Mpi, 0.0}, {PolicyKind::Pp, 0.0}};
    for (double l : ade_l_low) jobs.push_back({PolicyKind::Ade, l});
    for (double h : pde_targets) jobs.push_back({PolicyKind::Pde, h});
    for (double h : pde_targets) bundle.pde(h);
    std::vector<ParetoPoint> points(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        EpisodeConfig cfg = base;
        cfg.policy = jobs[i].kind;
        if (jobs[i].kind == PolicyKind::Ade) {
            cfg.l_low = jobs[i].parameter;
            cfg.l_high = std::min(1.0, jobs[i].parameter + ade_band);
        } else if (jobs[i].kind == PolicyKind::Pde) {
            cfg.pde_target_entropy = jobs[i].parameter;
        }
        points[i] = {std::string(to_string(jobs[i].kind)), jobs[i].parameter, run_batch(cfg, bundle, n_episodes),
                     false};
    });
    mark_frontier(points);
    return points;
}

void mark_frontier(std::vector<ParetoPoint>& points) {
    for (auto& p : points) {
        p.on_frontier = true;
        for (const auto& q : points) {
            if (&p == &q || q.defense != p.defense) continue;
            const double lp = p.metrics.mean_leakage.mean, lq = q.metrics.mean_leakage.mean;
            const double rp = p.metrics.mean_total_reward.mean, rq = q.metrics.mean_total_reward.mean;
            if (lq <= lp && rq >= rp && (lq < lp || rq > rp)) {
                p.on_frontier = false;
                break;
            }
        }
    }
}

}  // namespace gocleak
