#include "gocleak/eavesdropper.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gocleak/errors.hpp"

namespace gocleak {

namespace {

// out(s) = sum_t P(s, t) v(t)
void mat_vec(const Matrix& p, std::span<const double> v, std::span<double> out) {
    for (std::size_t s = 0; s < p.rows(); ++s) out[s] = simd::dot(p.row(s), v);
}

void require_nonempty(double total, std::string_view what) {
    if (!(total > 0.0)) throw InconsistencyError(fmt::format("{} has zero probability", what));
}

}  // namespace

std::vector<int> TimingTrace::transmission_times() const {
    std::vector<int> times{0};
    for (int tau : intervals) times.push_back(times.back() + tau);
    return times;
}

void TimingTrace::validate(int t_max) const {
    for (std::size_t k = 0; k < intervals.size(); ++k)
        if (intervals[k] < 1 || intervals[k] > t_max)
            throw DomainError(fmt::format("interval {} = {} outside [1, {}]", k + 1, intervals[k], t_max));
}

std::string TimingTrace::to_json() const { return nlohmann::json(intervals).dump(); }

TimingTrace TimingTrace::from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (!doc.is_array()) throw DomainError("timing trace must be a JSON array of intervals");
        TimingTrace trace;
        for (const auto& v : doc) {
            if (!v.is_number_integer()) throw DomainError("timing trace entries must be integers");
            trace.intervals.push_back(v.get<int>());
            if (trace.intervals.back() < 1) throw DomainError("timing trace intervals must be positive");
        }
        return trace;
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(fmt::format("bad timing trace: {}", e.what()));
    }
}

Regime::Regime(const MarkovModel& model, SchedulingFunction sigma, ControlPlan plan)
    : model_(&model), sigma_(std::move(sigma)), plan_(std::move(plan)) {
    const int n = model.num_states();
    if (sigma_.num_states() != n) throw DomainError("schedule size does not match the model");
    if (plan_.num_states() != n) throw DomainError("control plan size does not match the model");
    const int width = t_max() + 1;
    reach_.resize(static_cast<std::size_t>(n) * width);
    for (int a = 0; a < n; ++a) {
        Vector* row = &reach_[static_cast<std::size_t>(a) * width];
        row[0] = point_belief(n, a);
        for (int ell = 0; ell < t_max(); ++ell) row[ell + 1] = vec_mat(row[ell], model.transition(action(a, ell)));
    }
}

int Regime::action(int anchor, int ell) const {
    return model_->num_actions() == 1 ? 0 : plan_.action(anchor, ell);
}

std::span<const double> Regime::reach(int anchor, int ell) const {
    if (anchor < 0 || anchor >= num_states() || ell < 0 || ell > t_max())
        throw DomainError(fmt::format("reach({}, {}) out of range", anchor, ell));
    return reach_[static_cast<std::size_t>(anchor) * (t_max() + 1) + ell];
}

Belief Regime::reach_any(int anchor, int ell) const {
    if (ell <= t_max()) {
        const auto r = reach(anchor, ell);
        return Belief(r.begin(), r.end());
    }
    Belief current = reach_any(anchor, t_max());
    Belief next(current.size());
    for (int j = t_max(); j < ell; ++j) {
        vec_mat(current, model_->transition(action(anchor, j)), next);
        current.swap(next);
    }
    return current;
}

Vector Regime::consistency(int tau) const {
    Vector w(num_states());
    for (int a = 0; a < num_states(); ++a) w[a] = sigma_(a) == tau ? 1.0 : 0.0;
    return w;
}

Belief Regime::stationary(double tolerance, std::int64_t max_iterations) const {
    const int n = num_states();
    // Lazy power iteration on the chain of reported states.
    Belief nu = uniform_belief(n);
    Belief next(n);
    bool converged = false;
    double change = 0.0;
    for (std::int64_t it = 0; it < max_iterations && !converged; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int a = 0; a < n; ++a) {
            if (nu[a] == 0.0) continue;
            simd::axpy(0.5 * nu[a], reach(a, sigma_(a)), next);
            next[a] += 0.5 * nu[a];
        }
        normalize(next);
        change = 0.0;
        for (int s = 0; s < n; ++s) change += std::abs(next[s] - nu[s]);
        nu.swap(next);
        converged = change < tolerance;
    }
    if (!converged)
        throw NumericalError(fmt::format("renewal chain did not converge after {} iterations (L1 change {:.3e})",
                                         max_iterations, change));
    Belief mu(n, 0.0);
    for (int a = 0; a < n; ++a)
        for (int ell = 0; ell < sigma_(a); ++ell) simd::axpy(nu[a], reach(a, ell), mu);
    normalize(mu);
    return mu;
}

EveEstimator::EveEstimator(std::vector<RegimePtr> regimes, Belief prior)
    : regimes_(std::move(regimes)), prior_(std::move(prior)) {
    if (regimes_.empty()) throw DomainError("estimator needs at least one regime");
    for (const auto& r : regimes_) {
        if (!r) throw DomainError("null regime");
        if (r->num_states() != num_states()) throw DomainError("regime and prior disagree on the state count");
    }
    if (!is_distribution(prior_)) throw DomainError("prior is not a probability vector");
    forward_.push_back(prior_);
}

EveEstimator::EveEstimator(const MarkovModel& model, const SchedulingFunction& sigma, const ControlPlan& plan)
    : EveEstimator(std::make_shared<const Regime>(model, sigma, plan)) {}

EveEstimator::EveEstimator(const RegimePtr& regime) : EveEstimator({regime}, regime->stationary()) {}

void EveEstimator::observe(int tau, int regime, std::span<const double> weights) {
    if (regime < 0 || regime >= num_regimes()) throw DomainError(fmt::format("no regime {}", regime));
    const Regime& r = *regimes_[regime];
    if (tau < 1 || tau > r.t_max())
        throw DomainError(fmt::format("interval {} outside [1, {}]", tau, r.t_max()));
    Vector w;
    if (weights.empty()) {
        w = r.consistency(tau);
    } else {
        if (static_cast<int>(weights.size()) != num_states()) throw DomainError("weight vector has the wrong size");
        w.assign(weights.begin(), weights.end());
        for (double v : w)
            if (!(v >= 0.0)) throw DomainError("observation weights must be nonnegative");
    }
    const Belief& prev = forward_.back();
    Belief next(num_states(), 0.0);
    for (int a = 0; a < num_states(); ++a) {
        const double x = prev[a] * w[a];
        if (x != 0.0) simd::axpy(x, r.reach(a, tau), next);
    }
    const double total = normalize(next);
    if (!(total > 0.0))
        throw InconsistencyError(fmt::format(
            "interval {} observed after the report at time {} is impossible under the assumed schedule", tau,
            last_time()));
    log_likelihood_ += std::log(total);
    segments_.push_back({tau, regime, std::move(w)});
    forward_.push_back(std::move(next));
    times_.push_back(times_.back() + tau);
}

void EveEstimator::set_open_regime(int regime) {
    if (regime < 0 || regime >= num_regimes()) throw DomainError(fmt::format("no regime {}", regime));
    open_regime_ = regime;
}

TimingTrace EveEstimator::trace() const {
    TimingTrace t;
    for (const auto& seg : segments_) t.intervals.push_back(seg.tau);
    return t;
}

int EveEstimator::index_at(int horizon_n) const {
    if (horizon_n < 0) throw DomainError(fmt::format("negative time {}", horizon_n));
    return static_cast<int>(std::upper_bound(times_.begin(), times_.end(), horizon_n) - times_.begin()) - 1;
}

std::vector<Vector> EveEstimator::backward_range(int horizon_n, int k_lo) const {
    const int last = index_at(horizon_n);
    if (k_lo < 0 || k_lo > last) throw DomainError(fmt::format("report index {} not visible at time {}", k_lo, horizon_n));
    std::vector<Vector> out(last - k_lo + 1);
    out.back() = uniform_belief(num_states());
    for (int k = last - 1; k >= k_lo; --k) {
        const Segment& seg = segments_[k];
        const Regime& r = *regimes_[seg.regime];
        const Vector& later = out[k + 1 - k_lo];
        Vector b(num_states(), 0.0);
        for (int a = 0; a < num_states(); ++a)
            if (seg.weights[a] != 0.0) b[a] = seg.weights[a] * simd::dot(r.reach(a, seg.tau), later);
        require_nonempty(normalize(b), fmt::format("backward message at report {}", k));
        out[k - k_lo] = std::move(b);
    }
    return out;
}

std::vector<Vector> EveEstimator::backward_pass(int horizon_n) const { return backward_range(horizon_n, 0); }

Belief EveEstimator::smoothed_at_transmission(int k, int horizon_n) const {
    const auto b = backward_range(horizon_n, k);
    Belief phi(num_states());
    simd::hadamard(forward_[k], b.front(), phi);
    require_nonempty(normalize(phi), fmt::format("smoothed belief at report {}", k));
    return phi;
}

Belief EveEstimator::closed_offset(int k, int ell, std::span<const double> b_next) const {
    const Segment& seg = segments_[k];
    const Regime& r = *regimes_[seg.regime];
    const int n = num_states();
    Belief out(n, 0.0);
    Vector v(n), tmp(n), term(n);
    for (int a = 0; a < n; ++a) {
        const double x = forward_[k][a] * seg.weights[a];
        if (x == 0.0) continue;
        v.assign(b_next.begin(), b_next.end());
        for (int j = seg.tau - 1; j >= ell; --j) {
            mat_vec(r.model().transition(r.action(a, j)), v, tmp);
            v.swap(tmp);
        }
        simd::hadamard(r.reach(a, ell), v, term);
        simd::axpy(x, term, out);
    }
    require_nonempty(normalize(out), fmt::format("belief {} steps after report {}", ell, k));
    return out;
}

Belief EveEstimator::open_offset(int k, int ell) const {
    const Regime& r = *regimes_[k < last_index() ? segments_[k].regime : open_regime_];
    const int n = num_states();
    Belief out(n, 0.0);
    for (int a = 0; a < n; ++a) {
        const double x = forward_[k][a];
        if (x == 0.0) continue;
        if (ell <= r.t_max())
            simd::axpy(x, r.reach(a, ell), out);
        else
            simd::axpy(x, r.reach_any(a, ell), out);
    }
    normalize(out);
    return out;
}

Belief EveEstimator::belief_at_offset(int k, int ell, int horizon_n) const {
    const int last = index_at(horizon_n);
    if (k < 0 || k > last) throw DomainError(fmt::format("report index {} not visible at time {}", k, horizon_n));
    if (ell < 0) throw DomainError("negative offset");
    if (k == last) return open_offset(k, ell);
    if (ell >= segments_[k].tau)
        throw DomainError(fmt::format("offset {} not inside interval {} after report {}", ell, segments_[k].tau, k));
    const auto b = backward_range(horizon_n, k + 1);
    return closed_offset(k, ell, b.front());
}

SmoothedBelief EveEstimator::belief_at_time(int n, int d) const {
    if (d < 0 || n - d < 0) throw DomainError(fmt::format("belief at time {} with delay {} is undefined", n, d));
    const int m = n - d;
    const int k = index_at(m);
    return {belief_at_offset(k, m - times_[k], n), n, d};
}

std::vector<Belief> EveEstimator::window(int n, int gap) const {
    if (gap < 0) throw DomainError("negative opacity gap");
    const int last = index_at(n);
    const int span_d = std::min(gap, n);
    const int k_lo = index_at(n - span_d);
    const auto b = backward_range(n, std::min(k_lo + 1, last));
    const int b_lo = std::min(k_lo + 1, last);
    std::vector<Belief> out;
    out.reserve(span_d + 1);
    for (int d = 0; d <= span_d; ++d) {
        const int m = n - d;
        const int k = index_at(m);
        if (k == last)
            out.push_back(open_offset(k, m - times_[k]));
        else
            out.push_back(closed_offset(k, m - times_[k], b[k + 1 - b_lo]));
    }
    return out;
}

double EveEstimator::leakage(int n, int gap) const {
    double best = 0.0;
    for (const auto& belief : window(n, gap)) best = std::max(best, belief_leakage(belief));
    return best;
}

double belief_leakage(std::span<const double> belief) {
    if (belief.size() < 2) return 1.0;
    const double value = 1.0 - shannon_entropy(belief) / std::log2(static_cast<double>(belief.size()));
    return std::clamp(value, 0.0, 1.0);
}

double min_leakage(const MarkovModel& model, const ControlPlan& plan) {
    return min_leakage(steady_state(model, plan));
}

double min_leakage(std::span<const double> steady_state) { return belief_leakage(steady_state); }

int eve_accuracy(const EveEstimator& est, int n, int gap, int true_state) {
    const auto guess = est.belief_at_time(n + gap, gap);
    return argmax(guess.belief) == true_state ? 1 : 0;
}

}  // namespace gocleak
