#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gocleak/markov.hpp"
#include "gocleak/policy.hpp"

namespace gocleak {

// Inter-transmission intervals seen by Eve. The bootstrap transmission at
// time 0 is implicit, so transmission_times() starts with 0.
struct TimingTrace {
    std::vector<int> intervals;

    std::vector<int> transmission_times() const;
    void validate(int t_max) const;

    std::string to_json() const;
    static TimingTrace from_json(const std::string& text);

    friend bool operator==(const TimingTrace&, const TimingTrace&) = default;
};

// What Eve assumes about one stretch of time between two reports: which
// interval each anchor state requests and which control actions Bob applies.
// Caches the per-anchor state distributions ell steps after a report.
class Regime {
public:
    Regime(const MarkovModel& model, SchedulingFunction sigma, ControlPlan plan);

    const MarkovModel& model() const { return *model_; }
    const SchedulingFunction& sigma() const { return sigma_; }
    const ControlPlan& plan() const { return plan_; }
    int num_states() const { return model_->num_states(); }
    int t_max() const { return sigma_.t_max(); }

    int action(int anchor, int ell) const;

    // Distribution of the state ell steps after a report of `anchor`, 0 <= ell <= t_max.
    std::span<const double> reach(int anchor, int ell) const;

    // Same as reach() but without the t_max limit.
    Belief reach_any(int anchor, int ell) const;

    // 1 where sigma(a) == tau, 0 elsewhere.
    Vector consistency(int tau) const;

    // Long-run fraction of time spent in each state when the schedule and the
    // plan run forever.
    Belief stationary(double tolerance = 1e-13, std::int64_t max_iterations = 1'000'000) const;

private:
    const MarkovModel* model_;
    SchedulingFunction sigma_;
    ControlPlan plan_;
    std::vector<Vector> reach_;  // [anchor * (t_max + 1) + ell]
};

using RegimePtr = std::shared_ptr<const Regime>;

struct SmoothedBelief {
    Belief belief;
    int time = 0;
    int delay = 0;
};

// Timing-only forward-backward smoother.
//
// f_k is the (rescaled) joint probability of the state at report k and the
// intervals observed so far. Interval k is weighted per emitting anchor: by
// default with the regime's sigma consistency, or by caller supplied weights.
// The backward boundary at the last report visible at the query horizon is
// uniform.
class EveEstimator {
public:
    EveEstimator(std::vector<RegimePtr> regimes, Belief prior);

    // Single-regime estimator whose prior is the regime's stationary distribution.
    EveEstimator(const MarkovModel& model, const SchedulingFunction& sigma, const ControlPlan& plan);

    void observe(int tau, int regime = 0, std::span<const double> weights = {});

    // Regime used for the time after the last observed report.
    void set_open_regime(int regime);
    int open_regime() const { return open_regime_; }

    int num_states() const { return static_cast<int>(prior_.size()); }
    int num_regimes() const { return static_cast<int>(regimes_.size()); }
    const Regime& regime(int index) const { return *regimes_.at(index); }
    const Belief& prior() const { return prior_; }

    // Index of the last report (0 is the bootstrap report at time 0).
    int last_index() const { return static_cast<int>(times_.size()) - 1; }
    int last_time() const { return times_.back(); }
    const std::vector<int>& transmission_times() const { return times_; }
    TimingTrace trace() const;

    // Log-probability of the observed intervals (sum of the log normalizers).
    double log_likelihood() const { return log_likelihood_; }

    // Normalized f_k.
    const Belief& forward(int k) const { return forward_.at(k); }

    // Last report index visible at time horizon_n.
    int index_at(int horizon_n) const;

    // b_0 .. b_K(n), each rescaled to sum to one.
    std::vector<Vector> backward_pass(int horizon_n) const;

    Belief smoothed_at_transmission(int k, int horizon_n) const;

    // Belief about the state ell steps after report k. For k = K(n) the
    // following interval is not visible yet and ell may be any nonnegative value.
    Belief belief_at_offset(int k, int ell, int horizon_n) const;

    // Belief at time n - d using the reports up to time n.
    SmoothedBelief belief_at_time(int n, int d) const;

    // Beliefs at times n, n - 1, ..., n - min(D, n) (index d).
    std::vector<Belief> window(int n, int gap) const;

    // max over d in {0..min(D, n)} of 1 - H(belief(n; d)) / log2|S|.
    double leakage(int n, int gap) const;

private:
    struct Segment {
        int tau;
        int regime;
        Vector weights;
    };

    // Backward vectors b_k for k_lo <= k <= K (entry k - k_lo).
    explicit EveEstimator(const RegimePtr& regime);

    std::vector<Vector> backward_range(int horizon_n, int k_lo) const;
    Belief closed_offset(int k, int ell, std::span<const double> b_next) const;
    Belief open_offset(int k, int ell) const;

    std::vector<RegimePtr> regimes_;
    Belief prior_;
    std::vector<int> times_{0};
    std::vector<Segment> segments_;  // segments_[k] runs from report k to report k + 1
    std::vector<Belief> forward_;
    double log_likelihood_ = 0.0;
    int open_regime_ = 0;
};

// 1 - H(belief) / log2|S|.
double belief_leakage(std::span<const double> belief);

// Leakage floor set by the steady state of the chain running `plan`.
double min_leakage(const MarkovModel& model, const ControlPlan& plan);
double min_leakage(std::span<const double> steady_state);

// 1 when Eve's MAP estimate of the state at time n, formed at time n + D,
// equals true_state (0-based index).
int eve_accuracy(const EveEstimator& est, int n, int gap, int true_state);

}  // namespace gocleak
