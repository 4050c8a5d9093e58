#include <gtest/gtest.h>

#include <cmath>

#include "gocleak/eavesdropper.hpp"
#include "gocleak/errors.hpp"
#include "oracle.hpp"

using namespace gocleak;

namespace {

MarkovModel identity_model(int n) { return MarkovModel({Matrix::identity(n)}, Scenario::Estimation); }

MarkovModel cycle_model(int n) {
    Matrix p(n, n);
    for (int s = 0; s < n; ++s) p(s, (s + 1) % n) = 1.0;
    return MarkovModel({p}, Scenario::Estimation);
}

ControlPlan no_op(int n, int t_max) { return ControlPlan(n, t_max, 0); }

void expect_near(std::span<const double> a, std::span<const double> b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    EXPECT_LE(oracle::l1(a, b), tol);
}

}  // namespace

TEST(TimingTrace, TimesAndJsonRoundTrip) {
    TimingTrace t{{3, 1, 4}};
    EXPECT_EQ(t.transmission_times(), (std::vector<int>{0, 3, 4, 8}));
    EXPECT_EQ(TimingTrace::from_json(t.to_json()), t);
    EXPECT_THROW(t.validate(3), DomainError);
    EXPECT_THROW(TimingTrace::from_json("[1, 0]"), DomainError);
    EXPECT_THROW(TimingTrace::from_json("{"), DomainError);
}

TEST(Forward, IdentityChainDistinguishingSchedule) {
    const auto model = identity_model(2);
    EveEstimator est({std::make_shared<const Regime>(model, SchedulingFunction({1, 2}, 2), no_op(2, 2))},
                     uniform_belief(2));
    est.observe(1);
    expect_near(est.forward(1), point_belief(2, 0), 1e-15);
    expect_near(est.smoothed_at_transmission(0, 1), point_belief(2, 0), 1e-15);
    EXPECT_EQ(eve_accuracy(est, 0, 1, 0), 1);
    EXPECT_EQ(eve_accuracy(est, 0, 1, 1), 0);
}

TEST(Forward, PeriodicScheduleKeepsSteadyState) {
    const auto model = build_model(32.0, 30, Scenario::Estimation);
    const auto sigma = SchedulingFunction::constant(30, 4, 10);
    EveEstimator est(model, sigma, no_op(30, 10));
    const Belief mu = steady_state(model, no_op(30, 1));
    expect_near(est.prior(), mu, 1e-9);
    for (int k = 0; k < 20; ++k) est.observe(4);
    for (int k = 0; k <= est.last_index(); ++k) expect_near(est.forward(k), mu, 1e-9);
    for (const auto& b : est.backward_pass(est.last_time())) expect_near(b, uniform_belief(30), 1e-12);
    // Long after mixing every belief is the steady state.
    expect_near(est.belief_at_time(est.last_time(), 5).belief, mu, 0.01);
}

TEST(Forward, ImpossibleIntervalThrows) {
    const auto model = identity_model(3);
    EveEstimator est({std::make_shared<const Regime>(model, SchedulingFunction({1, 1, 2}, 3), no_op(3, 3))},
                     uniform_belief(3));
    EXPECT_THROW(est.observe(3), InconsistencyError);
    EXPECT_THROW(est.observe(4), DomainError);
}

TEST(Backward, LastIndexIsUniform) {
    const auto model = build_model(1.0, 30, Scenario::Estimation);
    const auto sigma = extract_sigma(solve_goc(model, {}).policy);
    EveEstimator est(model, sigma, no_op(30, 10));
    est.observe(sigma(0));
    const auto b = est.backward_pass(est.last_time());
    expect_near(b.back(), uniform_belief(30), 0.0);
    // A single observation with a uniform boundary smooths to f_k itself.
    expect_near(est.smoothed_at_transmission(1, est.last_time()), est.forward(1), 1e-15);
}

TEST(Offsets, ZeroOffsetMatchesSmoothed) {
    std::mt19937_64 rng(11);
    const auto in = oracle::random_instance(rng, 4, 3, 8);
    auto regime = std::make_shared<const Regime>(*in.model, in.sigma, in.plan);
    EveEstimator est({regime}, in.prior);
    for (int tau : in.intervals) est.observe(tau);
    const int n = est.last_time();
    for (int k = 0; k < est.last_index(); ++k)
        expect_near(est.belief_at_offset(k, 0, n), est.smoothed_at_transmission(k, n), 1e-12);
}

TEST(Offsets, DeterministicCycleShifts) {
    const auto model = cycle_model(5);
    const SchedulingFunction sigma({1, 2, 3, 2, 3}, 3);
    EveEstimator est({std::make_shared<const Regime>(model, sigma, no_op(5, 3))}, point_belief(5, 0));
    est.observe(1);  // 1 -> 2
    est.observe(2);  // 2 -> 4
    est.observe(2);  // 4 -> 1
    const int n = est.last_time();
    for (int ell = 0; ell < 2; ++ell) expect_near(est.belief_at_offset(2, ell, n), point_belief(5, 3 + ell), 1e-15);
    expect_near(est.belief_at_time(n, 0).belief, point_belief(5, 0), 1e-15);
    expect_near(est.belief_at_time(n + 2, 0).belief, point_belief(5, 2), 1e-15);
}

TEST(Oracle, FourStateThreeIntervals) {
    // |S| = 4 chain, every (n, d) against full trajectory enumeration.
    std::mt19937_64 rng(2024);
    int checked = 0;
    while (checked < 20) {
        auto in = oracle::random_instance(rng, 4, 3, 8);
        if (in.model->num_states() != 4 || in.intervals.size() < 3) continue;
        const auto report = oracle::compare_with_oracle(in);
        EXPECT_LE(report.worst, 1e-9);
        ++checked;
    }
}

TEST(Oracle, RandomSmallInstances) {
    std::mt19937_64 rng(7);
    int compared = 0;
    for (int i = 0; i < 300; ++i) {
        const auto in = oracle::random_instance(rng);
        const auto report = oracle::compare_with_oracle(in);
        EXPECT_LE(report.worst, 1e-9) << "instance " << i;
        compared += report.compared;
    }
    EXPECT_GT(compared, 3000);
}

TEST(Oracle, ForwardMatchesEnumeration) {
    // f_k is the posterior of the state at report k given the first k intervals.
    std::mt19937_64 rng(99);
    for (int i = 0; i < 100; ++i) {
        const auto in = oracle::random_instance(rng);
        auto regime = std::make_shared<const Regime>(*in.model, in.sigma, in.plan);
        EveEstimator est({regime}, in.prior);
        for (int tau : in.intervals) est.observe(tau);
        const auto post = oracle::enumerate_posteriors(in);
        const auto times = in.times();
        for (std::size_t k = 0; k < times.size(); ++k) expect_near(est.forward(k), post[times[k]][times[k]], 1e-9);
    }
}

TEST(Leakage, HandValues) {
    EXPECT_DOUBLE_EQ(belief_leakage(uniform_belief(30)), 0.0);
    EXPECT_DOUBLE_EQ(belief_leakage(point_belief(30, 7)), 1.0);
    Belief half(30, 0.0);
    half[0] = half[1] = 0.5;
    EXPECT_NEAR(belief_leakage(half), 1.0 - 1.0 / std::log2(30.0), 1e-12);
    EXPECT_NEAR(belief_leakage(half), 0.79621, 1e-5);
}

TEST(Leakage, MinimumLeakage) {
    Matrix p(2, 2);
    p(0, 0) = 0.9, p(0, 1) = 0.1, p(1, 0) = 0.3, p(1, 1) = 0.7;
    const MarkovModel two({p}, Scenario::Estimation);
    EXPECT_NEAR(min_leakage(two, no_op(2, 1)), 0.18872, 5e-6);
    Matrix uniform(3, 3, 1.0 / 3.0);
    EXPECT_NEAR(min_leakage(MarkovModel({uniform}, Scenario::Estimation), no_op(3, 1)), 0.0, 1e-12);
    Matrix absorbing(3, 3);
    for (int s = 0; s < 3; ++s) absorbing(s, 0) = 1.0;
    EXPECT_NEAR(min_leakage(MarkovModel({absorbing}, Scenario::Estimation), no_op(3, 1)), 1.0, 1e-9);
}

TEST(Leakage, MonotoneInGap) {
    const auto model = build_model(32.0, 30, Scenario::Estimation);
    const auto sigma = extract_sigma(solve_goc(model, {}).policy);
    EveEstimator est(model, sigma, no_op(30, 10));
    std::mt19937_64 rng(5);
    oracle::Instance in{std::make_shared<MarkovModel>(model), sigma, no_op(30, 10), est.prior(), 120, {}};
    for (int tau : oracle::sample_intervals(rng, in)) est.observe(tau);
    for (int n = 0; n <= 120; n += 7) {
        double previous = 0.0;
        for (int d = 0; d <= 15; ++d) {
            const double l = est.leakage(n, d);
            EXPECT_GE(l, previous);
            EXPECT_GE(l, 0.0);
            EXPECT_LE(l, 1.0);
            previous = l;
        }
    }
}

TEST(Beliefs, AlwaysDistributions) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const auto in = oracle::random_instance(rng);
        auto regime = std::make_shared<const Regime>(*in.model, in.sigma, in.plan);
        EveEstimator est({regime}, in.prior);
        for (int tau : in.intervals) est.observe(tau);
        for (int n = 0; n <= in.horizon + 3; ++n)
            for (const auto& b : est.window(n, n)) EXPECT_TRUE(is_distribution(b, 1e-9));
    }
}

TEST(Regimes, UnitWeightsMatchConsistency) {
    // Passing the consistency indicator explicitly is the same as the default.
    std::mt19937_64 rng(8);
    const auto in = oracle::random_instance(rng, 5, 4, 8);
    auto regime = std::make_shared<const Regime>(*in.model, in.sigma, in.plan);
    EveEstimator a({regime}, in.prior), b({regime, regime}, in.prior);
    for (int tau : in.intervals) {
        a.observe(tau);
        const Vector w = regime->consistency(tau);
        b.observe(tau, 1, w);
    }
    for (int n = 0; n <= in.horizon; ++n) EXPECT_EQ(a.window(n, n), b.window(n, n));
}
