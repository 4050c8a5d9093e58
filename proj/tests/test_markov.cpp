#include <gtest/gtest.h>

#include <cmath>

#include "gocleak/errors.hpp"
#include "gocleak/markov.hpp"

using namespace gocleak;

TEST(GFactor, HandValues) {
    for (double theta : {1.0, 4.0, 32.0, 128.0}) {
        EXPECT_DOUBLE_EQ(g_factor(16, theta, 30), 0.0);
        EXPECT_DOUBLE_EQ(g_factor(2, theta, 30), 1.0);
    }
    EXPECT_DOUBLE_EQ(g_factor(9, 1.0, 30), 0.5);
    // State 1 lies outside the symmetric range and is clamped.
    EXPECT_DOUBLE_EQ(g_factor(1, 1.0, 30), 1.0);
    EXPECT_THROW(g_factor(0, 1.0, 30), DomainError);
    EXPECT_THROW(g_factor(31, 1.0, 30), DomainError);
}

TEST(BuildModel, SpecRows) {
    for (double theta : {1.0, 32.0}) {
        const auto m = build_model(theta, 30, Scenario::Estimation);
        const Matrix& p = m.transition(0);
        EXPECT_NEAR(p(15, 16), 1.0 / 3.0, 1e-15);
        EXPECT_NEAR(p(15, 18), 1.0 / 3.0, 1e-15);
        EXPECT_NEAR(p(15, 13), 1.0 / 3.0, 1e-15);
        EXPECT_EQ(p(1, 2), 0.0);
        EXPECT_NEAR(p(1, 4), 0.5, 1e-15);
        EXPECT_NEAR(p(1, 29), 0.5, 1e-15);
    }
    const auto m = build_model(1.0, 30, Scenario::Estimation);
    EXPECT_NEAR(m.transition(0)(4, 5), 0.8571, 1e-4);
    EXPECT_NEAR(m.transition(0)(4, 7), 0.0714, 1e-4);
    EXPECT_NEAR(m.transition(0)(4, 2), 0.0714, 1e-4);
}

TEST(BuildModel, RowsStochasticAndControlShifts) {
    const auto est = build_model(8.0, 30, Scenario::Estimation);
    const auto ctl = build_model(8.0, 30, Scenario::Control);
    EXPECT_EQ(est.num_actions(), 1);
    ASSERT_EQ(ctl.num_actions(), 3);
    for (int a = 0; a < 3; ++a)
        for (int s = 0; s < 30; ++s) {
            EXPECT_TRUE(is_distribution(ctl.transition(a).row(s), 1e-12));
            // Action a moves the landing pattern a steps around the ring.
            for (int t = 0; t < 30; ++t) EXPECT_EQ(ctl.transition(a)(s, (t + a) % 30), est.transition(0)(s, t));
        }
    EXPECT_NEAR(ctl.control_rewards()[13], 5.0, 1e-15);
    EXPECT_NEAR(ctl.control_rewards()[14], 5.0 * std::exp(-1.0), 1e-15);
}

TEST(SteadyState, Canonical) {
    const auto identity = MarkovModel({Matrix::identity(4)}, Scenario::Estimation);
    EXPECT_EQ(steady_state(identity, ControlPlan::no_op(4)), uniform_belief(4));
    Matrix ring(6, 6);
    for (int s = 0; s < 6; ++s)
        for (int k : {1, 3, 5}) ring(s, (s + k) % 6) = 1.0 / 3.0;
    const auto mu = steady_state(MarkovModel({ring}, Scenario::Estimation), ControlPlan::no_op(6));
    for (double v : mu) EXPECT_NEAR(v, 1.0 / 6.0, 1e-12);
}

TEST(SteadyState, MatchesPlainPowerIteration) {
    const auto m = build_model(32.0, 30, Scenario::Estimation);
    const auto mu = steady_state(m, ControlPlan::no_op(30));
    // Plain power iteration on P + I (aperiodic, same fixed points).
    Belief x = uniform_belief(30);
    for (int it = 0; it < 200000; ++it) {
        Belief y(30, 0.0);
        for (int s = 0; s < 30; ++s)
            for (int t = 0; t < 30; ++t) y[t] += 0.5 * x[s] * (m.transition(0)(s, t) + (s == t ? 1.0 : 0.0));
        double change = 0.0;
        for (int s = 0; s < 30; ++s) change += std::abs(y[s] - x[s]);
        x = y;
        if (change < 1e-14) break;
    }
    double diff = 0.0;
    for (int s = 0; s < 30; ++s) diff += std::abs(mu[s] - x[s]);
    EXPECT_LT(diff, 1e-8);
    const Belief next = vec_mat(mu, m.transition(0));
    double residual = 0.0;
    for (int s = 0; s < 30; ++s) residual += std::abs(next[s] - mu[s]);
    EXPECT_LT(residual, 1e-9);
}

TEST(SteadyState, IterationCapThrows) {
    const auto m = build_model(32.0, 30, Scenario::Estimation);
    EXPECT_THROW(steady_state(m, ControlPlan::no_op(30), 1e-15, 3), NumericalError);
}

TEST(Propagate, Examples) {
    const auto m = build_model(32.0, 30, Scenario::Estimation);
    EXPECT_EQ(propagate_belief(m, point_belief(30, 6), ControlPlan::no_op(30), 0), point_belief(30, 6));
    Matrix cycle(5, 5);
    for (int s = 0; s < 5; ++s) cycle(s, (s + 1) % 5) = 1.0;
    const MarkovModel c({cycle}, Scenario::Estimation);
    EXPECT_EQ(propagate_belief(c, point_belief(5, 0), ControlPlan::no_op(5), 3), point_belief(5, 3));
    // Dense matrix power.
    Matrix power = Matrix::identity(30);
    for (int i = 0; i < 5; ++i) {
        Matrix next(30, 30);
        for (int r = 0; r < 30; ++r)
            for (int k = 0; k < 30; ++k)
                for (int col = 0; col < 30; ++col) next(r, col) += power(r, k) * m.transition(0)(k, col);
        power = next;
    }
    const auto b = propagate_belief(m, point_belief(30, 6), ControlPlan::no_op(30), 5);
    for (int t = 0; t < 30; ++t) EXPECT_NEAR(b[t], power(6, t), 1e-12);
}

TEST(Propagate, FollowsPlanByElapsedTime) {
    const auto m = build_model(4.0, 30, Scenario::Control);
    ControlPlan plan(30, 3, 0);
    plan.set(2, 0, 1);
    plan.set(2, 1, 2);
    plan.set(2, 2, 0);
    Belief expected = point_belief(30, 9);
    for (int j = 0; j < 4; ++j) expected = vec_mat(expected, m.transition(plan.action(2, 1 + j)));
    const auto b = propagate_belief(m, point_belief(30, 9), plan, 4, 2, 1);
    for (int t = 0; t < 30; ++t) EXPECT_NEAR(b[t], expected[t], 1e-15);
    EXPECT_TRUE(is_distribution(b, 1e-12));
}

TEST(Entropy, HandValues) {
    EXPECT_NEAR(shannon_entropy(uniform_belief(30)), std::log2(30.0), 1e-12);
    EXPECT_NEAR(shannon_entropy(uniform_belief(30)), 4.90689, 1e-5);
    EXPECT_EQ(shannon_entropy(point_belief(30, 3)), 0.0);
    Belief half(30, 0.0);
    half[0] = half[1] = 0.5;
    EXPECT_DOUBLE_EQ(shannon_entropy(half), 1.0);
}

TEST(Helpers, ArgmaxTiesAndValidation) {
    EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1);
    EXPECT_THROW(build_model(1.0, 4, Scenario::Estimation), DomainError);
    EXPECT_THROW(scenario_from_string("both"), DomainError);
    Matrix bad(2, 2, 0.6);
    EXPECT_THROW(MarkovModel({bad}, Scenario::Estimation), DomainError);
}
