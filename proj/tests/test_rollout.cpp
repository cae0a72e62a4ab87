#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "trajinspect/diagnostics.hpp"
#include "trajinspect/rollout.hpp"

using namespace trajinspect;

namespace {

Policy point_policy(int n_states, int n_actions, ActionId a) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_states, n_actions);
    p.col(a).setOnes();
    return {p, "test"};
}

}  // namespace

TEST(Simulate, ForcedAbsorption) {
    TransitionModel m(1, 1, 1);
    m.add(0, 0, m.surv_code(), 5);
    const auto r = simulate(m, point_policy(1, 1, 0), 0, 20, 1);
    EXPECT_EQ(r.length(), 1);
    EXPECT_EQ(r.terminal, RolloutEnd::surv);
    EXPECT_EQ(r.reward, 100.0);
    EXPECT_EQ(r.policy_tag, "test");
}

TEST(Simulate, ZeroAbsorbingMassTruncates) {
    TransitionModel m(2, 1, 1);
    m.add(0, 0, 1, 1);
    m.add(1, 0, 0, 1);
    const auto r = simulate(m, point_policy(2, 1, 0), 0, 20, 1);
    EXPECT_EQ(r.length(), 20);
    EXPECT_EQ(r.terminal, RolloutEnd::truncated);
    EXPECT_FALSE(r.reward.has_value());
}

TEST(Simulate, DeadEndsAbort) {
    TransitionModel m(2, 2, 1);
    m.add(0, 0, 1, 1);
    const auto unobserved = simulate(m, point_policy(2, 2, 0), 0, 20, 1);
    EXPECT_EQ(unobserved.terminal, RolloutEnd::dead_end);
    EXPECT_EQ(unobserved.length(), 2);
    EXPECT_FALSE(unobserved.reward.has_value());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
    p(0, 0) = 1;
    const auto undefined = simulate(m, Policy{p, "partial"}, 0, 20, 1);
    EXPECT_EQ(undefined.terminal, RolloutEnd::dead_end);
    EXPECT_EQ(undefined.length(), 1);
}

TEST(Batch, EqualsIndividualSimulateCalls) {
    const auto s = fixtures::build_study(200, 5, 4);
    const Policy p = Policy::from_behavior(*s.behavior);
    const std::vector<RolloutStart> starts = {{0, 3}, {2, 0}, {1, 5}};
    const auto b = batch(*s.model, p, starts, 20, 1234);
    std::vector<SimTrajectory> expected;
    for (std::size_t i = 0; i < starts.size(); ++i)
        for (int j = 0; j < starts[i].n_rollouts; ++j)
            expected.push_back(simulate(*s.model, p, starts[i].state, 20,
                                        derive_seed(derive_seed(1234, i), static_cast<std::uint64_t>(j))));
    EXPECT_EQ(b, expected);
    EXPECT_EQ(b, batch(*s.model, p, starts, 20, 1234));
    EXPECT_NE(b, batch(*s.model, p, starts, 20, 1235));
}

TEST(Simulate, InvariantsHoldOnRandomModel) {
    const auto s = fixtures::build_study(300, 6, 5);
    const Policy p = Policy::from_behavior(*s.behavior);
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const auto r = simulate(*s.model, p, static_cast<StateId>(seed % 5), 20, seed);
        EXPECT_LE(r.length(), 20);
        const bool absorbed = r.terminal == RolloutEnd::surv || r.terminal == RolloutEnd::death;
        EXPECT_EQ(r.reward.has_value(), absorbed);
        if (r.terminal == RolloutEnd::truncated) EXPECT_EQ(r.length(), 20);
    }
}

TEST(Simulate, NextStateFrequenciesMatchRow) {
    TransitionModel m(3, 1, 1);
    m.add(0, 0, 0, 2);
    m.add(0, 0, 1, 5);
    m.add(0, 0, 2, 1);
    m.add(0, 0, m.surv_code(), 2);
    m.add(1, 0, 1, 1);
    m.add(2, 0, 2, 1);
    const int n = 40000;
    std::vector<double> counts(5, 0);
    for (int i = 0; i < n; ++i) {
        const auto r = simulate(m, point_policy(3, 1, 0), 0, 2, static_cast<std::uint64_t>(i));
        if (r.length() == 1) counts[3] += 1;
        else counts[static_cast<std::size_t>(r.steps[1].state)] += 1;
    }
    for (int next = 0; next < 4; ++next) {
        const double p = m.row(0, 0)->prob(next);
        EXPECT_LE(std::abs(counts[static_cast<std::size_t>(next)] / n - p), 3 * std::sqrt(p * (1 - p) / n))
            << "next " << next;
    }
}

TEST(Simulate, ConstantHazardFitsTruncatedGeometric) {
    TransitionModel m(1, 1, 1);
    m.add(0, 0, 0, 4);
    m.add(0, 0, m.surv_code(), 1);
    // Twenty independent batches: under the null at most 3 of them fall
    // below p = 0.01 except with probability about 4e-5.
    int rejected = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = batch(m, point_policy(1, 1, 0), {{0, 20000}}, 20, seed);
        std::vector<std::int64_t> hist(20, 0);
        for (const auto& x : r) ++hist[static_cast<std::size_t>(x.length() - 1)];
        rejected += oracle::chi_square_p(hist, oracle::truncated_geometric_pmf(0.2, 20)) < 0.01;
    }
    EXPECT_LE(rejected, 3);
}

TEST(LengthReport, RolloutsIgnoreOutcomeLabels) {
    const auto s = fixtures::build_study(300, 8, 5);
    auto train = s.train_trajectories();
    const auto a = length_report(train, *s.model, *s.behavior, 3, 5);
    for (auto& t : train) t.terminal = t.terminal == Absorbing::surv ? Absorbing::death : Absorbing::surv;
    const auto b = length_report(train, *s.model, *s.behavior, 3, 5);
    EXPECT_EQ(a.rollout_histogram, b.rollout_histogram);
    EXPECT_EQ(a.total_variation_distance, b.total_variation_distance);
}

TEST(RolloutEnd, NamesRoundTrip) {
    for (auto e : {RolloutEnd::surv, RolloutEnd::death, RolloutEnd::truncated, RolloutEnd::dead_end})
        EXPECT_EQ(parse_rollout_end(to_string(e)), e);
    EXPECT_THROW(parse_rollout_end("ALIVE"), ValidationError);
}
