#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include "fixtures.hpp"
#include "trajinspect/diagnostics.hpp"

using namespace trajinspect;
using fixtures::traj;

TEST(LengthHistogram, CountsAndCapsAtLastBin) {
    const std::vector<int> lengths = {1, 1, 5, 20, 25};
    const auto h = length_histogram(lengths);
    EXPECT_EQ(h[0], 2);
    EXPECT_EQ(h[4], 1);
    EXPECT_EQ(h[19], 2);
    std::int64_t total = 0;
    for (auto c : h) total += c;
    EXPECT_EQ(total, 5);
    EXPECT_THROW(length_histogram(std::vector<int>{0}), ValidationError);
}

TEST(TotalVariation, KnownValues) {
    LengthHistogram a{}, b{};
    a[0] = 3;
    a[1] = 1;
    b[1] = 2;
    EXPECT_DOUBLE_EQ(total_variation(a, b), 0.75);
    EXPECT_EQ(total_variation(a, a), 0.0);
    EXPECT_THROW(total_variation(a, LengthHistogram{}), ValidationError);
}

TEST(LengthReport, EmpiricalChainOfOneTrajectoryHasZeroDistance) {
    const std::vector<DiscreteTrajectory> t = {traj("a", {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}, Absorbing::surv)};
    const auto mdp = estimate(t, 5, 1, 1);
    const auto r = length_report(t, mdp.model, mdp.behavior, 50, 3);
    EXPECT_EQ(r.total_variation_distance, 0.0);
    EXPECT_EQ(r.n_rollouts, 50);
    EXPECT_EQ(r.rollout_histogram[4], 50);
}

TEST(LengthReport, HistogramsSumToSampleCounts) {
    const auto s = fixtures::build_study(400, 5, 5);
    const auto train = s.train_trajectories();
    const auto r = length_report(train, *s.model, *s.behavior, 4, 9);
    std::int64_t a = 0, b = 0;
    for (auto c : r.train_histogram) a += c;
    for (auto c : r.rollout_histogram) b += c;
    EXPECT_EQ(a, r.n_train);
    EXPECT_EQ(b, r.n_rollouts);
    EXPECT_EQ(r.n_rollouts + r.dead_end_rollouts, static_cast<std::int64_t>(train.size()) * 4);
    EXPECT_EQ(total_variation(r.train_histogram, r.train_histogram), 0.0);
    EXPECT_EQ(r, length_report(train, *s.model, *s.behavior, 4, 9));
}

TEST(TerminationBias, PooledMaximumLikelihoodIdentity) {
    std::vector<DiscreteTrajectory> t;
    const std::vector<std::pair<int, int>> length_counts = {{1, 7}, {2, 5}, {3, 4}, {4, 2}, {6, 3}, {19, 1}};
    int id = 0;
    for (auto [len, n] : length_counts)
        for (int i = 0; i < n; ++i) {
            DiscreteTrajectory x;
            x.id = "t" + std::to_string(id++);
            x.steps.assign(static_cast<std::size_t>(len), {0, 0});
            x.terminal = i % 2 ? Absorbing::death : Absorbing::surv;
            x.absorbs = true;
            t.push_back(x);
        }
    const auto m = estimate(t, 1, 1, 1).model;
    const auto r = termination_bias(m, t, 200, 1);
    EXPECT_NEAR(r.prefinal_actual->point, r.prefinal_predicted->point, 1e-12);
    for (const auto& st : r.steps)
        if (st.predicted) EXPECT_NEAR(st.predicted->point, r.prefinal_predicted->point, 1e-12);
    EXPECT_EQ(r.excluded_pairs, 0);
}

TEST(TerminationBias, IntervalsContainPointAndStepTwentyIsCertain) {
    const auto s = fixtures::build_study(600, 7, 6);
    const auto r = termination_bias(*s.model, s.train_trajectories(), 300, 4);
    ASSERT_EQ(r.steps.size(), 20u);
    for (const auto& st : r.steps)
        for (const auto& iv : {st.actual, st.predicted})
            if (iv) {
                EXPECT_LE(iv->lower, iv->point);
                EXPECT_LE(iv->point, iv->upper);
                EXPECT_GE(iv->lower, 0.0);
                EXPECT_LE(iv->upper, 1.0);
            }
    ASSERT_TRUE(r.steps[19].actual.has_value());
    EXPECT_EQ(r.steps[19].actual->point, 1.0);
    EXPECT_EQ(r, termination_bias(*s.model, s.train_trajectories(), 300, 4));
}

TEST(TerminationBias, MoreResamplesMoveEndpointsLessThanMonteCarloError) {
    const auto s = fixtures::build_study(600, 8, 6);
    const auto train = s.train_trajectories();
    const auto a = termination_bias(*s.model, train, 1000, 12);
    const auto b = termination_bias(*s.model, train, 4000, 13);
    // Standard error of an empirical 2.5% quantile from n draws, under a
    // normal approximation of the bootstrap distribution; the two runs are
    // independent, so their difference has variance se(1000)^2 + se(4000)^2.
    const boost::math::normal z;
    const double q = 0.025;
    const double factor = std::sqrt(q * (1 - q) * (1.0 / 1000 + 1.0 / 4000)) /
                          boost::math::pdf(z, boost::math::quantile(z, q));
    for (const auto& [x, y] : {std::pair{a.prefinal_actual, b.prefinal_actual},
                               std::pair{a.prefinal_predicted, b.prefinal_predicted}}) {
        const double se = 3 * factor * x->boot_sd;
        EXPECT_LT(std::abs(x->lower - y->lower), se);
        EXPECT_LT(std::abs(x->upper - y->upper), se);
    }
}

TEST(TerminationBias, CensoredModeLowersPrefinalPrediction) {
    auto gt = random_ground_truth(5, 3, 2, 31, 0.04);
    const Cohort c = generate_synthetic(gt, 800, 2);
    const auto sc = fit_states(c, 5, 1);
    auto trajs = discretize_cohort(c, sc, fit_actions(c));
    const auto biased = termination_bias(estimate(trajs, 5).model, trajs, 0, 0);
    apply_censor_mode(trajs, CensorMode::censored);
    const auto fixed = termination_bias(estimate(trajs, 5).model, trajs, 0, 0);
    EXPECT_LT(fixed.prefinal_predicted->point, biased.prefinal_predicted->point);
}

TEST(TerminationBias, UnseenPairsAreExcluded) {
    const std::vector<DiscreteTrajectory> t = {traj("a", {{0, 0}, {0, 1}}, Absorbing::surv)};
    TransitionModel m(1, 2, 1);
    m.add(0, 0, 0, 1);
    const auto r = termination_bias(m, t, 0, 0);
    EXPECT_EQ(r.excluded_pairs, 1);
    EXPECT_FALSE(r.steps[1].predicted.has_value());
    EXPECT_EQ(r.steps[1].actual->point, 1.0);
}

TEST(RareAction, NeverObservedRlActionsRankFirst) {
    CountMatrix c = CountMatrix::Zero(5, kNumActions);
    for (int s = 0; s < 5; ++s) {
        c(s, 0) = 10 + s;
        c(s, 3) = 5;
    }
    const auto tp = fixtures::target_from_actions({24, 3, 23, 3, 22});
    TransitionModel m(5, kNumActions, 1);
    for (int s = 0; s < 5; ++s) m.add(s, 0, m.surv_code(), 10 + s);
    const auto r = rare_action_report(m, BehaviorPolicy(c), tp, 3);
    EXPECT_EQ(r.states, (std::vector<StateId>{4, 2, 0}));
    EXPECT_EQ(r.avg_rl_action_freq, 0.0);
}

TEST(RareAction, HandBuiltAveragesAreExact) {
    // visits per state: 20, 10, 40, 8, 16
    CountMatrix c = CountMatrix::Zero(5, kNumActions);
    c(0, 0) = 15; c(0, 4) = 5;
    c(1, 5) = 6;  c(1, 1) = 4;
    c(2, 10) = 30; c(2, 13) = 10;
    c(3, 2) = 6;  c(3, 0) = 2;
    c(4, 20) = 8; c(4, 21) = 8;
    // RL: 4 (vaso bin 4), 1 (vaso 1), 13 (vaso 3), 0, 21
    const auto tp = fixtures::target_from_actions({4, 1, 13, 0, 21});
    TransitionModel m(5, kNumActions, 1);
    const std::int64_t out[5] = {20, 10, 40, 8, 16};
    for (int s = 0; s < 5; ++s) m.add(s, 0, m.surv_code(), out[s]);
    const auto r = rare_action_report(m, BehaviorPolicy(c), tp, 4);
    // Frequencies: s0 .25, s1 .4, s2 .25, s3 .25, s4 .5. Ties on .25 go to
    // more visits: s2 (40), s0 (20), s3 (8); then s1.
    EXPECT_EQ(r.states, (std::vector<StateId>{2, 0, 3, 1}));
    EXPECT_EQ(r.n_states, 4);
    EXPECT_DOUBLE_EQ(r.avg_rl_action_freq, (0.25 + 0.25 + 0.25 + 0.4) / 4);
    EXPECT_DOUBLE_EQ(r.avg_rl_action_count, (10 + 5 + 2 + 4) / 4.0);
    EXPECT_DOUBLE_EQ(r.avg_common_action_freq, (0.75 + 0.75 + 0.75 + 0.6) / 4);
    EXPECT_DOUBLE_EQ(r.avg_common_action_count, (30 + 15 + 6 + 6) / 4.0);
    EXPECT_DOUBLE_EQ(r.transition_mass_fraction, (40.0 + 20 + 8 + 10) / 94.0);
    // Common actions 10, 0, 2, 5 give vasopressor bins 0, 0, 2, 0.
    EXPECT_EQ(r.common_zero_vaso_count, 3);
    // RL actions at those states: 13 (bin 3), 4 (bin 4), 1 (bin 1).
    EXPECT_EQ(r.rl_vaso_count, 3);
    EXPECT_EQ(r.rl_large_vaso_count, 2);
}

TEST(Discharge, HandCountedFractions) {
    const std::vector<DiscreteTrajectory> train = {
        traj("a", {{0, 0}, {0, 1}}, Absorbing::surv),
        traj("b", {{0, 4}}, Absorbing::surv),
        traj("c", {{0, 2}, {0, 0}}, Absorbing::surv),
        traj("d", {{0, 10}}, Absorbing::surv),
        traj("e", {{0, 4}}, Absorbing::death),
        traj("f", {{0, 3}}, Absorbing::surv, true),
    };
    const auto r = discharge_treatment_report(train, {});
    EXPECT_EQ(r.train_uncensored_survivors.n, 4);
    EXPECT_EQ(r.train_uncensored_survivors.frac_nonzero_vaso_at_end, 0.5);
    EXPECT_EQ(r.train_uncensored_survivors.frac_large_vaso_at_end, 0.25);
    EXPECT_EQ(r.train_censored_survivors.n, 1);
    EXPECT_EQ(r.train_censored_survivors.frac_large_vaso_at_end, 1.0);
    EXPECT_EQ(r.rollout_survivors.n, 0);
    EXPECT_FALSE(r.rollout_survivors.frac_nonzero_vaso_at_end.has_value());
}

TEST(Discharge, NoVasopressorGivesZeroFractions) {
    std::vector<SimTrajectory> sims(3);
    for (auto& s : sims) {
        s.steps = {{0, 5}};
        s.terminal = RolloutEnd::surv;
    }
    const auto r = discharge_treatment_report({}, sims);
    EXPECT_EQ(r.rollout_survivors.frac_nonzero_vaso_at_end, 0.0);
    EXPECT_EQ(r.rollout_survivors.frac_large_vaso_at_end, 0.0);
}

TEST(Discharge, LargeNeverExceedsNonzero) {
    const auto s = fixtures::build_study(400, 9, 5);
    const auto r = discharge_treatment_report(s.train_trajectories(), *s.rollouts);
    for (const auto* p : {&r.train_uncensored_survivors, &r.train_censored_survivors, &r.rollout_survivors})
        if (p->n > 0) {
            EXPECT_LE(*p->frac_large_vaso_at_end, *p->frac_nonzero_vaso_at_end);
            EXPECT_LE(*p->frac_nonzero_vaso_at_end, 1.0);
        }
}
