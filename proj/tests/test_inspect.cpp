#include <gtest/gtest.h>

#include <thread>

#include "fixtures.hpp"
#include "trajinspect/inspect.hpp"

using namespace trajinspect;
using fixtures::traj;

namespace {

/// The state visited 632 times: common action 161 times, RL action 6 times.
BehaviorPolicy planted_632_behavior(ActionId rl, ActionId common) {
    return fixtures::behavior_from_counts(2, kNumActions,
                                          {{0, common, 161}, {0, rl, 6}, {0, 10, 150}, {0, 15, 160}, {0, 20, 155},
                                           {1, 0, 10}});
}

}  // namespace

TEST(Heuristic1, FlagsPlanted632StateWithExactFrequencies) {
    const ActionId rl = make_action(4, 2), common = make_action(1, 0);
    const auto bp = planted_632_behavior(rl, common);
    ASSERT_EQ(bp.visits(0), 632);
    const auto flagged = surprising_treatments(bp, fixtures::target_from_actions({rl, 0}));
    ASSERT_EQ(flagged.size(), 1u);
    const auto& t = flagged[0];
    EXPECT_EQ(t.state, 0);
    EXPECT_EQ(t.rl_action_count, 6);
    EXPECT_EQ(t.common_action, common);
    EXPECT_EQ(t.common_action_count, 161);
    EXPECT_NEAR(t.rl_action_freq, 6.0 / 632.0, 1e-12);
    EXPECT_NEAR(t.common_action_freq, 161.0 / 632.0, 1e-12);
    EXPECT_EQ(t.aggressiveness, 5);
}

TEST(Heuristic1, RlEqualsCommonIsExcluded) {
    const auto bp = planted_632_behavior(3, 2);
    EXPECT_TRUE(surprising_treatments(bp, fixtures::target_from_actions({2, 0})).empty());
}

TEST(Heuristic1, LessAggressiveRareActionIsExcluded) {
    const auto bp = fixtures::behavior_from_counts(1, kNumActions, {{0, 12, 99}, {0, 0, 1}});
    EXPECT_TRUE(surprising_treatments(bp, fixtures::target_from_actions({0})).empty());
}

TEST(Heuristic1, PlantedStateIsTheOnlyOneFlagged) {
    CountMatrix c = CountMatrix::Zero(6, kNumActions);
    std::vector<ActionId> rl(6);
    for (int s = 0; s < 6; ++s) {
        c(s, 6) = 200;
        c(s, 12) = 50;
        rl[s] = 12;
    }
    c(4, 24) = 1;  // planted: the RL action is a single observation out of 251
    rl[4] = 24;
    const auto flagged = surprising_treatments(BehaviorPolicy(c), fixtures::target_from_actions(rl));
    ASSERT_EQ(flagged.size(), 1u);
    EXPECT_EQ(flagged[0].state, 4);
}

TEST(Heuristic1, ThresholdBoundaryIsInclusive) {
    const auto bp = fixtures::behavior_from_counts(1, kNumActions, {{0, 0, 99}, {0, 24, 1}});
    const auto tp = fixtures::target_from_actions({24});
    EXPECT_EQ(surprising_treatments(bp, tp, 0.01).size(), 1u);
    EXPECT_TRUE(surprising_treatments(bp, tp, 0.0099).empty());
}

TEST(Heuristic1, RankingIsTotalAndCommonDominates) {
    const auto s = fixtures::build_study(500, 13, 8);
    const auto ranked = rank_by_rl_action_frequency(*s.behavior, *s.policy);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& t = ranked[i];
        EXPECT_GE(t.common_action_count, t.rl_action_count);
        EXPECT_EQ(t.rl_action_freq, static_cast<double>(t.rl_action_count) / static_cast<double>(t.visits));
        EXPECT_EQ(t.aggressiveness, intensity(t.rl_action) - intensity(t.common_action));
        EXPECT_EQ(t.common_action, s.behavior->modal_action(t.state));
        if (i == 0) continue;
        const auto& p = ranked[i - 1];
        const bool ordered = p.rl_action_freq < t.rl_action_freq ||
                             (p.rl_action_freq == t.rl_action_freq &&
                              (p.visits > t.visits || (p.visits == t.visits && p.state < t.state)));
        EXPECT_TRUE(ordered) << "position " << i;
    }
    EXPECT_EQ(ranked, rank_by_rl_action_frequency(*s.behavior, *s.policy));
}

TEST(Heuristic1, ReportAnchorsAtCommonActionStep) {
    const std::vector<DiscreteTrajectory> train = {
        traj("a", {{1, 0}, {0, 24}, {0, 6}}, Absorbing::surv),
        traj("b", {{1, 0}, {0, 6}}, Absorbing::death),
    };
    const auto bp = fixtures::behavior_from_counts(2, kNumActions, {{0, 6, 500}, {0, 24, 2}, {1, 0, 5}});
    const auto rep = treatment_report(train, bp, fixtures::target_from_actions({24, 0}), 0.01);
    EXPECT_EQ(rep.n_eligible, 2u);
    ASSERT_EQ(rep.flagged.size(), 1u);
    ASSERT_TRUE(rep.flagged[0].anchor.has_value());
    EXPECT_EQ(*rep.flagged[0].anchor, (CaseAnchor{"b", 1}));
}

TEST(Heuristic2, ObservedDeathWithCertainSurvivalGivesTwoHundred) {
    TransitionModel m(2, 1, 1);
    m.add(0, 0, m.surv_code(), 10);
    m.add(1, 0, m.surv_code(), 1);
    m.add(1, 0, m.death_code(), 1);
    const std::vector<DiscreteTrajectory> test = {
        traj("s1", {{1, 0}}, Absorbing::surv),
        traj("d0", {{0, 0}, {1, 0}}, Absorbing::death),
    };
    const auto r = surprising_outcomes(test, m, fixtures::target_from_actions({0, 0}), 5, 3);
    ASSERT_FALSE(r.ranked.empty());
    EXPECT_EQ(r.ranked[0].initial_state, 0);
    EXPECT_EQ(r.ranked[0].gap, 200.0);
    EXPECT_EQ(r.ranked[0].trajectory_ids, std::vector<std::string>{"d0"});
}

TEST(Heuristic2, AgreementGivesZeroGap) {
    TransitionModel m(1, 1, 1);
    m.add(0, 0, m.surv_code(), 4);
    const std::vector<DiscreteTrajectory> test = {traj("a", {{0, 0}}, Absorbing::surv)};
    const auto r = surprising_outcomes(test, m, fixtures::target_from_actions({0}));
    EXPECT_EQ(r.ranked.at(0).gap, 0.0);
    EXPECT_EQ(r.overall_mean_gap, 0.0);
}

TEST(Heuristic2, GapMatchesExactAbsorptionWithinThreeSigma) {
    // Survival 3/4, death 1/4: expected roll-out reward is 50.
    TransitionModel m(1, 1, 1);
    m.add(0, 0, m.surv_code(), 3);
    m.add(0, 0, m.death_code(), 1);
    std::vector<DiscreteTrajectory> test;
    for (int i = 0; i < 400; ++i) test.push_back(traj("t" + std::to_string(i), {{0, 0}}, Absorbing::surv));
    const auto r = surprising_outcomes(test, m, fixtures::target_from_actions({0}), 5, 8);
    const double n = 400 * 5;
    const double sigma = 200.0 * std::sqrt(0.75 * 0.25) / std::sqrt(n);
    EXPECT_LE(std::abs(r.ranked.at(0).gap - (50.0 - 100.0)), 3 * sigma);
}

TEST(Heuristic2, StateGapAveragesExactlyItsTrajectories) {
    const auto s = fixtures::build_study(500, 21, 6);
    const auto test = s.test_trajectories();
    const auto r = surprising_outcomes(test, *s.model, *s.policy, 5, 77);
    const Policy p = Policy::from_target(*s.policy, kNumActions);
    double total = 0;
    int used = 0;
    for (const auto& o : r.ranked) {
        double roll = 0, obs = 0;
        for (const auto& id : o.trajectory_ids) {
            const auto it = std::find_if(test.begin(), test.end(), [&](const auto& t) { return t.id == id; });
            ASSERT_NE(it, test.end());
            EXPECT_EQ(it->steps.front().state, o.initial_state);
            const auto i = static_cast<std::size_t>(it - test.begin());
            double sum = 0;
            for (int j = 0; j < 5; ++j)
                sum += simulate(*s.model, p, o.initial_state, 20, rollout_seed(77, i, j)).reward.value_or(0.0);
            roll += sum / 5;
            obs += *it->reward();
            total += sum / 5 - *it->reward();
            ++used;
        }
        EXPECT_EQ(o.n_trajectories, static_cast<int>(o.trajectory_ids.size()));
        EXPECT_NEAR(o.gap, (roll - obs) / o.n_trajectories, 1e-9);
        EXPECT_GE(o.gap, -200.0);
        EXPECT_LE(o.gap, 200.0);
    }
    EXPECT_NEAR(r.overall_mean_gap, total / used, 1e-9);
    EXPECT_EQ(static_cast<std::size_t>(used) + r.skipped, test.size());
}

TEST(Cases, TreatmentCaseStartsAtAnchoredState) {
    const auto s = fixtures::build_study(300, 4, 5);
    const auto& trajs = *s.trajectories;
    const auto it = std::find_if(trajs.begin(), trajs.end(), [](const auto& t) { return t.steps.size() >= 4; });
    ASSERT_NE(it, trajs.end());
    const StateId st = it->steps[3].state;
    const auto c = build_case("c1", CaseKind::treatment, {it->id, 3}, st, trajs, *s.model, *s.policy, 5, 42);
    EXPECT_EQ(c.anchor_state, st);
    ASSERT_EQ(c.rollouts.size(), 5u);
    for (const auto& r : c.rollouts) {
        EXPECT_EQ(r.start_state, st);
        EXPECT_LE(r.length(), 20 - 3);
    }
    EXPECT_EQ(c, build_case("c1", CaseKind::treatment, {it->id, 3}, st, trajs, *s.model, *s.policy, 5, 42));
    EXPECT_THROW(build_case("c2", CaseKind::treatment, {it->id, 3}, (st + 1) % 5, trajs, *s.model, *s.policy),
                 ConflictError);
    EXPECT_THROW(build_case("c3", CaseKind::outcome, {it->id, 2}, std::nullopt, trajs, *s.model, *s.policy),
                 ValidationError);
    EXPECT_THROW(build_case("c4", CaseKind::outcome, {"nope", 0}, std::nullopt, trajs, *s.model, *s.policy),
                 NotFoundError);
    EXPECT_THROW(build_case("c5", CaseKind::treatment, {it->id, 99}, std::nullopt, trajs, *s.model, *s.policy),
                 ValidationError);
    const auto o = build_case("c6", CaseKind::outcome, {it->id, 0}, std::nullopt, trajs, *s.model, *s.policy);
    for (const auto& r : o.rollouts) EXPECT_EQ(r.start_state, it->steps[0].state);
}

TEST(Cases, EarliestAnchorPrefersEarlyStepThenFirstTrajectory) {
    const std::vector<DiscreteTrajectory> t = {
        traj("a", {{1, 0}, {1, 0}, {2, 3}}, Absorbing::surv),
        traj("b", {{0, 0}, {2, 4}}, Absorbing::surv),
        traj("c", {{3, 0}, {2, 3}}, Absorbing::surv),
    };
    EXPECT_EQ(earliest_anchor(t, 2), (CaseAnchor{"b", 1}));
    EXPECT_EQ(earliest_anchor(t, 2, 3), (CaseAnchor{"c", 1}));
    EXPECT_FALSE(earliest_anchor(t, 9).has_value());
}

TEST(CaseStore, AnnotationsKeepOrderAndPersist) {
    std::vector<InspectionCase> persisted;
    CaseStore store({}, [&](const InspectionCase& c) { persisted.push_back(c); });
    InspectionCase c;
    c.id = store.next_id();
    store.add(c);
    EXPECT_THROW(store.add(c), ConflictError);
    store.annotate(c.id, "r1", "first", Verdict::plausible);
    const auto after = store.annotate(c.id, "r2", "second", Verdict::implausible);
    ASSERT_EQ(after.annotations.size(), 2u);
    EXPECT_EQ(after.annotations[0].text, "first");
    EXPECT_EQ(after.annotations[1].verdict, Verdict::implausible);
    EXPECT_EQ(after.annotations[1].timestamp.size(), 24u);
    EXPECT_EQ(persisted.back(), after);
    EXPECT_THROW(store.annotate("missing", "r", "t", Verdict::plausible), NotFoundError);
    EXPECT_THROW(store.annotate(c.id, "", "t", Verdict::plausible), ValidationError);
}

TEST(CaseStore, ConcurrentAnnotationsOnDistinctCases) {
    std::mutex m;
    std::size_t writes = 0;
    CaseStore store({}, [&](const InspectionCase&) {
        std::lock_guard lock(m);
        ++writes;
    });
    for (int i = 0; i < 4; ++i) {
        InspectionCase c;
        c.id = "case-" + std::to_string(i);
        store.add(c);
    }
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i)
        threads.emplace_back([&, i] {
            for (int k = 0; k < 50; ++k)
                store.annotate("case-" + std::to_string(i), "t" + std::to_string(i), std::to_string(k),
                               Verdict::suspicious);
        });
    for (auto& t : threads) t.join();
    for (int i = 0; i < 4; ++i) {
        const auto c = store.get("case-" + std::to_string(i));
        ASSERT_EQ(c.annotations.size(), 50u);
        for (int k = 0; k < 50; ++k) {
            EXPECT_EQ(c.annotations[k].text, std::to_string(k));
            EXPECT_EQ(c.annotations[k].author, "t" + std::to_string(i));
        }
    }
    EXPECT_EQ(writes, 4u + 200u);
}

TEST(Vocabulary, NamesRoundTrip) {
    for (auto v : {Verdict::plausible, Verdict::suspicious, Verdict::implausible})
        EXPECT_EQ(parse_verdict(to_string(v)), v);
    for (auto k : {CaseKind::treatment, CaseKind::outcome}) EXPECT_EQ(parse_case_kind(to_string(k)), k);
    EXPECT_THROW(parse_verdict("maybe"), ValidationError);
}
