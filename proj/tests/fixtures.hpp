#ifndef TRAJINSPECT_TESTS_FIXTURES_HPP
#define TRAJINSPECT_TESTS_FIXTURES_HPP

#include <atomic>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "trajinspect/bundle.hpp"
#include "trajinspect/cohort.hpp"
#include "trajinspect/diagnostics.hpp"
#include "trajinspect/discretize.hpp"
#include "trajinspect/inspect.hpp"
#include "trajinspect/mdp.hpp"
#include "trajinspect/planner.hpp"
#include "trajinspect/rng.hpp"
#include "trajinspect/rollout.hpp"

namespace fixtures {

using namespace trajinspect;

/// Directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("trajinspect-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

/// Discrete trajectory with the absorbs flag set as terminal_reward would.
inline DiscreteTrajectory traj(std::string id, std::initializer_list<std::pair<int, int>> steps,
                               std::optional<Absorbing> terminal, bool censored = false) {
    DiscreteTrajectory t;
    t.id = std::move(id);
    for (auto [s, a] : steps) t.steps.push_back({s, a});
    t.terminal = terminal;
    t.censored = censored;
    t.absorbs = terminal.has_value();
    return t;
}

/// Behavior counts for a single state, everything else empty.
inline BehaviorPolicy behavior_from_counts(int n_states, int n_actions,
                                           std::initializer_list<std::tuple<int, int, std::int64_t>> counts) {
    CountMatrix c = CountMatrix::Zero(n_states, n_actions);
    for (auto [s, a, n] : counts) c(s, a) = n;
    return BehaviorPolicy(c);
}

inline TargetPolicy target_from_actions(std::vector<ActionId> actions) {
    TargetPolicy tp;
    tp.action = std::move(actions);
    tp.fallback.assign(tp.action.size(), false);
    tp.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tp.action.size()));
    return tp;
}

/// Runs every stage in-process on a small synthetic cohort, the way the CLI
/// would, so bundle and service tests have a fully populated study.
inline Study build_study(std::size_t n_trajectories = 400, std::uint64_t seed = 11, int k = 6) {
    Study s;
    s.manifest.config.k = k;
    s.manifest.config.n_bootstrap = 50;
    s.manifest.config.top_n = 5;
    s.manifest.seeds = {seed, seed + 1, seed + 2, seed + 3, seed + 4};
    s.ground_truth = random_ground_truth(k, 4, 3, derive_seed(seed, 0));
    s.cohort = generate_synthetic(*s.ground_truth, n_trajectories, seed);
    s.cohort->trajectories[0].record_text = "note, with \"quotes\"\nand a newline";
    const auto [train, test] = split(*s.cohort, 0.8, s.manifest.seeds.split);
    CohortSplit sp;
    for (const auto& t : train.trajectories) sp.train_ids.push_back(t.id);
    for (const auto& t : test.trajectories) sp.test_ids.push_back(t.id);
    s.split = sp;
    s.states = fit_states(train, k, s.manifest.seeds.clustering);
    s.actions = fit_actions(train);
    s.state_medians = state_medians(train, *s.states);
    s.trajectories = discretize_cohort(*s.cohort, *s.states, *s.actions);
    const auto tr = s.train_trajectories();
    auto mdp = estimate(tr, k, kNumActions, s.manifest.config.min_count);
    s.model = mdp.model;
    s.behavior = mdp.behavior;
    s.policy = solve(*s.model, RewardModel{});
    const auto te = s.test_trajectories();
    std::vector<RolloutStart> starts;
    for (const auto& t : te) starts.push_back({t.steps.front().state, 5});
    s.rollouts = batch(*s.model, Policy::from_target(*s.policy, kNumActions), starts, kMaxSteps,
                       s.manifest.seeds.rollout);
    s.treatment_report = treatment_report(tr, *s.behavior, *s.policy, 0.5);
    s.outcome_report = surprising_outcomes(te, *s.model, *s.policy, 5, s.manifest.seeds.rollout);
    s.length_report = length_report(tr, *s.model, *s.behavior, 2, s.manifest.seeds.rollout);
    s.termination_report = termination_bias(*s.model, tr, 50, s.manifest.seeds.bootstrap);
    s.rare_action_report = rare_action_report(*s.model, *s.behavior, *s.policy, 5);
    s.discharge_report = discharge_treatment_report(tr, *s.rollouts);
    const auto& first = te.front();
    auto c = build_case("case-0001", CaseKind::outcome, {first.id, 0}, std::nullopt, *s.trajectories, *s.model,
                        *s.policy, 3, 99);
    c.annotations.push_back({"2026-01-02T03:04:05Z", "reviewer", "looks fine", Verdict::plausible});
    s.cases.push_back(std::move(c));
    return s;
}

}  // namespace fixtures

#endif  // TRAJINSPECT_TESTS_FIXTURES_HPP
