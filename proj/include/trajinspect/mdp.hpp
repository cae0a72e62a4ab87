#ifndef TRAJINSPECT_MDP_HPP
#define TRAJINSPECT_MDP_HPP

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trajinspect/common.hpp"
#include "trajinspect/discretize.hpp"

namespace trajinspect {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Observed next-state counts of one (state, action) pair. Next-state codes
/// are state ids, plus k for survival and k + 1 for mortality.
struct TransitionRow {
    std::map<int, std::int64_t> counts;
    std::int64_t total = 0;

    double prob(int next) const {
        const auto it = counts.find(next);
        return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
    }
    bool operator==(const TransitionRow&) const = default;
};

/// Sparse maximum-likelihood transition model with two absorbing states.
class TransitionModel {
public:
    TransitionModel() = default;
    TransitionModel(int n_states, int n_actions, int min_count);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int min_count() const { return min_count_; }
    int surv_code() const { return n_states_; }
    int death_code() const { return n_states_ + 1; }
    bool is_absorbing(int code) const { return code >= n_states_; }

    /// Adds `count` observations of (s, a) -> next.
    void add(StateId s, ActionId a, int next, std::int64_t count = 1);

    /// Row of (s, a); nullptr when never observed.
    const TransitionRow* row(StateId s, ActionId a) const;
    const std::map<ActionId, TransitionRow>& rows(StateId s) const { return rows_.at(static_cast<std::size_t>(s)); }
    /// Normalized (next, probability) pairs in next-state order.
    std::vector<std::pair<int, double>> probs(StateId s, ActionId a) const;

    /// Actions seen at least min_count times from s, ascending.
    const std::vector<ActionId>& valid_actions(StateId s) const { return valid_.at(static_cast<std::size_t>(s)); }

    std::int64_t transitions_from(StateId s) const;
    std::int64_t total_transitions() const;
    /// Total count into either absorbing state.
    std::int64_t absorbing_transitions() const;

    bool operator==(const TransitionModel&) const = default;

private:
    void check(StateId s, ActionId a) const;

    int n_states_ = 0;
    int n_actions_ = 0;
    int min_count_ = kDefaultMinCount;
    std::vector<std::map<ActionId, TransitionRow>> rows_;
    std::vector<std::vector<ActionId>> valid_;
};

/// Empirical clinician action frequencies per state, before any filtering.
struct BehaviorPolicy {
    CountMatrix support_counts;  ///< n_states x n_actions
    Eigen::MatrixXd probs;       ///< zero rows for unvisited states

    BehaviorPolicy() = default;
    explicit BehaviorPolicy(CountMatrix counts);

    int n_states() const { return static_cast<int>(support_counts.rows()); }
    int n_actions() const { return static_cast<int>(support_counts.cols()); }
    std::int64_t visits(StateId s) const { return support_counts.row(s).sum(); }
    bool visited(StateId s) const { return visits(s) > 0; }
    /// Most frequent action; lowest id on ties.
    ActionId modal_action(StateId s) const;

    bool operator==(const BehaviorPolicy& o) const {
        return support_counts == o.support_counts && probs == o.probs;
    }
};

struct RewardModel {
    double surv_reward = kSurvivalReward;
    double death_reward = kMortalityReward;
    double step_reward = 0.0;

    double absorbing(Absorbing a) const { return a == Absorbing::surv ? surv_reward : death_reward; }
    /// Reward for entering next-state `code` of a model with `n_states` states.
    double on_enter(int code, int n_states) const {
        if (code == n_states) return surv_reward;
        if (code == n_states + 1) return death_reward;
        return step_reward;
    }
};

struct EstimatedMDP {
    TransitionModel model;
    BehaviorPolicy behavior;
    RewardModel reward;
};

/// Counts every consecutive (s, a, s') pair plus the terminal transition of
/// trajectories that absorb. The behavior policy counts every step, rare
/// actions included; only valid_actions applies min_count.
EstimatedMDP estimate(std::span<const DiscreteTrajectory> trajs, int n_states, int n_actions = kNumActions,
                      int min_count = kDefaultMinCount);

BehaviorPolicy estimate_behavior(std::span<const DiscreteTrajectory> trajs, int n_states,
                                 int n_actions = kNumActions);

/// P(SURV | s, a) + P(DEATH | s, a). Throws NotFoundError for an unseen pair.
double termination_prob(const TransitionModel& m, StateId s, ActionId a);

}  // namespace trajinspect

#endif  // TRAJINSPECT_MDP_HPP
