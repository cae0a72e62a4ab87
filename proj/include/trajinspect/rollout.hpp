#ifndef TRAJINSPECT_ROLLOUT_HPP
#define TRAJINSPECT_ROLLOUT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trajinspect/mdp.hpp"
#include "trajinspect/planner.hpp"

namespace trajinspect {

enum class RolloutEnd {
    surv,
    death,
    truncated,  ///< reached max_steps without absorbing
    dead_end    ///< policy undefined or (s, a) never observed; aborted
};

std::string_view to_string(RolloutEnd e);
RolloutEnd parse_rollout_end(std::string_view s);

struct SimTrajectory {
    StateId start_state = 0;
    std::vector<DiscreteStep> steps;
    RolloutEnd terminal = RolloutEnd::truncated;
    std::optional<double> reward;
    std::uint64_t seed = 0;
    std::string policy_tag;

    int length() const { return static_cast<int>(steps.size()); }
    bool operator==(const SimTrajectory&) const = default;
};

/// Samples an action from the policy, then the next state from the model,
/// until absorption or max_steps. Deterministic given seed.
SimTrajectory simulate(const TransitionModel& m, const Policy& p, StateId s0, int max_steps, std::uint64_t seed);

struct RolloutStart {
    StateId state = 0;
    int n_rollouts = kDefaultRollouts;
};

/// Seed of roll-out `rollout_index` from start `start_index`.
std::uint64_t rollout_seed(std::uint64_t seed, std::size_t start_index, std::size_t rollout_index);

/// Roll-outs for every start in order; start i's roll-out j uses
/// rollout_seed(seed, i, j).
std::vector<SimTrajectory> batch(const TransitionModel& m, const Policy& p, const std::vector<RolloutStart>& starts,
                                 int max_steps, std::uint64_t seed);

}  // namespace trajinspect

#endif  // TRAJINSPECT_ROLLOUT_HPP
