#include "trajinspect/rollout.hpp"

#include "trajinspect/rng.hpp"

namespace trajinspect {

std::string_view to_string(RolloutEnd e) {
    switch (e) {
        case RolloutEnd::surv: return "SURV";
        case RolloutEnd::death: return "DEATH";
        case RolloutEnd::truncated: return "TRUNCATED";
        case RolloutEnd::dead_end: return "DEAD_END";
    }
    return "TRUNCATED";
}

RolloutEnd parse_rollout_end(std::string_view s) {
    if (s == "SURV") return RolloutEnd::surv;
    if (s == "DEATH") return RolloutEnd::death;
    if (s == "TRUNCATED") return RolloutEnd::truncated;
    if (s == "DEAD_END") return RolloutEnd::dead_end;
    throw ValidationError("unknown roll-out terminal '" + std::string(s) + "'");
}

SimTrajectory simulate(const TransitionModel& m, const Policy& p, StateId s0, int max_steps, std::uint64_t seed) {
    if (s0 < 0 || s0 >= m.n_states()) throw ValidationError("start state " + std::to_string(s0) + " out of range");
    if (max_steps < 1) throw ValidationError("max_steps must be positive");
    if (p.n_states() != m.n_states() || p.probs.cols() != m.n_actions())
        throw ValidationError("policy shape does not match the model");

    SimTrajectory out;
    out.start_state = s0;
    out.seed = seed;
    out.policy_tag = p.tag;
    Rng rng(seed);
    std::vector<double> weights;
    StateId s = s0;
    while (out.length() < max_steps) {
        if (!p.defined(s)) {
            out.terminal = RolloutEnd::dead_end;
            return out;
        }
        const auto a = static_cast<ActionId>(rng.categorical(p.probs.row(s)));
        const auto* row = m.row(s, a);
        out.steps.push_back({s, a});
        if (!row) {
            out.terminal = RolloutEnd::dead_end;
            return out;
        }
        weights.clear();
        for (const auto& [next, c] : row->counts) weights.push_back(static_cast<double>(c));
        auto it = row->counts.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(rng.categorical(weights)));
        const int next = it->first;
        if (next == m.surv_code() || next == m.death_code()) {
            out.terminal = next == m.surv_code() ? RolloutEnd::surv : RolloutEnd::death;
            out.reward = next == m.surv_code() ? kSurvivalReward : kMortalityReward;
            return out;
        }
        s = next;
    }
    out.terminal = RolloutEnd::truncated;
    return out;
}

std::uint64_t rollout_seed(std::uint64_t seed, std::size_t start_index, std::size_t rollout_index) {
    return derive_seed(seed, start_index, rollout_index);
}

std::vector<SimTrajectory> batch(const TransitionModel& m, const Policy& p, const std::vector<RolloutStart>& starts,
                                 int max_steps, std::uint64_t seed) {
    std::vector<SimTrajectory> out;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        if (starts[i].n_rollouts < 0) throw ValidationError("n_rollouts must be non-negative");
        for (int j = 0; j < starts[i].n_rollouts; ++j)
            out.push_back(simulate(m, p, starts[i].state, max_steps,
                                   rollout_seed(seed, i, static_cast<std::size_t>(j))));
    }
    return out;
}

}  // namespace trajinspect
