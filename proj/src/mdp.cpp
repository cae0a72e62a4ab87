#include "trajinspect/mdp.hpp"

#include <algorithm>

namespace trajinspect {

TransitionModel::TransitionModel(int n_states, int n_actions, int min_count)
    : n_states_(n_states),
      n_actions_(n_actions),
      min_count_(min_count),
      rows_(static_cast<std::size_t>(n_states)),
      valid_(static_cast<std::size_t>(n_states)) {
    if (n_states < 1 || n_actions < 1) throw ValidationError("model needs at least one state and action");
    if (min_count < 1) throw ValidationError("min_count must be positive");
}

void TransitionModel::check(StateId s, ActionId a) const {
    if (s < 0 || s >= n_states_) throw ValidationError("state " + std::to_string(s) + " out of range");
    if (a < 0 || a >= n_actions_) throw ValidationError("action " + std::to_string(a) + " out of range");
}

void TransitionModel::add(StateId s, ActionId a, int next, std::int64_t count) {
    check(s, a);
    if (next < 0 || next > death_code()) throw ValidationError("next state " + std::to_string(next) + " out of range");
    if (count < 0) throw ValidationError("negative transition count");
    if (count == 0) return;
    auto& row = rows_[static_cast<std::size_t>(s)][a];
    row.counts[next] += count;
    row.total += count;
    auto& valid = valid_[static_cast<std::size_t>(s)];
    if (row.total >= min_count_) {
        const auto it = std::lower_bound(valid.begin(), valid.end(), a);
        if (it == valid.end() || *it != a) valid.insert(it, a);
    }
}

const TransitionRow* TransitionModel::row(StateId s, ActionId a) const {
    check(s, a);
    const auto& m = rows_[static_cast<std::size_t>(s)];
    const auto it = m.find(a);
    return it == m.end() ? nullptr : &it->second;
}

std::vector<std::pair<int, double>> TransitionModel::probs(StateId s, ActionId a) const {
    std::vector<std::pair<int, double>> out;
    if (const auto* r = row(s, a)) {
        out.reserve(r->counts.size());
        for (const auto& [next, c] : r->counts)
            out.emplace_back(next, static_cast<double>(c) / static_cast<double>(r->total));
    }
    return out;
}

std::int64_t TransitionModel::transitions_from(StateId s) const {
    std::int64_t n = 0;
    for (const auto& [a, r] : rows_.at(static_cast<std::size_t>(s))) n += r.total;
    return n;
}

std::int64_t TransitionModel::total_transitions() const {
    std::int64_t n = 0;
    for (int s = 0; s < n_states_; ++s) n += transitions_from(s);
    return n;
}

std::int64_t TransitionModel::absorbing_transitions() const {
    std::int64_t n = 0;
    for (const auto& by_action : rows_)
        for (const auto& [a, r] : by_action)
            for (const auto& [next, c] : r.counts)
                if (is_absorbing(next)) n += c;
    return n;
}

BehaviorPolicy::BehaviorPolicy(CountMatrix counts) : support_counts(std::move(counts)) {
    probs = Eigen::MatrixXd::Zero(support_counts.rows(), support_counts.cols());
    for (Eigen::Index s = 0; s < support_counts.rows(); ++s) {
        const std::int64_t total = support_counts.row(s).sum();
        if (total == 0) continue;
        for (Eigen::Index a = 0; a < support_counts.cols(); ++a)
            probs(s, a) = static_cast<double>(support_counts(s, a)) / static_cast<double>(total);
    }
}

ActionId BehaviorPolicy::modal_action(StateId s) const {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < support_counts.cols(); ++a)
        if (support_counts(s, a) > support_counts(s, best)) best = a;
    return static_cast<ActionId>(best);
}

BehaviorPolicy estimate_behavior(std::span<const DiscreteTrajectory> trajs, int n_states, int n_actions) {
    CountMatrix counts = CountMatrix::Zero(n_states, n_actions);
    for (const auto& t : trajs)
        for (const auto& step : t.steps) {
            if (step.state < 0 || step.state >= n_states || step.action < 0 || step.action >= n_actions)
                throw ValidationError("trajectory '" + t.id + "' has a state or action out of range");
            ++counts(step.state, step.action);
        }
    return BehaviorPolicy(std::move(counts));
}

EstimatedMDP estimate(std::span<const DiscreteTrajectory> trajs, int n_states, int n_actions, int min_count) {
    if (trajs.empty()) throw ValidationError("estimate needs at least one trajectory");
    EstimatedMDP out{TransitionModel(n_states, n_actions, min_count), estimate_behavior(trajs, n_states, n_actions),
                     RewardModel{}};
    for (const auto& t : trajs) {
        for (std::size_t i = 0; i + 1 < t.steps.size(); ++i)
            out.model.add(t.steps[i].state, t.steps[i].action, t.steps[i + 1].state);
        if (t.absorbs) {
            if (!t.terminal) throw ValidationError("trajectory '" + t.id + "' absorbs without an outcome");
            const int code = *t.terminal == Absorbing::surv ? out.model.surv_code() : out.model.death_code();
            out.model.add(t.steps.back().state, t.steps.back().action, code);
        }
    }
    return out;
}

double termination_prob(const TransitionModel& m, StateId s, ActionId a) {
    const auto* r = m.row(s, a);
    if (!r)
        throw NotFoundError("no transitions observed for state " + std::to_string(s) + ", action " +
                            std::to_string(a));
    return r->prob(m.surv_code()) + r->prob(m.death_code());
}

}  // namespace trajinspect
