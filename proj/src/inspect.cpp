#include "trajinspect/inspect.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>

namespace trajinspect {

std::vector<TreatmentSurprise> rank_by_rl_action_frequency(const BehaviorPolicy& bp, const TargetPolicy& tp) {
    if (bp.n_states() != tp.n_states())
        throw ValidationError("behavior and target policies cover different state spaces");
    std::vector<TreatmentSurprise> out;
    for (StateId s = 0; s < bp.n_states(); ++s) {
        const auto visits = bp.visits(s);
        if (visits == 0 || tp.fallback[static_cast<std::size_t>(s)]) continue;
        TreatmentSurprise t;
        t.state = s;
        t.visits = visits;
        t.rl_action = tp.action[static_cast<std::size_t>(s)];
        t.rl_action_count = t.rl_action < bp.n_actions() ? bp.support_counts(s, t.rl_action) : 0;
        t.rl_action_freq = static_cast<double>(t.rl_action_count) / static_cast<double>(visits);
        t.common_action = bp.modal_action(s);
        t.common_action_count = bp.support_counts(s, t.common_action);
        t.common_action_freq = static_cast<double>(t.common_action_count) / static_cast<double>(visits);
        t.aggressiveness = intensity(t.rl_action) - intensity(t.common_action);
        out.push_back(t);
    }
    std::stable_sort(out.begin(), out.end(), [](const TreatmentSurprise& a, const TreatmentSurprise& b) {
        if (a.rl_action_freq != b.rl_action_freq) return a.rl_action_freq < b.rl_action_freq;
        if (a.visits != b.visits) return a.visits > b.visits;
        return a.state < b.state;
    });
    return out;
}

std::vector<TreatmentSurprise> surprising_treatments(const BehaviorPolicy& bp, const TargetPolicy& tp,
                                                     double freq_threshold) {
    auto ranked = rank_by_rl_action_frequency(bp, tp);
    std::erase_if(ranked, [&](const TreatmentSurprise& t) {
        return !(t.rl_action_freq <= freq_threshold && t.aggressiveness > 0);
    });
    return ranked;
}

OutcomeRanking surprising_outcomes(std::span<const DiscreteTrajectory> test_trajs, const TransitionModel& m,
                                   const TargetPolicy& tp, int n_rollouts, std::uint64_t seed, int max_steps) {
    if (n_rollouts < 1) throw ValidationError("n_rollouts must be positive");
    if (tp.n_states() != m.n_states()) throw ValidationError("target policy does not match the model");
    const Policy policy = Policy::from_target(tp, m.n_actions());

    struct Acc {
        double rollout_sum = 0.0;
        double observed_sum = 0.0;
        int n = 0;
        std::vector<std::string> ids;
    };
    std::map<StateId, Acc> by_state;
    OutcomeRanking out;
    double gap_sum = 0.0;
    int n_used = 0;
    for (std::size_t i = 0; i < test_trajs.size(); ++i) {
        const auto& t = test_trajs[i];
        const auto observed = t.reward();
        const StateId s0 = t.steps.front().state;
        if (!observed || s0 < 0 || s0 >= m.n_states() || !m.row(s0, tp.action[static_cast<std::size_t>(s0)])) {
            ++out.skipped;
            continue;
        }
        double sum = 0.0;
        for (int j = 0; j < n_rollouts; ++j) {
            const auto r = simulate(m, policy, s0, max_steps, rollout_seed(seed, i, static_cast<std::size_t>(j)));
            if (r.terminal == RolloutEnd::dead_end) ++out.dead_end_rollouts;
            sum += r.reward.value_or(0.0);
        }
        const double mean = sum / n_rollouts;
        auto& acc = by_state[s0];
        acc.ids.push_back(t.id);
        acc.rollout_sum += mean;
        acc.observed_sum += *observed;
        ++acc.n;
        gap_sum += mean - *observed;
        ++n_used;
    }
    for (const auto& [s, acc] : by_state) {
        OutcomeSurprise o;
        o.initial_state = s;
        o.n_trajectories = acc.n;
        o.mean_rollout_reward = acc.rollout_sum / acc.n;
        o.observed_mean_reward = acc.observed_sum / acc.n;
        o.gap = o.mean_rollout_reward - o.observed_mean_reward;
        o.trajectory_ids = acc.ids;
        out.ranked.push_back(o);
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const OutcomeSurprise& a, const OutcomeSurprise& b) {
        if (a.gap != b.gap) return a.gap > b.gap;
        return a.initial_state < b.initial_state;
    });
    out.overall_mean_gap = n_used ? gap_sum / n_used : 0.0;
    return out;
}

TreatmentReport treatment_report(std::span<const DiscreteTrajectory> train, const BehaviorPolicy& bp,
                                 const TargetPolicy& tp, double freq_threshold) {
    TreatmentReport rep;
    rep.freq_threshold = freq_threshold;
    rep.n_eligible = rank_by_rl_action_frequency(bp, tp).size();
    for (const auto& t : surprising_treatments(bp, tp, freq_threshold))
        rep.flagged.push_back({t, earliest_anchor(train, t.state, t.common_action)});
    return rep;
}

std::string_view to_string(CaseKind k) { return k == CaseKind::treatment ? "treatment" : "outcome"; }

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::plausible: return "plausible";
        case Verdict::suspicious: return "suspicious";
        case Verdict::implausible: return "implausible";
    }
    return "plausible";
}

CaseKind parse_case_kind(std::string_view s) {
    if (s == "treatment") return CaseKind::treatment;
    if (s == "outcome") return CaseKind::outcome;
    throw ValidationError("unknown case kind '" + std::string(s) + "' (expected treatment or outcome)");
}

Verdict parse_verdict(std::string_view s) {
    if (s == "plausible") return Verdict::plausible;
    if (s == "suspicious") return Verdict::suspicious;
    if (s == "implausible") return Verdict::implausible;
    throw ValidationError("unknown verdict '" + std::string(s) + "' (expected plausible, suspicious or implausible)");
}

std::optional<CaseAnchor> earliest_anchor(std::span<const DiscreteTrajectory> trajs, StateId state,
                                          std::optional<ActionId> action) {
    std::optional<CaseAnchor> best;
    for (const auto& t : trajs)
        for (std::size_t i = 0; i < t.steps.size(); ++i)
            if (t.steps[i].state == state && (!action || t.steps[i].action == *action)) {
                if (!best || static_cast<int>(i) < best->step_index) best = CaseAnchor{t.id, static_cast<int>(i)};
                break;
            }
    return best;
}

std::vector<SimTrajectory> case_rollouts(const TransitionModel& m, const TargetPolicy& tp, StateId state,
                                         int step_index, int n, std::uint64_t seed) {
    if (n < 0) throw ValidationError("number of roll-outs must be non-negative");
    const Policy policy = Policy::from_target(tp, m.n_actions());
    return batch(m, policy, {{state, n}}, std::max(1, kMaxSteps - step_index), seed);
}

InspectionCase build_case(std::string case_id, CaseKind kind, const CaseAnchor& anchor,
                          std::optional<StateId> flagged_state, std::span<const DiscreteTrajectory> trajs,
                          const TransitionModel& m, const TargetPolicy& tp, int n_rollouts, std::uint64_t seed) {
    const auto it = std::find_if(trajs.begin(), trajs.end(),
                                 [&](const DiscreteTrajectory& t) { return t.id == anchor.trajectory_id; });
    if (it == trajs.end()) throw NotFoundError("unknown trajectory '" + anchor.trajectory_id + "'");
    InspectionCase c;
    c.id = std::move(case_id);
    c.kind = kind;
    c.anchor = anchor;
    if (kind == CaseKind::outcome) {
        if (anchor.step_index != 0) throw ValidationError("outcome cases anchor at the initial step");
    } else if (anchor.step_index < 0 || anchor.step_index >= static_cast<int>(it->steps.size())) {
        throw ValidationError("step index " + std::to_string(anchor.step_index) + " outside trajectory '" +
                              anchor.trajectory_id + "'");
    }
    c.anchor_state = it->steps[static_cast<std::size_t>(c.anchor.step_index)].state;
    if (flagged_state && *flagged_state != c.anchor_state)
        throw ConflictError("trajectory '" + anchor.trajectory_id + "' step " + std::to_string(anchor.step_index) +
                            " is in state " + std::to_string(c.anchor_state) + ", not flagged state " +
                            std::to_string(*flagged_state));
    c.flagged_state = flagged_state;
    c.rollouts = case_rollouts(m, tp, c.anchor_state, c.anchor.step_index, n_rollouts, seed);
    return c;
}

std::string utc_timestamp() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

CaseStore::CaseStore(std::vector<InspectionCase> cases, Persist persist) : persist_(std::move(persist)) {
    for (auto& c : cases) {
        auto e = std::make_unique<Entry>();
        const std::string id = c.id;
        e->value = std::move(c);
        if (!cases_.emplace(id, std::move(e)).second) throw ValidationError("duplicate case id '" + id + "'");
    }
}

std::string CaseStore::next_id() const {
    std::shared_lock lock(map_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "case-%04zu", cases_.size() + 1);
    return buf;
}

InspectionCase CaseStore::add(InspectionCase c) {
    std::unique_lock lock(map_mutex_);
    if (c.id.empty()) {
        std::size_t n = cases_.size() + 1;
        char buf[32];
        do {
            std::snprintf(buf, sizeof buf, "case-%04zu", n++);
        } while (cases_.count(buf));
        c.id = buf;
    }
    if (cases_.count(c.id)) throw ConflictError("case '" + c.id + "' already exists");
    if (persist_) persist_(c);
    auto e = std::make_unique<Entry>();
    e->value = c;
    cases_.emplace(c.id, std::move(e));
    return c;
}

CaseStore::Entry& CaseStore::entry(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    const auto it = cases_.find(id);
    if (it == cases_.end()) throw NotFoundError("unknown case '" + id + "'");
    return *it->second;
}

InspectionCase CaseStore::get(const std::string& id) const {
    auto& e = entry(id);
    std::lock_guard lock(e.write);
    return e.value;
}

std::vector<InspectionCase> CaseStore::list() const {
    std::vector<Entry*> entries;
    {
        std::shared_lock lock(map_mutex_);
        for (const auto& [id, e] : cases_) entries.push_back(e.get());
    }
    std::vector<InspectionCase> out;
    out.reserve(entries.size());
    for (auto* e : entries) {
        std::lock_guard lock(e->write);
        out.push_back(e->value);
    }
    return out;
}

std::size_t CaseStore::size() const {
    std::shared_lock lock(map_mutex_);
    return cases_.size();
}

InspectionCase CaseStore::annotate(const std::string& id, const std::string& author, const std::string& text,
                                   Verdict verdict) {
    if (author.empty()) throw ValidationError("annotation author must not be empty");
    auto& e = entry(id);
    std::lock_guard lock(e.write);
    InspectionCase updated = e.value;
    updated.annotations.push_back({utc_timestamp(), author, text, verdict});
    if (persist_) persist_(updated);
    e.value = updated;
    return updated;
}

InspectionCase CaseStore::append_rollouts(
    const std::string& id, const std::function<std::vector<SimTrajectory>(const InspectionCase&)>& make) {
    auto& e = entry(id);
    // Anchors never change, so roll-outs are computed outside the write lock.
    auto more = make(get(id));
    std::lock_guard lock(e.write);
    InspectionCase updated = e.value;
    updated.rollouts.insert(updated.rollouts.end(), std::make_move_iterator(more.begin()),
                            std::make_move_iterator(more.end()));
    if (persist_) persist_(updated);
    e.value = updated;
    return updated;
}

}  // namespace trajinspect
