#include "trajinspect/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajinspect/rng.hpp"

namespace trajinspect {

LengthHistogram length_histogram(std::span<const int> lengths) {
    LengthHistogram h{};
    for (int l : lengths) {
        if (l < 1) throw ValidationError("trajectory length must be positive");
        ++h[static_cast<std::size_t>(std::min(l, kMaxSteps) - 1)];
    }
    return h;
}

double total_variation(const LengthHistogram& a, const LengthHistogram& b) {
    double na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]);
    }
    if (na == 0 || nb == 0) throw ValidationError("total variation of an empty histogram");
    double tv = 0;
    for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(static_cast<double>(a[i]) / na - static_cast<double>(b[i]) / nb);
    return 0.5 * tv;
}

LengthReport length_report(std::span<const DiscreteTrajectory> train, const TransitionModel& m,
                           const BehaviorPolicy& bp, int n_rollouts_per_start, std::uint64_t seed) {
    if (train.empty()) throw ValidationError("length report needs training trajectories");
    if (n_rollouts_per_start < 1) throw ValidationError("n_rollouts_per_start must be positive");
    LengthReport rep;
    std::vector<int> train_lengths, rollout_lengths;
    std::vector<RolloutStart> starts;
    std::int64_t censored = 0;
    for (const auto& t : train) {
        train_lengths.push_back(static_cast<int>(t.steps.size()));
        if (t.censored) ++censored;
        starts.push_back({t.steps.front().state, n_rollouts_per_start});
    }
    const Policy policy = Policy::from_behavior(bp);
    for (const auto& r : batch(m, policy, starts, kMaxSteps, seed)) {
        if (r.terminal == RolloutEnd::dead_end) {
            ++rep.dead_end_rollouts;
            continue;
        }
        rollout_lengths.push_back(r.length());
    }
    rep.train_histogram = length_histogram(train_lengths);
    rep.rollout_histogram = length_histogram(rollout_lengths);
    rep.n_train = static_cast<std::int64_t>(train_lengths.size());
    rep.n_rollouts = static_cast<std::int64_t>(rollout_lengths.size());
    rep.censored_fraction_train = static_cast<double>(censored) / static_cast<double>(train.size());
    rep.total_variation_distance =
        rollout_lengths.empty() ? 1.0 : total_variation(rep.train_histogram, rep.rollout_histogram);
    return rep;
}

namespace {

/// Weighted sums for one statistic family: numerator / denominator per step.
struct StepSums {
    std::array<double, kMaxSteps> risk{}, term{}, pred{}, known{};
};

struct TrajectoryTerms {
    int length = 0;
    bool absorbs = false;
    std::array<double, kMaxSteps> prob{};  ///< NaN where (s, a) is unseen
};

StepSums accumulate(const std::vector<TrajectoryTerms>& terms, const std::vector<int>* weights) {
    StepSums s;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double w = weights ? (*weights)[i] : 1.0;
        if (w == 0) continue;
        const auto& t = terms[i];
        for (int k = 0; k < t.length; ++k) {
            s.risk[static_cast<std::size_t>(k)] += w;
            if (k + 1 == t.length && t.absorbs) s.term[static_cast<std::size_t>(k)] += w;
            const double p = t.prob[static_cast<std::size_t>(k)];
            if (!std::isnan(p)) {
                s.pred[static_cast<std::size_t>(k)] += w * p;
                s.known[static_cast<std::size_t>(k)] += w;
            }
        }
    }
    return s;
}

/// Statistics read off a set of sums; NaN where undefined.
/// Layout: per step actual[20], predicted[20], then prefinal actual/predicted.
constexpr std::size_t kStats = 2 * kMaxSteps + 2;

std::array<double, kStats> statistics(const StepSums& s) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::array<double, kStats> out{};
    double risk = 0, term = 0, pred = 0, known = 0;
    for (std::size_t k = 0; k < kMaxSteps; ++k) {
        out[k] = s.risk[k] > 0 ? s.term[k] / s.risk[k] : nan;
        out[kMaxSteps + k] = s.known[k] > 0 ? s.pred[k] / s.known[k] : nan;
        if (k + 1 < kMaxSteps) {
            risk += s.risk[k];
            term += s.term[k];
            pred += s.pred[k];
            known += s.known[k];
        }
    }
    out[2 * kMaxSteps] = risk > 0 ? term / risk : nan;
    out[2 * kMaxSteps + 1] = known > 0 ? pred / known : nan;
    return out;
}

std::optional<Interval> make_interval(double point, std::vector<double>& reps, double confidence) {
    if (std::isnan(point)) return std::nullopt;
    Interval iv{point, point, point, 0.0};
    if (reps.empty()) return iv;
    std::sort(reps.begin(), reps.end());
    const double alpha = (1.0 - confidence) / 2.0;
    iv.lower = std::min(point, percentile_sorted(reps, alpha));
    iv.upper = std::max(point, percentile_sorted(reps, 1.0 - alpha));
    double mean = 0;
    for (double r : reps) mean += r;
    mean /= static_cast<double>(reps.size());
    double var = 0;
    for (double r : reps) var += (r - mean) * (r - mean);
    iv.boot_sd = reps.size() > 1 ? std::sqrt(var / static_cast<double>(reps.size() - 1)) : 0.0;
    return iv;
}

}  // namespace

TerminationBiasReport termination_bias(const TransitionModel& m, std::span<const DiscreteTrajectory> trajs,
                                       int n_bootstrap, std::uint64_t seed, double confidence) {
    if (trajs.empty()) throw ValidationError("termination bias needs trajectories");
    if (n_bootstrap < 0) throw ValidationError("n_bootstrap must be non-negative");
    if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence must lie in (0, 1)");
    TerminationBiasReport rep;
    rep.n_bootstrap = n_bootstrap;
    rep.confidence = confidence;

    std::vector<TrajectoryTerms> terms;
    terms.reserve(trajs.size());
    for (const auto& t : trajs) {
        TrajectoryTerms tt;
        tt.length = std::min(static_cast<int>(t.steps.size()), kMaxSteps);
        tt.absorbs = t.absorbs;
        for (int k = 0; k < tt.length; ++k) {
            const auto& step = t.steps[static_cast<std::size_t>(k)];
            const auto* row = (step.state >= 0 && step.state < m.n_states() && step.action >= 0 &&
                               step.action < m.n_actions())
                                  ? m.row(step.state, step.action)
                                  : nullptr;
            if (row) {
                tt.prob[static_cast<std::size_t>(k)] = row->prob(m.surv_code()) + row->prob(m.death_code());
            } else {
                tt.prob[static_cast<std::size_t>(k)] = std::numeric_limits<double>::quiet_NaN();
                ++rep.excluded_pairs;
            }
        }
        terms.push_back(tt);
    }

    const StepSums full = accumulate(terms, nullptr);
    const auto point = statistics(full);

    std::array<std::vector<double>, kStats> reps;
    for (auto& r : reps) r.reserve(static_cast<std::size_t>(n_bootstrap));
    std::vector<int> weights(terms.size());
    for (int b = 0; b < n_bootstrap; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        std::fill(weights.begin(), weights.end(), 0);
        for (std::size_t i = 0; i < terms.size(); ++i) ++weights[rng.below(terms.size())];
        const auto stats = statistics(accumulate(terms, &weights));
        for (std::size_t j = 0; j < kStats; ++j)
            if (!std::isnan(stats[j])) reps[j].push_back(stats[j]);
    }

    for (int k = 0; k < kMaxSteps; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        TerminationStep st;
        st.step = k + 1;
        st.at_risk = static_cast<std::int64_t>(full.risk[ks]);
        st.terminated = static_cast<std::int64_t>(full.term[ks]);
        st.actual = make_interval(point[ks], reps[ks], confidence);
        st.predicted = make_interval(point[kMaxSteps + ks], reps[kMaxSteps + ks], confidence);
        rep.steps.push_back(st);
    }
    rep.prefinal_actual = make_interval(point[2 * kMaxSteps], reps[2 * kMaxSteps], confidence);
    rep.prefinal_predicted = make_interval(point[2 * kMaxSteps + 1], reps[2 * kMaxSteps + 1], confidence);
    return rep;
}

RareActionReport rare_action_report(const TransitionModel& m, const BehaviorPolicy& bp, const TargetPolicy& tp,
                                    int top_n) {
    if (top_n < 1) throw ValidationError("top_n must be positive");
    const auto ranked = rank_by_rl_action_frequency(bp, tp);
    RareActionReport rep;
    rep.top_n = top_n;
    rep.n_states = static_cast<int>(std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(top_n)));
    if (rep.n_states == 0) return rep;
    std::int64_t mass = 0;
    for (int i = 0; i < rep.n_states; ++i) {
        const auto& t = ranked[static_cast<std::size_t>(i)];
        rep.states.push_back(t.state);
        rep.avg_rl_action_freq += t.rl_action_freq;
        rep.avg_rl_action_count += static_cast<double>(t.rl_action_count);
        rep.avg_common_action_freq += t.common_action_freq;
        rep.avg_common_action_count += static_cast<double>(t.common_action_count);
        mass += m.transitions_from(t.state);
        if (vaso_bin(t.common_action) == 0) {
            ++rep.common_zero_vaso_count;
            if (vaso_bin(t.rl_action) > 0) {
                ++rep.rl_vaso_count;
                if (is_large_vaso(t.rl_action)) ++rep.rl_large_vaso_count;
            }
        }
    }
    const double n = rep.n_states;
    rep.avg_rl_action_freq /= n;
    rep.avg_rl_action_count /= n;
    rep.avg_common_action_freq /= n;
    rep.avg_common_action_count /= n;
    const auto total = m.total_transitions();
    rep.transition_mass_fraction = total > 0 ? static_cast<double>(mass) / static_cast<double>(total) : 0.0;
    return rep;
}

namespace {

struct EndCounter {
    std::int64_t n = 0, nonzero = 0, large = 0;

    void add(ActionId last) {
        ++n;
        if (vaso_bin(last) >= 1) ++nonzero;
        if (is_large_vaso(last)) ++large;
    }
    DischargePopulation finish() const {
        DischargePopulation p;
        p.n = n;
        if (n > 0) {
            p.frac_nonzero_vaso_at_end = static_cast<double>(nonzero) / static_cast<double>(n);
            p.frac_large_vaso_at_end = static_cast<double>(large) / static_cast<double>(n);
        }
        return p;
    }
};

}  // namespace

DischargeTreatmentReport discharge_treatment_report(std::span<const DiscreteTrajectory> train,
                                                    std::span<const SimTrajectory> rollouts) {
    EndCounter uncensored, censored, sim;
    for (const auto& t : train) {
        if (t.terminal != Absorbing::surv || t.steps.empty()) continue;
        (t.censored ? censored : uncensored).add(t.steps.back().action);
    }
    for (const auto& r : rollouts)
        if (r.terminal == RolloutEnd::surv && !r.steps.empty()) sim.add(r.steps.back().action);
    return {uncensored.finish(), censored.finish(), sim.finish()};
}

}  // namespace trajinspect
