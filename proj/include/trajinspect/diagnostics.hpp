#ifndef TRAJINSPECT_DIAGNOSTICS_HPP
#define TRAJINSPECT_DIAGNOSTICS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajinspect/discretize.hpp"
#include "trajinspect/inspect.hpp"
#include "trajinspect/mdp.hpp"
#include "trajinspect/planner.hpp"
#include "trajinspect/rollout.hpp"

namespace trajinspect {

using LengthHistogram = std::array<std::int64_t, kMaxSteps>;  ///< index l-1 counts length l

/// Counts lengths 1..20; anything longer lands in the last bin.
LengthHistogram length_histogram(std::span<const int> lengths);
/// Half the L1 distance between the normalized histograms.
double total_variation(const LengthHistogram& a, const LengthHistogram& b);

struct LengthReport {
    LengthHistogram train_histogram{};
    LengthHistogram rollout_histogram{};
    double total_variation_distance = 0.0;
    double censored_fraction_train = 0.0;
    std::int64_t n_train = 0;
    std::int64_t n_rollouts = 0;
    /// Roll-outs that hit an unobserved (s, a) pair; not in the histogram.
    std::int64_t dead_end_rollouts = 0;

    bool operator==(const LengthReport&) const = default;
};

/// Compares training lengths with behavior-policy roll-outs started from
/// every training trajectory's initial state (the empirical initial-state
/// distribution). Roll-outs of trajectory i use rollout_seed(seed, i, j).
LengthReport length_report(std::span<const DiscreteTrajectory> train, const TransitionModel& m,
                           const BehaviorPolicy& bp, int n_rollouts_per_start, std::uint64_t seed);

/// Point estimate with a bootstrap percentile interval. The interval is
/// widened to contain the point when the percentiles miss it.
struct Interval {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    /// Standard deviation of the bootstrap replicates.
    double boot_sd = 0.0;

    bool operator==(const Interval&) const = default;
};

struct TerminationStep {
    int step = 0;  ///< 1-based
    std::int64_t at_risk = 0;
    std::int64_t terminated = 0;
    std::optional<Interval> actual;
    std::optional<Interval> predicted;

    bool operator==(const TerminationStep&) const = default;
};

struct TerminationBiasReport {
    std::vector<TerminationStep> steps;
    /// Steps 1..19 pooled.
    std::optional<Interval> prefinal_actual;
    std::optional<Interval> prefinal_predicted;
    /// Steps whose (s, a) pair has no row in the model.
    std::int64_t excluded_pairs = 0;
    int n_bootstrap = 0;
    double confidence = 0.95;

    bool operator==(const TerminationBiasReport&) const = default;
};

/// Per step t: share of trajectories still running at t that terminate at
/// t, against the mean model termination probability of their observed
/// (s, a). Intervals resample whole trajectories with replacement;
/// resample b draws from derive_seed(seed, b).
TerminationBiasReport termination_bias(const TransitionModel& m, std::span<const DiscreteTrajectory> trajs,
                                       int n_bootstrap = kDefaultBootstrap, std::uint64_t seed = 0,
                                       double confidence = 0.95);

struct RareActionReport {
    int top_n = 100;
    int n_states = 0;  ///< states actually summarized (<= top_n)
    double avg_rl_action_freq = 0.0;
    double avg_rl_action_count = 0.0;
    double avg_common_action_freq = 0.0;
    double avg_common_action_count = 0.0;
    /// Transitions out of these states over all training transitions.
    double transition_mass_fraction = 0.0;
    /// States whose common action gives no vasopressor.
    int common_zero_vaso_count = 0;
    /// Of those, states where the RL action gives a vasopressor ...
    int rl_vaso_count = 0;
    /// ... and where that dose is large (vaso bin 3-4).
    int rl_large_vaso_count = 0;
    std::vector<StateId> states;

    bool operator==(const RareActionReport&) const = default;
};

RareActionReport rare_action_report(const TransitionModel& m, const BehaviorPolicy& bp, const TargetPolicy& tp,
                                    int top_n = 100);

struct DischargePopulation {
    std::int64_t n = 0;
    std::optional<double> frac_nonzero_vaso_at_end;
    std::optional<double> frac_large_vaso_at_end;

    bool operator==(const DischargePopulation&) const = default;
};

struct DischargeTreatmentReport {
    DischargePopulation train_uncensored_survivors;
    DischargePopulation train_censored_survivors;
    DischargePopulation rollout_survivors;

    bool operator==(const DischargeTreatmentReport&) const = default;
};

/// Vasopressor bin of the final step for survivors in each population.
DischargeTreatmentReport discharge_treatment_report(std::span<const DiscreteTrajectory> train,
                                                    std::span<const SimTrajectory> rollouts);

}  // namespace trajinspect

#endif  // TRAJINSPECT_DIAGNOSTICS_HPP
