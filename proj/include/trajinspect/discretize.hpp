#ifndef TRAJINSPECT_DISCRETIZE_HPP
#define TRAJINSPECT_DISCRETIZE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trajinspect/cohort.hpp"
#include "trajinspect/common.hpp"

namespace trajinspect {

/// k-means state space over z-scored step features. Centroids live in the
/// standardized space; the standardization travels with them.
struct StateClustering {
    Eigen::MatrixXd centroids;
    Eigen::VectorXd feature_means;
    Eigen::VectorXd feature_scales;

    int k() const { return static_cast<int>(centroids.rows()); }
    int dim() const { return static_cast<int>(centroids.cols()); }
    Eigen::VectorXd standardize(const Eigen::VectorXd& features) const;
    /// Centroid `state` mapped back to raw feature units.
    Eigen::VectorXd centroid_features(StateId state) const;

    bool operator==(const StateClustering&) const = default;
};

/// Stacks every step's features into a row per step, in cohort order.
Eigen::MatrixXd stack_features(const Cohort& cohort);

/// Fits k clusters on the z-scored features of every training step.
/// Features with zero variance get scale 1 and a message in `warnings`.
StateClustering fit_states(const Cohort& train, int k, std::uint64_t seed, int max_iters = 300,
                           std::vector<std::string>* warnings = nullptr);

/// Nearest centroid in z-scored distance; lowest index on ties.
StateId assign_state(const StateClustering& c, const Eigen::VectorXd& features);

/// Per-state median of raw training features (NaN for empty clusters).
Eigen::MatrixXd state_medians(const Cohort& train, const StateClustering& c);

/// Percentile `q` in [0,1] of sorted values, interpolating linearly between
/// order statistics at position q * (n - 1).
template <typename Scalar>
Scalar percentile_sorted(const std::vector<Scalar>& sorted, double q) {
    if (sorted.empty()) throw ValidationError("percentile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + static_cast<Scalar>(frac) * (sorted[hi] - sorted[lo]);
}

template <typename Scalar>
Scalar percentile(std::vector<Scalar> values, double q) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, q);
}

/// Quartile edges of nonzero training doses for fluids and vasopressors.
struct ActionGrid {
    std::array<double, 3> fluid_edges{};
    std::array<double, 3> vaso_edges{};
    /// Median of nonzero doses; "large" doses lie above it.
    double fluid_large_threshold = 0.0;
    double vaso_large_threshold = 0.0;

    bool operator==(const ActionGrid&) const = default;
};

ActionGrid fit_actions(const Cohort& train);

/// 0 for a zero dose, else 1 + number of edges strictly below the dose.
int dose_bin(const std::array<double, 3>& edges, double dose);

/// fluid_bin * 5 + vaso_bin.
ActionId encode_action(const ActionGrid& g, double fluid, double vaso);

/// Vasopressor bins 3 and 4 lie above the median edge.
inline bool is_large_vaso(ActionId a) { return vaso_bin(a) >= 3; }

struct DiscreteStep {
    StateId state = 0;
    ActionId action = 0;
    bool operator==(const DiscreteStep&) const = default;
};

struct DiscreteTrajectory {
    std::string id;
    std::vector<DiscreteStep> steps;
    /// The 90-day outcome. Absent only for unlabeled censored trajectories.
    std::optional<Absorbing> terminal;
    bool censored = false;
    /// Whether the last step transitions into `terminal`. False for censored
    /// trajectories in censored mode.
    bool absorbs = false;

    /// +100 for survival, -100 for mortality.
    std::optional<double> reward() const {
        if (!terminal) return std::nullopt;
        return terminal_reward(*terminal);
    }
    /// Number of (s, a, s') transitions this trajectory contributes.
    std::size_t transition_count() const { return steps.size() - (absorbs ? 0 : 1); }

    bool operator==(const DiscreteTrajectory&) const = default;
};

/// Sets `absorbs` per the censoring mode: uncensored trajectories always
/// absorb, censored ones only under terminal_reward (which needs a label).
void apply_censor_mode(std::vector<DiscreteTrajectory>& trajs, CensorMode mode);

std::vector<DiscreteTrajectory> discretize_cohort(const Cohort& cohort, const StateClustering& sc,
                                                  const ActionGrid& grid,
                                                  CensorMode mode = CensorMode::terminal_reward);

}  // namespace trajinspect

#endif  // TRAJINSPECT_DISCRETIZE_HPP
