#ifndef TRAJINSPECT_COHORT_HPP
#define TRAJINSPECT_COHORT_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trajinspect/common.hpp"

namespace trajinspect {

enum class Outcome { survival, mortality, censored };

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);

struct RawStep {
    double time_offset_hours = 0.0;
    Eigen::VectorXd features;
    double fluid_dose = 0.0;  ///< mL per interval
    double vaso_dose = 0.0;   ///< ug/kg/min, interval maximum

    bool operator==(const RawStep& o) const {
        return time_offset_hours == o.time_offset_hours && fluid_dose == o.fluid_dose &&
               vaso_dose == o.vaso_dose && features == o.features;
    }
};

struct RawTrajectory {
    std::string id;
    std::vector<RawStep> steps;
    Outcome outcome = Outcome::censored;
    /// 90-day label of a trajectory cut off by the observation window. Only
    /// meaningful when outcome is censored.
    std::optional<Absorbing> label_90d;
    std::optional<std::string> record_text;

    bool censored() const { return outcome == Outcome::censored; }
    /// The 90-day outcome, if known.
    std::optional<Absorbing> label() const;

    bool operator==(const RawTrajectory&) const = default;
};

struct Cohort {
    std::vector<RawTrajectory> trajectories;
    int feature_dim = 0;
    std::vector<std::string> feature_names;

    /// Throws ValidationError when dimensions, ids or step ordering are off.
    void validate() const;
    std::size_t step_count() const;

    bool operator==(const Cohort&) const = default;
};

enum class CohortFormat { csv, jsonl };
CohortFormat parse_cohort_format(std::string_view s);

struct IngestResult {
    Cohort cohort;
    /// Trajectories excluded for a missing dose or outcome field.
    std::size_t dropped = 0;
    /// Trajectories cut to the observation window.
    std::size_t truncated = 0;
};

IngestResult ingest(const std::filesystem::path& path, CohortFormat format);
IngestResult read_csv(std::istream& in);
IngestResult read_jsonl(std::istream& in);
void write_csv(const Cohort& cohort, std::ostream& out);
void write_jsonl(const Cohort& cohort, std::ostream& out);

/// Keeps the earliest `max_steps` steps and marks the trajectory censored,
/// carrying a known outcome over as its 90-day label. Returns true if cut.
bool truncate_to_window(RawTrajectory& traj, int max_steps = kMaxSteps);

/// Disjoint train/test partition. The train side gets floor(fraction * n)
/// trajectories; both sides keep the input order.
std::pair<Cohort, Cohort> split(const Cohort& cohort, double train_fraction, std::uint64_t seed);

/// Known dynamics used to generate oracle cohorts.
///
/// Transition rows are indexed by `s * n_actions + a`; columns `0..n_states-1`
/// are states, column `n_states` is survival and `n_states + 1` mortality.
struct GroundTruthMDP {
    int n_states = 0;
    int n_actions = 0;
    Eigen::MatrixXd transition_probs;
    Eigen::MatrixXd behavior_probs;    ///< n_states x n_actions
    Eigen::MatrixXd emission_centers;  ///< n_states x D
    double emission_scale = 1.0;
    int censor_horizon = kMaxSteps;
    /// Start-state weights; empty means uniform.
    Eigen::VectorXd initial_weights;
    /// Probability that a censored trajectory's 90-day label is survival.
    double censored_survival_prob = 0.5;
    /// (fluid, vaso) dose emitted for each action; empty means
    /// `(100 (a+1), 0.05 (a+1))`.
    std::vector<std::array<double, 2>> action_doses;

    int surv_index() const { return n_states; }
    int death_index() const { return n_states + 1; }
    int feature_dim() const { return static_cast<int>(emission_centers.cols()); }
    std::array<double, 2> doses(int action) const;

    void validate() const;
};

/// Random dynamics for demos and pipeline tests. Each (s, a) row absorbs
/// with probability about `absorb_rate`; survival odds vary by state and
/// rise with the action index. Emission centers of distinct states differ
/// by at least 5 in the first feature; the emission scale is 0.5. Action a
/// gives 100 (a+1) mL of fluid and, for odd a, 0.05 (a+1) of vasopressor.
GroundTruthMDP random_ground_truth(int n_states, int n_actions, int feature_dim, std::uint64_t seed,
                                   double absorb_rate = 0.1);

/// One trajectory of the generator in ground-truth states and actions.
struct LatentPath {
    std::vector<std::pair<StateId, ActionId>> steps;
    Outcome outcome = Outcome::censored;
    std::optional<Absorbing> label_90d;
};

std::vector<LatentPath> simulate_latent(const GroundTruthMDP& gt, std::size_t n_trajectories,
                                        std::uint64_t seed);

/// Synthetic cohort with features emitted around each latent state's center.
/// Trajectory i depends only on `seed` and `i`.
Cohort generate_synthetic(const GroundTruthMDP& gt, std::size_t n_trajectories, std::uint64_t seed);

/// Same cohort as generate_synthetic plus the latent paths it came from.
std::pair<Cohort, std::vector<LatentPath>> generate_synthetic_with_latent(
    const GroundTruthMDP& gt, std::size_t n_trajectories, std::uint64_t seed);

}  // namespace trajinspect

#endif  // TRAJINSPECT_COHORT_HPP
