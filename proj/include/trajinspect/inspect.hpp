#ifndef TRAJINSPECT_INSPECT_HPP
#define TRAJINSPECT_INSPECT_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "trajinspect/discretize.hpp"
#include "trajinspect/mdp.hpp"
#include "trajinspect/planner.hpp"
#include "trajinspect/rollout.hpp"

namespace trajinspect {

/// How the target policy's action at a state compares with clinician practice.
struct TreatmentSurprise {
    StateId state = 0;
    ActionId rl_action = 0;
    double rl_action_freq = 0.0;
    std::int64_t rl_action_count = 0;
    ActionId common_action = 0;
    double common_action_freq = 0.0;
    std::int64_t common_action_count = 0;
    /// Bin-sum of the RL action minus bin-sum of the common action.
    int aggressiveness = 0;
    std::int64_t visits = 0;

    bool operator==(const TreatmentSurprise&) const = default;
};

/// Every visited, non-fallback state ordered by how rarely clinicians took
/// the RL action there: ascending frequency, then descending visits, then
/// state id.
std::vector<TreatmentSurprise> rank_by_rl_action_frequency(const BehaviorPolicy& bp, const TargetPolicy& tp);

/// States whose RL action is observed at most `freq_threshold` of the time
/// and is more aggressive than the modal clinician action.
std::vector<TreatmentSurprise> surprising_treatments(const BehaviorPolicy& bp, const TargetPolicy& tp,
                                                     double freq_threshold = kDefaultFreqThreshold);

struct OutcomeSurprise {
    StateId initial_state = 0;
    double mean_rollout_reward = 0.0;
    double observed_mean_reward = 0.0;
    double gap = 0.0;
    int n_trajectories = 0;
    /// Test trajectories starting in this state, in input order.
    std::vector<std::string> trajectory_ids;

    bool operator==(const OutcomeSurprise&) const = default;
};

struct OutcomeRanking {
    std::vector<OutcomeSurprise> ranked;
    /// Average of per-trajectory gaps, i.e. weighted by initial state.
    double overall_mean_gap = 0.0;
    /// Trajectories skipped: no outcome label, or no policy row at the start.
    std::size_t skipped = 0;
    /// Roll-outs that hit an unobserved (s, a) pair; scored as 0.
    std::size_t dead_end_rollouts = 0;

    bool operator==(const OutcomeRanking&) const = default;
};

/// Rolls out the target policy `n_rollouts` times from each test
/// trajectory's initial state and ranks initial states by mean roll-out
/// reward minus observed reward, descending. Truncated roll-outs score 0.
/// Roll-outs of trajectory i use rollout_seed(seed, i, j).
OutcomeRanking surprising_outcomes(std::span<const DiscreteTrajectory> test_trajs, const TransitionModel& m,
                                   const TargetPolicy& tp, int n_rollouts = kDefaultRollouts,
                                   std::uint64_t seed = 0, int max_steps = kMaxSteps);

enum class CaseKind { treatment, outcome };
enum class Verdict { plausible, suspicious, implausible };

std::string_view to_string(CaseKind k);
std::string_view to_string(Verdict v);
CaseKind parse_case_kind(std::string_view s);
Verdict parse_verdict(std::string_view s);

struct Annotation {
    std::string timestamp;  ///< UTC, ISO 8601
    std::string author;
    std::string text;
    Verdict verdict = Verdict::plausible;

    bool operator==(const Annotation&) const = default;
};

struct CaseAnchor {
    std::string trajectory_id;
    int step_index = 0;

    bool operator==(const CaseAnchor&) const = default;
};

struct InspectionCase {
    std::string id;
    CaseKind kind = CaseKind::outcome;
    CaseAnchor anchor;
    StateId anchor_state = 0;
    std::optional<StateId> flagged_state;
    std::vector<SimTrajectory> rollouts;
    std::vector<Annotation> annotations;

    bool operator==(const InspectionCase&) const = default;
};

/// Earliest step index at which any trajectory visits `state`, optionally
/// only counting steps that took `action`. Ties go to the first trajectory.
std::optional<CaseAnchor> earliest_anchor(std::span<const DiscreteTrajectory> trajs, StateId state,
                                          std::optional<ActionId> action = std::nullopt);

/// A flagged state plus where to start its case: the earliest training step
/// in that state under the common clinician action.
struct FlaggedState {
    TreatmentSurprise surprise;
    std::optional<CaseAnchor> anchor;

    bool operator==(const FlaggedState&) const = default;
};

/// Output of heuristic 1 as stored in a study.
struct TreatmentReport {
    double freq_threshold = kDefaultFreqThreshold;
    /// Visited non-fallback states considered.
    std::size_t n_eligible = 0;
    std::vector<FlaggedState> flagged;

    bool operator==(const TreatmentReport&) const = default;
};

TreatmentReport treatment_report(std::span<const DiscreteTrajectory> train, const BehaviorPolicy& bp,
                                 const TargetPolicy& tp, double freq_threshold = kDefaultFreqThreshold);

/// Target-policy roll-outs from `state`, capped so step_index plus roll-out
/// length stays within the observation window.
std::vector<SimTrajectory> case_rollouts(const TransitionModel& m, const TargetPolicy& tp, StateId state,
                                         int step_index, int n, std::uint64_t seed);

/// Builds a case anchored at a trajectory step. Outcome cases always anchor
/// at step 0. Throws NotFoundError for an unknown trajectory,
/// ValidationError for a bad step index and ConflictError when the anchored
/// state differs from `flagged_state`.
InspectionCase build_case(std::string case_id, CaseKind kind, const CaseAnchor& anchor,
                          std::optional<StateId> flagged_state, std::span<const DiscreteTrajectory> trajs,
                          const TransitionModel& m, const TargetPolicy& tp, int n_rollouts = kDefaultRollouts,
                          std::uint64_t seed = 0);

std::string utc_timestamp();

/// Case collection shared by request handlers. Writes to one case are
/// serialized and reach `persist` before the call returns.
class CaseStore {
public:
    using Persist = std::function<void(const InspectionCase&)>;

    explicit CaseStore(std::vector<InspectionCase> cases = {}, Persist persist = {});

    std::string next_id() const;
    /// Inserts a new case; ConflictError if the id exists.
    InspectionCase add(InspectionCase c);
    InspectionCase get(const std::string& id) const;
    std::vector<InspectionCase> list() const;
    std::size_t size() const;

    /// Appends an annotation stamped with the current UTC time.
    InspectionCase annotate(const std::string& id, const std::string& author, const std::string& text,
                            Verdict verdict);
    /// Appends roll-outs produced by `make` under the case's write lock.
    InspectionCase append_rollouts(const std::string& id,
                                   const std::function<std::vector<SimTrajectory>(const InspectionCase&)>& make);

private:
    struct Entry {
        std::mutex write;
        InspectionCase value;
    };
    Entry& entry(const std::string& id) const;

    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::unique_ptr<Entry>> cases_;
    Persist persist_;
};

}  // namespace trajinspect

#endif  // TRAJINSPECT_INSPECT_HPP
