#ifndef TRAJINSPECT_BUNDLE_HPP
#define TRAJINSPECT_BUNDLE_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "trajinspect/cohort.hpp"
#include "trajinspect/diagnostics.hpp"
#include "trajinspect/discretize.hpp"
#include "trajinspect/inspect.hpp"
#include "trajinspect/mdp.hpp"
#include "trajinspect/planner.hpp"
#include "trajinspect/rollout.hpp"

namespace trajinspect {

inline constexpr int kBundleFormatVersion = 1;

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

struct StudyConfig {
    int k = kDefaultClusters;
    int min_count = kDefaultMinCount;
    double gamma = kDefaultGamma;
    double tol = kDefaultTol;
    int max_sweeps = kDefaultMaxSweeps;
    double freq_threshold = kDefaultFreqThreshold;
    int n_rollouts = kDefaultRollouts;
    CensorMode censor_mode = CensorMode::terminal_reward;
    int max_steps = kMaxSteps;
    double train_fraction = 0.8;
    int n_bootstrap = kDefaultBootstrap;
    int top_n = 100;

    bool operator==(const StudyConfig&) const = default;
};

struct StudySeeds {
    std::uint64_t synth = 0;
    std::uint64_t split = 0;
    std::uint64_t clustering = 0;
    std::uint64_t rollout = 0;
    std::uint64_t bootstrap = 0;

    bool operator==(const StudySeeds&) const = default;
};

struct StudyManifest {
    /// Fixed when the study is created; derived from the cohort bytes.
    std::string study_id;
    std::string created_at;
    int format_version = kBundleFormatVersion;
    StudySeeds seeds;
    StudyConfig config;
    /// Bundle-relative path -> SHA-256 of the file's bytes.
    std::map<std::string, std::string> files;

    bool operator==(const StudyManifest&) const = default;
};

void to_json(nlohmann::json& j, const StudyConfig& c);
void from_json(const nlohmann::json& j, StudyConfig& c);
void to_json(nlohmann::json& j, const StudySeeds& s);
void from_json(const nlohmann::json& j, StudySeeds& s);
void to_json(nlohmann::json& j, const StudyManifest& m);
void from_json(const nlohmann::json& j, StudyManifest& m);

struct CohortSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;

    bool operator==(const CohortSplit&) const = default;
};

/// Everything a study directory can hold. Absent artifacts are stages that
/// have not run.
struct Study {
    StudyManifest manifest;

    std::optional<Cohort> cohort;
    std::optional<GroundTruthMDP> ground_truth;
    std::optional<CohortSplit> split;

    std::optional<StateClustering> states;
    std::optional<ActionGrid> actions;
    std::optional<Eigen::MatrixXd> state_medians;
    /// Discretized cohort, in cohort order.
    std::optional<std::vector<DiscreteTrajectory>> trajectories;

    std::optional<TransitionModel> model;
    std::optional<BehaviorPolicy> behavior;
    std::optional<TargetPolicy> policy;
    /// Target-policy roll-outs from every test trajectory's initial state.
    std::optional<std::vector<SimTrajectory>> rollouts;

    std::vector<InspectionCase> cases;

    std::optional<TreatmentReport> treatment_report;
    std::optional<OutcomeRanking> outcome_report;
    std::optional<LengthReport> length_report;
    std::optional<TerminationBiasReport> termination_report;
    std::optional<RareActionReport> rare_action_report;
    std::optional<DischargeTreatmentReport> discharge_report;

    /// Discretized trajectories on each side of the split.
    std::vector<DiscreteTrajectory> train_trajectories() const;
    std::vector<DiscreteTrajectory> test_trajectories() const;
    /// Raw training trajectories.
    Cohort train_cohort() const;

    /// Drops every artifact derived from the given stage onward.
    void clear_from_discretize();
    void clear_from_estimate();
    void clear_from_solve();

    bool operator==(const Study& o) const;
};

/// Bundle-relative file names.
namespace bundle_paths {
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* cohort = "cohort/cohort.jsonl";
inline constexpr const char* cohort_meta = "cohort/meta.json";
inline constexpr const char* ground_truth = "cohort/ground_truth.json";
inline constexpr const char* split = "cohort/split.json";
inline constexpr const char* states = "discretization/states.json";
inline constexpr const char* actions = "discretization/actions.json";
inline constexpr const char* state_medians = "discretization/state_medians.json";
inline constexpr const char* trajectories = "discretization/trajectories.jsonl";
inline constexpr const char* model_header = "model/model.json";
inline constexpr const char* model_triplets = "model/transitions.bin";
inline constexpr const char* behavior = "model/behavior.json";
inline constexpr const char* policy = "policy/target.json";
inline constexpr const char* rollouts = "rollouts/target.jsonl";
inline constexpr const char* treatment_report = "reports/heuristic_treatment.json";
inline constexpr const char* outcome_report = "reports/heuristic_outcome.json";
inline constexpr const char* length_report = "reports/length.json";
inline constexpr const char* termination_report = "reports/termination.json";
inline constexpr const char* rare_action_report = "reports/rare_action.json";
inline constexpr const char* discharge_report = "reports/discharge.json";
std::string case_file(const std::string& case_id);
}  // namespace bundle_paths

/// Case ids double as file names: [A-Za-z0-9._-], not starting with '.'.
bool valid_case_id(std::string_view id);

/// Writes every present artifact, removes stale artifact files, then
/// replaces manifest.json atomically. Fills in the file hashes, the study
/// id (if empty) and the creation time (if empty). Returns the manifest.
StudyManifest save(const std::filesystem::path& dir, Study& study);

/// Reads the manifest, verifies every listed file against its hash and
/// parses the artifacts. Throws CorruptionError naming the first bad file,
/// ValidationError for an unsupported format_version or a missing manifest.
Study load(const std::filesystem::path& dir);

/// Reads manifest.json without touching any artifact.
StudyManifest load_manifest(const std::filesystem::path& dir);

/// Serializes case updates of a live bundle: each call rewrites the case
/// file, then the manifest, each via rename.
class CaseWriter {
public:
    explicit CaseWriter(std::filesystem::path dir);
    void write(const InspectionCase& c);
    StudyManifest manifest() const;

private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    StudyManifest manifest_;
};

/// Serialized bytes of a JSON document as stored in a bundle.
std::string bundle_json_bytes(const nlohmann::json& j);

}  // namespace trajinspect

#endif  // TRAJINSPECT_BUNDLE_HPP
