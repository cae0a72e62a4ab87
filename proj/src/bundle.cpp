#include "trajinspect/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include <openssl/evp.h>

#include "trajinspect/serialize.hpp"

namespace trajinspect {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

void to_json(nlohmann::json& j, const StudyConfig& c) {
    j = {{"k", c.k},
         {"min_count", c.min_count},
         {"gamma", c.gamma},
         {"tol", c.tol},
         {"max_sweeps", c.max_sweeps},
         {"freq_threshold", c.freq_threshold},
         {"n_rollouts", c.n_rollouts},
         {"censor_mode", std::string(to_string(c.censor_mode))},
         {"max_steps", c.max_steps},
         {"train_fraction", c.train_fraction},
         {"n_bootstrap", c.n_bootstrap},
         {"top_n", c.top_n},
         {"survival_reward", kSurvivalReward},
         {"mortality_reward", kMortalityReward}};
}

void from_json(const nlohmann::json& j, StudyConfig& c) {
    j.at("k").get_to(c.k);
    j.at("min_count").get_to(c.min_count);
    j.at("gamma").get_to(c.gamma);
    j.at("tol").get_to(c.tol);
    j.at("max_sweeps").get_to(c.max_sweeps);
    j.at("freq_threshold").get_to(c.freq_threshold);
    j.at("n_rollouts").get_to(c.n_rollouts);
    c.censor_mode = parse_censor_mode(j.at("censor_mode").get<std::string>());
    j.at("max_steps").get_to(c.max_steps);
    j.at("train_fraction").get_to(c.train_fraction);
    j.at("n_bootstrap").get_to(c.n_bootstrap);
    j.at("top_n").get_to(c.top_n);
}

void to_json(nlohmann::json& j, const StudySeeds& s) {
    j = {{"synth", s.synth},
         {"split", s.split},
         {"clustering", s.clustering},
         {"rollout", s.rollout},
         {"bootstrap", s.bootstrap}};
}

void from_json(const nlohmann::json& j, StudySeeds& s) {
    j.at("synth").get_to(s.synth);
    j.at("split").get_to(s.split);
    j.at("clustering").get_to(s.clustering);
    j.at("rollout").get_to(s.rollout);
    j.at("bootstrap").get_to(s.bootstrap);
}

void to_json(nlohmann::json& j, const StudyManifest& m) {
    j = {{"format_version", m.format_version},
         {"study_id", m.study_id},
         {"created_at", m.created_at},
         {"seeds", m.seeds},
         {"config", m.config},
         {"files", m.files}};
}

void from_json(const nlohmann::json& j, StudyManifest& m) {
    j.at("format_version").get_to(m.format_version);
    if (m.format_version != kBundleFormatVersion)
        throw ValidationError("unsupported bundle format_version " + std::to_string(m.format_version) +
                              " (this build reads version " + std::to_string(kBundleFormatVersion) + ")");
    j.at("study_id").get_to(m.study_id);
    j.at("created_at").get_to(m.created_at);
    j.at("seeds").get_to(m.seeds);
    j.at("config").get_to(m.config);
    j.at("files").get_to(m.files);
}

namespace {

std::vector<DiscreteTrajectory> select(const std::vector<DiscreteTrajectory>& all,
                                       const std::vector<std::string>& ids) {
    const std::unordered_set<std::string> keep(ids.begin(), ids.end());
    std::vector<DiscreteTrajectory> out;
    for (const auto& t : all)
        if (keep.count(t.id)) out.push_back(t);
    return out;
}

bool same_matrix(const std::optional<Eigen::MatrixXd>& a, const std::optional<Eigen::MatrixXd>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    if (a->rows() != b->rows() || a->cols() != b->cols()) return false;
    for (Eigen::Index i = 0; i < a->size(); ++i) {
        const double x = a->data()[i], y = b->data()[i];
        if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
    return true;
}

}  // namespace

std::vector<DiscreteTrajectory> Study::train_trajectories() const {
    if (!trajectories || !split) throw ValidationError("study has no discretized split");
    return select(*trajectories, split->train_ids);
}

std::vector<DiscreteTrajectory> Study::test_trajectories() const {
    if (!trajectories || !split) throw ValidationError("study has no discretized split");
    return select(*trajectories, split->test_ids);
}

Cohort Study::train_cohort() const {
    if (!cohort || !split) throw ValidationError("study has no split cohort");
    const std::unordered_set<std::string> keep(split->train_ids.begin(), split->train_ids.end());
    Cohort out;
    out.feature_dim = cohort->feature_dim;
    out.feature_names = cohort->feature_names;
    for (const auto& t : cohort->trajectories)
        if (keep.count(t.id)) out.trajectories.push_back(t);
    return out;
}

void Study::clear_from_discretize() {
    states.reset();
    actions.reset();
    state_medians.reset();
    trajectories.reset();
    clear_from_estimate();
}

void Study::clear_from_estimate() {
    model.reset();
    behavior.reset();
    length_report.reset();
    termination_report.reset();
    clear_from_solve();
}

void Study::clear_from_solve() {
    policy.reset();
    rollouts.reset();
    cases.clear();
    treatment_report.reset();
    outcome_report.reset();
    rare_action_report.reset();
    discharge_report.reset();
}

bool Study::operator==(const Study& o) const {
    return manifest == o.manifest && cohort == o.cohort && ground_truth.has_value() == o.ground_truth.has_value() &&
           (!ground_truth || json(*ground_truth) == json(*o.ground_truth)) && split == o.split &&
           states == o.states && actions == o.actions && same_matrix(state_medians, o.state_medians) &&
           trajectories == o.trajectories && model == o.model && behavior == o.behavior && policy == o.policy &&
           rollouts == o.rollouts && cases == o.cases && treatment_report == o.treatment_report &&
           outcome_report == o.outcome_report && length_report == o.length_report &&
           termination_report == o.termination_report && rare_action_report == o.rare_action_report &&
           discharge_report == o.discharge_report;
}

namespace bundle_paths {
std::string case_file(const std::string& case_id) { return "cases/" + case_id + ".json"; }
}  // namespace bundle_paths

bool valid_case_id(std::string_view id) {
    if (id.empty() || id.size() > 128 || id.front() == '.') return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
               c == '_' || c == '-';
    });
}

std::string bundle_json_bytes(const nlohmann::json& j) { return j.dump(2) + "\n"; }

namespace {

const char* const kArtifactDirs[] = {"cohort", "discretization", "model", "policy", "rollouts", "cases", "reports"};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, std::string_view bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("short write to " + p.string());
}

void write_atomic(const fs::path& p, std::string_view bytes) {
    const fs::path tmp = p.string() + ".tmp";
    write_file(tmp, bytes);
    fs::rename(tmp, p);
}

std::map<std::string, std::string> serialize_artifacts(const Study& s) {
    namespace bp = bundle_paths;
    std::map<std::string, std::string> out;
    if (s.cohort) {
        std::ostringstream os;
        write_jsonl(*s.cohort, os);
        out[bp::cohort] = os.str();
        out[bp::cohort_meta] =
            bundle_json_bytes({{"feature_dim", s.cohort->feature_dim}, {"feature_names", s.cohort->feature_names}});
    }
    if (s.ground_truth) out[bp::ground_truth] = bundle_json_bytes(*s.ground_truth);
    if (s.split)
        out[bp::split] = bundle_json_bytes({{"train_ids", s.split->train_ids}, {"test_ids", s.split->test_ids}});
    if (s.states) out[bp::states] = bundle_json_bytes(*s.states);
    if (s.actions) out[bp::actions] = bundle_json_bytes(*s.actions);
    if (s.state_medians) out[bp::state_medians] = bundle_json_bytes(matrix_to_json(*s.state_medians));
    if (s.trajectories) out[bp::trajectories] = to_jsonl(*s.trajectories);
    if (s.model) {
        out[bp::model_header] = bundle_json_bytes(model_header(*s.model));
        out[bp::model_triplets] = encode_model_triplets(*s.model);
    }
    if (s.behavior) out[bp::behavior] = bundle_json_bytes(*s.behavior);
    if (s.policy) out[bp::policy] = bundle_json_bytes(*s.policy);
    if (s.rollouts) out[bp::rollouts] = to_jsonl(*s.rollouts);
    for (const auto& c : s.cases) {
        if (!valid_case_id(c.id)) throw ValidationError("case id '" + c.id + "' is not a valid file name");
        out[bp::case_file(c.id)] = bundle_json_bytes(c);
    }
    if (s.treatment_report) out[bp::treatment_report] = bundle_json_bytes(*s.treatment_report);
    if (s.outcome_report) out[bp::outcome_report] = bundle_json_bytes(*s.outcome_report);
    if (s.length_report) out[bp::length_report] = bundle_json_bytes(*s.length_report);
    if (s.termination_report) out[bp::termination_report] = bundle_json_bytes(*s.termination_report);
    if (s.rare_action_report) out[bp::rare_action_report] = bundle_json_bytes(*s.rare_action_report);
    if (s.discharge_report) out[bp::discharge_report] = bundle_json_bytes(*s.discharge_report);
    return out;
}

}  // namespace

StudyManifest save(const fs::path& dir, Study& study) {
    const auto files = serialize_artifacts(study);
    fs::create_directories(dir);
    StudyManifest& m = study.manifest;
    m.format_version = kBundleFormatVersion;
    m.files.clear();
    for (const auto& [rel, bytes] : files) {
        write_file(dir / rel, bytes);
        m.files[rel] = sha256_hex(bytes);
    }
    for (const char* sub : kArtifactDirs) {
        if (!fs::exists(dir / sub)) continue;
        std::vector<fs::path> stale;
        for (const auto& e : fs::recursive_directory_iterator(dir / sub))
            if (e.is_regular_file() && !files.count(fs::relative(e.path(), dir).generic_string()))
                stale.push_back(e.path());
        for (const auto& p : stale) fs::remove(p);
    }
    if (m.study_id.empty()) {
        const auto it = files.find(bundle_paths::cohort);
        m.study_id = sha256_hex(it != files.end() ? it->second : json(m.config).dump()).substr(0, 16);
    }
    if (m.created_at.empty()) m.created_at = utc_timestamp();
    write_atomic(dir / bundle_paths::manifest, bundle_json_bytes(m));
    return m;
}

StudyManifest load_manifest(const fs::path& dir) {
    const fs::path p = dir / bundle_paths::manifest;
    if (!fs::exists(p)) throw ValidationError("not a study bundle: " + p.string() + " does not exist");
    try {
        return json::parse(read_file(p)).get<StudyManifest>();
    } catch (const json::exception& e) {
        throw CorruptionError(std::string("manifest.json is malformed: ") + e.what());
    }
}

Study load(const fs::path& dir) {
    namespace bp = bundle_paths;
    Study s;
    s.manifest = load_manifest(dir);
    std::map<std::string, std::string> bytes;
    for (const auto& [rel, hash] : s.manifest.files) {
        const fs::path p = dir / rel;
        if (!fs::is_regular_file(p)) throw CorruptionError("bundle file " + rel + " is missing");
        auto b = read_file(p);
        if (sha256_hex(b) != hash) throw CorruptionError("bundle file " + rel + " does not match its manifest hash");
        bytes.emplace(rel, std::move(b));
    }
    const auto get = [&](const char* rel) -> const std::string* {
        const auto it = bytes.find(rel);
        return it == bytes.end() ? nullptr : &it->second;
    };
    std::string current;
    try {
        if (const auto* b = get(bp::cohort)) {
            current = bp::cohort;
            std::istringstream in(*b);
            s.cohort = read_jsonl(in).cohort;
            if (const auto* meta = get(bp::cohort_meta)) {
                current = bp::cohort_meta;
                const auto j = json::parse(*meta);
                s.cohort->feature_names = j.at("feature_names").get<std::vector<std::string>>();
                if (static_cast<int>(s.cohort->feature_names.size()) != s.cohort->feature_dim)
                    throw ValidationError("feature names do not match the cohort dimension");
            }
        }
        if (const auto* b = get(bp::ground_truth)) {
            current = bp::ground_truth;
            s.ground_truth = json::parse(*b).get<GroundTruthMDP>();
        }
        if (const auto* b = get(bp::split)) {
            current = bp::split;
            const auto j = json::parse(*b);
            s.split = CohortSplit{j.at("train_ids").get<std::vector<std::string>>(),
                                  j.at("test_ids").get<std::vector<std::string>>()};
        }
        if (const auto* b = get(bp::states)) {
            current = bp::states;
            s.states = json::parse(*b).get<StateClustering>();
        }
        if (const auto* b = get(bp::actions)) {
            current = bp::actions;
            s.actions = json::parse(*b).get<ActionGrid>();
        }
        if (const auto* b = get(bp::state_medians)) {
            current = bp::state_medians;
            s.state_medians = matrix_from_json(json::parse(*b));
        }
        if (const auto* b = get(bp::trajectories)) {
            current = bp::trajectories;
            s.trajectories = from_jsonl<DiscreteTrajectory>(*b);
        }
        if (const auto* h = get(bp::model_header)) {
            current = bp::model_triplets;
            const auto* t = get(bp::model_triplets);
            if (!t) throw ValidationError("model header without its triplet section");
            s.model = decode_model(json::parse(*h), *t);
        }
        if (const auto* b = get(bp::behavior)) {
            current = bp::behavior;
            s.behavior = json::parse(*b).get<BehaviorPolicy>();
        }
        if (const auto* b = get(bp::policy)) {
            current = bp::policy;
            s.policy = json::parse(*b).get<TargetPolicy>();
        }
        if (const auto* b = get(bp::rollouts)) {
            current = bp::rollouts;
            s.rollouts = from_jsonl<SimTrajectory>(*b);
        }
        for (const auto& [rel, b] : bytes) {
            if (rel.rfind("cases/", 0) != 0) continue;
            current = rel;
            s.cases.push_back(json::parse(b).get<InspectionCase>());
            if (bp::case_file(s.cases.back().id) != rel)
                throw ValidationError("case id '" + s.cases.back().id + "' does not match its file name");
        }
        if (const auto* b = get(bp::treatment_report)) {
            current = bp::treatment_report;
            s.treatment_report = json::parse(*b).get<TreatmentReport>();
        }
        if (const auto* b = get(bp::outcome_report)) {
            current = bp::outcome_report;
            s.outcome_report = json::parse(*b).get<OutcomeRanking>();
        }
        if (const auto* b = get(bp::length_report)) {
            current = bp::length_report;
            s.length_report = json::parse(*b).get<LengthReport>();
        }
        if (const auto* b = get(bp::termination_report)) {
            current = bp::termination_report;
            s.termination_report = json::parse(*b).get<TerminationBiasReport>();
        }
        if (const auto* b = get(bp::rare_action_report)) {
            current = bp::rare_action_report;
            s.rare_action_report = json::parse(*b).get<RareActionReport>();
        }
        if (const auto* b = get(bp::discharge_report)) {
            current = bp::discharge_report;
            s.discharge_report = json::parse(*b).get<DischargeTreatmentReport>();
        }
    } catch (const json::exception& e) {
        throw CorruptionError("bundle file " + current + " is malformed: " + e.what());
    } catch (const ValidationError& e) {
        throw CorruptionError("bundle file " + current + " is malformed: " + e.what());
    }
    return s;
}

CaseWriter::CaseWriter(fs::path dir) : dir_(std::move(dir)), manifest_(load_manifest(dir_)) {}

void CaseWriter::write(const InspectionCase& c) {
    if (!valid_case_id(c.id)) throw ValidationError("case id '" + c.id + "' is not a valid file name");
    const std::string rel = bundle_paths::case_file(c.id);
    const std::string bytes = bundle_json_bytes(c);
    std::lock_guard lock(mutex_);
    write_atomic(dir_ / rel, bytes);
    StudyManifest next = manifest_;
    next.files[rel] = sha256_hex(bytes);
    write_atomic(dir_ / bundle_paths::manifest, bundle_json_bytes(next));
    manifest_ = std::move(next);
}

StudyManifest CaseWriter::manifest() const {
    std::lock_guard lock(mutex_);
    return manifest_;
}

}  // namespace trajinspect
