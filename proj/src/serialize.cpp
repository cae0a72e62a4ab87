#include "trajinspect/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace trajinspect {

namespace {

json real(double x) { return std::isnan(x) ? json(nullptr) : json(x); }
double real_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

json steps_to_json(const std::vector<DiscreteStep>& steps) {
    json out = json::array();
    for (const auto& s : steps) out.push_back({s.state, s.action});
    return out;
}

std::vector<DiscreteStep> steps_from_json(const json& j) {
    std::vector<DiscreteStep> out;
    out.reserve(j.size());
    for (const auto& s : j) {
        if (!s.is_array() || s.size() != 2) throw ValidationError("step must be a [state, action] pair");
        out.push_back({s[0].get<int>(), s[1].get<int>()});
    }
    return out;
}

json absorbing_json(const std::optional<Absorbing>& a) {
    return a ? json(std::string(to_string(*a))) : json(nullptr);
}

std::optional<Absorbing> absorbing_from(const json& j, const char* key) {
    const auto s = opt_from<std::string>(j, key);
    if (!s) return std::nullopt;
    return parse_absorbing(*s);
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(real(m(r, c)));
        rows.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows)
        throw ValidationError("matrix row count does not match its data");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = data[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != cols) throw ValidationError("ragged matrix row");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = real_from(row[static_cast<std::size_t>(c)]);
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real(v(i)));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = real_from(j[i]);
    return v;
}

void to_json(json& j, const StateClustering& c) {
    j = {{"k", c.k()},
         {"dim", c.dim()},
         {"centroids", matrix_to_json(c.centroids)},
         {"feature_means", vector_to_json(c.feature_means)},
         {"feature_scales", vector_to_json(c.feature_scales)}};
}

void from_json(const json& j, StateClustering& c) {
    c.centroids = matrix_from_json(j.at("centroids"));
    c.feature_means = vector_from_json(j.at("feature_means"));
    c.feature_scales = vector_from_json(j.at("feature_scales"));
    if (c.feature_means.size() != c.centroids.cols() || c.feature_scales.size() != c.centroids.cols())
        throw ValidationError("clustering standardization does not match centroid dimension");
}

void to_json(json& j, const ActionGrid& g) {
    j = {{"fluid_edges", g.fluid_edges},
         {"vaso_edges", g.vaso_edges},
         {"fluid_large_threshold", g.fluid_large_threshold},
         {"vaso_large_threshold", g.vaso_large_threshold}};
}

void from_json(const json& j, ActionGrid& g) {
    j.at("fluid_edges").get_to(g.fluid_edges);
    j.at("vaso_edges").get_to(g.vaso_edges);
    j.at("fluid_large_threshold").get_to(g.fluid_large_threshold);
    j.at("vaso_large_threshold").get_to(g.vaso_large_threshold);
}

void to_json(json& j, const GroundTruthMDP& gt) {
    j = {{"n_states", gt.n_states},
         {"n_actions", gt.n_actions},
         {"transition_probs", matrix_to_json(gt.transition_probs)},
         {"behavior_probs", matrix_to_json(gt.behavior_probs)},
         {"emission_centers", matrix_to_json(gt.emission_centers)},
         {"emission_scale", gt.emission_scale},
         {"censor_horizon", gt.censor_horizon},
         {"initial_weights", vector_to_json(gt.initial_weights)},
         {"censored_survival_prob", gt.censored_survival_prob},
         {"action_doses", gt.action_doses}};
}

void from_json(const json& j, GroundTruthMDP& gt) {
    j.at("n_states").get_to(gt.n_states);
    j.at("n_actions").get_to(gt.n_actions);
    gt.transition_probs = matrix_from_json(j.at("transition_probs"));
    gt.behavior_probs = matrix_from_json(j.at("behavior_probs"));
    gt.emission_centers = matrix_from_json(j.at("emission_centers"));
    j.at("emission_scale").get_to(gt.emission_scale);
    j.at("censor_horizon").get_to(gt.censor_horizon);
    gt.initial_weights = vector_from_json(j.at("initial_weights"));
    j.at("censored_survival_prob").get_to(gt.censored_survival_prob);
    j.at("action_doses").get_to(gt.action_doses);
    gt.validate();
}

void to_json(json& j, const DiscreteTrajectory& t) {
    j = {{"id", t.id},
         {"steps", steps_to_json(t.steps)},
         {"terminal", absorbing_json(t.terminal)},
         {"censored", t.censored},
         {"absorbs", t.absorbs}};
}

void from_json(const json& j, DiscreteTrajectory& t) {
    j.at("id").get_to(t.id);
    t.steps = steps_from_json(j.at("steps"));
    if (t.steps.empty()) throw ValidationError("trajectory '" + t.id + "' has no steps");
    t.terminal = absorbing_from(j, "terminal");
    j.at("censored").get_to(t.censored);
    j.at("absorbs").get_to(t.absorbs);
}

void to_json(json& j, const BehaviorPolicy& bp) {
    json counts = json::array();
    for (StateId s = 0; s < bp.n_states(); ++s)
        for (ActionId a = 0; a < bp.n_actions(); ++a)
            if (const auto c = bp.support_counts(s, a); c > 0) counts.push_back({s, a, c});
    j = {{"n_states", bp.n_states()}, {"n_actions", bp.n_actions()}, {"counts", std::move(counts)}};
}

void from_json(const json& j, BehaviorPolicy& bp) {
    const int n = j.at("n_states").get<int>();
    const int a = j.at("n_actions").get<int>();
    if (n < 0 || a < 0) throw ValidationError("behavior policy dimensions must be non-negative");
    CountMatrix counts = CountMatrix::Zero(n, a);
    for (const auto& t : j.at("counts")) {
        const int s = t.at(0).get<int>(), act = t.at(1).get<int>();
        if (s < 0 || s >= n || act < 0 || act >= a) throw ValidationError("behavior count out of range");
        counts(s, act) = t.at(2).get<std::int64_t>();
    }
    bp = BehaviorPolicy(std::move(counts));
}

void to_json(json& j, const TargetPolicy& tp) {
    json entries = json::array();
    for (std::size_t s = 0; s < tp.action.size(); ++s)
        entries.push_back({{"action", tp.action[s]},
                           {"value", real(tp.values(static_cast<Eigen::Index>(s)))},
                           {"fallback", static_cast<bool>(tp.fallback[s])}});
    j = {{"gamma", tp.gamma}, {"tol", tp.tol}, {"sweeps", tp.sweeps}, {"entries", std::move(entries)}};
}

void from_json(const json& j, TargetPolicy& tp) {
    j.at("gamma").get_to(tp.gamma);
    j.at("tol").get_to(tp.tol);
    j.at("sweeps").get_to(tp.sweeps);
    const auto& entries = j.at("entries");
    tp.action.clear();
    tp.fallback.clear();
    tp.values.resize(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t s = 0; s < entries.size(); ++s) {
        tp.action.push_back(entries[s].at("action").get<int>());
        tp.fallback.push_back(entries[s].at("fallback").get<bool>());
        tp.values(static_cast<Eigen::Index>(s)) = real_from(entries[s].at("value"));
    }
}

void to_json(json& j, const SimTrajectory& r) {
    j = {{"start_state", r.start_state},
         {"seed", r.seed},
         {"policy_tag", r.policy_tag},
         {"steps", steps_to_json(r.steps)},
         {"terminal", std::string(to_string(r.terminal))},
         {"reward", opt(r.reward)}};
}

void from_json(const json& j, SimTrajectory& r) {
    j.at("start_state").get_to(r.start_state);
    j.at("seed").get_to(r.seed);
    j.at("policy_tag").get_to(r.policy_tag);
    r.steps = steps_from_json(j.at("steps"));
    r.terminal = parse_rollout_end(j.at("terminal").get<std::string>());
    r.reward = opt_from<double>(j, "reward");
}

void to_json(json& j, const TreatmentSurprise& t) {
    j = {{"state", t.state},
         {"visits", t.visits},
         {"rl_action", t.rl_action},
         {"rl_action_freq", t.rl_action_freq},
         {"rl_action_count", t.rl_action_count},
         {"common_action", t.common_action},
         {"common_action_freq", t.common_action_freq},
         {"common_action_count", t.common_action_count},
         {"aggressiveness", t.aggressiveness}};
}

void from_json(const json& j, TreatmentSurprise& t) {
    j.at("state").get_to(t.state);
    j.at("visits").get_to(t.visits);
    j.at("rl_action").get_to(t.rl_action);
    j.at("rl_action_freq").get_to(t.rl_action_freq);
    j.at("rl_action_count").get_to(t.rl_action_count);
    j.at("common_action").get_to(t.common_action);
    j.at("common_action_freq").get_to(t.common_action_freq);
    j.at("common_action_count").get_to(t.common_action_count);
    j.at("aggressiveness").get_to(t.aggressiveness);
}

void to_json(json& j, const CaseAnchor& a) { j = {{"trajectory_id", a.trajectory_id}, {"step_index", a.step_index}}; }

void from_json(const json& j, CaseAnchor& a) {
    j.at("trajectory_id").get_to(a.trajectory_id);
    a.step_index = j.value("step_index", 0);
}

void to_json(json& j, const FlaggedState& f) {
    j = f.surprise;
    j["anchor"] = opt(f.anchor);
}

void from_json(const json& j, FlaggedState& f) {
    f.surprise = j.get<TreatmentSurprise>();
    f.anchor = opt_from<CaseAnchor>(j, "anchor");
}

void to_json(json& j, const TreatmentReport& r) {
    j = {{"freq_threshold", r.freq_threshold}, {"n_eligible", r.n_eligible}, {"flagged", r.flagged}};
}

void from_json(const json& j, TreatmentReport& r) {
    j.at("freq_threshold").get_to(r.freq_threshold);
    j.at("n_eligible").get_to(r.n_eligible);
    j.at("flagged").get_to(r.flagged);
}

void to_json(json& j, const OutcomeSurprise& o) {
    j = {{"initial_state", o.initial_state},
         {"mean_rollout_reward", o.mean_rollout_reward},
         {"observed_mean_reward", o.observed_mean_reward},
         {"gap", o.gap},
         {"n_trajectories", o.n_trajectories},
         {"trajectory_ids", o.trajectory_ids}};
}

void from_json(const json& j, OutcomeSurprise& o) {
    j.at("initial_state").get_to(o.initial_state);
    j.at("mean_rollout_reward").get_to(o.mean_rollout_reward);
    j.at("observed_mean_reward").get_to(o.observed_mean_reward);
    j.at("gap").get_to(o.gap);
    j.at("n_trajectories").get_to(o.n_trajectories);
    j.at("trajectory_ids").get_to(o.trajectory_ids);
}

void to_json(json& j, const OutcomeRanking& r) {
    j = {{"ranked", r.ranked},
         {"overall_mean_gap", r.overall_mean_gap},
         {"skipped", r.skipped},
         {"dead_end_rollouts", r.dead_end_rollouts}};
}

void from_json(const json& j, OutcomeRanking& r) {
    j.at("ranked").get_to(r.ranked);
    j.at("overall_mean_gap").get_to(r.overall_mean_gap);
    j.at("skipped").get_to(r.skipped);
    j.at("dead_end_rollouts").get_to(r.dead_end_rollouts);
}

void to_json(json& j, const Annotation& a) {
    j = {{"timestamp", a.timestamp},
         {"author", a.author},
         {"text", a.text},
         {"verdict", std::string(to_string(a.verdict))}};
}

void from_json(const json& j, Annotation& a) {
    j.at("timestamp").get_to(a.timestamp);
    j.at("author").get_to(a.author);
    j.at("text").get_to(a.text);
    a.verdict = parse_verdict(j.at("verdict").get<std::string>());
}

void to_json(json& j, const InspectionCase& c) {
    j = {{"id", c.id},
         {"kind", std::string(to_string(c.kind))},
         {"anchor", c.anchor},
         {"anchor_state", c.anchor_state},
         {"flagged_state", opt(c.flagged_state)},
         {"rollouts", c.rollouts},
         {"annotations", c.annotations}};
}

void from_json(const json& j, InspectionCase& c) {
    j.at("id").get_to(c.id);
    c.kind = parse_case_kind(j.at("kind").get<std::string>());
    j.at("anchor").get_to(c.anchor);
    j.at("anchor_state").get_to(c.anchor_state);
    c.flagged_state = opt_from<StateId>(j, "flagged_state");
    j.at("rollouts").get_to(c.rollouts);
    j.at("annotations").get_to(c.annotations);
}

void to_json(json& j, const LengthReport& r) {
    j = {{"train_histogram", r.train_histogram},
         {"rollout_histogram", r.rollout_histogram},
         {"total_variation_distance", r.total_variation_distance},
         {"censored_fraction_train", r.censored_fraction_train},
         {"n_train", r.n_train},
         {"n_rollouts", r.n_rollouts},
         {"dead_end_rollouts", r.dead_end_rollouts}};
}

void from_json(const json& j, LengthReport& r) {
    j.at("train_histogram").get_to(r.train_histogram);
    j.at("rollout_histogram").get_to(r.rollout_histogram);
    j.at("total_variation_distance").get_to(r.total_variation_distance);
    j.at("censored_fraction_train").get_to(r.censored_fraction_train);
    j.at("n_train").get_to(r.n_train);
    j.at("n_rollouts").get_to(r.n_rollouts);
    j.at("dead_end_rollouts").get_to(r.dead_end_rollouts);
}

void to_json(json& j, const Interval& iv) {
    j = {{"point", iv.point}, {"lower", iv.lower}, {"upper", iv.upper}, {"boot_sd", iv.boot_sd}};
}

void from_json(const json& j, Interval& iv) {
    j.at("point").get_to(iv.point);
    j.at("lower").get_to(iv.lower);
    j.at("upper").get_to(iv.upper);
    j.at("boot_sd").get_to(iv.boot_sd);
}

void to_json(json& j, const TerminationStep& s) {
    j = {{"step", s.step},
         {"at_risk", s.at_risk},
         {"terminated", s.terminated},
         {"actual", opt(s.actual)},
         {"predicted", opt(s.predicted)}};
}

void from_json(const json& j, TerminationStep& s) {
    j.at("step").get_to(s.step);
    j.at("at_risk").get_to(s.at_risk);
    j.at("terminated").get_to(s.terminated);
    s.actual = opt_from<Interval>(j, "actual");
    s.predicted = opt_from<Interval>(j, "predicted");
}

void to_json(json& j, const TerminationBiasReport& r) {
    j = {{"steps", r.steps},
         {"prefinal_actual", opt(r.prefinal_actual)},
         {"prefinal_predicted", opt(r.prefinal_predicted)},
         {"excluded_pairs", r.excluded_pairs},
         {"n_bootstrap", r.n_bootstrap},
         {"confidence", r.confidence}};
}

void from_json(const json& j, TerminationBiasReport& r) {
    j.at("steps").get_to(r.steps);
    r.prefinal_actual = opt_from<Interval>(j, "prefinal_actual");
    r.prefinal_predicted = opt_from<Interval>(j, "prefinal_predicted");
    j.at("excluded_pairs").get_to(r.excluded_pairs);
    j.at("n_bootstrap").get_to(r.n_bootstrap);
    j.at("confidence").get_to(r.confidence);
}

void to_json(json& j, const RareActionReport& r) {
    j = {{"top_n", r.top_n},
         {"n_states", r.n_states},
         {"avg_rl_action_freq", r.avg_rl_action_freq},
         {"avg_rl_action_count", r.avg_rl_action_count},
         {"avg_common_action_freq", r.avg_common_action_freq},
         {"avg_common_action_count", r.avg_common_action_count},
         {"transition_mass_fraction", r.transition_mass_fraction},
         {"common_zero_vaso_count", r.common_zero_vaso_count},
         {"rl_vaso_count", r.rl_vaso_count},
         {"rl_large_vaso_count", r.rl_large_vaso_count},
         {"states", r.states}};
}

void from_json(const json& j, RareActionReport& r) {
    j.at("top_n").get_to(r.top_n);
    j.at("n_states").get_to(r.n_states);
    j.at("avg_rl_action_freq").get_to(r.avg_rl_action_freq);
    j.at("avg_rl_action_count").get_to(r.avg_rl_action_count);
    j.at("avg_common_action_freq").get_to(r.avg_common_action_freq);
    j.at("avg_common_action_count").get_to(r.avg_common_action_count);
    j.at("transition_mass_fraction").get_to(r.transition_mass_fraction);
    j.at("common_zero_vaso_count").get_to(r.common_zero_vaso_count);
    j.at("rl_vaso_count").get_to(r.rl_vaso_count);
    j.at("rl_large_vaso_count").get_to(r.rl_large_vaso_count);
    j.at("states").get_to(r.states);
}

void to_json(json& j, const DischargePopulation& p) {
    j = {{"n", p.n},
         {"frac_nonzero_vaso_at_end", opt(p.frac_nonzero_vaso_at_end)},
         {"frac_large_vaso_at_end", opt(p.frac_large_vaso_at_end)}};
}

void from_json(const json& j, DischargePopulation& p) {
    j.at("n").get_to(p.n);
    p.frac_nonzero_vaso_at_end = opt_from<double>(j, "frac_nonzero_vaso_at_end");
    p.frac_large_vaso_at_end = opt_from<double>(j, "frac_large_vaso_at_end");
}

void to_json(json& j, const DischargeTreatmentReport& r) {
    j = {{"train_uncensored_survivors", r.train_uncensored_survivors},
         {"train_censored_survivors", r.train_censored_survivors},
         {"rollout_survivors", r.rollout_survivors}};
}

void from_json(const json& j, DischargeTreatmentReport& r) {
    j.at("train_uncensored_survivors").get_to(r.train_uncensored_survivors);
    j.at("train_censored_survivors").get_to(r.train_censored_survivors);
    j.at("rollout_survivors").get_to(r.rollout_survivors);
}

namespace {

constexpr char kModelMagic[8] = {'T', 'J', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kModelVersion = 1;
constexpr std::size_t kPreamble = 8 + 4 + 4 + 8;
constexpr std::size_t kRecord = 4 + 4 + 4 + 8;

template <typename T>
void put_le(std::string& out, T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(u & 0xffu));
        u = static_cast<U>(u >> 8);
    }
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        u = static_cast<U>(u | static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i));
    return static_cast<T>(u);
}

}  // namespace

json model_header(const TransitionModel& m) {
    std::uint64_t n = 0;
    for (StateId s = 0; s < m.n_states(); ++s)
        for (const auto& [a, row] : m.rows(s)) n += row.counts.size();
    return {{"n_states", m.n_states()},
            {"n_actions", m.n_actions()},
            {"min_count", m.min_count()},
            {"surv_code", m.surv_code()},
            {"death_code", m.death_code()},
            {"n_triplets", n},
            {"format_version", kModelVersion}};
}

std::string encode_model_triplets(const TransitionModel& m) {
    std::string out(kModelMagic, sizeof kModelMagic);
    put_le<std::uint32_t>(out, kModelVersion);
    put_le<std::uint32_t>(out, 0);
    const auto n = model_header(m).at("n_triplets").get<std::uint64_t>();
    put_le<std::uint64_t>(out, n);
    out.reserve(kPreamble + n * kRecord);
    for (StateId s = 0; s < m.n_states(); ++s)
        for (const auto& [a, row] : m.rows(s))
            for (const auto& [next, c] : row.counts) {
                put_le<std::int32_t>(out, s);
                put_le<std::int32_t>(out, a);
                put_le<std::int32_t>(out, next);
                put_le<std::uint64_t>(out, static_cast<std::uint64_t>(c));
            }
    return out;
}

TransitionModel decode_model(const json& header, std::string_view bytes) {
    if (bytes.size() < kPreamble || std::memcmp(bytes.data(), kModelMagic, sizeof kModelMagic) != 0)
        throw ValidationError("model section has a bad magic number");
    if (get_le<std::uint32_t>(bytes, 8) != kModelVersion) throw ValidationError("unsupported model section version");
    const auto n = get_le<std::uint64_t>(bytes, 16);
    if (n != header.at("n_triplets").get<std::uint64_t>() || bytes.size() != kPreamble + n * kRecord)
        throw ValidationError("model section length does not match its triplet count");
    TransitionModel m(header.at("n_states").get<int>(), header.at("n_actions").get<int>(),
                      header.at("min_count").get<int>());
    if (header.at("surv_code").get<int>() != m.surv_code() || header.at("death_code").get<int>() != m.death_code())
        throw ValidationError("model absorbing codes do not match its state count");
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t off = kPreamble + i * kRecord;
        const auto count = get_le<std::uint64_t>(bytes, off + 12);
        if (count == 0 || count > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
            throw ValidationError("model triplet has an invalid count");
        m.add(get_le<std::int32_t>(bytes, off), get_le<std::int32_t>(bytes, off + 4),
              get_le<std::int32_t>(bytes, off + 8), static_cast<std::int64_t>(count));
    }
    return m;
}

}  // namespace trajinspect
