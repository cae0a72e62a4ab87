#include "trajinspect/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "trajinspect/rng.hpp"
#include "text_util.hpp"

namespace trajinspect {

using nlohmann::json;

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::survival: return "survival";
        case Outcome::mortality: return "mortality";
        case Outcome::censored: return "censored";
    }
    return "censored";
}

Outcome parse_outcome(std::string_view s) {
    if (s == "survival") return Outcome::survival;
    if (s == "mortality") return Outcome::mortality;
    if (s == "censored") return Outcome::censored;
    throw ValidationError("unknown outcome '" + std::string(s) + "'");
}

CohortFormat parse_cohort_format(std::string_view s) {
    if (s == "csv") return CohortFormat::csv;
    if (s == "jsonl") return CohortFormat::jsonl;
    throw ValidationError("unknown cohort format '" + std::string(s) + "' (expected csv or jsonl)");
}

std::optional<Absorbing> RawTrajectory::label() const {
    switch (outcome) {
        case Outcome::survival: return Absorbing::surv;
        case Outcome::mortality: return Absorbing::death;
        case Outcome::censored: return label_90d;
    }
    return std::nullopt;
}

void Cohort::validate() const {
    if (feature_dim < 1) throw ValidationError("cohort feature dimension must be positive");
    if (static_cast<int>(feature_names.size()) != feature_dim)
        throw ValidationError("cohort has " + std::to_string(feature_names.size()) +
                              " feature names for dimension " + std::to_string(feature_dim));
    std::unordered_set<std::string> ids;
    for (const auto& t : trajectories) {
        if (!ids.insert(t.id).second) throw ValidationError("duplicate trajectory id '" + t.id + "'");
        if (t.steps.empty()) throw ValidationError("trajectory '" + t.id + "' has no steps");
        for (std::size_t i = 0; i < t.steps.size(); ++i) {
            const auto& s = t.steps[i];
            if (s.features.size() != feature_dim)
                throw ValidationError("trajectory '" + t.id + "' step " + std::to_string(i) +
                                      " has feature dimension " + std::to_string(s.features.size()) +
                                      ", expected " + std::to_string(feature_dim));
            if (!std::isfinite(s.fluid_dose) || !std::isfinite(s.vaso_dose) || s.fluid_dose < 0 ||
                s.vaso_dose < 0)
                throw ValidationError("trajectory '" + t.id + "' step " + std::to_string(i) +
                                      " has a negative or non-finite dose");
            if (!s.features.allFinite())
                throw ValidationError("trajectory '" + t.id + "' step " + std::to_string(i) +
                                      " has a non-finite feature");
            if (i > 0 && !(s.time_offset_hours > t.steps[i - 1].time_offset_hours))
                throw ValidationError("trajectory '" + t.id + "' time offsets are not strictly increasing");
            if (s.time_offset_hours < 0)
                throw ValidationError("trajectory '" + t.id + "' has a negative time offset");
        }
        if (t.label_90d && !t.censored())
            throw ValidationError("trajectory '" + t.id + "' carries a 90-day label but is not censored");
    }
}

std::size_t Cohort::step_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.steps.size();
    return n;
}

bool truncate_to_window(RawTrajectory& traj, int max_steps) {
    if (static_cast<int>(traj.steps.size()) <= max_steps) return false;
    traj.steps.resize(static_cast<std::size_t>(max_steps));
    if (!traj.censored()) {
        traj.label_90d = traj.label();
        traj.outcome = Outcome::censored;
    }
    return true;
}

namespace {

std::vector<std::string> default_feature_names(int dim) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) names.push_back("f_" + std::to_string(i));
    return names;
}

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

/// One trajectory under construction while rows stream in.
struct PendingTrajectory {
    RawTrajectory traj;
    bool missing = false;
    std::optional<Outcome> outcome;
    std::optional<Absorbing> label;
};

void finish(PendingTrajectory& p, IngestResult& result) {
    if (p.missing || !p.outcome) {
        ++result.dropped;
        return;
    }
    p.traj.outcome = *p.outcome;
    if (p.traj.censored()) p.traj.label_90d = p.label;
    if (truncate_to_window(p.traj)) ++result.truncated;
    result.cohort.trajectories.push_back(std::move(p.traj));
}

std::optional<Absorbing> parse_label_field(std::string_view s, std::size_t line) {
    if (s.empty()) return std::nullopt;
    if (s == "survival") return Absorbing::surv;
    if (s == "mortality") return Absorbing::death;
    throw ValidationError(line_prefix(line) + "label_90d must be survival, mortality or empty");
}

}  // namespace

IngestResult read_csv(std::istream& in) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ValidationError("line 1: missing CSV header");
    ++line_no;
    detail::strip_cr(line);
    const auto header = detail::split(line, ',');
    static constexpr std::array<std::string_view, 5> fixed = {"traj_id", "t_hours", "outcome",
                                                               "fluid_dose", "vaso_dose"};
    if (header.size() < fixed.size() + 1)
        throw ValidationError("line 1: header needs traj_id,t_hours,outcome,fluid_dose,vaso_dose and at least one feature");
    for (std::size_t i = 0; i < fixed.size(); ++i)
        if (header[i] != fixed[i])
            throw ValidationError("line 1: column " + std::to_string(i + 1) + " must be '" +
                                  std::string(fixed[i]) + "', found '" + header[i] + "'");
    std::optional<std::size_t> label_col;
    std::vector<std::size_t> feature_cols;
    for (std::size_t i = fixed.size(); i < header.size(); ++i) {
        if (header[i] == "label_90d") {
            label_col = i;
        } else {
            feature_cols.push_back(i);
            result.cohort.feature_names.push_back(header[i]);
        }
    }
    if (feature_cols.empty()) throw ValidationError("line 1: no feature columns");
    result.cohort.feature_dim = static_cast<int>(feature_cols.size());

    std::optional<PendingTrajectory> pending;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const auto fields = detail::split(line, ',');
        if (fields.size() != header.size())
            throw ValidationError(line_prefix(line_no) + "expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(fields.size()));
        const std::string& id = fields[0];
        if (id.empty()) throw ValidationError(line_prefix(line_no) + "empty traj_id");
        if (!pending || pending->traj.id != id) {
            if (pending) finish(*pending, result);
            if (!seen.insert(id).second)
                throw ValidationError(line_prefix(line_no) + "rows of trajectory '" + id + "' are not contiguous");
            pending.emplace();
            pending->traj.id = id;
        }
        auto& p = *pending;

        RawStep step;
        const auto t = detail::parse_double(fields[1]);
        if (!t || !std::isfinite(*t) || *t < 0)
            throw ValidationError(line_prefix(line_no) + "t_hours must be a non-negative number");
        step.time_offset_hours = *t;
        if (!p.traj.steps.empty() && !(step.time_offset_hours > p.traj.steps.back().time_offset_hours))
            throw ValidationError(line_prefix(line_no) + "t_hours not strictly increasing within '" + id + "'");

        if (fields[2].empty()) {
            p.missing = true;
        } else {
            Outcome o;
            try {
                o = parse_outcome(fields[2]);
            } catch (const ValidationError& e) {
                throw ValidationError(line_prefix(line_no) + e.what());
            }
            if (p.outcome && *p.outcome != o)
                throw ValidationError(line_prefix(line_no) + "outcome changes within trajectory '" + id + "'");
            p.outcome = o;
        }

        for (int d = 0; d < 2; ++d) {
            const std::string& f = fields[3 + static_cast<std::size_t>(d)];
            if (f.empty()) {
                p.missing = true;
                continue;
            }
            const auto v = detail::parse_double(f);
            if (!v || !std::isfinite(*v) || *v < 0)
                throw ValidationError(line_prefix(line_no) + std::string(fixed[3 + static_cast<std::size_t>(d)]) +
                                      " must be a non-negative number");
            (d == 0 ? step.fluid_dose : step.vaso_dose) = *v;
        }

        step.features.resize(static_cast<Eigen::Index>(feature_cols.size()));
        for (std::size_t j = 0; j < feature_cols.size(); ++j) {
            const auto v = detail::parse_double(fields[feature_cols[j]]);
            if (!v || !std::isfinite(*v))
                throw ValidationError(line_prefix(line_no) + "feature '" + header[feature_cols[j]] +
                                      "' is not a finite number");
            step.features(static_cast<Eigen::Index>(j)) = *v;
        }
        if (label_col) {
            const auto label = parse_label_field(fields[*label_col], line_no);
            if (label) {
                if (p.label && *p.label != *label)
                    throw ValidationError(line_prefix(line_no) + "label_90d changes within trajectory '" + id + "'");
                p.label = label;
            }
        }
        p.traj.steps.push_back(std::move(step));
    }
    if (pending) finish(*pending, result);
    result.cohort.validate();
    return result;
}

IngestResult read_jsonl(std::istream& in) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::string> seen;
    std::optional<int> dim;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(line_prefix(line_no) + "invalid JSON: " + e.what());
        }
        try {
            if (!j.is_object()) throw ValidationError("expected a JSON object");
            PendingTrajectory p;
            p.traj.id = j.at("id").get<std::string>();
            if (p.traj.id.empty()) throw ValidationError("empty id");
            if (!seen.insert(p.traj.id).second) throw ValidationError("duplicate id '" + p.traj.id + "'");
            if (j.contains("outcome") && !j["outcome"].is_null())
                p.outcome = parse_outcome(j["outcome"].get<std::string>());
            if (j.contains("label_90d") && !j["label_90d"].is_null())
                p.label = parse_label_field(j["label_90d"].get<std::string>(), line_no);
            if (j.contains("record_text") && !j["record_text"].is_null())
                p.traj.record_text = j["record_text"].get<std::string>();
            const auto& steps = j.at("steps");
            if (!steps.is_array() || steps.empty()) throw ValidationError("steps must be a non-empty array");
            for (const auto& js : steps) {
                RawStep step;
                step.time_offset_hours = js.at("t_hours").get<double>();
                if (!std::isfinite(step.time_offset_hours) || step.time_offset_hours < 0)
                    throw ValidationError("t_hours must be non-negative");
                if (!p.traj.steps.empty() &&
                    !(step.time_offset_hours > p.traj.steps.back().time_offset_hours))
                    throw ValidationError("t_hours not strictly increasing");
                for (const char* key : {"fluid_dose", "vaso_dose"}) {
                    if (!js.contains(key) || js[key].is_null()) {
                        p.missing = true;
                        continue;
                    }
                    const double v = js[key].get<double>();
                    if (!std::isfinite(v) || v < 0) throw ValidationError(std::string(key) + " must be non-negative");
                    (key[0] == 'f' ? step.fluid_dose : step.vaso_dose) = v;
                }
                const auto& feats = js.at("features");
                if (!feats.is_array()) throw ValidationError("features must be an array");
                const int d = static_cast<int>(feats.size());
                if (!dim) dim = d;
                if (d != *dim)
                    throw ValidationError("feature dimension " + std::to_string(d) + " differs from " +
                                          std::to_string(*dim));
                step.features.resize(d);
                for (int i = 0; i < d; ++i) step.features(i) = feats[static_cast<std::size_t>(i)].get<double>();
                if (!step.features.allFinite()) throw ValidationError("non-finite feature");
                p.traj.steps.push_back(std::move(step));
            }
            finish(p, result);
        } catch (const json::exception& e) {
            throw ValidationError(line_prefix(line_no) + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(line_prefix(line_no) + e.what());
        }
    }
    if (!dim) throw ValidationError("JSONL cohort has no trajectories");
    result.cohort.feature_dim = *dim;
    result.cohort.feature_names = default_feature_names(*dim);
    result.cohort.validate();
    return result;
}

IngestResult ingest(const std::filesystem::path& path, CohortFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open cohort file " + path.string());
    return format == CohortFormat::csv ? read_csv(in) : read_jsonl(in);
}

void write_csv(const Cohort& cohort, std::ostream& out) {
    bool any_label = false;
    for (const auto& t : cohort.trajectories) any_label = any_label || t.label_90d.has_value();
    out << "traj_id,t_hours,outcome,fluid_dose,vaso_dose";
    for (const auto& n : cohort.feature_names) out << ',' << n;
    if (any_label) out << ",label_90d";
    out << '\n';
    for (const auto& t : cohort.trajectories) {
        for (const auto& s : t.steps) {
            out << t.id << ',' << detail::format_double(s.time_offset_hours) << ',' << to_string(t.outcome)
                << ',' << detail::format_double(s.fluid_dose) << ',' << detail::format_double(s.vaso_dose);
            for (Eigen::Index i = 0; i < s.features.size(); ++i) out << ',' << detail::format_double(s.features(i));
            if (any_label) {
                out << ',';
                if (t.label_90d) out << (*t.label_90d == Absorbing::surv ? "survival" : "mortality");
            }
            out << '\n';
        }
    }
}

void write_jsonl(const Cohort& cohort, std::ostream& out) {
    for (const auto& t : cohort.trajectories) {
        json j;
        j["id"] = t.id;
        j["outcome"] = to_string(t.outcome);
        if (t.label_90d) j["label_90d"] = *t.label_90d == Absorbing::surv ? "survival" : "mortality";
        if (t.record_text) j["record_text"] = *t.record_text;
        json steps = json::array();
        for (const auto& s : t.steps) {
            json js;
            js["t_hours"] = s.time_offset_hours;
            js["fluid_dose"] = s.fluid_dose;
            js["vaso_dose"] = s.vaso_dose;
            js["features"] = std::vector<double>(s.features.data(), s.features.data() + s.features.size());
            steps.push_back(std::move(js));
        }
        j["steps"] = std::move(steps);
        out << j.dump() << '\n';
    }
}

std::pair<Cohort, Cohort> split(const Cohort& cohort, double train_fraction, std::uint64_t seed) {
    if (cohort.trajectories.empty()) throw ValidationError("cannot split an empty cohort");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("train fraction must lie strictly between 0 and 1");
    const std::size_t n = cohort.trajectories.size();
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n)
        throw ValidationError("train fraction " + std::to_string(train_fraction) + " leaves one side of a " +
                              std::to_string(n) + "-trajectory split empty");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::vector<char> in_train(n, 0);
    for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;

    Cohort train{{}, cohort.feature_dim, cohort.feature_names};
    Cohort test{{}, cohort.feature_dim, cohort.feature_names};
    for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).trajectories.push_back(cohort.trajectories[i]);
    return {std::move(train), std::move(test)};
}

std::array<double, 2> GroundTruthMDP::doses(int action) const {
    if (!action_doses.empty()) return action_doses.at(static_cast<std::size_t>(action));
    return {100.0 * (action + 1), 0.05 * (action + 1)};
}

void GroundTruthMDP::validate() const {
    constexpr double tol = 1e-9;
    if (n_states < 1 || n_actions < 1) throw ValidationError("ground truth needs at least one state and action");
    if (transition_probs.rows() != n_states * n_actions || transition_probs.cols() != n_states + 2)
        throw ValidationError("transition_probs must be (n_states*n_actions) x (n_states+2)");
    if (behavior_probs.rows() != n_states || behavior_probs.cols() != n_actions)
        throw ValidationError("behavior_probs must be n_states x n_actions");
    if (emission_centers.rows() != n_states || emission_centers.cols() < 1)
        throw ValidationError("emission_centers must have one row per state");
    if (!(emission_scale > 0.0)) throw ValidationError("emission_scale must be positive");
    if (censor_horizon < 1) throw ValidationError("censor_horizon must be positive");
    if (!(censored_survival_prob >= 0.0 && censored_survival_prob <= 1.0))
        throw ValidationError("censored_survival_prob must lie in [0,1]");
    auto check_rows = [&](const Eigen::MatrixXd& m, const char* what) {
        if ((m.array() < 0.0).any() || !m.allFinite())
            throw ValidationError(std::string(what) + " has negative or non-finite entries");
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (std::abs(m.row(r).sum() - 1.0) > tol)
                throw ValidationError(std::string(what) + " row " + std::to_string(r) + " does not sum to 1");
    };
    check_rows(transition_probs, "transition_probs");
    check_rows(behavior_probs, "behavior_probs");
    if (initial_weights.size() != 0) {
        if (initial_weights.size() != n_states || (initial_weights.array() < 0.0).any() ||
            !(initial_weights.sum() > 0.0))
            throw ValidationError("initial_weights must be non-negative with one entry per state");
    }
    if (!action_doses.empty() && static_cast<int>(action_doses.size()) != n_actions)
        throw ValidationError("action_doses must have one entry per action");
    for (const auto& d : action_doses)
        if (!(d[0] >= 0.0) || !(d[1] >= 0.0)) throw ValidationError("action doses must be non-negative");
}

GroundTruthMDP random_ground_truth(int n_states, int n_actions, int feature_dim, std::uint64_t seed,
                                   double absorb_rate) {
    if (n_states < 1 || n_actions < 1 || feature_dim < 1)
        throw ValidationError("ground truth needs at least one state, action and feature");
    if (!(absorb_rate > 0.0 && absorb_rate < 0.5)) throw ValidationError("absorb_rate must lie in (0, 0.5)");
    Rng rng(seed);
    GroundTruthMDP gt;
    gt.n_states = n_states;
    gt.n_actions = n_actions;
    gt.transition_probs = Eigen::MatrixXd::Zero(n_states * n_actions, n_states + 2);
    gt.behavior_probs.resize(n_states, n_actions);
    gt.emission_centers.resize(n_states, feature_dim);
    gt.emission_scale = 0.5;
    for (int s = 0; s < n_states; ++s) {
        const double base_survival = 0.3 + 0.5 * rng.uniform();
        for (int a = 0; a < n_actions; ++a) {
            auto row = gt.transition_probs.row(s * n_actions + a);
            for (int t = 0; t < n_states; ++t) {
                const double u = rng.uniform();
                row(t) = u * u * u;
            }
            row(s) += 1.0;
            row.head(n_states) /= row.head(n_states).sum();
            const double absorb = absorb_rate * (0.5 + rng.uniform());
            const double survival =
                std::min(0.95, base_survival + 0.2 * static_cast<double>(a) / std::max(1, n_actions - 1));
            row.head(n_states) *= 1.0 - absorb;
            row(n_states) = absorb * survival;
            row(n_states + 1) = absorb * (1.0 - survival);
            gt.behavior_probs(s, a) = 0.2 + rng.uniform();
        }
        gt.behavior_probs.row(s) /= gt.behavior_probs.row(s).sum();
        for (int j = 0; j < feature_dim; ++j)
            gt.emission_centers(s, j) = 6.0 * static_cast<double>((s * (2 * j + 1)) % n_states) + rng.uniform();
    }
    for (int a = 0; a < n_actions; ++a)
        gt.action_doses.push_back({100.0 * (a + 1), a % 2 == 0 ? 0.0 : 0.05 * (a + 1)});
    gt.validate();
    return gt;
}

namespace {

LatentPath simulate_one(const GroundTruthMDP& gt, Rng& rng) {
    LatentPath path;
    StateId s = gt.initial_weights.size() == 0
                    ? static_cast<StateId>(rng.below(static_cast<std::uint64_t>(gt.n_states)))
                    : static_cast<StateId>(rng.categorical(gt.initial_weights));
    for (;;) {
        const auto a = static_cast<ActionId>(rng.categorical(gt.behavior_probs.row(s)));
        path.steps.emplace_back(s, a);
        const auto next = static_cast<int>(rng.categorical(gt.transition_probs.row(s * gt.n_actions + a)));
        if (next == gt.surv_index()) {
            path.outcome = Outcome::survival;
            return path;
        }
        if (next == gt.death_index()) {
            path.outcome = Outcome::mortality;
            return path;
        }
        if (static_cast<int>(path.steps.size()) == gt.censor_horizon) {
            path.outcome = Outcome::censored;
            path.label_90d = rng.bernoulli(gt.censored_survival_prob) ? Absorbing::surv : Absorbing::death;
            return path;
        }
        s = next;
    }
}

}  // namespace

std::vector<LatentPath> simulate_latent(const GroundTruthMDP& gt, std::size_t n_trajectories, std::uint64_t seed) {
    gt.validate();
    if (n_trajectories < 1) throw ValidationError("n_trajectories must be at least 1");
    std::vector<LatentPath> paths;
    paths.reserve(n_trajectories);
    for (std::size_t i = 0; i < n_trajectories; ++i) {
        Rng rng(derive_seed(seed, i, 0));
        paths.push_back(simulate_one(gt, rng));
    }
    return paths;
}

std::pair<Cohort, std::vector<LatentPath>> generate_synthetic_with_latent(const GroundTruthMDP& gt,
                                                                          std::size_t n_trajectories,
                                                                          std::uint64_t seed) {
    auto paths = simulate_latent(gt, n_trajectories, seed);
    const int dim = gt.feature_dim();
    Cohort cohort{{}, dim, default_feature_names(dim)};
    cohort.trajectories.reserve(paths.size());
    const int width = static_cast<int>(std::to_string(n_trajectories - 1).size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto& path = paths[i];
        Rng rng(derive_seed(seed, i, 1));
        RawTrajectory t;
        std::string idx = std::to_string(i);
        t.id = "syn-" + std::string(static_cast<std::size_t>(width) - idx.size(), '0') + idx;
        t.outcome = path.outcome;
        t.label_90d = path.label_90d;
        t.steps.reserve(path.steps.size());
        for (std::size_t k = 0; k < path.steps.size(); ++k) {
            const auto [s, a] = path.steps[k];
            RawStep step;
            step.time_offset_hours = 4.0 * static_cast<double>(k);
            const auto d = gt.doses(a);
            step.fluid_dose = d[0];
            step.vaso_dose = d[1];
            step.features = gt.emission_centers.row(s).transpose();
            for (Eigen::Index j = 0; j < dim; ++j) step.features(j) += gt.emission_scale * rng.normal();
            t.steps.push_back(std::move(step));
        }
        truncate_to_window(t);
        cohort.trajectories.push_back(std::move(t));
    }
    return {std::move(cohort), std::move(paths)};
}

Cohort generate_synthetic(const GroundTruthMDP& gt, std::size_t n_trajectories, std::uint64_t seed) {
    return generate_synthetic_with_latent(gt, n_trajectories, seed).first;
}

}  // namespace trajinspect
