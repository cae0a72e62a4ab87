#include "trajinspect/service.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>

#include <httplib.h>

#include "trajinspect/serialize.hpp"

namespace trajinspect {

namespace {

constexpr std::size_t kDefaultPageLimit = 50;
constexpr std::size_t kMaxPageLimit = 1000;
constexpr int kMaxRequestRollouts = 1000;

std::vector<std::string_view> path_segments(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < path.size()) {
        if (path[pos] == '/') {
            ++pos;
            continue;
        }
        auto end = path.find('/', pos);
        if (end == std::string_view::npos) end = path.size();
        out.push_back(path.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

std::size_t query_size(const std::map<std::string, std::string>& q, const char* key, std::size_t fallback) {
    const auto it = q.find(key);
    if (it == q.end()) return fallback;
    std::size_t v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ValidationError(std::string(key) + " must be a non-negative integer");
    return v;
}

template <typename T>
json page(const std::vector<T>& items, const std::map<std::string, std::string>& query) {
    const std::size_t limit = query_size(query, "limit", kDefaultPageLimit);
    const std::size_t offset = query_size(query, "offset", 0);
    if (limit > kMaxPageLimit) throw ValidationError("limit must be at most " + std::to_string(kMaxPageLimit));
    json out = {{"total", items.size()}, {"offset", offset}, {"limit", limit}, {"items", json::array()}};
    for (std::size_t i = offset; i < items.size() && i < offset + limit; ++i) out["items"].push_back(items[i]);
    return out;
}

json parse_body(std::string_view body) {
    if (body.empty()) return json::object();
    json j = json::parse(body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
}

json case_summary(const InspectionCase& c) {
    json j = {{"id", c.id},
              {"kind", std::string(to_string(c.kind))},
              {"anchor", c.anchor},
              {"anchor_state", c.anchor_state},
              {"flagged_state", c.flagged_state ? json(*c.flagged_state) : json(nullptr)},
              {"n_rollouts", c.rollouts.size()},
              {"n_annotations", c.annotations.size()},
              {"latest_verdict", nullptr}};
    if (!c.annotations.empty()) j["latest_verdict"] = std::string(to_string(c.annotations.back().verdict));
    return j;
}

template <typename T>
T field(const json& body, const char* key, T fallback) {
    const auto it = body.find(key);
    if (it == body.end() || it->is_null()) return fallback;
    return it->get<T>();
}

}  // namespace

json api_error(std::string_view code, std::string_view message) {
    return {{"code", std::string(code)}, {"message", std::string(message)}};
}

struct StudyService::Impl {
    std::filesystem::path dir;
    Study study;
    std::vector<DiscreteTrajectory> discrete;
    std::unordered_map<std::string, std::size_t> discrete_index;
    std::unordered_map<std::string, std::size_t> raw_index;
    std::unordered_map<std::string, std::string> split_of;
    CaseWriter writer;
    CaseStore cases;

    explicit Impl(std::filesystem::path d)
        : dir(std::move(d)),
          study(load(dir)),
          writer(dir),
          cases(study.cases, [this](const InspectionCase& c) { writer.write(c); }) {
        if (study.trajectories) discrete = *study.trajectories;
        for (std::size_t i = 0; i < discrete.size(); ++i) discrete_index.emplace(discrete[i].id, i);
        if (study.cohort)
            for (std::size_t i = 0; i < study.cohort->trajectories.size(); ++i)
                raw_index.emplace(study.cohort->trajectories[i].id, i);
        if (study.split) {
            for (const auto& id : study.split->train_ids) split_of[id] = "train";
            for (const auto& id : study.split->test_ids) split_of[id] = "test";
        }
    }

    void need_policy() const {
        if (!study.model || !study.policy)
            throw NotFoundError("study has no target policy; run `trajinspect estimate` and `trajinspect solve`");
        if (discrete.empty()) throw NotFoundError("study has no discretized trajectories; run `trajinspect discretize`");
    }

    ApiResponse study_info() const {
        json j = writer.manifest();
        j["n_trajectories"] = study.cohort ? study.cohort->trajectories.size() : 0;
        j["feature_names"] = study.cohort ? study.cohort->feature_names : std::vector<std::string>{};
        j["n_states"] = study.states ? study.states->k() : 0;
        return {200, j};
    }

    ApiResponse trajectory(const std::string& id) const {
        const auto d = discrete_index.find(id);
        const auto r = raw_index.find(id);
        if (d == discrete_index.end() && r == raw_index.end()) throw NotFoundError("unknown trajectory '" + id + "'");
        json j = {{"id", id}, {"split", split_of.count(id) ? json(split_of.at(id)) : json(nullptr)}};
        const RawTrajectory* raw = r != raw_index.end() ? &study.cohort->trajectories[r->second] : nullptr;
        const DiscreteTrajectory* disc = d != discrete_index.end() ? &discrete[d->second] : nullptr;
        if (raw) {
            j["outcome"] = std::string(to_string(raw->outcome));
            j["label_90d"] = raw->label_90d ? json(std::string(to_string(*raw->label_90d))) : json(nullptr);
            j["record_text"] = raw->record_text ? json(*raw->record_text) : json(nullptr);
        }
        if (disc) {
            j["terminal"] = disc->terminal ? json(std::string(to_string(*disc->terminal))) : json(nullptr);
            j["censored"] = disc->censored;
            j["absorbs"] = disc->absorbs;
            j["reward"] = disc->reward() ? json(*disc->reward()) : json(nullptr);
        }
        const std::size_t n = raw ? raw->steps.size() : disc->steps.size();
        json steps = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            json s = {{"index", i}};
            if (raw) {
                const auto& rs = raw->steps[i];
                s["t_hours"] = rs.time_offset_hours;
                s["fluid_dose"] = rs.fluid_dose;
                s["vaso_dose"] = rs.vaso_dose;
                s["features"] = vector_to_json(rs.features);
            }
            if (disc && i < disc->steps.size()) {
                const auto& ds = disc->steps[i];
                s["state"] = ds.state;
                s["action"] = ds.action;
                s["fluid_bin"] = fluid_bin(ds.action);
                s["vaso_bin"] = vaso_bin(ds.action);
            }
            steps.push_back(std::move(s));
        }
        j["steps"] = std::move(steps);
        return {200, j};
    }

    ApiResponse state(std::string_view id_text) const {
        if (!study.states || !study.state_medians)
            throw NotFoundError("study has no state space; run `trajinspect discretize`");
        int s = -1;
        const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), s);
        if (ec != std::errc() || ptr != id_text.data() + id_text.size())
            throw ValidationError("state id must be an integer");
        if (s < 0 || s >= study.states->k()) throw NotFoundError("unknown state " + std::to_string(s));
        const auto& names = study.cohort->feature_names;
        json medians = json::object(), centroid = json::object();
        const Eigen::VectorXd c = study.states->centroid_features(s);
        for (std::size_t f = 0; f < names.size(); ++f) {
            const double m = (*study.state_medians)(s, static_cast<Eigen::Index>(f));
            medians[names[f]] = std::isnan(m) ? json(nullptr) : json(m);
            centroid[names[f]] = c(static_cast<Eigen::Index>(f));
        }
        json j = {{"state", s}, {"medians", medians}, {"centroid", centroid}};
        if (study.behavior) {
            j["visits"] = study.behavior->visits(s);
            j["common_action"] = study.behavior->visited(s) ? json(study.behavior->modal_action(s)) : json(nullptr);
        }
        if (study.policy) {
            j["rl_action"] = study.policy->action[static_cast<std::size_t>(s)];
            j["fallback"] = static_cast<bool>(study.policy->fallback[static_cast<std::size_t>(s)]);
        }
        return {200, j};
    }

    ApiResponse report(std::string_view name) const {
        const auto missing = [&] {
            return NotFoundError("report '" + std::string(name) + "' has not been computed; run `trajinspect report " +
                                 std::string(name) + "`");
        };
        if (name == "length") {
            if (!study.length_report) throw missing();
            return {200, *study.length_report};
        }
        if (name == "termination") {
            if (!study.termination_report) throw missing();
            return {200, *study.termination_report};
        }
        if (name == "rare_action") {
            if (!study.rare_action_report) throw missing();
            return {200, *study.rare_action_report};
        }
        if (name == "discharge") {
            if (!study.discharge_report) throw missing();
            return {200, *study.discharge_report};
        }
        throw NotFoundError("unknown report '" + std::string(name) +
                            "' (expected length, termination, rare_action or discharge)");
    }

    ApiResponse create_case(const json& body) {
        need_policy();
        const auto kind = parse_case_kind(body.at("kind").get<std::string>());
        const auto anchor = body.at("anchor").get<CaseAnchor>();
        const int n = field<int>(body, "n_rollouts", study.manifest.config.n_rollouts);
        if (n < 0 || n > kMaxRequestRollouts)
            throw ValidationError("n_rollouts must lie in [0, " + std::to_string(kMaxRequestRollouts) + "]");
        const auto seed = field<std::uint64_t>(body, "seed", study.manifest.seeds.rollout);
        std::optional<StateId> flagged;
        if (body.contains("flagged_state") && !body["flagged_state"].is_null())
            flagged = body["flagged_state"].get<StateId>();
        auto c = build_case("", kind, anchor, flagged, discrete, *study.model, *study.policy, n, seed);
        return {201, cases.add(std::move(c))};
    }

    ApiResponse add_rollouts(const std::string& id, const json& body) {
        need_policy();
        const int n = field<int>(body, "n", study.manifest.config.n_rollouts);
        if (n < 1 || n > kMaxRequestRollouts)
            throw ValidationError("n must lie in [1, " + std::to_string(kMaxRequestRollouts) + "]");
        const auto seed = field<std::uint64_t>(body, "seed", study.manifest.seeds.rollout);
        std::vector<SimTrajectory> added;
        auto updated = cases.append_rollouts(id, [&](const InspectionCase& c) {
            added = case_rollouts(*study.model, *study.policy, c.anchor_state, c.anchor.step_index, n, seed);
            return added;
        });
        return {200, {{"rollouts", added}, {"case", updated}}};
    }

    ApiResponse annotate(const std::string& id, const json& body) {
        const auto author = body.at("author").get<std::string>();
        const auto text = field<std::string>(body, "text", "");
        const auto verdict = parse_verdict(body.at("verdict").get<std::string>());
        return {201, cases.annotate(id, author, text, verdict)};
    }

    ApiResponse route(std::string_view method, std::string_view path, const std::map<std::string, std::string>& query,
                      std::string_view body) {
        const auto seg = path_segments(path);
        if (seg.size() < 2 || seg[0] != "api") throw NotFoundError("no route for " + std::string(path));
        const bool get = method == "GET", post = method == "POST";
        const auto n = seg.size();
        if (get && n == 2 && seg[1] == "study") return study_info();
        if (get && n == 3 && seg[1] == "heuristics") {
            if (seg[2] == "treatment") {
                if (!study.treatment_report)
                    throw NotFoundError("treatment heuristic not computed; run `trajinspect inspect-treatment`");
                json j = page(study.treatment_report->flagged, query);
                j["freq_threshold"] = study.treatment_report->freq_threshold;
                j["n_eligible"] = study.treatment_report->n_eligible;
                return {200, j};
            }
            if (seg[2] == "outcome") {
                if (!study.outcome_report)
                    throw NotFoundError("outcome heuristic not computed; run `trajinspect inspect-outcome`");
                json j = page(study.outcome_report->ranked, query);
                j["overall_mean_gap"] = study.outcome_report->overall_mean_gap;
                return {200, j};
            }
        }
        if (get && n == 3 && seg[1] == "trajectories") return trajectory(std::string(seg[2]));
        if (get && n == 3 && seg[1] == "states") return state(seg[2]);
        if (get && n == 3 && seg[1] == "reports") return report(seg[2]);
        if (seg[1] == "cases") {
            if (n == 2 && get) {
                json items = json::array();
                for (const auto& c : cases.list()) items.push_back(case_summary(c));
                return {200, {{"total", items.size()}, {"items", items}}};
            }
            if (n == 2 && post) return create_case(parse_body(body));
            if (n == 3 && get) return {200, cases.get(std::string(seg[2]))};
            if (n == 4 && post && seg[3] == "rollouts") return add_rollouts(std::string(seg[2]), parse_body(body));
            if (n == 4 && post && seg[3] == "annotations") return annotate(std::string(seg[2]), parse_body(body));
        }
        throw NotFoundError("no route for " + std::string(method) + " " + std::string(path));
    }
};

StudyService::StudyService(std::filesystem::path bundle_dir) : impl_(std::make_unique<Impl>(std::move(bundle_dir))) {}

StudyService::~StudyService() = default;

const Study& StudyService::study() const { return impl_->study; }

ApiResponse StudyService::handle(std::string_view method, std::string_view path,
                                 const std::map<std::string, std::string>& query, std::string_view body) {
    try {
        return impl_->route(method, path, query, body);
    } catch (const NotFoundError& e) {
        return {404, api_error("not_found", e.what())};
    } catch (const ConflictError& e) {
        return {409, api_error("conflict", e.what())};
    } catch (const ValidationError& e) {
        return {400, api_error("invalid_input", e.what())};
    } catch (const json::exception& e) {
        return {400, api_error("invalid_input", e.what())};
    } catch (const std::exception& e) {
        return {500, api_error("internal", e.what())};
    }
}

struct HttpServer::Impl {
    std::shared_ptr<StudyService> service;
    httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<StudyService> service) : impl_(std::make_unique<Impl>()) {
    impl_->service = std::move(service);
    const auto handler = [svc = impl_->service](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        const auto r = svc->handle(req.method, req.path, query, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json; charset=utf-8");
    };
    impl_->server.Get(R"(/api/.*)", handler);
    impl_->server.Post(R"(/api/.*)", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() {
    if (!impl_->server.listen_after_bind()) throw Error("HTTP server stopped with an error");
}

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace trajinspect
