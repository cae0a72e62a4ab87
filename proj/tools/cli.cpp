#include "trajinspect/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trajinspect/bundle.hpp"
#include "trajinspect/charts.hpp"
#include "trajinspect/rng.hpp"
#include "trajinspect/serialize.hpp"
#include "trajinspect/service.hpp"

namespace trajinspect {

namespace {

namespace fs = std::filesystem;

/// Flags shared by several commands. Unset flags keep the study's value.
struct Flags {
    std::string bundle;
    std::optional<std::uint64_t> seed;
    std::optional<int> k;
    std::optional<int> min_count;
    std::optional<double> gamma;
    std::optional<double> tol;
    std::optional<int> max_sweeps;
    std::optional<double> freq_threshold;
    std::optional<int> n_rollouts;
    std::optional<std::string> censor_mode;
    std::optional<double> train_fraction;
    std::optional<int> n_bootstrap;
    std::optional<int> top_n;

    std::string input;
    std::string format;
    bool force = false;
    std::size_t n_trajectories = 2000;
    int n_states = 10;
    int n_actions = 4;
    int n_features = 3;
    double absorb_rate = 0.1;
    std::string ground_truth;
    int max_iters = 300;
    std::string report;
    std::string svg;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t show = 20;
};

void apply_config(const Flags& f, StudyConfig& c) {
    if (f.k) c.k = *f.k;
    if (f.min_count) c.min_count = *f.min_count;
    if (f.gamma) c.gamma = *f.gamma;
    if (f.tol) c.tol = *f.tol;
    if (f.max_sweeps) c.max_sweeps = *f.max_sweeps;
    if (f.freq_threshold) c.freq_threshold = *f.freq_threshold;
    if (f.n_rollouts) c.n_rollouts = *f.n_rollouts;
    if (f.censor_mode) c.censor_mode = parse_censor_mode(*f.censor_mode);
    if (f.train_fraction) c.train_fraction = *f.train_fraction;
    if (f.n_bootstrap) c.n_bootstrap = *f.n_bootstrap;
    if (f.top_n) c.top_n = *f.top_n;
    if (c.k < 1) throw ValidationError("--k must be positive");
    if (c.min_count < 1) throw ValidationError("--min-count must be positive");
    if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ValidationError("--gamma must lie in (0, 1]");
    if (!(c.tol > 0.0)) throw ValidationError("--tol must be positive");
    if (c.max_sweeps < 1) throw ValidationError("--max-sweeps must be positive");
    if (!(c.freq_threshold >= 0.0 && c.freq_threshold <= 1.0))
        throw ValidationError("--freq-threshold must lie in [0, 1]");
    if (c.n_rollouts < 1) throw ValidationError("--n-rollouts must be positive");
    if (c.n_bootstrap < 0) throw ValidationError("--bootstrap must be non-negative");
    if (c.top_n < 1) throw ValidationError("--top-n must be positive");
}

void require(bool present, std::string_view command, std::string_view stage) {
    if (!present)
        throw ValidationError(std::string(command) + " needs the output of `" + std::string(stage) +
                              "`; run `trajinspect " + std::string(stage) + "` first");
}

std::string fixed(double x, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << x;
    return os.str();
}

std::string opt_fixed(const std::optional<double>& x) { return x ? fixed(*x) : "n/a"; }

std::string action_text(ActionId a) {
    return std::to_string(a) + " (f" + std::to_string(fluid_bin(a)) + ",v" + std::to_string(vaso_bin(a)) + ")";
}

class Runner {
public:
    Runner(Flags& f, std::ostream& out, std::ostream& err) : f_(f), out_(out), err_(err) {}

    void ingest() {
        const fs::path dir = fresh_bundle("ingest");
        const auto format = f_.format.empty() ? (fs::path(f_.input).extension() == ".csv" ? CohortFormat::csv
                                                                                           : CohortFormat::jsonl)
                                              : parse_cohort_format(f_.format);
        auto result = trajinspect::ingest(f_.input, format);
        Study s;
        apply_config(f_, s.manifest.config);
        s.cohort = std::move(result.cohort);
        save(dir, s);
        std::size_t censored = 0;
        for (const auto& t : s.cohort->trajectories) censored += t.censored();
        err_ << "ingested " << s.cohort->trajectories.size() << " trajectories (" << result.dropped << " dropped, "
             << result.truncated << " truncated to " << kMaxSteps << " steps, " << censored << " censored)\n";
        emit({{"command", "ingest"},
              {"study_id", s.manifest.study_id},
              {"trajectories", s.cohort->trajectories.size()},
              {"steps", s.cohort->step_count()},
              {"dropped", result.dropped},
              {"truncated", result.truncated},
              {"censored", censored}});
    }

    void synth() {
        const fs::path dir = fresh_bundle("synth");
        Study s;
        apply_config(f_, s.manifest.config);
        s.manifest.seeds.synth = f_.seed.value_or(0);
        if (f_.ground_truth.empty()) {
            s.ground_truth = random_ground_truth(f_.n_states, f_.n_actions, f_.n_features,
                                                 derive_seed(s.manifest.seeds.synth, 0), f_.absorb_rate);
        } else {
            std::ifstream in(f_.ground_truth);
            if (!in) throw ValidationError("cannot open ground truth file " + f_.ground_truth);
            s.ground_truth = json::parse(in).get<GroundTruthMDP>();
        }
        if (f_.n_trajectories < 1) throw ValidationError("--n must be positive");
        s.cohort = generate_synthetic(*s.ground_truth, f_.n_trajectories, s.manifest.seeds.synth);
        save(dir, s);
        std::size_t censored = 0;
        for (const auto& t : s.cohort->trajectories) censored += t.censored();
        err_ << "generated " << s.cohort->trajectories.size() << " trajectories from a " << s.ground_truth->n_states
             << "-state ground truth (" << censored << " censored)\n";
        emit({{"command", "synth"},
              {"study_id", s.manifest.study_id},
              {"trajectories", s.cohort->trajectories.size()},
              {"steps", s.cohort->step_count()},
              {"censored", censored},
              {"seed", s.manifest.seeds.synth}});
    }

    void split() {
        Study s = open();
        require(s.cohort.has_value(), "split", "ingest");
        if (f_.seed) s.manifest.seeds.split = *f_.seed;
        const auto [train, test] = trajinspect::split(*s.cohort, s.manifest.config.train_fraction, s.manifest.seeds.split);
        CohortSplit sp;
        for (const auto& t : train.trajectories) sp.train_ids.push_back(t.id);
        for (const auto& t : test.trajectories) sp.test_ids.push_back(t.id);
        s.split = std::move(sp);
        s.clear_from_discretize();
        save(f_.bundle, s);
        err_ << "train " << s.split->train_ids.size() << ", test " << s.split->test_ids.size() << "\n";
        emit({{"command", "split"},
              {"train", s.split->train_ids.size()},
              {"test", s.split->test_ids.size()},
              {"seed", s.manifest.seeds.split}});
    }

    void discretize() {
        Study s = open();
        require(s.split.has_value(), "discretize", "split");
        if (f_.seed) s.manifest.seeds.clustering = *f_.seed;
        const Cohort train = s.train_cohort();
        std::vector<std::string> warnings;
        auto states = fit_states(train, s.manifest.config.k, s.manifest.seeds.clustering, f_.max_iters, &warnings);
        for (const auto& w : warnings) err_ << "warning: " << w << "\n";
        auto actions = fit_actions(train);
        auto medians = state_medians(train, states);
        auto trajs = discretize_cohort(*s.cohort, states, actions, s.manifest.config.censor_mode);
        s.clear_from_discretize();
        s.states = std::move(states);
        s.actions = std::move(actions);
        s.state_medians = std::move(medians);
        s.trajectories = std::move(trajs);
        save(f_.bundle, s);
        const auto& g = *s.actions;
        err_ << "fluid edges " << fixed(g.fluid_edges[0], 2) << " / " << fixed(g.fluid_edges[1], 2) << " / "
             << fixed(g.fluid_edges[2], 2) << "; vasopressor edges " << fixed(g.vaso_edges[0]) << " / "
             << fixed(g.vaso_edges[1]) << " / " << fixed(g.vaso_edges[2]) << "\n";
        emit({{"command", "discretize"},
              {"k", s.states->k()},
              {"trajectories", s.trajectories->size()},
              {"censor_mode", std::string(to_string(s.manifest.config.censor_mode))},
              {"warnings", warnings.size()},
              {"seed", s.manifest.seeds.clustering}});
    }

    void estimate() {
        Study s = open();
        require(s.trajectories.has_value() && s.states.has_value(), "estimate", "discretize");
        auto trajs = std::move(*s.trajectories);
        apply_censor_mode(trajs, s.manifest.config.censor_mode);
        s.clear_from_estimate();
        s.trajectories = std::move(trajs);
        const auto train = s.train_trajectories();
        auto mdp = trajinspect::estimate(train, s.states->k(), kNumActions, s.manifest.config.min_count);
        s.model = std::move(mdp.model);
        s.behavior = std::move(mdp.behavior);
        save(f_.bundle, s);
        int with_valid = 0;
        for (StateId st = 0; st < s.model->n_states(); ++st) with_valid += !s.model->valid_actions(st).empty();
        err_ << s.model->total_transitions() << " transitions from " << train.size() << " training trajectories; "
             << with_valid << " of " << s.model->n_states() << " states have a valid action\n";
        emit({{"command", "estimate"},
              {"transitions", s.model->total_transitions()},
              {"absorbing_transitions", s.model->absorbing_transitions()},
              {"states_with_valid_action", with_valid},
              {"min_count", s.model->min_count()},
              {"censor_mode", std::string(to_string(s.manifest.config.censor_mode))}});
    }

    void solve() {
        Study s = open();
        require(s.model.has_value(), "solve", "estimate");
        const auto& c = s.manifest.config;
        auto tp = trajinspect::solve(*s.model, RewardModel{}, SolveOptions{c.gamma, c.tol, c.max_sweeps});
        s.clear_from_solve();
        s.policy = std::move(tp);
        save(f_.bundle, s);
        std::size_t fallback = 0;
        for (bool b : s.policy->fallback) fallback += b;
        err_ << "value iteration converged in " << s.policy->sweeps << " sweeps; " << fallback
             << " states fall back to no treatment\n";
        emit({{"command", "solve"},
              {"sweeps", s.policy->sweeps},
              {"gamma", s.policy->gamma},
              {"fallback_states", fallback},
              {"mean_value", s.policy->values.size() ? s.policy->values.mean() : 0.0}});
    }

    void rollout() {
        Study s = open();
        require(s.policy.has_value(), "rollout", "solve");
        if (f_.seed) s.manifest.seeds.rollout = *f_.seed;
        const auto test = s.test_trajectories();
        std::vector<RolloutStart> starts;
        for (const auto& t : test) starts.push_back({t.steps.front().state, s.manifest.config.n_rollouts});
        const Policy p = Policy::from_target(*s.policy, s.model->n_actions());
        s.rollouts = batch(*s.model, p, starts, s.manifest.config.max_steps, s.manifest.seeds.rollout);
        s.discharge_report.reset();
        save(f_.bundle, s);
        std::map<std::string, std::size_t> ends;
        for (const auto& r : *s.rollouts) ++ends[std::string(to_string(r.terminal))];
        for (const auto& [k, v] : ends) err_ << std::setw(10) << k << " " << v << "\n";
        emit({{"command", "rollout"}, {"rollouts", s.rollouts->size()}, {"terminals", ends}, {"seed", s.manifest.seeds.rollout}});
    }

    void inspect_treatment() {
        Study s = open();
        require(s.policy.has_value() && s.behavior.has_value(), "inspect-treatment", "solve");
        const auto train = s.train_trajectories();
        s.treatment_report = treatment_report(train, *s.behavior, *s.policy, s.manifest.config.freq_threshold);
        save(f_.bundle, s);
        const auto& r = *s.treatment_report;
        err_ << r.flagged.size() << " of " << r.n_eligible << " states flagged (RL action frequency <= "
             << r.freq_threshold << " and more aggressive than the common action)\n";
        err_ << std::setw(7) << "state" << std::setw(8) << "visits" << std::setw(14) << "rl_action" << std::setw(10)
             << "rl_freq" << std::setw(14) << "common" << std::setw(10) << "com_freq" << std::setw(6) << "aggr"
             << "  anchor\n";
        for (std::size_t i = 0; i < r.flagged.size() && i < f_.show; ++i) {
            const auto& t = r.flagged[i].surprise;
            const auto& a = r.flagged[i].anchor;
            err_ << std::setw(7) << t.state << std::setw(8) << t.visits << std::setw(14) << action_text(t.rl_action)
                 << std::setw(10) << fixed(t.rl_action_freq) << std::setw(14) << action_text(t.common_action)
                 << std::setw(10) << fixed(t.common_action_freq) << std::setw(6) << t.aggressiveness << "  "
                 << (a ? a->trajectory_id + "@" + std::to_string(a->step_index) : std::string("-")) << "\n";
        }
        emit({{"command", "inspect-treatment"},
              {"flagged", r.flagged.size()},
              {"eligible", r.n_eligible},
              {"freq_threshold", r.freq_threshold}});
    }

    void inspect_outcome() {
        Study s = open();
        require(s.policy.has_value(), "inspect-outcome", "solve");
        if (f_.seed) s.manifest.seeds.rollout = *f_.seed;
        const auto test = s.test_trajectories();
        s.outcome_report = surprising_outcomes(test, *s.model, *s.policy, s.manifest.config.n_rollouts,
                                               s.manifest.seeds.rollout, s.manifest.config.max_steps);
        save(f_.bundle, s);
        const auto& r = *s.outcome_report;
        err_ << r.ranked.size() << " initial states; mean gap " << fixed(r.overall_mean_gap, 2) << "; " << r.skipped
             << " trajectories skipped\n";
        err_ << std::setw(7) << "state" << std::setw(8) << "n" << std::setw(12) << "rollout" << std::setw(12)
             << "observed" << std::setw(10) << "gap\n";
        for (std::size_t i = 0; i < r.ranked.size() && i < f_.show; ++i) {
            const auto& o = r.ranked[i];
            err_ << std::setw(7) << o.initial_state << std::setw(8) << o.n_trajectories << std::setw(12)
                 << fixed(o.mean_rollout_reward, 2) << std::setw(12) << fixed(o.observed_mean_reward, 2)
                 << std::setw(10) << fixed(o.gap, 2) << "\n";
        }
        emit({{"command", "inspect-outcome"},
              {"states", r.ranked.size()},
              {"overall_mean_gap", r.overall_mean_gap},
              {"skipped", r.skipped},
              {"seed", s.manifest.seeds.rollout}});
    }

    void report() {
        Study s = open();
        const auto& c = s.manifest.config;
        json summary = {{"command", "report"}, {"report", f_.report}};
        std::string svg;
        if (f_.report == "length") {
            require(s.model.has_value() && s.behavior.has_value(), "report length", "estimate");
            if (f_.seed) s.manifest.seeds.rollout = *f_.seed;
            s.length_report = length_report(s.train_trajectories(), *s.model, *s.behavior, c.n_rollouts,
                                            s.manifest.seeds.rollout);
            const auto& r = *s.length_report;
            err_ << "length  train_share  rollout_share\n";
            for (std::size_t i = 0; i < r.train_histogram.size(); ++i)
                err_ << std::setw(6) << i + 1 << std::setw(13)
                     << fixed(static_cast<double>(r.train_histogram[i]) / static_cast<double>(r.n_train))
                     << std::setw(15)
                     << fixed(r.n_rollouts ? static_cast<double>(r.rollout_histogram[i]) / static_cast<double>(r.n_rollouts) : 0.0)
                     << "\n";
            err_ << "TV distance " << fixed(r.total_variation_distance) << "\n";
            summary["total_variation_distance"] = r.total_variation_distance;
            summary["n_rollouts"] = r.n_rollouts;
            svg = length_chart_svg(r);
        } else if (f_.report == "termination") {
            require(s.model.has_value(), "report termination", "estimate");
            if (f_.seed) s.manifest.seeds.bootstrap = *f_.seed;
            s.termination_report =
                termination_bias(*s.model, s.train_trajectories(), c.n_bootstrap, s.manifest.seeds.bootstrap);
            const auto& r = *s.termination_report;
            const auto iv = [](const std::optional<Interval>& x) {
                return x ? fixed(x->point) + " [" + fixed(x->lower) + ", " + fixed(x->upper) + "]" : std::string("n/a");
            };
            err_ << "step  at_risk  actual                      predicted\n";
            for (const auto& st : r.steps)
                err_ << std::setw(4) << st.step << std::setw(9) << st.at_risk << "  " << std::left << std::setw(28)
                     << iv(st.actual) << std::right << iv(st.predicted) << "\n";
            err_ << "steps 1-19 pooled: actual " << iv(r.prefinal_actual) << ", predicted " << iv(r.prefinal_predicted)
                 << "\n";
            const bool disjoint = r.prefinal_actual && r.prefinal_predicted &&
                                  (r.prefinal_predicted->lower > r.prefinal_actual->upper ||
                                   r.prefinal_actual->lower > r.prefinal_predicted->upper);
            summary["prefinal_actual"] = r.prefinal_actual ? json(r.prefinal_actual->point) : json(nullptr);
            summary["prefinal_predicted"] = r.prefinal_predicted ? json(r.prefinal_predicted->point) : json(nullptr);
            summary["intervals_disjoint"] = disjoint;
            svg = termination_chart_svg(r);
        } else if (f_.report == "rare_action") {
            require(s.policy.has_value(), "report rare_action", "solve");
            s.rare_action_report = rare_action_report(*s.model, *s.behavior, *s.policy, c.top_n);
            const auto& r = *s.rare_action_report;
            err_ << r.n_states << " states: RL action freq " << fixed(r.avg_rl_action_freq) << " ("
                 << fixed(r.avg_rl_action_count, 1) << " obs), common action freq " << fixed(r.avg_common_action_freq)
                 << " (" << fixed(r.avg_common_action_count, 1) << " obs), transition mass "
                 << fixed(r.transition_mass_fraction) << "\n"
                 << r.common_zero_vaso_count << " with no common vasopressor; of those " << r.rl_vaso_count
                 << " get one from the RL policy, " << r.rl_large_vaso_count << " large\n";
            summary["n_states"] = r.n_states;
            summary["avg_rl_action_freq"] = r.avg_rl_action_freq;
            summary["avg_common_action_freq"] = r.avg_common_action_freq;
            summary["transition_mass_fraction"] = r.transition_mass_fraction;
            svg = rare_action_chart_svg(r);
        } else if (f_.report == "discharge") {
            require(s.rollouts.has_value(), "report discharge", "rollout");
            s.discharge_report = discharge_treatment_report(s.train_trajectories(), *s.rollouts);
            const auto& r = *s.discharge_report;
            const auto row = [&](const char* name, const DischargePopulation& p) {
                err_ << std::left << std::setw(28) << name << std::right << std::setw(8) << p.n << std::setw(10)
                     << opt_fixed(p.frac_nonzero_vaso_at_end) << std::setw(10) << opt_fixed(p.frac_large_vaso_at_end)
                     << "\n";
            };
            err_ << std::left << std::setw(28) << "survivors" << std::right << std::setw(8) << "n" << std::setw(10)
                 << "any_vaso" << std::setw(10) << "large\n";
            row("train, discharged", r.train_uncensored_survivors);
            row("train, censored", r.train_censored_survivors);
            row("target-policy roll-outs", r.rollout_survivors);
            summary["rollout_survivors"] = r.rollout_survivors.n;
            summary["rollout_frac_nonzero_vaso"] = r.rollout_survivors.frac_nonzero_vaso_at_end
                                                       ? json(*r.rollout_survivors.frac_nonzero_vaso_at_end)
                                                       : json(nullptr);
            svg = discharge_chart_svg(r);
        } else {
            throw ValidationError("unknown report '" + f_.report +
                                  "' (expected length, termination, rare_action or discharge)");
        }
        save(f_.bundle, s);
        if (!f_.svg.empty()) {
            std::ofstream os(f_.svg, std::ios::binary | std::ios::trunc);
            if (!os) throw ValidationError("cannot write " + f_.svg);
            os << svg;
            summary["svg"] = f_.svg;
        }
        emit(summary);
    }

    void serve() {
        auto service = std::make_shared<StudyService>(f_.bundle);
        HttpServer server(service);
        const int port = server.bind(f_.host, f_.port);
        emit({{"command", "serve"}, {"host", f_.host}, {"port", port}, {"study_id", service->study().manifest.study_id}});
        err_ << "serving " << f_.bundle << " on http://" << f_.host << ":" << port << "/api/study\n";
        err_.flush();
        server.listen();
    }

private:
    Study open() {
        Study s = load(f_.bundle);
        apply_config(f_, s.manifest.config);
        return s;
    }

    fs::path fresh_bundle(std::string_view command) {
        const fs::path dir = f_.bundle;
        if (fs::exists(dir / bundle_paths::manifest) && !f_.force)
            throw ValidationError(std::string(command) + ": " + dir.string() +
                                  " already holds a study; pass --force to replace it");
        if (fs::exists(dir / bundle_paths::manifest)) fs::remove(dir / bundle_paths::manifest);
        return dir;
    }

    void emit(const json& summary) {
        out_ << summary.dump() << std::endl;
    }

    Flags& f_;
    std::ostream& out_;
    std::ostream& err_;
};

void add_seed(CLI::App* cmd, Flags& f) { cmd->add_option("--seed", f.seed, "Random seed for this stage"); }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Flags f;
    CLI::App app{"Trajectory inspection for tabular model-based RL studies", "trajinspect"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    const auto bundle = [&](CLI::App* cmd) {
        cmd->add_option("bundle", f.bundle, "Study bundle directory")->required();
    };
    std::function<void(Runner&)> action;
    const auto command = [&](const char* name, const char* help, void (Runner::*fn)()) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->callback([&action, fn] { action = [fn](Runner& r) { (r.*fn)(); }; });
        return cmd;
    };

    auto* ingest = command("ingest", "Load a CSV or JSONL cohort into a new bundle", &Runner::ingest);
    bundle(ingest);
    ingest->add_option("--input", f.input, "Cohort file")->required()->check(CLI::ExistingFile);
    ingest->add_option("--format", f.format, "csv or jsonl (default: by extension)");
    ingest->add_flag("--force", f.force, "Replace an existing study");

    auto* synth = command("synth", "Generate a synthetic cohort from known dynamics", &Runner::synth);
    bundle(synth);
    add_seed(synth, f);
    synth->add_option("--n", f.n_trajectories, "Number of trajectories")->capture_default_str();
    synth->add_option("--states", f.n_states, "Latent states of the random ground truth")->capture_default_str();
    synth->add_option("--actions", f.n_actions, "Actions of the random ground truth")->capture_default_str();
    synth->add_option("--features", f.n_features, "Feature dimension")->capture_default_str();
    synth->add_option("--absorb-rate", f.absorb_rate, "Per-step absorption rate")->capture_default_str();
    synth->add_option("--ground-truth", f.ground_truth, "Ground-truth JSON instead of a random one");
    synth->add_flag("--force", f.force, "Replace an existing study");

    auto* split = command("split", "Partition the cohort into train and test", &Runner::split);
    bundle(split);
    add_seed(split, f);
    split->add_option("--train-fraction", f.train_fraction, "Share of trajectories in train (default 0.8)");

    auto* disc = command("discretize", "Fit states and action bins, discretize every trajectory", &Runner::discretize);
    bundle(disc);
    add_seed(disc, f);
    disc->add_option("--k", f.k, "Number of k-means states (default 750)");
    disc->add_option("--censor-mode", f.censor_mode, "terminal_reward or censored");
    disc->add_option("--max-iters", f.max_iters, "Lloyd iteration cap")->capture_default_str();

    auto* est = command("estimate", "Estimate transition counts and the behavior policy", &Runner::estimate);
    bundle(est);
    est->add_option("--min-count", f.min_count, "Minimum (s, a) count for a valid action (default 5)");
    est->add_option("--censor-mode", f.censor_mode, "terminal_reward or censored");

    auto* sol = command("solve", "Value iteration for the target policy", &Runner::solve);
    bundle(sol);
    sol->add_option("--gamma", f.gamma, "Discount (default 0.99)");
    sol->add_option("--tol", f.tol, "Convergence tolerance (default 1e-6)");
    sol->add_option("--max-sweeps", f.max_sweeps, "Sweep cap (default 10000)");

    auto* roll = command("rollout", "Target-policy roll-outs from every test initial state", &Runner::rollout);
    bundle(roll);
    add_seed(roll, f);
    roll->add_option("--n-rollouts", f.n_rollouts, "Roll-outs per start (default 5)");

    auto* it = command("inspect-treatment", "Rank surprisingly aggressive treatments", &Runner::inspect_treatment);
    bundle(it);
    it->add_option("--freq-threshold", f.freq_threshold, "Maximum RL action frequency (default 0.01)");
    it->add_option("--show", f.show, "Rows printed to stderr")->capture_default_str();

    auto* io = command("inspect-outcome", "Rank surprisingly positive outcomes", &Runner::inspect_outcome);
    bundle(io);
    add_seed(io, f);
    io->add_option("--n-rollouts", f.n_rollouts, "Roll-outs per test trajectory (default 5)");
    io->add_option("--show", f.show, "Rows printed to stderr")->capture_default_str();

    auto* rep = command("report", "Compute a diagnostic report", &Runner::report);
    rep->add_option("name", f.report, "length, termination, rare_action or discharge")
        ->required()
        ->check(CLI::IsMember({"length", "termination", "rare_action", "discharge"}));
    bundle(rep);
    add_seed(rep, f);
    rep->add_option("--svg", f.svg, "Also write a chart to this path");
    rep->add_option("--n-rollouts", f.n_rollouts, "Roll-outs per start for `length` (default 5)");
    rep->add_option("--bootstrap", f.n_bootstrap, "Bootstrap resamples for `termination` (default 1000)");
    rep->add_option("--top-n", f.top_n, "States summarized by `rare_action` (default 100)");

    auto* srv = command("serve", "Serve the bundle over HTTP", &Runner::serve);
    bundle(srv);
    srv->add_option("--host", f.host, "Bind address")->capture_default_str();
    srv->add_option("--port", f.port, "Port (0 picks a free one)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        Runner runner(f, out, err);
        action(runner);
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInvalid;
}

}  // namespace trajinspect
