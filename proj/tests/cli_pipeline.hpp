#ifndef TRAJINSPECT_TESTS_CLI_PIPELINE_HPP
#define TRAJINSPECT_TESTS_CLI_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "trajinspect/bundle.hpp"
#include "trajinspect/cli.hpp"

namespace fixtures {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

inline CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "trajinspect");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = trajinspect::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Every stage of the command-line pipeline on a small synthetic cohort.
/// Returns the first failing invocation, or a zero-code result.
inline CliResult run_cli_pipeline(const std::filesystem::path& bundle, const std::string& seed) {
    const std::string b = bundle.string();
    const std::vector<std::vector<std::string>> steps = {
        {"synth", b, "--n", "300", "--states", "6", "--seed", seed},
        {"split", b, "--seed", seed},
        {"discretize", b, "--k", "6", "--seed", seed},
        {"estimate", b},
        {"solve", b},
        {"rollout", b, "--seed", seed},
        {"inspect-treatment", b, "--freq-threshold", "0.5"},
        {"inspect-outcome", b, "--seed", seed},
        {"report", "length", b, "--seed", seed},
        {"report", "termination", b, "--bootstrap", "100", "--seed", seed},
        {"report", "rare_action", b, "--top-n", "4"},
        {"report", "discharge", b},
    };
    for (const auto& s : steps) {
        auto r = cli(s);
        if (r.code != 0) {
            r.err = s[0] + ": " + r.err;
            return r;
        }
    }
    return {0, "", ""};
}

/// Every file of a bundle keyed by relative path, with the manifest's
/// created_at removed.
inline std::map<std::string, std::string> bundle_bytes_without_timestamp(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir).generic_string();
        auto bytes = read_file(e.path());
        if (rel == trajinspect::bundle_paths::manifest) {
            auto j = nlohmann::json::parse(bytes);
            j.erase("created_at");
            bytes = j.dump();
        }
        out[rel] = std::move(bytes);
    }
    return out;
}

}  // namespace fixtures

#endif  // TRAJINSPECT_TESTS_CLI_PIPELINE_HPP
