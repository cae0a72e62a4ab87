#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "trajinspect/bundle.hpp"
#include "trajinspect/serialize.hpp"

using namespace trajinspect;
using fixtures::TempDir;

namespace fs = std::filesystem;

namespace {

template <typename T>
T json_round_trip(const T& x) {
    return json::parse(json(x).dump()).get<T>();
}

std::map<std::string, std::string> tree_bytes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = fixtures::read_file(e.path());
    return out;
}

}  // namespace

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Serialize, EveryArtifactRoundTripsThroughJson) {
    const Study s = fixtures::build_study();
    EXPECT_EQ(json_round_trip(*s.states), *s.states);
    EXPECT_EQ(json_round_trip(*s.actions), *s.actions);
    EXPECT_EQ(json(json_round_trip(*s.ground_truth)), json(*s.ground_truth));
    EXPECT_EQ(json_round_trip(*s.trajectories), *s.trajectories);
    EXPECT_EQ(json_round_trip(*s.behavior), *s.behavior);
    EXPECT_EQ(json_round_trip(*s.policy), *s.policy);
    EXPECT_EQ(json_round_trip(*s.rollouts), *s.rollouts);
    EXPECT_EQ(json_round_trip(*s.treatment_report), *s.treatment_report);
    EXPECT_EQ(json_round_trip(*s.outcome_report), *s.outcome_report);
    EXPECT_EQ(json_round_trip(*s.length_report), *s.length_report);
    EXPECT_EQ(json_round_trip(*s.termination_report), *s.termination_report);
    EXPECT_EQ(json_round_trip(*s.rare_action_report), *s.rare_action_report);
    EXPECT_EQ(json_round_trip(*s.discharge_report), *s.discharge_report);
    EXPECT_EQ(json_round_trip(s.cases), s.cases);
    EXPECT_EQ(json_round_trip(s.manifest), s.manifest);
}

TEST(Serialize, NanMatrixEntriesSurvive) {
    Eigen::MatrixXd m(2, 2);
    m << 1.5, std::nan(""), -0.25, 1e-300;
    const auto back = matrix_from_json(json::parse(matrix_to_json(m).dump()));
    EXPECT_TRUE(std::isnan(back(0, 1)));
    EXPECT_EQ(back(0, 0), 1.5);
    EXPECT_EQ(back(1, 1), 1e-300);
}

TEST(Serialize, ModelTripletsRoundTripAndRejectDamage) {
    const Study s = fixtures::build_study();
    const auto header = model_header(*s.model);
    const auto bytes = encode_model_triplets(*s.model);
    EXPECT_EQ(decode_model(header, bytes), *s.model);
    EXPECT_THROW(decode_model(header, bytes.substr(0, bytes.size() - 1)), Error);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_model(header, bad_magic), Error);
}

TEST(Bundle, SaveLoadRestoresEveryArtifact) {
    TempDir dir;
    Study s = fixtures::build_study();
    const auto manifest = save(dir.path(), s);
    EXPECT_EQ(manifest.study_id.size(), 16u);
    EXPECT_FALSE(manifest.created_at.empty());
    const Study back = load(dir.path());
    EXPECT_EQ(back, s);
    EXPECT_TRUE(back.ground_truth && back.states && back.actions && back.state_medians && back.trajectories &&
                back.model && back.behavior && back.policy && back.rollouts && back.treatment_report &&
                back.outcome_report && back.length_report && back.termination_report &&
                back.rare_action_report && back.discharge_report);
    EXPECT_EQ(back.cases.size(), 1u);
    EXPECT_EQ(back.cohort->trajectories[0].record_text, s.cohort->trajectories[0].record_text);
}

TEST(Bundle, PartialStudiesRoundTrip) {
    TempDir dir;
    Study full = fixtures::build_study();
    Study s;
    s.manifest = full.manifest;
    s.cohort = full.cohort;
    save(dir.path(), s);
    EXPECT_EQ(load(dir.path()), s);
    s.split = full.split;
    s.states = full.states;
    s.actions = full.actions;
    s.state_medians = full.state_medians;
    s.trajectories = full.trajectories;
    save(dir.path(), s);
    EXPECT_EQ(load(dir.path()), s);
}

TEST(Bundle, StaleArtifactsAreRemoved) {
    TempDir dir;
    Study s = fixtures::build_study();
    save(dir.path(), s);
    ASSERT_TRUE(fs::exists(dir / bundle_paths::policy));
    s.clear_from_estimate();
    save(dir.path(), s);
    EXPECT_FALSE(fs::exists(dir / bundle_paths::policy));
    EXPECT_FALSE(fs::exists(dir / bundle_paths::model_triplets));
    EXPECT_FALSE(fs::exists(dir / bundle_paths::length_report));
    EXPECT_TRUE(fs::exists(dir / bundle_paths::trajectories));
    EXPECT_EQ(load(dir.path()), s);
}

TEST(Bundle, EverySingleByteFlipIsDetected) {
    TempDir dir;
    Study s = fixtures::build_study(120, 3, 4);
    save(dir.path(), s);
    const auto manifest = load_manifest(dir.path());
    ASSERT_GE(manifest.files.size(), 20u);
    Rng rng(5);
    for (const auto& [rel, hash] : manifest.files) {
        const fs::path p = dir / rel;
        const std::string original = fixtures::read_file(p);
        ASSERT_FALSE(original.empty()) << rel;
        for (int trial = 0; trial < 3; ++trial) {
            std::string damaged = original;
            const auto pos = trial == 0 ? 0 : rng.below(damaged.size());
            damaged[pos] = static_cast<char>(damaged[pos] ^ (1 << rng.below(8)));
            fixtures::write_file(p, damaged);
            try {
                load(dir.path());
                ADD_FAILURE() << "flip in " << rel << " at " << pos << " not detected";
            } catch (const CorruptionError& e) {
                EXPECT_NE(std::string(e.what()).find(rel), std::string::npos) << e.what();
            }
        }
        fixtures::write_file(p, original);
    }
    EXPECT_NO_THROW(load(dir.path()));
}

TEST(Bundle, TruncationAndMissingFilesAreCorruption) {
    TempDir dir;
    Study s = fixtures::build_study(120, 3, 4);
    save(dir.path(), s);
    const auto original = fixtures::read_file(dir / bundle_paths::behavior);
    fixtures::write_file(dir / bundle_paths::behavior, original.substr(0, original.size() / 2));
    EXPECT_THROW(load(dir.path()), CorruptionError);
    fs::remove(dir / bundle_paths::behavior);
    EXPECT_THROW(load(dir.path()), CorruptionError);
}

TEST(Bundle, ManifestProblemsAreValidationErrors) {
    TempDir dir;
    EXPECT_THROW(load(dir.path()), ValidationError);
    Study s = fixtures::build_study(120, 3, 4);
    save(dir.path(), s);
    auto j = json::parse(fixtures::read_file(dir / bundle_paths::manifest));
    j["format_version"] = 99;
    fixtures::write_file(dir / bundle_paths::manifest, j.dump());
    EXPECT_THROW(load(dir.path()), ValidationError);
}

TEST(Bundle, TwoSavesDifferOnlyInTimestamp) {
    TempDir a, b;
    Study s1 = fixtures::build_study(150, 4, 4);
    Study s2 = fixtures::build_study(150, 4, 4);
    save(a.path(), s1);
    s2.manifest.created_at = "2001-01-01T00:00:00Z";
    save(b.path(), s2);
    auto ta = tree_bytes(a.path());
    auto tb = tree_bytes(b.path());
    ASSERT_EQ(ta.size(), tb.size());
    for (const auto& [rel, bytes] : ta) {
        if (rel == bundle_paths::manifest) continue;
        EXPECT_EQ(bytes, tb[rel]) << rel;
    }
    auto ma = json::parse(ta[bundle_paths::manifest]);
    auto mb = json::parse(tb[bundle_paths::manifest]);
    EXPECT_NE(ma["created_at"], mb["created_at"]);
    ma.erase("created_at");
    mb.erase("created_at");
    EXPECT_EQ(ma, mb);
}

TEST(Bundle, ManifestRecordsConfigurationDefaults) {
    TempDir dir;
    Study s;
    s.cohort = fixtures::build_study(50, 2, 3).cohort;
    save(dir.path(), s);
    const auto j = json::parse(fixtures::read_file(dir / bundle_paths::manifest));
    const auto& c = j.at("config");
    EXPECT_EQ(c.at("k"), 750);
    EXPECT_EQ(c.at("min_count"), 5);
    EXPECT_EQ(c.at("max_steps"), 20);
    EXPECT_EQ(c.at("n_rollouts"), 5);
    EXPECT_EQ(c.at("freq_threshold"), 0.01);
    EXPECT_EQ(c.at("survival_reward"), 100.0);
    EXPECT_EQ(c.at("mortality_reward"), -100.0);
    EXPECT_EQ(c.at("censor_mode"), "terminal_reward");
}

TEST(CaseWriter, AnnotationSurvivesReload) {
    TempDir dir;
    Study s = fixtures::build_study(150, 4, 4);
    save(dir.path(), s);
    CaseWriter writer(dir.path());
    auto c = s.cases[0];
    c.annotations.push_back({"2026-02-03T04:05:06.000Z", "second", "a note", Verdict::suspicious});
    writer.write(c);
    const Study back = load(dir.path());
    ASSERT_EQ(back.cases.size(), 1u);
    EXPECT_EQ(back.cases[0], c);
    EXPECT_EQ(back.cases[0].annotations.size(), 2u);
}

TEST(CaseIds, OnlySafeNames) {
    EXPECT_TRUE(valid_case_id("case-0001"));
    EXPECT_TRUE(valid_case_id("a.b_c"));
    EXPECT_FALSE(valid_case_id(""));
    EXPECT_FALSE(valid_case_id(".hidden"));
    EXPECT_FALSE(valid_case_id("../x"));
    EXPECT_FALSE(valid_case_id("a/b"));
}
