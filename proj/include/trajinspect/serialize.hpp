#ifndef TRAJINSPECT_SERIALIZE_HPP
#define TRAJINSPECT_SERIALIZE_HPP

#include <iosfwd>
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

// JSON conversions for every study artifact. Reals are written in shortest
// round-trip form; NaN is written as null and read back as NaN.
namespace trajinspect {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

void to_json(json& j, const StateClustering& c);
void from_json(const json& j, StateClustering& c);
void to_json(json& j, const ActionGrid& g);
void from_json(const json& j, ActionGrid& g);
void to_json(json& j, const GroundTruthMDP& gt);
void from_json(const json& j, GroundTruthMDP& gt);
void to_json(json& j, const DiscreteTrajectory& t);
void from_json(const json& j, DiscreteTrajectory& t);
void to_json(json& j, const BehaviorPolicy& bp);
void from_json(const json& j, BehaviorPolicy& bp);
void to_json(json& j, const TargetPolicy& tp);
void from_json(const json& j, TargetPolicy& tp);
void to_json(json& j, const SimTrajectory& r);
void from_json(const json& j, SimTrajectory& r);

void to_json(json& j, const TreatmentSurprise& t);
void from_json(const json& j, TreatmentSurprise& t);
void to_json(json& j, const CaseAnchor& a);
void from_json(const json& j, CaseAnchor& a);
void to_json(json& j, const FlaggedState& f);
void from_json(const json& j, FlaggedState& f);
void to_json(json& j, const TreatmentReport& r);
void from_json(const json& j, TreatmentReport& r);
void to_json(json& j, const OutcomeSurprise& o);
void from_json(const json& j, OutcomeSurprise& o);
void to_json(json& j, const OutcomeRanking& r);
void from_json(const json& j, OutcomeRanking& r);
void to_json(json& j, const Annotation& a);
void from_json(const json& j, Annotation& a);
void to_json(json& j, const InspectionCase& c);
void from_json(const json& j, InspectionCase& c);

void to_json(json& j, const LengthReport& r);
void from_json(const json& j, LengthReport& r);
void to_json(json& j, const Interval& iv);
void from_json(const json& j, Interval& iv);
void to_json(json& j, const TerminationStep& s);
void from_json(const json& j, TerminationStep& s);
void to_json(json& j, const TerminationBiasReport& r);
void from_json(const json& j, TerminationBiasReport& r);
void to_json(json& j, const RareActionReport& r);
void from_json(const json& j, RareActionReport& r);
void to_json(json& j, const DischargePopulation& p);
void from_json(const json& j, DischargePopulation& p);
void to_json(json& j, const DischargeTreatmentReport& r);
void from_json(const json& j, DischargeTreatmentReport& r);

/// Model header: dimensions, min_count, absorbing codes and triplet count.
json model_header(const TransitionModel& m);

/// Little-endian record stream: 8-byte magic, u32 version, u32 reserved,
/// u64 triplet count, then (i32 s, i32 a, i32 next, u64 count) per
/// observed transition in (s, a, next) order.
std::string encode_model_triplets(const TransitionModel& m);
/// Rebuilds the model from its header and triplet section. Throws
/// ValidationError on malformed input.
TransitionModel decode_model(const json& header, std::string_view bytes);

/// One compact JSON document per line.
template <typename T>
std::string to_jsonl(const std::vector<T>& items) {
    std::string out;
    for (const auto& item : items) {
        out += json(item).dump();
        out += '\n';
    }
    return out;
}

template <typename T>
std::vector<T> from_jsonl(std::string_view text) {
    std::vector<T> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        if (!line.empty()) out.push_back(json::parse(line).get<T>());
        pos = end + 1;
    }
    return out;
}

}  // namespace trajinspect

#endif  // TRAJINSPECT_SERIALIZE_HPP
