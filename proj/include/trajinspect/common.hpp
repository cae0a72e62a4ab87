#ifndef TRAJINSPECT_COMMON_HPP
#define TRAJINSPECT_COMMON_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trajinspect {

/// Observation window and roll-out cap, in 4-hour steps.
inline constexpr int kMaxSteps = 20;
inline constexpr int kDoseBins = 5;
inline constexpr int kNumActions = kDoseBins * kDoseBins;
/// Action id 0 encodes zero fluids and zero vasopressors.
inline constexpr int kNoTreatment = 0;
inline constexpr double kSurvivalReward = 100.0;
inline constexpr double kMortalityReward = -100.0;

inline constexpr int kDefaultClusters = 750;
inline constexpr int kDefaultMinCount = 5;
inline constexpr int kDefaultRollouts = 5;
inline constexpr double kDefaultFreqThreshold = 0.01;
inline constexpr double kDefaultGamma = 0.99;
inline constexpr double kDefaultTol = 1e-6;
inline constexpr int kDefaultMaxSweeps = 10000;
inline constexpr int kDefaultBootstrap = 1000;

using StateId = int;
using ActionId = int;

/// The two absorbing outcomes: 90-day survival and 90-day mortality.
enum class Absorbing { surv, death };

inline double terminal_reward(Absorbing a) {
    return a == Absorbing::surv ? kSurvivalReward : kMortalityReward;
}

/// How censored trajectories enter the transition model.
enum class CensorMode {
    terminal_reward,  ///< append a pseudo-transition to the 90-day label
    censored          ///< no terminal transition
};

std::string_view to_string(Absorbing a);
std::string_view to_string(CensorMode m);
Absorbing parse_absorbing(std::string_view s);
CensorMode parse_censor_mode(std::string_view s);

/// Base error. Invalid user input, malformed files and broken preconditions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that fails validation (bad flags, malformed rows, missing stages).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A bundle file whose bytes do not match the manifest.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

inline int fluid_bin(ActionId a) { return a / kDoseBins; }
inline int vaso_bin(ActionId a) { return a % kDoseBins; }
inline ActionId make_action(int fluid, int vaso) { return fluid * kDoseBins + vaso; }
/// Sum of both dose bins, used to compare treatment intensity.
inline int intensity(ActionId a) { return fluid_bin(a) + vaso_bin(a); }

}  // namespace trajinspect

#endif  // TRAJINSPECT_COMMON_HPP
