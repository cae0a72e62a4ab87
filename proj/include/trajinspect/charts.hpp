#ifndef TRAJINSPECT_CHARTS_HPP
#define TRAJINSPECT_CHARTS_HPP

#include <string>

#include "trajinspect/diagnostics.hpp"

namespace trajinspect {

/// Side-by-side length histograms: training data left, roll-outs right.
std::string length_chart_svg(const LengthReport& r);

/// Per-step actual vs predicted termination with interval whiskers, plus
/// the pooled pre-final pair.
std::string termination_chart_svg(const TerminationBiasReport& r);

/// Vasopressor-at-discharge fractions for the three survivor populations.
std::string discharge_chart_svg(const DischargeTreatmentReport& r);

/// Averages of the rare-action report as two bar pairs.
std::string rare_action_chart_svg(const RareActionReport& r);

}  // namespace trajinspect

#endif  // TRAJINSPECT_CHARTS_HPP
