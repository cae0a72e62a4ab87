#ifndef TRAJINSPECT_PLANNER_HPP
#define TRAJINSPECT_PLANNER_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "trajinspect/mdp.hpp"

namespace trajinspect {

/// Deterministic policy optimized against an estimated model.
struct TargetPolicy {
    std::vector<ActionId> action;
    /// True where no action met min_count and NO_TREATMENT was substituted.
    std::vector<bool> fallback;
    Eigen::VectorXd values;
    double gamma = kDefaultGamma;
    double tol = kDefaultTol;
    int sweeps = 0;

    int n_states() const { return static_cast<int>(action.size()); }
    bool operator==(const TargetPolicy&) const = default;
};

/// Per-state action distribution. Deterministic policies are point masses;
/// an all-zero row leaves the policy undefined at that state.
struct Policy {
    Eigen::MatrixXd probs;
    std::string tag;

    int n_states() const { return static_cast<int>(probs.rows()); }
    bool defined(StateId s) const { return probs.row(s).sum() > 0.0; }

    static Policy from_behavior(const BehaviorPolicy& bp, std::string tag = "behavior");
    static Policy from_target(const TargetPolicy& tp, int n_actions, std::string tag = "target");
};

struct SolveOptions {
    double gamma = kDefaultGamma;
    double tol = kDefaultTol;
    int max_sweeps = kDefaultMaxSweeps;
};

/// Value iteration over valid actions, with V(SURV) = V(DEATH) = 0 and the
/// terminal rewards paid on entry. Stops once the largest update is below
/// tol; ties in the argmax go to the lowest action id. States without a
/// valid action fall back to NO_TREATMENT. Throws Error when max_sweeps runs
/// out first. `residuals`, if given, receives the max update of every sweep.
TargetPolicy solve(const TransitionModel& m, const RewardModel& r, const SolveOptions& opts = {},
                   std::vector<double>* residuals = nullptr);

/// Fixed point of V = P_pi (R + gamma V), iterated to `tol`. Throws
/// ValidationError if the policy puts mass on an unobserved (s, a) pair.
Eigen::VectorXd evaluate_policy(const TransitionModel& m, const RewardModel& r, const Policy& p, double gamma,
                                double tol = 1e-10, int max_sweeps = 1000000);

}  // namespace trajinspect

#endif  // TRAJINSPECT_PLANNER_HPP
