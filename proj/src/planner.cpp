#include "trajinspect/planner.hpp"

#include <cmath>
#include <sstream>

namespace trajinspect {

Policy Policy::from_behavior(const BehaviorPolicy& bp, std::string tag) { return {bp.probs, std::move(tag)}; }

Policy Policy::from_target(const TargetPolicy& tp, int n_actions, std::string tag) {
    Policy p{Eigen::MatrixXd::Zero(tp.n_states(), n_actions), std::move(tag)};
    for (int s = 0; s < tp.n_states(); ++s) p.probs(s, tp.action[static_cast<std::size_t>(s)]) = 1.0;
    return p;
}

namespace {

/// Backup of one (s, a) row against the current values.
double q_value(const TransitionRow& row, const TransitionModel& m, const RewardModel& r, const Eigen::VectorXd& v,
               double gamma) {
    double q = 0.0;
    const auto total = static_cast<double>(row.total);
    for (const auto& [next, c] : row.counts) {
        const double p = static_cast<double>(c) / total;
        const double cont = m.is_absorbing(next) ? 0.0 : gamma * v(next);
        q += p * (r.on_enter(next, m.n_states()) + cont);
    }
    return q;
}

struct Backup {
    double value = 0.0;
    ActionId action = kNoTreatment;
    bool fallback = false;
};

Backup backup(StateId s, const TransitionModel& m, const RewardModel& r, const Eigen::VectorXd& v, double gamma) {
    const auto& valid = m.valid_actions(s);
    Backup b;
    if (valid.empty()) {
        b.fallback = true;
        if (const auto* row = m.row(s, kNoTreatment)) b.value = q_value(*row, m, r, v, gamma);
        return b;
    }
    bool first = true;
    for (ActionId a : valid) {
        const double q = q_value(*m.row(s, a), m, r, v, gamma);
        if (first || q > b.value) {
            b.value = q;
            b.action = a;
            first = false;
        }
    }
    return b;
}

void check_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in (0, 1]");
}

}  // namespace

TargetPolicy solve(const TransitionModel& m, const RewardModel& r, const SolveOptions& opts,
                   std::vector<double>* residuals) {
    check_gamma(opts.gamma);
    if (!(opts.tol > 0.0)) throw ValidationError("tol must be positive");
    if (opts.max_sweeps < 1) throw ValidationError("max_sweeps must be positive");
    const int k = m.n_states();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd next(k);
    double residual = 0.0;
    int sweeps = 0;
    bool converged = false;
    while (sweeps < opts.max_sweeps) {
        for (int s = 0; s < k; ++s) next(s) = backup(s, m, r, v, opts.gamma).value;
        residual = k == 0 ? 0.0 : (next - v).cwiseAbs().maxCoeff();
        v.swap(next);
        ++sweeps;
        if (residuals) residuals->push_back(residual);
        if (residual < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "value iteration did not converge after " << sweeps << " sweeps (residual " << residual
            << ", tol " << opts.tol << ", gamma " << opts.gamma << ")";
        throw Error(msg.str());
    }

    TargetPolicy tp;
    tp.gamma = opts.gamma;
    tp.tol = opts.tol;
    tp.sweeps = sweeps;
    tp.values = v;
    tp.action.resize(static_cast<std::size_t>(k));
    tp.fallback.resize(static_cast<std::size_t>(k));
    for (int s = 0; s < k; ++s) {
        const auto b = backup(s, m, r, v, opts.gamma);
        tp.action[static_cast<std::size_t>(s)] = b.action;
        tp.fallback[static_cast<std::size_t>(s)] = b.fallback;
    }
    return tp;
}

Eigen::VectorXd evaluate_policy(const TransitionModel& m, const RewardModel& r, const Policy& p, double gamma,
                                double tol, int max_sweeps) {
    check_gamma(gamma);
    const int k = m.n_states();
    if (p.n_states() != k || p.probs.cols() != m.n_actions())
        throw ValidationError("policy shape does not match the model");
    for (int s = 0; s < k; ++s)
        for (int a = 0; a < m.n_actions(); ++a)
            if (p.probs(s, a) > 0.0 && !m.row(s, a))
                throw ValidationError("policy takes action " + std::to_string(a) + " at state " + std::to_string(s) +
                                      " where no transitions were observed");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd next(k);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (int s = 0; s < k; ++s) {
            double acc = 0.0;
            for (const auto& [a, row] : m.rows(s)) {
                const double w = p.probs(s, a);
                if (w > 0.0) acc += w * q_value(row, m, r, v, gamma);
            }
            next(s) = acc;
        }
        const double residual = k == 0 ? 0.0 : (next - v).cwiseAbs().maxCoeff();
        v.swap(next);
        if (residual < tol) return v;
    }
    throw Error("policy evaluation did not converge after " + std::to_string(max_sweeps) + " sweeps");
}

}  // namespace trajinspect
