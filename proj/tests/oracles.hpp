#ifndef TRAJINSPECT_TESTS_ORACLES_HPP
#define TRAJINSPECT_TESTS_ORACLES_HPP

// Independent reference computations. None of these call the code under
// test for the quantity they check.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "trajinspect/discretize.hpp"
#include "trajinspect/mdp.hpp"

namespace oracle {

/// Small MDP given by integer transition weights. Column S is survival,
/// column S+1 mortality. Zero rows are unavailable actions.
struct DenseMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<std::vector<std::int64_t>>> weights;  // [s][a][next]

    double prob(int s, int a, int next) const {
        std::int64_t total = 0;
        for (auto w : weights[s][a]) total += w;
        return total == 0 ? 0.0 : static_cast<double>(weights[s][a][next]) / static_cast<double>(total);
    }
    bool available(int s, int a) const {
        std::int64_t total = 0;
        for (auto w : weights[s][a]) total += w;
        return total > 0;
    }

    trajinspect::TransitionModel to_model(int min_count = 1) const {
        trajinspect::TransitionModel m(n_states, n_actions, min_count);
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a)
                for (int n = 0; n < n_states + 2; ++n)
                    if (weights[s][a][n] > 0) m.add(s, a, n, weights[s][a][n]);
        return m;
    }
};

/// Solves (I - gamma P_pi) V = P_pi,absorb r exactly with a dense LU.
inline Eigen::VectorXd evaluate_dense(const DenseMdp& mdp, const std::vector<int>& policy, double gamma,
                                      double surv_reward = 100.0, double death_reward = -100.0) {
    const int n = mdp.n_states;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < n; ++s) {
        const int act = policy[s];
        for (int t = 0; t < n; ++t) a(s, t) -= gamma * mdp.prob(s, act, t);
        b(s) = mdp.prob(s, act, n) * surv_reward + mdp.prob(s, act, n + 1) * death_reward;
    }
    return a.fullPivLu().solve(b);
}

/// Same as evaluate_dense for a stochastic policy given as an S x A matrix.
inline Eigen::VectorXd evaluate_dense(const DenseMdp& mdp, const Eigen::MatrixXd& policy, double gamma) {
    const int n = mdp.n_states;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < n; ++s)
        for (int act = 0; act < mdp.n_actions; ++act) {
            const double pi = policy(s, act);
            if (pi == 0.0) continue;
            for (int t = 0; t < n; ++t) a(s, t) -= gamma * pi * mdp.prob(s, act, t);
            b(s) += pi * (mdp.prob(s, act, n) * 100.0 - mdp.prob(s, act, n + 1) * 100.0);
        }
    return a.fullPivLu().solve(b);
}

struct Enumerated {
    std::vector<int> policy;
    Eigen::VectorXd values;
    /// Whether the chosen policy is at least as good as every other one in
    /// every state.
    bool dominates = false;
    /// Second-best total value, to confirm the optimum is unique.
    double runner_up_total = -1e300;
};

/// Enumerates every deterministic policy over available actions and returns
/// the one with the largest summed value.
inline Enumerated enumerate_optimal(const DenseMdp& mdp, double gamma) {
    std::vector<std::vector<int>> choices(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a)
            if (mdp.available(s, a)) choices[s].push_back(a);
        if (choices[s].empty()) choices[s].push_back(0);
    }
    std::vector<std::pair<std::vector<int>, Eigen::VectorXd>> all;
    std::vector<std::size_t> idx(mdp.n_states, 0);
    for (;;) {
        std::vector<int> pol(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) pol[s] = choices[s][idx[s]];
        all.emplace_back(pol, evaluate_dense(mdp, pol, gamma));
        int s = 0;
        while (s < mdp.n_states && ++idx[s] == choices[s].size()) idx[s++] = 0;
        if (s == mdp.n_states) break;
    }
    Enumerated best;
    double best_total = -1e300;
    for (const auto& [pol, v] : all) {
        if (v.sum() > best_total) {
            best.runner_up_total = best_total;
            best_total = v.sum();
            best.policy = pol;
            best.values = v;
        } else if (v.sum() > best.runner_up_total) {
            best.runner_up_total = v.sum();
        }
    }
    best.dominates = true;
    for (const auto& [pol, v] : all)
        if (((v - best.values).array() > 1e-12).any()) best.dominates = false;
    return best;
}

/// P(L = l) for l = 1..horizon when each step ends with probability p and
/// the walk is cut at `horizon`.
inline std::vector<double> truncated_geometric_pmf(double p, int horizon) {
    std::vector<double> pmf(horizon);
    for (int l = 1; l < horizon; ++l) pmf[l - 1] = std::pow(1.0 - p, l - 1) * p;
    pmf[horizon - 1] = std::pow(1.0 - p, horizon - 1);
    return pmf;
}

inline std::vector<double> truncated_geometric_cdf(double p, int horizon) {
    const auto pmf = truncated_geometric_pmf(p, horizon);
    std::vector<double> cdf(horizon);
    double acc = 0;
    for (int i = 0; i < horizon; ++i) cdf[i] = (acc += pmf[i]);
    return cdf;
}

/// Pearson chi-square goodness of fit; returns the upper-tail p-value.
inline double chi_square_p(const std::vector<std::int64_t>& observed, const std::vector<double>& pmf) {
    double n = 0;
    for (auto o : observed) n += static_cast<double>(o);
    double stat = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = n * pmf[i];
        const double d = static_cast<double>(observed[i]) - e;
        stat += d * d / e;
    }
    boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    const auto c2 = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sa = 0, sb = 0;
    for (const auto& [k, v] : joint) index += c2(v);
    for (const auto& [k, v] : ra) sa += c2(v);
    for (const auto& [k, v] : rb) sb += c2(v);
    const double expected = sa * sb / c2(static_cast<double>(a.size()));
    const double max_index = (sa + sb) / 2;
    return (index - expected) / (max_index - expected);
}

/// Nearest row by exhaustive scan in the standardized space; ties to the
/// lowest index.
inline int brute_nearest(const trajinspect::StateClustering& c, const Eigen::VectorXd& raw) {
    int best = -1;
    double best_d = 0;
    for (int r = 0; r < c.k(); ++r) {
        double d = 0;
        for (int j = 0; j < c.dim(); ++j) {
            const double z = (raw(j) - c.feature_means(j)) / c.feature_scales(j);
            d += (z - c.centroids(r, j)) * (z - c.centroids(r, j));
        }
        if (best < 0 || d < best_d) {
            best = r;
            best_d = d;
        }
    }
    return best;
}

/// Linear-interpolation percentile computed from scratch.
inline double hand_percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1) * q;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

}  // namespace oracle

#endif  // TRAJINSPECT_TESTS_ORACLES_HPP
