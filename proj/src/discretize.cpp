#include "trajinspect/discretize.hpp"

#include <cmath>
#include <limits>

#include "trajinspect/kmeans.hpp"

namespace trajinspect {

Eigen::VectorXd StateClustering::standardize(const Eigen::VectorXd& features) const {
    return (features - feature_means).cwiseQuotient(feature_scales);
}

Eigen::VectorXd StateClustering::centroid_features(StateId state) const {
    return centroids.row(state).transpose().cwiseProduct(feature_scales) + feature_means;
}

Eigen::MatrixXd stack_features(const Cohort& cohort) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(cohort.step_count()), cohort.feature_dim);
    Eigen::Index r = 0;
    for (const auto& t : cohort.trajectories)
        for (const auto& s : t.steps) rows.row(r++) = s.features.transpose();
    return rows;
}

StateClustering fit_states(const Cohort& train, int k, std::uint64_t seed, int max_iters,
                           std::vector<std::string>* warnings) {
    train.validate();
    const Eigen::MatrixXd rows = stack_features(train);
    if (rows.rows() < k)
        throw ValidationError("fit_states: " + std::to_string(rows.rows()) + " step rows is fewer than k=" +
                              std::to_string(k));

    StateClustering c;
    c.feature_means = rows.colwise().mean().transpose();
    c.feature_scales.resize(rows.cols());
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        const double var = (rows.col(j).array() - c.feature_means(j)).square().mean();
        if (var > 0.0) {
            c.feature_scales(j) = std::sqrt(var);
        } else {
            c.feature_scales(j) = 1.0;
            if (warnings)
                warnings->push_back("feature " + train.feature_names.at(static_cast<std::size_t>(j)) +
                                    " has zero variance; scale set to 1");
        }
    }
    const Eigen::MatrixXd z = (rows.rowwise() - c.feature_means.transpose()).array().rowwise() /
                              c.feature_scales.transpose().array();
    const auto result = kmeans(z, k, seed, max_iters);
    c.centroids = result.centroids;
    return c;
}

StateId assign_state(const StateClustering& c, const Eigen::VectorXd& features) {
    if (features.size() != c.dim())
        throw ValidationError("assign_state: feature vector has dimension " + std::to_string(features.size()) +
                              ", expected " + std::to_string(c.dim()));
    if (!features.allFinite()) throw ValidationError("assign_state: non-finite feature");
    const Eigen::RowVectorXd z = c.standardize(features).transpose();
    return static_cast<StateId>(nearest_center(c.centroids, z));
}

Eigen::MatrixXd state_medians(const Cohort& train, const StateClustering& c) {
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(c.k()));
    const Eigen::MatrixXd rows = stack_features(train);
    for (Eigen::Index r = 0; r < rows.rows(); ++r)
        members[static_cast<std::size_t>(assign_state(c, rows.row(r).transpose()))].push_back(r);
    Eigen::MatrixXd med = Eigen::MatrixXd::Constant(c.k(), c.dim(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> col;
    for (int s = 0; s < c.k(); ++s) {
        const auto& m = members[static_cast<std::size_t>(s)];
        if (m.empty()) continue;
        for (int j = 0; j < c.dim(); ++j) {
            col.clear();
            for (auto r : m) col.push_back(rows(r, j));
            med(s, j) = percentile(col, 0.5);
        }
    }
    return med;
}

ActionGrid fit_actions(const Cohort& train) {
    std::vector<double> fluids, vasos;
    for (const auto& t : train.trajectories)
        for (const auto& s : t.steps) {
            if (s.fluid_dose > 0) fluids.push_back(s.fluid_dose);
            if (s.vaso_dose > 0) vasos.push_back(s.vaso_dose);
        }
    if (fluids.empty()) throw ValidationError("fit_actions: every training fluid dose is zero");
    if (vasos.empty()) throw ValidationError("fit_actions: every training vasopressor dose is zero");
    std::sort(fluids.begin(), fluids.end());
    std::sort(vasos.begin(), vasos.end());
    ActionGrid g;
    for (int i = 0; i < 3; ++i) {
        const double q = 0.25 * (i + 1);
        g.fluid_edges[static_cast<std::size_t>(i)] = percentile_sorted(fluids, q);
        g.vaso_edges[static_cast<std::size_t>(i)] = percentile_sorted(vasos, q);
    }
    g.fluid_large_threshold = g.fluid_edges[1];
    g.vaso_large_threshold = g.vaso_edges[1];
    return g;
}

int dose_bin(const std::array<double, 3>& edges, double dose) {
    if (!(dose >= 0.0) || !std::isfinite(dose)) throw ValidationError("dose must be finite and non-negative");
    if (dose == 0.0) return 0;
    int below = 0;
    for (double e : edges)
        if (e < dose) ++below;
    return std::min(1 + below, kDoseBins - 1);
}

ActionId encode_action(const ActionGrid& g, double fluid, double vaso) {
    return make_action(dose_bin(g.fluid_edges, fluid), dose_bin(g.vaso_edges, vaso));
}

std::vector<DiscreteTrajectory> discretize_cohort(const Cohort& cohort, const StateClustering& sc,
                                                  const ActionGrid& grid, CensorMode mode) {
    std::vector<DiscreteTrajectory> out;
    out.reserve(cohort.trajectories.size());
    for (const auto& t : cohort.trajectories) {
        DiscreteTrajectory d;
        d.id = t.id;
        d.censored = t.censored();
        d.terminal = t.label();
        if (t.steps.size() > static_cast<std::size_t>(kMaxSteps))
            throw ValidationError("trajectory '" + t.id + "' exceeds " + std::to_string(kMaxSteps) + " steps");
        if (t.steps.empty()) throw ValidationError("trajectory '" + t.id + "' has no steps");
        d.steps.reserve(t.steps.size());
        for (const auto& s : t.steps)
            d.steps.push_back({assign_state(sc, s.features), encode_action(grid, s.fluid_dose, s.vaso_dose)});
        out.push_back(std::move(d));
    }
    apply_censor_mode(out, mode);
    return out;
}

void apply_censor_mode(std::vector<DiscreteTrajectory>& trajs, CensorMode mode) {
    for (auto& d : trajs) {
        if (!d.censored) {
            if (!d.terminal) throw ValidationError("trajectory '" + d.id + "' ended without an outcome");
            d.absorbs = true;
        } else if (mode == CensorMode::terminal_reward) {
            if (!d.terminal)
                throw ValidationError("censored trajectory '" + d.id +
                                      "' has no 90-day label; terminal_reward mode needs one");
            d.absorbs = true;
        } else {
            d.absorbs = false;
        }
    }
}

}  // namespace trajinspect
