#ifndef TRAJINSPECT_KMEANS_HPP
#define TRAJINSPECT_KMEANS_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "trajinspect/common.hpp"
#include "trajinspect/rng.hpp"

namespace trajinspect {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Index of the nearest row of `centers` to the row vector `x` in squared
/// Euclidean distance. Ties go to the lowest index.
template <typename CentersT, typename PointT>
Eigen::Index nearest_center(const Eigen::MatrixBase<CentersT>& centers, const Eigen::MatrixBase<PointT>& x,
                            typename CentersT::Scalar* distance = nullptr) {
    using Scalar = typename CentersT::Scalar;
    Eigen::Index best = 0;
    Scalar best_d = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index r = 0; r < centers.rows(); ++r) {
        const Scalar d = (centers.row(r) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = r;
        }
    }
    if (distance) *distance = best_d;
    return best;
}

template <typename Scalar>
struct KMeansResult {
    RowMatrix<Scalar> centroids;
    std::vector<Eigen::Index> labels;
    Scalar objective = 0;
    int iterations = 0;
    bool converged = false;
};

/// Sum of squared distances from each row to its nearest centroid.
template <typename DataT, typename CentersT>
typename DataT::Scalar kmeans_objective(const Eigen::MatrixBase<DataT>& data, const Eigen::MatrixBase<CentersT>& centers) {
    typename DataT::Scalar total = 0, d = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        nearest_center(centers, data.row(i), &d);
        total += d;
    }
    return total;
}

/// Lloyd's algorithm with D^2-weighted seeding. Deterministic for a seed:
/// every reduction runs in row order.
///
/// A cluster that empties is reseeded with the row farthest from its
/// centroid. Throws ValidationError when the data has fewer than k distinct
/// rows.
template <typename Derived>
KMeansResult<typename Derived::Scalar> kmeans(const Eigen::MatrixBase<Derived>& input, Eigen::Index k,
                                              std::uint64_t seed, int max_iters) {
    using Scalar = typename Derived::Scalar;
    const RowMatrix<Scalar> data = input;
    const Eigen::Index n = data.rows();
    const Eigen::Index dim = data.cols();
    if (k < 1) throw ValidationError("k must be positive");
    if (n < k)
        throw ValidationError("k-means needs at least k=" + std::to_string(k) + " rows, got " + std::to_string(n));
    if (max_iters < 1) throw ValidationError("max_iters must be positive");

    KMeansResult<Scalar> out;
    out.centroids.resize(k, dim);
    Rng rng(seed);

    std::vector<Scalar> d2(static_cast<std::size_t>(n), std::numeric_limits<Scalar>::infinity());
    Eigen::Index chosen = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    for (Eigen::Index c = 0; c < k; ++c) {
        out.centroids.row(c) = data.row(chosen);
        Scalar total = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Scalar d = (data.row(i) - out.centroids.row(c)).squaredNorm();
            if (d < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = d;
            total += d2[static_cast<std::size_t>(i)];
        }
        if (c + 1 == k) break;
        if (!(total > 0))
            throw ValidationError("k-means needs at least k=" + std::to_string(k) + " distinct rows");
        chosen = static_cast<Eigen::Index>(rng.categorical(d2));
    }

    out.labels.assign(static_cast<std::size_t>(n), -1);
    std::vector<Scalar> dist(static_cast<std::size_t>(n));
    for (int it = 0; it < max_iters; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto label = nearest_center(out.centroids, data.row(i), &dist[static_cast<std::size_t>(i)]);
            if (label != out.labels[static_cast<std::size_t>(i)]) {
                out.labels[static_cast<std::size_t>(i)] = label;
                changed = true;
            }
        }
        out.iterations = it + 1;
        if (!changed) {
            out.converged = true;
            break;
        }

        RowMatrix<Scalar> sums = RowMatrix<Scalar>::Zero(k, dim);
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto label = out.labels[static_cast<std::size_t>(i)];
            sums.row(label) += data.row(i);
            ++counts[static_cast<std::size_t>(label)];
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                out.centroids.row(c) = sums.row(c) / static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            Eigen::Index far = 0;
            for (Eigen::Index i = 1; i < n; ++i)
                if (dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
            out.centroids.row(c) = data.row(far);
            dist[static_cast<std::size_t>(far)] = 0;
        }
    }
    out.objective = kmeans_objective(data, out.centroids);
    return out;
}

}  // namespace trajinspect

#endif  // TRAJINSPECT_KMEANS_HPP
