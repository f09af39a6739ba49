#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace mfe {

/// Per-column scale max(1, max_t |target(t, f)|).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> figure_scales(const Eigen::MatrixBase<Derived>& target) {
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(target.cols());
    for (Eigen::Index f = 0; f < target.cols(); ++f)
        s(f) = target.rows() > 0 ? std::max<Scalar>(Scalar(1), target.col(f).cwiseAbs().maxCoeff()) : Scalar(1);
    return s;
}

/// Root-mean-square of weighted, per-figure normalized differences over all
/// (row, column) cells. Rows are terms, columns are figures. Scales come from
/// the target only.
template <typename DerivedSim, typename DerivedTarget, typename DerivedWeights>
typename DerivedSim::Scalar normalized_rms(const Eigen::MatrixBase<DerivedSim>& simulated,
                                           const Eigen::MatrixBase<DerivedTarget>& target,
                                           const Eigen::MatrixBase<DerivedWeights>& weights) {
    using Scalar = typename DerivedSim::Scalar;
    if (simulated.rows() != target.rows() || simulated.cols() != target.cols())
        throw std::invalid_argument("normalized_rms: shape mismatch");
    if (weights.size() != target.cols()) throw std::invalid_argument("normalized_rms: weight count mismatch");
    if (target.size() == 0) return Scalar(0);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> factor = weights.array() / figure_scales(target).array();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> scaled = (simulated - target) * factor.asDiagonal();
    return std::sqrt(scaled.squaredNorm() / static_cast<Scalar>(target.size()));
}

/// Per-coordinate scale max(1, max - min) of a trajectory (rows are terms).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> range_scales(const Eigen::MatrixBase<Derived>& trajectory) {
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(trajectory.cols());
    for (Eigen::Index d = 0; d < trajectory.cols(); ++d) {
        const Scalar range =
            trajectory.rows() > 0 ? trajectory.col(d).maxCoeff() - trajectory.col(d).minCoeff() : Scalar(0);
        s(d) = std::max<Scalar>(Scalar(1), range);
    }
    return s;
}

/// Scaled Euclidean distance between corresponding phase vectors, one per row.
template <typename DerivedA, typename DerivedB, typename DerivedScale>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1> scaled_distances(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    const Eigen::MatrixBase<DerivedScale>& scales) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("divergence: shape mismatch");
    if (scales.size() != a.cols()) throw std::invalid_argument("divergence: scale count mismatch");
    using Scalar = typename DerivedA::Scalar;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv = scales.array().inverse();
    return ((a - b) * inv.asDiagonal()).rowwise().norm();
}

/// Max over terms of the scaled distance.
template <typename DerivedA, typename DerivedB, typename DerivedScale>
typename DerivedA::Scalar max_divergence(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                         const Eigen::MatrixBase<DerivedScale>& scales) {
    const Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1> d = scaled_distances(a, b, scales);
    return d.size() ? d.maxCoeff() : typename DerivedA::Scalar(0);
}

template <typename DerivedA, typename DerivedB, typename DerivedScale>
typename DerivedA::Scalar mean_divergence(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                          const Eigen::MatrixBase<DerivedScale>& scales) {
    const Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1> d = scaled_distances(a, b, scales);
    return d.size() ? d.mean() : typename DerivedA::Scalar(0);
}

template <typename DerivedA, typename DerivedB, typename DerivedScale>
typename DerivedA::Scalar final_divergence(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                           const Eigen::MatrixBase<DerivedScale>& scales) {
    const Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1> d = scaled_distances(a, b, scales);
    return d.size() ? d(d.size() - 1) : typename DerivedA::Scalar(0);
}

}  // namespace mfe
