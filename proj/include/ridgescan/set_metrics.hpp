#pragma once

// Projection distances from points to discrete point sets, and the
// (quasi-)Hausdorff distances between sets. Continuous sets are represented
// by discrete samples throughout; the discretization adds at most one
// inter-point spacing to any reported distance. Brute force O(|A||B|): sizes
// in this artifact stay small enough that a spatial index would not pay.

#include <cmath>
#include <cstddef>
#include <limits>

#include <Eigen/Core>

#include "ridgescan/common.hpp"

namespace ridgescan {

//! Result of projecting a point onto a discrete set.
struct Projection {
    Eigen::VectorXd vector;  // pi_A(x) - x
    double distance = 0.0;   // ||vector||
    std::size_t index = 0;   // argmin row in A, ties broken by lowest index
};

/// pi_A(x) = argmin_{y in A} ||x - y||; rows of `set` are the points of A.
inline Projection project(const Eigen::VectorXd& x, const Eigen::MatrixXd& set) {
    if (set.rows() == 0) throw input_error("projection target set is empty");
    if (set.cols() != x.size()) throw input_error("point/set dimension mismatch");
    const Eigen::Index n = set.rows();
    const Eigen::Index d = set.cols();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double q = 0.0;
        for (Eigen::Index a = 0; a < d; ++a) {
            const double t = x(a) - set(i, a);
            q += t * t;
        }
        if (q < best) {
            best = q;
            arg = i;
        }
    }
    Projection p;
    p.vector = set.row(arg).transpose() - x;
    p.distance = std::sqrt(best);
    p.index = static_cast<std::size_t>(arg);
    return p;
}

inline double point_set_distance(const Eigen::VectorXd& x, const Eigen::MatrixXd& set) {
    return project(x, set).distance;
}

/// dist_Pi(A, B) = sup_{x in B} d(x, A). Asymmetric: B is guaranteed to be
/// contained in A dilated by the returned radius.
inline double quasi_hausdorff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() == 0 || B.rows() == 0) throw input_error("quasi_hausdorff requires non-empty sets");
    if (A.cols() != B.cols()) throw input_error("set dimension mismatch");
    const Eigen::Index d = A.cols();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < A.rows(); ++j) {
            double q = 0.0;
            for (Eigen::Index a = 0; a < d; ++a) {
                const double t = B(i, a) - A(j, a);
                q += t * t;
            }
            if (q < best) best = q;
        }
        if (best > worst) worst = best;
    }
    return std::sqrt(worst);
}

/// Haus(A, B) = max{dist_Pi(A, B), dist_Pi(B, A)}.
inline double hausdorff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    return std::max(quasi_hausdorff(A, B), quasi_hausdorff(B, A));
}

} // namespace ridgescan
