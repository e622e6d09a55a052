#pragma once

// Shared fixtures and independent oracles for the unit suites. The finite
// difference oracles only ever consume the next-lower-order output, so they
// stay independent of the closed-form derivative path they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ridgescan/kde.hpp"
#include "ridgescan/rng.hpp"
#include "ridgescan/sample.hpp"

namespace testutil {

inline ridgescan::Sample circle_sample(int n, std::uint64_t seed, double r0 = 3.0,
                                       double sigma = 0.3) {
    ridgescan::Rng rng(seed);
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < n; ++i) {
        const double th = rng.uniform(0.0, 2.0 * M_PI);
        pts(i, 0) = r0 * std::cos(th) + sigma * rng.normal();
        pts(i, 1) = r0 * std::sin(th) + sigma * rng.normal();
    }
    return ridgescan::Sample(std::move(pts));
}

inline ridgescan::Sample gaussian_sample(int n, std::uint64_t seed,
                                         const Eigen::VectorXd& sigmas) {
    ridgescan::Rng rng(seed);
    Eigen::MatrixXd pts(n, sigmas.size());
    for (int i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < sigmas.size(); ++j)
            pts(i, j) = sigmas(j) * rng.normal();
    return ridgescan::Sample(std::move(pts));
}

/// Haar-ish random rotation via QR of a Gaussian matrix, det forced to +1.
inline Eigen::MatrixXd random_rotation(int d, std::uint64_t seed) {
    ridgescan::Rng rng(seed);
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    if (q.determinant() < 0) q.col(0) = -q.col(0);
    return q;
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

// ---- central finite differences of the next-lower-order jet output ----

inline Eigen::VectorXd fd_gradient(const ridgescan::KdeModel& m, const Eigen::VectorXd& x,
                                   double step) {
    const int d = static_cast<int>(x.size());
    Eigen::VectorXd g(d);
    for (int a = 0; a < d; ++a) {
        Eigen::VectorXd hi = x, lo = x;
        hi(a) += step;
        lo(a) -= step;
        g(a) = (m.jet(hi, 0).value - m.jet(lo, 0).value) / (2.0 * step);
    }
    return g;
}

inline Eigen::MatrixXd fd_hessian(const ridgescan::KdeModel& m, const Eigen::VectorXd& x,
                                  double step) {
    const int d = static_cast<int>(x.size());
    Eigen::MatrixXd h(d, d);
    for (int a = 0; a < d; ++a) {
        Eigen::VectorXd hi = x, lo = x;
        hi(a) += step;
        lo(a) -= step;
        h.col(a) = (m.jet(hi, 1).grad - m.jet(lo, 1).grad) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose()).eval();
}

inline std::vector<Eigen::MatrixXd> fd_third(const ridgescan::KdeModel& m,
                                             const Eigen::VectorXd& x, double step) {
    const int d = static_cast<int>(x.size());
    std::vector<Eigen::MatrixXd> t(d);
    for (int c = 0; c < d; ++c) {
        Eigen::VectorXd hi = x, lo = x;
        hi(c) += step;
        lo(c) -= step;
        t[c] = (m.jet(hi, 2).hess - m.jet(lo, 2).hess) / (2.0 * step);
    }
    return t;
}

/// max-entry relative error against an analytic tensor, scaled by the larger
/// of the analytic magnitude and a caller-provided floor.
inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want, double floor) {
    const double denom = std::max(want.cwiseAbs().maxCoeff(), floor);
    return (got - want).cwiseAbs().maxCoeff() / denom;
}

} // namespace testutil
