#pragma once

// Pointwise differential geometry of 1-ridges: Hessian eigen-frames, the
// projected gradient, the normal matrix N(x) built from M(x) = grad(V^T g),
// the ridge tangent e(x), the subspace Hessian H_N and W = N H_N^{-1} N^T,
// plus the eigengap / gradient-alignment condition diagnostics.

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "ridgescan/common.hpp"
#include "ridgescan/kde.hpp"

namespace ridgescan {

//! Descending-sorted symmetric eigendecomposition with a deterministic sign
//! convention: each eigenvector's largest-|entry| coordinate (ties: lowest
//! index) is made positive.
struct EigenFrame {
    Eigen::VectorXd at;
    Eigen::VectorXd eigenvalues;   // descending
    Eigen::MatrixXd eigenvectors;  // columns v1 ... vd

    /// V = [v2 ... vd], the trailing d-1 eigenvectors.
    Eigen::MatrixXd trailing() const {
        return eigenvectors.rightCols(eigenvectors.cols() - 1);
    }
};

namespace detail {

inline void normalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
    int arg = 0;
    double best = std::abs(v(0));
    for (int i = 1; i < v.size(); ++i) {
        const double a = std::abs(v(i));
        if (a > best) {
            best = a;
            arg = i;
        }
    }
    if (v(arg) < 0.0) v = -v;
}

/// Plain lower-triangular Cholesky with a pivot check: throws when a pivot is
/// below `rel_tol` times the largest diagonal of A.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& A, double rel_tol,
                                      const char* what) {
    const int m = static_cast<int>(A.rows());
    const double scale = std::max(A.diagonal().maxCoeff(), 0.0);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
        double pivot = A(j, j);
        for (int k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
        if (!(pivot > rel_tol * std::max(scale, 1e-300)))
            throw numeric_error(what);
        L(j, j) = std::sqrt(pivot);
        for (int i = j + 1; i < m; ++i) {
            double v = A(i, j);
            for (int k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
            L(i, j) = v / L(j, j);
        }
    }
    return L;
}

} // namespace detail

inline EigenFrame eigen_frame(const DensityJet& jet) {
    if (jet.order < 2) throw input_error("eigen_frame requires a jet of order >= 2");
    if (!jet.hess.allFinite()) throw input_error("non-finite Hessian entries");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jet.hess);
    if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");
    const int d = jet.dim();
    EigenFrame f;
    f.at = jet.at;
    f.eigenvalues.resize(d);
    f.eigenvectors.resize(d, d);
    for (int i = 0; i < d; ++i) {
        f.eigenvalues(i) = es.eigenvalues()(d - 1 - i);   // ascending -> descending
        f.eigenvectors.col(i) = es.eigenvectors().col(d - 1 - i);
        detail::normalize_sign(f.eigenvectors.col(i));
    }
    return f;
}

/// G(x) = V V^T g, the gradient component inside the span of the trailing
/// d-1 eigenvectors. Zero exactly on the ridge.
inline Eigen::VectorXd projected_gradient(const DensityJet& jet) {
    const EigenFrame f = eigen_frame(jet);
    const Eigen::MatrixXd V = f.trailing();
    return V * (V.transpose() * jet.grad);
}

/// Ridge membership at tolerance `tol`: ||V^T g|| <= tol * ||g|| (relative)
/// or <= tol * abs_floor (absolute escape hatch near critical points where
/// ||g|| itself vanishes), and lambda_2 < 0.
inline bool is_ridge_point(const DensityJet& jet, double tol, double abs_floor = 0.0) {
    if (!(tol > 0.0)) throw input_error("tolerance must be positive");
    const EigenFrame f = eigen_frame(jet);
    if (!(f.eigenvalues(1) < 0.0)) return false;
    const double pg = (f.trailing().transpose() * jet.grad).norm();
    return pg <= tol * jet.grad.norm() || pg <= tol * abs_floor;
}

//! The local normal coordinate of the ridge at one point: M(x) whose columns
//! span the normal space, its orthonormalization N(x), the tangent e(x), the
//! subspace Hessian H_N = N^T H N and W = N H_N^{-1} N^T.
struct NormalFrame {
    Eigen::VectorXd at;
    Eigen::MatrixXd M;                 // d x (d-1)
    Eigen::MatrixXd N;                 // d x (d-1), orthonormal columns
    Eigen::VectorXd tangent;           // e(x), unit
    Eigen::MatrixXd subspace_hessian;  // (d-1) x (d-1), symmetric
    Eigen::MatrixXd W;                 // d x d, symmetric
};

/// Builds the normal frame from an order-3 jet via
///   m_k = (lambda_k I + (v1^T g / (lambda_k - lambda_1)) D_{v1} H) v_k,
/// M = [m_2 ... m_d], L L^T = M^T M (lower Cholesky), N = M (L^T)^{-1},
/// e = unit null vector of M^T, H_N = N^T H N, W = N H_N^{-1} N^T.
///
/// Throws numeric_error on eigengap collapse (|lambda_k - lambda_1| below
/// 1e-10 ||H||, the m_k denominators), rank-deficient M, or singular H_N.
inline NormalFrame normal_frame(const DensityJet& jet) {
    if (jet.order < 3) throw input_error("normal_frame requires an order-3 jet");
    const int d = jet.dim();
    const EigenFrame f = eigen_frame(jet);
    const double hnorm = f.eigenvalues.cwiseAbs().maxCoeff();

    for (int k = 1; k < d; ++k)
        if (std::abs(f.eigenvalues(k) - f.eigenvalues(0)) < 1e-10 * std::max(hnorm, 1e-300))
            throw numeric_error("eigengap collapse: lambda_" + std::to_string(k + 1) +
                                " too close to lambda_1");

    const Eigen::VectorXd v1 = f.eigenvectors.col(0);
    const Eigen::MatrixXd dvH = jet.hessian_derivative(v1);
    const double v1g = v1.dot(jet.grad);

    NormalFrame out;
    out.at = jet.at;
    out.M.resize(d, d - 1);
    for (int k = 1; k < d; ++k) {
        const Eigen::VectorXd vk = f.eigenvectors.col(k);
        const double coef = v1g / (f.eigenvalues(k) - f.eigenvalues(0));
        out.M.col(k - 1) = f.eigenvalues(k) * vk + coef * (dvH * vk);
    }

    const Eigen::MatrixXd mtm = out.M.transpose() * out.M;
    const Eigen::MatrixXd L = detail::cholesky_lower(mtm, 1e-12, "rank deficient M");
    // N = M (L^T)^{-1}  <=>  L N^T = M^T
    out.N = L.triangularView<Eigen::Lower>()
                .solve(out.M.transpose())
                .transpose();

    // Tangent: the null direction of M^T, i.e. the left-singular vector of M
    // for its (implicit) zero singular value. Identical to the top eigenvector
    // of I - M (M^T M)^{-1} M^T but cheaper.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.M, Eigen::ComputeFullU);
    out.tangent = svd.matrixU().col(d - 1);
    detail::normalize_sign(out.tangent);

    Eigen::MatrixXd hn = out.N.transpose() * jet.hess * out.N;
    hn = 0.5 * (hn + hn.transpose()).eval();
    out.subspace_hessian = hn;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hn);
    if (!lu.isInvertible()) throw numeric_error("singular subspace Hessian");
    Eigen::MatrixXd w = out.N * lu.solve(out.N.transpose());
    out.W = 0.5 * (w + w.transpose()).eval();
    return out;
}

/// Plug-in estimate of Sigma(x) = Cov(h^{-d/2} W (grad K)((x - X_i)/h)),
/// the covariance driving the local-uncertainty trace formula
/// n h^{d+2} rho_n^2(x) = Trace(Sigma(x)) + o(1). The h^{-d} factor follows
/// the empirical-process normalization of the kernel class; the kernel
/// gradient convention matches KdeModel::jet.
inline Eigen::MatrixXd sigma_matrix(const KdeModel& model, const NormalFrame& frame) {
    const Eigen::MatrixXd& pts = model.sample().points();
    const Eigen::Index n = pts.rows();
    const int d = static_cast<int>(pts.cols());
    const double inv_h = 1.0 / model.bandwidth();
    const double norm = std::pow(2.0 * M_PI, -0.5 * d);

    Eigen::VectorXd u(d), y(d);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        double q = 0.0;
        for (int a = 0; a < d; ++a) {
            u(a) = (frame.at(a) - pts(i, a)) * inv_h;
            q += u(a) * u(a);
        }
        // (grad K)(u) = -(2 pi)^{-d/2} exp(-|u|^2/2) u
        const double w = -norm * std::exp(-0.5 * q);
        y.noalias() = frame.W * (w * u);
        mean += y;
        second.selfadjointView<Eigen::Lower>().rankUpdate(y, 1.0);
    }
    mean /= static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd(second.selfadjointView<Eigen::Lower>());
    cov -= static_cast<double>(n) * mean * mean.transpose();
    cov /= static_cast<double>(n - 1);
    cov *= std::pow(model.bandwidth(), -d);
    return 0.5 * (cov + cov.transpose()).eval();
}

//! Raw margins for the eigengap condition (P1) and the gradient-alignment
//! condition (P2). Diagnostics only: never throws, just reports.
struct ConditionReport {
    Eigen::VectorXd at;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double eigengap = 0.0;            // lambda1 - lambda2, the beta_0 surrogate
    double p1_margin = 0.0;           // -lambda2; positive where (P1)'s sign holds
    double grad_third_product = 0.0;  // ||g|| * max |third entry|, (P1)'s raw product
    double p2_lhs = 0.0;              // (e^T g / ||g||)^2, direction-normalized
    double p2_lhs_raw = 0.0;          // (e^T g)^2 as literally written
    double p2_rhs = 0.0;              // lambda1 / (lambda1 - lambda2)
    bool p2_ok = false;
};

/// (P2) is evaluated in the direction-normalized form; whenever lambda_1 < 0
/// the point is a local mode of the normal-space restriction regardless, so
/// p2_ok is set true. Both the raw and normalized left-hand sides are
/// reported because the literal inequality compares a squared gradient against
/// a ratio in [0, 1].
inline ConditionReport condition_report(const DensityJet& jet, const NormalFrame& frame) {
    const EigenFrame f = eigen_frame(jet);
    ConditionReport r;
    r.at = jet.at;
    r.lambda1 = f.eigenvalues(0);
    r.lambda2 = f.eigenvalues(1);
    r.eigengap = r.lambda1 - r.lambda2;
    r.p1_margin = -r.lambda2;
    double third_max = 0.0;
    for (const auto& slice : jet.third)
        third_max = std::max(third_max, slice.cwiseAbs().maxCoeff());
    r.grad_third_product = jet.grad.norm() * third_max;
    const double eg = frame.tangent.dot(jet.grad);
    r.p2_lhs_raw = eg * eg;
    const double gn = jet.grad.norm();
    r.p2_lhs = gn > 0.0 ? (eg / gn) * (eg / gn) : 0.0;
    r.p2_rhs = r.eigengap > 0.0 ? r.lambda1 / r.eigengap
                                : std::numeric_limits<double>::infinity();
    r.p2_ok = r.lambda1 < 0.0 || r.p2_lhs >= r.p2_rhs;
    return r;
}

} // namespace ridgescan
