#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ridgescan/common.hpp"
#include "ridgescan/sample.hpp"

namespace ridgescan {

//! Value, gradient, Hessian and third-derivative tensor of a density at one
//! query point. Tensors above `order` are left empty. The Hessian is stored
//! exactly symmetric and the third tensor exactly symmetric under all index
//! permutations (single triangle computed, then mirrored).
struct DensityJet {
    Eigen::VectorXd at;
    int order = 0;
    double value = 0.0;
    Eigen::VectorXd grad;              // d            (order >= 1)
    Eigen::MatrixXd hess;              // d x d        (order >= 2)
    std::vector<Eigen::MatrixXd> third; // d slices, third[k](i,j) = T(i,j,k)  (order == 3)

    int dim() const { return static_cast<int>(at.size()); }

    /// Directional derivative of the Hessian along v: sum_k T(.,.,k) v(k).
    Eigen::MatrixXd hessian_derivative(const Eigen::VectorXd& v) const {
        const int d = dim();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
        for (int k = 0; k < d; ++k) out += v(k) * third[static_cast<std::size_t>(k)];
        return out;
    }
};

//! Gaussian-kernel KDE over a fixed sample:
//!   p(x) = (n h^d)^-1 sum_i K((x - X_i)/h),  K(u) = (2 pi)^{-d/2} exp(-|u|^2/2).
//! All derivatives are exact closed-form sums, never numerical differences.
//! Immutable after construction; safe to share across threads.
class KdeModel {
public:
    KdeModel(Sample sample, double bandwidth, double cutoff_radius = 0.0)
        : sample_(std::move(sample)), h_(bandwidth), cutoff_(cutoff_radius) {
        if (!(h_ > 0.0) || !std::isfinite(h_))
            throw input_error("bandwidth must be positive and finite");
        if (cutoff_ < 0.0) throw input_error("cutoff radius must be >= 0");
    }

    const Sample& sample() const { return sample_; }
    double bandwidth() const { return h_; }
    /// Kernel tail cutoff in data units; 0 means exact sums (the default).
    double cutoff_radius() const { return cutoff_; }

    DensityJet jet(const Eigen::VectorXd& x, int order) const;

    double value(const Eigen::VectorXd& x) const { return jet(x, 0).value; }

private:
    Sample sample_;
    double h_;
    double cutoff_;
};

inline DensityJet KdeModel::jet(const Eigen::VectorXd& x, int order) const {
    const int d = static_cast<int>(sample_.dim());
    if (x.size() != d) throw input_error("query dimension mismatch");
    if (!x.allFinite()) throw input_error("non-finite query point");
    if (order < 0 || order > 3) throw input_error("jet order must be in 0..3");

    const Eigen::MatrixXd& pts = sample_.points();
    const Eigen::Index n = pts.rows();
    const double inv_h = 1.0 / h_;
    const double cutoff_u2 =
        cutoff_ > 0.0 ? (cutoff_ * inv_h) * (cutoff_ * inv_h) : std::numeric_limits<double>::infinity();

    // Accumulated kernel moments: S0 = sum w, S1 = sum w u, S2 = sum w u u^T
    // (upper triangle), S3 = sum w u_a u_b u_c over a <= b <= c.
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d, d);
    const int n_tri = d * (d + 1) * (d + 2) / 6;
    Eigen::VectorXd s3 = Eigen::VectorXd::Zero(order >= 3 ? n_tri : 0);
    Eigen::VectorXd u(d);

    for (Eigen::Index i = 0; i < n; ++i) {
        double q = 0.0;
        for (int a = 0; a < d; ++a) {
            u(a) = (x(a) - pts(i, a)) * inv_h;
            q += u(a) * u(a);
        }
        if (q > cutoff_u2) continue;
        const double w = std::exp(-0.5 * q);
        s0 += w;
        if (order >= 1) s1 += w * u;
        if (order >= 2) {
            for (int a = 0; a < d; ++a)
                for (int b = a; b < d; ++b) s2(a, b) += w * u(a) * u(b);
        }
        if (order >= 3) {
            int t = 0;
            for (int a = 0; a < d; ++a)
                for (int b = a; b < d; ++b) {
                    const double uab = w * u(a) * u(b);
                    for (int c = b; c < d; ++c) s3(t++) += uab * u(c);
                }
        }
    }

    const double norm = std::pow(2.0 * M_PI, -0.5 * d);
    const double nn = static_cast<double>(n);
    const double hd = std::pow(h_, d);

    DensityJet out;
    out.at = x;
    out.order = order;
    out.value = s0 * norm / (nn * hd);
    if (order >= 1) out.grad = -s1 * (norm / (nn * hd * h_));
    if (order >= 2) {
        const double c2 = norm / (nn * hd * h_ * h_);
        out.hess.resize(d, d);
        for (int a = 0; a < d; ++a) {
            out.hess(a, a) = (s2(a, a) - s0) * c2;
            for (int b = a + 1; b < d; ++b) {
                const double v = s2(a, b) * c2;
                out.hess(a, b) = v;
                out.hess(b, a) = v;
            }
        }
    }
    if (order >= 3) {
        const double c3 = norm / (nn * hd * h_ * h_ * h_);
        out.third.assign(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
        int t = 0;
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b)
                for (int c = b; c < d; ++c) {
                    // T_abc = scale * (-S3_abc + d_bc S1_a + d_ac S1_b + d_ab S1_c)
                    double v = -s3(t++);
                    if (b == c) v += s1(a);
                    if (a == c) v += s1(b);
                    if (a == b) v += s1(c);
                    v *= c3;
                    // mirror into every permutation slot
                    out.third[c](a, b) = v; out.third[c](b, a) = v;
                    out.third[b](a, c) = v; out.third[b](c, a) = v;
                    out.third[a](b, c) = v; out.third[a](c, b) = v;
                }
    }
    return out;
}

/// Multivariate Silverman rule of thumb:
///   h = sigma_hat * (4 / ((d+2) n))^(1/(d+4)),
/// with sigma_hat the average of the per-coordinate sample standard
/// deviations. The exact variant is a convention; every entry point exposes h
/// as an override.
inline double silverman_bandwidth(const Sample& sample) {
    const Eigen::MatrixXd& p = sample.points();
    const double n = static_cast<double>(p.rows());
    const int d = static_cast<int>(p.cols());
    double sigma = 0.0;
    for (int j = 0; j < d; ++j) {
        const double mean = p.col(j).mean();
        sigma += std::sqrt((p.col(j).array() - mean).square().sum() / (n - 1.0));
    }
    sigma /= d;
    if (!(sigma > 0.0)) throw input_error("zero scale: all sample points identical");
    return sigma * std::pow(4.0 / ((d + 2) * n), 1.0 / (d + 4));
}

/// Grid approximation of the derivative-sup norm ||p_a - p_b||*_{inf,k}:
/// max over grid points and all derivative entries of orders 0..k of the
/// absolute difference. A diagnostic lower bound of the true sup-norm.
inline double sup_norm_diff(const KdeModel& model_a, const KdeModel& model_b,
                            std::span<const Eigen::VectorXd> grid, int order_k) {
    if (grid.empty()) throw input_error("sup_norm_diff requires a non-empty grid");
    if (order_k < 0 || order_k > 3) throw input_error("order must be in 0..3");
    if (model_a.sample().dim() != model_b.sample().dim())
        throw input_error("models have different ambient dimension");
    double worst = 0.0;
    for (const auto& x : grid) {
        DensityJet ja = model_a.jet(x, order_k);
        DensityJet jb = model_b.jet(x, order_k);
        worst = std::max(worst, std::abs(ja.value - jb.value));
        if (order_k >= 1)
            worst = std::max(worst, (ja.grad - jb.grad).cwiseAbs().maxCoeff());
        if (order_k >= 2)
            worst = std::max(worst, (ja.hess - jb.hess).cwiseAbs().maxCoeff());
        if (order_k >= 3)
            for (std::size_t k = 0; k < ja.third.size(); ++k)
                worst = std::max(worst, (ja.third[k] - jb.third[k]).cwiseAbs().maxCoeff());
    }
    return worst;
}

} // namespace ridgescan
