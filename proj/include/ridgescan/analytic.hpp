#pragma once

// Closed-form smoothed densities for the synthetic benchmark families.
// Convolving the data-generating density with the Gaussian kernel K_h only
// inflates the Gaussian noise variance (sigma^2 -> sigma^2 + h^2), so both
// families below admit exact order-3 jets of the smoothed density p_h.
// These are the independent oracles for the KDE/SCMS pipeline.

#include <cmath>

#include <Eigen/Core>

#include "ridgescan/common.hpp"
#include "ridgescan/kde.hpp"

namespace ridgescan::analytic {

namespace detail {

// Modified Bessel I_0, I_1 evaluated by our own series: the ascending power
// series has all-positive terms (no cancellation) and is accurate to ~1e-14
// for x < 40; above that the asymptotic bracket sum with 10 terms takes over.
// libstdc++'s cyl_bessel_i loses ~1e-7 relative accuracy near x = 30, which
// is not good enough for third-derivative oracles.

inline double bessel_power_series(int nu, double x) {
    const double q = 0.25 * x * x;
    double term = nu == 0 ? 1.0 : 0.5 * x;
    double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * (k + nu));
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

// bracket sum of I_nu(x) ~ e^x / sqrt(2 pi x) * S_nu(x)
inline double bessel_asymptotic_series(int nu, double x) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 10; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (8.0 * x * k);
        sum += term;
    }
    return sum;
}

constexpr double kBesselCrossover = 40.0;

} // namespace detail

inline double log_bessel_i0(double x) {
    if (x < 0.0) x = -x;
    if (x < detail::kBesselCrossover) return std::log(detail::bessel_power_series(0, x));
    return x - 0.5 * std::log(2.0 * M_PI * x) +
           std::log(detail::bessel_asymptotic_series(0, x));
}

/// R(x) = I_1(x) / I_0(x), the ratio that drives the radial profile's
/// log-derivatives.
inline double bessel_i1_i0(double x) {
    if (x == 0.0) return 0.0;
    if (x < detail::kBesselCrossover)
        return detail::bessel_power_series(1, x) / detail::bessel_power_series(0, x);
    return detail::bessel_asymptotic_series(1, x) / detail::bessel_asymptotic_series(0, x);
}

//! Radial profile value and derivatives of a rotationally symmetric density.
struct RadialDerivs {
    double f = 0.0, df = 0.0, d2f = 0.0, d3f = 0.0;
};

//! The smoothed density of "uniform on a circle of radius r0 plus isotropic
//! N(0, sigma^2 I_2) noise", smoothed by the Gaussian kernel at bandwidth h:
//!   p_h(x) = exp(-(r^2 + r0^2)/(2 s^2)) I_0(r r0 / s^2) / (2 pi s^2),
//! with s^2 = sigma^2 + h^2 and r = |x|. Its ridge is the circle of radius
//! maximizing this profile.
class CircleDensity {
public:
    CircleDensity(double r0, double noise_sigma, double h)
        : r0_(r0), s2_(noise_sigma * noise_sigma + h * h) {
        if (!(r0 > 0.0) || !(s2_ > 0.0))
            throw input_error("circle density requires r0 > 0 and sigma^2 + h^2 > 0");
    }

    double r0() const { return r0_; }
    double smoothed_variance() const { return s2_; }

    double value_at_radius(double r) const {
        return std::exp(log_value_at_radius(r));
    }

    double log_value_at_radius(double r) const {
        const double beta = r0_ / s2_;
        return -(r * r + r0_ * r0_) / (2.0 * s2_) + log_bessel_i0(beta * r) -
               std::log(2.0 * M_PI * s2_);
    }

    /// f, f', f'', f''' of the radial profile via log-derivatives:
    /// w = log f, f' = f w', f'' = f (w'^2 + w''), f''' = f (w'^3 + 3 w' w'' + w''').
    RadialDerivs radial(double r) const {
        const double beta = r0_ / s2_;
        const double x = beta * r;
        const double R = bessel_i1_i0(x);
        // R' and R'' from I1' = I0 - I1/x
        double Rp, Rpp;
        if (x < 1e-8) {
            // series: R = x/2 - x^3/16 + ...
            Rp = 0.5 - 3.0 * x * x / 16.0;
            Rpp = -6.0 * x / 16.0;
        } else {
            Rp = 1.0 - R / x - R * R;
            Rpp = -Rp / x + R / (x * x) - 2.0 * R * Rp;
        }
        const double w1 = -r / s2_ + beta * R;
        const double w2 = -1.0 / s2_ + beta * beta * Rp;
        const double w3 = beta * beta * beta * Rpp;
        RadialDerivs out;
        out.f = value_at_radius(r);
        out.df = out.f * w1;
        out.d2f = out.f * (w1 * w1 + w2);
        out.d3f = out.f * (w1 * w1 * w1 + 3.0 * w1 * w2 + w3);
        return out;
    }

    /// Exact order-3 Cartesian jet of the smoothed density.
    DensityJet jet(const Eigen::Vector2d& x) const {
        const double r = std::max(x.norm(), 1e-12);
        const Eigen::Vector2d u = x / r;
        const RadialDerivs rd = radial(r);

        DensityJet out;
        out.at = x;
        out.order = 3;
        out.value = rd.f;
        out.grad = rd.df * u;
        const Eigen::Matrix2d uu = u * u.transpose();
        const Eigen::Matrix2d tang = Eigen::Matrix2d::Identity() - uu;
        out.hess = rd.d2f * uu + (rd.df / r) * tang;

        // T_ijk = f''' u_i u_j u_k + A (d_ij u_k + d_ik u_j + d_jk u_i - 3 u_i u_j u_k),
        // A = (f'' - f'/r)/r
        const double A = (rd.d2f - rd.df / r) / r;
        out.third.assign(2, Eigen::MatrixXd::Zero(2, 2));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) {
                    double v = rd.d3f * u(i) * u(j) * u(k);
                    double delta_terms = 0.0;
                    if (i == j) delta_terms += u(k);
                    if (i == k) delta_terms += u(j);
                    if (j == k) delta_terms += u(i);
                    v += A * (delta_terms - 3.0 * u(i) * u(j) * u(k));
                    out.third[static_cast<std::size_t>(k)](i, j) = v;
                }
        return out;
    }

    /// Radius of the smoothed ridge: the argmax of the radial profile, by
    /// golden-section search on the log profile. Always lands in
    /// (r0 - s^2/r0, r0): the convolution pulls the ridge inward, never out.
    double ridge_radius() const {
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double lo = std::max(r0_ - 3.0 * std::sqrt(s2_), 1e-9);
        double hi = r0_ + std::sqrt(s2_);
        double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
        double fa = log_value_at_radius(a), fb = log_value_at_radius(b);
        while (hi - lo > 1e-13 * r0_) {
            if (fa < fb) {
                lo = a;
                a = b;
                fa = fb;
                b = lo + phi * (hi - lo);
                fb = log_value_at_radius(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - phi * (hi - lo);
                fa = log_value_at_radius(a);
            }
        }
        return 0.5 * (lo + hi);
    }

private:
    double r0_;
    double s2_;
};

//! Zero-mean axis-aligned Gaussian with per-axis standard deviations, kernel-
//! smoothed: variances become sigma_i^2 + h^2. Jets are elementary closed
//! forms; the ridge of the smoothed density is the major axis.
class AnisoGaussianDensity {
public:
    AnisoGaussianDensity(Eigen::VectorXd axis_sigmas, double h) {
        if (axis_sigmas.size() < 2) throw input_error("need at least 2 axes");
        var_ = axis_sigmas.array().square() + h * h;
        double log_norm = 0.0;
        for (Eigen::Index i = 0; i < var_.size(); ++i)
            log_norm -= 0.5 * std::log(2.0 * M_PI * var_(i));
        log_norm_ = log_norm;
    }

    int dim() const { return static_cast<int>(var_.size()); }
    const Eigen::VectorXd& smoothed_variances() const { return var_; }

    DensityJet jet(const Eigen::VectorXd& x) const {
        const int d = dim();
        if (x.size() != d) throw input_error("query dimension mismatch");
        double logp = log_norm_;
        for (int i = 0; i < d; ++i) logp -= 0.5 * x(i) * x(i) / var_(i);
        const double p = std::exp(logp);
        const Eigen::VectorXd b = -x.array() / var_.array();  // d log p / d x
        const Eigen::VectorXd a = var_.cwiseInverse();

        DensityJet out;
        out.at = x;
        out.order = 3;
        out.value = p;
        out.grad = p * b;
        out.hess = p * (b * b.transpose() - Eigen::MatrixXd(a.asDiagonal()));
        out.third.assign(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) {
                    double v = b(i) * b(j) * b(k);
                    if (i == j) v -= a(i) * b(k);
                    if (i == k) v -= a(i) * b(j);
                    if (j == k) v -= a(j) * b(i);
                    out.third[static_cast<std::size_t>(k)](i, j) = p * v;
                }
        return out;
    }

private:
    Eigen::VectorXd var_;
    double log_norm_ = 0.0;
};

} // namespace ridgescan::analytic
