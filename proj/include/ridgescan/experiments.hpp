#pragma once

// Synthetic data generators (circle / smoothed box / anisotropic Gaussian),
// analytic oracle ridges for the smoothed densities, and the Monte-Carlo
// harnesses validating the local-uncertainty trace formula and bootstrap
// confidence-set coverage at desk scale.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ridgescan/analytic.hpp"
#include "ridgescan/common.hpp"
#include "ridgescan/finder.hpp"
#include "ridgescan/inference.hpp"
#include "ridgescan/kde.hpp"
#include "ridgescan/parallel.hpp"
#include "ridgescan/rng.hpp"
#include "ridgescan/sample.hpp"
#include "ridgescan/set_metrics.hpp"

namespace ridgescan {

enum class Family { Circle, Box, AnisoGaussian };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Circle: return "circle";
        case Family::Box: return "box";
        case Family::AnisoGaussian: return "aniso-gaussian";
    }
    return "?";
}

//! One synthetic benchmark configuration. Geometry defaults are declared
//! choices, not inferred values: circle r0 = 3 with noise sigma = 0.3, unit
//! box with sigma = 0.1.
struct Scenario {
    Family family = Family::Circle;
    int n = 500;
    double noise_sigma = 0.3;
    std::uint64_t seed = 0;
    // circle
    double circle_radius = 3.0;
    // box (axis-aligned square of the given side, optionally rounded corners)
    double box_side = 1.0;
    double box_corner_radius = 0.0;
    // aniso-gaussian
    Eigen::Vector2d gauss_axes = Eigen::Vector2d(3.0, 1.0);

    void validate() const {
        if (n < 2) throw input_error("scenario needs n >= 2");
        if (!(noise_sigma > 0.0)) throw input_error("noise_sigma must be > 0");
        if (family == Family::Circle && !(circle_radius > 0.0))
            throw input_error("circle radius must be > 0");
        if (family == Family::Box &&
            (!(box_side > 0.0) || box_corner_radius < 0.0 ||
             box_corner_radius > 0.5 * box_side))
            throw input_error("box requires side > 0 and corner radius in [0, side/2]");
        if (family == Family::AnisoGaussian &&
            !(gauss_axes.minCoeff() > 0.0 && gauss_axes(0) > gauss_axes(1)))
            throw input_error("aniso-gaussian requires sigma1 > sigma2 > 0");
    }
};

namespace detail {

/// Point at arc length t along the boundary of a rounded square centered at
/// the origin (side L, corner radius c), walked counterclockwise from the
/// middle of the right edge.
inline Eigen::Vector2d rounded_box_point(double t, double L, double c) {
    const double straight = L - 2.0 * c;
    const double arc = 0.5 * M_PI * c;
    const double half = 0.5 * straight;
    const double quarter = straight + arc;  // one edge-plus-corner period
    // shift so segment 0 starts at the right edge's lower end
    t = std::fmod(t + half, 4.0 * quarter);
    int side = static_cast<int>(t / quarter);
    if (side > 3) side = 3;
    const double local = t - side * quarter;
    Eigen::Vector2d p;
    if (local <= straight) {
        const double s = local - half;  // -half .. +half
        p = Eigen::Vector2d(0.5 * L, s);
    } else {
        const double ang = (local - straight) / c;  // 0 .. pi/2
        const Eigen::Vector2d center(0.5 * L - c, half);
        p = center + c * Eigen::Vector2d(std::cos(ang), std::sin(ang));
    }
    // rotate by side * 90 degrees
    for (int k = 0; k < side; ++k) p = Eigen::Vector2d(-p(1), p(0));
    return p;
}

} // namespace detail

/// Draws a sample: uniform position on the family's generating set plus
/// isotropic Gaussian noise (the aniso-gaussian family is the noise-free
/// Gaussian itself). Deterministic per scenario seed.
inline Sample generate(const Scenario& sc) {
    sc.validate();
    Rng rng(sc.seed);
    const int d = sc.family == Family::AnisoGaussian ? static_cast<int>(sc.gauss_axes.size()) : 2;
    Eigen::MatrixXd pts(sc.n, d);
    for (int i = 0; i < sc.n; ++i) {
        switch (sc.family) {
            case Family::Circle: {
                const double th = rng.uniform(0.0, 2.0 * M_PI);
                pts(i, 0) = sc.circle_radius * std::cos(th) + sc.noise_sigma * rng.normal();
                pts(i, 1) = sc.circle_radius * std::sin(th) + sc.noise_sigma * rng.normal();
                break;
            }
            case Family::Box: {
                const double perim =
                    4.0 * (sc.box_side - 2.0 * sc.box_corner_radius) +
                    2.0 * M_PI * sc.box_corner_radius;
                const Eigen::Vector2d p =
                    detail::rounded_box_point(rng.uniform(0.0, perim), sc.box_side,
                                              sc.box_corner_radius);
                pts(i, 0) = p(0) + sc.noise_sigma * rng.normal();
                pts(i, 1) = p(1) + sc.noise_sigma * rng.normal();
                break;
            }
            case Family::AnisoGaussian: {
                for (int j = 0; j < d; ++j) pts(i, j) = sc.gauss_axes(j) * rng.normal();
                break;
            }
        }
    }
    return Sample(std::move(pts));
}

/// Discretization of the smoothed ridge R_h.
///
/// circle: the radius maximizing the analytic radial profile (exact up to the
/// 1-D optimizer tolerance), emitted at `resolution` angles.
/// aniso-gaussian: a major-axis segment (lambda_2 < 0 holds on the whole
/// axis, so the set must be truncated); `aniso_half_length` selects the
/// truncation, 0 meaning the default 2 sigma1. Benchmarks match it to the
/// finder's density floor so estimator and oracle are cut at the same
/// analytic density level.
/// box: no closed form; the oracle is find_ridge on a KDE built from
/// `box_oracle_n` points of the same scenario, an approximation whose error
/// is the finder tolerance plus mesh discretization.
inline Eigen::MatrixXd oracle_ridge(const Scenario& sc, double h, int resolution,
                                    int box_oracle_n = 1000000,
                                    double aniso_half_length = 0.0) {
    sc.validate();
    if (resolution < 3) throw input_error("oracle resolution must be >= 3");
    switch (sc.family) {
        case Family::Circle: {
            analytic::CircleDensity density(sc.circle_radius, sc.noise_sigma, h);
            const double r = density.ridge_radius();
            Eigen::MatrixXd pts(resolution, 2);
            for (int i = 0; i < resolution; ++i) {
                const double th = 2.0 * M_PI * i / resolution;
                pts(i, 0) = r * std::cos(th);
                pts(i, 1) = r * std::sin(th);
            }
            return pts;
        }
        case Family::AnisoGaussian: {
            const int d = static_cast<int>(sc.gauss_axes.size());
            const double half =
                aniso_half_length > 0.0 ? aniso_half_length : 2.0 * sc.gauss_axes(0);
            Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(resolution, d);
            for (int i = 0; i < resolution; ++i)
                pts(i, 0) = -half + 2.0 * half * i / (resolution - 1);
            return pts;
        }
        case Family::Box: {
            Scenario big = sc;
            big.n = box_oracle_n;
            big.seed = derive_seed(sc.seed, 0x0b0bULL);
            Sample sample = generate(big);
            FinderConfig cfg;
            cfg.mesh_kind = MeshKind::Explicit;
            const int stride = std::max(1, box_oracle_n / std::max(resolution, 3));
            const Eigen::Index starts = sample.size() / stride;
            Eigen::MatrixXd mesh(starts, 2);
            for (Eigen::Index i = 0; i < starts; ++i)
                mesh.row(i) = sample.points().row(i * stride);
            cfg.explicit_mesh = mesh;
            cfg.threads = 0;  // all cores; this is the expensive oracle
            KdeModel model(std::move(sample), h);
            return find_ridge(model, cfg).locations();
        }
    }
    throw input_error("unknown family");
}

inline double scenario_bandwidth(const Scenario& sc, const Sample& sample, double fixed_h) {
    (void)sc;
    return fixed_h > 0.0 ? fixed_h : silverman_bandwidth(sample);
}

/// Major-axis truncation matching a relative density floor tau: the smoothed
/// density on the axis falls to tau of its peak at |x1| = s1 sqrt(2 ln(1/tau)).
/// Pairing the finder's floor with this oracle half-length cuts estimator and
/// oracle at the same analytic level, which is what makes a two-sided
/// Hausdorff comparison meaningful for an unbounded ridge.
inline double aniso_oracle_half_length(const Scenario& sc, double h, double tau) {
    const double s1sq = sc.gauss_axes(0) * sc.gauss_axes(0) + h * h;
    return std::sqrt(2.0 * s1sq * std::log(1.0 / tau));
}

//! One coverage trial: the tube radius, the realized one-sided distance from
//! the oracle ridge to the estimate, and the verdict.
struct CoverageTrial {
    bool failed = false;
    std::string note;
    double h = 0.0;
    double t_alpha = 0.0;
    double dist_oracle_to_estimate = 0.0;  // dist_Pi(estimate, oracle)
    bool covered = false;
};

struct CoverageReport {
    Scenario scenario;
    double alpha = 0.0;
    int M = 0;
    int B = 0;
    std::uint64_t plan_seed = 0;
    double fixed_h = 0.0;             // 0 = Silverman per trial
    int oracle_resolution = 0;
    double empirical_coverage = 0.0;  // mean of covered flags over completed trials
    int completed = 0;
    std::vector<CoverageTrial> trials;
};

/// M independent trials of: generate -> bandwidth -> find_ridge ->
/// confidence_set -> check that every oracle ridge point lies within t_alpha
/// of the estimate. Trial t derives data seed (scenario.seed, t) and
/// bootstrap seed (plan.seed, t), so the report is a pure function of its
/// inputs.
inline CoverageReport run_coverage(const Scenario& sc, double alpha, int M,
                                   const BootstrapPlan& plan, double fixed_h = 0.0,
                                   int oracle_resolution = 1024, int outer_threads = 1,
                                   StatisticKind kind = StatisticKind::QuasiHausdorff) {
    sc.validate();
    plan.validate();
    if (M < 1) throw input_error("coverage requires M >= 1");
    CoverageReport report;
    report.scenario = sc;
    report.alpha = alpha;
    report.M = M;
    report.B = plan.B;
    report.plan_seed = plan.seed;
    report.fixed_h = fixed_h;
    report.oracle_resolution = oracle_resolution;
    report.trials.resize(static_cast<std::size_t>(M));

    parallel_for(static_cast<std::size_t>(M), static_cast<unsigned>(outer_threads),
                 [&](std::size_t t) {
        CoverageTrial& trial = report.trials[t];
        try {
            Scenario sct = sc;
            sct.seed = derive_seed(sc.seed, t);
            Sample sample = generate(sct);
            const double h = scenario_bandwidth(sct, sample, fixed_h);
            trial.h = h;
            BootstrapPlan planc = plan;
            planc.seed = derive_seed(plan.seed, t);
            planc.threads = 1;
            planc.finder.threads = 1;
            KdeModel model(sample, h);
            RidgeSet base = find_ridge(model, planc.finder);
            ConfidenceSet cs = confidence_set(sample, h, base, planc, alpha, kind);
            trial.t_alpha = cs.radius;
            const Eigen::MatrixXd oracle = oracle_ridge(sct, h, oracle_resolution);
            const Eigen::MatrixXd est = base.locations();
            if (kind == StatisticKind::QuasiHausdorff) {
                trial.dist_oracle_to_estimate = quasi_hausdorff(est, oracle);
                trial.covered = trial.dist_oracle_to_estimate <= cs.radius;
            } else {
                // stabilized tube: x is covered iff d(x, est) <= t * p_hat(x)
                bool all_in = true;
                double worst = 0.0;
                for (Eigen::Index i = 0; i < oracle.rows(); ++i) {
                    const Eigen::VectorXd x = oracle.row(i).transpose();
                    const double dist = point_set_distance(x, est);
                    worst = std::max(worst, dist);
                    if (dist > cs.radius * model.value(x)) all_in = false;
                }
                trial.dist_oracle_to_estimate = worst;
                trial.covered = all_in;
            }
        } catch (const error& e) {
            trial.failed = true;
            trial.note = e.what();
        }
    });

    int covered = 0;
    for (const auto& t : report.trials) {
        if (t.failed) continue;
        ++report.completed;
        if (t.covered) ++covered;
    }
    report.empirical_coverage =
        report.completed > 0 ? static_cast<double>(covered) / report.completed : 0.0;
    return report;
}

//! Per-oracle-point summary of the local-uncertainty coupling check.
struct Lu2PointStats {
    Eigen::VectorXd at;
    double trace_sigma = 0.0;
    double mc_mean_sq_dist = 0.0;   // Monte-Carlo mean of d^2(x, R_hat)
    double trace_rel_err = 0.0;     // |n h^{d+2} mean d^2 - tr| / tr
};

struct Lu2Report {
    double h = 0.0;
    int n = 0;
    int M = 0;
    double median_cosine = 0.0;          // cos(realized, predicted)
    double median_rel_err = 0.0;         // ||predicted - realized|| / ||realized||
    double median_abs_cos_tangent = 0.0; // |cos(predicted, e(x))|
    double median_trace_rel_err = 0.0;
    std::vector<Lu2PointStats> points;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

inline DensityJet analytic_jet(const Scenario& sc, double h, const Eigen::VectorXd& x) {
    if (sc.family == Family::Circle)
        return analytic::CircleDensity(sc.circle_radius, sc.noise_sigma, h)
            .jet(Eigen::Vector2d(x(0), x(1)));
    if (sc.family == Family::AnisoGaussian)
        return analytic::AnisoGaussianDensity(sc.gauss_axes, h).jet(x);
    throw input_error("check_lu2 needs an analytic-oracle family (circle or aniso-gaussian)");
}

} // namespace detail

/// Empirical check of the local-uncertainty coupling
///   d(x, R_hat) ~ W(x) [g_hat(x) - g_h(x)]:
/// over M fresh datasets, compares the realized projection vector at every
/// oracle ridge point against the predictor built from the analytic W(x),
/// and the Monte-Carlo mean of d^2 against the trace formula. Sigma(x) is
/// estimated from one large fresh sample (`sigma_sample_n` points).
inline Lu2Report check_lu2(const Scenario& sc, int n, double h, int M,
                           const FinderConfig& finder, int oracle_resolution = 256,
                           int sigma_sample_n = 200000, int outer_threads = 1) {
    sc.validate();
    if (M < 1) throw input_error("check_lu2 requires M >= 1");
    const Eigen::MatrixXd oracle = oracle_ridge(sc, h, oracle_resolution);
    const Eigen::Index P = oracle.rows();

    // analytic frames and gradients at the oracle points
    std::vector<NormalFrame> frames;
    std::vector<Eigen::VectorXd> grad_h;
    frames.reserve(P);
    for (Eigen::Index j = 0; j < P; ++j) {
        const DensityJet jet = detail::analytic_jet(sc, h, oracle.row(j).transpose());
        frames.push_back(normal_frame(jet));
        grad_h.push_back(jet.grad);
    }

    // Sigma(x) via the plug-in covariance over one large fresh draw
    Scenario sigma_sc = sc;
    sigma_sc.n = sigma_sample_n;
    sigma_sc.seed = derive_seed(sc.seed, 0x5164AULL);
    KdeModel sigma_model(generate(sigma_sc), h);
    std::vector<double> trace_sigma(static_cast<std::size_t>(P));
    parallel_for(static_cast<std::size_t>(P), static_cast<unsigned>(outer_threads),
                 [&](std::size_t j) {
        trace_sigma[j] = sigma_matrix(sigma_model, frames[j]).trace();
    });

    struct TrialSlot {
        std::vector<double> cosine, rel_err, cos_tan, sq_dist;
    };
    std::vector<TrialSlot> slots(static_cast<std::size_t>(M));
    parallel_for(static_cast<std::size_t>(M), static_cast<unsigned>(outer_threads),
                 [&](std::size_t m) {
        Scenario sct = sc;
        sct.n = n;
        sct.seed = derive_seed(sc.seed, 1 + m);
        Sample sample = generate(sct);
        KdeModel model(std::move(sample), h);
        FinderConfig cfg = finder;
        cfg.threads = 1;
        const Eigen::MatrixXd est = find_ridge(model, cfg).locations();
        TrialSlot& slot = slots[m];
        for (Eigen::Index j = 0; j < P; ++j) {
            const Eigen::VectorXd x = oracle.row(j).transpose();
            const Projection proj = project(x, est);
            const Eigen::VectorXd realized = proj.vector;
            const Eigen::VectorXd g_hat = model.jet(x, 1).grad;
            // d(x, R_hat) ~ -W(x) [g_hat(x) - g_h(x)]: the minus keeps the
            // predictor pointing toward the estimated ridge because H_N (and
            // hence W) is negative definite on the ridge.
            const Eigen::VectorXd predicted = frames[j].W * (grad_h[j] - g_hat);
            const double rn = realized.norm(), pn = predicted.norm();
            if (rn > 0.0 && pn > 0.0) {
                slot.cosine.push_back(realized.dot(predicted) / (rn * pn));
                slot.rel_err.push_back((predicted - realized).norm() / rn);
                slot.cos_tan.push_back(std::abs(predicted.dot(frames[j].tangent)) / pn);
            }
            slot.sq_dist.push_back(rn * rn);
        }
    });

    Lu2Report report;
    report.h = h;
    report.n = n;
    report.M = M;
    std::vector<double> all_cos, all_rel, all_tan;
    Eigen::VectorXd mean_sq = Eigen::VectorXd::Zero(P);
    for (const auto& s : slots) {
        all_cos.insert(all_cos.end(), s.cosine.begin(), s.cosine.end());
        all_rel.insert(all_rel.end(), s.rel_err.begin(), s.rel_err.end());
        all_tan.insert(all_tan.end(), s.cos_tan.begin(), s.cos_tan.end());
        for (Eigen::Index j = 0; j < P; ++j) mean_sq(j) += s.sq_dist[static_cast<std::size_t>(j)];
    }
    mean_sq /= static_cast<double>(M);
    report.median_cosine = detail::median(all_cos);
    report.median_rel_err = detail::median(all_rel);
    report.median_abs_cos_tangent = detail::median(all_tan);

    const double scale = n * std::pow(h, oracle.cols() + 2);
    std::vector<double> trace_errs;
    report.points.resize(static_cast<std::size_t>(P));
    for (Eigen::Index j = 0; j < P; ++j) {
        auto& ps = report.points[static_cast<std::size_t>(j)];
        ps.at = oracle.row(j).transpose();
        ps.trace_sigma = trace_sigma[static_cast<std::size_t>(j)];
        ps.mc_mean_sq_dist = mean_sq(j);
        ps.trace_rel_err = std::abs(scale * mean_sq(j) - ps.trace_sigma) / ps.trace_sigma;
        trace_errs.push_back(ps.trace_rel_err);
    }
    report.median_trace_rel_err = detail::median(trace_errs);
    return report;
}

} // namespace ridgescan
