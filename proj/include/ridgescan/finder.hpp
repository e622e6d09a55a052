#pragma once

// Subspace-constrained mean shift: locate the discrete ridge set
// Ridge(p_hat) by iterating start points within span(V) until the projected
// gradient vanishes, then prune by lambda_2 sign and a density floor.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ridgescan/common.hpp"
#include "ridgescan/geometry.hpp"
#include "ridgescan/kde.hpp"
#include "ridgescan/parallel.hpp"
#include "ridgescan/sample.hpp"

namespace ridgescan {

enum class StepRule { MeanShift, FixedStep };
enum class MeshKind { FromSample, Grid, Explicit };

//! Axis-aligned lattice: res(k) evenly spaced values per dimension including
//! both endpoints (a single value collapses to lo). Points are emitted in
//! row-major order, last dimension fastest.
struct GridSpec {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    Eigen::VectorXi res;
};

struct FinderConfig {
    MeshKind mesh_kind = MeshKind::FromSample;
    GridSpec grid;                   // used when mesh_kind == Grid
    Eigen::MatrixXd explicit_mesh;   // used when mesh_kind == Explicit
    double tol_projgrad = 1e-6;      // relative stopping tolerance on ||V^T g||
    int max_iters = 500;
    double density_floor = 0.05;     // tau: keep points with p >= tau * max p
    // eigengap-condition floor: keep points with lambda_2 <= -tau_l * median
    // |lambda_2| over converged points. 0 disables. Converged points with
    // weak normal curvature are tail artifacts of the ridge definition (the
    // theory's eigen condition excludes them); benchmarks enable this. The
    // median normalizer is robust to isolated high-curvature spikes.
    double lambda2_floor = 0.0;
    StepRule step_rule = StepRule::MeanShift;
    double fixed_step_eta = 1.0;     // step length for StepRule::FixedStep
    double merge_radius = 0.0;       // presentation-only dedup; 0 = keep all
    int threads = 1;

    void validate() const {
        if (!(tol_projgrad > 0.0)) throw input_error("tol_projgrad must be > 0");
        if (max_iters < 1) throw input_error("max_iters must be >= 1");
        if (density_floor < 0.0 || density_floor >= 1.0)
            throw input_error("density_floor must be in [0, 1)");
        if (lambda2_floor < 0.0 || lambda2_floor >= 1.0)
            throw input_error("lambda2_floor must be in [0, 1)");
        if (merge_radius < 0.0) throw input_error("merge_radius must be >= 0");
    }
};

//! One converged ridge location with its attached frame and provenance.
struct RidgePoint {
    Eigen::VectorXd location;
    NormalFrame frame;
    double value = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    int start_index = -1;
    int iterations = 0;
};

struct FinderDiagnostics {
    int starts = 0;
    int vacuum_starts = 0;
    int not_converged = 0;
    int dropped_lambda2 = 0;
    int dropped_floor = 0;
    int dropped_lambda2_floor = 0;
    int dropped_frame = 0;        // eigengap collapse etc. during frame attachment
    int merged = 0;
    int monotone_violations = 0;  // kde value decreased along some trajectory
    std::string summary() const {
        return "starts=" + std::to_string(starts) +
               " vacuum=" + std::to_string(vacuum_starts) +
               " not_converged=" + std::to_string(not_converged) +
               " dropped_lambda2=" + std::to_string(dropped_lambda2) +
               " dropped_floor=" + std::to_string(dropped_floor) +
               " dropped_lambda2_floor=" + std::to_string(dropped_lambda2_floor) +
               " dropped_frame=" + std::to_string(dropped_frame) +
               " merged=" + std::to_string(merged) +
               " monotone_violations=" + std::to_string(monotone_violations);
    }
};

struct RidgeSet {
    std::vector<RidgePoint> points;
    FinderDiagnostics diagnostics;

    Eigen::Index size() const { return static_cast<Eigen::Index>(points.size()); }

    Eigen::MatrixXd locations() const {
        if (points.empty()) return Eigen::MatrixXd();
        Eigen::MatrixXd m(points.size(), points.front().location.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            m.row(i) = points[i].location.transpose();
        return m;
    }
};

/// Start points for the finder. Grid -> row-major lattice; FromSample -> the
/// sample points in order; Explicit -> the provided rows verbatim.
inline Eigen::MatrixXd resolve_mesh(const FinderConfig& config, const Sample& sample) {
    switch (config.mesh_kind) {
        case MeshKind::FromSample:
            return sample.points();
        case MeshKind::Explicit:
            if (config.explicit_mesh.rows() == 0)
                throw input_error("explicit mesh is empty");
            return config.explicit_mesh;
        case MeshKind::Grid: {
            const auto& g = config.grid;
            const int d = static_cast<int>(g.lo.size());
            if (d == 0 || g.hi.size() != d || g.res.size() != d)
                throw input_error("grid spec dimensions inconsistent");
            long total = 1;
            for (int k = 0; k < d; ++k) {
                if (g.res(k) < 1) throw input_error("grid resolution must be >= 1");
                total *= g.res(k);
            }
            if (total <= 0) throw input_error("empty grid");
            Eigen::MatrixXd mesh(total, d);
            Eigen::VectorXi idx = Eigen::VectorXi::Zero(d);
            for (long r = 0; r < total; ++r) {
                for (int k = 0; k < d; ++k)
                    mesh(r, k) = g.res(k) == 1
                                     ? g.lo(k)
                                     : g.lo(k) + (g.hi(k) - g.lo(k)) * idx(k) / (g.res(k) - 1);
                for (int k = d - 1; k >= 0; --k) {   // last dimension fastest
                    if (++idx(k) < g.res(k)) break;
                    idx(k) = 0;
                }
            }
            return mesh;
        }
    }
    throw input_error("unknown mesh kind");
}

/// One subspace-constrained step from x: x' = x + V V^T delta, where delta is
/// the mean-shift displacement h^2 g / p (Gaussian kernel) or eta * g for the
/// fixed-step rule. The displacement always lies in span(V).
inline Eigen::VectorXd scms_step(const KdeModel& model, const Eigen::VectorXd& x,
                                 StepRule rule = StepRule::MeanShift, double eta = 1.0) {
    const DensityJet jet = model.jet(x, 2);
    if (!(jet.value > 0.0)) throw numeric_error("vacuum start: zero density at start point");
    const EigenFrame f = eigen_frame(jet);
    const Eigen::MatrixXd V = f.trailing();
    const Eigen::VectorXd delta =
        rule == StepRule::MeanShift
            ? (model.bandwidth() * model.bandwidth() / jet.value) * jet.grad
            : eta * jet.grad;
    return x + V * (V.transpose() * delta);
}

namespace detail {

struct TrajectoryResult {
    bool vacuum = false;
    bool converged = false;
    int iterations = 0;
    int monotone_violations = 0;
    Eigen::VectorXd final_x;
};

inline TrajectoryResult run_scms(const KdeModel& model, Eigen::VectorXd x,
                                 const FinderConfig& config) {
    TrajectoryResult r;
    const double h = model.bandwidth();
    double prev_value = -1.0;
    for (int it = 0;; ++it) {
        const DensityJet jet = model.jet(x, 2);
        if (!(jet.value > 0.0)) {
            r.vacuum = true;
            r.iterations = it;
            break;
        }
        if (prev_value >= 0.0 && jet.value < prev_value * (1.0 - 1e-12))
            ++r.monotone_violations;
        prev_value = jet.value;
        const EigenFrame f = eigen_frame(jet);
        const Eigen::MatrixXd V = f.trailing();
        const Eigen::VectorXd vtg = V.transpose() * jet.grad;
        // converged when the projected gradient is negligible relative to the
        // full gradient, with p/h as an absolute scale near critical points
        const double floor = std::max(jet.grad.norm(), jet.value / h);
        if (vtg.norm() <= config.tol_projgrad * floor) {
            r.converged = true;
            r.iterations = it;
            break;
        }
        if (it >= config.max_iters) {
            r.iterations = it;
            break;
        }
        const Eigen::VectorXd delta = config.step_rule == StepRule::MeanShift
                                          ? (h * h / jet.value) * jet.grad
                                          : config.fixed_step_eta * jet.grad;
        x += V * (V.transpose() * delta);
    }
    r.final_x = std::move(x);
    return r;
}

} // namespace detail

/// Runs SCMS from every mesh point, keeps converged points with lambda_2 < 0
/// and density >= floor, and attaches a NormalFrame to each survivor.
/// Deterministic for a given model and config under any thread count.
/// Throws empty_ridge_error (with per-start diagnostics) when nothing
/// survives.
inline RidgeSet find_ridge(const KdeModel& model, const FinderConfig& config) {
    config.validate();
    const Eigen::MatrixXd mesh = resolve_mesh(config, model.sample());
    if (mesh.rows() == 0) throw input_error("mesh resolved to zero start points");
    if (mesh.cols() != model.sample().dim())
        throw input_error("mesh dimension does not match the sample");

    struct Slot {
        detail::TrajectoryResult traj;
        std::optional<RidgePoint> point;
        bool frame_failed = false;
        bool lambda2_rejected = false;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(mesh.rows()));

    parallel_for(slots.size(), static_cast<unsigned>(config.threads), [&](std::size_t s) {
        Slot& slot = slots[s];
        slot.traj = detail::run_scms(model, mesh.row(static_cast<Eigen::Index>(s)).transpose(), config);
        if (!slot.traj.converged) return;
        const DensityJet jet = model.jet(slot.traj.final_x, 3);
        const EigenFrame f = eigen_frame(jet);
        if (!(f.eigenvalues(1) < 0.0)) {
            slot.lambda2_rejected = true;
            return;
        }
        RidgePoint p;
        p.location = slot.traj.final_x;
        p.value = jet.value;
        p.lambda1 = f.eigenvalues(0);
        p.lambda2 = f.eigenvalues(1);
        p.start_index = static_cast<int>(s);
        p.iterations = slot.traj.iterations;
        try {
            p.frame = normal_frame(jet);
        } catch (const numeric_error&) {
            slot.frame_failed = true;  // dropped with a diagnostic, not fatal
            return;
        }
        slot.point = std::move(p);
    });

    RidgeSet out;
    out.diagnostics.starts = static_cast<int>(mesh.rows());
    double max_density = 0.0;
    for (const Slot& s : slots) {
        if (s.traj.vacuum) ++out.diagnostics.vacuum_starts;
        else if (!s.traj.converged) ++out.diagnostics.not_converged;
        if (s.lambda2_rejected) ++out.diagnostics.dropped_lambda2;
        if (s.frame_failed) ++out.diagnostics.dropped_frame;
        out.diagnostics.monotone_violations += s.traj.monotone_violations;
        if (s.point) max_density = std::max(max_density, s.point->value);
    }
    const double floor = config.density_floor * max_density;
    // the curvature normalizer is the median over density survivors, so tail
    // artifacts cannot drag it down
    double curvature_floor = 0.0;
    if (config.lambda2_floor > 0.0) {
        std::vector<double> curvatures;
        for (const Slot& s : slots)
            if (s.point && s.point->value >= floor) curvatures.push_back(-s.point->lambda2);
        if (!curvatures.empty()) {
            std::nth_element(curvatures.begin(), curvatures.begin() + curvatures.size() / 2,
                             curvatures.end());
            curvature_floor = config.lambda2_floor * curvatures[curvatures.size() / 2];
        }
    }
    for (Slot& s : slots) {
        if (!s.point) continue;
        if (s.point->value < floor) {
            ++out.diagnostics.dropped_floor;
            continue;
        }
        if (-s.point->lambda2 < curvature_floor) {
            ++out.diagnostics.dropped_lambda2_floor;
            continue;
        }
        out.points.push_back(std::move(*s.point));
    }

    if (config.merge_radius > 0.0 && !out.points.empty()) {
        std::vector<RidgePoint> merged;
        for (auto& p : out.points) {
            bool dup = false;
            for (const auto& q : merged)
                if ((p.location - q.location).norm() <= config.merge_radius) {
                    dup = true;
                    break;
                }
            if (dup) ++out.diagnostics.merged;
            else merged.push_back(std::move(p));
        }
        out.points = std::move(merged);
    }

    if (out.points.empty())
        throw empty_ridge_error("no ridge points survived (" + out.diagnostics.summary() + ")");
    return out;
}

} // namespace ridgescan
