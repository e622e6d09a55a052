#pragma once

// Bootstrap machinery: the local uncertainty field rho_n^2 (resample,
// re-estimate the ridge, average squared projection distances) and the
// confidence-set radius t_alpha (upper quantile of one-sided bootstrap
// distances), plus the variance-stabilized variant of the statistic.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ridgescan/common.hpp"
#include "ridgescan/finder.hpp"
#include "ridgescan/kde.hpp"
#include "ridgescan/parallel.hpp"
#include "ridgescan/rng.hpp"
#include "ridgescan/sample.hpp"
#include "ridgescan/set_metrics.hpp"

namespace ridgescan {

//! Replicate schedule for the bootstrap. Replicate b always draws from the
//! generator seeded with derive_seed(seed, b), so results are independent of
//! the execution order and thread count.
struct BootstrapPlan {
    int B = 200;
    std::uint64_t seed = 0;
    FinderConfig finder;  // applied identically to every replicate
    int threads = 1;
    bool keep_replicate_distances = false;

    void validate() const {
        if (B < 1) throw input_error("bootstrap replicate count B must be >= 1");
        finder.validate();
    }
};

/// n draws with replacement from the sample, indices from the replicate's own
/// deterministic generator. Same n and d as the input.
inline Sample bootstrap_resample(const Sample& sample, std::uint64_t replicate_seed) {
    Rng rng(replicate_seed);
    const Eigen::Index n = sample.size();
    Eigen::MatrixXd pts(n, sample.dim());
    for (Eigen::Index i = 0; i < n; ++i)
        pts.row(i) = sample.points().row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    return Sample(std::move(pts));
}

//! Per-ridge-point bootstrap uncertainty rho_n^2 decorating a base RidgeSet.
struct UncertaintyField {
    std::vector<double> rho2;               // one entry per base ridge point
    Eigen::MatrixXd per_replicate;          // B_used x |base| squared distances (optional)
    std::vector<int> failed_replicates;     // replicate indices whose ridge was empty
    int replicates_used = 0;
};

enum class StatisticKind { QuasiHausdorff, VarianceStabilized };

//! Bootstrap tube radius for the base ridge: base dilated by `radius` is the
//! confidence set. `distances` holds the per-replicate statistics the
//! quantile was taken from.
struct ConfidenceSet {
    double radius = 0.0;
    double alpha = 0.0;
    StatisticKind kind = StatisticKind::QuasiHausdorff;
    std::vector<double> distances;          // successful replicates, in replicate order
    std::vector<int> failed_replicates;
};

/// alpha-upper empirical quantile with the conservative convention: the
/// ceil(m (1 - alpha))-th smallest of m values. For 10 values at alpha = 0.1
/// this is the 9th smallest.
inline double upper_quantile(std::vector<double> values, double alpha) {
    if (values.empty()) throw input_error("quantile of an empty distance list");
    if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha must be in (0, 1)");
    std::sort(values.begin(), values.end());
    const double m = static_cast<double>(values.size());
    // small guard so that exactly-representable products like 10 * 0.9 do not
    // get ceiled one slot too high
    auto k = static_cast<std::size_t>(std::ceil(m * (1.0 - alpha) - 1e-9));
    if (k < 1) k = 1;
    if (k > values.size()) k = values.size();
    return values[k - 1];
}

/// Algorithm 2's per-replicate statistic, direction fixed as written there:
/// t_b = dist_Pi(replicate, base) = sup over base points of the distance to
/// the bootstrap ridge.
inline double bootstrap_distance(const Eigen::MatrixXd& replicate_ridge,
                                 const Eigen::MatrixXd& base_ridge) {
    return quasi_hausdorff(replicate_ridge, base_ridge);
}

/// Variance-stabilized one-sided statistic:
/// max over base points x of d(x, other) / p(x), densities from
/// `density_model`. Throws if a density falls at or below `density_floor`
/// (a sign the finder floor was disabled).
inline double stabilized_statistic(const RidgeSet& base, const Eigen::MatrixXd& other,
                                   const KdeModel& density_model, double density_floor = 0.0) {
    if (base.points.empty() || other.rows() == 0)
        throw input_error("stabilized_statistic requires non-empty sets");
    double worst = 0.0;
    for (const auto& p : base.points) {
        const double dens = density_model.value(p.location);
        if (dens <= density_floor)
            throw numeric_error("density at a ridge point is at or below the floor; "
                                "stabilized statistic would blow up");
        worst = std::max(worst, point_set_distance(p.location, other) / dens);
    }
    return worst;
}

namespace detail {

struct ReplicateOutcome {
    bool failed = false;
    std::vector<double> sq_distances;  // per base point (local_uncertainty)
    double statistic = 0.0;            // (confidence_set)
};

template <typename PerReplicate>
inline std::vector<ReplicateOutcome> run_replicates(const Sample& sample, double h,
                                                    const BootstrapPlan& plan,
                                                    PerReplicate&& body) {
    std::vector<ReplicateOutcome> out(static_cast<std::size_t>(plan.B));
    FinderConfig finder = plan.finder;
    // Resolve the mesh once against the observed sample so every replicate
    // reuses the identical start list; bootstrap variation then reflects data
    // variation only.
    finder.explicit_mesh = resolve_mesh(plan.finder, sample);
    finder.mesh_kind = MeshKind::Explicit;
    finder.threads = 1;  // replicates are the parallel axis
    parallel_for(out.size(), static_cast<unsigned>(plan.threads), [&](std::size_t b) {
        Sample resample = bootstrap_resample(sample, derive_seed(plan.seed, b));
        KdeModel model(std::move(resample), h);
        try {
            RidgeSet ridge = find_ridge(model, finder);
            body(out[b], ridge);
        } catch (const empty_ridge_error&) {
            out[b].failed = true;
        }
    });
    return out;
}

inline void check_failures(const std::vector<ReplicateOutcome>& outcomes, int B,
                           std::vector<int>& failed) {
    for (std::size_t b = 0; b < outcomes.size(); ++b)
        if (outcomes[b].failed) failed.push_back(static_cast<int>(b));
    if (static_cast<double>(failed.size()) > 0.1 * B) {
        throw error("bootstrap aborted: " + std::to_string(failed.size()) + " of " +
                    std::to_string(B) +
                    " replicates produced an empty ridge (> 10%); this usually signals a "
                    "violated eigengap condition or a poorly chosen bandwidth");
    }
}

} // namespace detail

/// Algorithm 1: for every replicate rebuild the KDE at the same h, rerun the
/// finder with the same configuration, and average the squared projection
/// distances from each base ridge point to the replicate ridge.
///
/// `base` must have been computed from (sample, h) with plan.finder.
inline UncertaintyField local_uncertainty(const Sample& sample, double h, const RidgeSet& base,
                                          const BootstrapPlan& plan) {
    plan.validate();
    if (base.points.empty()) throw input_error("base ridge set is empty");
    const Eigen::MatrixXd base_locs = base.locations();

    auto outcomes = detail::run_replicates(
        sample, h, plan, [&](detail::ReplicateOutcome& slot, const RidgeSet& ridge) {
            const Eigen::MatrixXd locs = ridge.locations();
            slot.sq_distances.resize(static_cast<std::size_t>(base_locs.rows()));
            for (Eigen::Index i = 0; i < base_locs.rows(); ++i) {
                const double dist = point_set_distance(base_locs.row(i).transpose(), locs);
                slot.sq_distances[static_cast<std::size_t>(i)] = dist * dist;
            }
        });

    UncertaintyField field;
    detail::check_failures(outcomes, plan.B, field.failed_replicates);
    field.replicates_used = plan.B - static_cast<int>(field.failed_replicates.size());
    field.rho2.assign(static_cast<std::size_t>(base_locs.rows()), 0.0);
    if (plan.keep_replicate_distances)
        field.per_replicate.resize(field.replicates_used, base_locs.rows());
    Eigen::Index row = 0;
    for (const auto& o : outcomes) {
        if (o.failed) continue;
        for (std::size_t i = 0; i < o.sq_distances.size(); ++i) {
            field.rho2[i] += o.sq_distances[i];
            if (plan.keep_replicate_distances)
                field.per_replicate(row, static_cast<Eigen::Index>(i)) = o.sq_distances[i];
        }
        ++row;
    }
    for (double& v : field.rho2) v /= static_cast<double>(field.replicates_used);
    return field;
}

/// Algorithm 2: per replicate compute t_b = dist_Pi(replicate ridge, base)
/// (or the variance-stabilized variant), and return the
/// ceil(B (1 - alpha))-th smallest as the tube radius.
inline ConfidenceSet confidence_set(const Sample& sample, double h, const RidgeSet& base,
                                    const BootstrapPlan& plan, double alpha,
                                    StatisticKind kind = StatisticKind::QuasiHausdorff) {
    plan.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha must be in (0, 1)");
    if (base.points.empty()) throw input_error("base ridge set is empty");
    const Eigen::MatrixXd base_locs = base.locations();
    // densities for the stabilized statistic come from the observed-data KDE
    KdeModel base_model(sample, h);

    auto outcomes = detail::run_replicates(
        sample, h, plan, [&](detail::ReplicateOutcome& slot, const RidgeSet& ridge) {
            const Eigen::MatrixXd locs = ridge.locations();
            slot.statistic = kind == StatisticKind::QuasiHausdorff
                                 ? bootstrap_distance(locs, base_locs)
                                 : stabilized_statistic(base, locs, base_model);
        });

    ConfidenceSet cs;
    cs.alpha = alpha;
    cs.kind = kind;
    detail::check_failures(outcomes, plan.B, cs.failed_replicates);
    cs.distances.reserve(outcomes.size());
    for (const auto& o : outcomes)
        if (!o.failed) cs.distances.push_back(o.statistic);
    cs.radius = upper_quantile(cs.distances, alpha);
    return cs;
}

} // namespace ridgescan
