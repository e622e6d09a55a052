#pragma once

// Result persistence: CSV/JSON serialization for ridge sets, uncertainty
// fields, confidence sets and coverage reports, plus the run manifest that
// makes every output directory reproducible. All numeric output is written
// with shortest round-trip formatting (std::to_chars), so rereading a file
// recovers the exact doubles.

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ridgescan/common.hpp"
#include "ridgescan/experiments.hpp"
#include "ridgescan/finder.hpp"
#include "ridgescan/inference.hpp"
#include "ridgescan/sha256.hpp"

namespace ridgescan {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kFormatVersion = 1;

inline std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw error("number formatting failed");
    return std::string(buf, ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw error("write failed: " + path.string());
}

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open for digest: " + path.string());
    detail::Sha256 s;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        s.update(buf, static_cast<std::size_t>(in.gcount()));
    return s.hex_digest();
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw input_error("expected a JSON matrix");
    const std::size_t rows = j.size(), cols = j[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw input_error("ragged JSON matrix");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

} // namespace detail

inline nlohmann::json finder_config_to_json(const FinderConfig& c) {
    nlohmann::json j;
    j["mesh"] = c.mesh_kind == MeshKind::FromSample ? "from-sample"
                : c.mesh_kind == MeshKind::Grid     ? "grid"
                                                    : "explicit";
    if (c.mesh_kind == MeshKind::Grid) {
        j["grid"] = {{"lo", detail::vector_to_json(c.grid.lo)},
                     {"hi", detail::vector_to_json(c.grid.hi)},
                     {"res", std::vector<int>(c.grid.res.data(), c.grid.res.data() + c.grid.res.size())}};
    }
    if (c.mesh_kind == MeshKind::Explicit) j["explicit_mesh"] = detail::matrix_to_json(c.explicit_mesh);
    j["tol_projgrad"] = c.tol_projgrad;
    j["max_iters"] = c.max_iters;
    j["density_floor"] = c.density_floor;
    j["lambda2_floor"] = c.lambda2_floor;
    j["step_rule"] = c.step_rule == StepRule::MeanShift ? "mean-shift" : "fixed";
    j["fixed_step_eta"] = c.fixed_step_eta;
    j["merge_radius"] = c.merge_radius;
    return j;
}

inline FinderConfig finder_config_from_json(const nlohmann::json& j) {
    FinderConfig c;
    const std::string mesh = j.value("mesh", "from-sample");
    if (mesh == "from-sample") c.mesh_kind = MeshKind::FromSample;
    else if (mesh == "grid") c.mesh_kind = MeshKind::Grid;
    else if (mesh == "explicit") c.mesh_kind = MeshKind::Explicit;
    else throw input_error("unknown mesh kind: " + mesh);
    if (c.mesh_kind == MeshKind::Grid) {
        const auto& g = j.at("grid");
        c.grid.lo = detail::vector_from_json(g.at("lo"));
        c.grid.hi = detail::vector_from_json(g.at("hi"));
        const auto res = g.at("res").get<std::vector<int>>();
        c.grid.res = Eigen::Map<const Eigen::VectorXi>(res.data(), static_cast<Eigen::Index>(res.size()));
    }
    if (c.mesh_kind == MeshKind::Explicit)
        c.explicit_mesh = detail::matrix_from_json(j.at("explicit_mesh"));
    c.tol_projgrad = j.value("tol_projgrad", c.tol_projgrad);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.density_floor = j.value("density_floor", c.density_floor);
    c.lambda2_floor = j.value("lambda2_floor", c.lambda2_floor);
    const std::string rule = j.value("step_rule", "mean-shift");
    c.step_rule = rule == "fixed" ? StepRule::FixedStep : StepRule::MeanShift;
    c.fixed_step_eta = j.value("fixed_step_eta", c.fixed_step_eta);
    c.merge_radius = j.value("merge_radius", c.merge_radius);
    return c;
}

/// ridge.csv: one row per ridge point; location columns, eigenvalues,
/// density, tangent components.
inline std::string ridge_set_to_csv(const RidgeSet& rs) {
    if (rs.points.empty()) return "";
    const int d = static_cast<int>(rs.points.front().location.size());
    std::string out;
    for (int a = 0; a < d; ++a) out += "x" + std::to_string(a) + ",";
    out += "lambda1,lambda2,density";
    for (int a = 0; a < d; ++a) out += ",e" + std::to_string(a);
    out += "\n";
    for (const auto& p : rs.points) {
        for (int a = 0; a < d; ++a) out += fmt_double(p.location(a)) + ",";
        out += fmt_double(p.lambda1) + "," + fmt_double(p.lambda2) + "," + fmt_double(p.value);
        for (int a = 0; a < d; ++a) out += "," + fmt_double(p.frame.tangent(a));
        out += "\n";
    }
    return out;
}

/// ridge.json: full frames plus enough context (h, finder config) to reuse
/// the set in downstream commands without recomputation.
inline nlohmann::json ridge_set_to_json(const RidgeSet& rs, double h, const FinderConfig& config) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "ridge_set";
    j["bandwidth"] = h;
    j["finder"] = finder_config_to_json(config);
    j["diagnostics"] = rs.diagnostics.summary();
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : rs.points) {
        nlohmann::json e;
        e["location"] = detail::vector_to_json(p.location);
        e["density"] = p.value;
        e["lambda1"] = p.lambda1;
        e["lambda2"] = p.lambda2;
        e["start_index"] = p.start_index;
        e["iterations"] = p.iterations;
        e["tangent"] = detail::vector_to_json(p.frame.tangent);
        e["M"] = detail::matrix_to_json(p.frame.M);
        e["N"] = detail::matrix_to_json(p.frame.N);
        e["subspace_hessian"] = detail::matrix_to_json(p.frame.subspace_hessian);
        e["W"] = detail::matrix_to_json(p.frame.W);
        pts.push_back(std::move(e));
    }
    j["points"] = std::move(pts);
    return j;
}

struct LoadedRidge {
    RidgeSet set;
    double bandwidth = 0.0;
    FinderConfig finder;
};

inline LoadedRidge load_ridge_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open ridge file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error("invalid ridge JSON: " + std::string(e.what()));
    }
    if (j.value("kind", "") != "ridge_set")
        throw input_error("not a ridge_set file: " + path.string());
    LoadedRidge out;
    out.bandwidth = j.at("bandwidth").get<double>();
    out.finder = finder_config_from_json(j.at("finder"));
    for (const auto& e : j.at("points")) {
        RidgePoint p;
        p.location = detail::vector_from_json(e.at("location"));
        p.value = e.at("density").get<double>();
        p.lambda1 = e.at("lambda1").get<double>();
        p.lambda2 = e.at("lambda2").get<double>();
        p.start_index = e.value("start_index", -1);
        p.iterations = e.value("iterations", 0);
        p.frame.at = p.location;
        p.frame.tangent = detail::vector_from_json(e.at("tangent"));
        p.frame.M = detail::matrix_from_json(e.at("M"));
        p.frame.N = detail::matrix_from_json(e.at("N"));
        p.frame.subspace_hessian = detail::matrix_from_json(e.at("subspace_hessian"));
        p.frame.W = detail::matrix_from_json(e.at("W"));
        out.set.points.push_back(std::move(p));
    }
    if (out.set.points.empty()) throw input_error("ridge file contains no points");
    return out;
}

inline std::string uncertainty_to_csv(const RidgeSet& base, const UncertaintyField& field) {
    const int d = static_cast<int>(base.points.front().location.size());
    std::string out = "index";
    for (int a = 0; a < d; ++a) out += ",x" + std::to_string(a);
    out += ",rho2\n";
    for (std::size_t i = 0; i < field.rho2.size(); ++i) {
        out += std::to_string(i);
        for (int a = 0; a < d; ++a) out += "," + fmt_double(base.points[i].location(a));
        out += "," + fmt_double(field.rho2[i]) + "\n";
    }
    return out;
}

inline nlohmann::json uncertainty_to_json(const UncertaintyField& field, const BootstrapPlan& plan,
                                          double h) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "uncertainty_field";
    j["bandwidth"] = h;
    j["B"] = plan.B;
    j["seed"] = plan.seed;
    j["finder"] = finder_config_to_json(plan.finder);
    j["replicates_used"] = field.replicates_used;
    j["failed_replicates"] = field.failed_replicates;
    j["rho2"] = field.rho2;
    if (field.per_replicate.size() > 0)
        j["per_replicate"] = detail::matrix_to_json(field.per_replicate);
    return j;
}

inline nlohmann::json confidence_set_to_json(const ConfidenceSet& cs, const BootstrapPlan& plan,
                                             double h) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "confidence_set";
    j["bandwidth"] = h;
    j["alpha"] = cs.alpha;
    j["statistic"] = cs.kind == StatisticKind::QuasiHausdorff ? "quasi-hausdorff"
                                                              : "variance-stabilized";
    j["radius"] = cs.radius;
    j["quantile_convention"] = "order statistic ceil(B(1-alpha)) of the sorted distances";
    j["B"] = plan.B;
    j["seed"] = plan.seed;
    j["finder"] = finder_config_to_json(plan.finder);
    j["failed_replicates"] = cs.failed_replicates;
    j["distances"] = cs.distances;
    return j;
}

/// tube.csv: per-ridge-point tube radius (constant for the plain statistic,
/// t * p_hat(x) for the stabilized one).
inline std::string tube_to_csv(const RidgeSet& base, const ConfidenceSet& cs,
                               const KdeModel& model) {
    const int d = static_cast<int>(base.points.front().location.size());
    std::string out = "index";
    for (int a = 0; a < d; ++a) out += ",x" + std::to_string(a);
    out += ",radius\n";
    for (std::size_t i = 0; i < base.points.size(); ++i) {
        const auto& p = base.points[i];
        const double radius = cs.kind == StatisticKind::QuasiHausdorff
                                  ? cs.radius
                                  : cs.radius * model.value(p.location);
        out += std::to_string(i);
        for (int a = 0; a < d; ++a) out += "," + fmt_double(p.location(a));
        out += "," + fmt_double(radius) + "\n";
    }
    return out;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
    nlohmann::json j;
    j["family"] = family_name(sc.family);
    j["n"] = sc.n;
    j["noise_sigma"] = sc.noise_sigma;
    j["seed"] = sc.seed;
    if (sc.family == Family::Circle) j["radius"] = sc.circle_radius;
    if (sc.family == Family::Box) {
        j["side"] = sc.box_side;
        j["corner_radius"] = sc.box_corner_radius;
    }
    if (sc.family == Family::AnisoGaussian)
        j["axes"] = std::vector<double>{sc.gauss_axes(0), sc.gauss_axes(1)};
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario sc;
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "circle") sc.family = Family::Circle;
    else if (fam == "box") sc.family = Family::Box;
    else if (fam == "aniso-gaussian") sc.family = Family::AnisoGaussian;
    else throw input_error("unknown scenario family: '" + fam + "'");
    sc.n = j.at("n").get<int>();
    sc.noise_sigma = j.value("noise_sigma", sc.noise_sigma);
    sc.seed = j.value("seed", std::uint64_t{0});
    sc.circle_radius = j.value("radius", sc.circle_radius);
    sc.box_side = j.value("side", sc.box_side);
    sc.box_corner_radius = j.value("corner_radius", sc.box_corner_radius);
    if (j.contains("axes")) {
        const auto axes = j["axes"].get<std::vector<double>>();
        if (axes.size() != 2) throw input_error("scenario 'axes' must have 2 entries");
        sc.gauss_axes = Eigen::Vector2d(axes[0], axes[1]);
    }
    sc.validate();
    return sc;
}

inline nlohmann::json coverage_report_to_json(const CoverageReport& r) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "coverage_report";
    j["scenario"] = scenario_to_json(r.scenario);
    j["alpha"] = r.alpha;
    j["M"] = r.M;
    j["B"] = r.B;
    j["plan_seed"] = r.plan_seed;
    j["bandwidth"] = r.fixed_h > 0 ? nlohmann::json(r.fixed_h) : nlohmann::json("silverman");
    j["oracle_resolution"] = r.oracle_resolution;
    j["oracle"] = "analytic smoothed density (circle: radial-profile argmax)";
    j["completed_trials"] = r.completed;
    j["empirical_coverage"] = r.empirical_coverage;
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : r.trials) {
        nlohmann::json e;
        e["failed"] = t.failed;
        if (t.failed) e["note"] = t.note;
        e["h"] = t.h;
        e["t_alpha"] = t.t_alpha;
        e["dist_oracle_to_estimate"] = t.dist_oracle_to_estimate;
        e["covered"] = t.covered;
        trials.push_back(std::move(e));
    }
    j["trials"] = std::move(trials);
    return j;
}

inline std::string coverage_report_to_csv(const CoverageReport& r) {
    std::string out = "trial,failed,h,t_alpha,dist_oracle_to_estimate,covered\n";
    for (std::size_t i = 0; i < r.trials.size(); ++i) {
        const auto& t = r.trials[i];
        out += std::to_string(i) + "," + (t.failed ? "1" : "0") + "," + fmt_double(t.h) + "," +
               fmt_double(t.t_alpha) + "," + fmt_double(t.dist_oracle_to_estimate) + "," +
               (t.covered ? "1" : "0") + "\n";
    }
    return out;
}

inline nlohmann::json lu2_report_to_json(const Lu2Report& r) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "lu2_report";
    j["h"] = r.h;
    j["n"] = r.n;
    j["M"] = r.M;
    j["median_cosine"] = r.median_cosine;
    j["median_rel_err"] = r.median_rel_err;
    j["median_abs_cos_tangent"] = r.median_abs_cos_tangent;
    j["median_trace_rel_err"] = r.median_trace_rel_err;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : r.points) {
        nlohmann::json e;
        e["at"] = detail::vector_to_json(p.at);
        e["trace_sigma"] = p.trace_sigma;
        e["mc_mean_sq_dist"] = p.mc_mean_sq_dist;
        e["trace_rel_err"] = p.trace_rel_err;
        pts.push_back(std::move(e));
    }
    j["points"] = std::move(pts);
    return j;
}

/// Every output directory gets exactly one manifest: command, fully resolved
/// configuration, seeds, tool version and input digests. Rerunning the
/// command it records reproduces the run bit for bit (the timestamp is the
/// only non-reproducible field).
inline nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                                    const std::vector<std::pair<std::string, std::string>>& input_digests) {
    nlohmann::json j;
    j["tool"] = "ridgescan";
    j["tool_version"] = kToolVersion;
    j["format_version"] = kFormatVersion;
    j["command"] = command;
    j["config"] = config;
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& [path, digest] : input_digests)
        inputs.push_back({{"path", path}, {"sha256", digest}});
    j["inputs"] = std::move(inputs);
    const auto now = std::chrono::system_clock::now();
    j["timestamp_utc"] =
        static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                      now.time_since_epoch())
                                      .count());
    return j;
}

} // namespace ridgescan
