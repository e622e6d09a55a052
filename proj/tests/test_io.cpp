#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <filesystem>

#include "ridgescan/io.hpp"
#include "test_helpers.hpp"

using namespace ridgescan;
using Catch::Approx;
namespace fs = std::filesystem;

TEST_CASE("fmt_double is shortest round-trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.30000000000000004, 0.0}) {
        const std::string s = fmt_double(v);
        double back = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(ec == std::errc{});
        CHECK(back == v);
    }
}

TEST_CASE("ridge set serializes to csv and json and loads back") {
    Sample s = testutil::circle_sample(200, 50);
    const double h = silverman_bandwidth(s);
    KdeModel m(s, h);
    FinderConfig cfg;
    cfg.threads = 2;
    const RidgeSet ridge = find_ridge(m, cfg);

    const std::string csv = ridge_set_to_csv(ridge);
    CHECK(csv.rfind("x0,x1,lambda1,lambda2,density,e0,e1\n", 0) == 0);
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == ridge.size() + 1);

    const nlohmann::json j = ridge_set_to_json(ridge, h, cfg);
    const fs::path p = fs::temp_directory_path() / "ridgescan_ridge.json";
    write_text_file(p, j.dump(2));
    const LoadedRidge loaded = load_ridge_json(p);
    CHECK(loaded.bandwidth == h);
    REQUIRE(loaded.set.size() == ridge.size());
    for (std::size_t i = 0; i < ridge.points.size(); ++i) {
        CHECK((loaded.set.points[i].location.array() == ridge.points[i].location.array()).all());
        CHECK((loaded.set.points[i].frame.W.array() == ridge.points[i].frame.W.array()).all());
        CHECK(loaded.set.points[i].value == ridge.points[i].value);
    }
}

TEST_CASE("finder config json round-trip") {
    FinderConfig cfg;
    cfg.mesh_kind = MeshKind::Grid;
    cfg.grid.lo = Eigen::Vector2d(-4, -3);
    cfg.grid.hi = Eigen::Vector2d(4, 3);
    cfg.grid.res = Eigen::Vector2i(17, 13);
    cfg.tol_projgrad = 1e-7;
    cfg.max_iters = 123;
    cfg.density_floor = 0.02;
    cfg.step_rule = StepRule::FixedStep;
    cfg.fixed_step_eta = 0.4;
    cfg.merge_radius = 0.05;

    const FinderConfig back = finder_config_from_json(finder_config_to_json(cfg));
    CHECK(back.mesh_kind == MeshKind::Grid);
    CHECK(back.grid.lo == cfg.grid.lo);
    CHECK(back.grid.res == cfg.grid.res);
    CHECK(back.tol_projgrad == cfg.tol_projgrad);
    CHECK(back.max_iters == cfg.max_iters);
    CHECK(back.density_floor == cfg.density_floor);
    CHECK(back.step_rule == StepRule::FixedStep);
    CHECK(back.fixed_step_eta == cfg.fixed_step_eta);
    CHECK(back.merge_radius == cfg.merge_radius);
}

TEST_CASE("scenario json round-trip and unknown family") {
    Scenario sc;
    sc.family = Family::AnisoGaussian;
    sc.n = 777;
    sc.noise_sigma = 0.2;
    sc.seed = 99;
    sc.gauss_axes = Eigen::Vector2d(2.5, 0.5);
    const Scenario back = scenario_from_json(scenario_to_json(sc));
    CHECK(back.family == Family::AnisoGaussian);
    CHECK(back.n == 777);
    CHECK(back.seed == 99);
    CHECK(back.gauss_axes == sc.gauss_axes);

    nlohmann::json bad = {{"family", "pretzel"}, {"n", 10}};
    CHECK_THROWS_AS(scenario_from_json(bad), input_error);
}

TEST_CASE("manifest carries command, config, digests and version") {
    const fs::path p = fs::temp_directory_path() / "ridgescan_digest.bin";
    write_text_file(p, "abc");
    const std::string digest = sha256_file(p);
    CHECK(digest == sha256_hex("abc"));

    const nlohmann::json m =
        make_manifest("ridge", {{"bandwidth", 0.5}}, {{p.string(), digest}});
    CHECK(m.at("tool") == "ridgescan");
    CHECK(m.at("command") == "ridge");
    CHECK(m.at("config").at("bandwidth") == 0.5);
    CHECK(m.at("inputs")[0].at("sha256") == digest);
    CHECK(m.contains("timestamp_utc"));
    CHECK(m.at("tool_version") == kToolVersion);
}

TEST_CASE("uncertainty and confidence-set serialization") {
    Sample s = testutil::circle_sample(150, 60);
    const double h = silverman_bandwidth(s);
    KdeModel m(s, h);
    BootstrapPlan plan;
    plan.B = 10;
    plan.seed = 1;
    plan.threads = 2;
    const RidgeSet base = find_ridge(m, plan.finder);
    const UncertaintyField field = local_uncertainty(s, h, base, plan);
    const ConfidenceSet cs = confidence_set(s, h, base, plan, 0.1);

    const std::string ucsv = uncertainty_to_csv(base, field);
    CHECK(std::count(ucsv.begin(), ucsv.end(), '\n') == base.size() + 1);
    const nlohmann::json uj = uncertainty_to_json(field, plan, h);
    CHECK(uj.at("B") == 10);
    CHECK(uj.at("rho2").size() == static_cast<std::size_t>(base.size()));

    const nlohmann::json cj = confidence_set_to_json(cs, plan, h);
    CHECK(cj.at("radius").get<double>() == cs.radius);
    CHECK(cj.at("distances").size() == cs.distances.size());
    CHECK(cj.at("statistic") == "quasi-hausdorff");

    const std::string tube = tube_to_csv(base, cs, m);
    CHECK(std::count(tube.begin(), tube.end(), '\n') == base.size() + 1);
    // plain statistic: constant radius per row
    const auto second_line = tube.substr(tube.find('\n') + 1);
    CHECK(second_line.find(fmt_double(cs.radius)) != std::string::npos);
}

TEST_CASE("coverage report serialization") {
    Scenario sc;
    sc.n = 100;
    sc.seed = 2;
    BootstrapPlan plan;
    plan.B = 12;
    const CoverageReport rep = run_coverage(sc, 0.1, 2, plan, 0.55, 128, 2);
    const nlohmann::json j = coverage_report_to_json(rep);
    CHECK(j.at("kind") == "coverage_report");
    CHECK(j.at("trials").size() == 2);
    const std::string csv = coverage_report_to_csv(rep);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
