// ridgescan: density-ridge estimation from point clouds with bootstrap
// uncertainty. Subcommands: ridge, uncertainty, confset, simulate.
// Every run writes its outputs plus a manifest.json into the output
// directory; rerunning the manifest's command reproduces the run (the
// timestamp is the only field that changes).
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage/config error, 3 empty ridge.

#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "ridgescan/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ridgescan;

namespace {

struct CommonOpts {
    std::string input;
    std::string outdir;
    std::string format = "auto";
    bool header = false;
    double h = 0.0;  // 0 -> Silverman
    bool silverman = false;
    double tol = 1e-6;
    int max_iters = 500;
    double density_floor = 0.05;
    double lambda2_floor = 0.0;
    std::string grid;  // "x0,x1,y0,y1,res"
    std::string mesh = "from-sample";
    double merge_radius = 0.0;
    int threads = 0;  // 0 -> hardware concurrency
};

void add_input_flags(CLI::App* cmd, CommonOpts& o) {
    // --h is the bandwidth flag, so help lives on --help only
    cmd->set_help_flag("--help", "print help");
    cmd->add_option("input", o.input, "input point cloud (CSV rows or JSON array-of-arrays)")
        ->required();
    cmd->add_option("-o,--out", o.outdir, "output directory")->required();
    cmd->add_option("--format", o.format, "input format")
        ->check(CLI::IsMember({"auto", "csv", "json"}))
        ->capture_default_str();
    cmd->add_flag("--header", o.header, "CSV input has a header row");
}

void add_finder_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--h", o.h, "bandwidth (must be > 0)");
    cmd->add_flag("--silverman", o.silverman, "use Silverman's rule (default when --h absent)");
    cmd->add_option("--tol", o.tol, "relative projected-gradient stopping tolerance")
        ->capture_default_str();
    cmd->add_option("--max-iters", o.max_iters, "iteration cap per start point")
        ->capture_default_str();
    cmd->add_option("--density-floor", o.density_floor,
                    "keep points with density >= floor * max (0 disables)")
        ->capture_default_str();
    cmd->add_option("--lambda2-floor", o.lambda2_floor,
                    "keep points with |lambda2| >= floor * max |lambda2| (0 disables)")
        ->capture_default_str();
    cmd->add_option("--grid", o.grid, "start mesh as a grid: x0,x1,y0,y1,res");
    cmd->add_option("--mesh", o.mesh, "start mesh source")
        ->check(CLI::IsMember({"from-sample", "grid"}))
        ->capture_default_str();
    cmd->add_option("--merge-radius", o.merge_radius,
                    "presentation-only dedup radius for converged points")
        ->capture_default_str();
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)")
        ->capture_default_str();
}

std::uint64_t parse_seed(const std::string& s) {
    if (s == "random") {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw input_error("--seed must be an unsigned integer or 'random'");
    return v;
}

SampleFormat parse_format(const std::string& f) {
    if (f == "csv") return SampleFormat::Csv;
    if (f == "json") return SampleFormat::Json;
    return SampleFormat::Auto;
}

FinderConfig make_finder(const CommonOpts& o, int dim) {
    FinderConfig cfg;
    cfg.tol_projgrad = o.tol;
    cfg.max_iters = o.max_iters;
    cfg.density_floor = o.density_floor;
    cfg.lambda2_floor = o.lambda2_floor;
    cfg.merge_radius = o.merge_radius;
    cfg.threads = o.threads;
    if (o.mesh == "grid" || !o.grid.empty()) {
        if (o.grid.empty()) throw input_error("--mesh grid requires --grid x0,x1,y0,y1,res");
        if (dim != 2) throw input_error("--grid currently supports d=2 inputs only");
        std::vector<double> vals;
        std::size_t pos = 0;
        while (pos <= o.grid.size()) {
            const std::size_t comma = o.grid.find(',', pos);
            const std::string tok =
                o.grid.substr(pos, (comma == std::string::npos ? o.grid.size() : comma) - pos);
            double v = 0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || p != tok.data() + tok.size())
                throw input_error("bad --grid component: '" + tok + "'");
            vals.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (vals.size() != 5) throw input_error("--grid needs exactly 5 values: x0,x1,y0,y1,res");
        const int res = static_cast<int>(vals[4]);
        if (res < 1 || vals[4] != res) throw input_error("--grid res must be a positive integer");
        cfg.mesh_kind = MeshKind::Grid;
        cfg.grid.lo = Eigen::Vector2d(vals[0], vals[2]);
        cfg.grid.hi = Eigen::Vector2d(vals[1], vals[3]);
        cfg.grid.res = Eigen::Vector2i(res, res);
    }
    cfg.validate();
    return cfg;
}

double resolve_bandwidth(const CommonOpts& o, const Sample& sample, bool h_given) {
    if (h_given) {
        if (!(o.h > 0.0)) throw input_error("--h must be > 0");
        return o.h;
    }
    return silverman_bandwidth(sample);
}

json common_config_json(const CommonOpts& o, double h, const FinderConfig& cfg) {
    json c;
    c["input"] = o.input;
    c["format"] = o.format;
    c["header"] = o.header;
    c["bandwidth"] = h;
    c["bandwidth_rule"] = o.h > 0.0 ? "fixed" : "silverman";
    c["finder"] = finder_config_to_json(cfg);
    c["threads"] = o.threads;
    return c;
}

void write_outputs(const fs::path& dir, const std::string& command, const json& config,
                   const std::vector<std::pair<std::string, std::string>>& digests,
                   const std::vector<std::pair<std::string, std::string>>& files) {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) write_text_file(dir / name, content);
    write_text_file(dir / "manifest.json", make_manifest(command, config, digests).dump(2) + "\n");
}

struct RidgeInputs {
    Sample sample;
    double h;
    FinderConfig finder;
    RidgeSet base;
};

/// Shared front half of uncertainty/confset: either reuse a previous
/// ridge.json (sample must be the same data) or recompute from flags.
RidgeInputs prepare_base(const CommonOpts& o, bool h_given, const std::string& ridge_path) {
    Sample sample = load_sample(o.input, parse_format(o.format), o.header);
    if (!ridge_path.empty()) {
        LoadedRidge loaded = load_ridge_json(ridge_path);
        return {std::move(sample), loaded.bandwidth, std::move(loaded.finder),
                std::move(loaded.set)};
    }
    const double h = resolve_bandwidth(o, sample, h_given);
    FinderConfig cfg = make_finder(o, static_cast<int>(sample.dim()));
    KdeModel model(sample, h);
    RidgeSet base = find_ridge(model, cfg);
    return {std::move(sample), h, std::move(cfg), std::move(base)};
}

int cmd_ridge(const CommonOpts& o, bool h_given) {
    Sample sample = load_sample(o.input, parse_format(o.format), o.header);
    const double h = resolve_bandwidth(o, sample, h_given);
    FinderConfig cfg = make_finder(o, static_cast<int>(sample.dim()));
    KdeModel model(sample, h);
    RidgeSet ridge = find_ridge(model, cfg);

    json config = common_config_json(o, h, cfg);
    write_outputs(o.outdir, "ridge", config, {{o.input, sha256_file(o.input)}},
                  {{"ridge.csv", ridge_set_to_csv(ridge)},
                   {"ridge.json", ridge_set_to_json(ridge, h, cfg).dump(2) + "\n"}});
    std::cout << "ridge: " << ridge.size() << " points (" << ridge.diagnostics.summary()
              << ") -> " << o.outdir << "\n";
    return 0;
}

int cmd_uncertainty(const CommonOpts& o, bool h_given, const std::string& ridge_path,
                    int B, const std::string& seed_str, bool keep_replicates) {
    RidgeInputs in = prepare_base(o, h_given, ridge_path);
    BootstrapPlan plan;
    plan.B = B;
    plan.seed = parse_seed(seed_str);
    plan.finder = in.finder;
    plan.threads = o.threads;
    plan.keep_replicate_distances = keep_replicates;
    UncertaintyField field = local_uncertainty(in.sample, in.h, in.base, plan);

    json config = common_config_json(o, in.h, in.finder);
    config["B"] = plan.B;
    config["seed"] = plan.seed;
    config["ridge_file"] = ridge_path;
    write_outputs(o.outdir, "uncertainty", config, {{o.input, sha256_file(o.input)}},
                  {{"uncertainty.csv", uncertainty_to_csv(in.base, field)},
                   {"uncertainty.json", uncertainty_to_json(field, plan, in.h).dump(2) + "\n"}});
    std::cout << "uncertainty: " << field.replicates_used << "/" << plan.B
              << " replicates -> " << o.outdir << "\n";
    return 0;
}

int cmd_confset(const CommonOpts& o, bool h_given, const std::string& ridge_path, int B,
                const std::string& seed_str, double alpha, const std::string& statistic) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("--alpha must be in (0, 1)");
    RidgeInputs in = prepare_base(o, h_given, ridge_path);
    BootstrapPlan plan;
    plan.B = B;
    plan.seed = parse_seed(seed_str);
    plan.finder = in.finder;
    plan.threads = o.threads;
    const StatisticKind kind = statistic == "stabilized" ? StatisticKind::VarianceStabilized
                                                         : StatisticKind::QuasiHausdorff;
    ConfidenceSet cs = confidence_set(in.sample, in.h, in.base, plan, alpha, kind);
    KdeModel model(in.sample, in.h);

    json config = common_config_json(o, in.h, in.finder);
    config["B"] = plan.B;
    config["seed"] = plan.seed;
    config["alpha"] = alpha;
    config["statistic"] = statistic;
    config["ridge_file"] = ridge_path;
    write_outputs(o.outdir, "confset", config, {{o.input, sha256_file(o.input)}},
                  {{"confset.json", confidence_set_to_json(cs, plan, in.h).dump(2) + "\n"},
                   {"tube.csv", tube_to_csv(in.base, cs, model)}});
    std::cout << "confset: radius " << fmt_double(cs.radius) << " at alpha " << alpha << " -> "
              << o.outdir << "\n";
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& outdir, int threads) {
    std::ifstream in(config_path);
    if (!in) throw input_error("cannot open config: " + config_path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw input_error("malformed config JSON: " + std::string(e.what()));
    }

    auto field_error = [&](const char* field, const char* why) {
        throw input_error(std::string("config field '") + field + "': " + why);
    };
    if (!cfg.contains("mode")) field_error("mode", "missing (expected 'coverage' or 'lu2')");
    const std::string mode = cfg["mode"].get<std::string>();
    if (!cfg.contains("scenario")) field_error("scenario", "missing");
    Scenario sc = scenario_from_json(cfg["scenario"]);

    FinderConfig finder;
    if (cfg.contains("finder")) finder = finder_config_from_json(cfg["finder"]);
    double fixed_h = 0.0;
    if (cfg.contains("h") && cfg["h"].is_number()) {
        fixed_h = cfg["h"].get<double>();
        if (!(fixed_h > 0.0)) field_error("h", "must be > 0 or the string 'silverman'");
    }

    fs::create_directories(outdir);
    json manifest_cfg = cfg;
    std::vector<std::pair<std::string, std::string>> digests{
        {config_path, sha256_file(config_path)}};

    if (mode == "coverage") {
        const double alpha = cfg.value("alpha", 0.1);
        const int M = cfg.value("M", 100);
        BootstrapPlan plan;
        plan.B = cfg.value("B", 300);
        plan.seed = cfg.value("plan_seed", std::uint64_t{1});
        plan.finder = finder;
        CoverageReport rep = run_coverage(sc, alpha, M, plan, fixed_h,
                                          cfg.value("oracle_resolution", 1024), threads);
        write_outputs(outdir, "simulate", manifest_cfg, digests,
                      {{"coverage.json", coverage_report_to_json(rep).dump(2) + "\n"},
                       {"coverage.csv", coverage_report_to_csv(rep)}});
        std::cout << "coverage: " << rep.empirical_coverage << " over " << rep.completed
                  << " trials -> " << outdir << "\n";
        return 0;
    }
    if (mode == "lu2") {
        const int M = cfg.value("M", 50);
        const int n = cfg.value("lu2_n", sc.n);
        double h = fixed_h;
        if (h <= 0.0) {
            Scenario pilot = sc;
            pilot.n = n;
            h = silverman_bandwidth(generate(pilot));
        }
        Lu2Report rep = check_lu2(sc, n, h, M, finder, cfg.value("oracle_resolution", 256),
                                  cfg.value("sigma_sample_n", 200000), threads);
        write_outputs(outdir, "simulate", manifest_cfg, digests,
                      {{"lu2.json", lu2_report_to_json(rep).dump(2) + "\n"}});
        std::cout << "lu2: median cosine " << rep.median_cosine << ", median trace rel err "
                  << rep.median_trace_rel_err << " -> " << outdir << "\n";
        return 0;
    }
    field_error("mode", "must be 'coverage' or 'lu2'");
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"density ridge estimation with bootstrap confidence sets"};
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);

    CommonOpts ridge_o, unc_o, conf_o;
    std::string unc_ridge, conf_ridge;
    int unc_B = 200, conf_B = 300;
    std::string unc_seed = "0", conf_seed = "0";
    bool unc_keep = false;
    double conf_alpha = 0.1;
    std::string conf_statistic = "plain";
    std::string sim_config, sim_out;
    int sim_threads = 0;

    CLI::App* ridge = app.add_subcommand("ridge", "estimate the density ridge of a point cloud");
    add_input_flags(ridge, ridge_o);
    add_finder_flags(ridge, ridge_o);

    CLI::App* unc = app.add_subcommand("uncertainty",
                                       "bootstrap local uncertainty rho^2 along the ridge");
    add_input_flags(unc, unc_o);
    add_finder_flags(unc, unc_o);
    unc->add_option("--ridge", unc_ridge, "reuse a previous ridge.json instead of recomputing");
    unc->add_option("--B", unc_B, "bootstrap replicates")->capture_default_str();
    unc->add_option("--seed", unc_seed, "root seed (integer or 'random')")->capture_default_str();
    unc->add_flag("--keep-replicates", unc_keep, "retain the B x |ridge| distance matrix");

    CLI::App* conf = app.add_subcommand("confset", "bootstrap confidence set for the smoothed ridge");
    add_input_flags(conf, conf_o);
    add_finder_flags(conf, conf_o);
    conf->add_option("--ridge", conf_ridge, "reuse a previous ridge.json instead of recomputing");
    conf->add_option("--B", conf_B, "bootstrap replicates")->capture_default_str();
    conf->add_option("--seed", conf_seed, "root seed (integer or 'random')")->capture_default_str();
    conf->add_option("--alpha", conf_alpha, "miscoverage level in (0,1)")->capture_default_str();
    conf->add_option("--statistic", conf_statistic, "tube statistic")
        ->check(CLI::IsMember({"plain", "stabilized"}))
        ->capture_default_str();

    CLI::App* sim = app.add_subcommand("simulate", "run a coverage / local-uncertainty study");
    sim->set_help_flag("--help", "print help");
    sim->add_option("config", sim_config, "JSON study configuration")->required();
    sim->add_option("-o,--out", sim_out, "output directory")->required();
    sim->add_option("--threads", sim_threads, "worker threads (0 = all cores)")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (ridge->parsed()) return cmd_ridge(ridge_o, ridge->count("--h") > 0);
        if (unc->parsed())
            return cmd_uncertainty(unc_o, unc->count("--h") > 0, unc_ridge, unc_B, unc_seed,
                                   unc_keep);
        if (conf->parsed())
            return cmd_confset(conf_o, conf->count("--h") > 0, conf_ridge, conf_B, conf_seed,
                               conf_alpha, conf_statistic);
        if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_threads);
    } catch (const empty_ridge_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
