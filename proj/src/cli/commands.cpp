#include "quilt/cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "quilt/eval/eval.hpp"
#include "quilt/io/io.hpp"
#include "quilt/lrgq/lrgq.hpp"
#include "quilt/madgq/madgq.hpp"

namespace quilt::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

RankStatistic parse_statistic(const std::string& s) {
    if (s == "rho") return RankStatistic::rho;
    if (s == "tau") return RankStatistic::tau;
    throw ValidationError("statistic must be 'rho' or 'tau', got '" + s + "'");
}

GraphSpec parse_graph(const json& g) {
    io::require_keys(g, {"type", "neighbors", "rewire_prob", "clique_size",
                         "edge_weight_lo", "edge_weight_hi", "diagonal_boost"},
                     "graph");
    GraphSpec spec;
    const std::string type = g.value("type", "small_world");
    if (type == "small_world")
        spec.structure = GraphStructure::small_world;
    else if (type == "chain")
        spec.structure = GraphStructure::chain;
    else if (type == "block_diagonal")
        spec.structure = GraphStructure::block_diagonal;
    else
        throw ValidationError("graph.type: unknown structure '" + type + "'");
    spec.neighbors = g.value("neighbors", spec.neighbors);
    spec.rewire_prob = g.value("rewire_prob", spec.rewire_prob);
    spec.clique_size = g.value("clique_size", spec.clique_size);
    spec.edge_weight_range.first = g.value("edge_weight_lo", spec.edge_weight_range.first);
    spec.edge_weight_range.second =
        g.value("edge_weight_hi", spec.edge_weight_range.second);
    spec.diagonal_boost = g.value("diagonal_boost", spec.diagonal_boost);
    return spec;
}

MarginalSpec parse_marginal(const json& m) {
    io::require_keys(m, {"family", "shape", "scale", "location"}, "marginal");
    const std::string family = m.value("family", "gaussian");
    if (family == "gaussian") return MarginalSpec::gaussian();
    if (family == "gamma")
        return MarginalSpec::gamma(m.value("shape", 5.0), m.value("scale", 1.0));
    if (family == "cauchy")
        return MarginalSpec::cauchy(m.value("location", 0.0), m.value("scale", 3.0));
    throw ValidationError("marginal.family: unknown family '" + family + "'");
}

ScenarioConfig parse_scenario(const json& s, const Overrides& overrides) {
    io::require_keys(s, {"id", "p", "K", "o", "n", "graph", "spiked", "marginal",
                         "statistic", "draw"},
                     "scenario");
    ScenarioConfig config;
    config.id = s.value("id", config.id);
    config.p = s.value("p", config.p);
    config.K = s.value("K", config.K);
    config.o = s.value("o", config.o);
    config.n = s.value("n", config.n);
    if (s.contains("graph")) config.graph = parse_graph(s.at("graph"));
    if (s.contains("spiked")) {
        const json& sp = s.at("spiked");
        io::require_keys(sp, {"rank", "q", "spike_to_floor_ratio", "eigen_gap_factor",
                              "gap", "cluster_size", "lmin_floor", "min_recovery_f1",
                              "max_retries"},
                         "spiked");
        config.spiked = true;
        SpikedSpec& spec = config.spiked_spec;
        spec.rank = sp.value("rank", spec.rank);
        spec.q = sp.value("q", spec.q);
        spec.spike_to_floor_ratio =
            sp.value("spike_to_floor_ratio", spec.spike_to_floor_ratio);
        spec.eigen_gap_factor = sp.value("eigen_gap_factor", spec.eigen_gap_factor);
        spec.gap = sp.value("gap", spec.gap);
        spec.cluster_size = sp.value("cluster_size", spec.cluster_size);
        spec.lmin_floor = sp.value("lmin_floor", spec.lmin_floor);
        spec.min_recovery_f1 = sp.value("min_recovery_f1", spec.min_recovery_f1);
        spec.max_retries = sp.value("max_retries", spec.max_retries);
        if (s.contains("graph")) spec.base = config.graph;
    }
    if (s.contains("marginal")) config.marginal = parse_marginal(s.at("marginal"));
    std::string stat = s.value("statistic", "rho");
    if (overrides.statistic) stat = *overrides.statistic;
    config.statistic = parse_statistic(stat);
    const std::string draw = s.value("draw", "independent");
    if (draw == "independent")
        config.draw = DrawMode::independent_blocks;
    else if (draw == "shared")
        config.draw = DrawMode::shared_sample;
    else
        throw ValidationError("scenario.draw: 'independent' or 'shared'");
    return config;
}

std::string out_path(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

std::uint64_t pick_seed(const json& config, const Overrides& overrides) {
    std::uint64_t seed = config.value("seed", 0ULL);
    if (overrides.seed) seed = *overrides.seed;
    return seed;
}

std::string pick_out_dir(const json& config, const Overrides& overrides) {
    std::string dir = config.value("out_dir", ".");
    if (overrides.out_dir) dir = *overrides.out_dir;
    return dir;
}

std::vector<std::string> block_column_names(const BlockDesign& design, int k) {
    std::vector<std::string> names;
    for (int idx : design.block(k)) names.push_back("v" + std::to_string(idx + 1));
    return names;
}

struct LambdaChoice {
    double lambda = 0.0;
    bool from_grid = false;
    double criterion = 0.0;
};

// Uniform-lambda selection by eBIC over a grid (estimate mode).
LambdaChoice choose_lambda(const json& section, const Matrix& sigma_input,
                           const std::optional<std::vector<std::pair<int, int>>>& constraint,
                           int p, double n_effective) {
    LambdaChoice choice;
    if (section.contains("lambda")) {
        choice.lambda = section.at("lambda").get<double>();
        return choice;
    }
    std::vector<double> grid = section.value("lambda_grid", default_lambda_grid());
    if (grid.empty()) throw ValidationError("lambda_grid must not be empty");
    choice.from_grid = true;
    bool have = false;
    Matrix warm;
    for (double lam : grid) {
        SolverOptions options;
        options.tolerance = 1e-5;
        options.kkt_target = 1e-5;
        options.zero_constraint = constraint;
        if (warm.size() > 0) options.theta_init = &warm;
        try {
            GlassoResult sol = solve(sigma_input, PenaltyMatrix::uniform(p, lam), options);
            warm = sol.est.theta;
            const double crit = ebic(sigma_input, sol.est, n_effective,
                                     section.value("ebic_gamma", 0.5));
            if (!have || crit < choice.criterion) {
                have = true;
                choice.criterion = crit;
                choice.lambda = lam;
            }
        } catch (const NumericalError&) {
            continue;
        }
    }
    if (!have) throw NumericalError("lambda selection: every grid value failed");
    return choice;
}

}  // namespace

void cmd_simulate(const std::string& config_path, const Overrides& overrides) {
    const json config = io::load_json(config_path);
    io::require_keys(config, {"scenario", "seed", "out_dir"}, config_path);
    if (!config.contains("scenario"))
        throw ValidationError(config_path + ": missing 'scenario'");
    const ScenarioConfig scenario = parse_scenario(config.at("scenario"), overrides);
    const std::uint64_t seed = pick_seed(config, overrides);
    const std::string dir = pick_out_dir(config, overrides);

    const ScenarioData data = simulate_scenario(scenario, seed);

    std::vector<std::string> outputs;
    const std::string design_path = out_path(dir, "design.json");
    io::write_design_json(design_path, data.design);
    outputs.push_back(design_path);
    for (int k = 0; k < data.design.num_blocks(); ++k) {
        const std::string path = out_path(dir, "block_" + std::to_string(k + 1) + ".csv");
        io::write_matrix_csv(path, data.block_data[k],
                             block_column_names(data.design, k));
        outputs.push_back(path);
    }
    const std::string truth_path = out_path(dir, "truth_edges.csv");
    io::write_edges_csv(truth_path, data.truth);
    outputs.push_back(truth_path);
    const std::string mask_path = out_path(dir, "mask.csv");
    io::write_mask_csv(mask_path, induced_pair_set(data.design));
    outputs.push_back(mask_path);
    const std::string sigma_path = out_path(dir, "sigma_true.csv");
    io::write_matrix_csv(sigma_path, data.sigma_corr);
    outputs.push_back(sigma_path);

    io::write_manifest(out_path(dir, "manifest.json"), "simulate",
                       io::file_hash(config_path), seed, outputs);
}

void cmd_estimate(const std::string& config_path, const Overrides& overrides) {
    const json config = io::load_json(config_path);
    io::require_keys(config,
                     {"design_file", "block_files", "statistic", "method", "seed",
                      "out_dir", "madgq", "bsvd", "zero"},
                     config_path);
    for (const char* key : {"design_file", "block_files"})
        if (!config.contains(key))
            throw ValidationError(config_path + ": missing '" + std::string(key) + "'");

    const BlockDesign design = io::read_design_json(config.at("design_file"));
    const std::vector<std::string> block_files =
        config.at("block_files").get<std::vector<std::string>>();
    if (static_cast<int>(block_files.size()) != design.num_blocks())
        throw ValidationError("estimate: one block file per design block required");
    std::vector<Matrix> block_data;
    for (int k = 0; k < design.num_blocks(); ++k) {
        io::CsvMatrix csv = io::read_matrix_csv(block_files[k]);
        if (csv.values.rows() != design.sample_size(k))
            throw ValidationError(block_files[k] + ": row count disagrees with design");
        block_data.push_back(std::move(csv.values));
    }

    std::string stat_name = config.value("statistic", "rho");
    if (overrides.statistic) stat_name = *overrides.statistic;
    const RankStatistic statistic = parse_statistic(stat_name);
    std::string method_str = config.value("method", "madgq-npn");
    if (overrides.method) method_str = *overrides.method;
    const std::optional<Method> method = method_from_name(method_str);
    if (!method) throw ValidationError("estimate: unknown method '" + method_str + "'");
    const std::uint64_t seed = pick_seed(config, overrides);
    const std::string dir = pick_out_dir(config, overrides);

    const MaskedCorrelation masked = rank_correlation(design, block_data, statistic);
    const MaskedCorrelation repaired = psd_repair(masked, design, 1e-4);
    const double n_effective = design.min_sample_size();
    const int p = design.p();

    json selected;
    selected["method"] = method_str;
    selected["statistic"] = stat_name;
    std::vector<std::string> outputs;
    EdgeSet edges(p);
    Matrix theta;

    if (*method == Method::madgq_npn) {
        const json section = config.value("madgq", json::object());
        io::require_keys(section,
                         {"lambda", "lambda_grid", "ebic_gamma", "tau1", "tau2", "c",
                          "stability"},
                         "madgq");
        const auto constraint = zero_constraint_from_mask(repaired.mask());
        const LambdaChoice lambda =
            choose_lambda(section, repaired.values(), constraint, p, n_effective);

        MadgqThresholds thresholds;
        thresholds.c = section.value("c", 0.05);
        thresholds.tau2 = section.contains("tau2")
                              ? section.at("tau2").get<double>()
                              : MadgqThresholds::default_tau2(p, design.min_sample_size(),
                                                              thresholds.c);
        if (section.contains("tau1")) {
            thresholds.tau1 = section.at("tau1").get<double>();
            selected["tau1_rule"] = "fixed";
        } else {
            // Stability selection over a tau1 grid at the chosen lambda.
            const json stab = section.value("stability", json::object());
            io::require_keys(stab, {"subsample_fraction", "n_subsamples", "threshold"},
                             "stability");
            SolverOptions options;
            options.tolerance = 1e-5;
            options.kkt_target = 1e-5;
            options.zero_constraint = constraint;
            const GlassoResult full =
                solve(repaired.values(), PenaltyMatrix::uniform(p, lambda.lambda), options);
            std::vector<double> grid;
            {
                std::vector<double> mags;
                for (int i = 0; i < p; ++i)
                    for (int j = i + 1; j < p; ++j)
                        if (repaired.mask().observed(i, j)) {
                            const double x = std::fabs(full.est.theta(i, j));
                            if (x > thresholds.tau2) mags.push_back(x);
                        }
                std::sort(mags.begin(), mags.end(), std::greater<>());
                for (std::size_t i = 0; i < mags.size() && grid.size() < 12; i += 1 + mags.size() / 12)
                    grid.push_back(mags[i] * (1.0 - 1e-9));
                if (grid.empty()) grid.push_back(2.0 * thresholds.tau2);
            }
            const StabilityResult stability = stability_select(
                grid.size(),
                [&](std::size_t g, const std::vector<Matrix>& sub) {
                    const MaskedCorrelation sub_masked =
                        psd_repair(rank_correlation(design, sub, statistic), design, 1e-4);
                    SolverOptions sub_options;
                    sub_options.tolerance = 1e-5;
                    sub_options.kkt_target = 1e-5;
                    sub_options.zero_constraint = constraint;
                    const GlassoResult sol =
                        solve(sub_masked.values(), PenaltyMatrix::uniform(p, lambda.lambda),
                              sub_options);
                    return threshold_edges_O(sol.est.theta, sub_masked.mask(), grid[g]);
                },
                block_data, stab.value("subsample_fraction", 0.8),
                stab.value("n_subsamples", 20), seed, stab.value("threshold", 0.05));
            if (stability.all_unstable) {
                thresholds.tau1 = 2.0 * thresholds.tau2;
                selected["tau1_rule"] = "fallback";
                log::warn("estimate: no stable tau1, falling back to 2*tau2");
            } else {
                thresholds.tau1 = grid[stability.selected_index];
                selected["tau1_rule"] = "stability";
            }
        }
        if (thresholds.tau1 <= thresholds.tau2) thresholds.tau1 = 2.0 * thresholds.tau2;

        MadgqOptions options;
        const QuiltResult quilt =
            run_madgq(design, repaired, PenaltyMatrix::uniform(p, lambda.lambda),
                      thresholds, options);
        theta = quilt.theta_hat.theta;
        edges = EdgeSet(p);
        for (const auto& [i, j] : quilt.edges_O.pairs()) edges.insert(i, j);
        for (const auto& [i, j] : quilt.edges_Oc_superset.pairs()) edges.insert(i, j);
        selected["lambda"] = lambda.lambda;
        selected["tau1"] = thresholds.tau1;
        selected["tau2"] = thresholds.tau2;

        const std::string o_path = out_path(dir, "edges_o.csv");
        io::write_edges_csv(o_path, quilt.edges_O);
        outputs.push_back(o_path);
        const std::string oc_path = out_path(dir, "edges_oc_superset.csv");
        io::write_edges_csv(oc_path, quilt.edges_Oc_superset);
        outputs.push_back(oc_path);
    } else if (*method == Method::bsvd_npn) {
        const json section = config.value("bsvd", json::object());
        io::require_keys(section, {"lambda", "lambda_grid", "ebic_gamma", "rank",
                                   "rank_grid"},
                         "bsvd");
        int rank;
        if (section.contains("rank")) {
            rank = section.at("rank").get<int>();
            selected["rank_rule"] = "fixed";
        } else {
            std::vector<int> rank_grid = section.value("rank_grid", std::vector<int>{});
            if (rank_grid.empty())
                for (int r = 1; r <= 8; ++r) rank_grid.push_back(r);
            rank = bic_rank(repaired, design, rank_grid);
            selected["rank_rule"] = "bic";
        }
        const BsvdResult completion = bsvd_complete(repaired, design, rank);
        const Matrix input = assemble_completed(repaired, completion);
        const LambdaChoice lambda =
            choose_lambda(section, input, std::nullopt, p, n_effective);
        SolverOptions options;
        options.tolerance = 1e-5;
        options.kkt_target = 1e-5;
        const GlassoResult sol =
            solve(input, PenaltyMatrix::uniform(p, lambda.lambda), options);
        theta = sol.est.theta;
        edges = sol.est.support;
        selected["lambda"] = lambda.lambda;
        selected["rank"] = rank;
        selected["q_hat"] = completion.factor.q_hat;
    } else {
        const json section = config.value("zero", json::object());
        io::require_keys(section, {"lambda", "lambda_grid", "ebic_gamma"}, "zero");
        const LambdaChoice lambda =
            choose_lambda(section, repaired.values(), std::nullopt, p, n_effective);
        SolverOptions options;
        options.tolerance = 1e-5;
        options.kkt_target = 1e-5;
        const GlassoResult sol =
            solve(repaired.values(), PenaltyMatrix::uniform(p, lambda.lambda), options);
        theta = sol.est.theta;
        edges = sol.est.support;
        selected["lambda"] = lambda.lambda;
    }

    const std::string edges_path = out_path(dir, "edges.csv");
    io::write_edges_csv(edges_path, edges);
    outputs.push_back(edges_path);
    const std::string theta_path = out_path(dir, "theta.csv");
    io::write_matrix_csv(theta_path, theta);
    outputs.push_back(theta_path);
    const std::string selected_path = out_path(dir, "selected.json");
    {
        std::ofstream out(selected_path);
        if (!out) throw IoError("cannot open for writing: " + selected_path);
        out << selected.dump(2) << '\n';
    }
    outputs.push_back(selected_path);

    io::write_manifest(out_path(dir, "manifest.json"), "estimate",
                       io::file_hash(config_path), seed, outputs);
}

void cmd_benchmark(const std::string& config_path, const Overrides& overrides) {
    const json config = io::load_json(config_path);
    io::require_keys(config,
                     {"scenarios", "methods", "replicates", "seed", "threads",
                      "tuning", "out_dir"},
                     config_path);
    if (!config.contains("scenarios"))
        throw ValidationError(config_path + ": missing 'scenarios'");

    std::vector<ScenarioConfig> scenarios;
    for (const json& s : config.at("scenarios"))
        scenarios.push_back(parse_scenario(s, overrides));

    std::vector<Method> methods;
    std::vector<std::string> method_names =
        config.value("methods", std::vector<std::string>{"madgq-npn", "bsvd-npn",
                                                         "zero-impute"});
    if (overrides.method) method_names = {*overrides.method};
    for (const std::string& name : method_names) {
        const std::optional<Method> m = method_from_name(name);
        if (!m) throw ValidationError("benchmark: unknown method '" + name + "'");
        methods.push_back(*m);
    }

    TuningGrids grids;
    if (config.contains("tuning")) {
        const json& t = config.at("tuning");
        io::require_keys(t, {"lambda_grid", "tau1_grid_size", "rank_grid"}, "tuning");
        grids.lambda_grid = t.value("lambda_grid", grids.lambda_grid);
        grids.tau1_grid_size = t.value("tau1_grid_size", grids.tau1_grid_size);
        grids.rank_grid = t.value("rank_grid", grids.rank_grid);
    }

    const int replicates = config.value("replicates", 50);
    const std::uint64_t seed = pick_seed(config, overrides);
    int threads = config.value("threads", 1);
    if (overrides.threads) threads = *overrides.threads;
    const std::string dir = pick_out_dir(config, overrides);

    const SweepResult sweep = run_sweep(scenarios, methods, replicates, seed, grids,
                                        threads);

    std::vector<std::string> outputs;
    const std::string results_path = out_path(dir, "results.csv");
    io::write_sweep_csv(results_path, sweep);
    outputs.push_back(results_path);
    const std::string summary_path = out_path(dir, "summary.csv");
    io::write_sweep_summary_csv(summary_path, sweep);
    outputs.push_back(summary_path);
    io::write_manifest(out_path(dir, "manifest.json"), "benchmark",
                       io::file_hash(config_path), seed, outputs);
}

void cmd_diagnose(const std::string& config_path, const Overrides& overrides) {
    const json config = io::load_json(config_path);
    io::require_keys(config, {"theta_file", "design_file", "out_dir", "zero_tol"},
                     config_path);
    for (const char* key : {"theta_file", "design_file"})
        if (!config.contains(key))
            throw ValidationError(config_path + ": missing '" + std::string(key) + "'");

    const io::CsvMatrix theta = io::read_matrix_csv(config.at("theta_file"));
    const BlockDesign design = io::read_design_json(config.at("design_file"));
    const std::string dir = pick_out_dir(config, overrides);

    const PopulationDiagnostics diag = population_diagnostics(
        theta.values, design, 1e-11, config.value("zero_tol", 1e-8));

    json out;
    out["nu"] = diag.has_edges_O ? json(diag.nu) : json();
    out["delta"] = diag.delta;
    out["psi"] = diag.psi_finite ? json(diag.psi) : json();
    out["d"] = diag.d;
    out["d_tilde"] = diag.d_tilde;
    out["s_tilde"] = diag.s_tilde;
    out["kappa_tilde"] = diag.kappa_tilde;
    out["kappa_sigma_tilde"] = diag.kappa_sigma_tilde;
    out["kappa_gamma_tilde"] = diag.kappa_gamma_tilde;
    out["alpha"] = diag.alpha;
    out["assumption1"] = diag.assumption1;
    out["assumption2"] = diag.assumption2;
    out["assumption3"] = diag.assumption3;
    out["assumption4"] = diag.assumption4;

    std::vector<std::string> outputs;
    const std::string diag_path = out_path(dir, "diagnostics.json");
    {
        std::ofstream f(diag_path);
        if (!f) throw IoError("cannot open for writing: " + diag_path);
        f << out.dump(2) << '\n';
    }
    outputs.push_back(diag_path);
    const std::string tilde_path = out_path(dir, "theta_tilde.csv");
    io::write_matrix_csv(tilde_path, diag.theta_tilde);
    outputs.push_back(tilde_path);
    for (int k = 0; k < design.num_blocks(); ++k) {
        const std::string path =
            out_path(dir, "schur_tilde_" + std::to_string(k + 1) + ".csv");
        io::write_matrix_csv(path, diag.schur_tilde[k], block_column_names(design, k));
        outputs.push_back(path);
    }
    io::write_manifest(out_path(dir, "manifest.json"), "diagnose",
                       io::file_hash(config_path), 0, outputs);
}

}  // namespace quilt::cli
