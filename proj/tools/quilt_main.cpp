// quilt: nonparanormal graph quilting from partially overlapping blocks.
// Subcommands: simulate | estimate | benchmark | diagnose.

#include <CLI11.hpp>
#include <cstdio>

#include "quilt/cli/commands.hpp"
#include "quilt/common.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Nonparanormal graph quilting"};
    app.require_subcommand(1);

    struct SubArgs {
        std::string config;
        quilt::cli::Overrides overrides;
    };
    auto add_common = [](CLI::App* sub, SubArgs& args) {
        sub->add_option("--config", args.config, "JSON config file")->required();
        auto* seed = sub->add_option("--seed", "Override the config seed");
        auto* threads = sub->add_option("--threads", "Worker threads");
        auto* out = sub->add_option("--out", "Output directory");
        auto* stat = sub->add_option("--statistic", "Rank statistic: rho | tau")
                         ->check(CLI::IsMember({"rho", "tau"}));
        auto* method =
            sub->add_option("--method",
                            "Estimator: madgq-npn | bsvd-npn | zero-impute")
                ->check(CLI::IsMember({"madgq-npn", "bsvd-npn", "zero-impute"}));
        sub->callback([&args, seed, threads, out, stat, method]() {
            if (!seed->empty()) args.overrides.seed = seed->as<std::uint64_t>();
            if (!threads->empty()) args.overrides.threads = threads->as<int>();
            if (!out->empty()) args.overrides.out_dir = out->as<std::string>();
            if (!stat->empty()) args.overrides.statistic = stat->as<std::string>();
            if (!method->empty()) args.overrides.method = method->as<std::string>();
        });
    };

    SubArgs sim, est, bench, diag;
    CLI::App* sub_sim = app.add_subcommand("simulate", "Generate synthetic block data");
    add_common(sub_sim, sim);
    CLI::App* sub_est = app.add_subcommand("estimate", "Estimate a graph from block data");
    add_common(sub_est, est);
    CLI::App* sub_bench = app.add_subcommand("benchmark", "Run a replicated method sweep");
    add_common(sub_bench, bench);
    CLI::App* sub_diag =
        app.add_subcommand("diagnose", "Population diagnostics for a precision matrix");
    add_common(sub_diag, diag);

    try {
        app.parse(argc, argv);
        if (sub_sim->parsed()) quilt::cli::cmd_simulate(sim.config, sim.overrides);
        if (sub_est->parsed()) quilt::cli::cmd_estimate(est.config, est.overrides);
        if (sub_bench->parsed()) quilt::cli::cmd_benchmark(bench.config, bench.overrides);
        if (sub_diag->parsed()) quilt::cli::cmd_diagnose(diag.config, diag.overrides);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const quilt::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const quilt::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const quilt::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
