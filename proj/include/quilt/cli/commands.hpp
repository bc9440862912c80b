#pragma once

#include <optional>
#include <string>

namespace quilt::cli {

/// Command-line overrides applied on top of the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    std::optional<std::string> statistic;  // rho | tau
    std::optional<std::string> method;     // madgq-npn | bsvd-npn | zero-impute
};

void cmd_simulate(const std::string& config_path, const Overrides& overrides);
void cmd_estimate(const std::string& config_path, const Overrides& overrides);
void cmd_benchmark(const std::string& config_path, const Overrides& overrides);
void cmd_diagnose(const std::string& config_path, const Overrides& overrides);

}  // namespace quilt::cli
