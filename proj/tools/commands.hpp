#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace chainbsde::app {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

struct Overrides {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    std::optional<long> paths;
    bool strict_contraction = false;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

inline const std::vector<std::string>& job_names() {
    static const std::vector<std::string> names{"validate",       "simulate", "solve-bsde", "solve-rbsde",
                                                "price-american", "hedge",    "verify"};
    return names;
}

/// Runs one job and writes its CSVs under config.output_dir. Returns kOk or
/// kCheckFailed; library errors propagate.
int run_job(const std::string& job, const RunConfig& config, std::ostream& log);

/// Tidy plot inputs from a finished result directory, written to result_dir/plot.
/// Throws MissingInputs when the directory holds nothing to plot.
void emit_plot_data(const std::filesystem::path& result_dir, std::ostream& log);

/// Full command line: parses flags, runs, maps errors to exit codes.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace chainbsde::app
