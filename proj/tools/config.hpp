#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "chainbsde/hedge.hpp"

namespace chainbsde::app {

inline constexpr int kSchemaVersion = 1;

/// A named built-in with its parameters, e.g. {"type": "put", "stock": 1, "strike": 22}.
struct Selector {
    std::string type = "none";
    nlohmann::json params = nlohmann::json::object();

    bool present() const { return type != "none"; }
};

struct SolverSettings {
    int steps = 1000;
    Scheme scheme = Scheme::explicit_rk4;
    Predictor predictor = Predictor::explicit_euler;
    bool penalization = false;
    double penalization_tol = 1e-3;
    long n_paths = 10000;
    std::uint64_t seed = 1;
    int simulate_paths = 10;
    long replication_paths = 100;
    int replication_steps = 10000;
    bool strict_contraction = false;
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    ChainSpec chain;
    std::optional<MarketSpec> market;
    double extension = -1.0;
    Selector driver{"zero", nlohmann::json::object()};
    Selector terminal{"zero", nlohmann::json::object()};
    Selector obstacle;
    Selector payoff;
    std::optional<Vector> verify_z;
    SolverSettings solver;
    std::filesystem::path output_dir = "out";
};

/// Parses and cross-checks a config; every problem is reported as ConfigError
/// or as the module-level error raised while building the specs.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& file);

MarkovDriver make_driver(const RunConfig& config);
Vector make_terminal(const RunConfig& config);
/// Stock curves on the solver grid (market configs only).
StockCurves make_curves(const RunConfig& config, int steps);
/// Obstacle selector; `curves` is needed by put obstacles.
Obstacle make_obstacle(const RunConfig& config, const StockCurves* curves);
/// Payoff selector; terminal = g(T, .).
Payoff make_payoff(const RunConfig& config, const StockCurves* curves);

}  // namespace chainbsde::app
