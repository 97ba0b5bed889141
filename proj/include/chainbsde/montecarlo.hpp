#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "chainbsde/market.hpp"

namespace chainbsde {

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    std::uint64_t seed_base = 0;
};

using PathFunctional = std::function<double(const ChainPath&)>;
using VectorPathFunctional = std::function<Vector(const ChainPath&)>;

/// Path i uses seed seed_base + i. Sums are pairwise over the path index,
/// so the estimate does not depend on the thread count (0 = hardware).
McEstimate mc_estimate(const ChainSpec& spec, const PathFunctional& functional, long n_paths,
                       std::uint64_t seed_base, unsigned threads = 0);
McEstimate mc_estimate(const MarketSpec& market, const PathFunctional& functional, long n_paths,
                       std::uint64_t seed_base, unsigned threads = 0);

/// Componentwise estimates of a vector functional of fixed length `dims`.
std::vector<McEstimate> mc_estimate_vector(const ChainSpec& spec, const VectorPathFunctional& functional,
                                           int dims, long n_paths, std::uint64_t seed_base,
                                           unsigned threads = 0);

/// One row of a verification report.
struct CheckRecord {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double std_error = 0.0;
    bool pass = false;
};

/// |lhs - rhs| <= 3 se, with a small absolute floor for exact cases.
bool within_three_se(double lhs, double rhs, double std_error, double floor = 1e-10);

/// Exact stochastic integral int_0^T Z' dM along a path, Z constant.
double stochastic_integral(const ChainSpec& spec, const ChainPath& path, const Vector& z);
/// int_0^T ||Z||^2_{X_u} du along a path, Z constant.
double seminorm_integral(const ChainSpec& spec, const ChainPath& path, const Vector& z);

struct IsometryReport {
    McEstimate lhs;   // E[(int Z'dM)^2]
    McEstimate rhs;   // E[int ||Z||^2_X du]
    double difference = 0.0;
    /// standard error of the per-path difference
    double std_error = 0.0;
    bool pass = false;
    CheckRecord record() const;
};

IsometryReport isometry_check(const ChainSpec& spec, const Vector& z, long n_paths, std::uint64_t seed_base = 1);

struct EuropeanReport {
    double bsde_value = 0.0;
    McEstimate mc;
    bool pass = false;
    CheckRecord record() const;
};

/// y(0, X_0) of the hedge-driver BSDE against E[pi_T claim' X_T].
EuropeanReport european_consistency(const MarketSpec& market, const Vector& claim, long n_paths,
                                    int steps = 1000, std::uint64_t seed_base = 1);

}  // namespace chainbsde
