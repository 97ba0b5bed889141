#include "chainbsde/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "chainbsde/hedge.hpp"

namespace chainbsde {

namespace {

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

McEstimate summarize(std::vector<double>& values, std::uint64_t seed_base) {
    const std::size_t n = values.size();
    McEstimate est;
    est.n_paths = static_cast<long>(n);
    est.seed_base = seed_base;
    est.mean = pairwise_sum(values.data(), n) / static_cast<double>(n);
    for (double& v : values) v = (v - est.mean) * (v - est.mean);
    const double var = pairwise_sum(values.data(), n) / static_cast<double>(n - 1);
    est.std_error = std::sqrt(var / static_cast<double>(n));
    return est;
}

}  // namespace

std::vector<McEstimate> mc_estimate_vector(const ChainSpec& spec, const VectorPathFunctional& functional,
                                           int dims, long n_paths, std::uint64_t seed_base, unsigned threads) {
    if (n_paths < 2) throw PreconditionUnmet("mc_estimate needs at least 2 paths");
    if (dims < 1) throw PreconditionUnmet("functional dimension must be positive");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<long>(threads, n_paths));

    const auto total = static_cast<std::size_t>(n_paths);
    std::vector<std::vector<double>> values(static_cast<std::size_t>(dims), std::vector<double>(total));
    std::mutex failure_mutex;
    std::size_t failed_index = total;
    std::exception_ptr failure;

    auto worker = [&](unsigned id) {
        for (std::size_t p = id; p < total; p += threads) {
            const std::uint64_t seed = seed_base + p;
            try {
                const Vector out = functional(simulate_path(spec, seed));
                if (out.size() != dims) throw DimensionMismatch("functional returned the wrong length");
                if (!out.allFinite()) {
                    std::ostringstream os;
                    os << "functional value is not finite for seed " << seed;
                    throw NonFinite(os.str());
                }
                for (int d = 0; d < dims; ++d) values[static_cast<std::size_t>(d)][p] = out(d);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (p < failed_index) {
                    failed_index = p;
                    failure = std::current_exception();
                }
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned id = 1; id < threads; ++id) pool.emplace_back(worker, id);
    worker(0);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<McEstimate> out;
    for (auto& column : values) out.push_back(summarize(column, seed_base));
    return out;
}

McEstimate mc_estimate(const ChainSpec& spec, const PathFunctional& functional, long n_paths,
                       std::uint64_t seed_base, unsigned threads) {
    auto wrapped = [&functional](const ChainPath& path) {
        Vector v(1);
        v(0) = functional(path);
        return v;
    };
    return mc_estimate_vector(spec, wrapped, 1, n_paths, seed_base, threads).front();
}

McEstimate mc_estimate(const MarketSpec& market, const PathFunctional& functional, long n_paths,
                       std::uint64_t seed_base, unsigned threads) {
    return mc_estimate(market.chain, functional, n_paths, seed_base, threads);
}

bool within_three_se(double lhs, double rhs, double std_error, double floor) {
    return std::abs(lhs - rhs) <= 3.0 * std_error + floor;
}

double stochastic_integral(const ChainSpec& spec, const ChainPath& path, const Vector& z) {
    // sum of jumps Z'dX minus the compensator int Z'A X du
    double out = 0.0;
    double prev = 0.0;
    const auto breaks = spec.breakpoints();
    auto drift = [&](double until, int state) {
        const auto cuts = cut_points(prev, until, breaks);
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s)
            out -= z.dot(spec.generator(cuts[s]).col(state)) * (cuts[s + 1] - cuts[s]);
        prev = until;
    };
    for (int k = 0; k < path.jumps(); ++k) {
        const int from = path.states[static_cast<std::size_t>(k)];
        const int to = path.states[static_cast<std::size_t>(k + 1)];
        drift(path.jump_times[static_cast<std::size_t>(k)], from);
        out += z(to) - z(from);
    }
    drift(path.horizon, path.final_state());
    return out;
}

double seminorm_integral(const ChainSpec& spec, const ChainPath& path, const Vector& z) {
    double out = 0.0;
    double prev = 0.0;
    const auto breaks = spec.breakpoints();
    auto add = [&](double until, int state) {
        const auto cuts = cut_points(prev, until, breaks);
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s)
            out += seminorm_sq(z, psi_matrix(spec, cuts[s], state)) * (cuts[s + 1] - cuts[s]);
        prev = until;
    };
    for (int k = 0; k < path.jumps(); ++k)
        add(path.jump_times[static_cast<std::size_t>(k)], path.states[static_cast<std::size_t>(k)]);
    add(path.horizon, path.final_state());
    return out;
}

CheckRecord IsometryReport::record() const { return {"isometry", lhs.mean, rhs.mean, std_error, pass}; }

IsometryReport isometry_check(const ChainSpec& spec, const Vector& z, long n_paths, std::uint64_t seed_base) {
    if (z.size() != spec.n_states()) throw DimensionMismatch("Z has wrong length");
    auto functional = [&](const ChainPath& path) {
        const double i = stochastic_integral(spec, path, z);
        const double q = seminorm_integral(spec, path, z);
        Vector out(3);
        out << i * i, q, i * i - q;
        return out;
    };
    const auto est = mc_estimate_vector(spec, functional, 3, n_paths, seed_base);
    IsometryReport rep;
    rep.lhs = est[0];
    rep.rhs = est[1];
    rep.difference = est[2].mean;
    rep.std_error = est[2].std_error;
    rep.pass = within_three_se(rep.difference, 0.0, rep.std_error, 1e-10 * (1.0 + std::abs(rep.rhs.mean)));
    return rep;
}

CheckRecord EuropeanReport::record() const {
    return {"european_consistency", bsde_value, mc.mean, mc.std_error, pass};
}

EuropeanReport european_consistency(const MarketSpec& market, const Vector& claim, long n_paths, int steps,
                                    std::uint64_t seed_base) {
    if (claim.size() != market.n_states()) throw DimensionMismatch("claim has wrong length");
    EuropeanReport rep;
    const BsdeSolution sol = solve_bsde(market.chain, make_hedge_driver(market), claim, steps);
    rep.bsde_value = sol.y(0, market.chain.initial_state());
    const double horizon = market.horizon();
    rep.mc = mc_estimate(
        market, [&](const ChainPath& path) { return sdf_at(market, path, horizon) * claim(path.final_state()); },
        n_paths, seed_base);
    rep.pass = within_three_se(rep.bsde_value, rep.mc.mean, rep.mc.std_error, 1e-10 * (1.0 + std::abs(rep.bsde_value)));
    return rep;
}

}  // namespace chainbsde
