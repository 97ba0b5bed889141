#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "chainbsde/hedge.hpp"

namespace fixtures {

using chainbsde::ChainSpec;
using chainbsde::MarketSpec;
using chainbsde::Matrix;
using chainbsde::Vector;

inline Matrix two_state_generator(double rate_01, double rate_10) {
    // column convention: entry (i, j) is the rate j -> i
    Matrix a(2, 2);
    a << -rate_01, rate_10, rate_01, -rate_10;
    return a;
}

inline ChainSpec symmetric_two_state(double rate = 1.0, double horizon = 1.0, int initial = 0) {
    return chainbsde::build_chain_spec(2, {0.0, two_state_generator(rate, rate)}, initial, horizon);
}

inline Matrix random_generator(std::mt19937_64& rng, int n, double lo = 0.1, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix a = Matrix::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i)
            if (i != j) a(i, j) = u(rng);
        a(j, j) = -a.col(j).sum();
    }
    return a;
}

/// N in [n_lo, n_hi], one to three generator pieces.
inline ChainSpec random_spec(std::mt19937_64& rng, int n_lo = 1, int n_hi = 4, double horizon = 1.0,
                             bool pieces = true) {
    const int n = std::uniform_int_distribution<int>(n_lo, n_hi)(rng);
    const int count = pieces ? std::uniform_int_distribution<int>(1, 3)(rng) : 1;
    std::vector<ChainSpec::Schedule::Piece> schedule;
    for (int p = 0; p < count; ++p) schedule.push_back({horizon * p / count, random_generator(rng, n)});
    const int init = std::uniform_int_distribution<int>(0, n - 1)(rng);
    return chainbsde::build_chain_spec(n, std::move(schedule), init, horizon);
}

/// C = 0, constant D and dividends: Gamma = A - diag(D), r = D.
inline MarketSpec zero_c_market(const ChainSpec& chain, const Vector& d, const Matrix& dividends) {
    const int n = chain.n_states();
    return chainbsde::build_market_spec(chain, {{0.0, Matrix::Zero(n, n)}}, {{0.0, d}}, {{0.0, dividends}});
}

/// Two states, two stocks, symmetric rate-1 chain, D = 0.05, C = 0.
inline MarketSpec two_state_market(double horizon = 1.0) {
    Matrix div(2, 2);
    div << 1.0, 0.5, 0.6, 1.2;
    return zero_c_market(symmetric_two_state(1.0, horizon), Vector::Constant(2, 0.05), div);
}

/// Random C with small entries so r stays in [0, 1].
inline MarketSpec random_market(std::mt19937_64& rng, int n, bool with_c, double horizon = 1.0) {
    for (int attempt = 0;; ++attempt) {
        const ChainSpec chain = chainbsde::build_chain_spec(n, {0.0, random_generator(rng, n, 0.2, 1.5)}, 0, horizon);
        std::uniform_real_distribution<double> ud(0.02, 0.12), uc(-0.08, 0.08), udiv(0.5, 2.0);
        Vector d(n);
        for (int i = 0; i < n; ++i) d(i) = ud(rng);
        Matrix c = Matrix::Zero(n, n);
        if (with_c)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) c(i, j) = uc(rng);
        Matrix div(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) div(i, j) = udiv(rng);
        try {
            return chainbsde::build_market_spec(chain, {{0.0, c}}, {{0.0, d}}, {{0.0, div}});
        } catch (const chainbsde::RateBoundViolated&) {
            if (attempt > 100) throw;
        }
    }
}

}  // namespace fixtures
