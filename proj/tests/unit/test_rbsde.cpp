#include "chainbsde/rbsde.hpp"

#include "doctest.h"
#include "fixtures.hpp"

#include <cmath>
#include <random>

using namespace chainbsde;

namespace {

Obstacle constant_obstacle(double c) {
    return Obstacle{[c](double, int) { return c; }};
}

Obstacle decreasing_obstacle(double horizon) {
    return Obstacle{[horizon](double t, int) { return horizon - t; }};
}

struct Instance {
    ChainSpec spec;
    MarkovDriver driver;
    Vector terminal;
    Obstacle obstacle;
};

// g(T) = xi by construction; driver linear with a small coupling in z
Instance random_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Instance in;
    in.spec = fixtures::random_spec(rng, 1, 4);
    const int n = in.spec.n_states();
    const double horizon = in.spec.horizon();
    in.terminal = Vector(n);
    Vector slope(n), wave(n), level(n);
    for (int i = 0; i < n; ++i) {
        in.terminal(i) = u(rng);
        slope(i) = u(rng);
        wave(i) = u(rng);
        level(i) = 0.3 * u(rng);
    }
    in.obstacle = Obstacle{[=](double t, int i) {
        return in.terminal(i) + slope(i) * (horizon - t) + wave(i) * std::sin(6.0 * t) * (horizon - t);
    }};
    const double b = 0.5 * u(rng);
    const double c = 0.1 * u(rng);
    const ChainSpec spec = in.spec;
    in.driver.evaluate = [=](double t, int i, double y, const Vector& z) {
        const Matrix& a = spec.generator(t);
        double jump = 0.0;
        for (int j = 0; j < z.size(); ++j)
            if (j != i) jump += a(j, i) * (z(j) - z(i));
        return level(i) - b * y + c * jump;
    };
    in.driver.lipschitz_y = std::abs(b);
    return in;
}

}  // namespace

TEST_CASE("touching constant obstacle never pushes") {
    const auto spec = fixtures::symmetric_two_state();
    const auto sol = solve_reflected(spec, zero_driver(), Vector::Constant(2, 0.7), constant_obstacle(0.7), 100);
    for (int k = 0; k <= 100; ++k) {
        CHECK((sol.v.at(k).array() - 0.7).abs().maxCoeff() < 1e-15);
        CHECK(sol.k.at(k).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("deterministic decreasing obstacle") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const auto spec = fixtures::random_spec(rng, 1, 4, 2.0);
        const int n = spec.n_states();
        for (Predictor p : {Predictor::explicit_euler, Predictor::rk4}) {
            const auto sol = solve_reflected(spec, zero_driver(), Vector::Zero(n), decreasing_obstacle(2.0), 400, p);
            for (int k = 0; k <= 400; ++k) {
                const double t = sol.v.grid.time(k);
                CHECK((sol.v.at(k).array() - (2.0 - t)).abs().maxCoeff() < 1e-10);
                CHECK((sol.k.at(k).array() - t).abs().maxCoeff() < 1e-10);
                CHECK(sol.z.at(k).maxCoeff() - sol.z.at(k).minCoeff() < 1e-12);
            }
            CHECK(skorokhod_integral(sol, decreasing_obstacle(2.0)) < 1e-9);
            const auto w = snell_oracle(spec, zero_driver(), Vector::Zero(n), decreasing_obstacle(2.0), 400, p);
            CHECK(sup_distance(w, sol.v) < 1e-12);
            for (int s = 0; s < 5; ++s) CHECK(optimal_stop_time(sol, decreasing_obstacle(2.0), simulate_path(spec, s)) == 0.0);
        }
    }
}

TEST_CASE("inactive obstacle reproduces the BSDE") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const auto spec = fixtures::random_spec(rng);
        const int n = spec.n_states();
        Vector xi(n);
        for (int i = 0; i < n; ++i) xi(i) = std::cos(i + 0.5);
        const auto low = constant_obstacle(-1e6);
        const auto sol = solve_reflected(spec, discount_driver(0.1), xi, low, 100, Predictor::rk4);
        const auto ref = solve_bsde(spec, discount_driver(0.1), xi, 100);
        CHECK(sup_distance(sol.v, ref.y) < 1e-10);
        CHECK(sol.k.sup_norm() == 0.0);
        CHECK(skorokhod_integral(sol, low) == 0.0);
        for (int s = 0; s < 5; ++s) CHECK(optimal_stop_time(sol, low, simulate_path(spec, s)) == spec.horizon());
        // the DP oracle with no stopping benefit is the conditional expectation
        const auto w = snell_oracle(spec, discount_driver(0.1), xi, low, 100, Predictor::rk4);
        CHECK(sup_distance(w, ref.y) < 1e-10);
        // Euler predictor is first order
        const auto we = snell_oracle(spec, discount_driver(0.1), xi, low, 100);
        CHECK(sup_distance(we, ref.y) < 10.0 * (0.1 + rate_bound_m(spec)) * spec.horizon() / 100);

        for (double pen : {1.0, 64.0, 4096.0}) {
            const auto p = solve_penalized(spec, discount_driver(0.1), xi, low, pen, 100);
            const auto plain = solve_bsde(spec, discount_driver(0.1), xi, 100, Scheme::implicit_euler);
            CHECK(sup_distance(p.y, plain.y) < 1e-10);
        }
        const auto lim = penalization_limit(spec, discount_driver(0.1), xi, low, 100, 1e-3);
        CHECK(lim.penalization_trace.size() == 2);
    }
}

TEST_CASE("reflected scheme equals the DP oracle on random instances") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        const auto in = random_instance(rng);
        for (Predictor p : {Predictor::explicit_euler, Predictor::rk4}) {
            const auto sol = solve_reflected(in.spec, in.driver, in.terminal, in.obstacle, 200, p);
            const auto w = snell_oracle(in.spec, in.driver, in.terminal, in.obstacle, 200, p);
            CHECK(sup_distance(sol.v, w) < 1e-12);
            const auto g = in.obstacle.sample(sol.v.grid, in.spec.n_states());
            for (int k = 0; k <= 200; ++k) {
                CHECK((sol.v.at(k) - g.at(k)).minCoeff() >= -1e-12);
                if (k > 0) CHECK((sol.k.at(k) - sol.k.at(k - 1)).minCoeff() >= 0.0);
            }
            CHECK(sol.k.at(0).cwiseAbs().maxCoeff() == 0.0);
            CHECK(sol.v.at(200) == in.terminal);
            CHECK(skorokhod_integral(sol, in.obstacle) < 1e-9);
        }
    }
}

TEST_CASE("penalization") {
    const auto spec = fixtures::symmetric_two_state();
    const auto g = decreasing_obstacle(1.0);
    const auto refl = solve_reflected(spec, zero_driver(), Vector::Zero(2), g, 1000);
    const auto pen = solve_penalized(spec, zero_driver(), Vector::Zero(2), g, 1024.0, 1000);
    CHECK(sup_distance(pen.y, refl.v) < 5e-3);
    CHECK(pen.scheme == Scheme::implicit_euler);

    const auto lim = penalization_limit(spec, zero_driver(), Vector::Zero(2), g, 1000, 1e-3);
    CHECK(sup_distance(lim.v, refl.v) < 1e-3);
    for (std::size_t i = 1; i < lim.penalization_trace.size(); ++i)
        CHECK(lim.penalization_trace[i].sup_distance < lim.penalization_trace[i - 1].sup_distance);
    CHECK(lim.penalization_trace.back().sup_distance == 0.0);
    CHECK(lim.k.at(1000)(0) == doctest::Approx(1.0).epsilon(5e-3));

    CHECK_THROWS_AS(solve_penalized(spec, zero_driver(), Vector::Zero(2), g, 0.5, 10), PreconditionUnmet);
    CHECK_THROWS_AS(penalization_limit(spec, zero_driver(), Vector::Zero(2), g, 1000, 1e-9), NoConvergence);
    try {
        penalization_limit(spec, zero_driver(), Vector::Zero(2), g, 100, 1e-12);
    } catch (const NoConvergence& e) {
        CHECK(e.trace().size() == 21);
    }
}

TEST_CASE("penalized solutions increase with n") {
    std::mt19937_64 rng(6);
    int violations = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const auto in = random_instance(rng);
        StateGridFunction prev;
        for (double n = 2.0; n <= 16384.0; n *= 2.0) {
            const auto cur = solve_penalized(in.spec, in.driver, in.terminal, in.obstacle, n, 100).y;
            if (!prev.values.empty())
                for (int k = 0; k <= 100; ++k) violations += (prev.at(k) - cur.at(k)).maxCoeff() > 1e-12;
            prev = cur;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("skorokhod integral detects pushes away from the obstacle") {
    const auto spec = fixtures::symmetric_two_state();
    const auto low = constant_obstacle(-1.0);
    auto sol = solve_reflected(spec, zero_driver(), Vector::Zero(2), low, 100);
    // v - g = 1 everywhere; k(t) = t
    for (int k = 0; k <= 100; ++k) sol.k.at(k).setConstant(sol.k.grid.time(k));
    CHECK(skorokhod_integral(sol, low) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("DP value dominates both stopping candidates") {
    const auto spec = fixtures::symmetric_two_state();
    Vector xi(2);
    xi << 1, 0;
    // a flat 0.4 would exceed xi_1 = 0 at T; taper it so that g(0) = 0.4 and g(T) = 0
    const Obstacle g{[](double t, int) { return 0.4 * (1.0 - t); }};
    const auto w = snell_oracle(spec, zero_driver(), xi, g, 500);
    CHECK(w(0, 0) >= std::max(0.4, 0.5 + 0.5 * std::exp(-2.0)) - 1e-3);
    CHECK(w(0, 1) >= 0.4);
}

TEST_CASE("stopping time in a mixed case") {
    // obstacle binds only in state 1
    const auto spec = fixtures::symmetric_two_state(1.0, 1.0);
    Vector xi(2);
    xi << 1.0, 0.0;
    const Obstacle g{[](double, int i) { return i == 1 ? 0.45 : 0.0; }};
    Vector xi_compat(2);
    xi_compat << 1.0, 0.45;
    const auto sol = solve_reflected(spec, zero_driver(), xi_compat, g, 400, Predictor::rk4);
    for (int s = 0; s < 50; ++s) {
        const auto path = simulate_path(spec, 900 + s);
        double brute = spec.horizon();
        for (int k = 0; k <= 400; ++k) {
            const double t = sol.v.grid.time(k);
            const int x = path.state_at(t);
            if (sol.v(k, x) <= g(t, x) + 1e-9) {
                brute = t;
                break;
            }
        }
        const double tau = optimal_stop_time(sol, g, path);
        CHECK(tau == brute);
        if (tau < spec.horizon()) CHECK(path.state_at(tau) == 1);
    }
}

TEST_CASE("stopped value is a martingale") {
    const auto spec = fixtures::symmetric_two_state(1.0, 1.0);
    Vector xi(2);
    xi << 1.0, 0.45;
    const Obstacle g{[](double, int i) { return i == 1 ? 0.45 : 0.0; }};
    const auto sol = solve_reflected(spec, zero_driver(), xi, g, 400, Predictor::rk4);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int s = 0; s < n; ++s) {
        const auto path = simulate_path(spec, s);
        const double tau = optimal_stop_time(sol, g, path);
        const int k = sol.v.grid.cell(tau) + (tau == spec.horizon() ? 1 : 0);
        const double x = sol.v(k, path.state_at(tau));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - sol.v(0, 0)) < 3.0 * se);
}

TEST_CASE("reflected errors") {
    const auto spec = fixtures::symmetric_two_state();
    CHECK_THROWS_AS(solve_reflected(spec, zero_driver(), Vector::Zero(2), constant_obstacle(1.0), 10),
                    ObstacleIncompatible);
    CHECK_THROWS_AS(snell_oracle(spec, zero_driver(), Vector::Zero(2), constant_obstacle(1.0), 10),
                    ObstacleIncompatible);
    MarkovDriver wild;
    wild.evaluate = [](double, int, double y, const Vector&) { return y * y * y; };
    CHECK_THROWS_AS(solve_reflected(spec, wild, Vector::Constant(2, 50.0), constant_obstacle(0.0), 10), NonFinite);
}
