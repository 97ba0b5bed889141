#include "chainbsde/hedge.hpp"

#include "doctest.h"
#include "fixtures.hpp"

#include <cmath>
#include <random>

using namespace chainbsde;

namespace {

MarketSpec c_market(double horizon = 1.0) {
    Matrix c(2, 2), div(2, 2);
    c << -0.03, 0.02, 0.01, -0.02;
    div << 1.0, 0.4, 0.7, 1.3;
    return build_market_spec(fixtures::symmetric_two_state(1.0, horizon), {{0.0, c}},
                             {{0.0, Vector::Constant(2, 0.06)}}, {{0.0, div}});
}

// -D_i y, the plain discounting driver of a C = 0 market
MarkovDriver state_discount(const Vector& d) {
    MarkovDriver out;
    out.evaluate = [d](double, int i, double y, const Vector&) { return -d(i) * y; };
    out.lipschitz_y = d.cwiseAbs().maxCoeff();
    return out;
}

}  // namespace

TEST_CASE("hedge driver reductions") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 20; ++rep) {
        const auto m = fixtures::random_market(rng, 3, false);
        Vector z(3);
        for (int i = 0; i < 3; ++i) z(i) = nd(rng);
        const double v = nd(rng);
        for (int i = 0; i < 3; ++i) {
            const double r = short_rate(m, 0.1, i);
            CHECK(hedge_driver(m, 0.1, i, v, z) == doctest::Approx(-r * v).epsilon(1e-13));
            CHECK(hedge_driver(m, 0.1, i, v, Vector::Zero(3)) == doctest::Approx(-r * v));
        }
    }
    const auto m = c_market();
    const Matrix diff = m.chain.generator(0.0) - gamma_matrix(m, 0.0);
    for (int i = 0; i < 2; ++i) {
        const Vector e = Vector::Unit(2, i);
        CHECK(hedge_driver(m, 0.0, i, 0.0, e) == doctest::Approx(short_rate(m, 0.0, i) - diff(i, i)));
    }
}

TEST_CASE("tabulated hedge driver and its seminorm constant") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 10; ++rep) {
        const auto m = fixtures::random_market(rng, 3, true);
        const auto drv = make_hedge_driver(m);
        const Matrix& a = m.chain.generator(0.0);
        const Matrix sigma = sigma_matrix(m, 0.0);
        for (int s = 0; s < 20; ++s) {
            Vector z1(3), z2(3);
            for (int i = 0; i < 3; ++i) z1(i) = nd(rng), z2(i) = nd(rng);
            const double v = nd(rng);
            for (int i = 0; i < 3; ++i) {
                CHECK(drv(0.5, i, v, z1) == doctest::Approx(hedge_driver(m, 0.5, i, v, z1)).epsilon(1e-12));
                // z-part equals sum_j A_ji sigma_ij (z_j - z_i)
                double part = 0.0;
                for (int j = 0; j < 3; ++j) part += a(j, i) * sigma(i, j) * (z1(j) - z1(i));
                CHECK(hedge_driver(m, 0.5, i, 0.0, z1) == doctest::Approx(part).epsilon(1e-10));
                const double lhs = std::abs(drv(0.5, i, v, z1) - drv(0.5, i, v, z2));
                const double norm = std::sqrt(seminorm_sq(z1 - z2, psi_matrix(m.chain, 0.5, i)));
                CHECK(lhs <= drv.lipschitz_z * norm + 1e-12);
            }
        }
    }
}

TEST_CASE("contraction report") {
    const auto one = fixtures::zero_c_market(build_chain_spec(1, {0.0, Matrix::Zero(1, 1)}, 0, 1.0),
                                             Vector::Constant(1, 0.07), Matrix::Ones(1, 1));
    const auto r1 = contraction_report(one, 10);
    CHECK(r1.c6 == doctest::Approx(0.07));
    CHECK(r1.check.holds);
    CHECK(r1.check.worst_margin == 1.0);

    const auto m = fixtures::two_state_market();
    const auto r = contraction_report(m, 10);
    CHECK(r.c1 == doctest::Approx(0.05));
    CHECK(r.c4 == doctest::Approx(0.05));
    CHECK(r.c5 == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.c6 == doctest::Approx(0.05));
    CHECK(r.m == doctest::Approx(2.0));
    CHECK(r.check.worst_margin == doctest::Approx(1.0 - 0.05 * 0.5 * std::sqrt(12.0)));
    CHECK(r.exact_l2 == 0.0);

    const auto fast = fixtures::zero_c_market(fixtures::symmetric_two_state(10.0), Vector::Constant(2, 0.05),
                                              fixtures::two_state_market().dividends(0.0));
    const auto rf = contraction_report(fast, 10);
    CHECK(rf.m == doctest::Approx(20.0));
    CHECK(rf.check.worst_margin == doctest::Approx(1.0 - 0.05 * 0.05 * std::sqrt(120.0)));
}

TEST_CASE("American pricing") {
    const auto m = fixtures::two_state_market();
    const auto zero = price_american(m, zero_payoff(2, 1.0), 200);
    CHECK(zero.v.sup_norm() == 0.0);
    CHECK(zero.k.sup_norm() == 0.0);

    const auto curves = stock_curves(m, 1000);
    const auto put = put_payoff(curves, 0, 22.0);
    for (Predictor p : {Predictor::explicit_euler, Predictor::rk4}) {
        const auto sol = price_american(m, put, 1000, p);
        const auto dp = snell_oracle(m.chain, state_discount(m.d(0.0)), put.terminal, put.obstacle(), 1000, p);
        CHECK(sup_distance(sol.v, dp) < 1e-9);
        CHECK(sol.k.sup_norm() > 0.0);
    }

    // G = e^{-2D(T-t)} stays below the European value e^{-D(T-t)}
    const auto low = make_payoff([](double t, int) { return std::exp(-0.1 * (1.0 - t)); }, 2, 1.0);
    const auto sol = price_american(m, low, 1000);
    const auto eu = solve_bsde(m.chain, make_hedge_driver(m), low.terminal, 1000);
    CHECK(sup_distance(sol.v, eu.y) < 1e-12);
    CHECK(sol.k.sup_norm() == 0.0);
}

TEST_CASE("hedge extraction") {
    const auto m = fixtures::two_state_market();
    const auto curves = stock_curves(m, 500);
    const auto zero = extract_hedge(m, curves, price_american(m, zero_payoff(2, 1.0), 500));
    for (int k = 0; k <= 500; ++k) {
        CHECK(zero.h[k].cwiseAbs().maxCoeff() == 0.0);
        CHECK(zero.h0.at(k).cwiseAbs().maxCoeff() == 0.0);
    }

    const auto put = put_payoff(curves, 1, 25.0);
    const auto sol = price_american(m, put, 500);
    const auto st = extract_hedge(m, curves, sol);
    CHECK(st.solve_residual < 1e-12);
    CHECK(st.accounting_residual(curves) < 1e-9);
    for (int k = 0; k <= 500; ++k) {
        CHECK((curves.phi[k] * st.h[k] - sol.z.at(k)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((curves.phi[k] * st.h_left[k] - sol.v.at(k)).cwiseAbs().maxCoeff() < 1e-12);
        // bond units only carry the push about to be consumed
        const Vector push = sol.k.at(std::min(k + 1, 500)) - sol.k.at(k);
        CHECK((st.h0.at(k).cwiseProduct(st.bond.at(k)) - push).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK(st.bond(500, 0) == doctest::Approx(std::exp(0.05)).epsilon(1e-12));

    const auto one = fixtures::zero_c_market(build_chain_spec(1, {0.0, Matrix::Zero(1, 1)}, 0, 1.0),
                                             Vector::Constant(1, 0.04), Matrix::Constant(1, 1, 2.0));
    const auto c1 = stock_curves(one, 100);
    const auto s1 = price_american(one, make_payoff([](double, int) { return 3.0; }, 1, 1.0), 100);
    const auto h1 = extract_hedge(one, c1, s1);
    for (int k = 0; k <= 100; ++k) CHECK(h1.h[k](0) == doctest::Approx(s1.z(k, 0) / c1.phi[k](0, 0)).epsilon(1e-14));

    const auto same = fixtures::zero_c_market(fixtures::symmetric_two_state(), Vector::Constant(2, 0.05),
                                              Matrix::Ones(2, 2));
    CHECK_THROWS_AS(extract_hedge(same, stock_curves(same, 50), price_american(same, zero_payoff(2, 1.0), 50)),
                    SingularPhi);
    const auto lone = fixtures::zero_c_market(fixtures::symmetric_two_state(), Vector::Constant(2, 0.05),
                                              Matrix::Ones(2, 1));
    CHECK_THROWS_AS(extract_hedge(lone, stock_curves(lone, 50), price_american(lone, zero_payoff(2, 1.0), 50)),
                    DimensionMismatch);
}

TEST_CASE("forward replication") {
    const auto m = fixtures::two_state_market();
    const int steps = 10000;
    const auto curves = stock_curves(m, steps);

    const auto zp = zero_payoff(2, 1.0);
    const auto zs = extract_hedge(m, curves, price_american(m, zp, 200));
    const auto zr = replicate_forward(m, curves, zs, zp, simulate_path(m.chain, 3));
    CHECK(zr.max_gap == 0.0);
    CHECK(zr.dominates);

    const auto put = put_payoff(curves, 0, 22.0);
    const auto sol = price_american(m, put, steps);
    const auto st = extract_hedge(m, curves, sol);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
        const auto rep = replicate_forward(m, curves, st, put, simulate_path(m.chain, 40 + s));
        worst = std::max(worst, rep.max_gap);
        CHECK(rep.dominates);
        CHECK(rep.terminal_gap < 1e-6);
    }
    MESSAGE("replication gap " << worst);
    CHECK(worst < 1e-6);

    // a 10% error in one stock holding must show up
    auto bad = st;
    for (auto& h : bad.h) h(0) *= 1.1;
    for (auto& h : bad.h_left) h(0) *= 1.1;
    double bad_gap = 0.0;
    for (int s = 0; s < 20; ++s)
        bad_gap = std::max(bad_gap, replicate_forward(m, curves, bad, put, simulate_path(m.chain, 40 + s)).max_gap);
    MESSAGE("perturbed gap " << bad_gap);
    CHECK(bad_gap > 1e-3);
}

TEST_CASE("replication with a nonzero C market") {
    const auto m = c_market();
    const int steps = 4000;
    const auto curves = stock_curves(m, steps);
    const auto put = put_payoff(curves, 1, 40.0);
    const auto st = extract_hedge(m, curves, price_american(m, put, steps));
    double worst = 0.0;
    for (int s = 0; s < 10; ++s) {
        const auto rep = replicate_forward(m, curves, st, put, simulate_path(m.chain, s));
        worst = std::max(worst, rep.max_gap);
        CHECK(rep.dominates);
    }
    MESSAGE("replication gap with C != 0: " << worst);
    CHECK(worst < 1e-6);
}

TEST_CASE("discounted drift vanishes") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 10; ++rep) {
        const auto m = fixtures::random_market(rng, 3, true);
        Vector z(3);
        for (int i = 0; i < 3; ++i) z(i) = nd(rng);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(discount_drift_H(m, 0.2, i, z)) < 1e-12);
    }
}

TEST_CASE("discounted value representation") {
    const auto m = fixtures::two_state_market();
    const auto zp = zero_payoff(2, 1.0);
    const auto z = discounted_value_check(m, zp, price_american(m, zp, 100), 1000);
    CHECK(z.stopped.mean == 0.0);
    CHECK(z.v0 == 0.0);
    CHECK(z.record().pass);

    const auto curves = stock_curves(m, 500);
    const auto put = put_payoff(curves, 0, 22.0);
    const auto rep = discounted_value_check(m, put, price_american(m, put, 500), 20000, 7);
    CHECK(rep.dominates);
    CHECK(rep.representation_holds);

    // never exercised early: E[pi_T G_T] = V_0
    const auto low = make_payoff([](double t, int i) { return (1.0 + 0.2 * i) * std::exp(-3.0 * (1.0 - t)); }, 2, 1.0);
    const auto lr = discounted_value_check(m, low, price_american(m, low, 500), 20000, 9);
    CHECK(lr.representation_holds);
    const auto eu = european_consistency(m, low.terminal, 20000, 500, 9);
    CHECK(lr.stopped.mean == doctest::Approx(eu.mc.mean).epsilon(1e-12));
}
