#include "chainbsde/hedge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace chainbsde {

Payoff make_payoff(std::function<double(double, int)> g, int n_states, double horizon) {
    Payoff p;
    p.g = std::move(g);
    p.terminal = Vector(n_states);
    for (int i = 0; i < n_states; ++i) p.terminal(i) = p.g(horizon, i);
    return p;
}

Payoff zero_payoff(int n_states, double horizon) {
    return make_payoff([](double, int) { return 0.0; }, n_states, horizon);
}

Payoff put_payoff(const StockCurves& curves, int stock, double strike) {
    if (stock < 0 || stock >= curves.n_stocks()) throw DimensionMismatch("put payoff refers to a missing stock");
    auto shared = std::make_shared<const StockCurves>(curves);
    return make_payoff(
        [shared, stock, strike](double t, int state) {
            return std::max(strike - shared->at(t)(state, stock), 0.0);
        },
        curves.market.n_states(), curves.grid.horizon);
}

double hedge_driver(const MarketSpec& market, double t, int state, double v, const Vector& z) {
    const double r = short_rate(market, t, state);
    const Matrix diff = market.chain.generator(t) - gamma_matrix(market, t);
    return -r * v + r * z(state) - diff.col(state).dot(z);
}

namespace {

std::vector<double> piece_starts(const MarketSpec& market) {
    std::vector<double> starts{0.0};
    for (double b : market.breakpoints()) starts.push_back(b);
    return starts;
}

// f = -r_i v + (L z)_i with L = diag(r) - (A' - Gamma'), constant on each piece
struct DriverTable {
    std::vector<double> starts;
    std::vector<Vector> rate;
    std::vector<Matrix> linear;

    std::size_t piece(double t) const {
        auto it = std::upper_bound(starts.begin(), starts.end(), t);
        return it == starts.begin() ? 0 : static_cast<std::size_t>(std::prev(it) - starts.begin());
    }
};

}  // namespace

double hedge_driver_seminorm_lipschitz(const MarketSpec& market) {
    double out = 0.0;
    for (double t : piece_starts(market)) {
        const Matrix& a = market.chain.generator(t);
        const Matrix sigma = sigma_matrix(market, t);
        for (int i = 0; i < market.n_states(); ++i) {
            double sum = 0.0;
            for (int j = 0; j < market.n_states(); ++j)
                if (j != i) sum += a(j, i) * sigma(i, j) * sigma(i, j);
            out = std::max(out, std::sqrt(sum));
        }
    }
    return out;
}

MarkovDriver make_hedge_driver(const MarketSpec& market) {
    auto table = std::make_shared<DriverTable>();
    table->starts = piece_starts(market);
    const int n = market.n_states();
    double sup_r = 0.0;
    for (double t : table->starts) {
        Vector r(n);
        for (int i = 0; i < n; ++i) r(i) = short_rate(market, t, i);
        const Matrix diff = market.chain.generator(t) - gamma_matrix(market, t);
        Matrix l = Matrix(r.asDiagonal()) - diff.transpose();
        sup_r = std::max(sup_r, r.cwiseAbs().maxCoeff());
        table->rate.push_back(std::move(r));
        table->linear.push_back(std::move(l));
    }
    MarkovDriver d;
    d.evaluate = [table](double t, int state, double v, const Vector& z) {
        const std::size_t p = table->piece(t);
        return -table->rate[p](state) * v + table->linear[p].row(state).dot(z);
    };
    d.lipschitz_y = sup_r;
    d.lipschitz_z = hedge_driver_seminorm_lipschitz(market);
    d.breakpoints = market.breakpoints();
    return d;
}

ContractionReport contraction_report(const MarketSpec& market, int grid_steps) {
    ContractionReport rep;
    const int n = market.n_states();
    for (double t : piece_starts(market)) {
        const Matrix diff = market.chain.generator(t) - gamma_matrix(market, t);
        for (int i = 0; i < n; ++i) {
            const double r = short_rate(market, t, i);
            rep.c1 = std::max(rep.c1, diff.col(i).norm());
            rep.c4 = std::max(rep.c4, std::abs(r));
            Vector form = -diff.col(i);
            form(i) += r;
            rep.c5 = std::max(rep.c5, form.norm());
        }
    }
    rep.m = rate_bound_m(market.chain);
    rep.c6 = std::max(rep.c4, rep.c5 * std::sqrt(3.0 * rep.m));
    rep.exact_l2 = hedge_driver_seminorm_lipschitz(market);
    rep.check = check_contraction(market.chain, rep.c6, grid_steps);
    rep.exact_check = check_contraction(market.chain, rep.exact_l2, grid_steps);
    return rep;
}

RbsdeSolution price_american(const MarketSpec& market, const Payoff& payoff, int steps, Predictor predictor) {
    if (payoff.terminal.size() != market.n_states()) throw DimensionMismatch("payoff terminal has wrong length");
    return solve_reflected(market.chain, make_hedge_driver(market), payoff.terminal, payoff.obstacle(), steps,
                           predictor);
}

Vector HedgeStrategy::holdings(int cell, double t) const {
    if (cell >= grid.steps) return h_left.back();
    const double s = std::clamp((t - grid.time(cell)) / grid.dt(), 0.0, 1.0);
    return (1.0 - s) * h[static_cast<std::size_t>(cell)] + s * h_left[static_cast<std::size_t>(cell + 1)];
}

double HedgeStrategy::accounting_residual(const StockCurves& curves) const {
    double worst = 0.0;
    for (int k = 0; k < grid.nodes(); ++k) {
        const Vector stock_value = curves.at(grid.time(k)) * h[static_cast<std::size_t>(k)];
        for (int i = 0; i < v.n_states(); ++i)
            worst = std::max(worst, std::abs(v(k, i) - h0(k, i) * bond(k, i) - stock_value(i)));
    }
    return worst;
}

namespace {

Vector solve_refined(const Eigen::PartialPivLU<Matrix>& lu, const Matrix& a, const Vector& b) {
    Vector x = lu.solve(b);
    x += lu.solve(b - a * x);
    return x;
}

}  // namespace

HedgeStrategy extract_hedge(const MarketSpec& market, const StockCurves& curves, const RbsdeSolution& solution) {
    const int n = market.n_states();
    if (market.n_stocks != n) {
        std::ostringstream os;
        os << "hedging needs as many stocks as states (n = " << market.n_stocks << ", N = " << n << ")";
        throw DimensionMismatch(os.str());
    }
    const TimeGrid& grid = solution.v.grid;
    HedgeStrategy st;
    st.grid = grid;
    st.v = solution.v;
    st.k = solution.k;
    st.h0 = StateGridFunction(grid, n);
    st.bond = StateGridFunction(grid, n, 1.0);
    st.h.resize(static_cast<std::size_t>(grid.nodes()));
    st.h_left.resize(static_cast<std::size_t>(grid.nodes()));

    const auto breaks = market.breakpoints();
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.time(k);
        if (k > 0) {
            const auto cuts = cut_points(grid.time(k - 1), t, breaks);
            for (int i = 0; i < n; ++i) {
                double integral = 0.0;
                for (std::size_t s = 0; s + 1 < cuts.size(); ++s)
                    integral += short_rate(market, cuts[s], i) * (cuts[s + 1] - cuts[s]);
                st.bond.at(k)(i) = st.bond(k - 1, i) * std::exp(integral);
            }
        }
        const Matrix phi = curves.at(t);
        const double smallest = Eigen::JacobiSVD<Matrix>(phi).singularValues().minCoeff();
        if (!(smallest >= 1e-10)) {
            std::ostringstream os;
            os << "phi is singular at t = " << t << " (smallest singular value " << smallest << ")";
            throw SingularPhi(os.str());
        }
        const Eigen::PartialPivLU<Matrix> lu(phi);
        const Vector& z = solution.z.at(k);
        st.h[static_cast<std::size_t>(k)] = solve_refined(lu, phi, z);
        st.h_left[static_cast<std::size_t>(k)] = solve_refined(lu, phi, solution.v.at(k));
        const Vector stock_value = phi * st.h[static_cast<std::size_t>(k)];
        st.solve_residual = std::max(st.solve_residual, (stock_value - z).cwiseAbs().maxCoeff());
        for (int i = 0; i < n; ++i) st.h0.at(k)(i) = (solution.v(k, i) - stock_value(i)) / st.bond(k, i);
    }
    return st;
}

ReplicationReport replicate_forward(const MarketSpec& market, const StockCurves& curves,
                                    const HedgeStrategy& strategy, const Payoff& payoff, const ChainPath& path,
                                    double tol) {
    const TimeGrid& grid = strategy.grid;
    ReplicationReport rep;
    rep.min_surplus = std::numeric_limits<double>::infinity();

    auto visit_node = [&](int node, int state, double wealth) {
        const double t = grid.time(node);
        rep.max_gap = std::max(rep.max_gap, std::abs(wealth - strategy.v(node, state)));
        rep.min_surplus = std::min(rep.min_surplus, wealth - payoff(t, state));
        if (node == grid.steps) {
            rep.terminal_gap = std::abs(wealth - payoff.terminal(state));
            return wealth;
        }
        const double push = strategy.k(node + 1, state) - strategy.k(node, state);
        rep.consumed += push;
        return wealth - push;
    };

    int state = path.states.front();
    double wealth = visit_node(0, state, strategy.v(0, state));
    for (const auto& seg : path_segments(path, grid, market.breakpoints())) {
        const double h = seg.end - seg.begin;
        if (h > 0.0) {
            const int i = seg.state;
            auto rhs = [&](double t, double w) {
                const Matrix prices = curves.at(t);
                const Matrix slope = curves.slope(t, prices);
                const Vector hold = strategy.holdings(seg.cell, t);
                const double r = short_rate(market, t, i);
                const double stock = prices.row(i).dot(hold);
                const double gain = (slope.row(i) + market.dividends(t).row(i)).dot(hold);
                return r * (w - stock) + gain;
            };
            const double top = std::nextafter(seg.end, seg.begin);
            const double mid = seg.begin + 0.5 * h;
            const double k1 = rhs(seg.begin, wealth);
            const double k2 = rhs(mid, wealth + 0.5 * h * k1);
            const double k3 = rhs(mid, wealth + 0.5 * h * k2);
            const double k4 = rhs(top, wealth + h * k3);
            wealth += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (seg.jump_at_end) {
            const Matrix prices = curves.at(seg.end);
            const Vector hold = strategy.holdings(seg.cell, seg.end);
            wealth += (prices.row(seg.next_state) - prices.row(seg.state)).dot(hold);
            state = seg.next_state;
        }
        if (seg.ends_at_node) wealth = visit_node(seg.cell + 1, state, wealth);
    }
    rep.dominates = rep.min_surplus >= -tol && rep.terminal_gap <= tol;
    return rep;
}

double discount_drift_H(const MarketSpec& market, double t, int state, const Vector& z) {
    const double r = short_rate(market, t, state);
    const Matrix& a = market.chain.generator(t);
    const Matrix diff = a - gamma_matrix(market, t);
    const Matrix sigma = sigma_matrix(market, t);
    double compensator = 0.0;
    for (int j = 0; j < market.n_states(); ++j)
        if (j != state) compensator += a(j, state) * sigma(state, j) * (z(j) - z(state));
    return -(-r * z(state) + diff.col(state).dot(z)) - compensator;
}

CheckRecord DiscountedReport::record() const {
    return {"discounted_representation", stopped.mean, v0, stopped.std_error, dominates && representation_holds};
}

DiscountedReport discounted_value_check(const MarketSpec& market, const Payoff& payoff,
                                        const RbsdeSolution& solution, long n_paths, std::uint64_t seed_base) {
    const TimeGrid& grid = solution.v.grid;
    const int n = market.n_states();
    const StateGridFunction g = payoff.obstacle().sample(grid, n);
    StateGridFunction drift(grid, n);
    for (int k = 0; k < grid.nodes(); ++k)
        for (int i = 0; i < n; ++i) drift.at(k)(i) = discount_drift_H(market, grid.time(k), i, solution.z.at(k));

    auto functional = [&](const ChainPath& path) -> Vector {
        const auto pi = sdf_path(market, path, grid.steps);
        double h_integral = 0.0;
        double stopped = 0.0;
        bool stopped_yet = false;
        double violated = 0.0;
        for (int k = 0; k < grid.nodes(); ++k) {
            const int state = path.state_at(grid.time(k));
            const double p = pi[static_cast<std::size_t>(k)];
            const double v = solution.v(k, state);
            const double gk = g(k, state);
            if (p * v < p * gk - 1e-12) violated = 1.0;
            if (!stopped_yet) {
                if (v <= gk + 1e-9 || k == grid.steps) {
                    stopped = p * gk + h_integral;
                    stopped_yet = true;
                } else {
                    h_integral += p * drift(k, state) * grid.dt();
                }
            }
        }
        Vector out(2);
        out << stopped, violated;
        return out;
    };
    const auto est = mc_estimate_vector(market.chain, functional, 2, n_paths, seed_base);

    DiscountedReport rep;
    rep.stopped = est[0];
    rep.violation_fraction = est[1].mean;
    rep.dominates = est[1].mean == 0.0;
    rep.v0 = solution.v(0, market.chain.initial_state());
    rep.representation_holds = within_three_se(rep.stopped.mean, rep.v0, rep.stopped.std_error, 1e-9);
    return rep;
}

}  // namespace chainbsde
