#include "chainbsde/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace chainbsde {

std::vector<double> MarketSpec::breakpoints() const {
    auto out = merge_breakpoints(chain.breakpoints(), c_schedule.breakpoints(), horizon());
    out = merge_breakpoints(out, d_schedule.breakpoints(), horizon());
    return merge_breakpoints(out, dividend_schedule.breakpoints(), horizon());
}

MarketSpec build_market_spec(ChainSpec chain, std::vector<PiecewiseConstant<Matrix>::Piece> c_schedule,
                             std::vector<PiecewiseConstant<Vector>::Piece> d_schedule,
                             std::vector<PiecewiseConstant<Matrix>::Piece> dividend_schedule, double r_max) {
    const int n = chain.n_states();
    const double horizon = chain.horizon();
    MarketSpec m;
    m.r_max = r_max;
    if (!(r_max >= 0.0)) throw PreconditionUnmet("r_max must be nonnegative");
    for (const auto& p : c_schedule) {
        if (p.value.rows() != n || p.value.cols() != n) throw DimensionMismatch("C must be N x N");
        if (!p.value.allFinite()) throw NonFinite("C has non-finite entries");
    }
    for (const auto& p : d_schedule) {
        if (p.value.size() != n) throw DimensionMismatch("D must have N entries");
        if (!p.value.allFinite()) throw NonFinite("D has non-finite entries");
    }
    if (dividend_schedule.empty()) throw BadSchedule("dividend schedule has no pieces");
    const Eigen::Index stocks = dividend_schedule.front().value.cols();
    if (stocks < 1) throw DimensionMismatch("at least one stock is required");
    for (const auto& p : dividend_schedule) {
        if (p.value.rows() != n || p.value.cols() != stocks)
            throw DimensionMismatch("dividends must be N x n on every piece");
        if (!p.value.allFinite() || !(p.value.array() > 0.0).all())
            throw PreconditionUnmet("dividend rates must be strictly positive");
    }
    m.c_schedule = PiecewiseConstant<Matrix>(std::move(c_schedule), horizon);
    m.d_schedule = PiecewiseConstant<Vector>(std::move(d_schedule), horizon);
    m.dividend_schedule = PiecewiseConstant<Matrix>(std::move(dividend_schedule), horizon);
    m.n_stocks = static_cast<int>(stocks);
    m.chain = std::move(chain);

    // every schedule is piecewise constant, so r is checked exactly piece by piece
    std::vector<double> starts{0.0};
    for (double b : m.breakpoints()) starts.push_back(b);
    for (double t : starts)
        for (int i = 0; i < n; ++i) short_rate(m, t, i, true);
    return m;
}

Matrix sigma_matrix(const Matrix& c) {
    const Eigen::Index n = c.rows();
    Matrix s(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) s(i, j) = i == j ? 0.0 : std::expm1(c(i, i) - c(i, j));
    return s;
}

Matrix sigma_matrix(const MarketSpec& market, double t) { return sigma_matrix(market.c(t)); }

Matrix gamma_matrix(const Matrix& a, const Matrix& c, const Vector& d) {
    const Eigen::Index n = a.rows();
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            g(i, j) = i == j ? a(i, i) - d(i) : a(i, j) * std::exp(c(j, j) - c(j, i));
    return g;
}

Matrix gamma_matrix(const MarketSpec& market, double t) {
    return gamma_matrix(market.chain.generator(t), market.c(t), market.d(t));
}

double short_rate(const MarketSpec& market, double t, int state, bool strict) {
    const Matrix sigma = sigma_matrix(market, t);
    const Matrix& a = market.chain.generator(t);
    const double r = market.d(t)(state) - sigma.row(state).dot(a.col(state));
    if (strict && !(r >= 0.0 && r <= market.r_max)) {
        std::ostringstream os;
        os << "short rate " << r << " outside [0, " << market.r_max << "] at t = " << t << ", state " << state;
        throw RateBoundViolated(os.str());
    }
    return r;
}

namespace {

double log_sdf_step(const MarketSpec& market, const PathSegment& seg) {
    double out = -market.d(seg.begin)(seg.state) * (seg.end - seg.begin);
    if (seg.jump_at_end) {
        const Matrix& c = market.c(seg.end);
        out += c(seg.state, seg.state) - c(seg.state, seg.next_state);
    }
    return out;
}

}  // namespace

std::vector<double> sdf_path(const MarketSpec& market, const ChainPath& path, int grid_steps) {
    const TimeGrid grid(market.horizon(), grid_steps);
    std::vector<double> out(static_cast<std::size_t>(grid.nodes()), 1.0);
    double log_pi = 0.0;
    for (const auto& seg : path_segments(path, grid, market.breakpoints())) {
        log_pi += log_sdf_step(market, seg);
        if (seg.ends_at_node) out[static_cast<std::size_t>(seg.cell + 1)] = std::exp(log_pi);
    }
    return out;
}

double sdf_at(const MarketSpec& market, const ChainPath& path, double t) {
    t = std::clamp(t, 0.0, market.horizon());
    double log_pi = 0.0;
    double prev = 0.0;
    auto add_drift = [&](double until, int state) {
        auto cuts = cut_points(prev, until, market.d_schedule.breakpoints());
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s)
            log_pi -= market.d(cuts[s])(state) * (cuts[s + 1] - cuts[s]);
        prev = until;
    };
    for (int k = 0; k < path.jumps() && path.jump_times[static_cast<std::size_t>(k)] <= t; ++k) {
        const double tj = path.jump_times[static_cast<std::size_t>(k)];
        const int from = path.states[static_cast<std::size_t>(k)];
        const int to = path.states[static_cast<std::size_t>(k + 1)];
        add_drift(tj, from);
        const Matrix& c = market.c(tj);
        log_pi += c(from, from) - c(from, to);
    }
    add_drift(t, path.state_at(t));
    return std::exp(log_pi);
}

double sdf_dynamics_residual(const MarketSpec& market, const ChainPath& path, int grid_steps) {
    const TimeGrid grid(market.horizon(), grid_steps);
    const auto closed = sdf_path(market, path, grid_steps);
    double pi = 1.0;
    double worst = 0.0;
    for (const auto& seg : path_segments(path, grid, market.breakpoints())) {
        const double h = seg.end - seg.begin;
        if (h > 0.0) {
            // drift of the SDE: -r dt plus the compensator of X' sigma dM
            const Matrix sigma = sigma_matrix(market, seg.begin);
            const Matrix& a = market.chain.generator(seg.begin);
            const double rate =
                -short_rate(market, seg.begin, seg.state) - sigma.row(seg.state).dot(a.col(seg.state));
            const double k1 = rate * pi;
            const double k2 = rate * (pi + h * k1);
            pi += 0.5 * h * (k1 + k2);
        }
        if (seg.jump_at_end) pi *= 1.0 + sigma_matrix(market, seg.end)(seg.state, seg.next_state);
        if (seg.ends_at_node)
            worst = std::max(worst, std::abs(pi - closed[static_cast<std::size_t>(seg.cell + 1)]));
    }
    return worst;
}

Matrix StockCurves::slope(double t, const Matrix& prices) const {
    return -gamma_matrix(market, t).transpose() * prices - market.dividends(t);
}

Matrix StockCurves::at(double t) const {
    t = std::clamp(t, 0.0, grid.horizon);
    const int k = grid.cell(t);
    const double a = grid.time(k);
    if (t == a) return phi[static_cast<std::size_t>(k)];
    if (t == grid.horizon) return phi.back();
    Matrix y = phi[static_cast<std::size_t>(k)];
    const auto cuts = cut_points(a, t, breaks);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double lo = cuts[s];
        const double hi = cuts[s + 1];
        const double h = hi - lo;
        const double top = std::nextafter(hi, lo);
        const double mid = 0.5 * (lo + hi);
        const Matrix k1 = slope(lo, y);
        const Matrix k2 = slope(mid, y + 0.5 * h * k1);
        const Matrix k3 = slope(mid, y + 0.5 * h * k2);
        const Matrix k4 = slope(top, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

namespace {

Matrix backward_step(const StockCurves& c, const std::vector<double>& breaks, double a, double b, Matrix y) {
    const auto cuts = cut_points(a, b, breaks);
    for (std::size_t s = cuts.size() - 1; s > 0; --s) {
        const double lo = cuts[s - 1];
        const double hi = cuts[s];
        const double h = hi - lo;
        const double top = std::nextafter(hi, lo);
        const double mid = 0.5 * (lo + hi);
        const Matrix k1 = c.slope(top, y);
        const Matrix k2 = c.slope(mid, y - 0.5 * h * k1);
        const Matrix k3 = c.slope(mid, y - 0.5 * h * k2);
        const Matrix k4 = c.slope(lo, y - h * k3);
        y -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

bool time_homogeneous(const MarketSpec& m) {
    return m.chain.generator_schedule().pieces().size() == 1 && m.c_schedule.pieces().size() == 1 &&
           m.d_schedule.pieces().size() == 1 && m.dividend_schedule.pieces().size() == 1;
}

}  // namespace

StockCurves stock_curves(const MarketSpec& market, int steps, double extension) {
    if (steps < 2) throw PreconditionUnmet("stock_curves needs at least 2 steps");
    const double horizon = market.horizon();
    if (extension < 0.0) extension = 10.0 * horizon;

    StockCurves out;
    out.market = market;
    out.grid = TimeGrid(horizon, steps);
    out.breaks = market.breakpoints();

    // data beyond T are held at the last piece, which is what at(t > T) returns
    const double far = horizon + extension;
    const Matrix gamma_t = gamma_matrix(market, far).transpose();
    if (!time_homogeneous(market)) {
        const Eigen::VectorXcd eig = gamma_t.eigenvalues();
        if (!(eig.real().array() < 0.0).all())
            throw UnstableGamma("Gamma' on the last piece has an eigenvalue with nonnegative real part");
    }
    Eigen::FullPivLU<Matrix> lu(gamma_t);
    if (!lu.isInvertible()) throw UnstableGamma("Gamma' is singular; no stationary price");
    Matrix y = lu.solve(-market.dividends(far));

    if (extension > 0.0) {
        const int ext_steps = std::clamp(static_cast<int>(std::ceil(extension / out.grid.dt())), 1, 100000);
        const double h = extension / ext_steps;
        for (int k = ext_steps; k > 0; --k) {
            const double b = k == ext_steps ? far : horizon + k * h;
            y = backward_step(out, {}, horizon + (k - 1) * h, b, y);
        }
    }

    const auto& breaks = out.breaks;
    out.phi.assign(static_cast<std::size_t>(out.grid.nodes()), Matrix());
    out.phi.back() = y;
    for (int k = steps - 1; k >= 0; --k)
        out.phi[static_cast<std::size_t>(k)] =
            backward_step(out, breaks, out.grid.time(k), out.grid.time(k + 1), out.phi[static_cast<std::size_t>(k + 1)]);

    const int n = market.n_states();
    out.s.assign(static_cast<std::size_t>(market.n_stocks), StateGridFunction(out.grid, n));
    out.c2 = std::numeric_limits<double>::infinity();
    out.c3 = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= steps; ++k) {
        const Matrix& p = out.phi[static_cast<std::size_t>(k)];
        if (!p.allFinite()) throw NonFinite("stock curves blew up");
        for (int j = 0; j < market.n_stocks; ++j) out.s[static_cast<std::size_t>(j)].at(k) = p.col(j);
        out.c2 = std::min(out.c2, p.minCoeff());
        out.c3 = std::max(out.c3, p.maxCoeff());
    }
    if (!(out.c2 > 0.0)) {
        std::ostringstream os;
        os << "stock prices reach " << out.c2 << " <= 0";
        throw NonPositivePrices(os.str());
    }
    return out;
}

double stock_sde_residual(const MarketSpec& market, const StockCurves& curves, const ChainPath& path,
                          int grid_steps) {
    const TimeGrid grid(market.horizon(), grid_steps);
    const int stocks = curves.n_stocks();
    Vector price = curves.at(0.0).row(path.states.front()).transpose();
    double worst = 0.0;
    auto drift = [&](double t, int state) -> Vector {
        const Matrix prices = curves.at(t);
        const Matrix& a = market.chain.generator(t);
        const Matrix g = gamma_matrix(market, t);
        // ((A' - Gamma') s)_i - delta_i, per stock
        return ((a - g).transpose() * prices).row(state).transpose() -
               market.dividends(t).row(state).transpose() - (a.transpose() * prices).row(state).transpose();
    };
    for (const auto& seg : path_segments(path, grid, market.breakpoints())) {
        const double h = seg.end - seg.begin;
        if (h > 0.0) {
            const double top = std::nextafter(seg.end, seg.begin);
            const Vector k1 = drift(seg.begin, seg.state);
            const Vector k2 = drift(top, seg.state);
            price += 0.5 * h * (k1 + k2);
        }
        if (seg.jump_at_end) {
            const Matrix prices = curves.at(seg.end);
            price += (prices.row(seg.next_state) - prices.row(seg.state)).transpose();
        }
        if (seg.ends_at_node) {
            const int state = seg.jump_at_end ? seg.next_state : seg.state;
            const Matrix& direct = curves.phi[static_cast<std::size_t>(seg.cell + 1)];
            for (int j = 0; j < stocks; ++j)
                worst = std::max(worst, std::abs(price(j) - direct(state, j)));
        }
    }
    return worst;
}

}  // namespace chainbsde
