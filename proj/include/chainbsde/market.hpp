#pragma once

#include <vector>

#include "chainbsde/chain.hpp"

namespace chainbsde {

/// Market driven by the chain: stochastic discount function
///   pi_t = exp(-int X'_{u-} C_u dX_u - int D_u' X_u du)
/// and n stocks paying dividends delta_j(t)' X_t per unit time.
struct MarketSpec {
    ChainSpec chain;
    PiecewiseConstant<Matrix> c_schedule;
    PiecewiseConstant<Vector> d_schedule;
    /// N x n matrix per piece; column j is delta_j.
    PiecewiseConstant<Matrix> dividend_schedule;
    int n_stocks = 0;
    double r_max = 1.0;

    int n_states() const { return chain.n_states(); }
    double horizon() const { return chain.horizon(); }
    const Matrix& c(double t) const { return c_schedule.at(t); }
    const Vector& d(double t) const { return d_schedule.at(t); }
    const Matrix& dividends(double t) const { return dividend_schedule.at(t); }
    /// Union of the break times of every schedule, including the generator's.
    std::vector<double> breakpoints() const;
};

/// Validates dimensions, delta > 0 and 0 <= r <= r_max on every piece.
/// Throws DimensionMismatch, BadSchedule, RateBoundViolated or PreconditionUnmet.
MarketSpec build_market_spec(ChainSpec chain, std::vector<PiecewiseConstant<Matrix>::Piece> c_schedule,
                             std::vector<PiecewiseConstant<Vector>::Piece> d_schedule,
                             std::vector<PiecewiseConstant<Matrix>::Piece> dividend_schedule,
                             double r_max = 1.0);

/// sigma^{ij} = exp(C^{ii} - C^{ij}) - 1.
Matrix sigma_matrix(const Matrix& c);
Matrix sigma_matrix(const MarketSpec& market, double t);

/// Gamma^{ii} = A^{ii} - D^i, Gamma^{ij} = A^{ij} exp(C^{jj} - C^{ji}).
Matrix gamma_matrix(const Matrix& a, const Matrix& c, const Vector& d);
Matrix gamma_matrix(const MarketSpec& market, double t);

/// r(t, i) = D_i - e_i' sigma A e_i. Strict mode raises RateBoundViolated
/// outside [0, r_max].
double short_rate(const MarketSpec& market, double t, int state, bool strict = false);

/// pi at the nodes of a uniform grid along a path (pi_0 = 1).
std::vector<double> sdf_path(const MarketSpec& market, const ChainPath& path, int grid_steps);

/// pi at an arbitrary time along a path.
double sdf_at(const MarketSpec& market, const ChainPath& path, double t);

/// Integrates d pi = -pi r dt + pi_- X'_- sigma dM along the path (Heun
/// between events, exact jump factors) and returns the max absolute gap to
/// sdf_path over the nodes.
double sdf_dynamics_residual(const MarketSpec& market, const ChainPath& path, int grid_steps);

/// Stock price curves s_j(t) in R^N, the solution of ds/dt + Gamma' s = -delta.
struct StockCurves {
    TimeGrid grid;
    /// s[j] is the curve of stock j.
    std::vector<StateGridFunction> s;
    /// phi[k] is N x n with columns s_j(t_k).
    std::vector<Matrix> phi;
    double c2 = 0.0;
    double c3 = 0.0;
    MarketSpec market;
    /// market.breakpoints(), cached for at().
    std::vector<double> breaks;

    int n_stocks() const { return static_cast<int>(s.size()); }
    /// Price matrix (N x n) at any t in [0, T], by RK4 from the node at or before t.
    Matrix at(double t) const;
    double at(int stock, double t, int state) const { return at(t)(state, stock); }
    /// d phi / dt = -Gamma' phi - delta.
    Matrix slope(double t, const Matrix& prices) const;
};

/// Seeds the stationary solution -(Gamma')^{-1} delta at T + extension (data
/// held at the last piece), integrates back to 0 with RK4 and checks
/// positivity. A negative extension means 10 T. Throws UnstableGamma or
/// NonPositivePrices.
StockCurves stock_curves(const MarketSpec& market, int steps = 1000, double extension = -1.0);

/// Integrates dS = ((A' - Gamma') s)' X dt - delta' X dt + s' dM along a path
/// and returns the max gap to s(t)' X_t over the nodes and stocks.
double stock_sde_residual(const MarketSpec& market, const StockCurves& curves, const ChainPath& path,
                          int grid_steps);

}  // namespace chainbsde
