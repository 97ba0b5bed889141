#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "chainbsde/montecarlo.hpp"
#include "chainbsde/rbsde.hpp"

namespace chainbsde {

/// Exercise value G_t = g(t, X_t); terminal = g(T, .).
struct Payoff {
    std::function<double(double t, int state)> g;
    Vector terminal;

    double operator()(double t, int state) const { return g(t, state); }
    Obstacle obstacle() const { return Obstacle{g}; }
};

Payoff make_payoff(std::function<double(double, int)> g, int n_states, double horizon);
Payoff zero_payoff(int n_states, double horizon);
/// max(strike - S_stock(t, state), 0) on the given curves.
Payoff put_payoff(const StockCurves& curves, int stock, double strike);

/// f(t, e_i, v, z) = -r v + r z_i - ((A' - Gamma') z)_i.
double hedge_driver(const MarketSpec& market, double t, int state, double v, const Vector& z);

/// exact z-Lipschitz constant of the hedge driver in the seminorm:
/// max_i sqrt(sum_j A_ji sigma_ij^2) over the schedule
double hedge_driver_seminorm_lipschitz(const MarketSpec& market);

/// The hedge driver with lipschitz_y = sup r, lipschitz_z as above and the
/// market break times.
MarkovDriver make_hedge_driver(const MarketSpec& market);

struct ContractionReport {
    double c1 = 0.0;  // sup |(A - Gamma) e_i|
    double c4 = 0.0;  // sup r
    double c5 = 0.0;  // Euclidean z-Lipschitz constant of the driver
    double c6 = 0.0;  // max(c4, c5 sqrt(3m))
    double exact_l2 = 0.0;
    double m = 0.0;
    ContractionCheck check;        // with l2 = c6
    ContractionCheck exact_check;  // with l2 = exact_l2
};

ContractionReport contraction_report(const MarketSpec& market, int grid_steps);

/// Reflected BSDE with the hedge driver, terminal G_T and obstacle G.
RbsdeSolution price_american(const MarketSpec& market, const Payoff& payoff, int steps = 1000,
                             Predictor predictor = Predictor::rk4);

/// Superhedging portfolio on the pricing grid. h[k] holds on [t_k, t_{k+1})
/// and solves phi(t_k) h = z(t_k); h_left[k] = phi(t_k)^{-1} v(t_k) is the
/// left-limit holding reached at t_k. Holdings do not depend on the state.
struct HedgeStrategy {
    TimeGrid grid;
    std::vector<Vector> h;
    std::vector<Vector> h_left;
    /// bond units per (node, state), from V = h0 B + h' S
    StateGridFunction h0;
    /// B_i(t) = exp(int_0^t r(u, i) du)
    StateGridFunction bond;
    StateGridFunction v;
    StateGridFunction k;
    /// max |phi h - z| over the nodes
    double solve_residual = 0.0;

    /// Linear interpolation from h[k] to h_left[k + 1] inside cell k, so
    /// holdings(k, t_{k+1}) is the left limit.
    Vector holdings(int cell, double t) const;
    Vector holdings(double t) const { return holdings(grid.cell(t), t); }
    /// max |V - h0 B - h' S| over nodes and states.
    double accounting_residual(const StockCurves& curves) const;
};

/// Throws DimensionMismatch when n != N, SingularPhi when the smallest
/// singular value of phi drops below 1e-10.
HedgeStrategy extract_hedge(const MarketSpec& market, const StockCurves& curves, const RbsdeSolution& solution);

struct ReplicationReport {
    double max_gap = 0.0;
    /// wealth >= G - tol at every node and |wealth_T - G_T| <= tol
    bool dominates = true;
    double terminal_gap = 0.0;
    /// min over nodes of wealth - G
    double min_surplus = 0.0;
    /// cumulative consumption along the path
    double consumed = 0.0;
};

/// Runs the self-financing wealth equation forward along the path: bond part
/// at r, stock part with dividends, consumption at the nodes. Compares with
/// V(t_k, X_{t_k}) at every node.
ReplicationReport replicate_forward(const MarketSpec& market, const StockCurves& curves,
                                    const HedgeStrategy& strategy, const Payoff& payoff, const ChainPath& path,
                                    double tol = 1e-6);

/// Drift of the discounted RBSDE. With the deflator's dynamics taken into
/// account, the du terms of d(pi V) cancel identically, so this is
/// -X'(-r + (A' - Gamma'))z - sum_j A_ji sigma^{ij}(z_j - z_i), i.e. zero up to rounding.
double discount_drift_H(const MarketSpec& market, double t, int state, const Vector& z);

struct DiscountedReport {
    /// pi V >= pi G at every node of every path
    bool dominates = true;
    /// fraction of paths with a node where pi V < pi G - 1e-12
    double violation_fraction = 0.0;
    double v0 = 0.0;
    McEstimate stopped;
    bool representation_holds = false;
    CheckRecord record() const;
};

/// (a) deflated domination along paths; (b) E[int_0^tau H du + pi_tau G_tau]
/// = V(0, X_0) by Monte Carlo, tau the first node where V <= G.
DiscountedReport discounted_value_check(const MarketSpec& market, const Payoff& payoff,
                                        const RbsdeSolution& solution, long n_paths,
                                        std::uint64_t seed_base = 1);

}  // namespace chainbsde
