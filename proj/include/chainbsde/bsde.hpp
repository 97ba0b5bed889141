#pragma once

#include <functional>
#include <vector>

#include "chainbsde/chain.hpp"

namespace chainbsde {

/// Markovian BSDE driver f(t, X_t = e_state, y, z).
///
/// lipschitz_y and lipschitz_z are the constants of
/// |f(t,i,y1,z1) - f(t,i,y2,z2)| <= l1 |y1 - y2| + l2 ||z1 - z2||_{X_t}.
/// `breakpoints` lists times where f jumps in t; solvers split steps there.
struct MarkovDriver {
    using Function = std::function<double(double t, int state, double y, const Vector& z)>;

    Function evaluate;
    double lipschitz_y = 0.0;
    double lipschitz_z = 0.0;
    std::vector<double> breakpoints;

    double operator()(double t, int state, double y, const Vector& z) const {
        return evaluate(t, state, y, z);
    }
};

MarkovDriver zero_driver();
/// f = -rate * y.
MarkovDriver discount_driver(double rate);

enum class Scheme { explicit_rk4, implicit_euler };

const char* to_string(Scheme scheme);

/// Y_t = y(t)' X_t with canonical integrand Z_t = y(t).
struct BsdeSolution {
    StateGridFunction y;
    Scheme scheme = Scheme::explicit_rk4;
    int steps = 0;
    /// Contraction condition evaluated for the driver's lipschitz_z.
    ContractionCheck contraction;
};

/// Right-hand side of the state-space reduction: dy/dt = -F(t, y) with
/// F_i = (A_t' y)_i + f(t, i, y_i, y).
Vector reduced_rhs(const ChainSpec& spec, const MarkovDriver& driver, double t, const Vector& y);

/// Solves the BSDE by integrating the reduction backward from y(T) = terminal.
/// Steps are split at generator and driver break times. In strict mode a
/// failing the contraction condition raises ContractionViolated; otherwise it is reported.
BsdeSolution solve_bsde(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                        int steps = 1000, Scheme scheme = Scheme::explicit_rk4,
                        bool strict_contraction = false);

namespace detail {

/// Union of generator and driver break times.
std::vector<double> solver_breaks(const ChainSpec& spec, const MarkovDriver& driver);

/// y(t_left) from y(t_right) with RK4 on each sub-interval between breaks.
Vector backward_rk4(const ChainSpec& spec, const MarkovDriver& driver,
                    const std::vector<double>& breaks, double t_left, double t_right,
                    const Vector& y_right);

/// y(t_left) from y(t_right) with implicit Euler on each sub-interval.
Vector backward_implicit_euler(const ChainSpec& spec, const MarkovDriver& driver,
                               const std::vector<double>& breaks, double t_left, double t_right,
                               const Vector& y_right);

/// Cubic Hermite interpolant of a backward solution inside cell k, using
/// the reduced right-hand side for the end-point slopes.
class HermiteCell {
public:
    HermiteCell(const ChainSpec& spec, const MarkovDriver& driver, const StateGridFunction& y, int k);
    Vector operator()(double t) const;

private:
    double a_, b_;
    Vector ya_, yb_, da_, db_;
};

}  // namespace detail

/// Max over grid nodes of |Y_t - (xi + int_t^T f du - int_t^T Z' dM)| along a
/// realised path, with exact jump sums and a Gauss-Legendre dt quadrature.
double pathwise_residual(const BsdeSolution& solution, const ChainPath& path, const ChainSpec& spec,
                         const MarkovDriver& driver, const Vector& terminal);

struct ComparisonReport {
    bool holds = true;
    /// max over nodes and states of y1 - y2 (positive means violation)
    double max_violation = 0.0;
};

/// Solves both BSDEs and checks y1 <= y2 + 1e-9 everywhere. Requires
/// terminal1 <= terminal2, driver1 <= driver2 at the samples (t, Y2, Z2) and
/// Contraction condition for driver1; raises PreconditionUnmet / ContractionViolated.
ComparisonReport comparison_check(const ChainSpec& spec, const MarkovDriver& driver1,
                                  const Vector& terminal1, const MarkovDriver& driver2,
                                  const Vector& terminal2, int steps = 1000);

}  // namespace chainbsde
