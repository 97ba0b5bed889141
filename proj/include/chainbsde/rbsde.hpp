#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "chainbsde/bsde.hpp"

namespace chainbsde {

/// Obstacle G_t = g(t)' X_t, continuous in t for every state.
struct Obstacle {
    std::function<double(double t, int state)> g;

    double operator()(double t, int state) const { return g(t, state); }
    StateGridFunction sample(const TimeGrid& grid, int n_states) const;
    /// g(T, i) <= xi_i for all i (up to 1e-12).
    bool terminal_compatible(const Vector& terminal, double horizon) const;
};

/// How the unreflected part of one backward step is predicted.
///  - explicit_euler: y(t+dt) + dt [A'y(t+dt) + f(t, ., y(t+dt))]
///  - rk4: one RK4 step of the reduced ODE from t+dt to t
enum class Predictor { explicit_euler, rk4 };

const char* to_string(Predictor predictor);

struct PenalizationTracePoint {
    double n = 0.0;
    /// sup-norm distance of v^n to the returned limit candidate
    double sup_distance = 0.0;
};

/// (V, Z, K) in state-space form. `continuation` holds the predictor values
/// before projection onto the obstacle, so k(t_{k+1}) - k(t_k) =
/// v(t_k) - continuation(t_k). z(t_k) is the canonical integrand used on
/// (t_k, t_{k+1}], i.e. the continuation vector (for the penalized limit, v).
struct RbsdeSolution {
    StateGridFunction v;
    StateGridFunction z;
    StateGridFunction k;
    StateGridFunction continuation;
    Predictor predictor = Predictor::explicit_euler;
    std::vector<PenalizationTracePoint> penalization_trace;
};

/// Backward reflected scheme: predictor, then v = max(g, predictor) with the
/// push accumulated into k (k(0) = 0, nondecreasing).
RbsdeSolution solve_reflected(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                              const Obstacle& obstacle, int steps = 1000,
                              Predictor predictor = Predictor::explicit_euler);

/// The penalized BSDE with driver f + n (y - g)^-. Implicit Euler is forced
/// whenever n dt >= 1.
BsdeSolution solve_penalized(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                             const Obstacle& obstacle, double n, int steps = 1000,
                             Scheme scheme = Scheme::implicit_euler);

/// The penalized driver itself, f_n = f + n (y - g)^-.
MarkovDriver penalized_driver(const MarkovDriver& driver, const Obstacle& obstacle, double n);

/// Doubles n from 1 until the sup-norm change drops below tol (NoConvergence
/// past n = 2^20). k is rebuilt as n int_0^t (v^n - g)^- du.
RbsdeSolution penalization_limit(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                                 const Obstacle& obstacle, int steps = 1000, double tol = 1e-3);

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& message, std::vector<PenalizationTracePoint> trace)
        : Error("NoConvergence", message), trace_(std::move(trace)) {}
    const std::vector<PenalizationTracePoint>& trace() const { return trace_; }

private:
    std::vector<PenalizationTracePoint> trace_;
};

/// max over states of |sum_k (v - g)(t_k) (k(t_{k+1}) - k(t_k))|, the Stieltjes
/// sum with the integrand taken where the scheme applies each push.
double skorokhod_integral(const RbsdeSolution& solution, const Obstacle& obstacle);

/// Dynamic-programming value of the optimal stopping problem on the grid:
/// w(T) = xi, w(t) = max(g(t), continuation of w(t + dt)).
StateGridFunction snell_oracle(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                               const Obstacle& obstacle, int steps = 1000,
                               Predictor predictor = Predictor::explicit_euler);

/// First grid time along the path where v <= g + 1e-9; T if never.
double optimal_stop_time(const RbsdeSolution& solution, const Obstacle& obstacle, const ChainPath& path);

}  // namespace chainbsde
