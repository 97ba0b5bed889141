#include "chainbsde/rbsde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chainbsde {

StateGridFunction Obstacle::sample(const TimeGrid& grid, int n_states) const {
    StateGridFunction out(grid, n_states);
    for (int k = 0; k < grid.nodes(); ++k)
        for (int i = 0; i < n_states; ++i) out.at(k)(i) = g(grid.time(k), i);
    return out;
}

bool Obstacle::terminal_compatible(const Vector& terminal, double horizon) const {
    for (Eigen::Index i = 0; i < terminal.size(); ++i)
        if (g(horizon, static_cast<int>(i)) > terminal(i) + 1e-12 * (1.0 + std::abs(terminal(i)))) return false;
    return true;
}

const char* to_string(Predictor predictor) {
    return predictor == Predictor::explicit_euler ? "explicit_euler" : "rk4";
}

namespace {

void require_compatible(const ChainSpec& spec, const Vector& terminal, const Obstacle& obstacle) {
    if (terminal.size() != spec.n_states()) throw DimensionMismatch("terminal vector has wrong length");
    if (!obstacle.terminal_compatible(terminal, spec.horizon()))
        throw ObstacleIncompatible("obstacle exceeds the terminal condition at T");
}

Vector euler_predictor(const ChainSpec& spec, const MarkovDriver& driver, const std::vector<double>& breaks,
                       double t_left, double t_right, const Vector& y_right) {
    const auto cuts = cut_points(t_left, t_right, breaks);
    Vector out = y_right;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s)
        out += (cuts[s + 1] - cuts[s]) * reduced_rhs(spec, driver, cuts[s], y_right);
    return out;
}

Vector predict(Predictor predictor, const ChainSpec& spec, const MarkovDriver& driver,
               const std::vector<double>& breaks, double t_left, double t_right, const Vector& y_right) {
    return predictor == Predictor::rk4 ? detail::backward_rk4(spec, driver, breaks, t_left, t_right, y_right)
                                       : euler_predictor(spec, driver, breaks, t_left, t_right, y_right);
}

}  // namespace

RbsdeSolution solve_reflected(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                              const Obstacle& obstacle, int steps, Predictor predictor) {
    if (steps < 2) throw PreconditionUnmet("solve_reflected needs at least 2 steps");
    require_compatible(spec, terminal, obstacle);

    const TimeGrid grid(spec.horizon(), steps);
    const int n = spec.n_states();
    const auto breaks = detail::solver_breaks(spec, driver);
    RbsdeSolution sol;
    sol.predictor = predictor;
    sol.v = StateGridFunction(grid, n);
    sol.continuation = StateGridFunction(grid, n);
    sol.k = StateGridFunction(grid, n);
    sol.v.at(steps) = terminal;
    sol.continuation.at(steps) = terminal;

    std::vector<Vector> push(static_cast<std::size_t>(steps), Vector::Zero(n));
    for (int k = steps - 1; k >= 0; --k) {
        const double t = grid.time(k);
        const Vector cont = predict(predictor, spec, driver, breaks, t, grid.time(k + 1), sol.v.at(k + 1));
        if (!cont.allFinite()) {
            std::ostringstream os;
            os << "reflected scheme blew up at t = " << t;
            throw NonFinite(os.str());
        }
        sol.continuation.at(k) = cont;
        Vector& v = sol.v.at(k);
        v = cont;
        for (int i = 0; i < n; ++i) {
            const double g = obstacle(t, i);
            if (g > cont(i)) {
                v(i) = g;
                push[static_cast<std::size_t>(k)](i) = g - cont(i);
            }
        }
    }
    // k(t_{k+1}) - k(t_k) is the push applied at t_k
    for (int k = 0; k < steps; ++k) sol.k.at(k + 1) = sol.k.at(k) + push[static_cast<std::size_t>(k)];
    sol.z = sol.continuation;
    return sol;
}

MarkovDriver penalized_driver(const MarkovDriver& driver, const Obstacle& obstacle, double n) {
    MarkovDriver out;
    out.evaluate = [base = driver.evaluate, g = obstacle.g, n](double t, int i, double y, const Vector& z) {
        return base(t, i, y, z) + n * std::max(g(t, i) - y, 0.0);
    };
    out.lipschitz_y = driver.lipschitz_y + n;
    out.lipschitz_z = driver.lipschitz_z;
    out.breakpoints = driver.breakpoints;
    return out;
}

BsdeSolution solve_penalized(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                             const Obstacle& obstacle, double n, int steps, Scheme scheme) {
    if (!(n >= 1.0)) throw PreconditionUnmet("penalty parameter must be >= 1");
    const double dt = spec.horizon() / steps;
    if (n * dt >= 1.0) scheme = Scheme::implicit_euler;
    return solve_bsde(spec, penalized_driver(driver, obstacle, n), terminal, steps, scheme);
}

RbsdeSolution penalization_limit(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                                 const Obstacle& obstacle, int steps, double tol) {
    if (!(tol > 0.0)) throw PreconditionUnmet("tolerance must be positive");
    require_compatible(spec, terminal, obstacle);
    constexpr double kMaxPenalty = 1048576.0;  // 2^20

    std::vector<std::pair<double, StateGridFunction>> history;
    double n = 1.0;
    history.emplace_back(n, solve_penalized(spec, driver, terminal, obstacle, n, steps).y);
    bool converged = false;
    while (true) {
        n *= 2.0;
        if (n > kMaxPenalty) break;
        history.emplace_back(n, solve_penalized(spec, driver, terminal, obstacle, n, steps).y);
        const double change = sup_distance(history[history.size() - 1].second, history[history.size() - 2].second);
        if (change < tol) {
            converged = true;
            break;
        }
    }

    const StateGridFunction& limit = history.back().second;
    std::vector<PenalizationTracePoint> trace;
    for (const auto& [penalty, v] : history) trace.push_back({penalty, sup_distance(v, limit)});
    if (!converged) {
        std::ostringstream os;
        os << "penalization did not converge to tol " << tol << " before n = 2^20";
        throw NoConvergence(os.str(), trace);
    }

    RbsdeSolution sol;
    sol.v = limit;
    sol.z = limit;
    sol.continuation = limit;
    sol.penalization_trace = std::move(trace);
    const TimeGrid& grid = limit.grid;
    const int states = spec.n_states();
    const double penalty = history.back().first;
    sol.k = StateGridFunction(grid, states);
    auto deficit = [&](int k) {
        Vector d(states);
        for (int i = 0; i < states; ++i) d(i) = std::max(obstacle(grid.time(k), i) - limit(k, i), 0.0);
        return d;
    };
    Vector left = deficit(0);
    for (int k = 0; k < grid.steps; ++k) {
        const Vector right = deficit(k + 1);
        sol.k.at(k + 1) = sol.k.at(k) + penalty * 0.5 * grid.dt() * (left + right);
        left = right;
    }
    return sol;
}

double skorokhod_integral(const RbsdeSolution& solution, const Obstacle& obstacle) {
    const TimeGrid& grid = solution.v.grid;
    const int n = solution.v.n_states();
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int k = 0; k < grid.steps; ++k) {
            const double gap = solution.v(k, i) - obstacle(grid.time(k), i);
            sum += gap * (solution.k(k + 1, i) - solution.k(k, i));
        }
        worst = std::max(worst, std::abs(sum));
    }
    return worst;
}

StateGridFunction snell_oracle(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                               const Obstacle& obstacle, int steps, Predictor predictor) {
    if (steps < 2) throw PreconditionUnmet("snell_oracle needs at least 2 steps");
    require_compatible(spec, terminal, obstacle);
    const TimeGrid grid(spec.horizon(), steps);
    const auto breaks = detail::solver_breaks(spec, driver);
    StateGridFunction w(grid, spec.n_states());
    w.at(steps) = terminal;
    for (int k = steps - 1; k >= 0; --k) {
        const double t = grid.time(k);
        // value of continuing one step, then stopping optimally
        const Vector hold = predict(predictor, spec, driver, breaks, t, grid.time(k + 1), w.at(k + 1));
        for (int i = 0; i < spec.n_states(); ++i) w.at(k)(i) = std::max(obstacle(t, i), hold(i));
    }
    return w;
}

double optimal_stop_time(const RbsdeSolution& solution, const Obstacle& obstacle, const ChainPath& path) {
    const TimeGrid& grid = solution.v.grid;
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.time(k);
        const int state = path.state_at(t);
        if (solution.v(k, state) <= obstacle(t, state) + 1e-9) return t;
    }
    return grid.horizon;
}

}  // namespace chainbsde
