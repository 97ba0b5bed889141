#include "chainbsde/bsde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/LU>

namespace chainbsde {

MarkovDriver zero_driver() {
    MarkovDriver d;
    d.evaluate = [](double, int, double, const Vector&) { return 0.0; };
    return d;
}

MarkovDriver discount_driver(double rate) {
    MarkovDriver d;
    d.evaluate = [rate](double, int, double y, const Vector&) { return -rate * y; };
    d.lipschitz_y = std::abs(rate);
    return d;
}

const char* to_string(Scheme scheme) {
    return scheme == Scheme::explicit_rk4 ? "explicit_rk4" : "implicit_euler";
}

Vector reduced_rhs(const ChainSpec& spec, const MarkovDriver& driver, double t, const Vector& y) {
    Vector out = spec.generator(t).transpose() * y;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        out(i) += driver(t, static_cast<int>(i), y(i), y);
    return out;
}

namespace detail {

std::vector<double> solver_breaks(const ChainSpec& spec, const MarkovDriver& driver) {
    return merge_breakpoints(spec.breakpoints(), driver.breakpoints, spec.horizon());
}

Vector backward_rk4(const ChainSpec& spec, const MarkovDriver& driver,
                    const std::vector<double>& breaks, double t_left, double t_right,
                    const Vector& y_right) {
    const auto cuts = cut_points(t_left, t_right, breaks);
    Vector y = y_right;
    for (std::size_t s = cuts.size() - 1; s > 0; --s) {
        const double a = cuts[s - 1];
        const double b = cuts[s];
        const double h = b - a;
        // left limit at b so that right-continuous data resolve to [a, b)
        const double top = std::nextafter(b, a);
        const double mid = 0.5 * (a + b);
        const Vector k1 = reduced_rhs(spec, driver, top, y);
        const Vector k2 = reduced_rhs(spec, driver, mid, y + 0.5 * h * k1);
        const Vector k3 = reduced_rhs(spec, driver, mid, y + 0.5 * h * k2);
        const Vector k4 = reduced_rhs(spec, driver, a, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

namespace {

// Solves x - y_right - h F(t, x) = 0 by damped Newton with a forward-difference Jacobian.
Vector implicit_step(const ChainSpec& spec, const MarkovDriver& driver, double t, double h,
                     const Vector& y_right) {
    const Eigen::Index n = y_right.size();
    auto residual = [&](const Vector& x) -> Vector { return x - y_right - h * reduced_rhs(spec, driver, t, x); };

    Vector x = y_right;
    Vector g = residual(x);
    for (int iter = 0; iter < 100; ++iter) {
        const double scale = 1.0 + x.cwiseAbs().maxCoeff();
        if (g.cwiseAbs().maxCoeff() <= 1e-15 * scale) break;
        Matrix jac(n, n);
        const Vector f0 = reduced_rhs(spec, driver, t, x);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double eps = 1e-7 * (1.0 + std::abs(x(j)));
            Vector xp = x;
            xp(j) += eps;
            jac.col(j) = (reduced_rhs(spec, driver, t, xp) - f0) / eps;
        }
        jac = Matrix::Identity(n, n) - h * jac;
        const Vector dx = jac.partialPivLu().solve(-g);
        double alpha = 1.0;
        const double g_norm = g.norm();
        Vector x_new = x + dx;
        Vector g_new = residual(x_new);
        while (g_new.norm() > (1.0 - 1e-4 * alpha) * g_norm && alpha > 1e-8) {
            alpha *= 0.5;
            x_new = x + alpha * dx;
            g_new = residual(x_new);
        }
        x = x_new;
        g = g_new;
        if ((alpha * dx).cwiseAbs().maxCoeff() <= 1e-16 * scale) break;
    }
    return x;
}

}  // namespace

Vector backward_implicit_euler(const ChainSpec& spec, const MarkovDriver& driver,
                               const std::vector<double>& breaks, double t_left, double t_right,
                               const Vector& y_right) {
    const auto cuts = cut_points(t_left, t_right, breaks);
    Vector y = y_right;
    for (std::size_t s = cuts.size() - 1; s > 0; --s)
        y = implicit_step(spec, driver, cuts[s - 1], cuts[s] - cuts[s - 1], y);
    return y;
}

HermiteCell::HermiteCell(const ChainSpec& spec, const MarkovDriver& driver, const StateGridFunction& y,
                         int k)
    : a_(y.grid.time(k)), b_(y.grid.time(k + 1)), ya_(y.at(k)), yb_(y.at(k + 1)) {
    da_ = -reduced_rhs(spec, driver, a_, ya_);
    db_ = -reduced_rhs(spec, driver, std::nextafter(b_, a_), yb_);
}

Vector HermiteCell::operator()(double t) const {
    const double h = b_ - a_;
    const double s = (t - a_) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * ya_ + h10 * h * da_ + h01 * yb_ + h11 * h * db_;
}

}  // namespace detail

BsdeSolution solve_bsde(const ChainSpec& spec, const MarkovDriver& driver, const Vector& terminal,
                        int steps, Scheme scheme, bool strict_contraction) {
    if (steps < 2) throw PreconditionUnmet("solve_bsde needs at least 2 steps");
    if (terminal.size() != spec.n_states()) throw DimensionMismatch("terminal vector has wrong length");

    BsdeSolution sol;
    sol.scheme = scheme;
    sol.steps = steps;
    sol.contraction = check_contraction(spec, driver.lipschitz_z, steps);
    if (strict_contraction && !sol.contraction.holds) {
        std::ostringstream os;
        os << "contraction condition fails: margin " << sol.contraction.worst_margin << " at t = "
           << sol.contraction.worst_time << ", state " << sol.contraction.worst_state;
        throw ContractionViolated(os.str());
    }

    const TimeGrid grid(spec.horizon(), steps);
    const auto breaks = detail::solver_breaks(spec, driver);
    sol.y = StateGridFunction(grid, spec.n_states());
    sol.y.at(steps) = terminal;
    for (int k = steps - 1; k >= 0; --k) {
        const Vector& next = sol.y.at(k + 1);
        sol.y.at(k) = scheme == Scheme::explicit_rk4
                          ? detail::backward_rk4(spec, driver, breaks, grid.time(k), grid.time(k + 1), next)
                          : detail::backward_implicit_euler(spec, driver, breaks, grid.time(k),
                                                            grid.time(k + 1), next);
        if (!sol.y.at(k).allFinite()) {
            std::ostringstream os;
            os << "solution blew up at t = " << grid.time(k);
            throw NonFinite(os.str());
        }
    }
    return sol;
}

namespace {

// 3-point Gauss-Legendre nodes/weights on [0, 1].
constexpr std::array<double, 3> kGaussNodes{0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
constexpr std::array<double, 3> kGaussWeights{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

}  // namespace

double pathwise_residual(const BsdeSolution& solution, const ChainPath& path, const ChainSpec& spec,
                         const MarkovDriver& driver, const Vector& terminal) {
    const TimeGrid& grid = solution.y.grid;
    const auto segments = path_segments(path, grid, detail::solver_breaks(spec, driver));

    // J(t) = int_0^t (f + Z'A X) du - sum_{jumps <= t} Z' dX; RHS(t_k) = xi + J(T) - J(t_k)
    std::vector<double> cumulative(static_cast<std::size_t>(grid.nodes()), 0.0);
    std::vector<int> node_state(static_cast<std::size_t>(grid.nodes()), path.states.front());
    double acc = 0.0;
    int current_cell = -1;
    std::optional<detail::HermiteCell> cell;
    for (const auto& seg : segments) {
        if (seg.cell != current_cell) {
            cell.emplace(spec, driver, solution.y, seg.cell);
            current_cell = seg.cell;
        }
        const double len = seg.end - seg.begin;
        if (len > 0.0) {
            const double t_eval_hint = seg.begin + 0.5 * len;
            const Matrix& a = spec.generator(t_eval_hint);
            double integral = 0.0;
            for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
                const double u = seg.begin + kGaussNodes[q] * len;
                const Vector z = (*cell)(u);
                integral += kGaussWeights[q] *
                            (driver(u, seg.state, z(seg.state), z) + z.dot(a.col(seg.state)));
            }
            acc += integral * len;
        }
        if (seg.jump_at_end) {
            const Vector z = (*cell)(seg.end);
            acc -= z(seg.next_state) - z(seg.state);
        }
        if (seg.ends_at_node) {
            cumulative[static_cast<std::size_t>(seg.cell + 1)] = acc;
            node_state[static_cast<std::size_t>(seg.cell + 1)] = seg.jump_at_end ? seg.next_state : seg.state;
        }
    }

    const double xi = terminal(path.final_state());
    const double total = cumulative.back();
    double worst = 0.0;
    for (int k = 0; k < grid.nodes(); ++k) {
        const double lhs = solution.y(k, node_state[static_cast<std::size_t>(k)]);
        const double rhs = xi + total - cumulative[static_cast<std::size_t>(k)];
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

ComparisonReport comparison_check(const ChainSpec& spec, const MarkovDriver& driver1,
                                  const Vector& terminal1, const MarkovDriver& driver2,
                                  const Vector& terminal2, int steps) {
    if ((terminal1.array() > terminal2.array()).any())
        throw PreconditionUnmet("terminal1 must be <= terminal2 componentwise");
    const auto assumption = check_contraction(spec, driver1.lipschitz_z, steps);
    if (!assumption.holds) throw ContractionViolated("driver1 does not satisfy the contraction condition");

    const BsdeSolution s1 = solve_bsde(spec, driver1, terminal1, steps);
    const BsdeSolution s2 = solve_bsde(spec, driver2, terminal2, steps);

    const TimeGrid& grid = s2.y.grid;
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.time(k);
        const Vector& y2 = s2.y.at(k);
        for (int i = 0; i < spec.n_states(); ++i) {
            const double f1 = driver1(t, i, y2(i), y2);
            const double f2 = driver2(t, i, y2(i), y2);
            if (f1 > f2 + 1e-12 * (1.0 + std::abs(f2))) {
                std::ostringstream os;
                os << "driver1 > driver2 at t = " << t << ", state " << i;
                throw PreconditionUnmet(os.str());
            }
        }
    }

    ComparisonReport report;
    report.max_violation = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid.nodes(); ++k)
        report.max_violation = std::max(report.max_violation, (s1.y.at(k) - s2.y.at(k)).maxCoeff());
    report.holds = report.max_violation <= 1e-9;
    return report;
}

}  // namespace chainbsde
