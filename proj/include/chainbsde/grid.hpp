#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace chainbsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Uniform time grid t_k = k T / K, k = 0..K.
struct TimeGrid {
    double horizon = 0.0;
    int steps = 0;

    TimeGrid() = default;
    TimeGrid(double horizon, int steps);

    double dt() const { return horizon / steps; }
    double time(int k) const { return k == steps ? horizon : horizon * k / steps; }
    int nodes() const { return steps + 1; }
    /// Index of the cell [t_k, t_{k+1}) containing t; clamps to [0, steps-1].
    int cell(double t) const;

    bool operator==(const TimeGrid&) const = default;
};

/// A function [0,T] -> R^N sampled on a uniform grid: values[k] is the
/// vector at t_k.
struct StateGridFunction {
    TimeGrid grid;
    std::vector<Vector> values;

    StateGridFunction() = default;
    StateGridFunction(TimeGrid grid, int n_states, double fill = 0.0);

    int n_states() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
    const Vector& at(int k) const { return values[static_cast<std::size_t>(k)]; }
    Vector& at(int k) { return values[static_cast<std::size_t>(k)]; }
    double operator()(int k, int state) const { return values[static_cast<std::size_t>(k)](state); }

    /// Largest absolute entry.
    double sup_norm() const;
    bool all_finite() const;
};

/// sup over nodes and states of |a - b|; grids must agree.
double sup_distance(const StateGridFunction& a, const StateGridFunction& b);

/// Interior sub-interval cut points of [a, b] taken from sorted `breaks`.
std::vector<double> cut_points(double a, double b, const std::vector<double>& breaks);

}  // namespace chainbsde
