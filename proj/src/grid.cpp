#include "chainbsde/grid.hpp"

#include <algorithm>
#include <cmath>

#include "chainbsde/errors.hpp"

namespace chainbsde {

TimeGrid::TimeGrid(double horizon_, int steps_) : horizon(horizon_), steps(steps_) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw BadSchedule("grid horizon must be positive");
    if (steps < 1) throw BadSchedule("grid needs at least one step");
}

int TimeGrid::cell(double t) const {
    int k = std::clamp(static_cast<int>(std::floor(t / dt())), 0, steps - 1);
    // t / dt can land just below an integer at a node
    if (k + 1 < steps && time(k + 1) <= t) ++k;
    if (k > 0 && time(k) > t) --k;
    return k;
}

StateGridFunction::StateGridFunction(TimeGrid g, int n_states, double fill)
    : grid(g), values(static_cast<std::size_t>(g.nodes()), Vector::Constant(n_states, fill)) {}

double StateGridFunction::sup_norm() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, v.cwiseAbs().maxCoeff());
    return m;
}

bool StateGridFunction::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](const Vector& v) { return v.allFinite(); });
}

double sup_distance(const StateGridFunction& a, const StateGridFunction& b) {
    if (!(a.grid == b.grid) || a.n_states() != b.n_states())
        throw DimensionMismatch("grid functions live on different grids");
    double m = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k)
        m = std::max(m, (a.values[k] - b.values[k]).cwiseAbs().maxCoeff());
    return m;
}

std::vector<double> cut_points(double a, double b, const std::vector<double>& breaks) {
    std::vector<double> out{a};
    auto it = std::upper_bound(breaks.begin(), breaks.end(), a);
    for (; it != breaks.end() && *it < b; ++it) out.push_back(*it);
    out.push_back(b);
    return out;
}

}  // namespace chainbsde
