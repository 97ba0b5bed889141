#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "chainbsde/errors.hpp"

namespace chainbsde {

/// A right-continuous piecewise-constant function of time on [0, horizon].
/// Piece k is active on [start_k, start_{k+1}); the last piece extends to
/// the horizon and beyond.
template <class T>
class PiecewiseConstant {
public:
    struct Piece {
        double start;
        T value;
    };

    PiecewiseConstant() = default;

    PiecewiseConstant(std::vector<Piece> pieces, double horizon)
        : pieces_(std::move(pieces)), horizon_(horizon) {
        if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
            throw BadSchedule("horizon must be positive and finite");
        if (pieces_.empty()) throw BadSchedule("schedule has no pieces");
        if (pieces_.front().start != 0.0)
            throw BadSchedule("schedule must start at t = 0 (gap at the origin)");
        for (std::size_t k = 1; k < pieces_.size(); ++k) {
            if (!(pieces_[k].start > pieces_[k - 1].start))
                throw BadSchedule("schedule start times must be strictly increasing (overlap)");
        }
        if (!(pieces_.back().start < horizon_))
            throw BadSchedule("schedule piece starts at or after the horizon");
    }

    /// Constant schedule.
    static PiecewiseConstant constant(T value, double horizon) {
        return PiecewiseConstant({Piece{0.0, std::move(value)}}, horizon);
    }

    const T& at(double t) const {
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                                   [](double x, const Piece& p) { return x < p.start; });
        if (it == pieces_.begin()) return pieces_.front().value;
        return std::prev(it)->value;
    }

    /// Interior break times, strictly inside (0, horizon).
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        for (std::size_t k = 1; k < pieces_.size(); ++k) out.push_back(pieces_[k].start);
        return out;
    }

    const std::vector<Piece>& pieces() const { return pieces_; }
    double horizon() const { return horizon_; }
    bool empty() const { return pieces_.empty(); }

private:
    std::vector<Piece> pieces_;
    double horizon_ = 0.0;
};

/// Sorted, de-duplicated union of break times strictly inside (0, horizon).
inline std::vector<double> merge_breakpoints(std::vector<double> a, const std::vector<double>& b,
                                             double horizon) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::erase_if(a, [horizon](double t) { return !(t > 0.0 && t < horizon); });
    return a;
}

}  // namespace chainbsde
