#include "chainbsde/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace chainbsde {

void validate_generator(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) throw NonGenerator("generator is not square");
    if (!a.allFinite()) throw NonGenerator("generator has non-finite entries");
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (i != j && a(i, j) < 0.0) {
                std::ostringstream os;
                os << "negative off-diagonal rate A(" << i << "," << j << ") = " << a(i, j);
                throw NonGenerator(os.str());
            }
        }
        const double col = a.col(j).sum();
        const double scale = std::max(1.0, a.col(j).cwiseAbs().maxCoeff());
        if (std::abs(col) > tol * scale) {
            std::ostringstream os;
            os << "column " << j << " sums to " << col << " (expected 0)";
            throw NonGenerator(os.str());
        }
    }
}

ChainSpec ChainSpec::with_initial_state(int state) const {
    if (state < 0 || state >= n_states_) throw BadState("initial state out of range");
    ChainSpec copy = *this;
    copy.initial_state_ = state;
    return copy;
}

ChainSpec build_chain_spec(int n_states, std::vector<ChainSpec::Schedule::Piece> generator_schedule,
                           int initial_state, double horizon) {
    if (n_states < 1) throw BadState("need at least one state");
    if (initial_state < 0 || initial_state >= n_states) {
        std::ostringstream os;
        os << "initial state " << initial_state << " outside [0, " << n_states << ")";
        throw BadState(os.str());
    }
    for (const auto& piece : generator_schedule) {
        if (piece.value.rows() != n_states || piece.value.cols() != n_states)
            throw NonGenerator("generator dimension does not match the state count");
        validate_generator(piece.value);
    }
    ChainSpec spec;
    spec.n_states_ = n_states;
    spec.initial_state_ = initial_state;
    spec.schedule_ = ChainSpec::Schedule(std::move(generator_schedule), horizon);
    return spec;
}

ChainSpec build_chain_spec(int n_states, ChainSpec::Schedule::Piece generator, int initial_state,
                           double horizon) {
    return build_chain_spec(n_states, std::vector<ChainSpec::Schedule::Piece>{std::move(generator)},
                            initial_state, horizon);
}

double rate_bound_m(const ChainSpec& spec) {
    double m = 0.0;
    for (const auto& piece : spec.generator_schedule().pieces()) m = std::max(m, piece.value.norm());
    return m;
}

int ChainPath::state_at(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return states[static_cast<std::size_t>(it - jump_times.begin())];
}

namespace {

// Uniform on the open interval (0, 1) from the top 53 bits.
double open_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

ChainPath simulate_path(const ChainSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ChainPath path;
    path.horizon = spec.horizon();
    path.seed = seed;
    path.states.push_back(spec.initial_state());

    const auto& pieces = spec.generator_schedule().pieces();
    const double horizon = spec.horizon();
    double t = 0.0;
    int state = spec.initial_state();
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        const Matrix& a = pieces[p].value;
        const double piece_end = p + 1 < pieces.size() ? pieces[p + 1].start : horizon;
        while (true) {
            const double rate = -a(state, state);
            if (!(rate > 0.0)) break;  // absorbing on this piece
            const double hold = -std::log(open_uniform(rng)) / rate;
            if (t + hold >= piece_end) break;  // memoryless: resample on the next piece
            t += hold;
            double u = open_uniform(rng) * rate;
            int target = -1;
            for (int i = 0; i < spec.n_states(); ++i) {
                if (i == state) continue;
                const double q = a(i, state);
                if (q <= 0.0) continue;
                target = i;
                if (u < q) break;
                u -= q;
            }
            path.jump_times.push_back(t);
            path.states.push_back(target);
            state = target;
        }
        t = piece_end;
    }
    return path;
}

std::vector<PathSegment> path_segments(const ChainPath& path, const TimeGrid& grid,
                                       const std::vector<double>& breaks) {
    struct Event {
        double time;
        bool jump;
    };
    std::vector<PathSegment> out;
    out.reserve(static_cast<std::size_t>(grid.steps) + 2 * path.jump_times.size() + breaks.size());
    std::size_t jump_index = 0;
    auto brk = std::upper_bound(breaks.begin(), breaks.end(), 0.0);
    int state = path.states.front();
    std::vector<Event> events;
    for (int k = 0; k < grid.steps; ++k) {
        const double cell_begin = grid.time(k);
        const double cell_end = grid.time(k + 1);
        events.clear();
        for (std::size_t j = jump_index; j < path.jump_times.size() && path.jump_times[j] <= cell_end; ++j)
            events.push_back({path.jump_times[j], true});
        for (; brk != breaks.end() && *brk < cell_end; ++brk)
            if (*brk > cell_begin) events.push_back({*brk, false});
        std::stable_sort(events.begin(), events.end(),
                         [](const Event& a, const Event& b) { return a.time < b.time; });

        double begin = cell_begin;
        for (const Event& e : events) {
            if (!e.jump && !(e.time > begin)) continue;
            PathSegment seg;
            seg.cell = k;
            seg.begin = begin;
            seg.end = e.time;
            seg.state = state;
            seg.next_state = state;
            if (e.jump) {
                seg.jump_at_end = true;
                seg.next_state = path.states[jump_index + 1];
                state = seg.next_state;
                ++jump_index;
            }
            seg.ends_at_node = e.time == cell_end;
            out.push_back(seg);
            begin = e.time;
        }
        if (begin < cell_end) {
            PathSegment seg;
            seg.cell = k;
            seg.begin = begin;
            seg.end = cell_end;
            seg.state = state;
            seg.next_state = state;
            seg.ends_at_node = true;
            out.push_back(seg);
        }
    }
    return out;
}

std::vector<Vector> martingale_path(const ChainPath& path, const ChainSpec& spec, int grid_steps) {
    const TimeGrid grid(spec.horizon(), grid_steps);
    const int n = spec.n_states();
    std::vector<Vector> out(static_cast<std::size_t>(grid.nodes()), Vector::Zero(n));
    Vector drift = Vector::Zero(n);  // int_0^t A_u X_u du
    int state = path.states.front();
    for (const auto& seg : path_segments(path, grid, spec.breakpoints())) {
        const Matrix& a = spec.generator(seg.begin);
        drift += (seg.end - seg.begin) * a.col(seg.state);
        state = seg.jump_at_end ? seg.next_state : seg.state;
        if (seg.ends_at_node) {
            Vector m = -drift;
            m(state) += 1.0;
            m(path.states.front()) -= 1.0;
            out[static_cast<std::size_t>(seg.cell + 1)] = m;
        }
    }
    return out;
}

Matrix psi_from_generator(const Matrix& a, int state) {
    const Eigen::Index n = a.rows();
    Matrix psi = Matrix::Zero(n, n);
    psi.diagonal() = a.col(state);
    psi.row(state) -= a.col(state).transpose();  // diag(X) A'
    psi.col(state) -= a.col(state);              // A diag(X)
    return psi;
}

PsiMatrix psi_matrix(const ChainSpec& spec, double t, int state) {
    if (state < 0 || state >= spec.n_states()) throw BadState("state out of range");
    return PsiMatrix{psi_from_generator(spec.generator(t), state), state, t};
}

double seminorm_sq(const Vector& c, const PsiMatrix& psi) {
    if (c.size() != psi.matrix.rows()) throw DimensionMismatch("seminorm vector has wrong length");
    return c.dot(psi.matrix * c);
}

Matrix pseudoinverse(const Matrix& q, double tol) {
    const Eigen::Index n = q.rows();
    if (n == 0) return q;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(q);
    const Vector& lambda = eig.eigenvalues();
    const double largest = lambda.cwiseAbs().maxCoeff();
    if (largest == 0.0) return Matrix::Zero(n, n);
    Vector inv = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(lambda(i)) > tol * largest) inv(i) = 1.0 / lambda(i);
    const Matrix& v = eig.eigenvectors();
    return v * inv.asDiagonal() * v.transpose();
}

ContractionCheck check_contraction(const ChainSpec& spec, double lipschitz_z, int grid_steps) {
    ContractionCheck report;
    report.m = rate_bound_m(spec);
    const double root = std::sqrt(6.0 * report.m);
    const TimeGrid grid(spec.horizon(), grid_steps);
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.time(k);
        for (int i = 0; i < spec.n_states(); ++i) {
            const double norm = pseudoinverse(psi_matrix(spec, t, i).matrix).norm();
            const double margin = 1.0 - lipschitz_z * norm * root;
            if (margin < report.worst_margin) {
                report.worst_margin = margin;
                report.worst_time = t;
                report.worst_state = i;
            }
        }
    }
    report.holds = report.worst_margin > 0.0;
    return report;
}

}  // namespace chainbsde
