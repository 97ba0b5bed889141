#pragma once

#include <cstdint>
#include <vector>

#include "chainbsde/grid.hpp"
#include "chainbsde/schedule.hpp"

namespace chainbsde {

/// Finite-state continuous-time Markov chain X with values in {e_0..e_{N-1}}
/// and semimartingale form dX = A X dt + dM.
///
/// Generators use the column convention forced by that form: A(i, j) is the
/// jump rate from state j to state i, off-diagonals are nonnegative and every
/// column sums to zero. The generator is piecewise constant in time.
class ChainSpec {
public:
    using Schedule = PiecewiseConstant<Matrix>;

    ChainSpec() = default;

    int n_states() const { return n_states_; }
    int initial_state() const { return initial_state_; }
    double horizon() const { return schedule_.horizon(); }
    const Schedule& generator_schedule() const { return schedule_; }
    const Matrix& generator(double t) const { return schedule_.at(t); }
    std::vector<double> breakpoints() const { return schedule_.breakpoints(); }

    /// Copy of this spec with a different initial state.
    ChainSpec with_initial_state(int state) const;

private:
    friend ChainSpec build_chain_spec(int, std::vector<Schedule::Piece>, int, double);

    int n_states_ = 0;
    int initial_state_ = 0;
    Schedule schedule_;
};

/// Validates and assembles a chain. Throws NonGenerator, BadSchedule or BadState.
ChainSpec build_chain_spec(int n_states, std::vector<ChainSpec::Schedule::Piece> generator_schedule,
                           int initial_state, double horizon);

/// Time-homogeneous convenience overload.
ChainSpec build_chain_spec(int n_states, ChainSpec::Schedule::Piece generator, int initial_state,
                           double horizon);

/// Checks the column-generator conditions; throws NonGenerator with a reason.
void validate_generator(const Matrix& a, double tol = 1e-12);

/// m = max over the schedule of the Frobenius norm of A.
double rate_bound_m(const ChainSpec& spec);

/// One realised trajectory: jump_times[k] is the time of the jump from
/// states[k] to states[k+1].
struct ChainPath {
    std::vector<double> jump_times;
    std::vector<int> states;
    double horizon = 0.0;
    std::uint64_t seed = 0;

    int jumps() const { return static_cast<int>(jump_times.size()); }
    /// Right-continuous state X_t.
    int state_at(double t) const;
    int final_state() const { return states.back(); }
};

/// Exact jump-chain simulation, deterministic for a fixed seed.
ChainPath simulate_path(const ChainSpec& spec, std::uint64_t seed);

/// M_t = X_t - X_0 - int_0^t A_u X_u du at the nodes of a uniform grid.
std::vector<Vector> martingale_path(const ChainPath& path, const ChainSpec& spec, int grid_steps);

/// Density of the predictable quadratic variation, d<X,X>_t = Psi_t dt,
/// evaluated with X_t = e_state.
struct PsiMatrix {
    Matrix matrix;
    int state = 0;
    double time = 0.0;
};

PsiMatrix psi_matrix(const ChainSpec& spec, double t, int state);

/// Psi for an explicit generator: diag(A e_i) - e_i e_i' A' - A e_i e_i'.
Matrix psi_from_generator(const Matrix& a, int state);

/// ||C||^2_{X_t} = C' Psi_t C.
double seminorm_sq(const Vector& c, const PsiMatrix& psi);

/// Moore-Penrose pseudoinverse of a symmetric matrix by eigendecomposition;
/// eigenvalues with |lambda| <= tol * max|lambda| are treated as zero.
Matrix pseudoinverse(const Matrix& q, double tol = 1e-10);

struct ContractionCheck {
    bool holds = true;
    /// min over (node, state) of 1 - l2 ||Psi^+||_F sqrt(6m)
    double worst_margin = 1.0;
    double worst_time = 0.0;
    int worst_state = 0;
    double m = 0.0;
};

/// Evaluates l2 ||Psi_t^+||_F sqrt(6m) < 1 at every grid node and state.
ContractionCheck check_contraction(const ChainSpec& spec, double lipschitz_z, int grid_steps);

/// A maximal piece of a path on which the state and every schedule are
/// constant and which lies inside one grid cell.
struct PathSegment {
    int cell = 0;
    double begin = 0.0;
    double end = 0.0;
    int state = 0;
    /// A jump to next_state happens at `end`.
    bool jump_at_end = false;
    int next_state = 0;
    /// `end` is grid node cell + 1.
    bool ends_at_node = false;
};

/// Splits [0, T] along a path at grid nodes, jump times and the given
/// schedule break times. When a segment ends both at a jump and at a node,
/// the node value is the post-jump (right-continuous) one.
std::vector<PathSegment> path_segments(const ChainPath& path, const TimeGrid& grid,
                                       const std::vector<double>& breaks);

}  // namespace chainbsde
