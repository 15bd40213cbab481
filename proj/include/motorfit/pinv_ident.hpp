#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "motorfit/error.hpp"
#include "motorfit/linalg.hpp"
#include "motorfit/lti.hpp"
#include "motorfit/signal_prep.hpp"
#include "motorfit/state_space.hpp"
#include "motorfit/trace.hpp"
#include "motorfit/transfer_function.hpp"

namespace motorfit {

/// Stacked Z(t_k) = Q(t_k) * Lambda over L sample instants, with
/// Lambda = [a_1 ... a_n B^T]^T (a_j = row j of A).
///
/// Row k*n + j of `mat` carries X(t_k)^T in columns [j*n, j*n + n) and the
/// input in column n*n + j; the matching `lhs` entry is dX_j/dt at t_k.
struct RegressionSystem {
    Matrix mat;
    Vector lhs;
    int n = 0;
    std::size_t L = 0;
};

/// Fewest sample instants accepted for an n-state regression.
inline std::size_t min_regression_samples(int n) { return static_cast<std::size_t>(n * n + n); }

/// Builds the regression from sampled states (L x n), their derivatives
/// (L x n) and the input at each instant.
inline RegressionSystem assemble_regression(const Matrix& states, const Matrix& derivatives, const Vector& input) {
    const auto L = states.rows();
    const auto n = states.cols();
    if (n < 1) throw InvalidInput("regression: need at least one state");
    if (derivatives.rows() != L || derivatives.cols() != n || input.size() != L)
        throw InvalidInput("regression: states, derivatives and input disagree in size");
    if (static_cast<std::size_t>(L) < min_regression_samples(static_cast<int>(n)))
        throw InvalidInput("regression: " + std::to_string(L) + " samples are too few for " + std::to_string(n) +
                           " states (need " + std::to_string(min_regression_samples(static_cast<int>(n))) + ")");

    RegressionSystem sys;
    sys.n = static_cast<int>(n);
    sys.L = static_cast<std::size_t>(L);
    sys.mat = Matrix::Zero(n * L, n * n + n);
    sys.lhs = Vector(n * L);
    for (Eigen::Index k = 0; k < L; ++k) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index row = k * n + j;
            sys.mat.block(row, j * n, 1, n) = states.row(k);
            sys.mat(row, n * n + j) = input(k);
            sys.lhs(row) = derivatives(k, j);
        }
    }
    return sys;
}

inline RegressionSystem assemble_regression(const Matrix& states, const Matrix& derivatives, double va) {
    return assemble_regression(states, derivatives, Vector::Constant(states.rows(), va));
}

/// Regression from a preprocessed record. States are [position, velocity]
/// or [position, velocity, current]; acceleration and dI/dt come from the
/// five-point central difference, and the measured channels are cropped by
/// two samples at each end to share its grid.
inline RegressionSystem build_regression(const SyncedRecord& record, int states, double va) {
    if (states != 2 && states != 3) throw InvalidInput("build_regression: states must be 2 or 3");
    if (states == 3 && !record.has("current"))
        throw InvalidInput("build_regression: a 3-state model needs a 'current' channel");
    const Trace& pos = record.channel("position");
    const Trace& vel = record.channel("velocity");
    if (pos.size() != vel.size()) throw InvalidInput("build_regression: channel lengths differ");
    if (vel.size() < 5) throw InvalidInput("build_regression: too few samples for differentiation");

    const Trace acc = differentiate(vel, DiffScheme::central5);
    const auto L = static_cast<Eigen::Index>(acc.size());
    Matrix X(L, states), Xdot(L, states);
    const Trace pos_c = crop(pos, 2, 2);
    const Trace vel_c = crop(vel, 2, 2);
    for (Eigen::Index k = 0; k < L; ++k) {
        X(k, 0) = pos_c[k];
        X(k, 1) = vel_c[k];
        Xdot(k, 0) = vel_c[k];
        Xdot(k, 1) = acc[k];
    }
    if (states == 3) {
        const Trace& cur = record.channel("current");
        if (cur.size() != vel.size()) throw InvalidInput("build_regression: channel lengths differ");
        const Trace dcur = differentiate(cur, DiffScheme::central5);
        const Trace cur_c = crop(cur, 2, 2);
        for (Eigen::Index k = 0; k < L; ++k) {
            X(k, 2) = cur_c[k];
            Xdot(k, 2) = dcur[k];
        }
    }
    return assemble_regression(X, Xdot, va);
}

struct PinvSolution {
    Matrix A;
    Matrix B;
    double residual = 0.0;
    Eigen::Index rank = 0;
    bool rank_deficient = false;
    Vector singular_values;
};

inline constexpr double kDefaultRcond = 1e-10;

inline PinvSolution pinv_solve(const RegressionSystem& sys, double rcond = kDefaultRcond) {
    const int n = sys.n;
    if (n < 1 || sys.mat.cols() != n * n + n || sys.mat.rows() != sys.lhs.size())
        throw InvalidInput("pinv_solve: malformed regression system");
    const auto ls = solve_pinv(sys.mat, sys.lhs, rcond);
    PinvSolution out;
    out.A = Matrix(n, n);
    out.B = Matrix(n, 1);
    for (int j = 0; j < n; ++j) {
        out.A.row(j) = ls.x.segment(j * n, n).transpose();
        out.B(j, 0) = ls.x(n * n + j);
    }
    out.residual = ls.residual;
    out.rank = ls.rank;
    out.rank_deficient = ls.rank_deficient;
    out.singular_values = ls.singular_values;
    return out;
}

inline constexpr double kDefaultCancelTol = 0.05;

struct PinvIdentification {
    StateSpaceModel model;  ///< C selects velocity
    TransferFunction velocity_raw;
    TransferFunction position_raw;
    TransferFunction velocity;  ///< after near pole/zero cancellation
    TransferFunction position;
    PinvSolution solution;
    /// ||row 1 of A - [0 1 0...]||, zero for an ideal kinematic first row.
    double first_row_deviation = 0.0;
};

/// Pseudo-inverse identification of a preprocessed step record
/// (synchronized, unwrapped, zero-shifted, decimated).
inline PinvIdentification identify_pinv(const SyncedRecord& record, int states, double va,
                                        double cancel_tol = kDefaultCancelTol, double rcond = kDefaultRcond) {
    const auto sol = pinv_solve(build_regression(record, states, va), rcond);
    const StateSpaceModel m{sol.A, sol.B, RowVector::Unit(states, 1), Matrix::Zero(1, 1)};
    const auto vel = ss_to_tf(m);
    const auto pos = ss_to_tf(m.with_output(RowVector::Unit(states, 0)));
    PinvIdentification out{m,   vel, pos, cancel_near_pole_zero(vel, cancel_tol), cancel_near_pole_zero(pos, cancel_tol),
                           sol, 0.0};
    out.first_row_deviation = (sol.A.row(0) - RowVector::Unit(states, 1)).norm();
    return out;
}

/// Classic one-time-constant fit of a settled velocity step response; sample
/// 0 is the step onset. Returns k / (S + 1/tau) with k = v_inf / (va * tau).
inline TransferFunction first_order_fit(const Trace& velocity, double va) {
    if (va == 0.0) throw InvalidInput("first_order_fit: step magnitude is zero");
    const std::size_t n = velocity.size();
    if (n < 10) throw InvalidInput("first_order_fit: trace too short");
    const std::size_t tail = std::max<std::size_t>(2, (n + 9) / 10);
    const auto first_tail = velocity.samples.end() - static_cast<std::ptrdiff_t>(tail);
    const auto [lo, hi] = std::minmax_element(first_tail, velocity.samples.end());
    double v_inf = 0.0;
    for (auto it = first_tail; it != velocity.samples.end(); ++it) v_inf += *it;
    v_inf /= static_cast<double>(tail);
    if (v_inf == 0.0 || (*hi - *lo) >= 0.01 * std::abs(v_inf))
        throw IdentificationError("first_order_fit: velocity has not settled (last 10% varies by 1% or more)");

    const double target = (1.0 - std::exp(-1.0)) * v_inf;
    const double sign = v_inf > 0.0 ? 1.0 : -1.0;
    double tau = -1.0;
    for (std::size_t k = 1; k < n; ++k) {
        if (sign * velocity[k] >= sign * target) {
            const double a = velocity[k - 1], b = velocity[k];
            const double frac = (b == a) ? 1.0 : std::clamp((target - a) / (b - a), 0.0, 1.0);
            tau = (static_cast<double>(k - 1) + frac) * velocity.dt;
            break;
        }
    }
    if (!(tau > 0.0)) throw IdentificationError("first_order_fit: response never reaches 63.2% of its final value");
    const double k = v_inf / (va * tau);
    return {Polynomial{k}, Polynomial{1.0 / tau, 1.0}};
}

}  // namespace motorfit
