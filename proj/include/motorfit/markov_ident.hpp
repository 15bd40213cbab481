#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motorfit/error.hpp"
#include "motorfit/linalg.hpp"
#include "motorfit/lti.hpp"
#include "motorfit/state_space.hpp"
#include "motorfit/trace.hpp"
#include "motorfit/transfer_function.hpp"

namespace motorfit {

/// Markov parameters q(1..Lm) of H(S) = sum q(i) S^-i, stored 0-based, with
/// the step magnitude and fit window they were estimated under.
struct MarkovSequence {
    std::vector<double> q;
    double v0 = 1.0;
    double te = 0.0;

    std::size_t size() const { return q.size(); }
};

/// |v(0)| must stay below this fraction of the largest |v| in the window.
inline constexpr double kRestTolerance = 1e-2;

/// What the fitted trace is. A step response taken from rest must start at
/// zero; an impulse response may start anywhere (q(1) = h(0)).
enum class MarkovSignal { step_from_rest, impulse };

/// Least-squares Markov parameters from the early part of a step response
/// taken from rest: v(t)/v0 ~ sum q(i) t^(i-1)/(i-1)! over samples k*dt,
/// k = 1..floor(te/dt). Sample 0 is the step onset.
///
/// If v is the velocity step response, q describes the position transfer
/// function; equivalently v/v0 is treated as the impulse response of H.
inline MarkovSequence estimate_markov(const Trace& v, double v0, int lm, double te,
                                      MarkovSignal kind = MarkovSignal::step_from_rest, double rcond = 1e-10) {
    if (v0 == 0.0 || !std::isfinite(v0)) throw InvalidInput("estimate_markov: step magnitude v0 must be nonzero");
    if (lm < 1) throw InvalidInput("estimate_markov: need at least one Markov parameter");
    if (!(te > 0.0)) throw InvalidInput("estimate_markov: fit window must be positive");
    if (v.size() < 2 || !(v.dt > 0.0)) throw InvalidInput("estimate_markov: trace too short");
    const auto N = static_cast<std::size_t>(std::floor(te / v.dt + 1e-9));
    if (N + 1 > v.size())
        throw InvalidInput("estimate_markov: fit window " + std::to_string(te) + " s exceeds the trace");
    if (N < static_cast<std::size_t>(lm))
        throw InvalidInput("estimate_markov: " + std::to_string(N) + " samples in the window cannot determine " +
                           std::to_string(lm) + " parameters");

    double peak = 0.0;
    for (std::size_t k = 0; k <= N; ++k) peak = std::max(peak, std::abs(v[k]));
    if (kind == MarkovSignal::step_from_rest && std::abs(v[0]) > kRestTolerance * peak)
        throw InvalidInput("estimate_markov: response does not start from rest (v(0) = " + std::to_string(v[0]) + ")");

    const auto rows = static_cast<Eigen::Index>(N);
    Matrix M(rows, lm);
    Vector rhs(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        const double t = static_cast<double>(k + 1) * v.dt;
        double term = 1.0;
        for (int i = 0; i < lm; ++i) {
            M(k, i) = term;
            term *= t / static_cast<double>(i + 1);
        }
        rhs(k) = v[static_cast<std::size_t>(k + 1)] / v0;
    }
    // Columns span many decades; equalize them before the SVD.
    Vector scale(lm);
    for (int i = 0; i < lm; ++i) {
        scale(i) = M.col(i).cwiseAbs().maxCoeff();
        if (scale(i) == 0.0) scale(i) = 1.0;
        M.col(i) /= scale(i);
    }
    const auto ls = solve_pinv(M, rhs, rcond);

    MarkovSequence out;
    out.v0 = v0;
    out.te = static_cast<double>(N) * v.dt;
    out.q.resize(static_cast<std::size_t>(lm));
    for (int i = 0; i < lm; ++i) out.q[static_cast<std::size_t>(i)] = ls.x(i) / scale(i);
    return out;
}

/// v0 * sum q(i) t^(i-1)/(i-1)! on a grid starting at t = 0.
inline Trace truncated_response(const MarkovSequence& m, double dt, double duration) {
    if (!(dt > 0.0) || duration < 0.0) throw InvalidInput("truncated_response: bad grid");
    const auto n = grid_points(dt, duration);
    Trace out;
    out.dt = dt;
    out.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        double term = 1.0, sum = 0.0;
        for (std::size_t i = 0; i < m.q.size(); ++i) {
            sum += m.q[i] * term;
            term *= t / static_cast<double>(i + 1);
        }
        out.samples[k] = m.v0 * sum;
    }
    return out;
}

/// Hankel matrix h and its one-step shift, both M x M.
struct HankelPair {
    Matrix h;
    Matrix h_shift;
    int order = 0;
};

/// Full K x K Hankel matrix, K = (Lm + 1) / 2, entry (i, j) = q(i + j + 1)
/// with 0-based indices.
inline Matrix hankel_build(const MarkovSequence& m) {
    const auto lm = m.q.size();
    if (lm < 3 || lm % 2 == 0)
        throw InvalidInput("hankel_build: need an odd number of Markov parameters, got " + std::to_string(lm));
    const auto K = static_cast<Eigen::Index>((lm + 1) / 2);
    Matrix H(K, K);
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = 0; j < K; ++j) H(i, j) = m.q[static_cast<std::size_t>(i + j)];
    return H;
}

inline HankelPair hankel_pair(const MarkovSequence& m, int order) {
    if (order < 1) throw InvalidInput("hankel_pair: order must be positive");
    if (m.q.size() < static_cast<std::size_t>(2 * order))
        throw InvalidInput("hankel_pair: order " + std::to_string(order) + " needs at least " +
                           std::to_string(2 * order) + " Markov parameters");
    HankelPair p;
    p.order = order;
    p.h = Matrix(order, order);
    p.h_shift = Matrix(order, order);
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j) {
            p.h(i, j) = m.q[static_cast<std::size_t>(i + j)];
            p.h_shift(i, j) = m.q[static_cast<std::size_t>(i + j + 1)];
        }
    return p;
}

inline constexpr double kDefaultGapThreshold = 0.05;
inline constexpr double kDefaultDecadeGap = 10.0;

struct OrderEstimate {
    int order = 0;
    std::vector<double> spectrum;  ///< singular values over the largest, descending
};

/// Counts normalized Hankel singular values above gap_threshold, stopping
/// early at the first drop by a factor of decade_gap or more between
/// neighbours. The early stop is what separates (1, 0.088, 0.0043), a
/// first-order system seen through a noisy fit, from (1, 0.426, 0.1, 0.009),
/// a genuine third-order one.
inline OrderEstimate estimate_order(const Matrix& hankel, double gap_threshold = kDefaultGapThreshold,
                                    double decade_gap = kDefaultDecadeGap) {
    if (hankel.rows() < 2 || hankel.rows() != hankel.cols())
        throw InvalidInput("estimate_order: Hankel matrix must be square and at least 2 x 2");
    if (!hankel.allFinite()) throw InvalidInput("estimate_order: non-finite Hankel entries");
    const Vector s = Eigen::BDCSVD<Matrix>(hankel).singularValues();
    OrderEstimate out;
    out.spectrum.assign(static_cast<std::size_t>(s.size()), 0.0);
    if (s(0) == 0.0) return out;
    bool open = true;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double r = s(i) / s(0);
        out.spectrum[static_cast<std::size_t>(i)] = r;
        if (i > 0 && s(i) * decade_gap <= s(i - 1)) open = false;
        if (open && r > gap_threshold) ++out.order;
    }
    return out;
}

/// Companion-style minimal realization: A = h_shift * inv(h), B = first
/// column of h, C = [1 0 ... 0], D = 0.
inline StateSpaceModel realize_companion(const MarkovSequence& m, int order, double rcond = 1e-10) {
    const auto p = hankel_pair(m, order);
    const Vector s = Eigen::BDCSVD<Matrix>(p.h).singularValues();
    if (s(0) == 0.0 || s(s.size() - 1) <= rcond * s(0))
        throw IdentificationError("realize_companion: Hankel matrix is singular for order " + std::to_string(order) +
                                  "; the order is too high (check the singular-value spectrum)");
    StateSpaceModel out;
    out.A = p.h.transpose().partialPivLu().solve(p.h_shift.transpose()).transpose();
    out.B = p.h.col(0);
    out.C = RowVector::Unit(order, 0);
    out.D = Matrix::Zero(1, 1);
    return out;
}

struct MarkovIdentification {
    MarkovSequence sequence;
    OrderEstimate order;
    StateSpaceModel model;
    TransferFunction tf;
};

/// Full chain: Markov estimate, Hankel order, realization and transfer
/// function. The fit window defaults to a third of the record.
inline MarkovIdentification identify_markov(const Trace& v, double v0, int lm, std::optional<double> te = std::nullopt,
                                            double gap_threshold = kDefaultGapThreshold,
                                            MarkovSignal kind = MarkovSignal::step_from_rest) {
    const double window = te.value_or(v.duration() / 3.0);
    auto seq = estimate_markov(v, v0, lm, window, kind);
    auto ord = estimate_order(hankel_build(seq), gap_threshold);
    if (ord.order == 0) throw IdentificationError("identify_markov: response carries no signal (order 0)");
    auto model = realize_companion(seq, ord.order);
    auto tf = ss_to_tf(model);
    return {std::move(seq), std::move(ord), std::move(model), std::move(tf)};
}

/// First n Markov parameters C A^(i-1) B of a model.
inline std::vector<double> markov_parameters(const StateSpaceModel& m, std::size_t n) {
    m.validate();
    std::vector<double> q(n);
    Vector w = m.B.col(0);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = (m.C * w)(0);
        w = m.A * w;
    }
    return q;
}

}  // namespace motorfit
