#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "motorfit/error.hpp"
#include "motorfit/polynomial.hpp"
#include "motorfit/simulate.hpp"
#include "motorfit/state_space.hpp"
#include "motorfit/trace.hpp"
#include "motorfit/transfer_function.hpp"

namespace motorfit {

/// det(sI - A), computed on the Hessenberg form of A with the standard
/// column recurrence. Monic, ascending coefficients.
inline Polynomial characteristic_polynomial(const Matrix& A) {
    const auto n = A.rows();
    if (n == 0 || A.cols() != n) throw InvalidModel("characteristic polynomial: A must be square and nonempty");
    Matrix H = A;
    if (n > 2) H = Eigen::HessenbergDecomposition<Matrix>(A).matrixH();

    // p[k] = characteristic polynomial of the leading k x k block of H.
    std::vector<Polynomial> p;
    p.reserve(n + 1);
    p.push_back(Polynomial::constant(1.0));
    const Polynomial s = Polynomial::monomial(1);
    for (Eigen::Index k = 0; k < n; ++k) {
        Polynomial next = (s - Polynomial::constant(H(k, k))) * p[k];
        double sub = 1.0;
        for (Eigen::Index i = k - 1; i >= 0; --i) {
            sub *= H(i + 1, i);
            next = next - p[i].scaled(H(i, k) * sub);
        }
        p.push_back(std::move(next));
    }
    return p.back();
}

/// C (sI - A)^-1 B + D as a normalized transfer function; the denominator is
/// the characteristic polynomial of A.
inline TransferFunction ss_to_tf(const StateSpaceModel& m) {
    m.validate();
    const auto n = m.states();
    const Polynomial den = characteristic_polynomial(m.A);

    // adj(sI - A) = sum_k N_k s^(n-1-k), N_0 = I, N_k = A N_(k-1) + den[n-k] I;
    // only N_k B is needed.
    std::vector<double> num(n + 1, 0.0);
    Vector w = m.B.col(0);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (k > 0) w = m.A * w + den[n - k] * m.B.col(0);
        num[n - 1 - k] = m.C.row(0).dot(w);
    }
    const double d = m.D(0, 0);
    if (d != 0.0)
        for (Eigen::Index k = 0; k <= n; ++k) num[k] += d * den[k];
    return {Polynomial(std::move(num)), den};
}

/// Controllable companion realization: A carries -den in its last row,
/// B = e_n, C holds the (strictly proper part of the) numerator.
inline StateSpaceModel tf_to_ss_companion(const TransferFunction& h) {
    const auto n = static_cast<Eigen::Index>(h.order());
    const Polynomial& a = h.den();
    const Polynomial& b = h.num();
    const double feedthrough = b.degree() == h.order() ? b[n] : 0.0;

    StateSpaceModel m{Matrix::Zero(n, n), Matrix::Zero(n, 1), Matrix::Zero(1, n), Matrix::Constant(1, 1, feedthrough)};
    for (Eigen::Index i = 0; i + 1 < n; ++i) m.A(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        m.A(n - 1, j) = a[j] == 0.0 ? 0.0 : -a[j];
        m.C(0, j) = b[j] - a[j] * feedthrough;
    }
    m.B(n - 1, 0) = 1.0;
    return m;
}

inline std::vector<Complex> poles(const TransferFunction& h) { return h.poles(); }

inline double max_real_part(const std::vector<Complex>& roots) {
    double worst = -INFINITY;
    for (const auto& r : roots) worst = std::max(worst, r.real());
    return worst;
}

/// Removes every (pole, zero) pair closer than tol. The result is rebuilt from
/// the surviving roots with the original high-frequency gain, so the kept
/// factors are exact. Returns h untouched when nothing qualifies.
inline TransferFunction cancel_near_pole_zero(const TransferFunction& h, double tol) {
    if (!(tol >= 0.0)) throw InvalidInput("cancel_near_pole_zero: tol must be non-negative");
    const auto zs = h.zeros();
    const auto ps = h.poles();
    if (zs.empty()) return h;

    struct Pair {
        std::size_t zero, pole;
        double distance;
    };
    std::vector<Pair> candidates;
    for (std::size_t i = 0; i < zs.size(); ++i)
        for (std::size_t j = 0; j < ps.size(); ++j)
            if (const double d = std::abs(zs[i] - ps[j]); d <= tol) candidates.push_back({i, j, d});
    if (candidates.empty()) return h;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Pair& x, const Pair& y) { return x.distance < y.distance; });

    std::vector<bool> zero_used(zs.size(), false), pole_used(ps.size(), false);
    for (const Pair& c : candidates) {
        if (zero_used[c.zero] || pole_used[c.pole]) continue;
        zero_used[c.zero] = pole_used[c.pole] = true;
    }
    std::vector<Complex> kept_zeros, kept_poles;
    for (std::size_t i = 0; i < zs.size(); ++i)
        if (!zero_used[i]) kept_zeros.push_back(zs[i]);
    for (std::size_t j = 0; j < ps.size(); ++j)
        if (!pole_used[j]) kept_poles.push_back(ps[j]);
    if (kept_poles.empty()) throw IdentificationError("cancel_near_pole_zero: every pole was cancelled");

    return {Polynomial::from_roots(kept_zeros, h.num().leading()), Polynomial::from_roots(kept_poles)};
}

/// Keeps the target_order poles nearest the imaginary axis and rescales to
/// preserve the low-frequency gain (the DC gain when there is no integrator).
/// Zeros slower than the fastest discarded pole are retained, at most
/// target_order - 1 of them. Conjugate pairs stay together; a cut that would
/// fall between poles of equal real part is rejected.
inline TransferFunction dominant_pole_reduce(const TransferFunction& h, std::size_t target_order,
                                             double tie_tol = 1e-6) {
    if (target_order < 1) throw InvalidInput("dominant_pole_reduce: target order must be >= 1");
    if (target_order > h.order())
        throw InvalidInput("dominant_pole_reduce: target order exceeds the model order");
    if (target_order == h.order()) return h;

    auto ps = h.poles();
    const double scale = std::accumulate(ps.begin(), ps.end(), 1.0,
                                         [](double acc, const Complex& p) { return std::max(acc, std::abs(p)); });
    if (max_real_part(ps) > 1e-9 * scale)
        throw InvalidInput("dominant_pole_reduce: model has a pole in the right half plane");

    const auto by_axis_distance = [](const Complex& x, const Complex& y) {
        if (std::abs(x.real()) != std::abs(y.real())) return std::abs(x.real()) < std::abs(y.real());
        return x.imag() > y.imag();
    };
    std::sort(ps.begin(), ps.end(), by_axis_distance);
    const double last_kept = std::abs(ps[target_order - 1].real());
    const double first_dropped = std::abs(ps[target_order].real());
    if (first_dropped - last_kept <= tie_tol * std::max(1.0, first_dropped))
        throw IdentificationError("dominant_pole_reduce: dominance is ambiguous at the requested order "
                                  "(tied real parts or a split conjugate pair)");
    const std::vector<Complex> kept_poles(ps.begin(), ps.begin() + static_cast<std::ptrdiff_t>(target_order));

    auto zs = h.zeros();
    std::sort(zs.begin(), zs.end(), by_axis_distance);
    std::vector<Complex> kept_zeros;
    for (std::size_t i = 0; i < zs.size();) {
        if (std::abs(zs[i].real()) >= first_dropped) break;
        const std::size_t take = zs[i].imag() != 0.0 ? 2 : 1;
        if (kept_zeros.size() + take > target_order - 1 || i + take > zs.size()) break;
        kept_zeros.insert(kept_zeros.end(), zs.begin() + static_cast<std::ptrdiff_t>(i),
                          zs.begin() + static_cast<std::ptrdiff_t>(i + take));
        i += take;
    }

    const TransferFunction shape(Polynomial::from_roots(kept_zeros), Polynomial::from_roots(kept_poles));
    const auto [gain, power] = h.low_frequency_gain();
    const auto [shape_gain, shape_power] = shape.low_frequency_gain();
    if (power != shape_power || shape_gain == 0.0)
        throw IdentificationError("dominant_pole_reduce: reduced model cannot match the low-frequency behavior");
    return {shape.num().scaled(gain / shape_gain), shape.den()};
}

/// Response of h to v0 * u(t) on [0, duration], zero initial conditions.
inline Trace step_response(const TransferFunction& h, double v0, double dt, double duration,
                           const SimOptions& opt = {}) {
    if (!(dt > 0.0) || !(duration >= dt)) throw InvalidInput("step_response: need dt > 0 and duration >= dt");
    Trace out = simulate_lti(tf_to_ss_companion(h), constant_trace(v0, dt, duration), std::nullopt, opt);
    out.label = "step";
    return out;
}

/// Impulse response of the strictly proper part of h: free response of the
/// companion realization released from x(0) = B.
inline Trace impulse_response(const TransferFunction& h, double dt, double duration, const SimOptions& opt = {}) {
    if (!(dt > 0.0) || !(duration >= dt)) throw InvalidInput("impulse_response: need dt > 0 and duration >= dt");
    StateSpaceModel m = tf_to_ss_companion(h);
    m.D(0, 0) = 0.0;
    Vector x0 = m.B.col(0);
    Trace out = simulate_lti(m, constant_trace(0.0, dt, duration), std::move(x0), opt);
    out.label = "impulse";
    return out;
}

}  // namespace motorfit
