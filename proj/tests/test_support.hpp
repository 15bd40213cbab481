#pragma once

// Shared generators and closed-form oracles for the test suites. Nothing in
// here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "motorfit/polynomial.hpp"
#include "motorfit/state_space.hpp"
#include "motorfit/trace.hpp"
#include "motorfit/transfer_function.hpp"

namespace motorfit::testing {

inline double uniform(std::mt19937& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random proper transfer function of the given order, coefficients in
/// [-10, 10], leading denominator coefficient kept away from zero.
inline TransferFunction random_tf(std::mt19937& rng, std::size_t order) {
    std::vector<double> den(order + 1), num(order + 1);
    for (double& c : den) c = uniform(rng, -10.0, 10.0);
    while (std::abs(den.back()) < 0.5) den.back() = uniform(rng, -10.0, 10.0);
    for (double& c : num) c = uniform(rng, -10.0, 10.0);
    return {Polynomial(num), Polynomial(den)};
}

/// Random stable model with real poles in [-3, -0.3] and a random basis, so
/// that every entry of A and B is generically nonzero.
inline StateSpaceModel random_stable_model(std::mt19937& rng, int n) {
    Eigen::MatrixXd T(n, n);
    do {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) T(i, j) = uniform(rng, -1.0, 1.0);
        T += Eigen::MatrixXd::Identity(n, n) * 1.5;
    } while (std::abs(T.determinant()) < 0.5);
    Eigen::MatrixXd Lambda = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) Lambda(i, i) = -uniform(rng, 0.3, 3.0);
    StateSpaceModel m;
    m.A = T * Lambda * T.inverse();
    m.B = Eigen::MatrixXd(n, 1);
    for (int i = 0; i < n; ++i) m.B(i, 0) = uniform(rng, -2.0, 2.0) + (i == n - 1 ? 3.0 : 0.0);
    m.C = Eigen::MatrixXd::Zero(1, n);
    m.C(0, 0) = 1.0;
    m.D = Eigen::MatrixXd::Zero(1, 1);
    return m;
}

/// Exact x(t) of x' = A x + B u, x(0) = 0, u = va constant, via the augmented
/// matrix exponential [[A, B va], [0, 0]].
inline Eigen::VectorXd exact_step_state(const StateSpaceModel& m, double va, double t) {
    const auto n = m.A.rows();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 1, n + 1);
    M.topLeftCorner(n, n) = m.A * t;
    M.topRightCorner(n, 1) = m.B * va * t;
    // Scaling and squaring with a long Taylor series; plenty for these sizes.
    int squarings = 0;
    double norm = M.lpNorm<Eigen::Infinity>();
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    M /= std::pow(2.0, squarings);
    Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n + 1, n + 1);
    Eigen::MatrixXd term = E;
    for (int k = 1; k < 30; ++k) {
        term = term * M / static_cast<double>(k);
        E += term;
    }
    for (int i = 0; i < squarings; ++i) E = E * E;
    return E.topRightCorner(n, 1);
}

/// Closed-form unit step response of 36/(S^2+S+36).
inline double step_36(double t) {
    const double wd = std::sqrt(36.0 - 0.25);
    return 1.0 - std::exp(-0.5 * t) * (std::cos(wd * t) + 0.5 / wd * std::sin(wd * t));
}

/// Closed-form impulse response of 36/(S^2+S+36).
inline double impulse_36(double t) {
    const double wd = std::sqrt(36.0 - 0.25);
    return 36.0 / wd * std::exp(-0.5 * t) * std::sin(wd * t);
}

inline Trace sampled(double dt, std::size_t n, auto&& f) {
    Trace t;
    t.dt = dt;
    t.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) t.samples[k] = f(static_cast<double>(k) * dt);
    return t;
}

inline double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

inline std::vector<std::complex<double>> sorted_roots(std::vector<std::complex<double>> r) {
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return r;
}

/// Multiset distance between two root lists: sorted pairing after rounding.
inline double root_set_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
    if (a.size() != b.size()) return INFINITY;
    double worst = 0.0;
    std::vector<bool> used(b.size(), false);
    for (const auto& x : a) {
        double best = INFINITY;
        std::size_t pick = 0;
        for (std::size_t j = 0; j < b.size(); ++j)
            if (!used[j] && std::abs(x - b[j]) < best) {
                best = std::abs(x - b[j]);
                pick = j;
            }
        used[pick] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace motorfit::testing
