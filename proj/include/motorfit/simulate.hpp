#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include "motorfit/error.hpp"
#include "motorfit/state_space.hpp"
#include "motorfit/trace.hpp"

namespace motorfit {

struct SimOptions {
    /// A state norm above this counts as divergence even while still finite.
    double divergence_limit = 1e100;
};

namespace detail {

/// One classical RK4 step of x' = A x + B u with u held over the step.
/// For a linear system the four stages collapse to
///   x+ = Phi x + Gamma u,
///   Phi   = I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24,
///   Gamma = h (I + hA/2 + (hA)^2/6 + (hA)^3/24) B,
/// which is what gets precomputed here.
struct Rk4Propagator {
    Matrix phi;
    Vector gamma;

    Rk4Propagator(const Matrix& A, const Matrix& B, double h) {
        const auto n = A.rows();
        const Matrix I = Matrix::Identity(n, n);
        const Matrix hA = h * A;
        const Matrix hA2 = hA * hA;
        const Matrix hA3 = hA2 * hA;
        phi = I + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 * hA / 24.0;
        gamma = h * (I + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) * B;
    }
};

inline bool state_ok(const Vector& x, const SimOptions& opt) {
    return x.allFinite() && x.norm() <= opt.divergence_limit;
}

}  // namespace detail

/// Largest growth factor per RK4 step of x' = A x. Above 1 for a stable A
/// means dt is outside the integrator's stability region and the computed
/// response grows even though the system decays.
inline double rk4_amplification(const Matrix& A, double dt) {
    const detail::Rk4Propagator step(A, Matrix::Zero(A.rows(), 1), dt);
    return step.phi.eigenvalues().cwiseAbs().maxCoeff();
}

/// Fixed-step RK4 response of m to a sampled input (zero-order hold between
/// samples), starting from x0 (zero state when omitted). The output is on the
/// input grid. A non-finite or runaway state stops the integration; the
/// output then ends at the last good sample and carries the divergence flag.
inline Trace simulate_lti(const StateSpaceModel& m, const Trace& input, std::optional<Vector> x0 = std::nullopt,
                          const SimOptions& opt = {}) {
    m.validate();
    if (!(input.dt > 0.0)) throw InvalidInput("simulate_lti: input dt must be positive");
    const auto n = m.states();
    Vector x = x0.value_or(Vector::Zero(n));
    if (x.size() != n) throw InvalidModel("simulate_lti: initial state has the wrong size");

    const detail::Rk4Propagator step(m.A, m.B, input.dt);
    const double d = m.D(0, 0);

    Trace out;
    out.t0 = input.t0;
    out.dt = input.dt;
    out.samples.reserve(input.size());
    for (std::size_t k = 0; k < input.size(); ++k) {
        const double u = input.samples[k];
        const double y = (m.C * x)(0, 0) + d * u;
        if (!std::isfinite(y)) {
            out.diverged = true;
            break;
        }
        out.samples.push_back(y);
        if (k + 1 == input.size()) break;
        x = step.phi * x + step.gamma * u;
        if (!detail::state_ok(x, opt)) {
            out.diverged = true;
            break;
        }
    }
    return out;
}

/// Constant signal on [0, duration].
inline Trace constant_trace(double value, double dt, double duration) {
    if (!(dt > 0.0) || !(duration >= dt)) throw InvalidInput("constant_trace: need dt > 0 and duration >= dt");
    Trace t;
    t.dt = dt;
    t.samples.assign(grid_points(dt, duration), value);
    return t;
}

}  // namespace motorfit
