#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "json.hpp"

#include "motorfit/lti.hpp"
#include "motorfit/model_document.hpp"
#include "motorfit/signal_prep.hpp"
#include "motorfit/state_space.hpp"

namespace motorfit {

/// Recipe for a raw bench-style record of a motor with states
/// [position, velocity, current]: one file per channel, each with its own
/// copy of the step input and its own pre-trigger length, a wrapping
/// position encoder, a glitch sample at each wrap, and uniform noise.
struct SyntheticRecordRecipe {
    StateSpaceModel truth;  ///< state is [position, velocity, current]
    double va = 5.92;
    double dt = 0.004;
    std::size_t samples_after_step = 1500;
    std::vector<std::size_t> pre_trigger{100, 137, 83};  ///< position, velocity, current
    double wrap_half_span = 10.2;
    double noise = 0.01;
    double input_noise = 0.005;
    std::uint64_t seed = 20240611;
};

/// Ground truth with a zero in the velocity transfer function:
/// velocity 8 (S + 1) / (S^2 + 11 S + 20), position that over S.
inline SyntheticRecordRecipe default_synthetic_recipe() {
    SyntheticRecordRecipe r;
    r.truth.A = Matrix(3, 3);
    r.truth.A << 0.0, 1.0, 0.0,  //
        0.0, -1.0, 5.0,          //
        0.0, -2.0, -10.0;
    r.truth.B = Matrix(3, 1);
    r.truth.B << 0.0, 8.0, -14.4;
    r.truth.C = RowVector::Unit(3, 1);
    r.truth.D = Matrix::Zero(1, 1);
    return r;
}

inline const char* const kSyntheticChannels[] = {"position", "velocity", "current"};

/// Exact sampled state under a step held from t = 0: zero-order-hold
/// discretization through the matrix exponential of [[A, B], [0, 0]] dt.
inline std::vector<Vector> exact_step_states(const StateSpaceModel& m, double va, double dt, std::size_t n) {
    const auto k = m.states();
    Matrix M = Matrix::Zero(k + 1, k + 1);
    M.topLeftCorner(k, k) = m.A * dt;
    M.topRightCorner(k, 1) = m.B * dt;
    const Matrix E = M.exp();
    const Matrix phi = E.topLeftCorner(k, k);
    const Vector gamma = E.topRightCorner(k, 1);
    std::vector<Vector> out(n, Vector::Zero(k));
    for (std::size_t i = 1; i < n; ++i) out[i] = phi * out[i - 1] + gamma * va;
    return out;
}

/// Raw files in channel order. Every file gets the same post-step length
/// plus its own pre-trigger stretch.
inline std::vector<TraceFile> generate_synthetic_record(const SyntheticRecordRecipe& r) {
    const auto states = exact_step_states(r.truth, r.va, r.dt, r.samples_after_step);
    std::mt19937_64 rng(r.seed);
    std::uniform_real_distribution<double> noise(-r.noise, r.noise);
    std::uniform_real_distribution<double> input_noise(-r.input_noise, r.input_noise);
    std::vector<TraceFile> files;
    for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t pre = r.pre_trigger.at(c);
        TraceFile f;
        f.input.dt = f.signal.dt = r.dt;
        f.input.label = "input";
        f.signal.label = kSyntheticChannels[c];
        double previous = 0.0;
        for (std::size_t i = 0; i < pre + r.samples_after_step; ++i) {
            const bool on = i >= pre;
            f.input.samples.push_back((on ? r.va : 0.0) + input_noise(rng));
            const double x = on ? states[i - pre](static_cast<Eigen::Index>(c)) : 0.0;
            double y = x + noise(rng);
            if (c == 0) {
                const double span = 2.0 * r.wrap_half_span;
                y = y - span * std::floor((y + r.wrap_half_span) / span);
                // The encoder reads about zero for one sample as it wraps.
                if (i > 0 && std::abs(y - previous) > r.wrap_half_span) {
                    previous = y;
                    y = noise(rng);
                } else {
                    previous = y;
                }
            }
            f.signal.samples.push_back(y);
        }
        files.push_back(std::move(f));
    }
    return files;
}

/// Native three-column CSV with a header.
inline void write_trace_csv(std::ostream& os, const TraceFile& f) {
    SyncedRecord one;
    one.input = f.input;
    one.channels[f.signal.label] = f.signal;
    write_record_csv(os, one);
}

inline nlohmann::json recipe_json(const SyntheticRecordRecipe& r) {
    const auto vel = ss_to_tf(r.truth);
    const auto pos = ss_to_tf(r.truth.with_output(RowVector::Unit(3, 0)));
    return {{"A", matrix_json(r.truth.A)},
            {"B", matrix_json(r.truth.B)},
            {"velocity_tf", tf_to_json(cancel_near_pole_zero(vel, 1e-9))},
            {"position_tf", tf_to_json(pos)},
            {"va", r.va},
            {"dt", r.dt},
            {"samples_after_step", r.samples_after_step},
            {"pre_trigger", r.pre_trigger},
            {"wrap_half_span", r.wrap_half_span},
            {"noise", r.noise},
            {"input_noise", r.input_noise},
            {"seed", r.seed}};
}

}  // namespace motorfit
