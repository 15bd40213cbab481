#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "motorfit/error.hpp"
#include "motorfit/lti.hpp"
#include "motorfit/simulate.hpp"
#include "motorfit/state_space.hpp"
#include "motorfit/trace.hpp"
#include "motorfit/transfer_function.hpp"

namespace motorfit {

enum class Waveform { step, sine, triangle, square };

inline std::string_view to_string(Waveform w) {
    switch (w) {
        case Waveform::step: return "step";
        case Waveform::sine: return "sine";
        case Waveform::triangle: return "triangle";
        case Waveform::square: return "square";
    }
    return "?";
}

struct WaveformSpec {
    Waveform kind = Waveform::step;
    double magnitude = 1.0;
    double frequency = 0.0;  ///< Hz, periodic kinds only

    void validate() const {
        if (!(magnitude > 0.0) || !std::isfinite(magnitude))
            throw InvalidInput("waveform: magnitude must be positive");
        if (kind != Waveform::step && !(frequency > 0.0 && std::isfinite(frequency)))
            throw InvalidInput("waveform: frequency must be positive for periodic kinds");
    }

    /// Square starts at +magnitude, triangle starts at 0 and rises.
    double operator()(double t) const {
        if (kind == Waveform::step) return t >= 0.0 ? magnitude : 0.0;
        const double cycles = frequency * t;
        const double phase = cycles - std::floor(cycles);
        switch (kind) {
            case Waveform::sine: return magnitude * std::sin(2.0 * std::numbers::pi * phase);
            case Waveform::square: return phase < 0.5 ? magnitude : -magnitude;
            case Waveform::triangle:
                if (phase < 0.25) return magnitude * 4.0 * phase;
                if (phase < 0.75) return magnitude * (2.0 - 4.0 * phase);
                return magnitude * (4.0 * phase - 4.0);
            default: return 0.0;
        }
    }
};

inline Trace generate_reference(const WaveformSpec& spec, double dt, double duration) {
    spec.validate();
    if (!(dt > 0.0) || duration < 0.0) throw InvalidInput("generate_reference: bad grid");
    Trace out;
    out.dt = dt;
    out.label = std::string(to_string(spec.kind));
    out.samples.resize(grid_points(dt, duration));
    for (std::size_t k = 0; k < out.size(); ++k) out.samples[k] = spec(static_cast<double>(k) * dt);
    return out;
}

/// Adds uniform noise in [-amplitude, amplitude]; the same seed gives the
/// same output.
inline Trace add_noise(Trace t, double amplitude, std::uint64_t seed) {
    if (!(amplitude >= 0.0)) throw InvalidInput("add_noise: amplitude must be non-negative");
    if (amplitude == 0.0) return t;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    for (double& x : t.samples) x += dist(rng);
    return t;
}

struct ServoLoopConfig {
    TransferFunction plant;  ///< position transfer function
    double kp = 0.0;
    double kv = 0.0;
    std::optional<double> sat_limit;  ///< symmetric actuator limit; none means linear
    WaveformSpec reference;

    void validate() const {
        if (!(kp >= 0.0) || !(kv >= 0.0)) throw InvalidInput("servo loop: gains must be non-negative");
        if (sat_limit && !(*sat_limit > 0.0)) throw InvalidInput("servo loop: saturation limit must be positive");
        if (!plant.strictly_proper()) throw InvalidInput("servo loop: plant must be strictly proper");
        if (plant.order() > 3) throw InvalidInput("servo loop: plant order above 3");
        reference.validate();
    }
};

struct ServoResponse {
    Trace position;
    Trace velocity;
    Trace control;  ///< actuator output after saturation
    Trace reference;
    bool diverged = false;
};

/// Integrates u = sat(kp (r - theta) - kv dtheta/dt) driving the plant with
/// classical RK4; the reference is held over each step.
inline ServoResponse simulate_servo_loop(const ServoLoopConfig& cfg, double dt, double duration,
                                         const SimOptions& opt = {}) {
    cfg.validate();
    if (!(dt > 0.0) || !(duration >= dt)) throw InvalidInput("simulate_servo_loop: need dt > 0 and duration >= dt");
    const StateSpaceModel m = tf_to_ss_companion(cfg.plant);
    // Plants are at most third order; keep the state on the stack.
    using SVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
    using SRow = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, 3>;
    using SMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
    const SMat A = m.A;
    const SVec B = m.B.col(0);
    const SRow C = m.C;
    const SRow CA = C * A;
    const double CB = C.dot(B.transpose());
    // With relative degree 1 the velocity depends on u itself.
    if (cfg.kv > 0.0 && CB != 0.0)
        throw InvalidInput("simulate_servo_loop: velocity feedback needs a plant of relative degree 2 or more");

    const auto sat = [&](double u) {
        return cfg.sat_limit ? std::clamp(u, -*cfg.sat_limit, *cfg.sat_limit) : u;
    };
    const auto control = [&](const SVec& x, double r) {
        return sat(cfg.kp * (r - C.dot(x.transpose())) - cfg.kv * CA.dot(x.transpose()));
    };
    const auto f = [&](const SVec& x, double r) -> SVec { return A * x + B * control(x, r); };

    ServoResponse out;
    out.reference = generate_reference(cfg.reference, dt, duration);
    const std::size_t n = out.reference.size();
    for (Trace* t : {&out.position, &out.velocity, &out.control}) {
        t->dt = dt;
        t->samples.reserve(n);
    }
    out.position.label = "position";
    out.velocity.label = "velocity";
    out.control.label = "control";

    SVec x = SVec::Zero(m.states());
    for (std::size_t k = 0; k < n; ++k) {
        const double r = out.reference[k];
        const double u = control(x, r);
        out.position.samples.push_back(C.dot(x.transpose()));
        out.velocity.samples.push_back(CA.dot(x.transpose()) + CB * u);
        out.control.samples.push_back(u);
        if (k + 1 == n) break;
        const SVec k1 = f(x, r);
        const SVec k2 = f(x + 0.5 * dt * k1, r);
        const SVec k3 = f(x + 0.5 * dt * k2, r);
        const SVec k4 = f(x + dt * k3, r);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite() || x.norm() > opt.divergence_limit) {
            out.diverged = true;
            break;
        }
    }
    out.position.diverged = out.velocity.diverged = out.control.diverged = out.diverged;
    return out;
}

// ---- mode classification ---------------------------------------------------

enum class Mode { Unstable, OverDamped, CriticallyDamped, UnderDamped, Oscillatory, Chattering };

inline constexpr Mode kAllModes[] = {Mode::Unstable,    Mode::OverDamped,  Mode::CriticallyDamped,
                                     Mode::UnderDamped, Mode::Oscillatory, Mode::Chattering};

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Unstable: return "Unstable";
        case Mode::OverDamped: return "OverDamped";
        case Mode::CriticallyDamped: return "CriticallyDamped";
        case Mode::UnderDamped: return "UnderDamped";
        case Mode::Oscillatory: return "Oscillatory";
        case Mode::Chattering: return "Chattering";
    }
    return "?";
}

inline std::optional<Mode> mode_from_string(std::string_view s) {
    for (Mode m : kAllModes)
        if (to_string(m) == s) return m;
    return std::nullopt;
}

struct ModeOptions {
    double overshoot = 0.02;          ///< fraction of the reference
    double envelope_slope = 1e-3;     ///< 1/s, on log peak amplitude
    double noise_floor = 1e-4;        ///< fraction of the reference
    double settling_band = 0.02;      ///< fraction of the reference
    double chatter_ratio = 10.0;      ///< oscillation over dominant frequency
    double chatter_amplitude = 0.05;  ///< peak-to-peak over the reference
    int min_half_cycles = 4;          ///< in the analysed tail, to call an oscillation sustained
    /// Hz; estimated from the first reference crossing when absent.
    std::optional<double> dominant_frequency;
    /// Shortest no-overshoot settling time seen while calibrating; without it
    /// nothing is called critically damped.
    std::optional<double> critical_settling;
    double critical_factor = 1.5;
};

/// Time after which |y - r| stays inside band * |r|; infinity if the trace
/// ends outside the band.
inline double settling_time(const Trace& y, double reference, double band = 0.02) {
    const double tol = band * std::abs(reference);
    for (std::size_t k = y.size(); k-- > 0;)
        if (std::abs(y[k] - reference) > tol)
            return k + 1 == y.size() ? INFINITY : y.time(k + 1) - y.t0;
    return 0.0;
}

struct ModeReport {
    Mode mode = Mode::OverDamped;
    double envelope_slope = 0.0;  ///< 1/s
    double overshoot = 0.0;       ///< fraction of the reference
    double settling_time = 0.0;
    double oscillation_frequency = 0.0;  ///< Hz, 0 when none
    double dominant_frequency = 0.0;     ///< Hz, reference for the chattering test
    double peak_to_peak = 0.0;           ///< of the analysed tail
    int half_cycles = 0;
};

namespace detail {

inline double fit_slope(const std::vector<double>& t, const std::vector<double>& y) {
    const double n = static_cast<double>(t.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    const double den = n * stt - st * st;
    return den == 0.0 ? 0.0 : (n * sty - st * sy) / den;
}

}  // namespace detail

/// Sorts a step response into one of the six closed-loop behaviours. The
/// second half of the trace is examined for a sustained or growing
/// oscillation; the whole trace supplies overshoot and settling time.
inline ModeReport classify_mode_report(const Trace& position, double reference_final, const ModeOptions& opt = {}) {
    if (position.size() < 20) throw InvalidInput("classify_mode: trace too short (need at least 20 samples)");
    if (reference_final == 0.0) throw InvalidInput("classify_mode: reference must be nonzero");
    ModeReport rep;
    const double r = reference_final;
    const double scale = std::abs(r);
    const double floor = opt.noise_floor * scale;

    // Overshoot and settling over the whole trace.
    for (double y : position.samples) rep.overshoot = std::max(rep.overshoot, (y - r) / r);
    rep.settling_time = settling_time(position, r, opt.settling_band);
    if (position.diverged) {
        rep.mode = Mode::Unstable;
        rep.envelope_slope = INFINITY;
        return rep;
    }

    // Tail: split the error into half-cycles between sign changes.
    const std::size_t start = position.size() / 2;
    std::vector<double> peak_t, peak_v;
    double lo = INFINITY, hi = -INFINITY;
    double seg_peak = 0.0, seg_time = 0.0;
    int seg_sign = 0;
    for (std::size_t k = start; k < position.size(); ++k) {
        const double e = position[k] - r;
        lo = std::min(lo, position[k]);
        hi = std::max(hi, position[k]);
        const int s = e > floor ? 1 : (e < -floor ? -1 : 0);
        if (s == 0) continue;
        if (s != seg_sign) {
            if (seg_sign != 0) {
                peak_t.push_back(seg_time);
                peak_v.push_back(seg_peak);
            }
            seg_sign = s;
            seg_peak = 0.0;
        }
        if (std::abs(e) > seg_peak) {
            seg_peak = std::abs(e);
            seg_time = position.time(k);
        }
    }
    rep.peak_to_peak = hi - lo;
    // The first and last segments may be cut by the window; use the interior.
    if (peak_v.size() >= 2) {
        peak_t.erase(peak_t.begin());
        peak_v.erase(peak_v.begin());
    }
    rep.half_cycles = static_cast<int>(peak_v.size());

    if (rep.half_cycles >= opt.min_half_cycles) {
        std::vector<double> logs(peak_v.size());
        for (std::size_t i = 0; i < peak_v.size(); ++i) logs[i] = std::log(std::max(peak_v[i], floor));
        rep.envelope_slope = detail::fit_slope(peak_t, logs);
        rep.oscillation_frequency =
            static_cast<double>(peak_v.size() - 1) / (2.0 * (peak_t.back() - peak_t.front()));
    } else {
        std::vector<double> t, logs;
        for (std::size_t k = start; k < position.size(); ++k) {
            t.push_back(position.time(k));
            logs.push_back(std::log(std::max(std::abs(position[k] - r), floor)));
        }
        rep.envelope_slope = detail::fit_slope(t, logs);
    }

    if (rep.envelope_slope > opt.envelope_slope) {
        rep.mode = Mode::Unstable;
        return rep;
    }
    if (rep.half_cycles >= opt.min_half_cycles && rep.envelope_slope >= -opt.envelope_slope) {
        double dominant = opt.dominant_frequency.value_or(0.0);
        if (!opt.dominant_frequency) {
            for (std::size_t k = 1; k < position.size(); ++k) {
                if ((position[k - 1] - r) * (position[k] - r) <= 0.0 && position[k] != position[k - 1]) {
                    const double tc = position.time(k) - position.t0;
                    dominant = 1.0 / (4.0 * tc);
                    break;
                }
            }
        }
        rep.dominant_frequency = dominant;
        const bool fast = dominant > 0.0 && rep.oscillation_frequency > opt.chatter_ratio * dominant;
        const bool small = rep.peak_to_peak < opt.chatter_amplitude * scale;
        rep.mode = (fast && small) ? Mode::Chattering : Mode::Oscillatory;
        return rep;
    }
    if (rep.overshoot > opt.overshoot) {
        rep.mode = Mode::UnderDamped;
        return rep;
    }
    rep.mode = (opt.critical_settling && rep.settling_time <= opt.critical_factor * *opt.critical_settling)
                   ? Mode::CriticallyDamped
                   : Mode::OverDamped;
    return rep;
}

inline Mode classify_mode(const Trace& position, double reference_final, const ModeOptions& opt = {}) {
    return classify_mode_report(position, reference_final, opt).mode;
}

}  // namespace motorfit
