#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "motorfit/error.hpp"
#include "motorfit/servo.hpp"
#include "motorfit/transfer_function.hpp"

namespace motorfit {

/// Gain and saturation grid explored when looking for mode fixtures.
struct ModeGrid {
    std::vector<double> kp{0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 10.0, 12.0, 15.0, 20.0, 30.0, 50.0};
    std::vector<double> kv{0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0};
    std::vector<double> sat{0.05, 0.2, 1.0, 5.0, 1e9};
    double dt = 0.01;
    double duration = 200.0;
    double reference = 1.0;
};

struct ModeFixture {
    Mode expected = Mode::OverDamped;
    double kp = 0.0;
    double kv = 0.0;
    double sat = 0.0;
    /// Shortest no-overshoot settling time over the grid at this saturation.
    double critical_settling = 0.0;
};

struct ModeFixtureSet {
    TransferFunction plant;
    ModeGrid grid;
    std::vector<ModeFixture> fixtures;
};

/// Third-order motor-like plant with a dominant pole: 10 / (S (S+1) (S+10)).
inline TransferFunction third_order_servo_plant() { return {Polynomial{10.0}, Polynomial{0.0, 10.0, 11.0, 1.0}}; }

/// Second-order counterpart without the fast pole: 10 / (S (S+1)).
inline TransferFunction second_order_servo_plant() { return {Polynomial{10.0}, Polynomial{0.0, 1.0, 1.0}}; }

inline ServoResponse run_grid_point(const TransferFunction& plant, const ModeGrid& g, double kp, double kv,
                                    double sat) {
    ServoLoopConfig cfg{plant, kp, kv, sat, WaveformSpec{Waveform::step, g.reference, 0.0}};
    return simulate_servo_loop(cfg, g.dt, g.duration);
}

inline ModeFixtureSet search_mode_fixtures(const TransferFunction& plant, const ModeGrid& g) {
    struct Point {
        double kp, kv, sat;
        ModeReport rep;
    };
    std::map<double, double> critical;
    std::vector<Point> points;
    for (double sat : g.sat) {
        critical[sat] = INFINITY;
        for (double kp : g.kp)
            for (double kv : g.kv) {
                const auto res = run_grid_point(plant, g, kp, kv, sat);
                auto rep = classify_mode_report(res.position, g.reference);
                if (rep.mode == Mode::OverDamped) critical[sat] = std::min(critical[sat], rep.settling_time);
                points.push_back({kp, kv, sat, rep});
            }
    }
    ModeOptions opt;
    // Higher is a safer pick for each mode.
    std::map<Mode, std::pair<double, const Point*>> best;
    for (const auto& p : points) {
        Mode mode = p.rep.mode;
        const double crit = critical[p.sat];
        if (mode == Mode::OverDamped && p.rep.settling_time <= opt.critical_factor * crit)
            mode = Mode::CriticallyDamped;
        double score = 0.0;
        switch (mode) {
            case Mode::Unstable: score = p.rep.envelope_slope; break;
            case Mode::Oscillatory: score = p.sat < 1e6 ? p.rep.peak_to_peak : 0.0; break;
            case Mode::Chattering:
                score = std::min(opt.chatter_amplitude * g.reference / p.rep.peak_to_peak,
                                 p.rep.oscillation_frequency / (opt.chatter_ratio * p.rep.dominant_frequency));
                break;
            case Mode::UnderDamped:
                // Clear overshoot, and a ring-down that is over well before the end.
                score = std::min(p.rep.overshoot / opt.overshoot,
                                 p.rep.half_cycles < opt.min_half_cycles ? 1e3 : -p.rep.envelope_slope / opt.envelope_slope);
                break;
            case Mode::CriticallyDamped: score = crit / p.rep.settling_time; break;
            case Mode::OverDamped:
                // Slow compared with the calibration, but settled inside the first half.
                score = std::min(p.rep.settling_time / (opt.critical_factor * crit),
                                 0.5 * g.duration / p.rep.settling_time);
                break;
        }
        // Ties go to the later (less saturated) grid point.
        auto it = best.find(mode);
        if (score > 0.0 && (it == best.end() || score >= it->second.first)) best[mode] = {score, &p};
    }
    ModeFixtureSet out{plant, g, {}};
    for (Mode m : kAllModes) {
        auto it = best.find(m);
        if (it == best.end()) continue;
        const Point& p = *it->second.second;
        out.fixtures.push_back({m, p.kp, p.kv, p.sat, critical[p.sat]});
    }
    return out;
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json tf_to_json(const TransferFunction& h) {
    return {{"num", h.num().coeffs()}, {"den", h.den().coeffs()}};
}

inline TransferFunction tf_from_json(const nlohmann::json& j) {
    return {Polynomial{j.at("num").get<std::vector<double>>()}, Polynomial{j.at("den").get<std::vector<double>>()}};
}

inline nlohmann::json to_json(const ModeFixtureSet& s) {
    nlohmann::json fx = nlohmann::json::array();
    for (const auto& f : s.fixtures)
        fx.push_back({{"mode", std::string(to_string(f.expected))},
                      {"kp", f.kp},
                      {"kv", f.kv},
                      {"sat_limit", f.sat},
                      {"critical_settling", f.critical_settling}});
    return {{"plant", tf_to_json(s.plant)},
            {"grid",
             {{"kp", s.grid.kp},
              {"kv", s.grid.kv},
              {"sat_limit", s.grid.sat},
              {"dt", s.grid.dt},
              {"duration", s.grid.duration},
              {"reference", s.grid.reference}}},
            {"fixtures", fx}};
}

inline ModeFixtureSet mode_fixtures_from_json(const nlohmann::json& j) {
    try {
        ModeFixtureSet s{tf_from_json(j.at("plant")), {}, {}};
        const auto& g = j.at("grid");
        s.grid.kp = g.at("kp").get<std::vector<double>>();
        s.grid.kv = g.at("kv").get<std::vector<double>>();
        s.grid.sat = g.at("sat_limit").get<std::vector<double>>();
        s.grid.dt = g.at("dt").get<double>();
        s.grid.duration = g.at("duration").get<double>();
        s.grid.reference = g.at("reference").get<double>();
        for (const auto& f : j.at("fixtures")) {
            const auto mode = mode_from_string(f.at("mode").get<std::string>());
            if (!mode) throw InvalidInput("mode fixtures: unknown mode '" + f.at("mode").get<std::string>() + "'");
            s.fixtures.push_back({*mode, f.at("kp").get<double>(), f.at("kv").get<double>(),
                                  f.at("sat_limit").get<double>(), f.at("critical_settling").get<double>()});
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("mode fixtures: ") + e.what());
    }
}

inline ModeFixtureSet load_mode_fixtures(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    try {
        return mode_fixtures_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

/// Classifies one fixture the way it was found.
inline ModeReport classify_fixture(const ModeFixtureSet& s, const ModeFixture& f) {
    const auto res = run_grid_point(s.plant, s.grid, f.kp, f.kv, f.sat);
    ModeOptions opt;
    opt.critical_settling = f.critical_settling;
    return classify_mode_report(res.position, s.grid.reference, opt);
}

}  // namespace motorfit
