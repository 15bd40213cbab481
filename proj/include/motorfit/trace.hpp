#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace motorfit {

/// Uniformly sampled scalar signal; sample k sits at t0 + k*dt.
struct Trace {
    double t0 = 0.0;
    double dt = 1.0;
    std::vector<double> samples;
    std::string label;
    /// Set when a simulation left the finite range and the trace was cut short.
    bool diverged = false;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    double time(std::size_t k) const noexcept { return t0 + static_cast<double>(k) * dt; }
    double duration() const noexcept { return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) * dt; }
    double operator[](std::size_t k) const noexcept { return samples[k]; }
};

/// Number of grid points k*dt with k*dt <= duration (tolerating round-off).
inline std::size_t grid_points(double dt, double duration) {
    return static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
}

}  // namespace motorfit
