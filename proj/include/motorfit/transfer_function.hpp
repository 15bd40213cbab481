#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "motorfit/error.hpp"
#include "motorfit/polynomial.hpp"

namespace motorfit {

/// SISO continuous-time transfer function num(S)/den(S).
///
/// Always stored normalized: the denominator is monic and the scale lives in
/// the numerator. Construction rejects improper ratios and constant
/// denominators.
class TransferFunction {
public:
    TransferFunction(Polynomial num, Polynomial den) {
        if (den.is_zero()) throw InvalidInput("transfer function: zero denominator");
        if (den.degree() < 1) throw InvalidInput("transfer function: denominator degree must be >= 1");
        if (!num.is_zero() && num.degree() > den.degree())
            throw InvalidInput("transfer function: improper (numerator degree exceeds denominator degree)");
        const double lead = den.leading();
        num_ = num.scaled(1.0 / lead);
        den_ = den.scaled(1.0 / lead);
    }

    const Polynomial& num() const noexcept { return num_; }
    const Polynomial& den() const noexcept { return den_; }
    std::size_t order() const noexcept { return den_.degree(); }
    bool strictly_proper() const noexcept { return num_.is_zero() || num_.degree() < den_.degree(); }

    std::vector<Complex> poles() const { return den_.roots(); }
    std::vector<Complex> zeros() const { return num_.is_zero() ? std::vector<Complex>{} : num_.roots(); }

    Complex operator()(Complex s) const { return num_(s) / den_(s); }

    /// num(0)/den(0). Infinite (signed) when the denominator has a root at the
    /// origin that the numerator does not cancel.
    double dc_gain() const {
        const double d = den_[0];
        if (d == 0.0) return num_[0] == 0.0 ? std::nan("") : std::copysign(INFINITY, num_[0]);
        return num_[0] / d;
    }

    /// Gain of the lowest-order behavior near S=0: the ratio of the lowest
    /// nonzero numerator and denominator coefficients, together with the
    /// power of S it multiplies (negative for integrators).
    std::pair<double, int> low_frequency_gain() const {
        if (num_.is_zero()) return {0.0, 0};
        const std::size_t kn = num_.lowest_power();
        const std::size_t kd = den_.lowest_power();
        return {num_[kn] / den_[kd], static_cast<int>(kn) - static_cast<int>(kd)};
    }

    friend TransferFunction operator*(const TransferFunction& a, const TransferFunction& b) {
        return {a.num_ * b.num_, a.den_ * b.den_};
    }

private:
    Polynomial num_;
    Polynomial den_;
};

/// Largest coefficient difference between two normalized transfer functions.
inline double max_coeff_diff(const TransferFunction& a, const TransferFunction& b) {
    return std::max(max_coeff_diff(a.num(), b.num()), max_coeff_diff(a.den(), b.den()));
}

/// Unity negative feedback around gain*forward: gain*N / (D + gain*N).
inline TransferFunction feedback(const TransferFunction& forward, double gain = 1.0) {
    const Polynomial n = forward.num().scaled(gain);
    return {n, forward.den() + n};
}

}  // namespace motorfit
