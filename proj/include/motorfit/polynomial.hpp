#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "motorfit/error.hpp"

namespace motorfit {

using Complex = std::complex<double>;

/// Real polynomial in S with coefficients stored in ascending powers:
/// coeffs()[k] multiplies S^k.
class Polynomial {
public:
    Polynomial() : coeffs_{0.0} {}
    Polynomial(std::initializer_list<double> c) : coeffs_(c) { trim(); }
    explicit Polynomial(std::vector<double> c) : coeffs_(std::move(c)) { trim(); }

    static Polynomial constant(double c) { return Polynomial(std::vector<double>{c}); }

    /// S^k
    static Polynomial monomial(std::size_t k, double c = 1.0) {
        std::vector<double> v(k + 1, 0.0);
        v[k] = c;
        return Polynomial(std::move(v));
    }

    /// Monic polynomial with the given roots. Complex roots must come in
    /// conjugate pairs; the imaginary residue of the expansion is dropped.
    static Polynomial from_roots(std::span<const Complex> roots, double gain = 1.0) {
        std::vector<Complex> acc{Complex(1.0)};
        for (const Complex& r : roots) {
            std::vector<Complex> next(acc.size() + 1, Complex(0.0));
            for (std::size_t k = 0; k < acc.size(); ++k) {
                next[k + 1] += acc[k];
                next[k] -= r * acc[k];
            }
            acc = std::move(next);
        }
        std::vector<double> out(acc.size());
        std::transform(acc.begin(), acc.end(), out.begin(),
                       [gain](const Complex& c) { return gain * c.real(); });
        return Polynomial(std::move(out));
    }

    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    std::size_t degree() const noexcept { return coeffs_.size() - 1; }
    double leading() const noexcept { return coeffs_.back(); }
    double operator[](std::size_t k) const noexcept { return k < coeffs_.size() ? coeffs_[k] : 0.0; }
    bool is_zero() const noexcept { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }

    /// Index of the lowest nonzero coefficient (the multiplicity of the root at S=0).
    std::size_t lowest_power() const noexcept {
        std::size_t k = 0;
        while (k + 1 < coeffs_.size() && coeffs_[k] == 0.0) ++k;
        return k;
    }

    template <typename T>
    T operator()(T s) const {
        T acc = T(0);
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * s + T(*it);
        return acc;
    }

    Polynomial derivative() const {
        if (coeffs_.size() == 1) return Polynomial{};
        std::vector<double> d(coeffs_.size() - 1);
        for (std::size_t k = 1; k < coeffs_.size(); ++k) d[k - 1] = static_cast<double>(k) * coeffs_[k];
        return Polynomial(std::move(d));
    }

    /// Roots with multiplicity, as eigenvalues of the companion matrix.
    std::vector<Complex> roots() const {
        const std::size_t n = degree();
        if (n == 0) return {};
        if (n == 1) return {Complex(-coeffs_[0] / coeffs_[1])};
        Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
        for (std::size_t i = 0; i < n; ++i) companion(i, n - 1) = -coeffs_[i] / coeffs_[n];
        Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
        if (solver.info() != Eigen::Success) throw IdentificationError("polynomial roots: eigenvalue solver failed");
        const auto& ev = solver.eigenvalues();
        return {ev.data(), ev.data() + ev.size()};
    }

    Polynomial scaled(double c) const {
        std::vector<double> v = coeffs_;
        for (double& x : v) x *= c;
        return Polynomial(std::move(v));
    }

    Polynomial monic() const {
        if (is_zero()) throw InvalidInput("cannot normalize the zero polynomial");
        return scaled(1.0 / leading());
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<double> v(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = a[k] + b[k];
        return Polynomial(std::move(v));
    }

    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + b.scaled(-1.0); }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        std::vector<double> v(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
            for (std::size_t j = 0; j < b.coeffs_.size(); ++j) v[i + j] += a.coeffs_[i] * b.coeffs_[j];
        return Polynomial(std::move(v));
    }

    friend Polynomial operator*(double c, const Polynomial& p) { return p.scaled(c); }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    // Drops exact trailing zeros only; small-but-nonzero leading terms are data.
    void trim() {
        if (coeffs_.empty()) coeffs_.push_back(0.0);
        while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
    }

    std::vector<double> coeffs_;
};

/// Largest coefficient-wise absolute difference, with missing entries read as 0.
inline double max_coeff_diff(const Polynomial& a, const Polynomial& b) {
    const std::size_t n = std::max(a.coeffs().size(), b.coeffs().size());
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
    return worst;
}

}  // namespace motorfit
