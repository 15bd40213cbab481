#pragma once

#include <Eigen/Dense>

#include "motorfit/error.hpp"
#include "motorfit/state_space.hpp"

namespace motorfit {

struct LeastSquaresSolution {
    Vector x;
    Vector singular_values;  ///< descending
    Eigen::Index rank = 0;
    double residual = 0.0;   ///< ||M x - b||_2
    bool rank_deficient = false;
};

/// Minimum-norm least-squares solution x = pinv(M) b through the SVD.
/// Singular values at or below rcond * sigma_max are treated as zero.
inline LeastSquaresSolution solve_pinv(const Matrix& M, const Vector& b, double rcond = 1e-10) {
    if (M.rows() != b.size()) throw InvalidInput("solve_pinv: row count does not match right-hand side");
    if (M.cols() == 0 || M.rows() == 0) throw InvalidInput("solve_pinv: empty system");
    if (!M.allFinite() || !b.allFinite()) throw InvalidInput("solve_pinv: non-finite entries");

    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cutoff = rcond * (s.size() > 0 ? s(0) : 0.0);

    LeastSquaresSolution out;
    out.singular_values = s;
    const Vector ub = svd.matrixU().transpose() * b;
    Vector scaled = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff && s(i) > 0.0) {
            scaled(i) = ub(i) / s(i);
            ++out.rank;
        }
    }
    out.x = svd.matrixV() * scaled;
    out.residual = (M * out.x - b).norm();
    out.rank_deficient = out.rank < M.cols();
    return out;
}

}  // namespace motorfit
