#pragma once

#include <string>

#include <Eigen/Dense>

#include "motorfit/error.hpp"

namespace motorfit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// x' = A x + B u, y = C x + D u, single input and single output.
struct StateSpaceModel {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix D;

    Eigen::Index states() const noexcept { return A.rows(); }

    void validate() const {
        const auto n = A.rows();
        if (n < 1 || A.cols() != n) throw InvalidModel("state-space model: A must be square with n >= 1");
        if (B.rows() != n || B.cols() != 1) throw InvalidModel("state-space model: B must be n x 1");
        if (C.rows() != 1 || C.cols() != n) throw InvalidModel("state-space model: C must be 1 x n");
        if (D.rows() != 1 || D.cols() != 1) throw InvalidModel("state-space model: D must be 1 x 1");
        if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite())
            throw InvalidModel("state-space model: non-finite entry");
    }

    /// Same dynamics, different output row.
    StateSpaceModel with_output(const RowVector& c, double d = 0.0) const {
        return {A, B, c, Matrix::Constant(1, 1, d)};
    }
};

}  // namespace motorfit
