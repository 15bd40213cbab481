#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "motorfit/error.hpp"
#include "motorfit/lti.hpp"
#include "motorfit/markov_ident.hpp"
#include "motorfit/mode_fixtures.hpp"
#include "motorfit/pinv_ident.hpp"
#include "motorfit/state_space.hpp"
#include "motorfit/transfer_function.hpp"

namespace motorfit {

/// Identified model as written to disk. `model` has the velocity output;
/// c_position/d_position give the position output of the same dynamics.
/// The raw transfer functions are exactly ss_to_tf of the matrices; the
/// reduced ones have near pole/zero pairs cancelled.
struct ModelDocument {
    std::string method;  ///< pinv, markov or first_order
    StateSpaceModel model;
    RowVector c_position;
    double d_position = 0.0;
    TransferFunction velocity_tf;
    TransferFunction position_tf;
    TransferFunction velocity_tf_reduced;
    TransferFunction position_tf_reduced;
    nlohmann::json diagnostics = nlohmann::json::object();

    int states() const { return static_cast<int>(model.states()); }
    StateSpaceModel position_model() const { return model.with_output(c_position, d_position); }

    /// Largest coefficient gap between the embedded and recomputed TFs.
    double consistency_error() const {
        return std::max(max_coeff_diff(velocity_tf, ss_to_tf(model)),
                        max_coeff_diff(position_tf, ss_to_tf(position_model())));
    }
};

inline constexpr double kDocumentTolerance = 1e-9;

inline ModelDocument make_document(std::string method, const StateSpaceModel& velocity_model,
                                   const RowVector& c_position, double d_position, double cancel_tol) {
    const auto vel = ss_to_tf(velocity_model);
    const auto pos = ss_to_tf(velocity_model.with_output(c_position, d_position));
    return {std::move(method),
            velocity_model,
            c_position,
            d_position,
            vel,
            pos,
            cancel_near_pole_zero(vel, cancel_tol),
            cancel_near_pole_zero(pos, cancel_tol)};
}

inline nlohmann::json spectrum_json(const Vector& s) { return std::vector<double>(s.data(), s.data() + s.size()); }

inline ModelDocument document_from_pinv(const PinvIdentification& id, double cancel_tol) {
    const int n = static_cast<int>(id.model.states());
    auto d = make_document("pinv", id.model, RowVector::Unit(n, 0), 0.0, cancel_tol);
    d.diagnostics["residual"] = id.solution.residual;
    d.diagnostics["rank"] = id.solution.rank;
    d.diagnostics["rank_deficient"] = id.solution.rank_deficient;
    d.diagnostics["singular_values"] = spectrum_json(id.solution.singular_values);
    d.diagnostics["first_row_deviation"] = id.first_row_deviation;
    d.diagnostics["cancel_tol"] = cancel_tol;
    return d;
}

/// The Markov model's own output is position (the fitted velocity is the
/// impulse response of its TF); velocity is the derivative C A x + C B u.
inline ModelDocument document_from_markov(const MarkovIdentification& id, double cancel_tol) {
    const StateSpaceModel& m = id.model;
    const StateSpaceModel vel = m.with_output(m.C * m.A, (m.C * m.B)(0, 0));
    auto d = make_document("markov", vel, m.C, m.D(0, 0), cancel_tol);
    d.diagnostics["order"] = id.order.order;
    d.diagnostics["spectrum"] = id.order.spectrum;
    d.diagnostics["markov_parameters"] = id.sequence.q;
    d.diagnostics["lm"] = id.sequence.size();
    d.diagnostics["te"] = id.sequence.te;
    d.diagnostics["v0"] = id.sequence.v0;
    d.diagnostics["cancel_tol"] = cancel_tol;
    return d;
}

/// k / (S + a) for velocity, realized with states [position, velocity].
inline ModelDocument document_from_first_order(const TransferFunction& velocity, double va, double cancel_tol) {
    if (velocity.order() != 1 || velocity.num().degree() != 0)
        throw InvalidInput("document_from_first_order: expected k / (S + a)");
    const double a = velocity.den()[0] / velocity.den()[1];
    const double k = velocity.num()[0] / velocity.den()[1];
    StateSpaceModel m{Matrix(2, 2), Matrix(2, 1), RowVector::Unit(2, 1), Matrix::Zero(1, 1)};
    m.A << 0.0, 1.0, 0.0, -a;
    m.B << 0.0, k;
    auto d = make_document("first_order", m, RowVector::Unit(2, 0), 0.0, cancel_tol);
    d.diagnostics["k"] = k;
    d.diagnostics["tau"] = 1.0 / a;
    d.diagnostics["v_inf"] = k * va / a;
    d.diagnostics["cancel_tol"] = cancel_tol;
    return d;
}

// ---- JSON -------------------------------------------------------------------

inline nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty() || rows.front().empty()) throw InvalidModel(std::string("model document: empty ") + what);
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw InvalidModel(std::string("model document: ragged ") + what);
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

inline nlohmann::json to_json(const ModelDocument& d) {
    return {{"method", d.method},
            {"states", d.states()},
            {"A", matrix_json(d.model.A)},
            {"B", matrix_json(d.model.B)},
            {"C", matrix_json(d.model.C)},
            {"D", matrix_json(d.model.D)},
            {"C_position", matrix_json(d.c_position)},
            {"D_position", matrix_json(Matrix::Constant(1, 1, d.d_position))},
            {"velocity_tf", tf_to_json(d.velocity_tf)},
            {"position_tf", tf_to_json(d.position_tf)},
            {"velocity_tf_reduced", tf_to_json(d.velocity_tf_reduced)},
            {"position_tf_reduced", tf_to_json(d.position_tf_reduced)},
            {"diagnostics", d.diagnostics}};
}

/// Parses and checks a document: shapes, a known method, and embedded TFs
/// that agree with the matrices.
inline ModelDocument model_document_from_json(const nlohmann::json& j) {
    auto d = [&]() -> ModelDocument {
        try {
            const StateSpaceModel m{matrix_from_json(j.at("A"), "A"), matrix_from_json(j.at("B"), "B"),
                                    matrix_from_json(j.at("C"), "C"), matrix_from_json(j.at("D"), "D")};
            const Matrix cp = matrix_from_json(j.at("C_position"), "C_position");
            const Matrix dp = matrix_from_json(j.at("D_position"), "D_position");
            if (cp.rows() != 1 || dp.rows() != 1 || dp.cols() != 1)
                throw InvalidModel("model document: position output has the wrong shape");
            if (j.at("states").get<Eigen::Index>() != m.A.rows())
                throw InvalidModel("model document: 'states' does not match A");
            return {j.at("method").get<std::string>(),
                    m,
                    cp.row(0),
                    dp(0, 0),
                    tf_from_json(j.at("velocity_tf")),
                    tf_from_json(j.at("position_tf")),
                    tf_from_json(j.at("velocity_tf_reduced")),
                    tf_from_json(j.at("position_tf_reduced")),
                    j.value("diagnostics", nlohmann::json::object())};
        } catch (const nlohmann::json::exception& e) {
            throw InvalidModel(std::string("model document: ") + e.what());
        }
    }();
    if (d.method != "pinv" && d.method != "markov" && d.method != "first_order")
        throw InvalidModel("model document: unknown method '" + d.method + "'");
    d.model.validate();
    d.position_model().validate();
    if (const double e = d.consistency_error(); !(e <= kDocumentTolerance))
        throw InvalidModel("model document: transfer functions disagree with the matrices by " + std::to_string(e));
    return d;
}

inline ModelDocument load_model_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    try {
        return model_document_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

// ---- fit report -------------------------------------------------------------

struct FitReport {
    double nrmse = 0.0;          ///< RMS error over the measured peak-to-peak
    double max_abs_error = 0.0;
    double horizon = 0.0;        ///< seconds covered by the comparison
    std::size_t samples = 0;
};

/// Compares two traces on a shared grid, sample by sample over their common
/// length.
inline FitReport fit_report(const Trace& model, const Trace& measured) {
    if (std::abs(model.dt - measured.dt) > 1e-9 * measured.dt)
        throw InvalidInput("fit_report: model and measurement are on different grids");
    const std::size_t n = std::min(model.size(), measured.size());
    if (n < 2) throw InvalidInput("fit_report: fewer than 2 common samples");
    const auto first = measured.samples.begin();
    const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(n));
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw InvalidInput("fit_report: measured signal is flat");
    FitReport r;
    double sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double e = model[k] - measured[k];
        sq += e * e;
        r.max_abs_error = std::max(r.max_abs_error, std::abs(e));
    }
    r.nrmse = std::sqrt(sq / static_cast<double>(n)) / range;
    r.samples = n;
    r.horizon = static_cast<double>(n - 1) * measured.dt;
    return r;
}

}  // namespace motorfit
