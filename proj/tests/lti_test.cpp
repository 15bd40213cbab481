#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "motorfit/lti.hpp"
#include "test_support.hpp"

using namespace motorfit;
using motorfit::testing::root_set_distance;

namespace {

StateSpaceModel make_model(Matrix A, Matrix B, Matrix C, double d = 0.0) {
    return {std::move(A), std::move(B), std::move(C), Matrix::Constant(1, 1, d)};
}

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST(Polynomial, EvaluatesAscendingCoefficients) {
    const Polynomial p{1.0, 2.0, 3.0};  // 1 + 2S + 3S^2
    EXPECT_DOUBLE_EQ(p(2.0), 17.0);
    EXPECT_EQ(p.degree(), 2u);
    EXPECT_EQ(Polynomial({1.0, 0.0, 0.0}).degree(), 0u);
}

TEST(Polynomial, FromRootsExpandsConjugatePairs) {
    const std::vector<Complex> r{{-1.0, 2.0}, {-1.0, -2.0}};
    const Polynomial p = Polynomial::from_roots(r);
    EXPECT_NEAR(p[0], 5.0, 1e-14);
    EXPECT_NEAR(p[1], 2.0, 1e-14);
    EXPECT_NEAR(p[2], 1.0, 1e-14);
}

TEST(TransferFunction, NormalizesToMonicDenominator) {
    const TransferFunction h(Polynomial{6.0}, Polynomial{4.0, 2.0});
    EXPECT_DOUBLE_EQ(h.num()[0], 3.0);
    EXPECT_DOUBLE_EQ(h.den()[1], 1.0);
    EXPECT_DOUBLE_EQ(h.den()[0], 2.0);
}

TEST(TransferFunction, RejectsImproperAndConstantDenominators) {
    EXPECT_THROW(TransferFunction(Polynomial{0.0, 0.0, 1.0}, Polynomial{1.0, 1.0}), InvalidInput);
    EXPECT_THROW(TransferFunction(Polynomial{1.0}, Polynomial{2.0}), InvalidInput);
}

TEST(SsToTf, FirstOrderByCofactor) {
    const auto h = ss_to_tf(make_model(mat({{-2}}), mat({{3}}), mat({{1}})));
    EXPECT_EQ(h.num(), Polynomial{3.0});
    EXPECT_EQ(h.den(), (Polynomial{2.0, 1.0}));
}

TEST(SsToTf, SecondOrderMarkovCase) {
    const auto h = ss_to_tf(make_model(mat({{0, 1}, {-36, -1}}), mat({{0}, {36}}), mat({{1, 0}})));
    EXPECT_EQ(h.num().degree(), 0u);
    EXPECT_NEAR(h.num()[0], 36.0, 1e-12);
    EXPECT_NEAR(h.den()[0], 36.0, 1e-12);
    EXPECT_NEAR(h.den()[1], 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(h.den()[2], 1.0);
}

TEST(SsToTf, PureIntegrator) {
    const auto h = ss_to_tf(make_model(mat({{0}}), mat({{1}}), mat({{1}})));
    EXPECT_EQ(h.num(), Polynomial{1.0});
    EXPECT_EQ(h.den(), (Polynomial{0.0, 1.0}));
}

TEST(SsToTf, FeedthroughAddsScaledDenominator) {
    const auto h = ss_to_tf(make_model(mat({{-2}}), mat({{3}}), mat({{1}}), 0.5));
    EXPECT_NEAR(h.num()[0], 4.0, 1e-14);  // 3 + 0.5*2
    EXPECT_NEAR(h.num()[1], 0.5, 1e-14);
}

TEST(SsToTf, RejectsDimensionMismatch) {
    EXPECT_THROW(ss_to_tf(make_model(mat({{0, 1}, {-1, -1}}), mat({{0}}), mat({{1, 0}}))), InvalidModel);
    EXPECT_THROW(ss_to_tf(make_model(mat({{0, 1}}), mat({{0}}), mat({{1, 0}}))), InvalidModel);
}

TEST(TfToSsCompanion, SecondOrder) {
    const TransferFunction h(Polynomial{36.0}, Polynomial{36.0, 1.0, 1.0});
    const auto m = tf_to_ss_companion(h);
    EXPECT_EQ(m.A, mat({{0, 1}, {-36, -1}}));
    EXPECT_EQ(m.B, mat({{0}, {1}}));
    EXPECT_LT(max_coeff_diff(ss_to_tf(m), h), 1e-12);
}

TEST(TfToSsCompanion, Integrator) {
    const auto m = tf_to_ss_companion(TransferFunction(Polynomial{1.0}, Polynomial{0.0, 1.0}));
    EXPECT_EQ(m.A, mat({{0}}));
    EXPECT_EQ(m.B, mat({{1}}));
    EXPECT_EQ(m.C, mat({{1}}));
    EXPECT_EQ(m.D, mat({{0}}));
}

TEST(TfToSsCompanion, ThirdOrderAlphaFamily) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{0.03, 1.0, 0.1, 1.0});
    const auto m = tf_to_ss_companion(h);
    EXPECT_EQ(m.states(), 3);
    const Polynomial cp = characteristic_polynomial(m.A);
    EXPECT_LT(max_coeff_diff(cp, Polynomial{0.03, 1.0, 0.1, 1.0}), 1e-14);
}

TEST(Poles, OpenLoopServoPlant) {
    // 10 / (S (S+1) (S+10))
    const TransferFunction h(Polynomial{10.0}, Polynomial{0.0, 10.0, 11.0, 1.0});
    const std::vector<Complex> expected{0.0, -1.0, -10.0};
    EXPECT_LT(root_set_distance(poles(h), expected), 1e-10);
    EXPECT_LT(root_set_distance(poles(TransferFunction(Polynomial{1.0}, Polynomial{1.0, 1.0})), {-1.0}), 1e-15);
}

TEST(Poles, SmallAlphaIsUnstable) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{0.03, 1.0, 0.02, 1.0});
    EXPECT_GT(max_real_part(poles(h)), 0.0);
}

TEST(CancelNearPoleZero, NearOriginPairOfIdentifiedVelocityModel) {
    const Polynomial num = Polynomial{0.0048, 1.0}.scaled(2.1751);
    const Polynomial den = Polynomial{0.0189, 1.0} * Polynomial{2.2998, 1.0};
    const auto h = cancel_near_pole_zero(TransferFunction(num, den), 0.05);
    ASSERT_EQ(h.order(), 1u);
    EXPECT_NEAR(h.num()[0], 2.1751, 1e-12);
    EXPECT_NEAR(h.den()[0], 2.2998, 1e-12);
}

TEST(CancelNearPoleZero, NoZeroIsNoOp) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{1.0, 1.0});
    const auto r = cancel_near_pole_zero(h, 10.0);
    EXPECT_EQ(r.num(), h.num());
    EXPECT_EQ(r.den(), h.den());
}

TEST(CancelNearPoleZero, ExactCancellation) {
    const TransferFunction h(Polynomial{1.0, 1.0}, Polynomial{1.0, 1.0} * Polynomial{5.0, 1.0});
    const auto r = cancel_near_pole_zero(h, 1e-9);
    ASSERT_EQ(r.order(), 1u);
    EXPECT_NEAR(r.num()[0], 1.0, 1e-12);
    EXPECT_NEAR(r.den()[0], 5.0, 1e-12);
}

TEST(CancelNearPoleZero, NegativeToleranceRejected) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{1.0, 1.0});
    EXPECT_THROW(cancel_near_pole_zero(h, -1.0), InvalidInput);
}

TEST(DominantPoleReduce, ClosedLoopAfterInsertion) {
    const TransferFunction h(Polynomial{50.0}, Polynomial{50.0, 10.0, 11.0, 1.0});
    const auto r = dominant_pole_reduce(h, 2);
    ASSERT_EQ(r.order(), 2u);
    EXPECT_NEAR(r.num()[0], 4.762, 0.01);
    EXPECT_NEAR(r.den()[0], 4.762, 0.01);
    EXPECT_NEAR(r.den()[1], 0.5, 0.01);
}

TEST(DominantPoleReduce, KeepsSlowPoleAndDcGain) {
    const TransferFunction h(Polynomial{10.0}, Polynomial{1.0, 1.0} * Polynomial{10.0, 1.0});
    const auto r = dominant_pole_reduce(h, 1);
    EXPECT_NEAR(r.num()[0], 1.0, 1e-12);
    EXPECT_NEAR(r.den()[0], 1.0, 1e-12);
}

TEST(DominantPoleReduce, AlreadyAtTargetOrder) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{1.0, 1.0});
    const auto r = dominant_pole_reduce(h, 1);
    EXPECT_EQ(r.num(), h.num());
    EXPECT_EQ(r.den(), h.den());
}

TEST(DominantPoleReduce, IntegratorKeepsLowFrequencyGain) {
    // 10 / (S (S+1) (S+10)) -> 1 / (S (S+1))
    const TransferFunction h(Polynomial{10.0}, Polynomial{0.0, 10.0, 11.0, 1.0});
    const auto r = dominant_pole_reduce(h, 2);
    EXPECT_NEAR(r.num()[0], 1.0, 1e-12);
    EXPECT_NEAR(r.den()[0], 0.0, 1e-12);
    EXPECT_NEAR(r.den()[1], 1.0, 1e-12);
}

TEST(DominantPoleReduce, RefusesToSplitConjugatePair) {
    // Poles -1 +- 2j and -10: order 1 would split the pair.
    const TransferFunction h(Polynomial{1.0}, Polynomial{5.0, 2.0, 1.0} * Polynomial{10.0, 1.0});
    EXPECT_THROW(dominant_pole_reduce(h, 1), IdentificationError);
    EXPECT_NO_THROW(dominant_pole_reduce(h, 2));
}

TEST(DominantPoleReduce, RefusesTiedRealPoles) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{1.0, 1.0} * Polynomial{1.0, 1.0} * Polynomial{5.0, 1.0});
    EXPECT_THROW(dominant_pole_reduce(h, 1), IdentificationError);
}

TEST(DominantPoleReduce, RejectsUnstableModel) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{0.03, 1.0, 0.02, 1.0});
    EXPECT_THROW(dominant_pole_reduce(h, 2), InvalidInput);
}

TEST(StepResponse, FirstOrderAgainstClosedForm) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{1.0, 1.0});
    const auto y = step_response(h, 1.0, 0.01, 2.0);
    ASSERT_EQ(y.size(), 201u);
    EXPECT_NEAR(y[100], 1.0 - std::exp(-1.0), 1e-8);
}

TEST(StepResponse, IntegratorRamp) {
    const auto y = step_response(TransferFunction(Polynomial{1.0}, Polynomial{0.0, 1.0}), 1.0, 0.01, 2.0);
    EXPECT_NEAR(y.samples.back(), 2.0, 1e-12);
}

TEST(StepResponse, TachometerSteadyState) {
    const TransferFunction h(Polynomial{2.1354}, Polynomial{2.3579, 1.0});
    const auto y = step_response(h, 5.92, 0.004, 6.0);
    EXPECT_NEAR(y.samples.back(), 5.36, 0.01);
}

TEST(StepResponse, DivergentSystemIsTruncatedAndFlagged) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{-50.0, 1.0});
    const auto y = step_response(h, 1.0, 0.01, 100.0);
    EXPECT_TRUE(y.diverged);
    EXPECT_LT(y.size(), grid_points(0.01, 100.0));
    for (double v : y.samples) EXPECT_TRUE(std::isfinite(v));
}

TEST(StepResponse, RejectsBadGrid) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{1.0, 1.0});
    EXPECT_THROW(step_response(h, 1.0, 0.0, 1.0), InvalidInput);
    EXPECT_THROW(step_response(h, 1.0, 0.1, 0.05), InvalidInput);
}

TEST(ImpulseResponse, FirstOrder) {
    const auto y = impulse_response(TransferFunction(Polynomial{1.0}, Polynomial{1.0, 1.0}), 0.01, 2.0);
    EXPECT_NEAR(y[100], std::exp(-1.0), 1e-8);
}

TEST(ImpulseResponse, IntegratorIsConstant) {
    const auto y = impulse_response(TransferFunction(Polynomial{1.0}, Polynomial{0.0, 1.0}), 0.01, 1.0);
    for (double v : y.samples) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(ImpulseResponse, MatchesMarkovSeriesEarly) {
    // q(i) = C A^(i-1) B for A=[[0,1],[-36,-1]], B=[0,36], C=[1,0]; 40 terms
    // of the series make the truncation error negligible on [0, 0.1].
    Matrix A = mat({{0, 1}, {-36, -1}});
    Vector x(2);
    x << 0, 36;
    std::vector<double> q;
    for (int i = 0; i < 40; ++i) {
        q.push_back(x(0));
        x = A * x;
    }
    const TransferFunction h(Polynomial{36.0}, Polynomial{36.0, 1.0, 1.0});
    const auto y = impulse_response(h, 0.002, 0.1);
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double t = y.time(k);
        double series = 0.0, term = 1.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            series += q[i] * term;
            term *= t / static_cast<double>(i + 1);
        }
        EXPECT_NEAR(y[k], series, 1e-6) << "t=" << t;
    }
}

// ---- properties -----------------------------------------------------------

TEST(LtiProperties, CompanionRoundTrip) {
    std::mt19937 rng(12345);
    for (int trial = 0; trial < 200; ++trial) {
        const auto order = static_cast<std::size_t>(1 + trial % 4);
        const auto h = motorfit::testing::random_tf(rng, order);
        const auto back = ss_to_tf(tf_to_ss_companion(h));
        const double scale = std::max({1.0, h.num().coeffs().back(), h.den().coeffs().front()});
        for (std::size_t k = 0; k <= order; ++k) {
            EXPECT_NEAR(back.num()[k], h.num()[k], 1e-9 * std::max(1.0, std::abs(h.num()[k])) * scale);
            EXPECT_NEAR(back.den()[k], h.den()[k], 1e-9 * std::max(1.0, std::abs(h.den()[k])));
        }
    }
}

TEST(LtiProperties, SimilarityInvariance) {
    std::mt19937 rng(777);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 2;
        StateSpaceModel m{Matrix(n, n), Matrix(n, 1), Matrix(1, n), Matrix::Zero(1, 1)};
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) m.A(i, j) = motorfit::testing::uniform(rng, -3, 3);
            m.B(i, 0) = motorfit::testing::uniform(rng, -3, 3);
            m.C(0, i) = motorfit::testing::uniform(rng, -3, 3);
        }
        Matrix T = Matrix::Identity(n, n) * 2.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) T(i, j) += motorfit::testing::uniform(rng, -0.5, 0.5);
        const Matrix Ti = T.inverse();
        const StateSpaceModel s{T * m.A * Ti, T * m.B, m.C * Ti, m.D};
        EXPECT_LT(max_coeff_diff(ss_to_tf(m), ss_to_tf(s)), 1e-6);
    }
}

TEST(LtiProperties, PolesAreEigenvalues) {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 4;
        StateSpaceModel m{Matrix(n, n), Matrix::Ones(n, 1), Matrix::Ones(1, n), Matrix::Zero(1, 1)};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m.A(i, j) = motorfit::testing::uniform(rng, -2, 2);
        const Eigen::VectorXcd ev = m.A.eigenvalues();
        const std::vector<Complex> eig(ev.data(), ev.data() + ev.size());
        EXPECT_LT(root_set_distance(poles(ss_to_tf(m)), eig), 1e-6);
    }
}

TEST(LtiProperties, ReductionPreservesDcGain) {
    std::mt19937 rng(4242);
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 50; ++trial) {
        // Stable real poles, spread so ties are improbable.
        std::vector<Complex> ps;
        for (int i = 0; i < 4; ++i) ps.emplace_back(-motorfit::testing::uniform(rng, 0.1, 20.0), 0.0);
        const std::vector<Complex> zs{Complex(-motorfit::testing::uniform(rng, 0.1, 20.0), 0.0)};
        const TransferFunction h(Polynomial::from_roots(zs, motorfit::testing::uniform(rng, 0.5, 5.0)),
                                 Polynomial::from_roots(ps));
        for (std::size_t target = 1; target < 4; ++target) {
            const auto r = dominant_pole_reduce(h, target);
            EXPECT_NEAR(r.dc_gain(), h.dc_gain(), 1e-9 * std::max(1.0, std::abs(h.dc_gain())));
            EXPECT_LE(r.num().degree() + 1, std::max<std::size_t>(target, 1));
        }
        ++checked;
    }
    EXPECT_EQ(checked, 50);
}

TEST(LtiProperties, CancelWithZeroToleranceIsIdentity) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto h = motorfit::testing::random_tf(rng, static_cast<std::size_t>(1 + trial % 4));
        const auto r = cancel_near_pole_zero(h, 0.0);
        EXPECT_EQ(r.num(), h.num());
        EXPECT_EQ(r.den(), h.den());
    }
}

TEST(LtiProperties, IntegratorFourthOrderConvergence) {
    const TransferFunction h(Polynomial{1.0}, Polynomial{1.0, 1.0});
    const auto max_err = [&](double dt) {
        const auto y = step_response(h, 1.0, dt, 5.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k)
            worst = std::max(worst, std::abs(y[k] - (1.0 - std::exp(-y.time(k)))));
        return worst;
    };
    double prev = max_err(0.2);
    for (double dt : {0.1, 0.05, 0.025}) {
        const double cur = max_err(dt);
        EXPECT_GE(prev / cur, 8.0) << "dt=" << dt;
        prev = cur;
    }
}
