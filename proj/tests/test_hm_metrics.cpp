#include <gtest/gtest.h>

#include <chrono>

#include "hmlab/hm_model.hpp"

using namespace hmlab;

TEST(HMModel, RejectsInvalidParameters) {
    EXPECT_THROW(HMModel(HMParams{2, 2}), ConfigError);
    EXPECT_THROW(HMModel(HMParams{4, 5}), ConfigError);
    EXPECT_THROW(HMModel(HMParams{4, 1}), ConfigError);
}

TEST(HMModel, TipValues) {
    for (int N = 3; N <= 7; ++N) {
        HMModel m(HMParams{N, 3});
        EXPECT_NEAR(m.upsilon(m.r_tip()), 1.0, 1e-15);
        EXPECT_NEAR(m.scalar_formula(m.r_tip()), -6.0 + (N - 2.0) * (N - 3.0), 1e-12);
    }
}

TEST(HMModel, CircleClosesSmoothlyAtTip) {
    // Near the tip sqrt(g_tau0tau0) must equal the distance log(r/r_tip) to
    // first order, so a 2pi period leaves no cone angle.
    for (int N = 3; N <= 7; ++N) {
        HMParams p{N, 2};
        p.tip_margin = 1e-9;
        HMModel m(p);
        for (double eps : {1e-3, 1e-4}) {
            Point x(2);
            x << m.r_tip() * std::exp(eps), 0.0;
            double ratio = std::sqrt(m.metric().at(x)(1, 1)) / eps;
            EXPECT_NEAR(ratio, 1.0, 5.0 * N * eps);
        }
    }
}

TEST(HMModel, FarFieldApproachesHyperbolicMetric) {
    HMModel m(HMParams{5, 3});
    Point x(3);
    x << 40.0, 0.0, 0.0;
    Eigen::MatrixXd g = m.metric().at(x);
    double b0 = 2.0 / 5.0;
    EXPECT_NEAR(g(1, 1) / (b0 * b0 * 1600.0) - 1.0, 0.0, 5.0 * std::pow(40.0, -5.0));
    EXPECT_NEAR(g(2, 2) / 1600.0 - 1.0, 0.0, 5.0 * std::pow(40.0, -5.0));
}

TEST(HMModel, ExactJetsMatchFiniteDifferences) {
    HMModel m(HMParams{6, 4});
    FdOptions exact;
    exact.source = DerivativeSource::Exact;
    for (const Point& p : m.sample_points(10)) {
        auto a = curvature(m.metric(), p, exact);
        auto b = curvature(m.metric(), p, verification_fd());
        EXPECT_LT(norm_g(a.ginv, a.riemann - b.riemann), 1e-7);
    }
}

TEST(HMModel, ClosedFormsHoldWithExactDerivatives) {
    FdOptions exact;
    exact.source = DerivativeSource::Exact;
    for (int N : {3, 5, 7}) {
        HMModel m(HMParams{N, 3});
        auto v = verify_hm_identities(m, 20, 1e-10, exact);
        for (const auto& c : v.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
    }
}

TEST(HMModel, AllIdentitiesAllDimensions) {
    auto t0 = std::chrono::steady_clock::now();
    for (int N = 3; N <= 7; ++N)
        for (int n = 2; n <= N; ++n) {
            HMModel m(HMParams{N, n});
            auto v = verify_hm_identities(m, 100, 1e-6, verification_fd());
            for (const auto& c : v.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
            EXPECT_EQ(v.table.rows.size(), 100u);
        }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 60.0);
}

TEST(HMModel, WeightIdentity) {
    for (int N = 3; N <= 7; ++N)
        for (int n = 2; n <= N; ++n) {
            HMModel m(HMParams{N, n});
            auto v = verify_weight_identity(m, 100, 1e-5, 1e-6, verification_fd());
            ASSERT_EQ(v.checks.size(), 1u);
            EXPECT_TRUE(v.checks[0].pass) << v.checks[0].name << " " << v.checks[0].value;
        }
}

TEST(HMModel, PeriodicDatasetFormIsIsometricLocally) {
    HMParams p{5, 4};
    p.flat_scales = {1.5, 0.5};
    p.periodic_flat = true;
    HMModel m(p);
    Point x(4);
    x << 2.0, 0.3, 1.0, 4.0;
    auto c = curvature(m.metric(), x, verification_fd());
    EXPECT_NEAR(c.scalar, m.scalar_formula(2.0), 1e-7);
}
