#include <gtest/gtest.h>

#include "hmlab/barriers.hpp"

using namespace hmlab;

TEST(Barriers, SHatBracketForThree) {
    EXPECT_LT(s_hat_defect(2.0, 3), 0.0);
    EXPECT_NEAR(s_hat_defect(2.0, 3), 2.0 / std::sqrt(3.0) - 2.0, 1e-15);
    EXPECT_GT(s_hat_defect(7.0, 3), 0.0);
    double s = solve_s_hat(3).value;
    EXPECT_GT(s, 2.0);
    EXPECT_LT(s, 7.0);
}

TEST(Barriers, SHatResidualAllN) {
    for (int N = 3; N <= 7; ++N) {
        SHat s = solve_s_hat(N);
        EXPECT_LT(s.residual, 1e-12) << N;
        EXPECT_GT(s.value, 2.0);
        EXPECT_EQ(s.sign_changes, 1);
    }
    EXPECT_THROW(solve_s_hat(2), ConfigError);
}

TEST(Barriers, PsiBranchesAndLimits) {
    for (int N = 3; N <= 7; ++N) {
        double sh = s_hat(N);
        EXPECT_NEAR(barrier_psi(0.5 * (1 + sh), N), std::sqrt(1 - 4 / ((1 + sh) * (1 + sh))), 1e-15);
        EXPECT_LT(barrier_psi(1.0 + 1e-12, N), 2e-6);
        // C^1 at the junction: compare one-sided values
        double e = 1e-9;
        EXPECT_NEAR(barrier_psi(sh - e, N), barrier_psi(sh + e, N), 1e-8);
        EXPECT_NEAR(barrier_psi_prime(sh - e, N), barrier_psi_prime(sh + e, N), 1e-7);
        // psi' is the derivative of psi on both branches
        for (double s : {1.3, sh + 0.4, 3 * sh}) {
            Jet x = Jet::variable(1, 0, s);
            EXPECT_NEAR(barrier_psi(x, N).grad(0), barrier_psi_prime(s, N), 1e-13);
        }
        EXPECT_LT(barrier_psi(1e6, N), 1.0 + 1.0 / N);
    }
    EXPECT_THROW(barrier_psi(1.0, 3), DomainError);
}

TEST(Barriers, ChiBranchesAndEstimate) {
    for (int N = 3; N <= 7; ++N) {
        double sh = s_hat(N);
        double s = 0.5 * (1 + sh);
        EXPECT_NEAR(chi_closed(s, N), (N - 2.0) / s, 1e-15);
        EXPECT_NEAR(chi_generic(s, N), (N - 2.0) / s, 1e-12);
        EXPECT_NEAR(std::pow(1e4, N) * chi_closed(1e4, N), std::ldexp(1.0, N), 1e-6 * std::ldexp(1.0, N));
        for (int i = 0; i < 10000; ++i) {
            double t = 1.001 * std::pow(1e3 / 1.001, i / 9999.0);
            if (std::abs(t - sh) < 1e-6) continue;
            ASSERT_GE(chi_closed(t, N) * std::pow(t, N), 1.0) << N << " " << t;
            if (t > sh) {
                ASSERT_GE(chi_closed(t, N) * std::pow(t, N), std::pow(2.0, N - 1.5) * (1 - 1e-12));
            }
        }
    }
    EXPECT_THROW(chi_closed(s_hat(4), 4), DomainError);
}

TEST(Barriers, DomainMembershipAndNesting) {
    BarrierSpec bs{4, 2, {0.5}, 10.0, 0.3};
    EXPECT_FALSE(in_barrier(bs, 9.0, 0.3));
    EXPECT_TRUE(in_barrier(bs, 30.0, 0.3));
    EXPECT_TRUE(in_barrier(bs, 30.0, 0.3 + kTwoPi));
    double half = barrier_psi(3.0, 4) / (0.5 * 10.0);
    EXPECT_TRUE(in_barrier(bs, 30.0, 0.3 - 0.99 * half));
    EXPECT_FALSE(in_barrier(bs, 30.0, 0.3 + 1.01 * half));
    EXPECT_EQ(nesting_violations(4, 0.5, 10.0, 20.0, 0.3), 0);
    EXPECT_EQ(nesting_violations(6, 1.3, 2.0, 40.0, 6.0), 0);
}

TEST(Barriers, MeanConcavityIdentityHyperbolic) {
    for (int N = 3; N <= 6; ++N)
        for (int n = 3; n <= N; ++n) {
            std::vector<double> b{2.0 / N};
            for (int k = 1; k < n - 1; ++k) b.push_back(0.8 + 0.3 * k);
            BarrierSpec bs{N, n, b, 20.0, 1.0};
            EXPECT_LT(mean_concavity_residual(bs, 100, verification_fd()), 1e-5) << N << n;
        }
}

TEST(Barriers, NormalComponentClosedForm) {
    BarrierSpec bs{4, 3, {0.5, 1.2}, 20.0, 5.5};
    MetricField g = hyperbolic_metric(bs.b, 5.0);
    ScalarField lr = ScalarField::generic(g.chart(), [](auto x) { return 1.0 * log(x[0]); });
    for (const auto& c : barrier_samples(g, lr, bs, 30)) {
        EXPECT_NEAR(c.nu_r_over_r, barrier_normal_r(bs, c.r), 1e-10);
        EXPECT_LT(c.nu_r_over_r, 0.0);
    }
}

TEST(Barriers, IdentityConvergesAtFourthOrder) {
    BarrierSpec bs{4, 3, {0.5, 1.0}, 20.0, 0.7};
    FdOptions coarse, fine;
    coarse.h_scale = 80.0;
    fine.h_scale = 40.0;
    double ec = mean_concavity_residual(bs, 50, coarse), ef = mean_concavity_residual(bs, 50, fine);
    EXPECT_GT(ec / ef, std::pow(2.0, 3.5));
}

TEST(Barriers, SamplesAvoidJunction) {
    BarrierSpec bs{5, 3, {0.4, 1.0}, 20.0, 0.0};
    double sh = s_hat(5);
    for (const auto& [y, side] : barrier_parameters(bs, 200)) {
        EXPECT_GE(std::abs(y[0] / bs.sigma - sh), 0.05);
        EXPECT_GE(y[0], 1.05 * bs.sigma - 1e-12);
    }
}

TEST(Barriers, HMInequalityAndReport) {
    for (int N = 3; N <= 5; ++N) {
        BarrierConfig cfg;
        cfg.N = N;
        cfg.n = 3;
        BarrierReport r = verify_barriers(cfg);
        for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
        EXPECT_GT(r.min_margin, 0.0);
        EXPECT_LE(r.r_barrier, cfg.sigma);
        EXPECT_EQ(r.table.rows.size(), 100u);
    }
}
