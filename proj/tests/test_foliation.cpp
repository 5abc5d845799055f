#include <gtest/gtest.h>

#include <cstdlib>

#include "hmlab/foliation.hpp"

using namespace hmlab;

namespace {

Point boundary_point(int d, double shift = 0.0) {
    Point q = Point::Zero(d);
    for (int k = 1; k < d; ++k) q[k] = 0.4 + 1.1 * k + shift;
    return q;
}

Eigen::VectorXd tilted(int d) {
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(d);
    xi[0] = -0.25;
    for (int k = 1; k < d; ++k) xi[k] = k % 2 ? 0.3 : -0.2;
    return xi;
}

CompactifiedMetric perturbed(int N, std::vector<double> b, double amp = 0.5) {
    Perturbation p;
    p.N = N;
    p.amplitude = amp;
    return perturb(flat_compactified(std::move(b)), p);
}

}  // namespace

TEST(Foliation, CompactifyMatchesExplicitHM) {
    HMParams hp(5, 4);
    hp.periodic_flat = true;
    HMModel hm(hp);
    CompactifiedMetric generic = compactify(hm.metric(), "HM via r");
    CompactifiedMetric direct = hm_compactified(hm);
    for (double z : {0.02, 0.1, 0.4}) {
        Point p(4);
        p << z, 1.3, 2.2, 4.1;
        FieldJet a = generic.tilde().field().exact_jet(p);
        FieldJet b = direct.tilde().field().exact_jet(p);
        EXPECT_LT((a.v - b.v).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((a.d - b.d).cwiseAbs().maxCoeff(), 1e-10);
        for (std::size_t c = 0; c < a.dd.size(); ++c) EXPECT_LT((a.dd[c] - b.dd[c]).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Foliation, HyperbolicCompactifiesToFlat) {
    std::vector<double> b{0.5, 1.0, 2.0};
    CompactifiedMetric via_r = compactify(hyperbolic_metric(b, 0.5), "hyperbolic via r");
    CompactifiedMetric flat = flat_compactified(b);
    Point p(4);
    p << 0.3, 0.1, 5.0, 2.5;
    EXPECT_LT((via_r.tilde().field().value(p) - flat.tilde().field().value(p)).cwiseAbs().maxCoeff(), 1e-14);
    // physical metric is z^-2 gt
    EXPECT_LT((flat.physical().field().value(p) * 0.09 - flat.tilde().field().value(p)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Foliation, HMBoundaryExpansionIsOrderN) {
    // gt = dz^2 + gamma + O(z^N): halving z divides the remainder by about 2^N
    for (int N : {3, 5}) {
        HMParams hp(N, 3);
        hp.periodic_flat = true;
        CompactifiedMetric hm = hm_compactified(HMModel(hp));
        Point p0(3), p1(3), p2(3);
        p0 << 0.0, 1.0, 2.0;
        p1 << 0.1, 1.0, 2.0;
        p2 << 0.05, 1.0, 2.0;
        Eigen::VectorXd g0 = hm.tilde().field().value(p0);
        EXPECT_NEAR(g0[4], 4.0 / (N * N), 1e-15);
        EXPECT_NEAR(g0[8], 1.0, 1e-15);
        double r1 = (hm.tilde().field().value(p1) - g0).norm();
        double r2 = (hm.tilde().field().value(p2) - g0).norm();
        EXPECT_NEAR(std::log2(r1 / r2), N, 0.05);
    }
}

TEST(Foliation, HyperbolicStraightLinesAndCircles) {
    std::vector<double> b{0.5, 1.0};
    CompactifiedMetric hyp = flat_compactified(b);
    Point q = boundary_point(3);
    auto s = uniform_nodes(0.3, 61);
    auto line = integrate_boundary_geodesic(hyp, q, Eigen::VectorXd::Zero(3), s);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(line.offset[i][0], s[i], 1e-15);
        EXPECT_EQ(line.offset[i][1], 0.0);
        EXPECT_EQ(line.offset[i][2], 0.0);
        EXPECT_EQ(line.zeta[i].norm(), 0.0);
    }
    auto arc = integrate_boundary_geodesic(hyp, q, tilted(3), s);
    EXPECT_LT(semicircle_defect(arc, b), 1e-9);
    EXPECT_GT(arc.offset.back().tail(2).norm(), 1e-3);
}

TEST(Foliation, TwoIntegratorsAgree) {
    for (int n : {3, 4}) {
        std::vector<double> b(static_cast<std::size_t>(n - 1), 1.0);
        b[0] = 0.5;
        CompactifiedMetric m = perturbed(n + 1, b);
        auto eq = integrator_equivalence(m, boundary_point(n), tilted(n), 0.3, 151);
        EXPECT_GT(eq.s_handoff, 0.0);
        EXPECT_LT(eq.position_gap, 1e-7);
        EXPECT_LT(eq.zeta_gap, 1e-6);
        EXPECT_LT(pregeodesic_reparam_residual(m, eq.direct), 1e-6);
    }
}

TEST(Foliation, InteriorStartNeedsNoHandoff) {
    CompactifiedMetric m = perturbed(4, {0.5, 1.0});
    Point q = boundary_point(3);
    q[0] = 0.05;
    auto eq = integrator_equivalence(m, q, tilted(3), 0.2, 101);
    EXPECT_EQ(eq.s_handoff, 0.0);
    EXPECT_LT(eq.position_gap, 1e-7);
}

TEST(Foliation, ReparametrisationCheckHasTeeth) {
    // a pregeodesic of the perturbed metric is not one of the hyperbolic metric
    CompactifiedMetric hyp = flat_compactified({0.5, 1.0});
    CompactifiedMetric m = perturbed(3, {0.5, 1.0}, 40.0);
    Point a0(3);
    a0 << 0.05, 1.0, 2.0;
    Eigen::VectorXd v0(3);
    v0 << 1.0, 0.3, -0.2;
    auto tr = integrate_pregeodesic(m, a0, v0, uniform_nodes(0.2, 101));
    EXPECT_LT(pregeodesic_reparam_residual(m, tr), 1e-6);
    EXPECT_GT(pregeodesic_reparam_residual(hyp, tr), 1e-3);
}

TEST(Foliation, RK4ConvergesAtFourthOrder) {
    CompactifiedMetric m = perturbed(3, {0.5, 1.0}, 5.0);
    Point q = boundary_point(3);
    auto s = uniform_nodes(0.3, 4);
    auto run = [&](double h) {
        IntegratorOptions o;
        o.h_max = h;
        return integrate_boundary_geodesic(m, q, tilted(3), s, o);
    };
    auto ref = run(1e-4);
    double e1 = (run(1e-2).offset.back() - ref.offset.back()).norm();
    double e2 = (run(5e-3).offset.back() - ref.offset.back()).norm();
    EXPECT_GT(e1 / e2, 12.0);
    EXPECT_LT(e1 / e2, 20.0);
}

TEST(Foliation, SingularCoefficientRejected) {
    CompactifiedMetric hyp = flat_compactified({0.5, 1.0});
    Perturbation p;
    p.N = 1;
    p.amplitude = 0.3;
    EXPECT_THROW(integrate_boundary_geodesic(perturb(hyp, p), boundary_point(3), Eigen::VectorXd::Zero(3), uniform_nodes(0.1, 5)),
                 DomainError);
    // z^2 leaves D~^2 z of order z: the quotient is finite and accepted
    p.N = 2;
    EXPECT_NO_THROW(integrate_boundary_geodesic(perturb(hyp, p), boundary_point(3), Eigen::VectorXd::Zero(3), uniform_nodes(0.1, 5)));
    EXPECT_LT(boundary_defect(perturb(hyp, p), boundary_point(3), 1e-5), 1e-9);
}

TEST(Foliation, RejectsInvalidStart) {
    CompactifiedMetric hyp = flat_compactified({0.5, 1.0});
    Eigen::VectorXd big = Eigen::VectorXd::Zero(3);
    big[0] = 1.5;
    EXPECT_THROW(integrate_boundary_geodesic(hyp, boundary_point(3), big, uniform_nodes(0.1, 5)), DomainError);
    Point far = boundary_point(3);
    far[0] = 0.9;
    EXPECT_THROW(integrate_boundary_geodesic(hyp, far, Eigen::VectorXd::Zero(3), uniform_nodes(0.1, 5)), DomainError);
}

TEST(Foliation, ContinuityUpToBoundary) {
    CompactifiedMetric m = perturbed(4, {0.5, 1.0});
    Eigen::VectorXd dir(3);
    dir << 0.0, 0.6, 0.8;
    auto s = uniform_nodes(0.2, 41);
    double l1 = boundary_lipschitz_ratio(m, boundary_point(3), dir, 1e-3, s);
    double l2 = boundary_lipschitz_ratio(m, boundary_point(3), dir, 2.5e-4, s);
    EXPECT_LT(l1, 1.5);
    EXPECT_NEAR(l1 / l2, 1.0, 1e-3);
}

TEST(Foliation, VerticalLeavesOnModels) {
    FoliationOptions o;
    o.base_count = 4;
    o.t_count = 8;
    auto hyp = build_foliation(flat_compactified({0.5, 1.0}), o);
    EXPECT_TRUE(hyp.vertical);
    EXPECT_EQ(hyp.retries, 0);
    HMParams hp(4, 4);
    hp.periodic_flat = true;
    auto hm = build_foliation(hm_compactified(HMModel(hp)), o);
    EXPECT_TRUE(hm.vertical);
    EXPECT_NEAR(hm.min_separation, kTwoPi / 8, 1e-15);
}

TEST(Foliation, PerturbedLeavesDecay) {
    // The sideways drift is driven by gt^{z theta} ~ z^N, so G_t - t ~ z^{N+1}.
    for (int N : {3, 5}) {
        FoliationOptions o;
        auto a = build_foliation(perturbed(N, {2.0 / N, 1.0}), o);
        EXPECT_FALSE(a.vertical);
        EXPECT_GE(a.decay.exponent, N - 0.2);
        EXPECT_NEAR(a.decay.exponent, N + 1.0, 0.1);
        EXPECT_GT(a.min_separation, 0.0);
        EXPECT_LT(a.boundary_slope, 1e-6);
        EXPECT_EQ(a.t.size(), 16u);
    }
}

TEST(Foliation, GraphFailureShrinksHeight) {
    Perturbation p;
    p.N = 3;
    p.amplitude = 150.0;
    p.zz_weight = 0.0;
    p.frequency = 3;
    CompactifiedMetric m = perturb(flat_compactified({1.0, 0.1}), p);
    FoliationOptions o;
    o.z_count = 5;
    auto a = build_foliation(m, o);
    EXPECT_EQ(a.retries, 1);
    EXPECT_DOUBLE_EQ(a.z_fol, 0.05);
    EXPECT_GT(a.min_separation, 0.0);
    o.max_retries = 0;
    EXPECT_THROW(build_foliation(m, o), ConvergenceError);
}

TEST(Foliation, HeightResamplingMatchesHeightIntegration) {
    CompactifiedMetric m = perturbed(4, {0.5, 1.0});
    Point q = boundary_point(3);
    std::vector<double> zs{0.03, 0.05, 0.08};
    auto by_s = integrate_boundary_geodesic(m, q, Eigen::VectorXd::Zero(3), uniform_nodes(0.1, 401));
    auto by_z = integrate_by_height(m, q, Eigen::VectorXd::Zero(3), zs);
    auto res = resample_by_height(by_s, 2, zs);
    for (std::size_t i = 0; i < zs.size(); ++i) EXPECT_NEAR(res[i] / by_z.offset[i][2], 1.0, 1e-4);
}

TEST(Foliation, AtlasIndependentOfThreadCount) {
    CompactifiedMetric m = perturbed(4, {0.5, 1.0});
    FoliationOptions o;
    o.base_count = 4;
    o.t_count = 8;
    setenv("HMLAB_THREADS", "1", 1);
    auto a = build_foliation(m, o);
    setenv("HMLAB_THREADS", "3", 1);
    auto b = build_foliation(m, o);
    unsetenv("HMLAB_THREADS");
    EXPECT_EQ(a.deviation, b.deviation);
}

TEST(Foliation, HessianOfR) {
    std::vector<double> b{0.5, 1.0};
    std::vector<Point> samples;
    for (double r : {2.0, 20.0, 200.0}) {
        Point p(3);
        p << r, 1.0, 2.0;
        samples.push_back(p);
    }
    auto hyp = hessian_r_positivity(hyperbolic_metric(b, 0.5), samples);
    for (const auto& s : hyp.samples) EXPECT_NEAR(s.min_eigenvalue, s.r, 1e-9 * s.r);
    EXPECT_DOUBLE_EQ(hyp.r_fol, 2.0);

    HMParams hp(4, 3);
    auto hm = hessian_r_positivity(HMModel(hp).metric(), samples);
    EXPECT_TRUE(hm.all_positive);
    EXPECT_LT(std::abs(hm.samples.back().min_eigenvalue / 200.0 - 1.0), 1e-8);

    // d/dr (r^2 (1 + A psi)) < 0 somewhere inside the bump
    std::vector<Point> dense;
    for (int i = 0; i <= 60; ++i) {
        Point p(3);
        p << 1.5 + 0.05 * i, 1.0, 2.0;
        dense.push_back(p);
    }
    auto bent = hessian_r_positivity(bent_hyperbolic_metric(b, 0.9, 3.0, 1.0), dense);
    EXPECT_FALSE(bent.all_positive);
    EXPECT_GT(bent.r_fol, 3.0);
    EXPECT_LE(bent.r_fol, 4.0);
    auto mild = hessian_r_positivity(bent_hyperbolic_metric(b, 0.05, 3.0, 1.0), dense);
    EXPECT_TRUE(mild.all_positive);
}

TEST(Foliation, ReportPasses) {
    FoliationReport rep = verify_foliation(FoliationConfig{});
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
    EXPECT_EQ(rep.atlases.size(), 3u);
    EXPECT_FALSE(rep.trajectories.rows.empty());
}
