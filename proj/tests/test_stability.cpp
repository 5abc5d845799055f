#include <gtest/gtest.h>

#include <cmath>

#include "hmlab/stability.hpp"

using namespace hmlab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd o(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double x : v) o[i++] = x;
    return o;
}

StationarySurface hm_slice(int N, int n) { return hm_slice_surface(HMModel(HMParams(N, n)), 0.4); }

// sqrt(g_tt) for the sliced coordinate, which is <d_tau, nu> on the slice.
ScalarField killing_normal(const StationarySurface& s) {
    const int k = s.patch.height_axis;
    MetricField g = s.amb.metric;
    GraphPatch p = s.patch;
    return ScalarField::from_values(s.parameter_chart(), [g, p, k](const Point& y) { return std::sqrt(g.at(p.embed(y))(k, k)); });
}

}  // namespace

TEST(Stability, LieDataFlatMatchesCoordinates) {
    MetricField g = euclidean_metric(3);
    TestVectorSpec spec;
    spec.seed = 7;
    VectorField V = test_vector_field(g.chart(), spec);
    Point x = vec({0.3, -0.2, 0.5});
    FdOptions ex;
    ex.source = DerivativeSource::Automatic;
    FieldJet j = V.field().jet(x, 2, ex);
    LieData ld = lie_data(metric_jet(g, x, 2, verification_fd()), j);
    EXPECT_LT((ld.L - (j.d + j.d.transpose())).norm(), 1e-12);
    // L_V L_V g = V(L) + L dV + dV^T L with constant metric
    Eigen::MatrixXd VL = Eigen::MatrixXd::Zero(3, 3);
    for (int m = 0; m < 3; ++m)
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                VL(i, k) += j.v[m] * (j.dd[static_cast<std::size_t>(k)](i, m) + j.dd[static_cast<std::size_t>(i)](k, m));
    Eigen::MatrixXd LL = VL + ld.L * j.d + j.d.transpose() * ld.L;
    EXPECT_LT((ld.LL - LL).norm(), 1e-12);
}

TEST(Stability, KillingFieldsHaveNoLieDerivative) {
    MetricField g = euclidean_metric(3);
    VectorField rot = VectorField::generic(g.chart(), [](auto x, auto out) {
        out[0] = -x[1];
        out[1] = x[0];
        out[2] = 0.0 * x[2];
    });
    FdOptions ex;
    ex.source = DerivativeSource::Automatic;
    Point x = vec({0.4, 0.1, -0.3});
    LieData ld = lie_data(metric_jet(g, x, 2), rot.field().jet(x, 2, ex));
    EXPECT_LT(ld.L.norm(), 1e-14);
    EXPECT_LT(ld.LL.norm(), 1e-14);

    HMModel m(HMParams(4, 3));
    VectorField dt = VectorField::generic(m.chart(), [](auto x, auto out) {
        out[0] = 0.0 * x[0];
        out[1] = 0.0 * x[0] + 1.0;
        out[2] = 0.0 * x[0];
    });
    Point p = vec({1.4, 0.2, 0.3});
    LieData lh = lie_data(metric_jet(m.metric(), p, 2, verification_fd()), dt.field().jet(p, 2, ex));
    EXPECT_LT(lh.L.norm(), 1e-12);
    EXPECT_LT(lh.LL.norm(), 1e-10);
}

TEST(Stability, JacobiOperatorOnPlaneIsLaplacian) {
    const double a = 0.3, b = -0.2;
    StationarySurface s = plane_surface(a, b, 0.1);
    ScalarField v = ScalarField::generic(s.parameter_chart(), [](auto y) { return sin(y[0]) * y[1] * y[1]; });
    Eigen::Matrix2d gam;
    gam << 1 + a * a, a * b, a * b, 1 + b * b;
    Eigen::Matrix2d gi = gam.inverse();
    for (auto y : {vec({0.2, 0.7}), vec({-0.5, 0.3})}) {
        Eigen::Matrix2d H;
        H << -std::sin(y[0]) * y[1] * y[1], 2 * std::cos(y[0]) * y[1], 2 * std::cos(y[0]) * y[1], 2 * std::sin(y[0]);
        double expected = -(gi.cwiseProduct(H)).sum();
        EXPECT_NEAR(weighted_jacobi(s, v, y), expected, 1e-9);
    }
}

TEST(Stability, JacobiOperatorOnSpheres) {
    const double R = 1.5;
    StationarySurface plain = sphere_surface(R, false);
    StationarySurface weighted = sphere_surface(R, true);
    ScalarField one = ScalarField::generic(plain.parameter_chart(), [](auto y) { return 0.0 * y[0] + 1.0; });
    Eigen::VectorXd y = vec({0.3, -0.4});
    EXPECT_NEAR(weighted_jacobi(plain, one, y), -2.0 / (R * R), 1e-9);
    // dilations preserve the weighted area for rho = |x|^-2 in three dimensions
    EXPECT_NEAR(weighted_jacobi(weighted, one, y), 0.0, 1e-9);
    EXPECT_NEAR(stationarity_defect(weighted, y, verification_fd()), 0.0, 1e-9);
    EXPECT_GT(std::abs(stationarity_defect(plain, y, verification_fd())), 1.0);
}

TEST(Stability, SliceKillingNormalIsJacobiField) {
    for (auto [N, n] : {std::pair{4, 3}, std::pair{5, 4}, std::pair{3, 3}}) {
        StationarySurface s = hm_slice(N, n);
        ScalarField v = killing_normal(s);
        Eigen::VectorXd y = Eigen::VectorXd::Constant(n - 1, 0.3);
        y[0] = 1.6;
        EXPECT_NEAR(stationarity_defect(s, y, verification_fd()), 0.0, 1e-9) << N << n;
        double scale = std::abs(s.amb.rho(s.patch.embed(y))) * v(y);
        EXPECT_LT(std::abs(weighted_jacobi(s, v, y)), 1e-8 * scale) << N << n;
    }
}

TEST(Stability, JacobiFormulaWithRandomFields) {
    struct Case {
        StationarySurface s;
        std::vector<Eigen::VectorXd> ys;
    };
    std::vector<Case> cases{{plane_surface(), {vec({0.1, 0.2}), vec({-0.3, 0.5})}},
                            {sphere_surface(1.5, true), {vec({0.3, -0.4}), vec({-0.6, 0.2})}},
                            {hm_slice(4, 3), {vec({1.5, 0.3}), vec({2.5, -1.0})}},
                            {hm_slice(5, 4), {vec({1.8, 0.3, 0.2})}}};
    for (std::size_t c = 0; c < cases.size(); ++c) {
        TestVectorSpec spec;
        spec.seed = 11 + static_cast<unsigned>(c);
        spec.scale = 0.5;
        spec.center = cases[c].s.patch.embed(cases[c].ys[0]);
        VectorField V = test_vector_field(cases[c].s.amb.metric.chart(), spec);
        for (const auto& js : verify_jacobi_formula(cases[c].s, V, cases[c].ys)) {
            double tol = 1e-7 * std::max(1.0, std::abs(js.rhs));
            EXPECT_NEAR(js.lhs, js.rhs, tol) << "case " << c;
        }
    }
}

TEST(Stability, JacobiFormulaRefusesNonStationary) {
    StationarySurface s = sphere_surface(1.5, false);
    TestVectorSpec spec;
    VectorField V = test_vector_field(s.amb.metric.chart(), spec);
    EXPECT_THROW(verify_jacobi_formula(s, V, {vec({0.1, 0.1})}), DomainError);
}

TEST(Stability, JacobiResidualShrinksUnderRefinement) {
    StationarySurface s = hm_slice(4, 3);
    TestVectorSpec spec;
    spec.seed = 5;
    spec.scale = 0.5;
    VectorField V = test_vector_field(s.amb.metric.chart(), spec);
    Eigen::VectorXd y = vec({1.5, 0.3});
    auto residual = [&](double h) {
        FdOptions o;
        o.h_scale = h;
        auto js = verify_jacobi_formula(s, V, {y}, o)[0];
        return std::abs(js.lhs - js.rhs);
    };
    double coarse = residual(40.0), fine = residual(20.0);
    EXPECT_GT(coarse / fine, 8.0) << coarse << " " << fine;
}

TEST(Stability, SecondVariationPointwise) {
    struct Case {
        StationarySurface s;
        Eigen::VectorXd y;
    };
    std::vector<Case> cases{{plane_surface(), vec({0.1, 0.2})},
                            {sphere_surface(1.5, true), vec({0.3, -0.4})},
                            {hm_slice(4, 3), vec({1.5, 0.3})}};
    for (std::size_t c = 0; c < cases.size(); ++c) {
        TestVectorSpec spec;
        spec.seed = 21 + static_cast<unsigned>(c);
        spec.scale = 0.5;
        spec.center = cases[c].s.patch.embed(cases[c].y);
        VectorField V = test_vector_field(cases[c].s.amb.metric.chart(), spec);
        auto sv = verify_second_variation(cases[c].s, V, {cases[c].y})[0];
        EXPECT_NEAR(sv.lhs, sv.rhs, 1e-6 * std::max(1.0, std::abs(sv.rhs))) << "case " << c;
    }
}

TEST(Stability, FlowOracleMatchesIntegratedIdentity) {
    // plane with a normal bump: second variation = integral of |grad beta|^2
    StationarySurface plane = plane_surface(0.0, 0.0, 0.0);
    VectorField nb = VectorField::generic(plane.amb.metric.chart(), [](auto x, auto out) {
        out[0] = 0.0 * x[0];
        out[1] = 0.0 * x[0];
        out[2] = bump(x[0]) * bump(x[1]);
    });
    Eigen::VectorXd lo = vec({-1.0, -1.0}), hi = vec({1.0, 1.0});
    FlowOracleResult pr = second_variation_flow_oracle(plane, nb, lo, hi);
    // |grad beta|^2 integrates to 2 * int b'^2 * int b^2 for the product bump
    double ib2 = integrate([](double t) { return bump(t) * bump(t); }, -1.0, 1.0, 16);
    double idb2 = integrate([](double t) { double q = 1 - t * t; double d = -12.0 * t * std::pow(q, 5); return d * d; }, -1.0, 1.0, 16);
    EXPECT_NEAR(pr.quadratic_integral, 2.0 * ib2 * idb2, 1e-8);
    EXPECT_NEAR(pr.flow, pr.quadratic_integral, 1e-3 * pr.quadratic_integral);
    EXPECT_NEAR(pr.rhs_integral, pr.quadratic_integral, 1e-6 * pr.quadratic_integral);

    StationarySurface sph = sphere_surface(1.5, true);
    TestVectorSpec spec;
    spec.seed = 3;
    spec.scale = 0.5;
    spec.bump_axes = {0, 1};
    spec.bump_center = vec({0.0, 0.0});
    spec.bump_half_width = vec({0.6, 0.6});
    VectorField V = test_vector_field(sph.amb.metric.chart(), spec);
    FlowOracleResult sr = second_variation_flow_oracle(sph, V, vec({-0.6, -0.6}), vec({0.6, 0.6}));
    double scale = std::max(std::abs(sr.rhs_integral), 1e-3);
    EXPECT_NEAR(sr.flow, sr.rhs_integral, 1e-3 * scale);
    EXPECT_NEAR(sr.quadratic_integral, sr.rhs_integral, 1e-3 * scale);
}

TEST(Stability, JacobiOperatorIsSymmetric) {
    StationarySurface s = sphere_surface(1.5, true);
    const CoordinateChart& pc = s.parameter_chart();
    ScalarField u = ScalarField::generic(pc, [](auto y) { return bump(y[0] / 0.6) * bump(y[1] / 0.6) * (1.0 + y[0]); });
    ScalarField v = ScalarField::generic(pc, [](auto y) { return bump(y[0] / 0.6) * bump(y[1] / 0.6) * cos(y[1]) * y[0]; });
    auto [diff, scale] = self_adjointness_defect(s, u, v, vec({-0.6, -0.6}), vec({0.6, 0.6}), 1);
    EXPECT_GT(scale, 1e-3);
    EXPECT_LT(std::abs(diff), 1e-6 * scale);
}

TEST(Stability, SlicingIdentity) {
    for (auto [N, n] : {std::pair{4, 3}, std::pair{5, 3}, std::pair{5, 4}, std::pair{3, 3}, std::pair{4, 4}}) {
        StationarySurface s = hm_slice(N, n);
        ScalarField kn = killing_normal(s);
        // any positive function works; use a deformation of the Killing normal
        ScalarField vc = ScalarField::from_values(s.parameter_chart(), [kn](const Point& y) {
            return kn(y) * std::exp(0.3 * std::sin(y[1]) + 0.1 * y[0]);
        });
        Eigen::VectorXd y = Eigen::VectorXd::Constant(n - 1, 0.25);
        y[0] = 1.7;
        SlicingSample ss = slicing_identity_at(s, vc, 1.3, N - n, y);
        EXPECT_NEAR(ss.lhs, ss.rhs, 1e-7 * std::max(1.0, std::abs(ss.rhs))) << N << n;
        if (N > n) {
            EXPECT_NEAR(ss.gradient_lhs, ss.gradient_rhs, 1e-8 * std::max(1.0, ss.gradient_rhs)) << N << n;
            EXPECT_GE(ss.gradient_rhs, 0.0);
        }
    }
}

TEST(Stability, ReportPasses) {
    StabilityConfig cfg;
    cfg.points = 10;
    StabilityReport rep = verify_stability(cfg);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " = " << c.value << " vs " << c.threshold;
    EXPECT_EQ(rep.table.rows.size(), 16u);
}
