#include <gtest/gtest.h>

#include <random>

#include "hmlab/curvature.hpp"
#include "hmlab/hypersurface.hpp"

using namespace hmlab;

namespace {

// Smooth positive-definite metric g = A^T A + I with trigonometric entries.
struct RandomMetric {
    int d;
    std::vector<double> amp, freq, phase;

    RandomMetric(int dim, unsigned seed) : d(dim) {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int i = 0; i < d * d * d; ++i) {
            amp.push_back(0.3 * u(rng));
            freq.push_back(u(rng));
            phase.push_back(3.0 * u(rng));
        }
    }

    template <class S, class T>
    void operator()(S x, T g) const {
        using V = typename T::value_type;
        std::vector<V> A(static_cast<std::size_t>(d * d), V(0.0));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) {
                    std::size_t c = static_cast<std::size_t>((i * d + j) * d + k);
                    A[static_cast<std::size_t>(i * d + j)] += amp[c] * sin(freq[c] * x[k] + phase[c]);
                }
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                V s = (i == j) ? V(1.0) : V(0.0);
                for (int k = 0; k < d; ++k)
                    s += A[static_cast<std::size_t>(k * d + i)] * A[static_cast<std::size_t>(k * d + j)];
                g[static_cast<std::size_t>(i * d + j)] = s;
            }
    }
};

CoordinateChart box(int d, double h = 1e-3) {
    std::vector<Axis> ax;
    for (int i = 0; i < d; ++i) ax.push_back(Axis::line("x" + std::to_string(i), -5.0, 5.0, h));
    return CoordinateChart(ax);
}

// r^-2 dr^2 + r^2 sum dtheta^2
MetricField hyperbolic(int n) {
    std::vector<Axis> ax{Axis::radial("r", 0.1)};
    for (int i = 1; i < n; ++i) ax.push_back(Axis::angle("t" + std::to_string(i)));
    return MetricField::generic(CoordinateChart(ax), [n](auto x, auto g) {
        using T = typename decltype(g)::value_type;
        for (auto& e : g) e = T(0.0);
        g[0] = 1.0 / (x[0] * x[0]);
        for (int i = 1; i < n; ++i) g[static_cast<std::size_t>(i * n + i)] = x[0] * x[0];
    });
}

}  // namespace

TEST(Chart, WrapAndDistance) {
    EXPECT_NEAR(wrap_angle(-0.5), kTwoPi - 0.5, 1e-15);
    EXPECT_NEAR(s1_distance(0.1, kTwoPi - 0.1), 0.2, 1e-14);
    CoordinateChart c({Axis::radial("r", 1.0), Axis::angle("t")});
    Point p(2);
    p << 1.0005, 0.3;
    EXPECT_THROW(c.require_interior(p, 2.0), BoundaryProximityError);
    p << 3.0, 0.3;
    EXPECT_NO_THROW(c.require_interior(p, 2.0));
}

TEST(Chart, PeriodicWrapGivesIdenticalCurvature) {
    MetricField g = hyperbolic(3);
    Point p(3), q(3);
    p << 2.0, 0.0, 6.2;
    q << 2.0, kTwoPi, 6.2 - kTwoPi;
    auto a = curvature(g, p), b = curvature(g, q);
    EXPECT_NEAR(a.scalar, b.scalar, 1e-12);
}

TEST(Christoffel, PolarCoordinates) {
    CoordinateChart c({Axis::radial("r", 0.1), Axis::angle("t")});
    MetricField g = MetricField::generic(c, [](auto x, auto out) {
        out[0] = 1.0;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = x[0] * x[0];
    });
    Point p(2);
    p << 1.7, 0.4;
    Tensor3 G = christoffel(g, p);
    EXPECT_NEAR(G(0, 1, 1), -1.7, 1e-9);
    EXPECT_NEAR(G(1, 0, 1), 1.0 / 1.7, 1e-9);
    EXPECT_NEAR(curvature(g, p).riemann.max_abs(), 0.0, 1e-8);
}

TEST(Curvature, RoundSphere) {
    CoordinateChart c({Axis::line("t", 0.1, 3.0), Axis::angle("p")});
    MetricField g = MetricField::generic(c, [](auto x, auto out) {
        out[0] = 1.0;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = sin(x[0]) * sin(x[0]);
    });
    Point p(2);
    p << 1.1, 2.0;
    auto cb = curvature(g, p);
    EXPECT_NEAR(cb.scalar, 2.0, 1e-8);
    double area2 = cb.g(0, 0) * cb.g(1, 1);
    EXPECT_NEAR(cb.riemann(0, 1, 0, 1) / area2, 1.0, 1e-8);
}

TEST(Curvature, HyperbolicIsMinusHalfKulkarniNomizu) {
    for (int n : {2, 3, 4}) {
        MetricField g = hyperbolic(n);
        Point p = Point::Constant(n, 0.7);
        p[0] = 2.3;
        auto cb = curvature(g, p);
        Tensor4 expected = -0.5 * kulkarni_nomizu(cb.g, cb.g);
        EXPECT_LT(norm_g(cb.ginv, cb.riemann - expected), 1e-7) << "n=" << n;
        EXPECT_LT(norm_g(cb.ginv, Eigen::MatrixXd(cb.ricci + (n - 1) * cb.g)), 1e-7);
        EXPECT_NEAR(cb.scalar, -n * (n - 1.0), 1e-7);
    }
}

TEST(Curvature, KulkarniNomizuByHand) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2), B(2, 2);
    B << 2.0, 1.0, 1.0, 3.0;
    Tensor4 k = kulkarni_nomizu(A, B);
    // A00 B11 + A11 B00 - A01 B10 - A10 B01 = 3 + 2
    EXPECT_DOUBLE_EQ(k(0, 1, 0, 1), 5.0);
    EXPECT_DOUBLE_EQ(k(0, 1, 1, 0), -5.0);
    EXPECT_DOUBLE_EQ(k(0, 0, 0, 1), 0.0);
}

TEST(Curvature, RandomMetricSymmetriesAndBianchi) {
    MetricField g = MetricField::generic(box(3), RandomMetric(3, 7));
    Point p(3);
    p << 0.2, -0.4, 0.9;
    auto cb = curvature(g, p);
    EXPECT_LT(riemann_symmetry_residual(cb.riemann), 1e-7);
    EXPECT_LT(contracted_bianchi_residual(g, p), 1e-4);
}

TEST(Curvature, FiniteDifferencesAgreeWithExactJets) {
    MetricField g = MetricField::generic(box(3), RandomMetric(3, 11));
    Point p(3);
    p << -0.3, 0.5, 0.1;
    FdOptions exact;
    exact.source = DerivativeSource::Exact;
    auto a = curvature(g, p), b = curvature(g, p, exact);
    EXPECT_LT(norm_g(b.ginv, a.riemann - b.riemann), 1e-7);
    FdOptions rich;
    rich.richardson = true;
    auto c = curvature(g, p, rich);
    EXPECT_LT(norm_g(b.ginv, c.riemann - b.riemann), 1e-8);
}

TEST(Curvature, ConvergesAtFourthOrder) {
    MetricField g = MetricField::generic(box(3, 1.0), RandomMetric(3, 5));
    Point p(3);
    p << 0.1, 0.2, 0.3;
    FdOptions exact;
    exact.source = DerivativeSource::Exact;
    auto ref = curvature(g, p, exact);
    FdOptions o1, o2;
    o1.h_scale = 0.08;
    o2.h_scale = 0.04;
    double e1 = norm_g(ref.ginv, curvature(g, p, o1).riemann - ref.riemann);
    double e2 = norm_g(ref.ginv, curvature(g, p, o2).riemann - ref.riemann);
    EXPECT_GT(e1 / e2, std::pow(2.0, 3.5));
}

TEST(Hessian, RadialFunctionOnHyperbolicSpace) {
    MetricField g = hyperbolic(3);
    auto r = ScalarField::generic(g.chart(), [](auto x) { return x[0]; });
    Point p(3);
    p << 3.0, 1.0, 2.0;
    Eigen::MatrixXd H = hessian(g, r, p);
    Eigen::MatrixXd G = g.at(p);
    EXPECT_LT(norm_g(G.inverse(), Eigen::MatrixXd(H - 3.0 * G)), 1e-8);
    EXPECT_NEAR(laplacian(g, r, p), 3.0 * 3.0, 1e-7);
    EXPECT_NEAR(gradient_norm_sq(g, r, p), 9.0, 1e-9);
}

TEST(Hypersurface, SphereAndPlaneInFlatSpace) {
    MetricField flat = MetricField::generic(box(3), [](auto, auto g) {
        for (int i = 0; i < 9; ++i) g[static_cast<std::size_t>(i)] = (i % 4 == 0) ? 1.0 : 0.0;
    });
    const double R = 2.0;
    GraphPatch cap = make_graph(flat.chart(), 2, [R](auto y) { return sqrt(R * R - y[0] * y[0] - y[1] * y[1]); });
    Eigen::VectorXd y(2);
    y << 0.3, -0.5;
    SurfacePoint sp = hypersurface_geometry(flat, cap, y);
    EXPECT_NEAR(sp.H, 2.0 / R, 1e-9);
    EXPECT_NEAR((sp.normal - sp.x / R).norm(), 0.0, 1e-12);
    cap.orientation = -1;
    EXPECT_NEAR(hypersurface_geometry(flat, cap, y).H, -2.0 / R, 1e-9);
    GraphPatch plane = make_graph(flat.chart(), 2, [](auto) { return 0.25; });
    EXPECT_NEAR(hypersurface_geometry(flat, plane, y).h.norm(), 0.0, 1e-12);
}

TEST(Errors, SingularMetricIsRejected) {
    MetricField g = MetricField::generic(box(2), [](auto x, auto out) {
        out[0] = x[0] * x[0];
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = 1.0;
    });
    Point p = Point::Zero(2);
    EXPECT_THROW(curvature(g, p), SingularMetricError);
}
