#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "hmlab/curvature.hpp"

namespace hmlab {

// Chart of the remaining coordinates once axis k is removed.
inline CoordinateChart parameter_chart(const CoordinateChart& ambient, int k) {
    std::vector<Axis> axes;
    for (int i = 0; i < ambient.dim(); ++i)
        if (i != k) axes.push_back(ambient.axis(i));
    return CoordinateChart(std::move(axes));
}

// Hypersurface {x_k = f(y)} where y are the other coordinates in order.
// orientation = +1 picks the unit normal with <nu, d/dx_k> > 0.
struct GraphPatch {
    int height_axis = 0;
    ScalarField height;
    int orientation = 1;

    int ambient_dim() const { return height.dim() + 1; }

    Point embed(const Eigen::VectorXd& y) const {
        const int d = ambient_dim();
        Point x(d);
        for (int i = 0, a = 0; i < d; ++i) x[i] = (i == height_axis) ? height(y) : y[a++];
        return x;
    }

    Eigen::VectorXd parameters(const Point& x) const {
        Eigen::VectorXd y(x.size() - 1);
        for (int i = 0, a = 0; i < x.size(); ++i)
            if (i != height_axis) y[a++] = x[i];
        return y;
    }
};

// f(span<const T> y) -> T, with y the parameter coordinates.
template <class F>
GraphPatch make_graph(const CoordinateChart& ambient, int k, F f, int orientation = 1) {
    return GraphPatch{k, ScalarField::generic(parameter_chart(ambient, k), std::move(f)), orientation};
}

struct SurfacePoint {
    Point x;
    Eigen::MatrixXd tangent;      // d x (d-1), columns d_a X
    Eigen::MatrixXd induced;      // g(d_a X, d_b X)
    Eigen::MatrixXd induced_inv;
    Eigen::VectorXd normal;       // unit normal, contravariant
    Eigen::MatrixXd h;            // h(d_a X, d_b X) = <D_a nu, d_b X>
    double H = 0.0;               // trace of h, so a round sphere with outer normal has H > 0
    Eigen::MatrixXd frame;        // d x (d-1), orthonormal tangent vectors
    Eigen::MatrixXd h_frame;      // h in that frame
    Eigen::MatrixXd g, ginv;      // ambient metric at x
    Tensor3 christoffel;          // ambient Christoffel symbols at x
};

inline SurfacePoint hypersurface_geometry(const MetricField& metric, const GraphPatch& s, const Eigen::VectorXd& y,
                                          const FdOptions& opt = {}) {
    const int d = metric.dim();
    const int k = s.height_axis;
    FdOptions fopt = opt;
    if (fopt.source == DerivativeSource::FiniteDifference && s.height.field().has_exact())
        fopt.source = DerivativeSource::Automatic;
    ScalarJet f = scalar_jet(s.height, y, 2, fopt);
    SurfacePoint sp;
    sp.x = s.embed(y);
    MetricJet mj = metric_jet(metric, sp.x, 1, opt);
    sp.g = mj.g;
    sp.ginv = mj.ginv;
    sp.christoffel = christoffel_from(mj);

    sp.tangent = Eigen::MatrixXd::Zero(d, d - 1);
    std::vector<int> amb(static_cast<std::size_t>(d - 1));
    for (int i = 0, a = 0; i < d; ++i)
        if (i != k) amb[static_cast<std::size_t>(a++)] = i;
    for (int a = 0; a < d - 1; ++a) {
        sp.tangent(amb[static_cast<std::size_t>(a)], a) = 1.0;
        sp.tangent(k, a) = f.d[a];
    }
    sp.induced = sp.tangent.transpose() * sp.g * sp.tangent;
    sp.induced_inv = checked_inverse(sp.induced);

    Eigen::VectorXd conormal = Eigen::VectorXd::Zero(d);
    conormal[k] = 1.0;
    for (int a = 0; a < d - 1; ++a) conormal[amb[static_cast<std::size_t>(a)]] = -f.d[a];
    Eigen::VectorXd nu = sp.ginv * conormal;
    nu /= std::sqrt(conormal.dot(nu));
    sp.normal = s.orientation * nu;
    Eigen::VectorXd nu_flat = sp.g * sp.normal;

    sp.h = Eigen::MatrixXd::Zero(d - 1, d - 1);
    for (int a = 0; a < d - 1; ++a)
        for (int b = 0; b < d - 1; ++b) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
            acc[k] = f.dd(a, b);
            for (int m = 0; m < d; ++m)
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        acc[m] += sp.christoffel(m, i, j) * sp.tangent(i, a) * sp.tangent(j, b);
            sp.h(a, b) = -nu_flat.dot(acc);
        }
    sp.H = sp.induced_inv.cwiseProduct(sp.h).sum();
    Eigen::MatrixXd C = orthonormal_frame(sp.induced);
    sp.frame = sp.tangent * C;
    sp.h_frame = C.transpose() * sp.h * C;
    return sp;
}

// Induced metric on the parameter chart of a graph patch.
inline MetricField induced_metric(const MetricField& metric, const GraphPatch& s) {
    const int d = metric.dim();
    const int k = s.height_axis;
    return MetricField::from_values(parameter_chart(metric.chart(), k), [metric, s, d, k](const Point& y) {
        FdOptions fo;
        fo.source = DerivativeSource::Automatic;
        ScalarJet f = scalar_jet(s.height, y, 1, fo);
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d, d - 1);
        for (int i = 0, a = 0; i < d; ++i)
            if (i != k) {
                T(i, a) = 1.0;
                T(k, a) = f.d[a];
                ++a;
            }
        return Eigen::MatrixXd(T.transpose() * metric.at(s.embed(y)) * T);
    });
}

// Pull an ambient scalar back to the parameter chart of a graph patch.
inline ScalarField restrict_to(const ScalarField& f, const GraphPatch& s) {
    return ScalarField::from_values(s.height.chart(), [f, s](const Point& y) { return f(s.embed(y)); });
}

}  // namespace hmlab
