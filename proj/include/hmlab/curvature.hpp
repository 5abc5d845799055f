#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hmlab/fields.hpp"
#include "hmlab/tensor.hpp"

namespace hmlab {

// Metric with first (and optionally second) partial derivatives at a point.
// dg[k](i,j) = d_k g_ij, ddg[k*d+l](i,j) = d_k d_l g_ij.
struct MetricJet {
    int d = 0;
    Eigen::MatrixXd g, ginv;
    std::vector<Eigen::MatrixXd> dg;
    std::vector<Eigen::MatrixXd> ddg;
};

inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || lo < 1e-14 * hi) throw SingularMetricError("metric is singular or not positive definite");
    return g.inverse();
}

inline MetricJet metric_jet(const MetricField& metric, const Point& p, int order, const FdOptions& opt = {}) {
    const int d = metric.dim();
    FieldJet fj = metric.field().jet(p, order, opt);
    MetricJet m;
    m.d = d;
    m.g = Eigen::Map<const Eigen::MatrixXd>(fj.v.data(), d, d).transpose();
    m.g = 0.5 * (m.g + m.g.transpose()).eval();
    m.ginv = checked_inverse(m.g);
    m.dg.assign(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m.dg[static_cast<std::size_t>(k)](i, j) = fj.d(i * d + j, k);
    if (order >= 2) {
        m.ddg.assign(static_cast<std::size_t>(d * d), Eigen::MatrixXd::Zero(d, d));
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        m.ddg[static_cast<std::size_t>(k * d + l)](i, j) =
                            fj.dd[static_cast<std::size_t>(i * d + j)](k, l);
    }
    return m;
}

// Gamma(k, i, j) = Gamma^k_ij
inline Tensor3 christoffel_from(const MetricJet& m) {
    const int d = m.d;
    Tensor3 lower(d);  // Gamma_{l,ij}
    for (int l = 0; l < d; ++l)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                lower(l, i, j) = 0.5 * (m.dg[static_cast<std::size_t>(i)](j, l) +
                                        m.dg[static_cast<std::size_t>(j)](i, l) -
                                        m.dg[static_cast<std::size_t>(l)](i, j));
    Tensor3 G(d);
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int l = 0; l < d; ++l) s += m.ginv(k, l) * lower(l, i, j);
                G(k, i, j) = s;
            }
    return G;
}

inline Tensor3 christoffel(const MetricField& metric, const Point& p, const FdOptions& opt = {}) {
    return christoffel_from(metric_jet(metric, p, 1, opt));
}

struct CurvatureBundle {
    Point p;
    Eigen::MatrixXd g, ginv;
    Tensor3 christoffel;
    Tensor4 riemann;  // R(e_i,e_j,e_k,e_l); sectional curvature K = R(X,Y,X,Y)/|X^Y|^2
    Eigen::MatrixXd ricci;
    double scalar = 0.0;
};

inline CurvatureBundle curvature_from(const MetricJet& m) {
    const int d = m.d;
    CurvatureBundle c;
    c.g = m.g;
    c.ginv = m.ginv;
    c.christoffel = christoffel_from(m);
    const Tensor3& G = c.christoffel;
    auto dd = [&](int a, int b, int i, int j) { return m.ddg[static_cast<std::size_t>(a * d + b)](i, j); };
    // Gamma lowered on the first index: Gl(m, j, k) = g_mn Gamma^n_jk
    Tensor3 Gl(d);
    for (int a = 0; a < d; ++a)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                double s = 0.0;
                for (int n = 0; n < d; ++n) s += m.g(a, n) * G(n, j, k);
                Gl(a, j, k) = s;
            }
    c.riemann = Tensor4(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    double s = 0.5 * (dd(j, k, i, l) + dd(i, l, j, k) - dd(i, k, j, l) - dd(j, l, i, k));
                    for (int a = 0; a < d; ++a) s += Gl(a, j, k) * G(a, i, l) - Gl(a, i, k) * G(a, j, l);
                    c.riemann(i, j, k, l) = s;
                }
    c.ricci = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < d; ++j)
        for (int l = 0; l < d; ++l) {
            double s = 0.0;
            for (int i = 0; i < d; ++i)
                for (int k = 0; k < d; ++k) s += m.ginv(i, k) * c.riemann(i, j, k, l);
            c.ricci(j, l) = s;
        }
    c.scalar = (m.ginv.cwiseProduct(c.ricci)).sum();
    return c;
}

inline CurvatureBundle curvature(const MetricField& metric, const Point& p, const FdOptions& opt = {}) {
    CurvatureBundle c = curvature_from(metric_jet(metric, p, 2, opt));
    c.p = p;
    return c;
}

// Largest violation of the algebraic symmetries and the first Bianchi identity,
// relative to max |R|.
inline double riemann_symmetry_residual(const Tensor4& R) {
    const int d = R.dim();
    double scale = std::max(R.max_abs(), 1e-300);
    double worst = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    double r = R(i, j, k, l);
                    worst = std::max({worst, std::abs(r + R(j, i, k, l)), std::abs(r + R(i, j, l, k)),
                                      std::abs(r - R(k, l, i, j)),
                                      std::abs(r + R(j, k, i, l) + R(k, i, j, l))});
                }
    return worst / scale;
}

struct ScalarJet {
    double v = 0.0;
    Eigen::VectorXd d;
    Eigen::MatrixXd dd;
};

inline ScalarJet scalar_jet(const ScalarField& f, const Point& p, int order, const FdOptions& opt = {}) {
    FieldJet j = f.field().jet(p, order, opt);
    ScalarJet s;
    s.v = j.v[0];
    s.d = j.d.row(0).transpose();
    if (order >= 2) s.dd = 0.5 * (j.dd[0] + j.dd[0].transpose());
    return s;
}

inline Eigen::MatrixXd hessian_from(const Tensor3& G, const ScalarJet& f) {
    const int d = static_cast<int>(f.d.size());
    Eigen::MatrixXd H = f.dd;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) H(i, j) -= G(k, i, j) * f.d[k];
    return H;
}

inline Eigen::MatrixXd hessian(const MetricField& metric, const ScalarField& f, const Point& p,
                               const FdOptions& opt = {}) {
    return hessian_from(christoffel(metric, p, opt), scalar_jet(f, p, 2, opt));
}

inline double laplacian(const MetricField& metric, const ScalarField& f, const Point& p,
                        const FdOptions& opt = {}) {
    MetricJet m = metric_jet(metric, p, 1, opt);
    Eigen::MatrixXd H = hessian_from(christoffel_from(m), scalar_jet(f, p, 2, opt));
    return m.ginv.cwiseProduct(H).sum();
}

inline double gradient_norm_sq(const MetricField& metric, const ScalarField& f, const Point& p,
                               const FdOptions& opt = {}) {
    Eigen::VectorXd df = scalar_jet(f, p, 1, opt).d;
    return df.dot(checked_inverse(metric.at(p)) * df);
}

// Contravariant gradient g^{ij} d_j f.
inline Eigen::VectorXd gradient(const MetricField& metric, const ScalarField& f, const Point& p,
                                const FdOptions& opt = {}) {
    Eigen::VectorXd df = scalar_jet(f, p, 1, opt).d;
    return checked_inverse(metric.at(p)) * df;
}

// |div Ric - dR/2|_g at p. Ricci and R are sampled on an outer stencil whose
// step is outer_scale times the chart step; inner curvature uses opt.
inline double contracted_bianchi_residual(const MetricField& metric, const Point& p, double outer_scale = 10.0,
                                          const FdOptions& opt = {}) {
    const int d = metric.dim();
    metric.chart().require_interior(p, 2.0 * outer_scale + 2.0, opt.h_scale);
    CurvatureBundle c0 = curvature(metric, p, opt);
    std::vector<Eigen::MatrixXd> dRic(static_cast<std::size_t>(d));
    Eigen::VectorXd dR(d);
    static constexpr int off[4] = {-2, -1, 1, 2};
    static constexpr double w[4] = {1.0, -8.0, 8.0, -1.0};
    for (int k = 0; k < d; ++k) {
        double h = metric.chart().step(k, p, outer_scale * opt.h_scale);
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
        double accR = 0.0;
        for (int s = 0; s < 4; ++s) {
            Point q = p;
            q[k] += off[s] * h;
            CurvatureBundle c = curvature(metric, q, opt);
            acc += w[s] * c.ricci;
            accR += w[s] * c.scalar;
        }
        dRic[static_cast<std::size_t>(k)] = acc / (12.0 * h);
        dR[k] = accR / (12.0 * h);
    }
    const Tensor3& G = c0.christoffel;
    Eigen::VectorXd res(d);
    for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) {
                double cov = dRic[static_cast<std::size_t>(k)](i, j);
                for (int m = 0; m < d; ++m) cov -= G(m, k, i) * c0.ricci(m, j) + G(m, k, j) * c0.ricci(i, m);
                s += c0.ginv(i, k) * cov;
            }
        res[j] = s - 0.5 * dR[j];
    }
    return norm_g(c0.ginv, res);
}

}  // namespace hmlab
