#pragma once

#include <Eigen/Dense>
#include <math.h>  // boost 1.74 pchip calls unqualified isnan
#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmlab/check.hpp"
#include "hmlab/curvature.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/numerics.hpp"
#include "hmlab/parallel.hpp"

namespace hmlab {

// Conformal metric gt = z^2 g in coordinates (z, theta_0, ..., theta_{n-2}) with z = 1/r.
// The physical metric g = z^-2 gt is rebuilt from the same component maps.
class CompactifiedMetric {
public:
    CompactifiedMetric() = default;
    CompactifiedMetric(std::string name, CoordinateChart chart, Field::Eval e, Field::JetEval j)
        : name_(std::move(name)), eval_(std::move(e)), jet_(std::move(j)) {
        const int d = chart.dim();
        tilde_ = MetricField(Field(chart, d * d, eval_, jet_));
        auto e2 = eval_;
        auto j2 = jet_;
        physical_ = MetricField(Field(
            chart, d * d,
            [e2](std::span<const double> x, std::span<double> out) {
                e2(x, out);
                for (auto& v : out) v /= x[0] * x[0];
            },
            [j2](std::span<const Jet> x, std::span<Jet> out) {
                j2(x, out);
                Jet z2 = x[0] * x[0];
                for (auto& v : out) v = v / z2;
            }));
    }

    template <class F>
    static CompactifiedMetric generic(std::string name, CoordinateChart chart, F f) {
        auto sh = std::make_shared<F>(std::move(f));
        return CompactifiedMetric(
            std::move(name), std::move(chart),
            [sh](std::span<const double> x, std::span<double> out) { (*sh)(x, out); },
            [sh](std::span<const Jet> x, std::span<Jet> out) { (*sh)(x, out); });
    }

    const std::string& name() const { return name_; }
    int dim() const { return tilde_.dim(); }
    const CoordinateChart& chart() const { return tilde_.field().chart(); }
    const MetricField& tilde() const { return tilde_; }
    const MetricField& physical() const { return physical_; }
    const Field::Eval& eval_fn() const { return eval_; }
    const Field::JetEval& jet_fn() const { return jet_; }

private:
    std::string name_;
    Field::Eval eval_;
    Field::JetEval jet_;
    MetricField tilde_, physical_;
};

inline CoordinateChart compactified_chart(int n, double z_max, double step = 1e-3) {
    std::vector<Axis> ax{Axis::line("z", 0.0, z_max, step)};
    for (int k = 0; k < n - 1; ++k) ax.push_back(Axis::angle("theta" + std::to_string(k), step));
    return CoordinateChart(ax);
}

// Hyperbolic r^-2 dr^2 + r^2 sum b_k^2 dtheta_k^2: gt = dz^2 + gamma is flat.
inline CompactifiedMetric flat_compactified(std::vector<double> b, double z_max = 1.0) {
    const int n = static_cast<int>(b.size()) + 1;
    if (n < 3 || n > kMaxJetDim) throw ConfigError("compactified metric needs 3 <= n <= " + std::to_string(kMaxJetDim));
    return CompactifiedMetric::generic("hyperbolic", compactified_chart(n, z_max), [b, n](auto x, auto g) {
        using T = typename decltype(g)::value_type;
        for (auto& e : g) e = T(0.0);
        g[0] = T(1.0);
        for (int k = 1; k < n; ++k) g[static_cast<std::size_t>(k * n + k)] = T(b[static_cast<std::size_t>(k - 1)] * b[static_cast<std::size_t>(k - 1)]);
        (void)x;
    });
}

// gt from a metric given in (r, theta) coordinates: gt_zz = z^-2 g_rr, gt_zk = -g_rk, gt_kl = z^2 g_kl.
// Evaluates through r = 1/z, so it is only usable for z > 0.
inline CompactifiedMetric compactify(const MetricField& g, std::string name) {
    const Field& f = g.field();
    if (!f.has_exact()) throw ConfigError("compactify needs a metric with an exact derivative path");
    const CoordinateChart& src = f.chart();
    const int d = src.dim();
    for (int k = 1; k < d; ++k)
        if (!src.axis(k).periodic) throw ConfigError("compactify: angular axis " + src.axis(k).name + " is not periodic");
    std::vector<Axis> ax{Axis::line("z", 0.0, 1.0 / src.axis(0).lower, 1e-3)};
    for (int k = 1; k < d; ++k) ax.push_back(src.axis(k));
    auto transform = [d](auto x, auto out, const auto& raw) {
        using T = typename decltype(out)::value_type;
        std::vector<T> y(x.begin(), x.end());
        T z = x[0];
        y[0] = T(1.0) / z;
        raw(std::span<const T>(y), out);
        T z2 = z * z;
        out[0] = out[0] / z2;
        for (int k = 1; k < d; ++k) {
            out[static_cast<std::size_t>(k)] = -out[static_cast<std::size_t>(k)];
            out[static_cast<std::size_t>(k * d)] = -out[static_cast<std::size_t>(k * d)];
            for (int l = 1; l < d; ++l) out[static_cast<std::size_t>(k * d + l)] *= z2;
        }
    };
    auto e = f.eval_fn();
    auto j = f.jet_fn();
    return CompactifiedMetric(
        std::move(name), CoordinateChart(ax),
        [e, transform](std::span<const double> x, std::span<double> out) { transform(x, out, e); },
        [j, transform](std::span<const Jet> x, std::span<Jet> out) { transform(x, out, j); });
}

// HM in dataset coordinates written directly in z, valid up to z = 0. With q = z^N / 4:
// gt = dz^2 + (4/N^2)(1+q)^{4/N-2}(1-q)^2 dtau^2 + (1+q)^{4/N} sum b_k^2 dtheta_k^2.
inline CompactifiedMetric hm_compactified(const HMModel& hm) {
    const int N = hm.N(), n = hm.n();
    if (n < 3) throw ConfigError("compactified HM needs n >= 3");
    std::vector<double> b = hm.params().flat_scales;
    return CompactifiedMetric::generic("HM", compactified_chart(n, 1.0 / hm.r_min()), [N, n, b](auto x, auto g) {
        using T = typename decltype(g)::value_type;
        for (auto& e : g) e = T(0.0);
        T zN = x[0];
        for (int i = 1; i < N; ++i) zN = zN * x[0];
        T q = 0.25 * zN;
        T m = 1.0 - q;
        g[0] = T(1.0);
        g[static_cast<std::size_t>(n + 1)] = (4.0 / (N * N)) * pow(1.0 + q, 4.0 / N - 2.0) * m * m;
        T flat = pow(1.0 + q, 4.0 / N);
        for (int k = 2; k < n; ++k) {
            double bk = b[static_cast<std::size_t>(k - 2)];
            g[static_cast<std::size_t>(k * n + k)] = bk * bk * flat;
        }
    });
}

// gt + a z^N (A dz^2 + 2 C dz dtheta_last), A = cos(theta_0 - k theta_last),
// C = 0.6 sin(k theta_last) + 0.4 cos(theta_0). The physical perturbation is z^{N-2} times this.
struct Perturbation {
    int N = 4;
    double amplitude = 0.5;
    double zz_weight = 1.0;
    double zt_weight = 1.0;
    int frequency = 1;
};

inline CompactifiedMetric perturb(const CompactifiedMetric& base, const Perturbation& pert) {
    if (pert.N < 1) throw ConfigError("perturbation order must be positive");
    const int d = base.dim();
    const int last = d - 1;
    auto apply = [d, last, pert](auto x, auto out, const auto& raw) {
        using T = typename decltype(out)::value_type;
        raw(x, out);
        T zN = x[0];
        for (int i = 1; i < pert.N; ++i) zN = zN * x[0];
        const double k = pert.frequency;
        T A = pert.zz_weight * cos(x[1] - k * x[static_cast<std::size_t>(last)]);
        T C = pert.zt_weight * (0.6 * sin(k * x[static_cast<std::size_t>(last)]) + 0.4 * cos(x[1]));
        out[0] += pert.amplitude * zN * A;
        out[static_cast<std::size_t>(last)] += pert.amplitude * zN * C;
        out[static_cast<std::size_t>(last * d)] += pert.amplitude * zN * C;
    };
    auto e = base.eval_fn();
    auto j = base.jet_fn();
    std::string name = base.name() + "+z^" + std::to_string(pert.N) + " perturbation";
    return CompactifiedMetric(
        std::move(name), base.chart(),
        [e, apply](std::span<const double> x, std::span<double> out) { apply(x, out, e); },
        [j, apply](std::span<const Jet> x, std::span<Jet> out) { apply(x, out, j); });
}

// Pointwise geometry of gt: gradient and Hessian of z, and v = (D~^2 z)(grad z, .)^sharp.
struct TildeGeometry {
    Eigen::MatrixXd g, ginv, hess_z;
    Tensor3 gamma;
    Eigen::VectorXd grad_z, v;
};

inline FdOptions exact_derivatives() {
    FdOptions o;
    o.source = DerivativeSource::Exact;
    return o;
}

inline TildeGeometry tilde_geometry(const CompactifiedMetric& cm, const Point& p) {
    MetricJet mj = metric_jet(cm.tilde(), p, 1, exact_derivatives());
    TildeGeometry t;
    const int d = mj.d;
    t.g = mj.g;
    t.ginv = mj.ginv;
    t.gamma = christoffel_from(mj);
    t.grad_z = mj.ginv.col(0);
    t.hess_z.resize(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t.hess_z(i, j) = -t.gamma(0, i, j);
    t.v = t.ginv * (t.hess_z * t.grad_z);
    return t;
}

struct IntegratorOptions {
    double h_max = 2e-3;
    double z_star = 0.25;
    double h_sing = 1e-3;      // below this height z^-1 v is extrapolated from z = h, 2h, 3h
    double h_probe = 1e-5;     // height scale of the boundary regularity check
    double tol_boundary = 1e-9;
};

inline Point at_height(const Point& p, double z) {
    Point q = p;
    q[0] = z;
    return q;
}

// z^-1 v at p. Near z = 0 the quotient is a removable singularity; use the quadratic through h, 2h, 3h.
inline Eigen::VectorXd singular_coefficient(const CompactifiedMetric& cm, const Point& p, const TildeGeometry& geo, double h) {
    const double z = p[0];
    if (z >= h) return geo.v / z;
    Eigen::VectorXd c1 = tilde_geometry(cm, at_height(p, h)).v / h;
    Eigen::VectorXd c2 = tilde_geometry(cm, at_height(p, 2 * h)).v / (2 * h);
    Eigen::VectorXd c3 = tilde_geometry(cm, at_height(p, 3 * h)).v / (3 * h);
    double l1 = (z - 2 * h) * (z - 3 * h) / (2 * h * h);
    double l2 = -(z - h) * (z - 3 * h) / (h * h);
    double l3 = (z - h) * (z - 2 * h) / (2 * h * h);
    return l1 * c1 + l2 * c2 + l3 * c3;
}

// |v| at z = 0 above the boundary point (0, theta), by cubic extrapolation from heights h..4h.
// The probe height is small enough that the extrapolation error of a regular v is far below tol_boundary.
inline double boundary_defect(const CompactifiedMetric& cm, const Point& q, double h) {
    auto v = [&](double z) { return tilde_geometry(cm, at_height(q, z)).v; };
    Eigen::VectorXd v0 = 4.0 * v(h) - 6.0 * v(2 * h) + 4.0 * v(3 * h) - v(4 * h);
    Eigen::MatrixXd g0 = tilde_geometry(cm, at_height(q, 0.0)).g;
    return std::sqrt(std::max(0.0, v0.dot(g0 * v0)));
}

inline double check_boundary_regular(const CompactifiedMetric& cm, const std::vector<Point>& qs, const IntegratorOptions& opt) {
    double worst = 0.0;
    for (const auto& q : qs) {
        double d = boundary_defect(cm, q, opt.h_probe);
        worst = std::max(worst, d);
        if (!(d <= opt.tol_boundary)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3e", d);
            throw DomainError(std::string("singular coefficient: (D~^2 z)(grad z, .) does not vanish at z = 0 (defect ") +
                              buf + ") for metric " + cm.name());
        }
    }
    return worst;
}

// Right-hand side of the first order system for (alpha, zeta), with alpha = q + offset.
inline Eigen::VectorXd boundary_ode_rhs(const CompactifiedMetric& cm, const Point& q, const Eigen::VectorXd& y, double h_sing) {
    const int d = cm.dim();
    Point a = q + y.head(d);
    Eigen::VectorXd zeta = y.tail(d);
    TildeGeometry geo = tilde_geometry(cm, a);
    const double z = a[0];
    Eigen::VectorXd adot = geo.grad_z + z * zeta;
    Eigen::VectorXd zdot = -singular_coefficient(cm, a, geo, h_sing) - geo.ginv * (geo.hess_z * zeta) -
                           zeta.dot(geo.g * zeta) * geo.grad_z + zeta[0] * zeta;
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) s += geo.gamma(i, j, k) * adot[j] * zeta[k];
        zdot[i] -= s;
    }
    Eigen::VectorXd out(2 * d);
    out << adot, zdot;
    return out;
}

// Samples of (alpha, zeta). param holds s, or z for height-parametrised runs.
// Positions are stored as offsets from q so that small displacements keep full relative precision.
struct BoundaryTrajectory {
    Point q;
    std::vector<double> param;
    std::vector<Eigen::VectorXd> offset, zeta;
    Point alpha(std::size_t i) const { return q + offset[i]; }
};

inline std::vector<double> uniform_nodes(double end, int count) {
    std::vector<double> s(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) s[static_cast<std::size_t>(i)] = end * i / (count - 1.0);
    return s;
}

namespace detail {

inline void validate_start(const CompactifiedMetric& cm, const Point& q, const Eigen::VectorXd& xi, const IntegratorOptions& opt) {
    if (q.size() != cm.dim() || xi.size() != cm.dim()) throw ConfigError("boundary geodesic: dimension mismatch");
    if (!(q[0] >= 0.0 && q[0] <= opt.z_star))
        throw DomainError("boundary geodesic: start height " + std::to_string(q[0]) + " outside [0, z_*]");
    TildeGeometry geo = tilde_geometry(cm, q);
    if (xi.dot(geo.g * xi) > 1.0 + 1e-12) throw DomainError("boundary geodesic: |xi| exceeds 1");
    if (q[0] < 3 * opt.h_sing) check_boundary_regular(cm, {q}, opt);
}

}  // namespace detail

// Psi_s(q, xi) on the given s nodes. Each node interval is cut into steps of at most h_max / max(1, |zeta|).
inline BoundaryTrajectory integrate_boundary_geodesic(const CompactifiedMetric& cm, const Point& q, const Eigen::VectorXd& xi,
                                                      const std::vector<double>& s_nodes, const IntegratorOptions& opt = {}) {
    detail::validate_start(cm, q, xi, opt);
    const int d = cm.dim();
    BoundaryTrajectory tr;
    tr.q = q;
    Eigen::VectorXd y(2 * d);
    y << Eigen::VectorXd::Zero(d), xi;
    auto f = [&](double, const Eigen::VectorXd& u) { return boundary_ode_rhs(cm, q, u, opt.h_sing); };
    for (std::size_t i = 0; i < s_nodes.size(); ++i) {
        if (i > 0) {
            double span = s_nodes[i] - s_nodes[i - 1];
            Eigen::VectorXd zeta = y.tail(d);
            double zn = std::sqrt(std::max(0.0, zeta.dot(tilde_geometry(cm, q + y.head(d)).g * zeta)));
            int steps = std::max(1, static_cast<int>(std::ceil(span * std::max(1.0, zn) / opt.h_max)));
            double h = span / steps;
            for (int k = 0; k < steps; ++k) y = rk4_step(f, s_nodes[i - 1] + k * h, y, h);
            if (!(q[0] + y[0] > 0.0))
                throw DomainError("boundary geodesic does not enter z > 0 at s = " + std::to_string(s_nodes[i]));
        }
        tr.param.push_back(s_nodes[i]);
        tr.offset.push_back(y.head(d));
        tr.zeta.push_back(y.tail(d));
    }
    return tr;
}

// Same trajectory parametrised by height: d/dz = (d/ds) / zdot. Requires zdot bounded below.
inline BoundaryTrajectory integrate_by_height(const CompactifiedMetric& cm, const Point& q, const Eigen::VectorXd& xi,
                                              const std::vector<double>& z_nodes, const IntegratorOptions& opt = {}) {
    detail::validate_start(cm, q, xi, opt);
    const int d = cm.dim();
    BoundaryTrajectory tr;
    tr.q = q;
    Eigen::VectorXd y(2 * d);
    y << Eigen::VectorXd::Zero(d), xi;
    auto f = [&](double, const Eigen::VectorXd& u) {
        Eigen::VectorXd r = boundary_ode_rhs(cm, q, u, opt.h_sing);
        if (!(r[0] > 0.25)) throw ConvergenceError("boundary geodesic turns back before the target height");
        return Eigen::VectorXd(r / r[0]);
    };
    double zc = q[0];
    for (double zt : z_nodes) {
        if (zt < zc) throw ConfigError("height nodes must be increasing and start at or above q");
        double span = zt - zc;
        int steps = static_cast<int>(std::ceil(span / opt.h_max));
        for (int k = 0; k < steps; ++k) y = rk4_step(f, zc + k * span / steps, y, span / steps);
        zc = zt;
        tr.param.push_back(zt);
        tr.offset.push_back(y.head(d));
        tr.zeta.push_back(y.tail(d));
    }
    return tr;
}

// Direct pregeodesic equation of g: D_s adot = -z^-3 |dz|_g^2 adot, with positions and velocities.
struct PregeodesicTrajectory {
    std::vector<double> s;
    std::vector<Point> alpha;
    std::vector<Eigen::VectorXd> velocity;
};

inline Eigen::VectorXd pregeodesic_rhs(const CompactifiedMetric& cm, const Eigen::VectorXd& y) {
    const int d = cm.dim();
    Point a = y.head(d);
    Eigen::VectorXd v = y.tail(d);
    const double z = a[0];
    if (!(z > 0.0)) throw DomainError("pregeodesic integration reached z <= 0");
    MetricJet mj = metric_jet(cm.physical(), a, 1, exact_derivatives());
    Tensor3 G = christoffel_from(mj);
    Eigen::VectorXd acc = -(mj.ginv(0, 0) / (z * z * z)) * v;
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) s += G(i, j, k) * v[j] * v[k];
        acc[i] -= s;
    }
    Eigen::VectorXd out(2 * d);
    out << v, acc;
    return out;
}

inline PregeodesicTrajectory integrate_pregeodesic(const CompactifiedMetric& cm, const Point& a0, const Eigen::VectorXd& v0,
                                                   const std::vector<double>& s_nodes, double h_max = 2e-3) {
    const int d = cm.dim();
    Eigen::VectorXd y(2 * d);
    y << a0, v0;
    auto f = [&](double, const Eigen::VectorXd& u) { return pregeodesic_rhs(cm, u); };
    PregeodesicTrajectory tr;
    for (std::size_t i = 0; i < s_nodes.size(); ++i) {
        if (i > 0) {
            double span = s_nodes[i] - s_nodes[i - 1];
            // the coefficient scales like 1/z, so steps shrink with the height
            double h_loc = std::min(h_max, y[0] / 20.0);
            int steps = std::max(1, static_cast<int>(std::ceil(span / h_loc)));
            for (int k = 0; k < steps; ++k) y = rk4_step(f, s_nodes[i - 1] + k * span / steps, y, span / steps);
        }
        tr.s.push_back(s_nodes[i]);
        tr.alpha.push_back(y.head(d));
        tr.velocity.push_back(y.tail(d));
    }
    return tr;
}

struct EquivalenceResult {
    double position_gap = 0.0;
    double zeta_gap = 0.0;
    double s_handoff = 0.0;
    BoundaryTrajectory system;
    PregeodesicTrajectory direct;
};

// Runs the (alpha, zeta) system from q and the pregeodesic equation from the first node with z >= z_handoff
// (the latter is singular at the boundary), then compares positions and the reconstructed zeta.
inline EquivalenceResult integrator_equivalence(const CompactifiedMetric& cm, const Point& q, const Eigen::VectorXd& xi, double s_end,
                                                int nodes, const IntegratorOptions& opt = {}, double z_handoff = 0.01) {
    EquivalenceResult r;
    auto s = uniform_nodes(s_end, nodes);
    r.system = integrate_boundary_geodesic(cm, q, xi, s, opt);
    std::size_t i0 = 0;
    while (i0 < s.size() && r.system.alpha(i0)[0] < z_handoff) ++i0;
    if (i0 + 1 >= s.size()) throw ConfigError("integrator_equivalence: trajectory never reaches the handoff height");
    r.s_handoff = s[i0];
    Point a0 = r.system.alpha(i0);
    TildeGeometry geo = tilde_geometry(cm, a0);
    Eigen::VectorXd v0 = geo.grad_z + a0[0] * r.system.zeta[i0];
    std::vector<double> tail(s.begin() + static_cast<std::ptrdiff_t>(i0), s.end());
    r.direct = integrate_pregeodesic(cm, a0, v0, tail, opt.h_max);
    for (std::size_t k = 0; k < tail.size(); ++k) {
        Point a = r.system.alpha(i0 + k);
        r.position_gap = std::max(r.position_gap, (a - r.direct.alpha[k]).cwiseAbs().maxCoeff());
        Eigen::VectorXd zeta_direct = (r.direct.velocity[k] - tilde_geometry(cm, r.direct.alpha[k]).grad_z) / r.direct.alpha[k][0];
        r.zeta_gap = std::max(r.zeta_gap, (zeta_direct - r.system.zeta[i0 + k]).cwiseAbs().maxCoeff());
    }
    return r;
}

// Component of the covariant acceleration normal to the velocity, over |adot|_g^2, from 4th order differences of
// the sampled positions. Zero exactly when the arclength reparametrisation is a geodesic of g.
inline double pregeodesic_reparam_residual(const CompactifiedMetric& cm, const PregeodesicTrajectory& tr) {
    const std::size_t m = tr.alpha.size();
    if (m < 5) throw ConfigError("reparametrisation check needs at least 5 samples");
    const double ds = tr.s[1] - tr.s[0];
    double worst = 0.0;
    for (std::size_t i = 2; i + 2 < m; ++i) {
        const auto& a = tr.alpha;
        Eigen::VectorXd v = (-a[i + 2] + 8.0 * a[i + 1] - 8.0 * a[i - 1] + a[i - 2]) / (12.0 * ds);
        Eigen::VectorXd acc = (-a[i + 2] + 16.0 * a[i + 1] - 30.0 * a[i] + 16.0 * a[i - 1] - a[i - 2]) / (12.0 * ds * ds);
        MetricJet mj = metric_jet(cm.physical(), a[i], 1, exact_derivatives());
        Tensor3 G = christoffel_from(mj);
        Eigen::VectorXd R = acc;
        for (int k = 0; k < mj.d; ++k)
            for (int p = 0; p < mj.d; ++p)
                for (int l = 0; l < mj.d; ++l) R[k] += G(k, p, l) * v[p] * v[l];
        double vv = v.dot(mj.g * v);
        Eigen::VectorXd perp = R - (R.dot(mj.g * v) / vv) * v;
        worst = std::max(worst, std::sqrt(std::max(0.0, perp.dot(mj.g * perp))) / vv);
    }
    return worst;
}

// For flat gt: every sample lies on one circle centred on the boundary, in coordinates (z, b_k theta_k).
inline double semicircle_defect(const BoundaryTrajectory& tr, const std::vector<double>& b) {
    const std::size_t m = tr.offset.size();
    const int d = static_cast<int>(b.size()) + 1;
    auto scaled = [&](std::size_t i) {
        Eigen::VectorXd x(d - 1);
        for (int k = 1; k < d; ++k) x[k - 1] = b[static_cast<std::size_t>(k - 1)] * tr.offset[i][k];
        return x;
    };
    // velocity from adot = d_z + z zeta
    const Eigen::VectorXd& zl = tr.zeta[m - 1];
    double zend = tr.q[0] + tr.offset[m - 1][0];
    Eigen::VectorXd xdot(d - 1);
    for (int k = 1; k < d; ++k) xdot[k - 1] = b[static_cast<std::size_t>(k - 1)] * zend * zl[k];
    double zdot = 1.0 + zend * zl[0];
    if (xdot.norm() < 1e-14) return std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd c = scaled(m - 1) + (zend * zdot / xdot.squaredNorm()) * xdot;
    double R2 = (scaled(m - 1) - c).squaredNorm() + zend * zend;
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double z = tr.q[0] + tr.offset[i][0];
        worst = std::max(worst, std::abs((scaled(i) - c).squaredNorm() + z * z - R2) / R2);
    }
    return worst;
}

// max_s |Psi_s(q2, 0) - Psi_s(q1, 0)| / |q2 - q1| for q2 = q1 + eps * dir.
inline double boundary_lipschitz_ratio(const CompactifiedMetric& cm, const Point& q, const Eigen::VectorXd& dir, double eps,
                                       const std::vector<double>& s_nodes, const IntegratorOptions& opt = {}) {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(cm.dim());
    Point q2 = q + eps * dir;
    auto a = integrate_boundary_geodesic(cm, q, zero, s_nodes, opt);
    auto b = integrate_boundary_geodesic(cm, q2, zero, s_nodes, opt);
    double worst = 0.0;
    for (std::size_t i = 0; i < s_nodes.size(); ++i)
        worst = std::max(worst, ((q2 - q) + (b.offset[i] - a.offset[i])).norm());
    return worst / (eps * dir.norm());
}

struct FoliationOptions {
    double z_fol = 0.1;
    int t_count = 16;
    int base_count = 8;        // per base axis theta_0 .. theta_{n-3}
    int z_count = 13;          // geometric heights z_fol * 2^{-(z_count-1)/2} .. z_fol
    int max_retries = 4;
    IntegratorOptions integ;
};

// Leaves {Xi = t} as graphs theta_{n-2} = G_t(z, theta'), stored as deviation G_t - t.
struct FoliationAtlas {
    double z_fol = 0.0;
    int retries = 0;
    int base_dim = 0;
    std::vector<double> t, z;
    std::vector<Eigen::VectorXd> base;
    std::vector<double> deviation;  // [(ti * z.size() + zi) * base.size() + bi]
    std::vector<double> max_deviation;  // per height
    double min_separation = 0.0;
    double min_dG_dt = 0.0;
    double boundary_slope = 0.0;
    double boundary_defect = 0.0;
    PowerFit decay;
    int decay_points = 0;
    bool vertical = false;  // every deviation is exactly zero

    double dev(std::size_t ti, std::size_t zi, std::size_t bi) const { return deviation[(ti * z.size() + zi) * base.size() + bi]; }
    double G(std::size_t ti, std::size_t zi, std::size_t bi) const { return t[ti] + dev(ti, zi, bi); }
};

namespace detail {

inline std::vector<Eigen::VectorXd> base_grid(int dim, int m) {
    std::vector<Eigen::VectorXd> out;
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(m);
    for (std::size_t i = 0; i < total; ++i) {
        Eigen::VectorXd p(dim);
        std::size_t r = i;
        for (int a = 0; a < dim; ++a) {
            p[a] = kTwoPi * static_cast<double>(r % static_cast<std::size_t>(m)) / m;
            r /= static_cast<std::size_t>(m);
        }
        out.push_back(p);
    }
    return out;
}

struct AtlasAttempt {
    bool ok = false;
    std::string reason;
    FoliationAtlas atlas;
};

inline AtlasAttempt try_build(const CompactifiedMetric& cm, const FoliationOptions& o, double z_fol) {
    const int d = cm.dim();
    const int nb = d - 2;
    AtlasAttempt at;
    FoliationAtlas& A = at.atlas;
    A.z_fol = z_fol;
    A.base_dim = nb;
    A.base = base_grid(nb, o.base_count);
    for (int m = 0; m < o.t_count; ++m) A.t.push_back(kTwoPi * m / o.t_count);
    for (int j = 0; j < o.z_count; ++j) A.z.push_back(z_fol * std::pow(2.0, -0.5 * (o.z_count - 1 - j)));
    const std::size_t T = A.t.size(), Z = A.z.size(), B = A.base.size();

    auto boundary_point = [&](std::size_t ti, std::size_t bi) {
        Point q = Point::Zero(d);
        for (int a = 0; a < nb; ++a) q[1 + a] = A.base[bi][a];
        q[d - 1] = A.t[ti];
        return q;
    };
    std::vector<Point> qs;
    for (std::size_t ti = 0; ti < T; ++ti)
        for (std::size_t bi = 0; bi < B; ++bi) qs.push_back(boundary_point(ti, bi));
    A.boundary_defect = check_boundary_regular(cm, qs, o.integ);

    IntegratorOptions io = o.integ;
    io.z_star = std::max(io.z_star, z_fol);
    std::vector<BoundaryTrajectory> trs;
    try {
        trs = parallel_map<BoundaryTrajectory>(qs.size(), [&](std::size_t i) {
            return integrate_by_height(cm, qs[i], Eigen::VectorXd::Zero(d), A.z, io);
        });
    } catch (const ConvergenceError& e) {
        at.reason = e.what();
        return at;
    }

    // Leaf value at the grid base point: trajectories drift sideways by X, so G = t + Y - dY/dtheta' . X
    const double hb = kTwoPi / o.base_count;
    A.deviation.assign(T * Z * B, 0.0);
    for (std::size_t ti = 0; ti < T; ++ti)
        for (std::size_t zi = 0; zi < Z; ++zi)
            for (std::size_t bi = 0; bi < B; ++bi) {
                const auto& off = trs[ti * B + bi].offset[zi];
                double Y = off[d - 1];
                double corr = 0.0;
                for (int a = 0; a < nb; ++a) {
                    std::size_t stride = 1;
                    for (int c = 0; c < a; ++c) stride *= static_cast<std::size_t>(o.base_count);
                    std::size_t ia = (bi / stride) % static_cast<std::size_t>(o.base_count);
                    std::size_t up = bi + (ia + 1 < static_cast<std::size_t>(o.base_count) ? stride : stride - stride * static_cast<std::size_t>(o.base_count));
                    std::size_t dn = bi - (ia > 0 ? stride : stride - stride * static_cast<std::size_t>(o.base_count));
                    double dY = (trs[ti * B + up].offset[zi][d - 1] - trs[ti * B + dn].offset[zi][d - 1]) / (2.0 * hb);
                    corr += dY * off[1 + a];
                }
                A.deviation[(ti * Z + zi) * B + bi] = Y - corr;
            }

    A.min_separation = std::numeric_limits<double>::infinity();
    for (std::size_t zi = 0; zi < Z; ++zi)
        for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t ti = 0; ti < T; ++ti) {
                double next = ti + 1 < T ? A.G(ti + 1, zi, bi) : A.G(0, zi, bi) + kTwoPi;
                A.min_separation = std::min(A.min_separation, next - A.G(ti, zi, bi));
            }
    A.min_dG_dt = A.min_separation / (kTwoPi / static_cast<double>(T));
    if (!(A.min_separation > 0.0)) {
        at.reason = "leaves are not graphs over the base (consecutive leaves cross)";
        return at;
    }

    A.max_deviation.assign(Z, 0.0);
    for (std::size_t ti = 0; ti < T; ++ti)
        for (std::size_t zi = 0; zi < Z; ++zi)
            for (std::size_t bi = 0; bi < B; ++bi)
                A.max_deviation[zi] = std::max(A.max_deviation[zi], std::abs(A.dev(ti, zi, bi)));
    A.vertical = *std::max_element(A.max_deviation.begin(), A.max_deviation.end()) == 0.0;
    A.boundary_slope = A.max_deviation[0] / A.z[0];
    std::vector<double> zf, df;
    for (std::size_t zi = 0; zi < Z; ++zi)
        if (A.max_deviation[zi] > 0.0) {
            zf.push_back(A.z[zi]);
            df.push_back(A.max_deviation[zi]);
        }
    A.decay_points = static_cast<int>(zf.size());
    if (zf.size() >= 3) A.decay = fit_power_law(zf, df);
    else A.decay.exponent = std::numeric_limits<double>::infinity();
    at.ok = true;
    return at;
}

}  // namespace detail

// Integrates Psi_s(q, 0) from a boundary grid and assembles the leaves. If the graph condition fails the
// height is halved, up to max_retries times.
inline FoliationAtlas build_foliation(const CompactifiedMetric& cm, const FoliationOptions& o = {}) {
    if (cm.dim() < 3) throw ConfigError("foliation needs n >= 3");
    if (!(o.z_fol > 0.0) || o.t_count < 2 || o.base_count < 3 || o.z_count < 3 || o.max_retries < 0)
        throw ConfigError("invalid foliation options");
    double z = o.z_fol;
    std::string last;
    for (int attempt = 0; attempt <= o.max_retries; ++attempt, z *= 0.5) {
        auto at = detail::try_build(cm, o, z);
        if (at.ok) {
            at.atlas.retries = attempt;
            return at.atlas;
        }
        last = at.reason;
    }
    throw ConvergenceError("foliation: graph condition still fails after " + std::to_string(o.max_retries) +
                           " retries (" + last + ")");
}

// Height samples of one trajectory by cubic monotone interpolation of the s-parametrised run.
inline std::vector<double> resample_by_height(const BoundaryTrajectory& tr, int component, const std::vector<double>& z) {
    std::vector<double> zs, ys;
    for (std::size_t i = 0; i < tr.offset.size(); ++i) {
        double zi = tr.q[0] + tr.offset[i][0];
        if (!zs.empty() && !(zi > zs.back())) throw ConvergenceError("height is not monotone along the trajectory");
        zs.push_back(zi);
        ys.push_back(tr.offset[i][component]);
    }
    double lo = zs.front(), hi = zs.back();
    boost::math::interpolators::pchip<std::vector<double>> p(std::move(zs), std::move(ys));
    std::vector<double> out;
    for (double x : z) {
        if (x < lo || x > hi) throw ConfigError("resample height outside trajectory range");
        out.push_back(p(x));
    }
    return out;
}

// Hessian of r with respect to g, in coordinates (r, theta): D^2 r = -Gamma^r_ij.
struct HessianRSample {
    double r = 0.0;
    double min_eigenvalue = 0.0;
};

struct HessianRReport {
    std::vector<HessianRSample> samples;
    bool all_positive = true;
    double r_fol = 0.0;  // smallest sampled r beyond which every sample is positive; inf if none
};

inline double hessian_r_min_eigenvalue(const MetricField& g, const Point& p) {
    FdOptions opt;
    opt.source = DerivativeSource::Automatic;
    opt.richardson = true;
    MetricJet mj = metric_jet(g, p, 1, opt);
    Tensor3 G = christoffel_from(mj);
    const int d = mj.d;
    Eigen::MatrixXd H(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) H(i, j) = -G(0, i, j);
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(H, mj.g, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline HessianRReport hessian_r_positivity(const MetricField& g, std::vector<Point> samples) {
    std::sort(samples.begin(), samples.end(), [](const Point& a, const Point& b) { return a[0] < b[0]; });
    HessianRReport rep;
    auto eig = parallel_map<double>(samples.size(), [&](std::size_t i) { return hessian_r_min_eigenvalue(g, samples[i]); });
    rep.r_fol = std::numeric_limits<double>::infinity();
    bool tail_ok = true;
    for (std::size_t k = samples.size(); k-- > 0;) {
        rep.samples.push_back({samples[k][0], eig[k]});
        if (!(eig[k] > 0.0)) {
            rep.all_positive = false;
            tail_ok = false;
        }
        if (tail_ok) rep.r_fol = samples[k][0];
    }
    std::reverse(rep.samples.begin(), rep.samples.end());
    return rep;
}

// Hyperbolic metric with g_{theta_0 theta_0} scaled by 1 + A psi(r), psi a bump of half width w around r_c.
// For A of order one the radial growth of that circle reverses inside the bump and D^2 r becomes indefinite.
inline MetricField bent_hyperbolic_metric(std::vector<double> b, double A, double r_c, double w, double r_min = 1.0) {
    const int n = static_cast<int>(b.size()) + 1;
    if (n < 2 || n > kMaxJetDim) throw ConfigError("bent hyperbolic metric dimension out of range");
    std::vector<Axis> ax{Axis::radial("r", r_min, 1e12, 1e-3)};
    for (int k = 0; k < n - 1; ++k) ax.push_back(Axis::angle("theta" + std::to_string(k), 1e-3));
    return MetricField::generic(CoordinateChart(ax), [b, n, A, r_c, w](auto x, auto g) {
        using T = typename decltype(g)::value_type;
        for (auto& e : g) e = T(0.0);
        const T& r = x[0];
        g[0] = 1.0 / (r * r);
        T t = (r - r_c) / w;
        T psi = std::abs(value_of(t)) < 1.0 ? pow(1.0 - t * t, 6.0) : T(0.0);
        for (int k = 1; k < n; ++k) {
            double bk = b[static_cast<std::size_t>(k - 1)];
            T f = bk * bk * r * r;
            if (k == 1) f = f * (1.0 + A * psi);
            g[static_cast<std::size_t>(k * n + k)] = f;
        }
    });
}

struct FoliationConfig {
    int N = 4;
    int n = 3;
    double z_fol = 0.1;
    double amplitude = 0.5;
    int t_count = 16;
    int base_count = 8;
    double s_end = 0.3;
    int nodes = 151;
};

struct AtlasSummary {
    std::string metric;
    double z_fol = 0.0;
    int leaf_count = 0;
    int retries = 0;
    double min_separation = 0.0;
    double decay_fit = 0.0;
    double max_deviation = 0.0;
};

struct FoliationReport {
    std::vector<Check> checks;
    std::vector<AtlasSummary> atlases;
    Table trajectories;  // s, z, theta offsets, zeta
    Table leaves;        // z, max |G_t - t| on the perturbed atlas
    Table hessian;       // r, min eigenvalue of D^2 r (HM), same for the bent metric
};

inline FoliationReport verify_foliation(const FoliationConfig& cfg) {
    const int N = cfg.N, n = cfg.n;
    if (N < 3 || n < 3 || n > N || n > kMaxJetDim) throw ConfigError("foliation needs 3 <= n <= N and n <= " + std::to_string(kMaxJetDim));
    const std::string tag = "(N=" + std::to_string(N) + ",n=" + std::to_string(n) + ")";
    FoliationReport rep;
    auto add = [&](std::string name, std::string ref, double v, double thr, Relation r = Relation::Less) {
        rep.checks.push_back(make_check("foliation." + std::move(name) + " " + tag, std::move(ref), v, thr, r));
    };

    HMParams hp(N, n);
    hp.periodic_flat = true;
    HMModel hm(hp);
    const std::vector<double> b = hm.dataset_scales();
    CompactifiedMetric hyp = flat_compactified(b);
    CompactifiedMetric hmc = hm_compactified(hm);
    Perturbation pert;
    pert.N = N;
    pert.amplitude = cfg.amplitude;
    CompactifiedMetric per = perturb(hyp, pert);
    IntegratorOptions io;
    io.z_star = std::max(io.z_star, cfg.z_fol);

    const int d = n;
    Point qb = Point::Zero(d);
    for (int k = 1; k < d; ++k) qb[k] = 0.7 + 0.9 * k;
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    auto s_nodes = uniform_nodes(cfg.s_end, cfg.nodes);

    // boundary regularity and its failure mode
    std::vector<Point> qs;
    for (int i = 0; i < 8; ++i) {
        Point q = Point::Zero(d);
        for (int k = 1; k < d; ++k) q[k] = halton_coordinate(static_cast<std::size_t>(i + 1), k - 1) * kTwoPi;
        qs.push_back(q);
    }
    add("boundary_coefficient_removable", "boundary-ode", std::max(check_boundary_regular(per, qs, io), check_boundary_regular(hmc, qs, io)), 1e-9);
    {
        Perturbation bad;
        bad.N = 1;
        bad.amplitude = 0.3;
        bad.zt_weight = 0.0;
        CompactifiedMetric sing = perturb(hyp, bad);
        double detected = 0.0;
        try {
            integrate_boundary_geodesic(sing, qb, zero, s_nodes, io);
        } catch (const DomainError&) {
            detected = 1.0;
        }
        add("singular_coefficient_detected", "boundary-ode", detected, 0.5, Relation::Greater);
    }

    // exact hyperbolic: straight lines for xi = 0, circles through the boundary otherwise
    {
        auto tr = integrate_boundary_geodesic(hyp, qb, zero, s_nodes, io);
        double gap = 0.0;
        for (std::size_t i = 0; i < s_nodes.size(); ++i) {
            Eigen::VectorXd expect = Eigen::VectorXd::Zero(d);
            expect[0] = s_nodes[i];
            gap = std::max({gap, (tr.offset[i] - expect).cwiseAbs().maxCoeff(), tr.zeta[i].cwiseAbs().maxCoeff()});
        }
        add("hyperbolic_straight_lines", "boundary-ode", gap, 1e-12);
    }
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(d);
    xi[0] = -0.3;
    for (int k = 1; k < d; ++k) xi[k] = (k % 2 ? 0.5 : -0.35) / b[static_cast<std::size_t>(k - 1)] / std::sqrt(double(d - 1));
    {
        auto eq = integrator_equivalence(hyp, qb, xi, cfg.s_end, cfg.nodes, io);
        add("two_integrator_equivalence_hyperbolic", "pregeodesic", eq.position_gap, 1e-7);
        add("hyperbolic_semicircle", "pregeodesic", semicircle_defect(eq.system, b), 1e-9);
        add("reparametrised_geodesic_residual_hyperbolic", "pregeodesic", pregeodesic_reparam_residual(hyp, eq.direct), 1e-6);
        for (std::size_t i = 0; i < eq.system.offset.size(); i += 10) {
            std::vector<double> row{eq.system.param[i]};
            for (int k = 0; k < d; ++k) row.push_back(eq.system.offset[i][k]);
            for (int k = 0; k < d; ++k) row.push_back(eq.system.zeta[i][k]);
            rep.trajectories.rows.push_back(row);
        }
    }
    {
        auto eq = integrator_equivalence(per, qb, xi, cfg.s_end, cfg.nodes, io);
        add("two_integrator_equivalence_perturbed", "pregeodesic", eq.position_gap, 1e-7);
        add("zeta_reconstruction_perturbed", "pregeodesic", eq.zeta_gap, 1e-6);
        add("reparametrised_geodesic_residual_perturbed", "pregeodesic", pregeodesic_reparam_residual(per, eq.direct), 1e-6);
    }
    rep.trajectories.name = "foliation_trajectory_N" + std::to_string(N) + "_n" + std::to_string(n);
    rep.trajectories.header = {"s", "dz"};
    for (int k = 1; k < d; ++k) rep.trajectories.header.push_back("dtheta" + std::to_string(k - 1));
    rep.trajectories.header.push_back("zeta_z");
    for (int k = 1; k < d; ++k) rep.trajectories.header.push_back("zeta_theta" + std::to_string(k - 1));

    // continuity up to the boundary and linear response to the perturbation
    {
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(d);
        dir[d - 1] = 1.0;
        double l1 = boundary_lipschitz_ratio(per, qb, dir, 1e-3, s_nodes, io);
        double l2 = boundary_lipschitz_ratio(per, qb, dir, 5e-4, s_nodes, io);
        add("boundary_lipschitz_bounded", "boundary-ode", std::max(l1, l2), 2.0);
        add("boundary_lipschitz_linear", "boundary-ode", std::abs(l1 / l2 - 1.0), 0.05);

        auto base = integrate_boundary_geodesic(hyp, qb, xi, s_nodes, io);
        auto gap_for = [&](double amp) {
            Perturbation p = pert;
            p.amplitude = amp;
            auto tr = integrate_boundary_geodesic(perturb(hyp, p), qb, xi, s_nodes, io);
            double g = 0.0;
            for (std::size_t i = 0; i < s_nodes.size(); ++i)
                g = std::max({g, (tr.offset[i] - base.offset[i]).cwiseAbs().maxCoeff(), (tr.zeta[i] - base.zeta[i]).cwiseAbs().maxCoeff()});
            return g;
        };
        double g1 = gap_for(0.01), g2 = gap_for(0.02);
        add("perturbation_response_linear", "boundary-ode", std::abs(g2 / g1 - 2.0) / 2.0, 0.05);
    }

    // atlases
    FoliationOptions fo;
    fo.z_fol = cfg.z_fol;
    fo.t_count = cfg.t_count;
    // keep the base grid near 2 * base_count points once it is multidimensional
    fo.base_count = n == 3 ? cfg.base_count
                           : std::max(3, static_cast<int>(std::floor(std::pow(2.0 * cfg.base_count, 1.0 / (n - 2)) + 1e-9)));
    fo.integ = io;
    auto summarize = [&](const std::string& name, const FoliationAtlas& a) {
        AtlasSummary s;
        s.metric = name;
        s.z_fol = a.z_fol;
        s.leaf_count = static_cast<int>(a.t.size());
        s.retries = a.retries;
        s.min_separation = a.min_separation;
        s.decay_fit = std::isfinite(a.decay.exponent) ? a.decay.exponent : -1.0;
        s.max_deviation = *std::max_element(a.max_deviation.begin(), a.max_deviation.end());
        rep.atlases.push_back(s);
        return s;
    };
    {
        auto a = build_foliation(hyp, fo);
        auto s = summarize("hyperbolic", a);
        add("hyperbolic_leaves_vertical", "leaves", s.max_deviation, 1e-15, Relation::LessEqual);
    }
    {
        auto a = build_foliation(hmc, fo);
        auto s = summarize("HM", a);
        add("hm_leaves_vertical", "leaves", s.max_deviation, 1e-14);
    }
    {
        auto a = build_foliation(per, fo);
        summarize("perturbed", a);
        add("perturbed_leaf_decay_exponent", "leaves", a.decay.exponent, N - 0.2, Relation::GreaterEqual);
        add("leaf_disjointness", "leaves", a.min_separation, 0.0, Relation::Greater);
        add("graph_condition_dG_dt", "leaves", a.min_dG_dt, 0.5, Relation::Greater);
        add("boundary_normal_derivative", "leaves", a.boundary_slope, 1e-6);
        add("leaf_count", "leaves", static_cast<double>(a.t.size()), 16.0, Relation::GreaterEqual);
        rep.leaves.name = "foliation_leaves_N" + std::to_string(N) + "_n" + std::to_string(n);
        rep.leaves.header = {"z", "max_deviation"};
        for (std::size_t i = 0; i < a.z.size(); ++i) rep.leaves.rows.push_back({a.z[i], a.max_deviation[i]});

        // s-parametrised run resampled by height against the height-parametrised run
        Point q = Point::Zero(d);
        for (int k = 1; k < d; ++k) q[k] = a.base.empty() || k == d - 1 ? a.t[3] : a.base[1][std::min(k - 1, a.base_dim - 1)];
        auto zs = std::vector<double>(a.z.end() - 4, a.z.end());
        auto by_s = integrate_boundary_geodesic(per, q, zero, uniform_nodes(1.05 * a.z_fol, 421), io);
        auto by_z = integrate_by_height(per, q, zero, zs, io);
        auto res = resample_by_height(by_s, d - 1, zs);
        double worst = 0.0;
        for (std::size_t i = 0; i < zs.size(); ++i)
            worst = std::max(worst, std::abs(res[i] - by_z.offset[i][d - 1]) / std::max(1e-300, std::abs(by_z.offset[i][d - 1])));
        add("height_resampling_consistency", "leaves", worst, 1e-3);
    }

    // D^2 r
    {
        std::vector<Point> samples;
        for (double r : {10.0, 100.0, 1000.0}) {
            Point p = Point::Zero(d);
            p[0] = r;
            for (int k = 1; k < d; ++k) p[k] = 1.0 + 0.5 * k;
            samples.push_back(p);
        }
        auto hyp_r = hessian_r_positivity(hyperbolic_metric(b, 0.5), samples);
        double dev = 0.0;
        for (const auto& s : hyp_r.samples) dev = std::max(dev, std::abs(s.min_eigenvalue / s.r - 1.0));
        add("hessian_r_hyperbolic", "hessian-r", dev, 1e-9);

        auto hm_r = hessian_r_positivity(hm.metric(), samples);
        double last = std::abs(hm_r.samples.back().min_eigenvalue / hm_r.samples.back().r - 1.0);
        bool shrinking = true;
        for (std::size_t i = 1; i < hm_r.samples.size(); ++i)
            shrinking = shrinking && std::abs(hm_r.samples[i].min_eigenvalue / hm_r.samples[i].r - 1.0) <=
                                         std::abs(hm_r.samples[i - 1].min_eigenvalue / hm_r.samples[i - 1].r - 1.0) + 1e-12;
        add("hessian_r_hm_positive", "hessian-r", hm_r.all_positive ? 1.0 : 0.0, 0.5, Relation::Greater);
        add("hessian_r_hm_asymptotic", "hessian-r", shrinking ? last : 1.0, 1e-6);

        std::vector<Point> bent_samples;
        for (int i = 0; i <= 80; ++i) {
            Point p = Point::Zero(d);
            p[0] = 1.5 + 0.05 * i;
            for (int k = 1; k < d; ++k) p[k] = 1.0;
            bent_samples.push_back(p);
        }
        auto bent = hessian_r_positivity(bent_hyperbolic_metric(b, 0.9, 3.0, 1.0), bent_samples);
        add("hessian_r_counterexample_detected", "hessian-r", bent.all_positive ? 0.0 : 1.0, 0.5, Relation::Greater);
        add("hessian_r_counterexample_r_fol", "hessian-r", bent.r_fol, 3.0, Relation::Greater);

        rep.hessian.name = "foliation_hessian_r_N" + std::to_string(N) + "_n" + std::to_string(n);
        rep.hessian.header = {"r", "min_eigenvalue_bent"};
        for (const auto& s : bent.samples) rep.hessian.rows.push_back({s.r, s.min_eigenvalue});
    }
    return rep;
}

}  // namespace hmlab
