#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "hmlab/check.hpp"
#include "hmlab/curvature.hpp"
#include "hmlab/numerics.hpp"

namespace hmlab {

// The HM family g_{N,n} on (r_tip, inf) x S^1 x R^{n-2} (or x T^{n-2} when the
// flat directions are made periodic). Coordinates: r, tau_0, tau_1, ..., with
// tau_k = b_k theta_k for k >= 1 in dataset form.
struct HMParams {
    HMParams() = default;
    HMParams(int N_, int n_) : N(N_), n(n_) {}

    int N = 3;
    int n = 3;
    std::vector<double> flat_scales;  // b_1 .. b_{n-2}; empty means all 1
    bool periodic_flat = false;
    double tip_margin = 0.05;
    double r_max = 1e6;
    double step = 1e-3;
};

class HMModel {
public:
    explicit HMModel(HMParams p) : p_(std::move(p)) {
        if (p_.N < 3) throw ConfigError("HM model needs N >= 3");
        if (p_.n < 2 || p_.n > p_.N) throw ConfigError("HM model needs 2 <= n <= N");
        if (p_.n > kMaxJetDim) throw ConfigError("dimension exceeds jet capacity");
        if (p_.flat_scales.empty()) p_.flat_scales.assign(static_cast<std::size_t>(p_.n - 2), 1.0);
        if (static_cast<int>(p_.flat_scales.size()) != p_.n - 2)
            throw ConfigError("flat_scales must have n-2 entries");
        for (double b : p_.flat_scales)
            if (!(b > 0.0)) throw ConfigError("flat scales must be positive");
    }

    const HMParams& params() const { return p_; }
    int N() const { return p_.N; }
    int n() const { return p_.n; }
    double r_tip() const { return std::pow(2.0, -2.0 / p_.N); }
    double r_min() const { return r_tip() + p_.tip_margin; }

    // Dataset scales b_0 .. b_{n-2} with b_0 = 2/N.
    std::vector<double> dataset_scales() const {
        std::vector<double> b{2.0 / p_.N};
        b.insert(b.end(), p_.flat_scales.begin(), p_.flat_scales.end());
        return b;
    }

    CoordinateChart chart() const {
        std::vector<Axis> ax{Axis::radial("r", r_min(), p_.r_max, p_.step)};
        ax.push_back(Axis::angle("tau0", p_.step));
        for (int k = 1; k < p_.n - 1; ++k) {
            std::string name = "theta" + std::to_string(k);
            ax.push_back(p_.periodic_flat ? Axis::angle(name, p_.step) : Axis::line(name, -kInf, kInf, p_.step));
        }
        return CoordinateChart(ax);
    }

    template <class T>
    T upsilon(const T& r) const {
        return r * pow(1.0 + 0.25 * pow(r, -double(p_.N)), 2.0 / p_.N);
    }

    MetricField metric() const {
        const int N = p_.N, n = p_.n;
        std::vector<double> b = p_.flat_scales;
        return MetricField::generic(chart(), [N, n, b](auto x, auto g) {
            using T = typename decltype(g)::value_type;
            for (auto& e : g) e = T(0.0);
            const T& r = x[0];
            T q = 0.25 * pow(r, -double(N));
            g[0] = 1.0 / (r * r);
            T m = 1.0 - q;
            g[static_cast<std::size_t>(n + 1)] = (4.0 / (N * N)) * r * r * pow(1.0 + q, 4.0 / N - 2.0) * m * m;
            T flat = r * r * pow(1.0 + q, 4.0 / N);
            for (int k = 2; k < n; ++k) {
                double bk = b[static_cast<std::size_t>(k - 2)];
                g[static_cast<std::size_t>(k * n + k)] = bk * bk * flat;
            }
        });
    }

    ScalarField upsilon_field() const {
        const int N = p_.N;
        return ScalarField::generic(chart(), [N](auto x) {
            return x[0] * pow(1.0 + 0.25 * pow(x[0], -double(N)), 2.0 / N);
        });
    }

    // rho = Upsilon^(N-n)
    ScalarField weight_field() const {
        const int N = p_.N, n = p_.n;
        return ScalarField::generic(chart(), [N, n](auto x) {
            return pow(x[0] * pow(1.0 + 0.25 * pow(x[0], -double(N)), 2.0 / N), double(N - n));
        });
    }

    ScalarField log_weight_field() const {
        const int N = p_.N, n = p_.n;
        return ScalarField::generic(chart(), [N, n](auto x) {
            return double(N - n) * log(x[0] * pow(1.0 + 0.25 * pow(x[0], -double(N)), 2.0 / N));
        });
    }

    // T = r^-2 dr^2 + g_{tau0 tau0} dtau0^2
    Eigen::MatrixXd T_tensor(const Point& p) const {
        Eigen::MatrixXd g = metric().at(p);
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(p_.n, p_.n);
        T(0, 0) = g(0, 0);
        T(1, 1) = g(1, 1);
        return T;
    }

    Eigen::MatrixXd hessian_upsilon_formula(const Point& p) const {
        double U = upsilon(p[0]), UN = std::pow(U, -double(p_.N));
        return U * (1.0 - UN) * metric().at(p) + 0.5 * p_.N * U * UN * T_tensor(p);
    }

    Tensor4 riemann_formula(const Point& p) const {
        Eigen::MatrixXd g = metric().at(p), T = T_tensor(p);
        double UN = std::pow(upsilon(p[0]), -double(p_.N));
        const double N = p_.N;
        return -0.5 * (1.0 - UN) * kulkarni_nomizu(g, g) - 0.5 * N * UN * kulkarni_nomizu(T, g) +
               0.25 * N * (N - 1.0) * UN * kulkarni_nomizu(T, T);
    }

    Eigen::MatrixXd ricci_formula(const Point& p) const {
        Eigen::MatrixXd g = metric().at(p), T = T_tensor(p);
        double UN = std::pow(upsilon(p[0]), -double(p_.N));
        const double N = p_.N, n = p_.n;
        return -(n - 1.0) * g - (N - n + 1.0) * UN * g + 0.5 * N * (N - n + 1.0) * UN * T;
    }

    double scalar_formula(double r) const {
        double UN = std::pow(upsilon(r), -double(p_.N));
        const double N = p_.N, n = p_.n;
        return -n * (n - 1.0) + (N - n + 1.0) * (N - n) * UN;
    }

    // Quasi-random interior sample points with r in [r_min + pad, r_hi].
    std::vector<Point> sample_points(int count, double r_hi = 5.0, unsigned offset = 0) const {
        std::vector<Point> pts;
        double lo = r_min() + 0.01, hi = r_hi;
        for (int i = 0; i < count; ++i) {
            unsigned idx = offset + static_cast<unsigned>(i);
            Point p(p_.n);
            p[0] = lo * std::pow(hi / lo, halton_coordinate(idx, 0));
            for (int k = 1; k < p_.n; ++k) p[k] = kTwoPi * halton_coordinate(idx, k);
            pts.push_back(p);
        }
        return pts;
    }

private:
    HMParams p_;
};

// Hyperbolic metric r^-2 dr^2 + r^2 sum b_k^2 dtheta_k^2 on (r_min, inf) x T^{n-1}.
inline MetricField hyperbolic_metric(std::vector<double> b, double r_min, double step = 1e-3,
                                     double r_max = 1e12) {
    const int n = static_cast<int>(b.size()) + 1;
    if (n < 2 || n > kMaxJetDim) throw ConfigError("hyperbolic metric dimension out of range");
    std::vector<Axis> ax{Axis::radial("r", r_min, r_max, step)};
    for (int k = 0; k < n - 1; ++k) ax.push_back(Axis::angle("theta" + std::to_string(k), step));
    return MetricField::generic(CoordinateChart(ax), [b, n](auto x, auto g) {
        using T = typename decltype(g)::value_type;
        for (auto& e : g) e = T(0.0);
        g[0] = 1.0 / (x[0] * x[0]);
        for (int k = 1; k < n; ++k) {
            double bk = b[static_cast<std::size_t>(k - 1)];
            g[static_cast<std::size_t>(k * n + k)] = bk * bk * x[0] * x[0];
        }
    });
}

struct HMVerification {
    std::vector<Check> checks;
    Table table;
    double seconds = 0.0;
};

// Curvature structure of g_{N,n}: every closed form above is compared against
// finite-difference numerics at quasi-random points.
inline HMVerification verify_hm_identities(const HMModel& m, int points, double tol = 1e-6,
                                           const FdOptions& opt = {}) {
    MetricField g = m.metric();
    ScalarField U = m.upsilon_field();
    const int N = m.N(), n = m.n();
    double e_spec = 0, e_hess = 0, e_riem = 0, e_ric = 0, e_scal = 0, e_lap = 0, e_grad = 0;
    HMVerification out;
    out.table.name = "hm_identities_N" + std::to_string(N) + "_n" + std::to_string(n);
    out.table.header = {"r", "hessian_residual", "riemann_residual", "ricci_residual", "scalar_residual"};
    for (const Point& p : m.sample_points(points)) {
        MetricJet mj = metric_jet(g, p, 2, opt);
        CurvatureBundle cb = curvature_from(mj);
        Eigen::MatrixXd T = m.T_tensor(p);

        // eigenvalues of T relative to g: {1, 1, 0, ...}
        Eigen::MatrixXd L = orthonormal_frame(cb.g);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.transpose() * T * L);
        Eigen::VectorXd ev = es.eigenvalues().reverse();
        for (int i = 0; i < n; ++i) e_spec = std::max(e_spec, std::abs(ev[i] - (i < 2 ? 1.0 : 0.0)));

        ScalarJet uj = scalar_jet(U, p, 2, opt);
        Eigen::MatrixXd hess = hessian_from(cb.christoffel, uj);
        double rh = norm_g(cb.ginv, Eigen::MatrixXd(hess - m.hessian_upsilon_formula(p)));
        double rr = norm_g(cb.ginv, cb.riemann - m.riemann_formula(p));
        double rc = norm_g(cb.ginv, Eigen::MatrixXd(cb.ricci - m.ricci_formula(p)));
        double rs = std::abs(cb.scalar - m.scalar_formula(p[0]));
        double Uv = uj.v, UN = std::pow(Uv, -double(N));
        double lap = cb.ginv.cwiseProduct(hess).sum();
        e_lap = std::max(e_lap, std::abs(lap / Uv - (n + (N - n) * UN)));
        e_grad = std::max(e_grad, std::abs(uj.d.dot(cb.ginv * uj.d) / (Uv * Uv) - (1.0 - UN)));
        e_hess = std::max(e_hess, rh);
        e_riem = std::max(e_riem, rr);
        e_ric = std::max(e_ric, rc);
        e_scal = std::max(e_scal, rs);
        out.table.rows.push_back({p[0], rh, rr, rc, rs});
    }
    std::string tag = "(N=" + std::to_string(N) + ",n=" + std::to_string(n) + ")";
    out.checks.push_back(make_check("hm.T_spectrum " + tag, "hm-structure", e_spec, tol));
    out.checks.push_back(make_check("hm.hessian_upsilon " + tag, "hm-structure", e_hess, tol));
    out.checks.push_back(make_check("hm.riemann " + tag, "hm-structure", e_riem, tol));
    out.checks.push_back(make_check("hm.ricci " + tag, "hm-structure", e_ric, tol));
    out.checks.push_back(make_check("hm.scalar " + tag, "hm-structure", e_scal, tol));
    out.checks.push_back(make_check("hm.laplacian_upsilon " + tag, "hm-structure", e_lap, tol));
    out.checks.push_back(make_check("hm.gradient_upsilon " + tag, "hm-structure", e_grad, tol));
    return out;
}

// -2 Lap log rho - (N-n+1)/(N-n) |d log rho|^2 + R + N(N-1) = 0 for n < N,
// and R = -N(N-1) for n = N.
inline HMVerification verify_weight_identity(const HMModel& m, int points, double tol_weight = 1e-5,
                                             double tol_scalar = 1e-6, const FdOptions& opt = {}) {
    MetricField g = m.metric();
    ScalarField lr = m.log_weight_field();
    const int N = m.N(), n = m.n();
    HMVerification out;
    double worst = 0.0;
    for (const Point& p : m.sample_points(points, 5.0, 1000)) {
        MetricJet mj = metric_jet(g, p, 2, opt);
        CurvatureBundle cb = curvature_from(mj);
        if (n == N) {
            worst = std::max(worst, std::abs(cb.scalar + N * (N - 1.0)));
            continue;
        }
        ScalarJet lj = scalar_jet(lr, p, 2, opt);
        double lap = cb.ginv.cwiseProduct(hessian_from(cb.christoffel, lj)).sum();
        double grad2 = lj.d.dot(cb.ginv * lj.d);
        double res = -2.0 * lap - double(N - n + 1) / (N - n) * grad2 + cb.scalar + N * (N - 1.0);
        worst = std::max(worst, std::abs(res));
    }
    std::string tag = "(N=" + std::to_string(N) + ",n=" + std::to_string(n) + ")";
    if (n == N)
        out.checks.push_back(make_check("hm.scalar_curvature_n_eq_N " + tag, "hm-weight", worst, tol_scalar));
    else
        out.checks.push_back(make_check("hm.weight_identity " + tag, "hm-weight", worst, tol_weight));
    return out;
}

}  // namespace hmlab
