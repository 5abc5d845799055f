#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "hmlab/check.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/numerics.hpp"

namespace hmlab {

inline void require_model_dimension(int N) {
    if (N < 3) throw ConfigError("model needs N >= 3");
}

inline double F_profile(double s, int N) { return std::tanh(0.5 * N * s); }

inline double log_cosh(double x) {
    x = std::abs(x);
    return x + std::log1p(std::exp(-2.0 * x)) - std::numbers::ln2;
}

inline double log_G_profile(double s, int N) { return 2.0 * (N - 1.0) / N * log_cosh(0.5 * N * s); }
inline double G_profile(double s, int N) { return std::exp(log_G_profile(s, N)); }

// Riccati equation satisfied by the geodesic curvature of the model circles.
inline double kappa_rhs(double kappa, double s, int N) {
    double c = 1.0 + std::cosh(N * s);
    return -kappa * kappa - (N - 2.0) * std::tanh(0.5 * N * s) * kappa - (N - 2.0) / c + (N - 1.0);
}

inline double kappa_regular(double s, double a, int N) {
    // 1 + cosh x + a sinh x written without the cancellation at a = -1
    double x = N * s;
    double den = 1.0 + 0.5 * ((1.0 + a) * std::exp(x) + (1.0 - a) * std::exp(-x));
    return std::tanh(0.5 * x) + N * a / den;
}

inline double kappa_singular(double s, int N) { return std::tanh(0.5 * N * s) + N / std::sinh(N * s); }

struct KappaTrajectory {
    std::vector<double> s;
    std::vector<double> kappa;
    double error_estimate = 0.0;
    bool blew_up = false;
    double blowup_s = 0.0;
};

namespace detail {

// Integrates from s = 1 to s_end and records samples on the step grid.
inline void kappa_leg(double k1, double s_end, int N, double h, std::vector<double>& ss, std::vector<double>& ks,
                      bool& blew, double& blow_s) {
    auto f = [N](double s, double k) { return kappa_rhs(k, s, N); };
    long steps = std::lround(std::abs(s_end - 1.0) / h);
    double dir = s_end >= 1.0 ? 1.0 : -1.0;
    double k = k1;
    ss.push_back(1.0);
    ks.push_back(k);
    for (long i = 0; i < steps; ++i) {
        double s = 1.0 + dir * i * h, hh = dir * h;
        double a = f(s, k);
        double b = f(s + 0.5 * hh, k + 0.5 * hh * a);
        double c = f(s + 0.5 * hh, k + 0.5 * hh * b);
        double e = f(s + hh, k + hh * c);
        k += hh / 6.0 * (a + 2.0 * b + 2.0 * c + e);
        if (!std::isfinite(k) || std::abs(k) > 1e8) {
            blew = true;
            blow_s = s + hh;
            return;
        }
        ss.push_back(1.0 + dir * (i + 1) * h);
        ks.push_back(k);
    }
}

inline KappaTrajectory kappa_run(double k1, double s_lo, double s_hi, int N, double h) {
    KappaTrajectory t;
    std::vector<double> s_dn, k_dn, s_up, k_up;
    double lo = std::min(1.0, s_lo), hi = std::max(1.0, s_hi);
    detail::kappa_leg(k1, lo, N, h, s_dn, k_dn, t.blew_up, t.blowup_s);
    if (!t.blew_up) detail::kappa_leg(k1, hi, N, h, s_up, k_up, t.blew_up, t.blowup_s);
    for (std::size_t i = s_dn.size(); i-- > 1;) {
        if (s_dn[i] >= s_lo - 1e-12 && s_dn[i] <= s_hi + 1e-12) {
            t.s.push_back(s_dn[i]);
            t.kappa.push_back(k_dn[i]);
        }
    }
    for (std::size_t i = 0; i < s_up.size(); ++i) {
        if (s_up[i] >= s_lo - 1e-12 && s_up[i] <= s_hi + 1e-12) {
            t.s.push_back(s_up[i]);
            t.kappa.push_back(k_up[i]);
        }
    }
    return t;
}

}  // namespace detail

// RK4 with fixed step h from the initial value kappa(1); the error estimate
// compares against a run with step h/2 (Richardson factor 16/15).
inline KappaTrajectory integrate_kappa(double kappa_at_1, double s_lo, double s_hi, int N, double h = 1e-4) {
    require_model_dimension(N);
    if (!(s_lo > 0.0) || !(s_hi > s_lo)) throw DomainError("kappa integration needs 0 < s_lo < s_hi");
    KappaTrajectory coarse = detail::kappa_run(kappa_at_1, s_lo, s_hi, N, h);
    if (coarse.blew_up) return coarse;
    KappaTrajectory fine = detail::kappa_run(kappa_at_1, s_lo, s_hi, N, 0.5 * h);
    if (fine.blew_up) return fine;
    double err = 0.0;
    for (std::size_t i = 0; i < coarse.s.size(); ++i) {
        std::size_t j = 2 * i;
        if (j < fine.kappa.size()) err = std::max(err, std::abs(coarse.kappa[i] - fine.kappa[j]));
    }
    coarse.error_estimate = err * 16.0 / 15.0;
    return coarse;
}

// Circle-length profile of the two-dimensional model, up to the constant 4pi/N.
template <class T>
T model_length_profile(const T& s, int N) {
    return pow(cosh(0.5 * N * s), -(N - 2.0) / N) * sinh(0.5 * N * s);
}

inline double log_length_derivative(double s, int N) {
    Jet t = Jet::variable(1, 0, s);
    Jet L = model_length_profile(t, N);
    return L.grad(0) / L.v;
}

// Rotationally symmetric disc: circle length L and weight potential psi as
// functions of the distance t from the centre.
struct RotSymSurface {
    std::function<Jet(const Jet&)> length;
    std::function<Jet(const Jet&)> psi;
    double euler_characteristic = 1.0;
};

inline RotSymSurface hm_model_surface(int N) {
    require_model_dimension(N);
    RotSymSurface s;
    s.length = [N](const Jet& t) { return (4.0 * std::numbers::pi / N) * model_length_profile(t, N); };
    // psi = (N-2) log Upsilon with Upsilon^N = cosh^2(N t / 2)
    s.psi = [N](const Jet& t) { return (2.0 * (N - 2.0) / N) * log(cosh(0.5 * N * t)); };
    return s;
}

struct IJProfile {
    std::vector<double> s, I, J;
};

// I(s) = 2pi chi - (N-1) F(l-s) L(l-s) + int_{dist < l-s} (Lap psi - K), J = G(l-s) I.
inline IJProfile compute_I_J(const RotSymSurface& surf, int N, double l, const std::vector<double>& s_grid,
                             int panels = 16) {
    require_model_dimension(N);
    auto integrand = [&](double t) {
        Jet x = Jet::variable(1, 0, t);
        Jet L = surf.length(x), P = surf.psi(x);
        double lap = P.hess(0, 0) + L.grad(0) / L.v * P.grad(0);
        double K = -L.hess(0, 0) / L.v;
        return (lap - K) * L.v;
    };
    IJProfile out;
    for (double s : s_grid) {
        if (!(s >= 0.0 && s < l)) throw DomainError("s must lie in [0, l)");
        double sig = l - s;
        double area = integrate(integrand, 0.0, sig, panels);
        double Ls = surf.length(Jet(sig)).v;
        double I = 2.0 * std::numbers::pi * surf.euler_characteristic - (N - 1.0) * F_profile(sig, N) * Ls + area;
        out.s.push_back(s);
        out.I.push_back(I);
        out.J.push_back(G_profile(sig, N) * I);
    }
    return out;
}

// Integrands whose vanishing characterises the model (evaluated at distance t).
inline double scalar_deficit(const RotSymSurface& surf, int N, double t) {
    Jet x = Jet::variable(1, 0, t);
    Jet L = surf.length(x), P = surf.psi(x);
    double lap = P.hess(0, 0) + L.grad(0) / L.v * P.grad(0);
    double K = -L.hess(0, 0) / L.v;
    double g2 = P.grad(0) * P.grad(0);
    return -2.0 * lap - (N - 1.0) / (N - 2.0) * g2 + 2.0 * K + N * (N - 1.0);
}

inline double gradient_deficit(const RotSymSurface& surf, int N, double t) {
    Jet P = surf.psi(Jet::variable(1, 0, t));
    return std::abs(P.grad(0) - (N - 2.0) * F_profile(t, N));
}

struct RigidityResult {
    std::vector<Check> checks;
    double fitted_c = 0.0;
    Table table;
};

// Relations between w, psi and the curvature on the HM model surface g_{N,2},
// with w defined by Upsilon^N = cosh^2(N w / 2) and psi = (N-2) log Upsilon.
inline RigidityResult rigidity_identities_check(int N, int points, double tol = 1e-6,
                                                const FdOptions& opt = verification_fd()) {
    require_model_dimension(N);
    HMModel m(HMParams{N, 2});
    MetricField g = m.metric();
    CoordinateChart c = g.chart();
    auto psi = ScalarField::generic(c, [N](auto x) {
        return double(N - 2) * log(x[0] * pow(1.0 + 0.25 * pow(x[0], -double(N)), 2.0 / N));
    });
    auto w = ScalarField::generic(c, [N](auto x) {
        auto U = x[0] * pow(1.0 + 0.25 * pow(x[0], -double(N)), 2.0 / N);
        return (2.0 / N) * acosh(pow(U, 0.5 * N));
    });
    double e_grad = 0, e_pde = 0, e_w = 0, cmin = 1e300, cmax = -1e300, csum = 0;
    RigidityResult out;
    out.table.name = "rigidity_N" + std::to_string(N);
    out.table.header = {"r", "w", "grad_psi", "model_grad_psi", "pde_residual"};
    auto pts = m.sample_points(points, 6.0, 2000);
    for (const Point& p : pts) {
        MetricJet mj = metric_jet(g, p, 2, opt);
        CurvatureBundle cb = curvature_from(mj);
        ScalarJet pj = scalar_jet(psi, p, 2, opt), wj = scalar_jet(w, p, 1, opt);
        double gp2 = pj.d.dot(cb.ginv * pj.d);
        double lap = cb.ginv.cwiseProduct(hessian_from(cb.christoffel, pj)).sum();
        double model = (N - 2.0) * std::tanh(0.5 * N * wj.v);
        e_grad = std::max(e_grad, std::abs(std::sqrt(gp2) - model));
        double pde = -2.0 * lap - (N - 1.0) / (N - 2.0) * gp2 + cb.scalar + N * (N - 1.0);
        e_pde = std::max(e_pde, std::abs(pde));
        e_w = std::max(e_w, std::abs(std::sqrt(wj.d.dot(cb.ginv * wj.d)) - 1.0));
        double cval = (N - 2.0) / N * std::log(1.0 + std::cosh(N * wj.v)) - pj.v;
        cmin = std::min(cmin, cval);
        cmax = std::max(cmax, cval);
        csum += cval;
        out.table.rows.push_back({p[0], wj.v, std::sqrt(gp2), model, pde});
    }
    out.fitted_c = csum / static_cast<double>(pts.size());
    std::string tag = "(N=" + std::to_string(N) + ")";
    out.checks.push_back(make_check("model2d.grad_psi " + tag, "model-2d-rigidity", e_grad, tol));
    out.checks.push_back(make_check("model2d.psi_offset_constant " + tag, "model-2d-rigidity", cmax - cmin, tol));
    out.checks.push_back(make_check("model2d.psi_offset_value " + tag, "model-2d-rigidity",
                                    std::abs(out.fitted_c - (N - 2.0) / N * std::numbers::ln2), tol));
    out.checks.push_back(make_check("model2d.weighted_scalar_equation " + tag, "model-2d-rigidity", e_pde, tol));
    out.checks.push_back(make_check("model2d.unit_gradient_w " + tag, "model-2d-rigidity", e_w, tol));
    // At the tip w = 0 and |grad psi|^2 = (N-2)^2 (1 - Upsilon^-N) = 0 exactly.
    double U0 = m.upsilon(m.r_tip());
    out.checks.push_back(make_check("model2d.tip_values " + tag, "model-2d-rigidity",
                                    std::abs((2.0 / N) * std::acosh(std::max(1.0, std::pow(U0, 0.5 * N)))) +
                                        std::abs(1.0 - std::pow(U0, -double(N))),
                                    tol));
    return out;
}

}  // namespace hmlab
