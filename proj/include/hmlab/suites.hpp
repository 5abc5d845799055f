#pragma once

#include <chrono>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hmlab/barriers.hpp"
#include "hmlab/config.hpp"
#include "hmlab/curvature.hpp"
#include "hmlab/dataset.hpp"
#include "hmlab/foliation.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/hypersurface.hpp"
#include "hmlab/monotonicity.hpp"
#include "hmlab/parallel.hpp"
#include "hmlab/radial.hpp"
#include "hmlab/report.hpp"
#include "hmlab/stability.hpp"

namespace hmlab {

inline constexpr const char* kSuiteNames[] = {"core",      "hm",     "dataset", "monotonicity",
                                              "barrier",   "stability", "radial", "foliation"};

inline std::string suite_for_command(const std::string& cmd) {
    if (cmd == "verify-core") return "core";
    if (cmd == "verify-hm") return "hm";
    return cmd;
}

inline std::string nn_tag(int N, int n) { return "(N=" + std::to_string(N) + ",n=" + std::to_string(n) + ")"; }

// ---- fixtures ---------------------------------------------------------------

// g = A^T A + I with A_ij = sum_k a_ijk sin(f_ijk x_k + p_ijk); smooth, positive definite, no symmetry.
struct TrigMetric {
    int d;
    std::vector<double> amp, freq, phase;

    TrigMetric(int dim, unsigned seed) : d(dim) {
        std::mt19937 rng(seed);
        // raw engine output keeps the coefficients identical across standard libraries
        auto u = [&rng] { return 2.0 * (static_cast<double>(rng()) / 4294967295.0) - 1.0; };
        for (int i = 0; i < d * d * d; ++i) {
            amp.push_back(0.3 * u());
            freq.push_back(u());
            phase.push_back(3.0 * u());
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
                for (int k = 0; k < d; ++k) s += A[static_cast<std::size_t>(k * d + i)] * A[static_cast<std::size_t>(k * d + j)];
                g[static_cast<std::size_t>(i * d + j)] = s;
            }
    }
};

inline CoordinateChart box_chart(int d, double step = 1e-3) {
    std::vector<Axis> ax;
    for (int i = 0; i < d; ++i) ax.push_back(Axis::line("x" + std::to_string(i), -5.0, 5.0, step));
    return CoordinateChart(ax);
}

// r^-2 dr^2 + r^2 sum dtheta^2
inline MetricField warped_hyperbolic(int n) {
    std::vector<Axis> ax{Axis::radial("r", 0.1)};
    for (int i = 1; i < n; ++i) ax.push_back(Axis::angle("t" + std::to_string(i)));
    return MetricField::generic(CoordinateChart(ax), [n](auto x, auto g) {
        using T = typename decltype(g)::value_type;
        for (auto& e : g) e = T(0.0);
        g[0] = 1.0 / (x[0] * x[0]);
        for (int i = 1; i < n; ++i) g[static_cast<std::size_t>(i * n + i)] = x[0] * x[0];
    });
}

// Negative-mass dataset with oscillating Q and P modes; its mass is -0.05 times the torus volume
// by construction, since only the constant modes survive integration.
inline Dataset builtin_dataset(int N, int n, double delta) {
    Dataset ds;
    ds.N = N;
    ds.n = n;
    ds.b = {2.0 / N};
    for (int k = 1; k <= n - 2; ++k) ds.b.push_back(1.0 + 0.3 * k);
    ds.r0 = 10.0;
    ds.delta = delta;
    const int d = n - 1;
    std::vector<int> zero(static_cast<std::size_t>(d), 0), k1 = zero, k2 = zero;
    k1[0] += 1;
    k1[static_cast<std::size_t>(d - 1)] += 2;
    k2[0] += 2;
    k2[static_cast<std::size_t>(d - 1)] -= 1;
    const double P0 = -0.01;
    const double c = (-0.05 - ds.mass_constant() - 2.0 * N * P0) / (double(N) * d);
    for (int i = 0; i < d; ++i) {
        double bi = ds.b[static_cast<std::size_t>(i)];
        ds.Q_modes.push_back({i, i, {zero, c * bi * bi, 0.0}});
    }
    ds.Q_modes.push_back({0, d - 1, {k1, 0.3, -0.2}});
    ds.P_modes = {{k2, 0.1, 0.05}, {zero, P0, 0.0}};
    return ds;
}

inline std::vector<TensorMode> builtin_correction(int n) {
    const int d = n - 1;
    std::vector<int> ones(static_cast<std::size_t>(d), 1), last(static_cast<std::size_t>(d), 0);
    last[static_cast<std::size_t>(d - 1)] = 1;
    return {{0, 0, {ones, 0.7, 0.1}}, {d - 1, d - 1, {last, 0.2, 0.4}}};
}

// ---- work units ---------------------------------------------------------------

struct Unit {
    std::string suite;
    std::string label;
    std::function<UnitResult()> run;
};

namespace detail {

inline void add(UnitResult& u, std::string name, std::string ref, double v, double thr, Relation r = Relation::Less) {
    u.checks.push_back(make_check(std::move(name), std::move(ref), v, thr, r));
}

inline std::vector<std::pair<int, int>> filter_pairs(const std::vector<std::pair<int, int>>& sweep, const RunConfig& c,
                                                     const std::string& suite) {
    if (c.N && c.n) return {{*c.N, *c.n}};
    std::vector<std::pair<int, int>> out;
    for (auto [N, n] : sweep)
        if ((!c.N || *c.N == N) && (!c.n || *c.n == n)) out.push_back({N, n});
    // under "all" a suite without matching cases is simply skipped
    if (out.empty() && c.command != "all")
        throw ConfigError("no default " + suite + " cases match the given N/n; pass both --N and --n");
    return out;
}

inline std::vector<std::pair<int, int>> all_pairs(int n_lo, int N_hi = 7) {
    std::vector<std::pair<int, int>> p;
    for (int N = 3; N <= N_hi; ++N)
        for (int n = n_lo; n <= N; ++n) p.push_back({N, n});
    return p;
}

inline std::vector<std::pair<int, int>> with_n3(int N_hi = 7) {
    std::vector<std::pair<int, int>> p;
    for (int N = 3; N <= N_hi; ++N) p.push_back({N, 3});
    return p;
}

inline std::vector<double> flat_scales_for(const RunConfig& c, int n) {
    if (!c.b.empty()) return c.b;
    return std::vector<double>(static_cast<std::size_t>(std::max(0, n - 2)), 1.0);
}

}  // namespace detail

inline UnitResult core_unit() {
    UnitResult u;
    using detail::add;
    FdOptions exact;
    exact.source = DerivativeSource::Exact;
    const std::string ref = "curvature-core";

    {
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
        add(u, "core.polar_christoffel", "christoffel", std::abs(G(0, 1, 1) + 1.7) + std::abs(G(1, 0, 1) - 1.0 / 1.7), 1e-9);
        add(u, "core.polar_flat_riemann", ref, curvature(g, p).riemann.max_abs(), 1e-8);
    }
    {
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
        add(u, "core.round_sphere_scalar", ref, std::abs(cb.scalar - 2.0), 1e-8);
        add(u, "core.round_sphere_sectional", ref, std::abs(cb.riemann(0, 1, 0, 1) / (cb.g(0, 0) * cb.g(1, 1)) - 1.0), 1e-8);
    }
    {
        double kn = 0.0, ric = 0.0, sc = 0.0;
        for (int n = 2; n <= 7; ++n) {
            MetricField g = warped_hyperbolic(n);
            Point p = Point::Constant(n, 0.7);
            p[0] = 2.3;
            auto cb = curvature(g, p, verification_fd());
            kn = std::max(kn, norm_g(cb.ginv, cb.riemann + 0.5 * kulkarni_nomizu(cb.g, cb.g)));
            ric = std::max(ric, norm_g(cb.ginv, Eigen::MatrixXd(cb.ricci + (n - 1) * cb.g)));
            sc = std::max(sc, std::abs(cb.scalar + n * (n - 1.0)));
        }
        add(u, "core.hyperbolic_riemann_kulkarni_nomizu (n=2..7)", ref, kn, 1e-7);
        add(u, "core.hyperbolic_ricci (n=2..7)", ref, ric, 1e-7);
        add(u, "core.hyperbolic_scalar (n=2..7)", ref, sc, 1e-7);
    }
    {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2), B(2, 2);
        B << 2.0, 1.0, 1.0, 3.0;
        Tensor4 k = kulkarni_nomizu(A, B);
        // A00 B11 + A11 B00 - A01 B10 - A10 B01 = 5
        add(u, "core.kulkarni_nomizu_by_hand", "kulkarni-nomizu",
            std::abs(k(0, 1, 0, 1) - 5.0) + std::abs(k(0, 1, 1, 0) + 5.0) + std::abs(k(0, 0, 0, 1)), 1e-15);
    }
    {
        double sym = 0.0, bianchi = 0.0, fd = 0.0, rich = 0.0;
        for (int d : {3, 4}) {
            MetricField g = MetricField::generic(box_chart(d), TrigMetric(d, 7u + static_cast<unsigned>(d)));
            Point p = Point::LinSpaced(d, -0.4, 0.9);
            auto ref_cb = curvature(g, p, exact);
            FdOptions r;
            r.richardson = true;
            sym = std::max(sym, riemann_symmetry_residual(ref_cb.riemann));
            bianchi = std::max(bianchi, contracted_bianchi_residual(g, p));
            fd = std::max(fd, norm_g(ref_cb.ginv, curvature(g, p).riemann - ref_cb.riemann));
            rich = std::max(rich, norm_g(ref_cb.ginv, curvature(g, p, r).riemann - ref_cb.riemann));
        }
        add(u, "core.riemann_symmetries (d=3,4)", ref, sym, 1e-9);
        add(u, "core.contracted_bianchi (d=3,4)", "bianchi", bianchi, 1e-4);
        add(u, "core.finite_difference_vs_exact_jets (d=3,4)", ref, fd, 1e-7);
        add(u, "core.richardson_vs_exact_jets (d=3,4)", ref, rich, 1e-8);
    }
    {
        MetricField g = MetricField::generic(box_chart(3, 1.0), TrigMetric(3, 5));
        Point p(3);
        p << 0.1, 0.2, 0.3;
        auto ref_cb = curvature(g, p, exact);
        FdOptions o1, o2;
        o1.h_scale = 0.08;
        o2.h_scale = 0.04;
        double e1 = norm_g(ref_cb.ginv, curvature(g, p, o1).riemann - ref_cb.riemann);
        double e2 = norm_g(ref_cb.ginv, curvature(g, p, o2).riemann - ref_cb.riemann);
        double order = std::log2(e1 / e2);
        add(u, "core.finite_difference_order", ref, order, 3.5, Relation::Greater);
        u.summary["fd_observed_order"] = json_number(order);
    }
    {
        MetricField g = warped_hyperbolic(3);
        auto r = ScalarField::generic(g.chart(), [](auto x) { return x[0]; });
        Point p(3);
        p << 3.0, 1.0, 2.0;
        Eigen::MatrixXd G = g.at(p);
        // D^2 r = r g on r^-2 dr^2 + r^2 dtheta^2
        add(u, "core.hessian_of_r_hyperbolic", "hessian",
            norm_g(G.inverse(), Eigen::MatrixXd(hessian(g, r, p) - 3.0 * G)) + std::abs(laplacian(g, r, p) - 9.0), 1e-7);
    }
    {
        MetricField flat = MetricField::generic(box_chart(3), [](auto, auto g) {
            for (int i = 0; i < 9; ++i) g[static_cast<std::size_t>(i)] = (i % 4 == 0) ? 1.0 : 0.0;
        });
        const double R = 2.0;
        GraphPatch cap = make_graph(flat.chart(), 2, [R](auto y) { return sqrt(R * R - y[0] * y[0] - y[1] * y[1]); });
        Eigen::VectorXd y(2);
        y << 0.3, -0.5;
        SurfacePoint sp = hypersurface_geometry(flat, cap, y);
        add(u, "core.sphere_mean_curvature", "mean-curvature", std::abs(sp.H - 2.0 / R) + (sp.normal - sp.x / R).norm(), 1e-9);
    }
    return u;
}

inline UnitResult hm_unit(const RunConfig& c, int N, int n) {
    UnitResult u;
    HMParams hp(N, n);
    hp.flat_scales = detail::flat_scales_for(c, n);
    HMModel m(hp);
    HMVerification a = verify_hm_identities(m, c.points, c.tol.hm, verification_fd());
    HMVerification w = verify_weight_identity(m, c.points, c.tol.weight, 1e-6, verification_fd());
    u.checks = a.checks;
    u.checks.insert(u.checks.end(), w.checks.begin(), w.checks.end());
    u.tables.push_back(a.table);
    return u;
}

inline UnitResult dataset_unit(const RunConfig& c, Dataset ds, bool builtin) {
    UnitResult u;
    using detail::add;
    const std::string tag = nn_tag(ds.N, ds.n);
    for (const auto& w : ds.validate()) u.summary["warnings"].push_back(w);
    u.summary["dataset"] = dataset_to_json(ds);

    MassResult mr = mass_functional(ds);
    const double vol = ds.torus_volume();
    add(u, "dataset.mass_quadrature_refinement " + tag, "mass", std::abs(mr.value - mr.refined), 1e-8 * std::max(1.0, std::abs(mr.refined)));
    // only the constant Fourier modes survive the integral
    double constant = ds.mass_constant();
    std::vector<double> th0(static_cast<std::size_t>(ds.n - 1), 0.0);
    for (const auto& q : ds.Q_modes)
        if (q.i == q.j && q.mode.max_wavenumber() == 0)
            constant += ds.N * q.mode.c / (ds.b[static_cast<std::size_t>(q.i)] * ds.b[static_cast<std::size_t>(q.i)]);
    for (const auto& p : ds.P_modes)
        if (p.max_wavenumber() == 0) constant += 2.0 * ds.N * p.c;
    add(u, "dataset.mass_vs_constant_modes " + tag, "mass", std::abs(mr.value - constant * vol), 1e-10 * std::max(1.0, vol));
    if (builtin) add(u, "dataset.builtin_mass_value " + tag, "mass", std::abs(mr.value + 0.05 * vol), 1e-10 * vol);
    add(u, "dataset.mass_nonpositive " + tag, "mass", mr.value, 0.0, Relation::LessEqual);
    u.summary["mass"] = json_number(mr.value);

    USolution us = solve_u_equation(ds);
    add(u, "dataset.u_equation_residual " + tag, "u-equation", us.pde_residual, 1e-10);
    // max(Lap u + source + C/2) = mean(source) + C/2 = mass / (2 vol)
    add(u, "dataset.pointwise_bound_vs_mass " + tag, "u-equation", std::abs(us.pointwise_max - mr.value / (2.0 * vol)), 1e-10);
    add(u, "dataset.pointwise_inequality " + tag, "u-equation", us.pointwise_max, 1e-12, Relation::LessEqual);

    const int N = ds.N, n = ds.n;
    if (n >= 3) {
        std::vector<double> base(ds.b.begin(), ds.b.end() - 1);
        auto good = GraphHypersurface::make(N, n, base, 2.0, 10.0, [N](auto x) {
            return pow(x[0], -double(N)) * (1.0 + 0.4 * sin(x[1]));
        });
        double worst = -kInf;
        Table t{"dataset_tame_N" + std::to_string(N) + "_n" + std::to_string(n), {"order", "exponent", "constant"}, {}};
        for (const auto& f : check_tame(good, {0, 1, 2})) {
            worst = std::max(worst, f.exponent);
            t.rows.push_back({double(f.order), f.exponent, f.constant});
        }
        add(u, "dataset.tame_graph_exponent " + tag, "tame", worst, -N + 0.1, Relation::LessEqual);
        auto bad = GraphHypersurface::make(N, n, base, 2.0, 10.0, [](auto x) { return 1.0 / x[0]; });
        add(u, "dataset.tame_rejects_slow_graph " + tag, "tame", check_tame(bad, {0})[0].exponent, -N + 0.1, Relation::Greater);
        u.tables.push_back(t);
    }

    auto S = builtin_correction(n);
    Table it{"dataset_decay_N" + std::to_string(N) + "_n" + std::to_string(n), {"delta", "order0_exponent", "order1_exponent"}, {}};
    for (double d : c.deltas) {
        Dataset dd = ds;
        dd.delta = d;
        InterpolationResult ir = decay_interpolation_check(dd, S);
        std::string dt = "(N=" + std::to_string(N) + ",n=" + std::to_string(n) + ",delta=" + format_double(d) + ")";
        add(u, "dataset.decay_order0 " + dt, "interpolation", ir.order0.exponent, -N - d + 0.1, Relation::LessEqual);
        add(u, "dataset.decay_order1 " + dt, "interpolation", ir.order1.exponent, -N - d + 0.1, Relation::LessEqual);
        it.rows.push_back({d, ir.order0.exponent, ir.order1.exponent});
    }
    u.tables.push_back(it);

    AngularEstimates a = angular_field_check(ds, S);
    add(u, "dataset.angular_lie_g " + tag, "angular-estimates", a.lie_g.exponent, a.bound_lie_g + 0.1, Relation::LessEqual);
    add(u, "dataset.angular_lie_lie_g " + tag, "angular-estimates", a.lie_lie_g.exponent, a.bound_lie_lie_g + 0.1, Relation::LessEqual);
    add(u, "dataset.angular_v_rho " + tag, "angular-estimates", a.v_rho.exponent, a.bound_v_rho + 0.1, Relation::LessEqual);
    add(u, "dataset.angular_vv_rho " + tag, "angular-estimates", a.vv_rho.exponent, a.bound_vv_rho + 0.1, Relation::LessEqual);
    add(u, "dataset.angular_connection " + tag, "angular-estimates", a.connection.exponent, a.bound_connection, Relation::Less);
    return u;
}

inline UnitResult monotonicity_unit(const RunConfig& c, int N) {
    UnitResult u;
    using detail::add;
    const std::string tag = "(N=" + std::to_string(N) + ")";
    Table kt{"kappa_N" + std::to_string(N), {"singular", "a", "max_error", "error_estimate"}, {}};
    auto max_err = [](const KappaTrajectory& t, auto closed) {
        if (t.blew_up) return kInf;
        double e = 0.0;
        for (std::size_t i = 0; i < t.s.size(); ++i) e = std::max(e, std::abs(t.kappa[i] - closed(t.s[i])));
        return e;
    };
    for (double a : {-1.0, 0.0, 1.0, 5.0}) {
        auto t = integrate_kappa(kappa_regular(1.0, a, N), 0.1, 5.0, N);
        double e = max_err(t, [a, N](double s) { return kappa_regular(s, a, N); });
        add(u, "kappa.regular_family " + std::string("(N=") + std::to_string(N) + ",a=" + format_double(a) + ")", "kappa-ode", e, 1e-8);
        kt.rows.push_back({0.0, a, e, t.error_estimate});
    }
    {
        auto t = integrate_kappa(kappa_singular(1.0, N), 0.1, 5.0, N);
        double e = max_err(t, [N](double s) { return kappa_singular(s, N); });
        add(u, "kappa.singular_family " + tag, "kappa-ode", e, 1e-8);
        kt.rows.push_back({1.0, 0.0, e, t.error_estimate});
    }
    u.tables.push_back(kt);
    {
        double e = 0.0;
        for (int i = 0; i <= 490; ++i) {
            double s = 0.1 + 0.01 * i;
            e = std::max(e, std::abs(log_length_derivative(s, N) - kappa_singular(s, N)) / std::max(1.0, std::abs(kappa_singular(s, N))));
        }
        add(u, "kappa.log_length_derivative " + tag, "length-profile", e, 1e-10);
    }
    {
        double e = 0.0;
        for (double s : {0.01, 0.5, 1.0, 2.0, 7.0})
            e = std::max(e, std::abs(std::pow(G_profile(s, N), -double(N) / (N - 1.0)) - (1.0 - F_profile(s, N) * F_profile(s, N))));
        add(u, "profiles.G_power_is_one_minus_F_squared " + tag, "profiles", e, 1e-12);
    }
    RigidityResult rr = rigidity_identities_check(N, c.points, 1e-6);
    u.checks.insert(u.checks.end(), rr.checks.begin(), rr.checks.end());
    u.tables.push_back(rr.table);
    u.summary["model2d_fitted_offset"] = json_number(rr.fitted_c);
    {
        const double l = 2.0;
        std::vector<double> grid;
        for (int i = 0; i < 40; ++i) grid.push_back(l * i / 40.0);
        IJProfile prof = compute_I_J(hm_model_surface(N), N, l, grid);
        double lo = kInf, hi = -kInf, dev = 0.0;
        for (double J : prof.J) {
            lo = std::min(lo, J);
            hi = std::max(hi, J);
            dev = std::max(dev, std::abs(J - 2.0 * std::numbers::pi));
        }
        add(u, "model2d.J_constant " + tag, "monotonicity", hi - lo, 1e-5);
        add(u, "model2d.J_equals_2pi " + tag, "monotonicity", dev, 1e-5);
        double sd = 0.0, gd = 0.0;
        for (double t : {0.1, 1.0, 3.0}) {
            sd = std::max(sd, std::abs(scalar_deficit(hm_model_surface(N), N, t)));
            gd = std::max(gd, std::abs(gradient_deficit(hm_model_surface(N), N, t)));
        }
        add(u, "model2d.scalar_deficit " + tag, "monotonicity", sd, 1e-9);
        add(u, "model2d.gradient_deficit " + tag, "monotonicity", gd, 1e-12);
        u.tables.push_back({"model2d_IJ_N" + std::to_string(N), {"s", "I", "J"}, {}});
        for (std::size_t i = 0; i < prof.s.size(); ++i) u.tables.back().rows.push_back({prof.s[i], prof.I[i], prof.J[i]});
    }
    return u;
}

inline UnitResult barrier_unit(const RunConfig& c, int N, int n) {
    BarrierConfig bc;
    bc.N = N;
    bc.n = n;
    bc.sigma = c.sigma;
    bc.tbar = c.tbar;
    bc.points = c.points;
    bc.tol_H = c.tol.barrier;
    bc.flat_scales = detail::flat_scales_for(c, n);
    BarrierReport r = verify_barriers(bc);
    UnitResult u;
    u.checks = r.checks;
    u.tables.push_back(r.table);
    u.summary["s_hat"] = json_number(r.s_hat);
    u.summary["r_barrier"] = json_number(r.r_barrier);
    u.summary["max_identity_residual"] = json_number(r.max_residual);
    u.summary["min_hm_margin"] = json_number(r.min_margin);
    return u;
}

inline UnitResult stability_unit(const RunConfig& c, int N, int n) {
    StabilityConfig sc;
    sc.N = N;
    sc.n = n;
    sc.tol_identity = c.tol.stability;
    sc.tol_flow = c.tol.flow;
    sc.seed = c.seed;
    StabilityReport r = verify_stability(sc);
    UnitResult u;
    u.checks = r.checks;
    u.tables.push_back(r.table);
    u.summary["max_jacobi_residual"] = json_number(r.max_jacobi);
    u.summary["max_second_variation_residual"] = json_number(r.max_second_variation);
    for (auto [key, f] : {std::pair{"plane_flow", &r.plane_flow}, std::pair{"sphere_flow", &r.sphere_flow},
                          std::pair{"slice_flow", &r.slice_flow}})
        u.summary[key] = {{"flow", json_number(f->flow)}, {"rhs_integral", json_number(f->rhs_integral)}};
    return u;
}

inline UnitResult radial_unit(const RunConfig& c, int N, int n) {
    RadialConfig rc;
    rc.N = N;
    rc.n = n;
    rc.deltas = c.deltas;
    RadialReport r = verify_radial(rc);
    UnitResult u;
    u.checks = r.checks;
    u.tables = {r.table, r.profiles};
    return u;
}

inline UnitResult foliation_unit(const RunConfig&, int N, int n) {
    FoliationConfig fc;
    fc.N = N;
    fc.n = n;
    FoliationReport r = verify_foliation(fc);
    UnitResult u;
    u.checks = r.checks;
    u.tables = {r.trajectories, r.leaves, r.hessian};
    for (const auto& a : r.atlases)
        u.summary["atlases"].push_back({{"metric", a.metric},
                                        {"z_fol", json_number(a.z_fol)},
                                        {"leaves", a.leaf_count},
                                        {"retries", a.retries},
                                        {"min_separation", json_number(a.min_separation)},
                                        {"decay_exponent", json_number(a.decay_fit)},
                                        {"max_deviation", json_number(a.max_deviation)}});
    return u;
}

// Work units of one suite, in report order. Parameter points outside a module's domain raise ConfigError.
inline std::vector<Unit> suite_units(const std::string& suite, const RunConfig& c) {
    std::vector<Unit> out;
    auto label = [](int N, int n) { return "N=" + std::to_string(N) + ",n=" + std::to_string(n); };
    if (suite == "core") {
        out.push_back({suite, "core", [] { return core_unit(); }});
    } else if (suite == "hm") {
        for (auto [N, n] : detail::filter_pairs(detail::all_pairs(2), c, suite))
            out.push_back({suite, label(N, n), [c, N, n] { return hm_unit(c, N, n); }});
    } else if (suite == "dataset") {
        if (!c.dataset.empty()) {
            Dataset ds = load_dataset(c.dataset);
            if ((c.N && *c.N != ds.N) || (c.n && *c.n != ds.n)) throw ConfigError("--N/--n disagree with the dataset file");
            out.push_back({suite, label(ds.N, ds.n), [c, ds] { return dataset_unit(c, ds, false); }});
        } else {
            for (auto [N, n] : detail::filter_pairs(detail::with_n3(), c, suite)) {
                Dataset ds = builtin_dataset(N, n, std::min(0.25, *std::min_element(c.deltas.begin(), c.deltas.end())));
                out.push_back({suite, label(N, n), [c, ds] { return dataset_unit(c, ds, true); }});
            }
        }
    } else if (suite == "monotonicity") {
        if (c.n && *c.n != 2 && c.command != "all") throw ConfigError("the two-dimensional model suite has n = 2");
        std::vector<int> Ns;
        if (c.N) Ns = {*c.N};
        else Ns = {3, 4, 5, 6, 7};
        for (int N : Ns) out.push_back({suite, "N=" + std::to_string(N), [c, N] { return monotonicity_unit(c, N); }});
    } else if (suite == "barrier") {
        for (auto [N, n] : detail::filter_pairs(detail::with_n3(), c, suite))
            out.push_back({suite, label(N, n), [c, N, n] { return barrier_unit(c, N, n); }});
    } else if (suite == "stability") {
        auto sweep = detail::with_n3();
        for (auto p : {std::pair{4, 4}, std::pair{5, 5}, std::pair{6, 5}, std::pair{7, 7}}) sweep.push_back(p);
        for (auto [N, n] : detail::filter_pairs(sweep, c, suite))
            out.push_back({suite, label(N, n), [c, N, n] { return stability_unit(c, N, n); }});
    } else if (suite == "radial") {
        for (auto [N, n] : detail::filter_pairs(detail::all_pairs(3), c, suite))
            out.push_back({suite, label(N, n), [c, N, n] { return radial_unit(c, N, n); }});
    } else if (suite == "foliation") {
        auto sweep = detail::with_n3();
        for (auto p : {std::pair{4, 4}, std::pair{5, 4}, std::pair{5, 5}, std::pair{6, 4}, std::pair{7, 4}}) sweep.push_back(p);
        for (auto [N, n] : detail::filter_pairs(sweep, c, suite))
            out.push_back({suite, label(N, n), [c, N, n] { return foliation_unit(c, N, n); }});
    } else {
        throw ConfigError("unknown suite '" + suite + "'");
    }
    return out;
}

// Runs a unit with crash containment: anything but a configuration error becomes a failing check.
inline UnitResult run_unit(const Unit& unit) {
    auto t0 = std::chrono::steady_clock::now();
    UnitResult r;
    try {
        r = unit.run();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        r = UnitResult{};
        r.error = e.what();
        r.checks.push_back(make_check(unit.suite + ".completed (" + unit.label + ")", "crash-containment", 1.0, 0.0,
                                      Relation::LessEqual));
    }
    r.suite = unit.suite;
    r.label = unit.label;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// Every unit of every requested suite goes through one worker pool; results come back by index.
inline std::vector<SuiteResult> run_suites(const std::vector<std::string>& suites, const RunConfig& c, int workers = 0) {
    std::vector<Unit> units;
    for (const auto& s : suites) {
        auto us = suite_units(s, c);
        units.insert(units.end(), us.begin(), us.end());
    }
    auto results = parallel_map<UnitResult>(units.size(), [&](std::size_t i) { return run_unit(units[i]); }, workers);
    std::vector<SuiteResult> out;
    for (const auto& s : suites) {
        SuiteResult sr;
        sr.name = s;
        for (auto& r : results)
            if (r.suite == s) sr.units.push_back(r);
        out.push_back(std::move(sr));
    }
    return out;
}

inline std::vector<std::string> suites_for(const RunConfig& c) {
    if (c.command == "all") return {std::begin(kSuiteNames), std::end(kSuiteNames)};
    return {suite_for_command(c.command)};
}

}  // namespace hmlab
