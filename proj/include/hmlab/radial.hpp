#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hmlab/check.hpp"
#include "hmlab/dataset.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/numerics.hpp"
#include "hmlab/parallel.hpp"
#include "hmlab/stability.hpp"

namespace hmlab {

// One torus mode of the operator -div_{g_hyp}(r^{N-n} dw) + (N-1) r^{N-n} w on (r, T^{n-2}),
// g_hyp = r^-2 dr^2 + r^2 sum b_i^2 dtheta_i^2. For w = w_k(r) e^{i k.theta}, dividing by -r^{N-n}:
//   r^2 w'' + (N-1) r w' - (lambda r^-2 + N-1) w = -r^{n-N} zeta_k.
// Internally u = r^{N-1} w and x = log r:  u'' - N u' - lambda e^{-2x} u = -e^{(n-1)x} zeta_k.
struct ModeOperator {
    int N = 4;
    int n = 3;
    double lambda = 0.0;
    double assembly_residual = 0.0;  // divergence form vs mode form at a few points

    // a^2 + (N-2) a - (N-1), roots 1 and 1-N
    double indicial(double a) const { return a * a + (N - 2) * a - (N - 1); }

    // r^2 w'' + (N-1) r w' - (lambda r^-2 + N-1) w for a generic w(r)
    template <class F>
    double apply(const F& w, double r) const {
        Jet x = Jet::variable(1, 0, r);
        Jet v = w(x);
        return r * r * v.hess(0, 0) + (N - 1) * r * v.grad(0) - (lambda / (r * r) + N - 1) * v.v;
    }
};

inline double mode_eigenvalue(const std::vector<int>& k, const std::vector<double>& b) {
    if (k.size() != b.size()) throw ConfigError("mode index has wrong length for the torus");
    double l = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) l += (k[i] / b[i]) * (k[i] / b[i]);
    return l;
}

// Builds the per-mode operator and checks it against the divergence form on the hyperbolic
// chart, applied to w = r^a cos(k.theta) through the generic metric machinery.
inline ModeOperator radial_operator_modes(int N, int n, const std::vector<int>& k, const std::vector<double>& b) {
    if (n < 3 || n > N) throw ConfigError("radial operator needs 3 <= n <= N");
    if (static_cast<int>(b.size()) != n - 2) throw ConfigError("torus scales must have n-2 entries");
    ModeOperator op;
    op.N = N;
    op.n = n;
    op.lambda = mode_eigenvalue(k, b);
    MetricField g = hyperbolic_metric(b, 1.0);
    const double a = -0.7;
    std::vector<int> kk = k;
    ScalarField w = ScalarField::generic(g.chart(), [a, kk](auto x) {
        auto ph = 0.0 * x[0];
        for (std::size_t i = 0; i < kk.size(); ++i) ph = ph + double(kk[i]) * x[i + 1];
        return pow(x[0], a) * cos(ph);
    });
    const int p = N - n;
    ScalarField rho = ScalarField::generic(g.chart(), [p](auto x) { return pow(x[0], double(p)); });
    FdOptions ex;
    ex.source = DerivativeSource::Automatic;
    for (double r : {2.5, 7.0}) {
        Point x = Point::Constant(n - 1, 0.3);
        x[0] = r;
        // div(rho dw) = rho lap w + <d rho, d w>
        ScalarJet rj = scalar_jet(rho, x, 1, ex), wj = scalar_jet(w, x, 1, ex);
        double div = rj.v * laplacian(g, w, x, ex) + rj.d.dot(checked_inverse(g.at(x)) * wj.d);
        double lhs = -div + (N - 1) * rj.v * wj.v;
        double ph = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i) ph += k[i] * x[static_cast<Eigen::Index>(i + 1)];
        double mode = -std::pow(r, double(p)) * op.apply([a](auto s) { return pow(s, a); }, r) * std::cos(ph);
        op.assembly_residual = std::max(op.assembly_residual, std::abs(lhs - mode) / std::max(1.0, std::abs(lhs)));
    }
    return op;
}

// Thomas algorithm; sub[0] and sup[n-1] are ignored.
inline std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                                             std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        double m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    return x;
}

// Second-order solve of u'' - N u' - lambda e^{-2x} u = g on [x0, x1] with Dirichlet data; M intervals.
inline std::vector<double> solve_mode_fd(const ModeOperator& op, const std::function<double(double)>& g, double x0, double x1,
                                         int M, double ua, double ub) {
    if (M < 4) throw ConfigError("radial grid needs at least 4 intervals");
    const double h = (x1 - x0) / M;
    if (op.N * h / 2 >= 1.0) throw ConfigError("radial grid too coarse for the drift term");
    std::vector<double> sub(static_cast<std::size_t>(M + 1)), diag(sub.size()), sup(sub.size()), rhs(sub.size());
    diag.front() = diag.back() = 1.0;
    rhs.front() = ua;
    rhs.back() = ub;
    for (int i = 1; i < M; ++i) {
        double x = x0 + i * h;
        const auto I = static_cast<std::size_t>(i);
        sub[I] = 1.0 / (h * h) + op.N / (2 * h);
        sup[I] = 1.0 / (h * h) - op.N / (2 * h);
        diag[I] = -2.0 / (h * h) - op.lambda * std::exp(-2 * x);
        rhs[I] = g ? g(x) : 0.0;
    }
    return solve_tridiagonal(sub, diag, sup, rhs);
}

// Richardson-combined profile on the M-interval grid (4th order).
inline std::vector<double> solve_mode(const ModeOperator& op, const std::function<double(double)>& g, double x0, double x1,
                                      int M, double ua, double ub, bool richardson = true) {
    std::vector<double> c = solve_mode_fd(op, g, x0, x1, M, ua, ub);
    if (!richardson) return c;
    std::vector<double> f = solve_mode_fd(op, g, x0, x1, 2 * M, ua, ub);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = (4.0 * f[2 * i] - c[i]) / 3.0;
    return c;
}

// Decaying homogeneous solution normalised by u -> 1 at infinity, by inward RK4 from where the
// asymptotic series 1 + lambda/(2N+4) e^{-2x} is accurate. Returns u and u' at x0.
inline std::pair<double, double> shoot_decaying(const ModeOperator& op, double x0, double x_start, int steps_per_unit = 2000) {
    double xs = std::max(x_start, 0.5 * std::log(std::max(op.lambda, 1e-300) * 1e8));
    double a = op.lambda / (2.0 * op.N + 4.0);
    Eigen::Vector2d y(1.0 + a * std::exp(-2 * xs), -2.0 * a * std::exp(-2 * xs));
    auto f = [&](double x, const Eigen::Vector2d& s) {
        return Eigen::Vector2d(s[1], op.N * s[1] + op.lambda * std::exp(-2 * x) * s[0]);
    };
    int steps = std::max(10, static_cast<int>(std::ceil((xs - x0) * steps_per_unit)));
    double h = -(xs - x0) / steps;
    double x = xs;
    for (int i = 0; i < steps; ++i, x += h) y = rk4_step(f, x, y, h);
    return {y[0], y[1]};
}

struct RadialSourceMode {
    std::vector<int> k;
    std::function<double(double)> c, s;  // zeta = c(r) cos(k.theta) + s(r) sin(k.theta); empty means 0
    double inner_c = 0.0, inner_s = 0.0;  // Dirichlet data for w at r_in
};

struct RadialProblem {
    int N = 4;
    int n = 3;
    double delta = 0.25;
    double r_in = 2.0;
    double r_out = 1e4;  // r_j, Dirichlet 0 there by default
    double outer_value = 0.0;
    std::vector<double> b;  // b_1 .. b_{n-2}; empty means all 1
    std::vector<RadialSourceMode> modes;
    int intervals = 4096;
    bool richardson = true;
    bool assert_bound = false;  // check |zeta| <= r^{1-n-delta} on the grid
    double window = 0.4;        // outer fraction of the x grid used for the A fit
};

struct ModePart {
    std::vector<double> u;      // r^{N-1} w on the grid
    std::vector<double> u_lim;  // with the outer boundary layer removed
    double A = 0.0;
    double fit_rms = 0.0;
    double layer = 0.0;  // coefficient of the boundary-layer solution
    bool active = false;
};

struct ModeSolution {
    std::vector<int> k;
    double lambda = 0.0;
    double residual = 0.0;
    double assembly_residual = 0.0;
    ModePart cos_part, sin_part;
};

struct RadialSolution {
    int N = 0;
    int n = 0;
    double delta = 0.0;
    std::vector<double> x, r;
    std::vector<ModeSolution> modes;
    double max_residual = 0.0;      // ODE residual of the u profiles, 4th-order differences
    PowerFit decay;                 // sup_theta |r^{N-1} w - A| against r
    PowerFit derivative_decay;      // sup_theta |r^N dw/dr + (N-1) A| against r
    double decay_sup = 0.0;
    bool contaminated = false;

    double w(std::size_t i, const std::vector<double>& theta) const {
        double u = 0.0;
        for (const auto& m : modes) {
            double ph = 0.0;
            for (std::size_t a = 0; a < m.k.size(); ++a) ph += m.k[a] * theta[a];
            if (m.cos_part.active) u += m.cos_part.u[i] * std::cos(ph);
            if (m.sin_part.active) u += m.sin_part.u[i] * std::sin(ph);
        }
        return u * std::pow(r[i], 1.0 - N);
    }
    double A(const std::vector<double>& theta) const {
        double v = 0.0;
        for (const auto& m : modes) {
            double ph = 0.0;
            for (std::size_t a = 0; a < m.k.size(); ++a) ph += m.k[a] * theta[a];
            v += m.cos_part.A * std::cos(ph) + m.sin_part.A * std::sin(ph);
        }
        return v;
    }
};

namespace detail {

// 4th-order first and second differences on a uniform grid (one-sided near the ends).
inline std::vector<double> grid_derivative(const std::vector<double>& u, double h) {
    const std::size_t n = u.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= 2 && i + 2 < n)
            d[i] = (u[i - 2] - 8 * u[i - 1] + 8 * u[i + 1] - u[i + 2]) / (12 * h);
        else if (i < 2)
            d[i] = (-25 * u[i] + 48 * u[i + 1] - 36 * u[i + 2] + 16 * u[i + 3] - 3 * u[i + 4]) / (12 * h);
        else
            d[i] = (25 * u[i] - 48 * u[i - 1] + 36 * u[i - 2] - 16 * u[i - 3] + 3 * u[i - 4]) / (12 * h);
    }
    return d;
}

inline ModePart solve_part(const ModeOperator& op, const std::function<double(double)>& zeta, const RadialProblem& pb,
                           double x0, double x1, double u_in, double u_out, const std::vector<double>& layer,
                           std::vector<double>& residuals) {
    const int n = pb.n;
    auto g = [&](double x) { return zeta ? -std::exp((n - 1) * x) * zeta(std::exp(x)) : 0.0; };
    ModePart p;
    p.active = true;
    p.u = solve_mode(op, g, x0, x1, pb.intervals, u_in, u_out, pb.richardson);
    const int M = pb.intervals;
    const double h = (x1 - x0) / M;
    // residual on interior points away from the one-sided stencils
    for (int i = 2; i <= M - 2; ++i) {
        const auto I = static_cast<std::size_t>(i);
        double x = x0 + i * h;
        double uxx = (-p.u[I - 2] + 16 * p.u[I - 1] - 30 * p.u[I] + 16 * p.u[I + 1] - p.u[I + 2]) / (12 * h * h);
        double ux = (p.u[I - 2] - 8 * p.u[I - 1] + 8 * p.u[I + 1] - p.u[I + 2]) / (12 * h);
        residuals[I] = std::max(residuals[I], std::abs(uxx - op.N * ux - op.lambda * std::exp(-2 * x) * p.u[I] - g(x)));
    }
    // u ~ A + B r^-delta (+ D r^-2) + c * layer over the outer window
    int first = static_cast<int>(std::floor((1.0 - pb.window) * M));
    int cols = op.lambda > 0.0 ? 4 : 3;
    Eigen::MatrixXd X(M + 1 - first, cols);
    Eigen::VectorXd y(M + 1 - first);
    for (int i = first; i <= M; ++i) {
        double x = x0 + i * h;
        int row = i - first;
        X(row, 0) = 1.0;
        X(row, 1) = std::exp(-pb.delta * x);
        X(row, 2) = layer[static_cast<std::size_t>(i)];
        if (cols == 4) X(row, 3) = std::exp(-2 * x);
        y[row] = p.u[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd c = X.colPivHouseholderQr().solve(y);
    p.A = c[0];
    p.layer = c[2];
    p.fit_rms = std::sqrt((X * c - y).squaredNorm() / static_cast<double>(y.size()));
    p.u_lim.resize(p.u.size());
    for (std::size_t i = 0; i < p.u.size(); ++i) p.u_lim[i] = p.u[i] - p.layer * layer[i];
    return p;
}

}  // namespace detail

inline RadialSolution solve_radial(const RadialProblem& pb) {
    if (pb.n < 3 || pb.n > pb.N) throw ConfigError("radial problem needs 3 <= n <= N");
    if (!(pb.delta > 0.0 && pb.delta <= 0.5)) throw ConfigError("delta must lie in (0, 1/2]");
    if (!(pb.r_in > 0.0 && pb.r_out > pb.r_in)) throw ConfigError("radial range must satisfy 0 < r_in < r_out");
    if (std::log10(pb.r_out / pb.r_in) < 2.5) throw ConfigError("radial grid must cover at least 2.5 decades");
    std::vector<double> b = pb.b.empty() ? std::vector<double>(static_cast<std::size_t>(pb.n - 2), 1.0) : pb.b;
    if (static_cast<int>(b.size()) != pb.n - 2) throw ConfigError("torus scales must have n-2 entries");

    RadialSolution sol;
    sol.N = pb.N;
    sol.n = pb.n;
    sol.delta = pb.delta;
    const int M = pb.intervals;
    const double x0 = std::log(pb.r_in), x1 = std::log(pb.r_out), h = (x1 - x0) / M;
    for (int i = 0; i <= M; ++i) {
        sol.x.push_back(x0 + i * h);
        sol.r.push_back(std::exp(x0 + i * h));
    }
    if (pb.assert_bound) {
        for (double r : sol.r) {
            double s = 0.0;
            for (const auto& m : pb.modes) s += (m.c ? std::abs(m.c(r)) : 0.0) + (m.s ? std::abs(m.s(r)) : 0.0);
            if (s > std::pow(r, 1.0 - pb.n - pb.delta) * (1 + 1e-12))
                throw DomainError("source exceeds r^(1-n-delta) at r = " + std::to_string(r));
        }
    }
    const double in_scale = std::pow(pb.r_in, pb.N - 1.0), out_u = pb.outer_value * std::pow(pb.r_out, pb.N - 1.0);

    sol.modes = parallel_map<ModeSolution>(pb.modes.size(), [&](std::size_t mi) {
        const RadialSourceMode& src = pb.modes[mi];
        ModeOperator op = radial_operator_modes(pb.N, pb.n, src.k, b);
        ModeSolution ms;
        ms.k = src.k;
        ms.lambda = op.lambda;
        ms.assembly_residual = op.assembly_residual;
        std::vector<double> res(sol.x.size(), 0.0);
        std::vector<double> layer = solve_mode(op, {}, x0, x1, M, 0.0, 1.0, pb.richardson);
        // the outer value belongs to the constant mode only
        bool zero_mode = std::all_of(src.k.begin(), src.k.end(), [](int v) { return v == 0; });
        ms.cos_part = detail::solve_part(op, src.c, pb, x0, x1, src.inner_c * in_scale, zero_mode ? out_u : 0.0, layer, res);
        if (src.s || src.inner_s != 0.0)
            ms.sin_part = detail::solve_part(op, src.s, pb, x0, x1, src.inner_s * in_scale, 0.0, layer, res);
        ms.residual = *std::max_element(res.begin(), res.end());
        return ms;
    });

    // sup over the torus of the remainders, bounded mode by mode by sqrt(c^2 + s^2)
    std::vector<double> rem(sol.x.size(), 0.0), drem(sol.x.size(), 0.0);
    double scale = 0.0;
    for (const auto& m : sol.modes) {
        sol.max_residual = std::max(sol.max_residual, m.residual);
        std::vector<double> rc(sol.x.size(), 0.0), rs(rc), dc(rc), ds(rc);
        auto fill = [&](const ModePart& p, std::vector<double>& R, std::vector<double>& D) {
            if (!p.active) return;
            std::vector<double> du = detail::grid_derivative(p.u_lim, h);
            for (std::size_t i = 0; i < R.size(); ++i) {
                R[i] = p.u_lim[i] - p.A;
                D[i] = du[i] - (pb.N - 1) * R[i];  // r^N dw/dr + (N-1) A in terms of u
            }
            scale = std::max(scale, std::abs(p.A));
        };
        fill(m.cos_part, rc, dc);
        fill(m.sin_part, rs, ds);
        for (std::size_t i = 0; i < rem.size(); ++i) {
            rem[i] += std::hypot(rc[i], rs[i]);
            drem[i] += std::hypot(dc[i], ds[i]);
        }
    }
    // fit over the grid past the first tenth (the inner end carries the data, not the asymptotics)
    std::vector<double> fr, fy, fd;
    for (std::size_t i = static_cast<std::size_t>(M / 10); i < sol.r.size(); i += 8) {
        fr.push_back(sol.r[i]);
        fy.push_back(rem[i]);
        fd.push_back(drem[i]);
    }
    sol.decay_sup = *std::max_element(fy.begin(), fy.end());
    const double floor = 1e-9 * std::max(1.0, scale);
    if (sol.decay_sup < floor) {
        sol.decay.exponent = sol.derivative_decay.exponent = -std::numeric_limits<double>::infinity();
    } else {
        sol.decay = fit_power_law(fr, fy);
        sol.derivative_decay = fit_power_law(fr, fd);
        // growth contamination: the remainder should not rise towards the outer end
        std::size_t q = fy.size() / 10;
        double head = *std::max_element(fy.begin(), fy.begin() + static_cast<std::ptrdiff_t>(q + 1));
        double tail = *std::max_element(fy.end() - static_cast<std::ptrdiff_t>(q + 1), fy.end());
        sol.contaminated = tail > 10.0 * head;
    }
    if (sol.contaminated) throw ConvergenceError("growth-mode contamination in r^(N-1) w near the outer boundary");
    return sol;
}

// Discrete operator -(u'' - N u') + lambda e^{-2x} u at interior nodes (second order); zero at the ends.
// It is a positive multiple of the divergence-form operator, so orderings transfer.
inline std::vector<double> discrete_operator(const ModeOperator& op, double x0, double x1, const std::vector<double>& u) {
    const std::size_t M = u.size() - 1;
    const double h = (x1 - x0) / static_cast<double>(M);
    std::vector<double> out(u.size(), 0.0);
    for (std::size_t i = 1; i < M; ++i) {
        double x = x0 + static_cast<double>(i) * h;
        out[i] = -((u[i + 1] - 2 * u[i] + u[i - 1]) / (h * h) - op.N * (u[i + 1] - u[i - 1]) / (2 * h)) +
                 op.lambda * std::exp(-2 * x) * u[i];
    }
    return out;
}

struct ComparisonResult {
    bool premise = false;  // L sub <= L super inside and sub <= super at both ends
    bool ordered = false;  // sub <= super on the grid
    double min_gap = 0.0;  // min (super - sub)
};

inline ComparisonResult comparison_principle_check(const ModeOperator& op, double x0, double x1, const std::vector<double>& sub,
                                                   const std::vector<double>& super) {
    if (sub.size() != super.size() || sub.size() < 3) throw ConfigError("comparison profiles must share a grid");
    std::vector<double> ls = discrete_operator(op, x0, x1, sub), lS = discrete_operator(op, x0, x1, super);
    ComparisonResult c;
    c.premise = sub.front() <= super.front() && sub.back() <= super.back();
    for (std::size_t i = 1; i + 1 < sub.size(); ++i) c.premise = c.premise && ls[i] <= lS[i];
    c.min_gap = kInf;
    for (std::size_t i = 0; i < sub.size(); ++i) c.min_gap = std::min(c.min_gap, super[i] - sub[i]);
    c.ordered = c.min_gap >= 0.0;
    if (c.premise && !c.ordered) throw ConvergenceError("discrete comparison principle violated");
    return c;
}

// -L(r^{-N-delta} vbar) / r^{1-n-delta} at the given radii, with L the weighted Jacobi operator of the
// slice and vbar its Killing normal. Tends to b delta (N + delta).
inline std::vector<double> jacobi_test_function_coefficients(const StationarySurface& s, int N, int n, double delta,
                                                             const std::vector<double>& radii, double other = 0.3) {
    const int k = s.patch.height_axis;
    MetricField g = s.amb.metric;
    GraphPatch patch = s.patch;
    ScalarField f = ScalarField::from_values(s.parameter_chart(), [g, patch, k, N, delta](const Point& y) {
        return std::pow(y[0], -N - delta) * std::sqrt(g.at(patch.embed(y))(k, k));
    });
    std::vector<double> out;
    for (double r : radii) {
        Eigen::VectorXd y = Eigen::VectorXd::Constant(n - 1, other);
        y[0] = r;
        out.push_back(-weighted_jacobi(s, f, y) / std::pow(r, 1.0 - n - delta));
    }
    return out;
}

// Hyperbolic slice {theta_{n-2} = const} in r^-2 dr^2 + r^2 sum b_i^2 dtheta_i^2 with weight r^{N-n}.
inline StationarySurface hyperbolic_slice_surface(int N, int n, const std::vector<double>& b) {
    MetricField g = hyperbolic_metric(b, 1.0);
    const int p = N - n;
    ScalarField rho = ScalarField::generic(g.chart(), [p](auto x) { return pow(x[0], double(p)); });
    GraphPatch patch = make_graph(g.chart(), n - 1, [](auto y) { return 0.0 * y[0] + 0.4; }, 1);
    return StationarySurface::make({g, rho}, patch);
}

struct HolderResult {
    double C = 0.0;        // sup of |w o phi_s - w| / (r^{1-N} |s|^{delta/2})
    double C_small = 0.0;  // restricted to |s| <= s_split
    double C_large = 0.0;
};

// Translation along the first torus direction by arc length s (unit parallel field b_1^-1 d/dtheta_1).
// The sup over the torus is bounded mode by mode by 2 |sin(k_1 s / 2 b_1)| sqrt(u_c^2 + u_s^2).
inline HolderResult holder_translation_check(const RadialSolution& sol, const std::vector<double>& b, const std::vector<double>& s_values,
                                             double s_split) {
    HolderResult h;
    for (double s : s_values) {
        for (std::size_t i = 0; i < sol.r.size(); i += 16) {
            double d = 0.0;
            for (const auto& m : sol.modes) {
                if (m.k.empty()) continue;
                double a = m.k[0] * s / b[0];
                double uc = m.cos_part.active ? m.cos_part.u[i] : 0.0, us = m.sin_part.active ? m.sin_part.u[i] : 0.0;
                d += 2.0 * std::abs(std::sin(0.5 * a)) * std::hypot(uc, us);
            }
            double ratio = d / std::pow(std::abs(s), 0.5 * sol.delta);
            h.C = std::max(h.C, ratio);
            double& slot = std::abs(s) <= s_split ? h.C_small : h.C_large;
            slot = std::max(slot, ratio);
        }
    }
    return h;
}

// ---- report ---------------------------------------------------------------

struct RadialConfig {
    int N = 4;
    int n = 3;
    std::vector<double> deltas{0.1, 0.25, 0.5};
    double r_in = 2.0;
    double r_out = 1e4;
    int intervals = 4096;
};

struct RadialReport {
    std::vector<Check> checks;
    Table table;     // delta, A, A_doubled, oracle_A, decay_exponent, derivative_exponent, residual
    Table profiles;  // r, u per delta (subsampled)
};

inline RadialReport verify_radial(const RadialConfig& cfg) {
    const int N = cfg.N, n = cfg.n;
    const std::string tag = "(N=" + std::to_string(N) + ",n=" + std::to_string(n) + ")";
    RadialReport rep;
    auto add = [&](std::string name, std::string ref, double v, double thr, Relation r = Relation::Less) {
        rep.checks.push_back(make_check("radial." + std::move(name), std::move(ref), v, thr, r));
    };
    const std::vector<double> ones(static_cast<std::size_t>(n - 2), 1.0);
    std::vector<int> k0(static_cast<std::size_t>(n - 2), 0), k1 = k0;
    k1[0] = 1;
    ModeOperator op0 = radial_operator_modes(N, n, k0, ones), op1 = radial_operator_modes(N, n, k1, ones);

    double hom = 0.0;
    for (double r : {2.0, 10.0, 1e3}) {
        hom = std::max(hom, std::abs(op0.apply([](auto x) { return x; }, r)) / r);
        hom = std::max(hom, std::abs(op0.apply([N](auto x) { return pow(x, 1.0 - N); }, r)) / std::pow(r, 1.0 - N));
    }
    add("homogeneous_solutions_annihilated " + tag, "radial-operator", hom, 1e-10);
    add("indicial_roots " + tag, "radial-operator", std::abs(op0.indicial(1.0)) + std::abs(op0.indicial(1.0 - N)), 1e-12);
    add("divergence_form_assembly " + tag, "radial-operator", std::max(op0.assembly_residual, op1.assembly_residual), 1e-8);

    const double x0 = std::log(cfg.r_in), x1 = std::log(cfg.r_out);
    {
        // zeta = 0, w(r_in) = r_in^{1-N}, w(r_out) = 0: u = c1 r^N + c2
        RadialProblem pb;
        pb.N = N;
        pb.n = n;
        pb.r_in = cfg.r_in;
        pb.r_out = cfg.r_out;
        pb.intervals = cfg.intervals;
        pb.modes = {RadialSourceMode{k0, {}, {}, std::pow(cfg.r_in, 1.0 - N), 0.0}};
        RadialSolution sol = solve_radial(pb);
        // u = (r_out^N - r^N) / (r_out^N - r_in^N), written in ratios to stay finite
        double err = 0.0;
        for (std::size_t i = 0; i < sol.r.size(); ++i) {
            double a = std::pow(sol.r[i] / cfg.r_out, N), b = std::pow(cfg.r_in / cfg.r_out, N);
            err = std::max(err, std::abs(sol.modes[0].cos_part.u[i] - (1.0 - a) / (1.0 - b)));
        }
        add("homogeneous_bvp_closed_form " + tag, "radial-solve", err, 1e-9);
        auto [d0, d0p] = shoot_decaying(op0, x0, x1);
        (void)d0p;
        add("pure_decay_A_vs_shooting (k=0) " + tag, "radial-solve", std::abs(sol.modes[0].cos_part.A - 1.0 / d0), 1e-8);

        pb.modes = {RadialSourceMode{k1, {}, {}, std::pow(cfg.r_in, 1.0 - N), 0.0}};
        RadialSolution s1 = solve_radial(pb);
        auto [d1, d1p] = shoot_decaying(op1, x0, x1);
        (void)d1p;
        add("pure_decay_A_vs_shooting (k=1) " + tag, "radial-solve", std::abs(s1.modes[0].cos_part.A - 1.0 / d1), 1e-8);
    }

    rep.table.name = "radial_N" + std::to_string(N) + "_n" + std::to_string(n);
    rep.table.header = {"delta", "A", "A_doubled", "A_oracle", "decay_exponent", "derivative_exponent", "ode_residual"};
    rep.profiles.name = "radial_profiles_N" + std::to_string(N) + "_n" + std::to_string(n);
    rep.profiles.header = {"r"};
    std::vector<RadialSolution> sols;
    for (double delta : cfg.deltas) {
        RadialProblem pb;
        pb.N = N;
        pb.n = n;
        pb.delta = delta;
        pb.r_in = cfg.r_in;
        pb.r_out = cfg.r_out;
        pb.intervals = cfg.intervals;
        pb.assert_bound = true;
        pb.modes = {RadialSourceMode{k0, [n, delta](double r) { return std::pow(r, 1.0 - n - delta); }, {}, 0.0, 0.0}};
        RadialSolution sol = solve_radial(pb);
        RadialProblem pb2 = pb;
        pb2.intervals = 2 * cfg.intervals;
        RadialSolution sol2 = solve_radial(pb2);
        double A = sol.modes[0].cos_part.A, A2 = sol2.modes[0].cos_part.A;
        double A_or = std::pow(cfg.r_in, -delta) / (delta * (N + delta));
        std::string dt = "(N=" + std::to_string(N) + ",n=" + std::to_string(n) + ",delta=" + std::to_string(delta).substr(0, 4) + ")";
        add("A_stable_under_doubling " + dt, "radial-asymptotics", std::abs(A - A2), 1e-6);
        add("A_matches_power_source_oracle " + dt, "radial-asymptotics", std::abs(A - A_or), 1e-8);
        add("decay_exponent " + dt, "radial-asymptotics", sol.decay.exponent, -delta / 10, Relation::LessEqual);
        add("radial_derivative_exponent " + dt, "radial-asymptotics", sol.derivative_decay.exponent, -delta / 10, Relation::LessEqual);
        add("ode_residual " + dt, "radial-solve", sol.max_residual, 1e-6);
        rep.table.rows.push_back({delta, A, A2, A_or, sol.decay.exponent, sol.derivative_decay.exponent, sol.max_residual});
        rep.profiles.header.push_back("u_delta_" + std::to_string(delta).substr(0, 4));
        sols.push_back(std::move(sol));
    }
    for (std::size_t i = 0; i < sols[0].r.size(); i += 64) {
        std::vector<double> row{sols[0].r[i]};
        for (const auto& s : sols) row.push_back(s.modes[0].cos_part.u[i]);
        rep.profiles.rows.push_back(row);
    }

    {
        // second-order convergence of the unextrapolated solve on the power-source oracle
        const double delta = 0.25;
        const double C = -1.0 / (delta * (N + delta));
        auto g = [n, delta](double x) { return -std::exp((n - 1) * x) * std::pow(std::exp(x), 1.0 - n - delta); };
        Eigen::Matrix2d Mx;
        Mx << 1.0, std::exp(N * (x0 - x1)), 1.0, 1.0;
        Eigen::Vector2d c = Mx.colPivHouseholderQr().solve(Eigen::Vector2d(-C * std::exp(-delta * x0), -C * std::exp(-delta * x1)));
        auto exact = [&](double x) { return C * std::exp(-delta * x) + c[0] + c[1] * std::exp(N * (x - x1)); };
        auto err = [&](int M) {
            std::vector<double> u = solve_mode_fd(op0, g, x0, x1, M, 0.0, 0.0);
            double e = 0.0;
            for (int i = 0; i <= M; ++i) e = std::max(e, std::abs(u[static_cast<std::size_t>(i)] - exact(x0 + i * (x1 - x0) / M)));
            return e;
        };
        add("second_order_refinement_ratio " + tag, "radial-solve", err(1024) / err(2048), 3.5, Relation::Greater);
    }

    {
        // a single-mode source stays in its mode
        RadialProblem pb;
        pb.N = N;
        pb.n = n;
        pb.r_in = cfg.r_in;
        pb.r_out = cfg.r_out;
        pb.intervals = cfg.intervals / 4;
        pb.modes = {RadialSourceMode{k1, [n](double r) { return 0.5 * std::pow(r, 1.0 - n - 0.25); }, {}, 0.0, 0.0}};
        RadialSolution sol = solve_radial(pb);
        TorusGrid tg{n - 2, 16};
        std::size_t i = sol.r.size() / 2;
        std::vector<std::complex<double>> data;
        for (std::size_t j = 0; j < tg.size(); ++j) data.emplace_back(sol.w(i, tg.point(j)), 0.0);
        data = detail::torus_fft(tg, data, FFTW_FORWARD);
        double in = 0.0, out = 0.0;
        for (std::size_t j = 0; j < data.size(); ++j) {
            std::vector<int> kk = tg.wavenumber(j);
            bool own = true;
            for (std::size_t a = 0; a < kk.size(); ++a) own = own && std::abs(kk[a]) == std::abs(k1[a]);
            (own ? in : out) += std::norm(data[j]);
        }
        add("mode_decoupling " + tag, "radial-modes", out / in, 1e-12);

        // translation estimate on a two-mode source
        std::vector<int> k2 = k0;
        k2[0] = 2;
        pb.modes = {RadialSourceMode{k1, [n](double r) { return 0.4 * std::pow(r, 1.0 - n - 0.25); }, {}, 0.0, 0.0},
                    RadialSourceMode{k2, {}, [n](double r) { return 0.3 * std::pow(r, 1.0 - n - 0.25); }, 0.0, 0.0}};
        pb.delta = 0.25;
        RadialSolution two = solve_radial(pb);
        std::vector<double> ss;
        for (int e = -30; e <= 5; ++e) ss.push_back(std::pow(2.0, e / 5.0) * 0.5);
        HolderResult hr = holder_translation_check(two, ones, ss, 0.1);
        add("translation_estimate_bounded " + tag, "holder-translation", hr.C, 1e3);
        add("translation_estimate_small_shift " + tag, "holder-translation", hr.C_small, hr.C_large, Relation::LessEqual);
    }

    {
        // comparison principle
        const int M = 512;
        std::vector<double> zero(M + 1, 0.0), one(M + 1, 1.0);
        auto c1 = comparison_principle_check(op0, x0, x1, zero, one);
        auto c2 = comparison_principle_check(op1, x0, x1, zero, one);
        add("comparison_zero_below_decaying " + tag, "comparison", (c1.premise && c1.ordered && c2.premise && c2.ordered) ? 1.0 : 0.0, 1.0,
            Relation::GreaterEqual);
        // barrier K (1 - r^-delta) in u form dominates the solution for |zeta| <= r^{1-n-delta}
        const double delta = 0.25, K = 1.0 / (delta * (N + delta));
        RadialProblem pb;
        pb.N = N;
        pb.n = n;
        pb.delta = delta;
        pb.r_in = cfg.r_in;
        pb.r_out = cfg.r_out;
        pb.intervals = cfg.intervals;
        pb.assert_bound = true;
        pb.modes = {RadialSourceMode{k0, [n, delta](double r) { return std::pow(r, 1.0 - n - delta) * (0.5 + 0.5 * std::sin(3 * std::log(r))); }, {}, 0.0, 0.0}};
        RadialSolution sol = solve_radial(pb);
        double gap = kInf;
        for (std::size_t i = 0; i < sol.r.size(); ++i) {
            double barrier = K * (1.0 - std::pow(sol.r[i], -delta));
            double u = sol.modes[0].cos_part.u[i];
            gap = std::min({gap, barrier - u, barrier + u});
        }
        add("barrier_dominates_solution " + tag, "comparison", gap, 0.0, Relation::GreaterEqual);
    }

    {
        const double delta = 0.25;
        std::vector<double> b(static_cast<std::size_t>(n - 1), 1.0);
        b.back() = 1.7;
        StationarySurface hs = hyperbolic_slice_surface(N, n, b);
        std::vector<double> radii{3.0, 10.0, 40.0};
        double worst = 0.0;
        for (double c : jacobi_test_function_coefficients(hs, N, n, delta, radii))
            worst = std::max(worst, std::abs(c / (b.back() * delta * (N + delta)) - 1.0));
        add("test_function_coefficient_hyperbolic " + tag, "jacobi-test-function", worst, 1e-6);
        HMParams hp(N, N);
        StationarySurface hm = hm_slice_surface(HMModel(hp), 0.4);
        std::vector<double> far{50.0, 100.0, 200.0};
        double worst_hm = 0.0;
        for (double c : jacobi_test_function_coefficients(hm, N, N, delta, far))
            worst_hm = std::max(worst_hm, std::abs(c / (1.0 * delta * (N + delta)) - 1.0));
        add("test_function_coefficient_hm (n=N=" + std::to_string(N) + ")", "jacobi-test-function", worst_hm, 1e-2);
    }
    return rep;
}

}  // namespace hmlab
