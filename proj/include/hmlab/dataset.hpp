#pragma once

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "hmlab/check.hpp"
#include "hmlab/curvature.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/numerics.hpp"

namespace hmlab {

// c cos(k.theta) + s sin(k.theta) on T^{n-1}.
struct FourierMode {
    std::vector<int> k;
    double c = 0.0;
    double s = 0.0;

    template <class T>
    T eval(std::span<const T> theta) const {
        T phase = T(0.0);
        for (std::size_t j = 0; j < k.size(); ++j) phase = phase + double(k[j]) * theta[j];
        return c * cos(phase) + s * sin(phase);
    }
    int max_wavenumber() const {
        int m = 0;
        for (int v : k) m = std::max(m, std::abs(v));
        return m;
    }
};

// A band-limited symmetric tensor component Q_ij (and Q_ji).
struct TensorMode {
    int i = 0, j = 0;
    FourierMode mode;
};

template <class T>
T sum_modes(const std::vector<FourierMode>& modes, std::span<const T> theta) {
    T v = T(0.0);
    for (const auto& m : modes) v = v + m.eval(theta);
    return v;
}

template <class T>
T tensor_component(const std::vector<TensorMode>& modes, int a, int b, std::span<const T> theta) {
    T v = T(0.0);
    for (const auto& m : modes)
        if ((m.i == a && m.j == b) || (m.i == b && m.j == a)) v = v + m.mode.eval(theta);
    return v;
}

struct Dataset {
    int N = 3;
    int n = 3;
    std::vector<double> b;  // b_0 .. b_{n-2}
    double r0 = 10.0;
    double delta = 0.25;
    std::vector<TensorMode> Q_modes;
    std::vector<FourierMode> P_modes;

    int torus_dim() const { return n - 1; }

    // Throws ConfigError; returns warnings.
    std::vector<std::string> validate() const {
        if (N < 3) throw ConfigError("dataset needs N >= 3");
        if (n < 2 || n > N) throw ConfigError("dataset needs 2 <= n <= N");
        if (static_cast<int>(b.size()) != n - 1) throw ConfigError("dataset needs n-1 scales b_0..b_{n-2}");
        for (double v : b)
            if (!(v > 0.0)) throw ConfigError("dataset scales must be positive");
        if (!(r0 > 0.0)) throw ConfigError("dataset r0 must be positive");
        if (!(delta > 0.0 && delta <= 0.5)) throw ConfigError("dataset delta must lie in (0, 1/2]");
        auto check_k = [&](const std::vector<int>& k) {
            if (static_cast<int>(k.size()) != n - 1) throw ConfigError("mode multi-index must have n-1 entries");
        };
        for (const auto& m : Q_modes) {
            check_k(m.mode.k);
            if (m.i < 0 || m.j < 0 || m.i > n - 2 || m.j > n - 2) throw ConfigError("Q mode index out of range");
        }
        for (const auto& m : P_modes) check_k(m.k);
        std::vector<std::string> w;
        if (delta > 0.25) w.push_back("delta > 1/4: smallness of delta is assumed, results may be loose");
        return w;
    }

    int max_wavenumber() const {
        int m = 0;
        for (const auto& q : Q_modes) m = std::max(m, q.mode.max_wavenumber());
        for (const auto& p : P_modes) m = std::max(m, p.max_wavenumber());
        return m;
    }

    double mass_constant() const { return std::pow(2.0 / (N * b[0]), N); }

    template <class T>
    T trace_Q(std::span<const T> theta) const {
        T t = T(0.0);
        for (int k = 0; k < n - 1; ++k) t = t + tensor_component(Q_modes, k, k, theta) / (b[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(k)]);
        return t;
    }
    template <class T>
    T P(std::span<const T> theta) const {
        return sum_modes(P_modes, theta);
    }
    // (N/2) tr Q + N P
    template <class T>
    T u_source(std::span<const T> theta) const {
        return 0.5 * N * trace_Q(theta) + double(N) * P(theta);
    }
    double torus_volume() const {
        double v = std::pow(kTwoPi, n - 1);
        for (double x : b) v *= x;
        return v;
    }
};

// JSON: Q_modes entries are [[i, j], k, c, s], P_modes entries are [k, c, s].
inline nlohmann::json dataset_to_json(const Dataset& d) {
    nlohmann::json j;
    j["N"] = d.N;
    j["n"] = d.n;
    j["b"] = d.b;
    j["r0"] = d.r0;
    j["delta"] = d.delta;
    j["Q_modes"] = nlohmann::json::array();
    for (const auto& m : d.Q_modes) j["Q_modes"].push_back({{m.i, m.j}, m.mode.k, m.mode.c, m.mode.s});
    j["P_modes"] = nlohmann::json::array();
    for (const auto& m : d.P_modes) j["P_modes"].push_back({m.k, m.c, m.s});
    return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
    Dataset d;
    try {
        for (const char* key : {"N", "n", "b", "r0", "delta", "Q_modes", "P_modes"})
            if (!j.contains(key)) throw ConfigError(std::string("dataset JSON lacks key ") + key);
        d.N = j.at("N").get<int>();
        d.n = j.at("n").get<int>();
        d.b = j.at("b").get<std::vector<double>>();
        d.r0 = j.at("r0").get<double>();
        d.delta = j.at("delta").get<double>();
        for (const auto& e : j.at("Q_modes")) {
            if (!e.is_array() || e.size() != 4 || e[0].size() != 2) throw ConfigError("Q_modes entry must be [[i,j], k, c, s]");
            d.Q_modes.push_back({e[0][0].get<int>(), e[0][1].get<int>(),
                                 FourierMode{e[1].get<std::vector<int>>(), e[2].get<double>(), e[3].get<double>()}});
        }
        for (const auto& e : j.at("P_modes")) {
            if (!e.is_array() || e.size() != 3) throw ConfigError("P_modes entry must be [k, c, s]");
            d.P_modes.push_back(FourierMode{e[0].get<std::vector<int>>(), e[1].get<double>(), e[2].get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed dataset JSON: ") + e.what());
    }
    d.validate();
    return d;
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("dataset file is not JSON: " + std::string(e.what()));
    }
    return dataset_from_json(j);
}

// Uniform tensor grid on T^d with M points per axis, row-major, last axis fastest.
struct TorusGrid {
    int d = 1;
    int M = 8;
    std::size_t size() const { return static_cast<std::size_t>(std::pow(M, d)); }
    std::vector<double> point(std::size_t idx) const {
        std::vector<double> th(static_cast<std::size_t>(d));
        for (int a = d - 1; a >= 0; --a) {
            th[static_cast<std::size_t>(a)] = kTwoPi * static_cast<double>(idx % static_cast<std::size_t>(M)) / M;
            idx /= static_cast<std::size_t>(M);
        }
        return th;
    }
    std::vector<int> wavenumber(std::size_t idx) const {
        std::vector<int> k(static_cast<std::size_t>(d));
        for (int a = d - 1; a >= 0; --a) {
            int i = static_cast<int>(idx % static_cast<std::size_t>(M));
            k[static_cast<std::size_t>(a)] = i <= M / 2 ? i : i - M;
            idx /= static_cast<std::size_t>(M);
        }
        return k;
    }
    template <class F>
    std::vector<double> sample(const F& f) const {
        std::vector<double> v(size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto th = point(i);
            v[i] = f(std::span<const double>(th));
        }
        return v;
    }
};

// Smallest power of two resolving wavenumbers up to kmax without aliasing (at least 8).
inline int grid_size_for(int kmax) {
    int M = 8;
    while (M <= 2 * kmax + 1) M *= 2;
    return M;
}

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

inline std::vector<std::complex<double>> torus_fft(const TorusGrid& g, std::vector<std::complex<double>> data, int sign) {
    std::vector<int> dims(static_cast<std::size_t>(g.d), g.M);
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft(g.d, dims.data(), p, p, sign, FFTW_ESTIMATE);
    }
    if (!plan) throw ConvergenceError("FFTW planning failed");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return data;
}
}  // namespace detail

// Spectral multiplier applied to grid values: F^-1 [ m(k) F v ].
template <class Mult>
std::vector<double> apply_multiplier(const TorusGrid& g, const std::vector<double>& v, const Mult& mult) {
    std::vector<std::complex<double>> c(v.begin(), v.end());
    c = detail::torus_fft(g, std::move(c), FFTW_FORWARD);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= mult(g.wavenumber(i));
    c = detail::torus_fft(g, std::move(c), FFTW_BACKWARD);
    std::vector<double> out(v.size());
    double scale = 1.0 / static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = c[i].real() * scale;
    return out;
}

inline double gamma_wavenumber_sq(const std::vector<double>& b, const std::vector<int>& k) {
    double s = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) s += (k[j] / b[j]) * (k[j] / b[j]);
    return s;
}

inline std::vector<double> torus_laplacian(const TorusGrid& g, const std::vector<double>& b, const std::vector<double>& v) {
    return apply_multiplier(g, v, [&](const std::vector<int>& k) { return -gamma_wavenumber_sq(b, k); });
}

// Mean-zero solution of Lap_gamma u = f - mean(f).
inline std::vector<double> torus_poisson(const TorusGrid& g, const std::vector<double>& b, const std::vector<double>& f) {
    return apply_multiplier(g, f, [&](const std::vector<int>& k) {
        double q = gamma_wavenumber_sq(b, k);
        return q == 0.0 ? 0.0 : -1.0 / q;
    });
}

struct MassResult {
    double value = 0.0;
    double refined = 0.0;
    int M = 0;
};

// Integral over T^{n-1} of N tr Q + 2N P + (2/(N b_0))^N, on grids M and 2M.
inline MassResult mass_functional(const Dataset& ds, double tol = 1e-8) {
    ds.validate();
    auto integrand = [&](std::span<const double> th) {
        return ds.N * ds.trace_Q(th) + 2.0 * ds.N * ds.P(th) + ds.mass_constant();
    };
    auto quad = [&](int M) {
        TorusGrid g{ds.torus_dim(), M};
        double s = 0.0;
        for (double v : g.sample(integrand)) s += v;
        return s / static_cast<double>(g.size()) * ds.torus_volume();
    };
    MassResult r;
    r.M = grid_size_for(ds.max_wavenumber());
    r.value = quad(r.M);
    r.refined = quad(2 * r.M);
    if (std::abs(r.value - r.refined) > tol * std::max(1.0, std::abs(r.refined)))
        throw ConvergenceError("mass functional quadrature does not settle under refinement");
    return r;
}

struct USolution {
    TorusGrid grid;
    std::vector<double> u;
    std::vector<double> source;  // (N/2) tr Q + N P on the grid
    double constant = 0.0;       // Lap u + source == constant
    double pde_residual = 0.0;
    double pointwise_max = 0.0;  // max of Lap u + source + (1/2)(2/(N b_0))^N
};

inline USolution solve_u_equation(const Dataset& ds, int M = 0) {
    ds.validate();
    USolution s;
    s.grid = TorusGrid{ds.torus_dim(), M > 0 ? M : grid_size_for(ds.max_wavenumber())};
    s.source = s.grid.sample([&](std::span<const double> th) { return ds.u_source(th); });
    double mean = 0.0;
    for (double v : s.source) mean += v;
    mean /= static_cast<double>(s.source.size());
    s.constant = mean;
    // Lap u = mean - source
    std::vector<double> rhs(s.source.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = mean - s.source[i];
    s.u = torus_poisson(s.grid, ds.b, rhs);
    std::vector<double> lap = torus_laplacian(s.grid, ds.b, s.u);
    s.pointwise_max = -kInf;
    for (std::size_t i = 0; i < lap.size(); ++i) {
        s.pde_residual = std::max(s.pde_residual, std::abs(lap[i] + s.source[i] - s.constant));
        s.pointwise_max = std::max(s.pointwise_max, lap[i] + s.source[i] + 0.5 * ds.mass_constant());
    }
    return s;
}

// A graph {theta_{n-2} = t_star + offset(r, theta_0..theta_{n-3})}. The offset is kept
// separate so tiny deviations keep full precision.
struct GraphHypersurface {
    int N = 3;
    int n = 3;
    std::vector<double> b;  // b_0 .. b_{n-3}, scales of the base torus
    double t_star = 0.0;
    double r_star = 10.0;
    ScalarField offset;     // on (r, theta_0..theta_{n-3})

    template <class F>
    static GraphHypersurface make(int N, int n, std::vector<double> b, double t_star, double r_star, F f) {
        GraphHypersurface g;
        g.N = N;
        g.n = n;
        g.b = b;
        g.t_star = t_star;
        g.r_star = r_star;
        std::vector<Axis> ax{Axis::radial("r", 0.5 * r_star, 1e12, 1e-3)};
        for (int k = 0; k < n - 2; ++k) ax.push_back(Axis::angle("theta" + std::to_string(k)));
        g.offset = ScalarField::generic(CoordinateChart(ax), f);
        return g;
    }
    double value(const Point& p) const { return wrap_angle(t_star + offset(p)); }
};

struct DecayFit {
    int order = 0;
    double exponent = 0.0;
    double constant = 0.0;
    bool pass = false;
    std::vector<double> r, sup;
};

inline std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> r(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) r[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, i / (count - 1.0));
    return r;
}

// Least-squares power fit over the last 60% of the log r range.
inline PowerFit tail_fit(const std::vector<double>& r, const std::vector<double>& y) {
    double l0 = std::log(r.front()), l1 = std::log(r.back());
    double cut = l0 + 0.4 * (l1 - l0);
    std::vector<double> xr, yr;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (std::log(r[i]) >= cut - 1e-12) {
            xr.push_back(r[i]);
            yr.push_back(y[i]);
        }
    return fit_power_law(xr, yr);
}

inline void require_decades(double lo, double hi) {
    if (std::log10(hi / lo) < 1.5) throw ConfigError("decay fit needs at least 1.5 decades of r");
}

// Base-torus sample angles for sup norms: up to `per_axis` points per axis.
inline std::vector<std::vector<double>> torus_samples(int d, int per_axis = 6) {
    std::vector<std::vector<double>> out;
    if (d == 0) return {{}};
    int m = std::max(2, static_cast<int>(std::floor(std::pow(512.0, 1.0 / d))));
    m = std::min(m, per_axis);
    TorusGrid g{d, m};
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto th = g.point(i);
        for (double& t : th) t += 0.1;  // avoid the symmetric points of simple test modes
        out.push_back(th);
    }
    return out;
}

// Fits sup_torus |D^m_hyp f| ~ C r^p for each order and passes when p <= -N + slack.
inline std::vector<DecayFit> check_tame(const GraphHypersurface& s, const std::vector<int>& orders, double decades = 2.0,
                                        int r_points = 24, double slack = 0.1) {
    require_decades(s.r_star, s.r_star * std::pow(10.0, decades));
    const int d = s.n - 1;
    MetricField hyp = hyperbolic_metric(s.b, 0.5 * s.r_star);
    if (hyp.dim() != d) throw ConfigError("base scales do not match n");
    FdOptions exact;
    exact.source = DerivativeSource::Automatic;
    auto rs = log_grid(s.r_star, s.r_star * std::pow(10.0, decades), r_points);
    auto ths = torus_samples(d - 1);
    std::vector<DecayFit> fits;
    for (int m : orders) {
        if (m < 0 || m > 2) throw ConfigError("tame check supports derivative orders 0, 1, 2");
        DecayFit fit;
        fit.order = m;
        fit.r = rs;
        for (double r : rs) {
            double sup = 0.0;
            for (const auto& th : ths) {
                Point p(d);
                p[0] = r;
                for (int k = 0; k < d - 1; ++k) p[k + 1] = th[static_cast<std::size_t>(k)];
                double v = 0.0;
                if (m == 0) {
                    v = std::abs(wrap_signed(s.offset(p)));  // d_S1(f, t_star) without cancelling against t_star
                } else {
                    ScalarJet j = scalar_jet(s.offset, p, 2, exact);
                    MetricJet mj = metric_jet(hyp, p, 1, exact);
                    if (m == 1) v = norm_g(mj.ginv, j.d);
                    else v = norm_g(mj.ginv, hessian_from(christoffel_from(mj), j));
                }
                sup = std::max(sup, v);
            }
            fit.sup.push_back(sup);
        }
        bool all_zero = true;
        for (double v : fit.sup) all_zero = all_zero && v == 0.0;
        if (all_zero) {
            fit.exponent = -kInf;
            fit.constant = 0.0;
            fit.pass = true;
        } else {
            PowerFit pf = tail_fit(fit.r, fit.sup);
            fit.exponent = pf.exponent;
            fit.constant = std::exp(pf.log_amplitude);
            fit.pass = pf.exponent <= -s.N + slack;
        }
        fits.push_back(fit);
    }
    return fits;
}

// Metric g = gbar + r^{2-N} Q + r^{2-N-2 delta} S on (r, theta_0..theta_{n-2}); S uses the
// same mode format as Q.
inline MetricField dataset_metric(const Dataset& ds, const std::vector<TensorMode>& S, double r_min) {
    const int n = ds.n, N = ds.N;
    std::vector<Axis> ax{Axis::radial("r", r_min, 1e12, 1e-3)};
    for (int k = 0; k < n - 1; ++k) ax.push_back(Axis::angle("theta" + std::to_string(k)));
    const double e = 2.0 - N - 2.0 * ds.delta;
    return MetricField::generic(CoordinateChart(ax), [ds, S, n, N, e](auto x, auto g) {
        using T = typename decltype(g)::value_type;
        auto th = x.subspan(1);
        for (auto& v : g) v = T(0.0);
        T r = x[0];
        g[0] = 1.0 / (r * r);
        T a = pow(r, 2.0 - N), c = pow(r, e);
        for (int i = 0; i < n - 1; ++i)
            for (int j = 0; j < n - 1; ++j) {
                T v = a * tensor_component(ds.Q_modes, i, j, th) + c * tensor_component(S, i, j, th);
                if (i == j) v = v + ds.b[static_cast<std::size_t>(i)] * ds.b[static_cast<std::size_t>(i)] * r * r;
                g[static_cast<std::size_t>((i + 1) * n + (j + 1))] = v;
            }
    });
}

// Residual tensor E = g - gbar - r^{2-N} Q = r^{2-N-2 delta} S as an n*n component field.
inline Field dataset_residual_tensor(const Dataset& ds, const std::vector<TensorMode>& S, double r_min) {
    const int n = ds.n;
    std::vector<Axis> ax{Axis::radial("r", r_min, 1e12, 1e-3)};
    for (int k = 0; k < n - 1; ++k) ax.push_back(Axis::angle("theta" + std::to_string(k)));
    const double e = 2.0 - ds.N - 2.0 * ds.delta;
    return Field::generic(CoordinateChart(ax), n * n, [S, n, e](auto x, auto E) {
        using T = typename decltype(E)::value_type;
        auto th = x.subspan(1);
        for (auto& v : E) v = T(0.0);
        T c = pow(x[0], e);
        for (int i = 0; i < n - 1; ++i)
            for (int j = 0; j < n - 1; ++j) E[static_cast<std::size_t>((i + 1) * n + (j + 1))] = c * tensor_component(S, i, j, th);
    });
}

struct InterpolationResult {
    DecayFit order0, order1;
};

// Decay of |E|_gbar and |Dbar E|_gbar for E = g - gbar - r^{2-N} Q.
inline InterpolationResult decay_interpolation_check(const Dataset& ds, const std::vector<TensorMode>& S,
                                                     double decades = 2.0, int r_points = 24, double slack = 0.1) {
    ds.validate();
    require_decades(ds.r0, ds.r0 * std::pow(10.0, decades));
    const int n = ds.n;
    Field E = dataset_residual_tensor(ds, S, 0.5 * ds.r0);
    MetricField gbar = hyperbolic_metric(ds.b, 0.5 * ds.r0);
    FdOptions exact;
    exact.source = DerivativeSource::Automatic;
    auto rs = log_grid(ds.r0, ds.r0 * std::pow(10.0, decades), r_points);
    auto ths = torus_samples(n - 1);
    InterpolationResult out;
    out.order0.order = 0;
    out.order1.order = 1;
    out.order0.r = out.order1.r = rs;
    for (double r : rs) {
        double s0 = 0.0, s1 = 0.0;
        for (const auto& th : ths) {
            Point p(n);
            p[0] = r;
            for (int k = 0; k < n - 1; ++k) p[k + 1] = th[static_cast<std::size_t>(k)];
            FieldJet ej = E.jet(p, 1, exact);
            MetricJet mj = metric_jet(gbar, p, 1, exact);
            Tensor3 G = christoffel_from(mj);
            Eigen::MatrixXd Em(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) Em(i, j) = ej.v[i * n + j];
            s0 = std::max(s0, norm_g(mj.ginv, Em));
            Tensor3 DE(n);  // (k, i, j) = Dbar_k E_ij
            for (int k = 0; k < n; ++k)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        double v = ej.d(i * n + j, k);
                        for (int m = 0; m < n; ++m) v -= G(m, k, i) * Em(m, j) + G(m, k, j) * Em(i, m);
                        DE(k, i, j) = v;
                    }
            s1 = std::max(s1, norm_g(mj.ginv, DE));
        }
        out.order0.sup.push_back(s0);
        out.order1.sup.push_back(s1);
    }
    double bound = -ds.N - ds.delta + slack;
    for (DecayFit* f : {&out.order0, &out.order1}) {
        PowerFit pf = tail_fit(f->r, f->sup);
        f->exponent = pf.exponent;
        f->constant = std::exp(pf.log_amplitude);
        f->pass = pf.exponent <= bound;
    }
    return out;
}

// Decay rates of the angular-vector-field quantities for V = d/dtheta_{n-2} on
// g = gbar + r^{2-N} Q + r^{2-N-2 delta} S and rho = r^{N-n} + r^{-n} P + r^{-n-2 delta} P.
struct AngularEstimates {
    DecayFit lie_g, lie_lie_g, v_rho, vv_rho, connection;
    double bound_lie_g = 0, bound_lie_lie_g = 0, bound_v_rho = 0, bound_vv_rho = 0, bound_connection = 0;
};

inline AngularEstimates angular_field_check(const Dataset& ds, const std::vector<TensorMode>& S, double decades = 2.0,
                                            int r_points = 16, double slack = 0.1) {
    ds.validate();
    require_decades(ds.r0, ds.r0 * std::pow(10.0, decades));
    const int n = ds.n, N = ds.N, v = n - 1;  // V is the last coordinate direction
    const double dl = ds.delta;
    MetricField g = dataset_metric(ds, S, 0.5 * ds.r0);
    std::vector<Axis> ax{Axis::radial("r", 0.5 * ds.r0, 1e12, 1e-3)};
    for (int k = 0; k < n - 1; ++k) ax.push_back(Axis::angle("theta" + std::to_string(k)));
    ScalarField rho = ScalarField::generic(CoordinateChart(ax), [ds, n, N, dl](auto x) {
        auto th = x.subspan(1);
        auto P = ds.P(th);
        return pow(x[0], double(N - n)) + pow(x[0], -double(n)) * P + pow(x[0], -n - 2.0 * dl) * P;
    });
    FdOptions exact;
    exact.source = DerivativeSource::Automatic;
    auto rs = log_grid(ds.r0, ds.r0 * std::pow(10.0, decades), r_points);
    auto ths = torus_samples(n - 1, 4);
    AngularEstimates a;
    a.bound_lie_g = 1.0 - N - dl;
    a.bound_lie_lie_g = 2.0 - N - dl;
    a.bound_v_rho = 1.0 - n - dl;
    a.bound_vv_rho = 2.0 - n - dl;
    a.bound_connection = 2.0 - N;
    for (DecayFit* f : {&a.lie_g, &a.lie_lie_g, &a.v_rho, &a.vv_rho, &a.connection}) f->r = rs;
    for (double r : rs) {
        double s[5] = {0, 0, 0, 0, 0};
        for (const auto& th : ths) {
            Point p(n);
            p[0] = r;
            for (int k = 0; k < n - 1; ++k) p[k + 1] = th[static_cast<std::size_t>(k)];
            MetricJet mj = metric_jet(g, p, 2, exact);
            // V is a coordinate field, so L_V g and L_V L_V g are plain theta-derivatives.
            s[0] = std::max(s[0], norm_g(mj.ginv, mj.dg[static_cast<std::size_t>(v)]));
            s[1] = std::max(s[1], norm_g(mj.ginv, mj.ddg[static_cast<std::size_t>(v * n + v)]));
            ScalarJet rj = scalar_jet(rho, p, 2, exact);
            s[2] = std::max(s[2], std::abs(rj.d[v]));
            s[3] = std::max(s[3], std::abs(rj.dd(v, v)));
            Tensor3 G = christoffel_from(mj);
            Eigen::VectorXd DVV(n), grad_r = mj.ginv.col(0);
            for (int m = 0; m < n; ++m) DVV[m] = G(m, v, v);
            std::vector<double> thv(th.begin(), th.end());
            double Qvv = tensor_component(ds.Q_modes, v - 1, v - 1, std::span<const double>(thv));
            double bl = ds.b.back();
            Eigen::VectorXd w = DVV + (bl * bl * r - 0.5 * (N - 2.0) * std::pow(r, 1.0 - N) * Qvv) * grad_r;
            s[4] = std::max(s[4], norm_g(mj.g, w));  // vector norm uses the lower-index metric
        }
        a.lie_g.sup.push_back(s[0]);
        a.lie_lie_g.sup.push_back(s[1]);
        a.v_rho.sup.push_back(s[2]);
        a.vv_rho.sup.push_back(s[3]);
        a.connection.sup.push_back(s[4]);
    }
    auto finish = [&](DecayFit& f, double bound, bool strict) {
        bool zero = true;
        for (double x : f.sup) zero = zero && x == 0.0;
        if (zero) {
            f.exponent = -kInf;
            f.pass = true;
            return;
        }
        PowerFit pf = tail_fit(f.r, f.sup);
        f.exponent = pf.exponent;
        f.constant = std::exp(pf.log_amplitude);
        f.pass = strict ? pf.exponent < bound : pf.exponent <= bound + slack;
    };
    finish(a.lie_g, a.bound_lie_g, false);
    finish(a.lie_lie_g, a.bound_lie_lie_g, false);
    finish(a.v_rho, a.bound_v_rho, false);
    finish(a.vv_rho, a.bound_vv_rho, false);
    finish(a.connection, a.bound_connection, true);
    return a;
}

}  // namespace hmlab
