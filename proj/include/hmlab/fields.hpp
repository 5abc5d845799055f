#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "hmlab/chart.hpp"
#include "hmlab/jet.hpp"

namespace hmlab {

// Value, first and second partial derivatives of an R^m valued map on a chart.
// d(a, k) = d_k F^a, dd[a](k, l) = d_k d_l F^a.
struct FieldJet {
    Eigen::VectorXd v;
    Eigen::MatrixXd d;
    std::vector<Eigen::MatrixXd> dd;
};

enum class DerivativeSource { FiniteDifference, Exact, Automatic };

// Finite-difference settings. Steps come from the chart axes, multiplied by
// h_scale. Richardson combines steps h and h/2 (4th order -> 6th order).
struct FdOptions {
    double h_scale = 1.0;
    bool richardson = false;
    DerivativeSource source = DerivativeSource::FiniteDifference;
};

namespace detail {

template <class F>
FieldJet exact_field_jet(const F& f, int dim, int m, const Point& p) {
    std::vector<Jet> x(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) x[static_cast<std::size_t>(i)] = Jet::variable(dim, i, p[i]);
    std::vector<Jet> out(static_cast<std::size_t>(m));
    f(std::span<const Jet>(x), std::span<Jet>(out));
    FieldJet r;
    r.v.resize(m);
    r.d.resize(m, dim);
    r.dd.assign(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(dim, dim));
    for (int a = 0; a < m; ++a) {
        const Jet& j = out[static_cast<std::size_t>(a)];
        r.v[a] = j.v;
        for (int k = 0; k < dim; ++k) {
            r.d(a, k) = j.grad(k);
            for (int l = 0; l < dim; ++l) r.dd[static_cast<std::size_t>(a)](k, l) = j.hess(k, l);
        }
    }
    return r;
}

}  // namespace detail

// A smooth R^m valued map on a chart, with an optional exact-derivative path.
class Field {
public:
    using Eval = std::function<void(std::span<const double>, std::span<double>)>;
    using JetEval = std::function<void(std::span<const Jet>, std::span<Jet>)>;

    Field() = default;
    Field(CoordinateChart chart, int components, Eval eval, JetEval jet = {})
        : chart_(std::move(chart)), m_(components), eval_(std::move(eval)), jet_(std::move(jet)) {}

    // f(span<const T> x, span<T> out) must be callable for T = double and T = Jet.
    template <class F>
    static Field generic(CoordinateChart chart, int components, F f) {
        auto shared = std::make_shared<F>(std::move(f));
        return Field(
            std::move(chart), components,
            [shared](std::span<const double> x, std::span<double> out) { (*shared)(x, out); },
            [shared](std::span<const Jet> x, std::span<Jet> out) { (*shared)(x, out); });
    }

    const CoordinateChart& chart() const { return chart_; }
    int dim() const { return chart_.dim(); }
    int components() const { return m_; }
    bool has_exact() const { return static_cast<bool>(jet_); }
    // Raw component maps, without periodic reduction; used to compose fields.
    const Eval& eval_fn() const { return eval_; }
    const JetEval& jet_fn() const { return jet_; }

    Eigen::VectorXd value(const Point& p) const {
        Point q = chart_.reduce(p);
        Eigen::VectorXd out(m_);
        eval_(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())),
              std::span<double>(out.data(), static_cast<std::size_t>(m_)));
        return out;
    }

    FieldJet exact_jet(const Point& p) const {
        if (!jet_) throw ConfigError("field has no exact derivative supplier");
        Point q = chart_.reduce(p);
        return detail::exact_field_jet(jet_, dim(), m_, q);
    }

    // order 1: value and first derivatives; order 2 adds second derivatives.
    FieldJet jet(const Point& p, int order, const FdOptions& opt = {}) const;

private:
    CoordinateChart chart_;
    int m_ = 0;
    Eval eval_;
    JetEval jet_;
};

namespace detail {

inline FieldJet fd_jet_single(const Field& f, const Point& p, int order, double scale) {
    const int d = f.dim();
    const int m = f.components();
    FieldJet r;
    r.v = f.value(p);
    r.d = Eigen::MatrixXd::Zero(m, d);
    if (order >= 2) r.dd.assign(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(d, d));
    std::vector<double> h(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) h[static_cast<std::size_t>(i)] = f.chart().step(i, p, scale);

    static constexpr double c1[4] = {1.0, -8.0, 8.0, -1.0};  // offsets -2,-1,1,2 over 12h
    static constexpr int off[4] = {-2, -1, 1, 2};
    auto shifted = [&](int i, double s) {
        Point q = p;
        q[i] += s;
        return q;
    };
    std::vector<std::array<Eigen::VectorXd, 4>> axis_vals(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        double hi = h[static_cast<std::size_t>(i)];
        auto& av = axis_vals[static_cast<std::size_t>(i)];
        for (int s = 0; s < 4; ++s) av[static_cast<std::size_t>(s)] = f.value(shifted(i, off[s] * hi));
        r.d.col(i) = (av[0] - 8.0 * av[1] + 8.0 * av[2] - av[3]) / (12.0 * hi);
        if (order >= 2) {
            Eigen::VectorXd sec =
                (-av[0] + 16.0 * av[1] - 30.0 * r.v + 16.0 * av[2] - av[3]) / (12.0 * hi * hi);
            for (int a = 0; a < m; ++a) r.dd[static_cast<std::size_t>(a)](i, i) = sec[a];
        }
    }
    if (order >= 2) {
        for (int i = 0; i < d; ++i) {
            for (int k = i + 1; k < d; ++k) {
                double hi = h[static_cast<std::size_t>(i)], hk = h[static_cast<std::size_t>(k)];
                Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
                for (int s = 0; s < 4; ++s) {
                    for (int t = 0; t < 4; ++t) {
                        Point q = p;
                        q[i] += off[s] * hi;
                        q[k] += off[t] * hk;
                        acc += (c1[s] * c1[t]) * f.value(q);
                    }
                }
                acc /= (144.0 * hi * hk);
                for (int a = 0; a < m; ++a) {
                    r.dd[static_cast<std::size_t>(a)](i, k) = acc[a];
                    r.dd[static_cast<std::size_t>(a)](k, i) = acc[a];
                }
            }
        }
    }
    return r;
}

}  // namespace detail

inline FieldJet Field::jet(const Point& p, int order, const FdOptions& opt) const {
    bool exact = opt.source == DerivativeSource::Exact ||
                 (opt.source == DerivativeSource::Automatic && has_exact());
    if (exact) return exact_jet(p);
    chart_.require_interior(p, 2.0, opt.h_scale);
    if (!opt.richardson) return detail::fd_jet_single(*this, p, order, opt.h_scale);
    FieldJet a = detail::fd_jet_single(*this, p, order, opt.h_scale);
    FieldJet b = detail::fd_jet_single(*this, p, order, 0.5 * opt.h_scale);
    const double w = 1.0 / 15.0;
    b.d = b.d + (b.d - a.d) * w;
    for (std::size_t c = 0; c < b.dd.size(); ++c) b.dd[c] = b.dd[c] + (b.dd[c] - a.dd[c]) * w;
    return b;
}

// Riemannian metric: a symmetric dim x dim matrix field stored row-major.
class MetricField {
public:
    MetricField() = default;
    explicit MetricField(Field f) : f_(std::move(f)) {
        if (f_.components() != f_.dim() * f_.dim())
            throw ConfigError("metric field must have dim*dim components");
    }

    template <class F>
    static MetricField generic(CoordinateChart chart, F f) {
        int d = chart.dim();
        return MetricField(Field::generic(std::move(chart), d * d, std::move(f)));
    }

    static MetricField from_values(CoordinateChart chart,
                                   std::function<Eigen::MatrixXd(const Point&)> g) {
        int d = chart.dim();
        return MetricField(Field(std::move(chart), d * d,
                                 [g, d](std::span<const double> x, std::span<double> out) {
                                     Point p = Eigen::Map<const Eigen::VectorXd>(x.data(), d);
                                     Eigen::MatrixXd m = g(p);
                                     for (int i = 0; i < d; ++i)
                                         for (int k = 0; k < d; ++k)
                                             out[static_cast<std::size_t>(i * d + k)] = m(i, k);
                                 }));
    }

    const Field& field() const { return f_; }
    const CoordinateChart& chart() const { return f_.chart(); }
    int dim() const { return f_.dim(); }
    bool has_exact() const { return f_.has_exact(); }

    Eigen::MatrixXd at(const Point& p) const {
        Eigen::VectorXd v = f_.value(p);
        return Eigen::Map<const Eigen::MatrixXd>(v.data(), dim(), dim()).transpose();
    }

private:
    Field f_;
};

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(Field f) : f_(std::move(f)) {
        if (f_.components() != 1) throw ConfigError("scalar field must have one component");
    }

    // f(span<const T> x) -> T
    template <class F>
    static ScalarField generic(CoordinateChart chart, F f) {
        return ScalarField(Field::generic(std::move(chart), 1, [f](auto x, auto out) { out[0] = f(x); }));
    }

    static ScalarField from_values(CoordinateChart chart, std::function<double(const Point&)> f) {
        int d = chart.dim();
        return ScalarField(Field(std::move(chart), 1,
                                 [f, d](std::span<const double> x, std::span<double> out) {
                                     out[0] = f(Eigen::Map<const Eigen::VectorXd>(x.data(), d));
                                 }));
    }

    const Field& field() const { return f_; }
    const CoordinateChart& chart() const { return f_.chart(); }
    int dim() const { return f_.dim(); }
    double operator()(const Point& p) const { return f_.value(p)[0]; }

private:
    Field f_;
};

class VectorField {
public:
    VectorField() = default;
    explicit VectorField(Field f) : f_(std::move(f)) {
        if (f_.components() != f_.dim()) throw ConfigError("vector field must have dim components");
    }

    template <class F>
    static VectorField generic(CoordinateChart chart, F f) {
        int d = chart.dim();
        return VectorField(Field::generic(std::move(chart), d, std::move(f)));
    }

    const Field& field() const { return f_; }
    const CoordinateChart& chart() const { return f_.chart(); }
    int dim() const { return f_.dim(); }
    Eigen::VectorXd operator()(const Point& p) const { return f_.value(p); }

private:
    Field f_;
};

}  // namespace hmlab

namespace hmlab {

// Settings used by the verification suites: 6th-order extrapolated stencils on
// a step large enough that rounding stays far below the truncation error.
inline FdOptions verification_fd() {
    FdOptions o;
    o.h_scale = 4.0;
    o.richardson = true;
    return o;
}

}  // namespace hmlab
