#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "hmlab/error.hpp"

namespace hmlab {

// Radical-inverse (Halton) sequence; deterministic quasi-random samples.
inline double halton(unsigned index, unsigned base) {
    double f = 1.0, r = 0.0;
    unsigned i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

inline double halton_coordinate(unsigned index, int axis) {
    static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    return halton(index + 1, primes[axis % 12]);
}

struct PowerFit {
    double exponent = 0.0;
    double log_amplitude = 0.0;
    double rms_residual = 0.0;
};

// Least-squares fit log y = a + p log x. Non-positive samples are skipped.
inline PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    if (lx.size() < 2) return PowerFit{-std::numeric_limits<double>::infinity(), 0.0, 0.0};
    Eigen::MatrixXd A(lx.size(), 2);
    Eigen::VectorXd b(lx.size());
    for (std::size_t i = 0; i < lx.size(); ++i) {
        A(static_cast<Eigen::Index>(i), 0) = 1.0;
        A(static_cast<Eigen::Index>(i), 1) = lx[i];
        b[static_cast<Eigen::Index>(i)] = ly[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    double rms = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(lx.size()));
    return PowerFit{c[1], c[0], rms};
}

// Composite 16-point Gauss-Legendre rule on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels = 8) {
    double total = 0.0;
    double w = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
        double lo = a + k * w;
        total += boost::math::quadrature::gauss<double, 16>::integrate(f, lo, lo + w);
    }
    return total;
}

// Gauss-Legendre nodes and weights on [a, b] (panels x 16 points).
inline void gauss_nodes(double a, double b, int panels, std::vector<double>& x, std::vector<double>& w) {
    using G = boost::math::quadrature::gauss<double, 16>;
    x.clear();
    w.clear();
    const auto& ab = G::abscissa();
    const auto& wt = G::weights();
    double pw = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
        double c = a + (k + 0.5) * pw, h = 0.5 * pw;
        for (std::size_t i = 0; i < ab.size(); ++i) {
            double wi = wt[i] * h;
            if (ab[i] == 0.0) {
                x.push_back(c);
                w.push_back(wi);
            } else {
                x.push_back(c - h * ab[i]);
                w.push_back(wi);
                x.push_back(c + h * ab[i]);
                w.push_back(wi);
            }
        }
    }
}

// Classical fourth-order Runge-Kutta step for y' = f(t, y).
template <class Vec, class F>
Vec rk4_step(const F& f, double t, const Vec& y, double h) {
    Vec k1 = f(t, y);
    Vec k2 = f(t + 0.5 * h, Vec(y + 0.5 * h * k1));
    Vec k3 = f(t + 0.5 * h, Vec(y + 0.5 * h * k2));
    Vec k4 = f(t + h, Vec(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Five-point second derivative from samples at -2e, -e, 0, e, 2e.
inline double second_difference(double fm2, double fm1, double f0, double fp1, double fp2, double e) {
    return (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * e * e);
}

}  // namespace hmlab
