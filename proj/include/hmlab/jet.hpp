#pragma once

// Second-order forward-mode jets: value, gradient and Hessian with respect to
// up to kMaxJetDim independent variables. Field definitions written as generic
// lambdas are evaluated with double for values and with Jet for exact
// first and second partial derivatives.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>

#include "hmlab/error.hpp"

namespace hmlab {

inline constexpr int kMaxJetDim = 8;

struct Jet {
    int n = 0;
    double v = 0.0;
    std::array<double, kMaxJetDim> d{};
    std::array<double, kMaxJetDim * kMaxJetDim> dd{};

    Jet() = default;
    Jet(double c) : v(c) {}  // NOLINT: implicit so that generic code can mix literals

    static Jet variable(int n, int i, double value) {
        if (n > kMaxJetDim || i < 0 || i >= n) throw DomainError("jet variable index out of range");
        Jet j;
        j.n = n;
        j.v = value;
        j.d[static_cast<std::size_t>(i)] = 1.0;
        return j;
    }

    double grad(int i) const { return d[static_cast<std::size_t>(i)]; }
    double hess(int i, int k) const { return dd[static_cast<std::size_t>(i * kMaxJetDim + k)]; }
    double& hess_ref(int i, int k) { return dd[static_cast<std::size_t>(i * kMaxJetDim + k)]; }
};

// f(u) from f(u0), f'(u0), f''(u0).
inline Jet chain(const Jet& u, double f0, double f1, double f2) {
    Jet r;
    r.n = u.n;
    r.v = f0;
    for (int i = 0; i < u.n; ++i) r.d[i] = f1 * u.d[i];
    for (int i = 0; i < u.n; ++i)
        for (int k = 0; k < u.n; ++k)
            r.hess_ref(i, k) = f1 * u.hess(i, k) + f2 * u.d[i] * u.d[k];
    return r;
}

inline Jet operator-(const Jet& a) {
    Jet r = a;
    r.v = -r.v;
    for (auto& x : r.d) x = -x;
    for (auto& x : r.dd) x = -x;
    return r;
}

inline Jet operator+(const Jet& a, const Jet& b) {
    Jet r;
    r.n = std::max(a.n, b.n);
    r.v = a.v + b.v;
    for (int i = 0; i < r.n; ++i) r.d[i] = a.d[i] + b.d[i];
    for (int i = 0; i < r.n; ++i)
        for (int k = 0; k < r.n; ++k) r.hess_ref(i, k) = a.hess(i, k) + b.hess(i, k);
    return r;
}

inline Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }

inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    r.n = std::max(a.n, b.n);
    r.v = a.v * b.v;
    for (int i = 0; i < r.n; ++i) r.d[i] = a.v * b.d[i] + b.v * a.d[i];
    for (int i = 0; i < r.n; ++i)
        for (int k = 0; k < r.n; ++k)
            r.hess_ref(i, k) = a.v * b.hess(i, k) + b.v * a.hess(i, k) + a.d[i] * b.d[k] +
                               b.d[i] * a.d[k];
    return r;
}

inline Jet operator/(const Jet& a, const Jet& b) {
    double iv = 1.0 / b.v;
    return a * chain(b, iv, -iv * iv, 2.0 * iv * iv * iv);
}

inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }
inline Jet& operator/=(Jet& a, const Jet& b) { return a = a / b; }

inline bool operator<(const Jet& a, const Jet& b) { return a.v < b.v; }
inline bool operator>(const Jet& a, const Jet& b) { return a.v > b.v; }

// Elementary functions for both double and Jet, so that generic field code can
// call them unqualified inside namespace hmlab.
inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.v; }

// Templates (rather than plain double overloads) so that they lose against the
// C library functions when both are visible.
template <std::floating_point T> T sqrt(T x) { return std::sqrt(x); }
template <std::floating_point T> T exp(T x) { return std::exp(x); }
template <std::floating_point T> T log(T x) { return std::log(x); }
template <std::floating_point T> T log1p(T x) { return std::log1p(x); }
template <std::floating_point T> T pow(T x, double a) { return std::pow(x, a); }
template <std::floating_point T> T sin(T x) { return std::sin(x); }
template <std::floating_point T> T cos(T x) { return std::cos(x); }
template <std::floating_point T> T sinh(T x) { return std::sinh(x); }
template <std::floating_point T> T cosh(T x) { return std::cosh(x); }
template <std::floating_point T> T tanh(T x) { return std::tanh(x); }
template <std::floating_point T> T acosh(T x) { return std::acosh(x); }
template <std::floating_point T> T atan(T x) { return std::atan(x); }

inline Jet sqrt(const Jet& u) {
    double s = std::sqrt(u.v);
    return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}
inline Jet exp(const Jet& u) {
    double e = std::exp(u.v);
    return chain(u, e, e, e);
}
inline Jet log(const Jet& u) { return chain(u, std::log(u.v), 1.0 / u.v, -1.0 / (u.v * u.v)); }
inline Jet log1p(const Jet& u) {
    double q = 1.0 / (1.0 + u.v);
    return chain(u, std::log1p(u.v), q, -q * q);
}
inline Jet pow(const Jet& u, double a) {
    if (a == 0.0) return Jet(1.0);
    double p = std::pow(u.v, a - 2.0);
    return chain(u, p * u.v * u.v, a * p * u.v, a * (a - 1.0) * p);
}
inline Jet sin(const Jet& u) {
    double s = std::sin(u.v), c = std::cos(u.v);
    return chain(u, s, c, -s);
}
inline Jet cos(const Jet& u) {
    double s = std::sin(u.v), c = std::cos(u.v);
    return chain(u, c, -s, -c);
}
inline Jet sinh(const Jet& u) {
    double s = std::sinh(u.v), c = std::cosh(u.v);
    return chain(u, s, c, s);
}
inline Jet cosh(const Jet& u) {
    double s = std::sinh(u.v), c = std::cosh(u.v);
    return chain(u, c, s, c);
}
inline Jet tanh(const Jet& u) {
    double t = std::tanh(u.v);
    double s2 = 1.0 - t * t;
    return chain(u, t, s2, -2.0 * t * s2);
}
inline Jet acosh(const Jet& u) {
    double q = u.v * u.v - 1.0;
    double sq = std::sqrt(q);
    return chain(u, std::acosh(u.v), 1.0 / sq, -u.v / (q * sq));
}
inline Jet atan(const Jet& u) {
    double q = 1.0 / (1.0 + u.v * u.v);
    return chain(u, std::atan(u.v), q, -2.0 * u.v * q * q);
}

}  // namespace hmlab
