#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace hmlab {

// Dense rank-3 array, index order (a, b, c).
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int d) : d_(d), data_(static_cast<std::size_t>(d * d * d), 0.0) {}
    int dim() const { return d_; }
    double& operator()(int a, int b, int c) { return data_[idx(a, b, c)]; }
    double operator()(int a, int b, int c) const { return data_[idx(a, b, c)]; }
    double max_abs() const {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::abs(x));
        return m;
    }

private:
    std::size_t idx(int a, int b, int c) const { return static_cast<std::size_t>((a * d_ + b) * d_ + c); }
    int d_ = 0;
    std::vector<double> data_;
};

// Dense rank-4 array, index order (a, b, c, e).
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(int d) : d_(d), data_(static_cast<std::size_t>(d * d * d * d), 0.0) {}
    int dim() const { return d_; }
    double& operator()(int a, int b, int c, int e) { return data_[idx(a, b, c, e)]; }
    double operator()(int a, int b, int c, int e) const { return data_[idx(a, b, c, e)]; }

    Tensor4& operator+=(const Tensor4& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor4& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }
    friend Tensor4 operator-(Tensor4 a, const Tensor4& b) {
        for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] -= b.data_[i];
        return a;
    }
    friend Tensor4 operator*(double s, Tensor4 a) { return a *= s; }
    friend Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }

    double max_abs() const {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::abs(x));
        return m;
    }

private:
    std::size_t idx(int a, int b, int c, int e) const {
        return static_cast<std::size_t>(((a * d_ + b) * d_ + c) * d_ + e);
    }
    int d_ = 0;
    std::vector<double> data_;
};

// (A o B)(X,Y,Z,W) = A(X,Z)B(Y,W) + A(Y,W)B(X,Z) - A(X,W)B(Y,Z) - A(Y,Z)B(X,W)
inline Tensor4 kulkarni_nomizu(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    const int d = static_cast<int>(A.rows());
    Tensor4 r(d);
    for (int x = 0; x < d; ++x)
        for (int y = 0; y < d; ++y)
            for (int z = 0; z < d; ++z)
                for (int w = 0; w < d; ++w)
                    r(x, y, z, w) = A(x, z) * B(y, w) + A(y, w) * B(x, z) - A(x, w) * B(y, z) -
                                    A(y, z) * B(x, w);
    return r;
}

// Pointwise norms of covariant tensors measured with the metric g.
inline double norm_g(const Eigen::MatrixXd& ginv, const Eigen::VectorXd& w) {
    return std::sqrt(std::max(0.0, w.dot(ginv * w)));
}

inline double norm_g(const Eigen::MatrixXd& ginv, const Eigen::MatrixXd& A) {
    double s = (ginv * A * ginv * A.transpose()).trace();
    return std::sqrt(std::max(0.0, s));
}

inline double norm_g(const Eigen::MatrixXd& ginv, const Tensor3& T) {
    const int d = T.dim();
    // Raise all indices via an orthonormal frame: ginv = L L^T.
    Eigen::LLT<Eigen::MatrixXd> llt(ginv);
    Eigen::MatrixXd L = llt.matrixL();
    double s = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c) {
                double x = 0.0;
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        for (int k = 0; k < d; ++k) x += L(i, a) * L(j, b) * L(k, c) * T(i, j, k);
                s += x * x;
            }
    return std::sqrt(s);
}

inline Tensor4 to_frame(const Eigen::MatrixXd& E, const Tensor4& R) {
    // E columns are frame vectors; returns R(E_a, E_b, E_c, E_d).
    const int d = R.dim();
    Tensor4 t1(d), t2(d);
    for (int a = 0; a < d; ++a)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    double s = 0.0;
                    for (int i = 0; i < d; ++i) s += E(i, a) * R(i, j, k, l);
                    t1(a, j, k, l) = s;
                }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    double s = 0.0;
                    for (int j = 0; j < d; ++j) s += E(j, b) * t1(a, j, k, l);
                    t2(a, b, k, l) = s;
                }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int l = 0; l < d; ++l) {
                    double s = 0.0;
                    for (int k = 0; k < d; ++k) s += E(k, c) * t2(a, b, k, l);
                    t1(a, b, c, l) = s;
                }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e) {
                    double s = 0.0;
                    for (int l = 0; l < d; ++l) s += E(l, e) * t1(a, b, c, l);
                    t2(a, b, c, e) = s;
                }
    return t2;
}

inline double norm_g(const Eigen::MatrixXd& ginv, const Tensor4& R) {
    Eigen::LLT<Eigen::MatrixXd> llt(ginv);
    Eigen::MatrixXd L = llt.matrixL();
    Tensor4 f = to_frame(L, R);
    double s = 0.0;
    const int d = R.dim();
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e) s += f(a, b, c, e) * f(a, b, c, e);
    return std::sqrt(s);
}

// Orthonormal frame for g: columns e_a with g(e_a, e_b) = delta_ab.
inline Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(g.inverse());
    return llt.matrixL();
}

}  // namespace hmlab
