#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hmlab/check.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/hypersurface.hpp"
#include "hmlab/numerics.hpp"
#include "hmlab/parallel.hpp"

namespace hmlab {

struct WeightedManifold {
    MetricField metric;
    ScalarField rho;  // positive
};

// A graph patch in a weighted manifold, with its induced metric on the parameter chart.
struct StationarySurface {
    WeightedManifold amb;
    GraphPatch patch;
    MetricField induced;

    static StationarySurface make(WeightedManifold w, GraphPatch p) {
        MetricField ind = induced_metric(w.metric, p);
        return StationarySurface{std::move(w), std::move(p), std::move(ind)};
    }
    int dim() const { return amb.metric.dim(); }
    const CoordinateChart& parameter_chart() const { return patch.height.chart(); }
};

// Ambient data at one point: curvature and the weight up to second order.
struct AmbientState {
    MetricJet mj;
    CurvatureBundle cb;
    double rho = 0.0;
    Eigen::VectorXd drho;
    Eigen::MatrixXd ddrho;     // coordinate second derivatives
    Eigen::MatrixXd hess_rho;  // covariant Hessian
};

inline AmbientState ambient_state(const WeightedManifold& w, const Point& x, const FdOptions& opt) {
    AmbientState a;
    a.mj = metric_jet(w.metric, x, 2, opt);
    a.cb = curvature_from(a.mj);
    ScalarJet r = scalar_jet(w.rho, x, 2, opt);
    if (!(r.v > 0.0)) throw DomainError("weight must be positive");
    a.rho = r.v;
    a.drho = r.d;
    a.ddrho = r.dd;
    a.hess_rho = hessian_from(a.cb.christoffel, r);
    return a;
}

// dG[k](m, i, j) = d_k Gamma^m_ij
inline std::vector<Tensor3> christoffel_derivative(const MetricJet& m) {
    const int d = m.d;
    auto ddg = [&](int a, int b) -> const Eigen::MatrixXd& { return m.ddg[static_cast<std::size_t>(a * d + b)]; };
    Tensor3 lower(d);
    for (int l = 0; l < d; ++l)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                lower(l, i, j) = 0.5 * (m.dg[static_cast<std::size_t>(i)](j, l) + m.dg[static_cast<std::size_t>(j)](i, l) -
                                        m.dg[static_cast<std::size_t>(l)](i, j));
    std::vector<Tensor3> out(static_cast<std::size_t>(d), Tensor3(d));
    for (int k = 0; k < d; ++k) {
        Eigen::MatrixXd dginv = -m.ginv * m.dg[static_cast<std::size_t>(k)] * m.ginv;
        for (int mm = 0; mm < d; ++mm)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < d; ++l) {
                        double dl = 0.5 * (ddg(k, i)(j, l) + ddg(k, j)(i, l) - ddg(k, l)(i, j));
                        s += dginv(mm, l) * lower(l, i, j) + m.ginv(mm, l) * dl;
                    }
                    out[static_cast<std::size_t>(k)](mm, i, j) = s;
                }
    }
    return out;
}

// Covariant derivatives of a vector field and the Lie derivatives of g along it.
struct LieData {
    Eigen::VectorXd V;
    Eigen::MatrixXd dV;               // (i, k) = d_k V^i
    Eigen::MatrixXd DV;               // (i, k) = (D_k V)^i
    std::vector<Eigen::MatrixXd> DDV; // [m](i, k) = (D_m D V)^i_k
    Eigen::MatrixXd L;                // L_V g
    std::vector<Eigen::MatrixXd> DL;  // [m](i, j) = (D_m L_V g)_ij
    Eigen::MatrixXd LL;               // L_V L_V g
};

inline LieData lie_data(const MetricJet& mj, const FieldJet& vj) {
    const int d = mj.d;
    const Tensor3 G = christoffel_from(mj);
    const std::vector<Tensor3> dG = christoffel_derivative(mj);
    LieData o;
    o.V = vj.v;
    o.dV = vj.d;
    o.DV = vj.d;
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < d; ++j) o.DV(i, k) += G(i, k, j) * o.V[j];
    o.DDV.assign(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
    for (int m = 0; m < d; ++m) {
        Eigen::MatrixXd dDV(d, d);  // d_m (DV)^i_k
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) {
                double s = vj.dd[static_cast<std::size_t>(i)](m, k);
                for (int j = 0; j < d; ++j) s += dG[static_cast<std::size_t>(m)](i, k, j) * o.V[j] + G(i, k, j) * o.dV(j, m);
                dDV(i, k) = s;
            }
        Eigen::MatrixXd& out = o.DDV[static_cast<std::size_t>(m)];
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) {
                double s = dDV(i, k);
                for (int l = 0; l < d; ++l) s += G(i, m, l) * o.DV(l, k) - G(l, m, k) * o.DV(i, l);
                out(i, k) = s;
            }
    }
    const Eigen::MatrixXd& g = mj.g;
    Eigen::MatrixXd A = g * o.DV;  // A(j, i) = <D_i V, d_j>
    o.L = A + A.transpose();
    o.DL.assign(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
    for (int m = 0; m < d; ++m) {
        Eigen::MatrixXd B = g * o.DDV[static_cast<std::size_t>(m)];
        o.DL[static_cast<std::size_t>(m)] = B + B.transpose();
    }
    // coordinate form of L_V applied to the tensor L
    o.LL = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int m = 0; m < d; ++m) {
                double dL = o.DL[static_cast<std::size_t>(m)](i, j);
                for (int l = 0; l < d; ++l) dL += G(l, m, i) * o.L(l, j) + G(l, m, j) * o.L(i, l);
                s += o.V[m] * dL + o.L(m, j) * o.dV(m, i) + o.L(i, m) * o.dV(m, j);
            }
            o.LL(i, j) = s;
        }
    return o;
}

inline FdOptions exact_if_available(FdOptions o) {
    if (o.source == DerivativeSource::FiniteDifference) o.source = DerivativeSource::Automatic;
    return o;
}

// Embedding, tangent matrix and unit normal at y without touching ambient derivatives.
struct SurfaceFrame {
    Point x;
    Eigen::MatrixXd T, g, gamma, gamma_inv;
    Eigen::VectorXd nu;
};

inline SurfaceFrame surface_frame(const StationarySurface& s, const Eigen::VectorXd& y) {
    const int d = s.dim(), k = s.patch.height_axis;
    FdOptions ex;
    ex.source = DerivativeSource::Automatic;
    ScalarJet f = scalar_jet(s.patch.height, y, 1, ex);
    SurfaceFrame o;
    o.x = s.patch.embed(y);
    o.g = s.amb.metric.at(o.x);
    o.T = Eigen::MatrixXd::Zero(d, d - 1);
    Eigen::VectorXd conormal = Eigen::VectorXd::Zero(d);
    conormal[k] = 1.0;
    for (int i = 0, a = 0; i < d; ++i)
        if (i != k) {
            o.T(i, a) = 1.0;
            o.T(k, a) = f.d[a];
            conormal[i] = -f.d[a];
            ++a;
        }
    o.gamma = o.T.transpose() * o.g * o.T;
    o.gamma_inv = checked_inverse(o.gamma);
    Eigen::VectorXd nu = checked_inverse(o.g) * conormal;
    o.nu = s.patch.orientation * nu / std::sqrt(conormal.dot(nu));
    return o;
}

// v = <V, nu> as a field on the parameter chart.
inline ScalarField normal_component(const StationarySurface& s, const VectorField& V) {
    return ScalarField::from_values(s.parameter_chart(), [s, V](const Point& y) {
        SurfaceFrame f = surface_frame(s, y);
        return V(f.x).dot(f.g * f.nu);
    });
}

inline double stationarity_defect(const StationarySurface& s, const Eigen::VectorXd& y, const FdOptions& opt) {
    SurfacePoint sp = hypersurface_geometry(s.amb.metric, s.patch, y, opt);
    ScalarJet r = scalar_jet(s.amb.rho, sp.x, 1, opt);
    return sp.H + r.d.dot(sp.normal) / r.v;
}

// The zeroth-order coefficient -rho (Ric(nu,nu) + |h|^2) + D^2 rho(nu,nu) - rho^-1 <grad rho, nu>^2.
inline double jacobi_potential(const SurfacePoint& sp, const AmbientState& a) {
    const Eigen::VectorXd& nu = sp.normal;
    double ric = nu.dot(a.cb.ricci * nu);
    double h2 = sp.h_frame.squaredNorm();
    double rn = a.drho.dot(nu);
    return -a.rho * (ric + h2) + nu.dot(a.hess_rho * nu) - rn * rn / a.rho;
}

// L v = -div(rho grad v) - rho (Ric(nu,nu) + |h|^2) v + D^2 rho(nu,nu) v - rho^-1 <grad rho, nu>^2 v,
// for v given on the parameter chart.
inline double weighted_jacobi(const StationarySurface& s, const ScalarField& v, const Eigen::VectorXd& y,
                              const FdOptions& opt = verification_fd()) {
    SurfacePoint sp = hypersurface_geometry(s.amb.metric, s.patch, y, opt);
    AmbientState a = ambient_state(s.amb, sp.x, opt);
    ScalarJet vj = scalar_jet(v, y, 1, opt);
    double lap = laplacian(s.induced, v, y, opt);
    Eigen::VectorXd drho_par = sp.tangent.transpose() * a.drho;
    double cross = drho_par.dot(sp.induced_inv * vj.d);
    return -a.rho * lap - cross + jacobi_potential(sp, a) * vj.v;
}

struct JacobiSample {
    Eigen::VectorXd y;
    double lhs = 0.0, rhs = 0.0, stationarity = 0.0;
};

// Right-hand side of the weighted Jacobi formula in terms of L_V g.
inline double jacobi_formula_rhs(const StationarySurface& s, const VectorField& V, const Eigen::VectorXd& y,
                                 const FdOptions& opt) {
    SurfacePoint sp = hypersurface_geometry(s.amb.metric, s.patch, y, opt);
    AmbientState a = ambient_state(s.amb, sp.x, opt);
    FieldJet vj = V.field().jet(sp.x, 2, exact_if_available(opt));
    LieData ld = lie_data(a.mj, vj);
    const int d = s.dim();
    const Eigen::MatrixXd& F = sp.frame;
    const Eigen::VectorXd& nu = sp.normal;
    auto DL = [&](const Eigen::VectorXd& X, const Eigen::VectorXd& Y, const Eigen::VectorXd& Z) {
        double t = 0.0;
        for (int m = 0; m < d; ++m) t += X[m] * Y.dot(ld.DL[static_cast<std::size_t>(m)] * Z);
        return t;
    };
    double t1 = 0.0, t2 = 0.0;
    for (int k = 0; k < d - 1; ++k) {
        t1 += DL(F.col(k), F.col(k), nu);
        t2 += DL(nu, F.col(k), F.col(k));
    }
    Eigen::MatrixXd Lf = F.transpose() * ld.L * F;
    double t3 = (sp.h_frame.cwiseProduct(Lf)).sum();
    Eigen::VectorXd grad_rho = a.mj.ginv * a.drho;
    double t4 = grad_rho.dot(ld.L * nu);
    // d_k (V(log rho)) = d_k V^i d_i log rho + V^i d_k d_i log rho
    Eigen::VectorXd dl = a.drho / a.rho;
    Eigen::MatrixXd ddl = a.ddrho / a.rho - dl * dl.transpose();
    Eigen::VectorXd dVl = ld.dV.transpose() * dl + ddl * ld.V;
    double t5 = nu.dot(dVl);
    return -a.rho * t1 + 0.5 * a.rho * t2 - a.rho * t3 - t4 + a.rho * t5;
}

inline std::vector<JacobiSample> verify_jacobi_formula(const StationarySurface& s, const VectorField& V,
                                                       const std::vector<Eigen::VectorXd>& ys,
                                                       const FdOptions& opt = verification_fd(), double tol_stat = 1e-6) {
    ScalarField v = normal_component(s, V);
    std::vector<JacobiSample> out;
    for (const auto& y : ys) {
        JacobiSample js;
        js.y = y;
        js.stationarity = stationarity_defect(s, y, opt);
        if (std::abs(js.stationarity) > tol_stat)
            throw DomainError("surface is not (g, rho)-stationary at a sample point (defect " +
                              std::to_string(js.stationarity) + ")");
        js.lhs = weighted_jacobi(s, v, y, opt);
        js.rhs = jacobi_formula_rhs(s, V, y, opt);
        out.push_back(js);
    }
    return out;
}

// Fourth-order central differences with one Richardson step; column a is d/dy_a.
template <class F>
Eigen::MatrixXd fd_jacobian(const F& f, const Eigen::VectorXd& y, const Eigen::VectorXd& h) {
    Eigen::VectorXd f0 = f(y);
    Eigen::MatrixXd J(f0.size(), y.size());
    for (int a = 0; a < y.size(); ++a) {
        auto D = [&](double e) {
            Eigen::VectorXd yp = y, ym = y, yp2 = y, ym2 = y;
            yp[a] += e;
            ym[a] -= e;
            yp2[a] += 2 * e;
            ym2[a] -= 2 * e;
            return Eigen::VectorXd((-f(yp2) + 8.0 * f(yp) - 8.0 * f(ym) + f(ym2)) / (12.0 * e));
        };
        Eigen::VectorXd c = D(h[a]), fine = D(0.5 * h[a]);
        J.col(a) = fine + (fine - c) / 15.0;
    }
    return J;
}

inline Eigen::VectorXd parameter_steps(const StationarySurface& s, const Eigen::VectorXd& y, double scale) {
    Eigen::VectorXd h(y.size());
    for (int a = 0; a < y.size(); ++a) h[a] = s.parameter_chart().step(a, y, scale);
    return h;
}

// Parameter components of V^tan.
inline Eigen::VectorXd tangential_components(const StationarySurface& s, const VectorField& V, const Eigen::VectorXd& y) {
    SurfaceFrame f = surface_frame(s, y);
    return f.gamma_inv * (f.T.transpose() * (f.g * V(f.x)));
}

// sqrt(det gamma) times the parameter components of rho W^tan - rho Z + <V^tan, grad rho> V^tan,
// the combined field whose surface divergence enters the second variation identity.
inline Eigen::VectorXd variation_flux(const StationarySurface& s, const VectorField& V, const Eigen::VectorXd& y,
                                     const FdOptions& opt) {
    SurfacePoint sp = hypersurface_geometry(s.amb.metric, s.patch, y, opt);
    FieldJet vj = V.field().jet(sp.x, 1, exact_if_available(opt));
    ScalarJet r = scalar_jet(s.amb.rho, sp.x, 1, opt);
    const int d = s.dim();
    Eigen::VectorXd Vv = vj.v;
    double v = Vv.dot(sp.g * sp.normal);
    Eigen::VectorXd W = vj.d * Vv;  // V^k d_k V^i
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < d; ++j) W[i] += sp.christoffel(i, k, j) * Vv[k] * Vv[j];
    auto toparam = [&](const Eigen::VectorXd& X) {
        return Eigen::VectorXd(sp.induced_inv * (sp.tangent.transpose() * (sp.g * X)));
    };
    Eigen::VectorXd U = toparam(Vv);
    Eigen::MatrixXd dU = fd_jacobian([&](const Eigen::VectorXd& z) { return tangential_components(s, V, z); }, y,
                                     parameter_steps(s, y, 1.0));
    Tensor3 GS = christoffel(s.induced, y, opt);
    const int p = d - 1;
    Eigen::VectorXd covU = dU * U;
    double divU = dU.trace();
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) {
            divU += GS(b, b, a) * U[a];
            for (int c = 0; c < p; ++c) covU[a] += GS(a, b, c) * U[b] * U[c];
        }
    Eigen::VectorXd Z = covU - divU * U + 2.0 * v * (sp.induced_inv * (sp.h * U));
    double Vrho = r.d.dot(sp.tangent * U);
    Eigen::VectorXd Y = r.v * toparam(W) - r.v * Z + Vrho * U;
    return std::sqrt(sp.induced.determinant()) * Y;
}

struct SecondVariationSample {
    Eigen::VectorXd y;
    double quadratic = 0.0;   // rho|grad v|^2 + potential v^2
    double divergence = 0.0;  // div(rho W^tan) - div(rho Z) + div(<V^tan, grad rho> V^tan)
    double lhs = 0.0, rhs = 0.0;
};

// Right-hand side of the second variation identity; equal to d^2/ds^2 (rho J_s) at s = 0.
inline double second_variation_rhs(const SurfacePoint& sp, const AmbientState& a, const LieData& ld) {
    const Eigen::MatrixXd& F = sp.frame;
    Eigen::MatrixXd Lf = F.transpose() * ld.L * F;
    Eigen::MatrixXd LLf = F.transpose() * ld.LL * F;
    double trL = Lf.trace();
    double Vrho = a.drho.dot(ld.V);
    double VVrho = ld.V.dot(ld.dV.transpose() * a.drho) + ld.V.dot(a.ddrho * ld.V);
    return 0.5 * a.rho * LLf.trace() + VVrho - 0.5 * a.rho * Lf.squaredNorm() + 0.25 * a.rho * trL * trL + Vrho * trL;
}

inline double second_variation_quadratic(const StationarySurface& s, const ScalarField& v, const Eigen::VectorXd& y,
                                         const FdOptions& opt, SurfacePoint* sp_out = nullptr, AmbientState* a_out = nullptr) {
    SurfacePoint sp = hypersurface_geometry(s.amb.metric, s.patch, y, opt);
    AmbientState a = ambient_state(s.amb, sp.x, opt);
    ScalarJet vj = scalar_jet(v, y, 1, opt);
    double q = a.rho * vj.d.dot(sp.induced_inv * vj.d) + jacobi_potential(sp, a) * vj.v * vj.v;
    if (sp_out) *sp_out = sp;
    if (a_out) *a_out = a;
    return q;
}

inline SecondVariationSample second_variation_at(const StationarySurface& s, const VectorField& V, const ScalarField& v,
                                                 const Eigen::VectorXd& y, const FdOptions& opt) {
    SecondVariationSample o;
    o.y = y;
    SurfacePoint sp;
    AmbientState a;
    o.quadratic = second_variation_quadratic(s, v, y, opt, &sp, &a);
    Eigen::MatrixXd J = fd_jacobian([&](const Eigen::VectorXd& z) { return variation_flux(s, V, z, opt); }, y,
                                    parameter_steps(s, y, 10.0));
    o.divergence = J.trace() / std::sqrt(sp.induced.determinant());
    o.lhs = o.quadratic + o.divergence;
    FieldJet vj = V.field().jet(sp.x, 2, exact_if_available(opt));
    o.rhs = second_variation_rhs(sp, a, lie_data(a.mj, vj));
    return o;
}

inline std::vector<SecondVariationSample> verify_second_variation(const StationarySurface& s, const VectorField& V,
                                                                  const std::vector<Eigen::VectorXd>& ys,
                                                                  const FdOptions& opt = verification_fd(),
                                                                  double tol_stat = 1e-6) {
    ScalarField v = normal_component(s, V);
    std::vector<SecondVariationSample> out;
    for (const auto& y : ys) {
        double st = stationarity_defect(s, y, opt);
        if (std::abs(st) > tol_stat)
            throw DomainError("surface is not (g, rho)-stationary at a sample point (defect " + std::to_string(st) + ")");
        out.push_back(second_variation_at(s, V, v, y, opt));
    }
    return out;
}

// Tensor-product Gauss rule on a parameter box.
struct BoxQuadrature {
    std::vector<Eigen::VectorXd> nodes;
    std::vector<double> weights;
};

inline BoxQuadrature box_quadrature(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int panels) {
    const int p = static_cast<int>(lo.size());
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(p)), ws(static_cast<std::size_t>(p));
    for (int a = 0; a < p; ++a) gauss_nodes(lo[a], hi[a], panels, xs[static_cast<std::size_t>(a)], ws[static_cast<std::size_t>(a)]);
    BoxQuadrature q;
    std::vector<std::size_t> idx(static_cast<std::size_t>(p), 0);
    const std::size_t m = xs[0].size();
    while (true) {
        Eigen::VectorXd y(p);
        double w = 1.0;
        for (int a = 0; a < p; ++a) {
            y[a] = xs[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
            w *= ws[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
        }
        q.nodes.push_back(y);
        q.weights.push_back(w);
        int a = p - 1;
        while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == m) idx[static_cast<std::size_t>(a--)] = 0;
        if (a < 0) break;
    }
    return q;
}

// Weighted area of the image of the parameter box under the time-t flow of V, by RK4 on
// the point and its variational Jacobian.
inline double flowed_weighted_area(const StationarySurface& s, const VectorField& V, const BoxQuadrature& q, double t,
                                   int steps = 8) {
    const int d = s.dim();
    FdOptions ex;
    ex.source = DerivativeSource::Automatic;
    auto rhs = [&](double, const Eigen::VectorXd& st) {
        Eigen::VectorXd x = st.head(d);
        FieldJet j = V.field().jet(x, 1, ex);
        Eigen::Map<const Eigen::MatrixXd> J(st.data() + d, d, d);
        Eigen::VectorXd out(d + d * d);
        out.head(d) = j.v;
        Eigen::MatrixXd dJ = j.d * J;
        out.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(dJ.data(), d * d);
        return out;
    };
    double total = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        SurfaceFrame f = surface_frame(s, q.nodes[i]);
        Eigen::VectorXd st(d + d * d);
        st.head(d) = f.x;
        Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
        st.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(I.data(), d * d);
        double h = t / steps;
        for (int k = 0; k < steps && t != 0.0; ++k) st = rk4_step(rhs, k * h, st, h);
        Point x = st.head(d);
        Eigen::Map<const Eigen::MatrixXd> J(st.data() + d, d, d);
        Eigen::MatrixXd Tt = J * f.T;
        double area = std::sqrt((Tt.transpose() * s.amb.metric.at(x) * Tt).determinant());
        total += q.weights[i] * s.amb.rho(x) * area;
    }
    return total;
}

struct FlowOracleResult {
    double flow = 0.0;         // Richardson-combined second difference of the weighted area
    double flow_coarse = 0.0;  // second difference at eps alone
    double rhs_integral = 0.0;
    double quadratic_integral = 0.0;  // equals the flow value when V vanishes near the box boundary
    double area = 0.0;
};

inline FlowOracleResult second_variation_flow_oracle(const StationarySurface& s, const VectorField& V,
                                                     const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int panels = 2,
                                                     double eps = 1e-3, const FdOptions& opt = verification_fd()) {
    BoxQuadrature q = box_quadrature(lo, hi, panels);
    const std::vector<double> ts{0.0, 0.5 * eps, -0.5 * eps, eps, -eps, 2 * eps, -2 * eps};
    std::vector<double> av = parallel_map<double>(ts.size(), [&](std::size_t i) { return flowed_weighted_area(s, V, q, ts[i]); });
    double a0 = av[0], ah1 = av[1], am1 = av[2], a1 = av[3], am = av[4], a2 = av[5], am2 = av[6];
    FlowOracleResult r;
    r.area = a0;
    r.flow_coarse = second_difference(am2, am, a0, a1, a2, eps);
    double fine = second_difference(am, am1, a0, ah1, a1, 0.5 * eps);
    r.flow = fine + (fine - r.flow_coarse) / 15.0;
    ScalarField v = normal_component(s, V);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        SurfacePoint sp;
        AmbientState a;
        double quad = second_variation_quadratic(s, v, q.nodes[i], opt, &sp, &a);
        FieldJet vj = V.field().jet(sp.x, 2, exact_if_available(opt));
        double vol = std::sqrt(sp.induced.determinant());
        r.rhs_integral += q.weights[i] * vol * second_variation_rhs(sp, a, lie_data(a.mj, vj));
        r.quadratic_integral += q.weights[i] * vol * quad;
    }
    return r;
}

// Integral of u L v - v L u over a parameter box.
inline std::pair<double, double> self_adjointness_defect(const StationarySurface& s, const ScalarField& u, const ScalarField& v,
                                                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int panels = 2,
                                                         const FdOptions& opt = verification_fd()) {
    BoxQuadrature q = box_quadrature(lo, hi, panels);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const auto& y = q.nodes[i];
        double vol = std::sqrt(s.induced.at(y).determinant());
        double a = u(y) * weighted_jacobi(s, v, y, opt), b = v(y) * weighted_jacobi(s, u, y, opt);
        diff += q.weights[i] * vol * (a - b);
        scale += q.weights[i] * vol * std::abs(a);
    }
    return {diff, scale};
}

struct SlicingSample {
    double lhs = 0.0, rhs = 0.0;
    double gradient_lhs = 0.0, gradient_rhs = 0.0;  // only for n < N
};

// Pointwise slicing identity for rho_check = vcheck rho / b, with vcheck > 0 on the parameter chart.
// The right side is 2 rho^-1 vcheck^-1 L vcheck; L carries the weight rho.
inline SlicingSample slicing_identity_at(const StationarySurface& s, const ScalarField& vcheck, double b,
                                         double N_minus_n, const Eigen::VectorXd& y, const FdOptions& opt = verification_fd()) {
    SurfacePoint sp = hypersurface_geometry(s.amb.metric, s.patch, y, opt);
    AmbientState a = ambient_state(s.amb, sp.x, opt);
    ScalarField rho = s.amb.rho;
    GraphPatch patch = s.patch;
    ScalarField log_rc = ScalarField::from_values(s.parameter_chart(), [vcheck, rho, patch, b](const Point& z) {
        return std::log(vcheck(z)) + std::log(rho(patch.embed(z))) - std::log(b);
    });
    ScalarField log_v = ScalarField::from_values(s.parameter_chart(), [vcheck](const Point& z) { return std::log(vcheck(z)); });
    const Eigen::MatrixXd& gi = sp.induced_inv;
    ScalarJet lrc = scalar_jet(log_rc, y, 1, opt);
    ScalarJet lv = scalar_jet(log_v, y, 1, opt);
    double lap_rc = laplacian(s.induced, log_rc, y, opt);
    double R_sigma = curvature(s.induced, y, opt).scalar;

    ScalarJet lr;  // ambient log rho
    lr.v = std::log(a.rho);
    lr.d = a.drho / a.rho;
    lr.dd = a.ddrho / a.rho - lr.d * lr.d.transpose();
    double lap_lr = a.mj.ginv.cwiseProduct(hessian_from(a.cb.christoffel, lr)).sum();
    double grad_lr2 = lr.d.dot(a.mj.ginv * lr.d);
    double h2 = sp.h_frame.squaredNorm();

    SlicingSample o;
    o.lhs = -2.0 * lap_rc - lrc.d.dot(gi * lrc.d) + R_sigma + 2.0 * lap_lr + grad_lr2 - a.cb.scalar - lv.d.dot(gi * lv.d) - h2;
    o.rhs = 2.0 * weighted_jacobi(s, vcheck, y, opt) / (a.rho * vcheck(y));
    if (N_minus_n > 0.0) {
        double k = N_minus_n;
        Eigen::VectorXd lr_par = sp.tangent.transpose() * lr.d;
        double rn = lr.d.dot(sp.normal);
        o.gradient_lhs = grad_lr2 / k + lv.d.dot(gi * lv.d) - lrc.d.dot(gi * lrc.d) / (k + 1.0);
        Eigen::VectorXd w = lr_par / k - lv.d;
        o.gradient_rhs = k / (k + 1.0) * w.dot(gi * w) + rn * rn / k;
    }
    return o;
}

// ---- corpus ---------------------------------------------------------------

inline MetricField euclidean_metric(int d) {
    std::vector<Axis> ax;
    for (int i = 0; i < d; ++i) ax.push_back(Axis::line("x" + std::to_string(i), -1e6, 1e6, 1e-3));
    return MetricField::generic(CoordinateChart(ax), [d](auto, auto g) {
        using T = typename decltype(g)::value_type;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(i * d + j)] = T(i == j ? 1.0 : 0.0);
    });
}

// Plane z = a x + b y + c in flat R^3 with rho = 1.
inline StationarySurface plane_surface(double a = 0.3, double b = -0.2, double c = 0.1) {
    MetricField g = euclidean_metric(3);
    ScalarField rho = ScalarField::generic(g.chart(), [](auto x) { return 0.0 * x[0] + 1.0; });
    GraphPatch p = make_graph(g.chart(), 2, [a, b, c](auto y) { return a * y[0] + b * y[1] + c; }, 1);
    return StationarySurface::make({g, rho}, p);
}

// Upper hemisphere of radius R in flat R^3 with rho = |x|^-2, outward normal.
inline StationarySurface sphere_surface(double R = 1.5, bool weighted = true) {
    MetricField g = euclidean_metric(3);
    ScalarField rho = weighted ? ScalarField::generic(g.chart(), [](auto x) { return 1.0 / (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); })
                               : ScalarField::generic(g.chart(), [](auto x) { return 0.0 * x[0] + 1.0; });
    GraphPatch p = make_graph(g.chart(), 2, [R](auto y) { return sqrt(R * R - y[0] * y[0] - y[1] * y[1]); }, 1);
    return StationarySurface::make({g, rho}, p);
}

// The slice {tau_{n-2} = t0} of the model with its weight.
inline StationarySurface hm_slice_surface(const HMModel& m, double t0 = 0.4) {
    MetricField g = m.metric();
    GraphPatch p = make_graph(g.chart(), m.n() - 1, [t0](auto y) { return 0.0 * y[0] + t0; }, 1);
    return StationarySurface::make({g, m.weight_field()}, p);
}

// Deterministic coefficients in [-1, 1].
inline std::vector<double> test_coefficients(unsigned seed, int count) {
    std::mt19937 rng(seed);
    std::vector<double> c(static_cast<std::size_t>(count));
    for (double& x : c) x = 2.0 * (static_cast<double>(rng()) / 4294967296.0) - 1.0;
    return c;
}

// (1 - t^2)^6 on |t| < 1, zero outside; C^5.
template <class T>
T bump(const T& t) {
    if (!(value_of(t) * value_of(t) < 1.0)) return T(0.0) * t;
    T q = 1.0 - t * t;
    T q2 = q * q;
    return q2 * q2 * q2;
}

// V^i = scale w(x) (a_i + sum_j b_ij s_j + c_ij s_j^2), s_j = x_j - center_j on non-periodic axes and
// sin(x_j) on periodic ones. w is a product of bumps on the listed axes, or 1.
struct TestVectorSpec {
    unsigned seed = 1;
    double scale = 1.0;
    Eigen::VectorXd center;
    std::vector<int> bump_axes;
    Eigen::VectorXd bump_center, bump_half_width;
    std::vector<int> zero_components;
};

inline VectorField test_vector_field(const CoordinateChart& chart, const TestVectorSpec& spec) {
    const int d = chart.dim();
    std::vector<double> c = test_coefficients(spec.seed, d * (1 + 2 * d));
    std::vector<bool> periodic(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) periodic[static_cast<std::size_t>(j)] = chart.axis(j).periodic;
    Eigen::VectorXd ctr = spec.center.size() == d ? spec.center : Eigen::VectorXd::Zero(d);
    TestVectorSpec sp = spec;
    return VectorField::generic(chart, [c, periodic, ctr, d, sp](auto x, auto out) {
        using T = typename decltype(out)::value_type;
        std::vector<T> sj(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j)
            sj[static_cast<std::size_t>(j)] = periodic[static_cast<std::size_t>(j)] ? T(sin(x[j])) : T(x[j] - ctr[j]);
        T w = T(sp.scale);
        for (std::size_t a = 0; a < sp.bump_axes.size(); ++a) {
            const auto ia = static_cast<Eigen::Index>(a);
            w = w * bump(T((x[static_cast<std::size_t>(sp.bump_axes[a])] - sp.bump_center[ia]) / sp.bump_half_width[ia]));
        }
        for (int i = 0; i < d; ++i) {
            const double* ci = c.data() + i * (1 + 2 * d);
            T v = T(ci[0]);
            for (int j = 0; j < d; ++j) {
                const T& s = sj[static_cast<std::size_t>(j)];
                v = v + ci[1 + j] * s + ci[1 + d + j] * s * s;
            }
            out[static_cast<std::size_t>(i)] = w * v;
        }
        for (int i : sp.zero_components) out[static_cast<std::size_t>(i)] = T(0.0) * x[0];
    });
}


// ---- report ---------------------------------------------------------------

struct StabilityConfig {
    int N = 4;
    int n = 3;  // slice dimension n - 1 inside the n-dimensional model
    int points = 30;
    double tol_identity = 1e-5;
    double tol_flow = 1e-3;
    double tol_stat = 1e-6;
    double eps = 1e-3;
    unsigned seed = 1;
};

struct StabilityReport {
    std::vector<Check> checks;
    Table table;  // case, point, jacobi_residual, second_variation_residual
    double max_jacobi = 0.0, max_second_variation = 0.0, max_slicing = 0.0;
    FlowOracleResult plane_flow, sphere_flow, slice_flow;
};

inline StabilityReport verify_stability(const StabilityConfig& cfg) {
    StabilityReport rep;
    const FdOptions opt = verification_fd();
    const std::string tag = "(N=" + std::to_string(cfg.N) + ",n=" + std::to_string(cfg.n) + ")";
    auto add = [&](std::string name, std::string ref, double v, double thr, Relation r = Relation::Less) {
        rep.checks.push_back(make_check("stability." + std::move(name), std::move(ref), v, thr, r));
    };
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    auto v2 = [](double a, double b) { Eigen::VectorXd v(2); v << a, b; return v; };

    // closed-form operator examples
    {
        const double a = 0.3, b = -0.2;
        StationarySurface pl = plane_surface(a, b, 0.1);
        ScalarField v = ScalarField::generic(pl.parameter_chart(), [](auto y) { return sin(y[0]) * y[1] * y[1]; });
        Eigen::Matrix2d gi;
        gi << 1 + a * a, a * b, a * b, 1 + b * b;
        gi = gi.inverse().eval();
        Eigen::VectorXd y = v2(0.2, 0.7);
        Eigen::Matrix2d H;
        H << -std::sin(y[0]) * y[1] * y[1], 2 * std::cos(y[0]) * y[1], 2 * std::cos(y[0]) * y[1], 2 * std::sin(y[0]);
        add("jacobi_plane_is_minus_laplacian", "jacobi-operator", std::abs(weighted_jacobi(pl, v, y, opt) + gi.cwiseProduct(H).sum()), 1e-8);
        const double R = 1.5;
        StationarySurface sp = sphere_surface(R, false);
        ScalarField one = ScalarField::generic(sp.parameter_chart(), [](auto z) { return 0.0 * z[0] + 1.0; });
        add("jacobi_sphere_constant", "jacobi-operator", std::abs(weighted_jacobi(sp, one, v2(0.3, -0.4), opt) + 2.0 / (R * R)), 1e-8);
    }

    HMModel model(HMParams(cfg.N, cfg.n));
    StationarySurface slice = hm_slice_surface(model, 0.4);
    const int k = slice.patch.height_axis;
    const int p = cfg.n - 1;
    std::vector<Eigen::VectorXd> ys;
    for (int i = 0; i < cfg.points; ++i) {
        Eigen::VectorXd y(p);
        y[0] = 1.2 + 2.8 * halton_coordinate(static_cast<unsigned>(i + 1), 0);
        // tau0 is periodic on [0, 2 pi); keep samples and bumps away from the seam
        y[1] = std::numbers::pi - 1.5 + 3.0 * halton_coordinate(static_cast<unsigned>(i + 1), 1);
        for (int a = 2; a < p; ++a) y[a] = -1.5 + 3.0 * halton_coordinate(static_cast<unsigned>(i + 1), a);
        ys.push_back(y);
    }
    MetricField gm = slice.amb.metric;
    GraphPatch patch = slice.patch;
    ScalarField killing = ScalarField::from_values(slice.parameter_chart(), [gm, patch, k](const Point& y) {
        return std::sqrt(gm.at(patch.embed(y))(k, k));
    });
    {
        double worst = 0.0;
        for (const auto& y : ys)
            worst = std::max(worst, std::abs(weighted_jacobi(slice, killing, y, opt)) / (slice.amb.rho(patch.embed(y)) * killing(y)));
        add("jacobi_slice_killing_normal " + tag, "jacobi-operator", worst, 1e-6);
    }

    // Jacobi formula and second-variation integrand on the corpus
    struct Case {
        std::string name;
        StationarySurface s;
        std::vector<Eigen::VectorXd> ys;
    };
    std::vector<Case> cases{{"plane", plane_surface(), {v2(0.1, 0.2), v2(-0.3, 0.5), v2(0.6, -0.4)}},
                            {"sphere", sphere_surface(1.5, true), {v2(0.3, -0.4), v2(-0.6, 0.2), v2(0.1, 0.8)}},
                            {"hm_slice", slice, ys}};
    rep.table.name = "stability_N" + std::to_string(cfg.N) + "_n" + std::to_string(cfg.n);
    rep.table.header = {"case", "point", "jacobi_residual", "second_variation_residual"};
    double tangent_rhs = 0.0, stat = 0.0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const Case& cs = cases[c];
        for (const auto& y : cs.ys) stat = std::max(stat, std::abs(stationarity_defect(cs.s, y, opt)));
        TestVectorSpec spec;
        spec.seed = cfg.seed + static_cast<unsigned>(c);
        spec.scale = 0.5;
        spec.center = cs.s.patch.embed(cs.ys[0]);
        VectorField V = test_vector_field(cs.s.amb.metric.chart(), spec);
        auto rows = parallel_map<std::array<double, 2>>(cs.ys.size(), [&](std::size_t i) {
            auto js = verify_jacobi_formula(cs.s, V, {cs.ys[i]}, opt, cfg.tol_stat)[0];
            auto sv = verify_second_variation(cs.s, V, {cs.ys[i]}, opt, cfg.tol_stat)[0];
            return std::array<double, 2>{rel(js.lhs, js.rhs), rel(sv.lhs, sv.rhs)};
        });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rep.max_jacobi = std::max(rep.max_jacobi, rows[i][0]);
            rep.max_second_variation = std::max(rep.max_second_variation, rows[i][1]);
            rep.table.rows.push_back({double(c), double(i), rows[i][0], rows[i][1]});
        }
    }
    add("stationarity_of_corpus " + tag, "stationary", stat, cfg.tol_stat);
    add("jacobi_formula_residual " + tag, "jacobi-formula", rep.max_jacobi, cfg.tol_identity);
    add("second_variation_integrand_residual " + tag, "second-variation", rep.max_second_variation, cfg.tol_identity);

    {
        // V tangent to the slice: the left side vanishes identically
        TestVectorSpec spec;
        spec.seed = cfg.seed + 17;
        spec.scale = 0.5;
        spec.zero_components = {k};
        VectorField V = test_vector_field(slice.amb.metric.chart(), spec);
        for (std::size_t i = 0; i < std::min<std::size_t>(ys.size(), 5); ++i)
            tangent_rhs = std::max(tangent_rhs, std::abs(jacobi_formula_rhs(slice, V, ys[i], opt)));
        add("jacobi_formula_tangent_field " + tag, "jacobi-formula", tangent_rhs, cfg.tol_identity);
        // rotation along the sliced direction, localized in r and tau0
        VectorField R = VectorField::generic(slice.amb.metric.chart(), [k](auto x, auto out) {
            using T = typename decltype(out)::value_type;
            for (auto& e : out) e = T(0.0) * x[0];
            out[static_cast<std::size_t>(k)] = 0.7 * bump(T((x[0] - 2.0) / 0.8)) * bump(T((x[1] - std::numbers::pi) / 1.2)) + 0.0 * x[0];
        });
        double worst = 0.0;
        for (std::size_t i = 0; i < std::min<std::size_t>(ys.size(), 8); ++i) {
            auto sv = verify_second_variation(slice, R, {ys[i]}, opt, cfg.tol_stat)[0];
            worst = std::max(worst, rel(sv.lhs, sv.rhs));
        }
        add("second_variation_slice_rotation " + tag, "second-variation", worst, cfg.tol_identity);
    }

    {
        // zero field
        TestVectorSpec zs;
        zs.scale = 0.0;
        VectorField Z = test_vector_field(slice.amb.metric.chart(), zs);
        auto sv = verify_second_variation(slice, Z, {ys[0]}, opt, cfg.tol_stat)[0];
        add("second_variation_zero_field", "second-variation", std::abs(sv.lhs) + std::abs(sv.rhs), 1e-12);
    }

    // flow oracles
    {
        StationarySurface pl = plane_surface(0.0, 0.0, 0.0);
        VectorField nb = VectorField::generic(pl.amb.metric.chart(), [](auto x, auto out) {
            out[0] = 0.0 * x[0];
            out[1] = 0.0 * x[0];
            out[2] = bump(x[0]) * bump(x[1]);
        });
        rep.plane_flow = second_variation_flow_oracle(pl, nb, v2(-1, -1), v2(1, 1), 2, cfg.eps, opt);
        add("flow_plane_normal_bump", "second-variation-flow",
            std::abs(rep.plane_flow.flow - rep.plane_flow.quadratic_integral) / rep.plane_flow.quadratic_integral, 1e-4);

        StationarySurface sp = sphere_surface(1.5, true);
        TestVectorSpec spec;
        spec.seed = cfg.seed + 3;
        spec.scale = 0.5;
        spec.bump_axes = {0, 1};
        spec.bump_center = v2(0, 0);
        spec.bump_half_width = v2(0.6, 0.6);
        VectorField V = test_vector_field(sp.amb.metric.chart(), spec);
        rep.sphere_flow = second_variation_flow_oracle(sp, V, v2(-0.6, -0.6), v2(0.6, 0.6), 2, cfg.eps, opt);
        const auto& f = rep.sphere_flow;
        add("flow_sphere_vs_integral", "second-variation-flow",
            std::abs(f.flow - f.rhs_integral) / std::max(std::abs(f.rhs_integral), 1e-12), cfg.tol_flow);

        // three-dimensional slice of HM(N,3): 2-d quadrature box
        HMModel m3(HMParams(cfg.N, 3));
        StationarySurface s3 = hm_slice_surface(m3, 0.4);
        TestVectorSpec hs;
        hs.seed = cfg.seed + 5;
        hs.scale = 0.5;
        hs.center = Eigen::Vector3d(2.0, std::numbers::pi, 0.4);
        hs.bump_axes = {0, 1};
        hs.bump_center = v2(2.0, std::numbers::pi);
        hs.bump_half_width = v2(0.7, 1.0);
        VectorField H = test_vector_field(s3.amb.metric.chart(), hs);
        rep.slice_flow = second_variation_flow_oracle(s3, H, v2(1.3, std::numbers::pi - 1.0), v2(2.7, std::numbers::pi + 1.0), 1, cfg.eps, opt);
        const auto& h = rep.slice_flow;
        add("flow_hm_slice_vs_integral (N=" + std::to_string(cfg.N) + ",n=3)", "second-variation-flow",
            std::abs(h.flow - h.rhs_integral) / std::max(std::abs(h.rhs_integral), 1e-12), cfg.tol_flow);
        add("flow_hm_slice_quadratic_vs_integral (N=" + std::to_string(cfg.N) + ",n=3)", "second-variation-flow",
            std::abs(h.quadratic_integral - h.rhs_integral) / std::max(std::abs(h.rhs_integral), 1e-12), cfg.tol_flow);
    }

    {
        StationarySurface sp = sphere_surface(1.5, true);
        const CoordinateChart& pc = sp.parameter_chart();
        ScalarField u = ScalarField::generic(pc, [](auto y) { return bump(y[0] / 0.6) * bump(y[1] / 0.6) * (1.0 + y[0]); });
        ScalarField w = ScalarField::generic(pc, [](auto y) { return bump(y[0] / 0.6) * bump(y[1] / 0.6) * cos(y[1]) * y[0]; });
        auto [diff, scale] = self_adjointness_defect(sp, u, w, v2(-0.6, -0.6), v2(0.6, 0.6), 1, opt);
        add("jacobi_self_adjoint", "jacobi-operator", std::abs(diff) / scale, 1e-6);
    }

    {
        // slicing identity, including the unweighted n = N model
        double worst = 0.0, min_sq = kInf, grad = 0.0;
        for (int n : {cfg.n, cfg.N}) {
            if (n < 3) continue;
            StationarySurface s = hm_slice_surface(HMModel(HMParams(cfg.N, n)), 0.4);
            const int kk = s.patch.height_axis;
            MetricField g = s.amb.metric;
            GraphPatch pp = s.patch;
            ScalarField kn = ScalarField::from_values(s.parameter_chart(), [g, pp, kk](const Point& y) { return std::sqrt(g.at(pp.embed(y))(kk, kk)); });
            ScalarField bent = ScalarField::from_values(s.parameter_chart(), [kn](const Point& y) {
                return kn(y) * std::exp(0.3 * std::sin(y[1]) + 0.1 * y[0]);
            });
            for (const ScalarField& vc : {kn, bent})
                for (std::size_t i = 0; i < std::min<std::size_t>(ys.size(), 10); ++i) {
                    Eigen::VectorXd y = Eigen::VectorXd::Constant(n - 1, 0.25);
                    y[0] = ys[i][0];
                    y[1] = ys[i][1];
                    SlicingSample ss = slicing_identity_at(s, vc, 1.0, cfg.N - n, y, opt);
                    worst = std::max(worst, rel(ss.lhs, ss.rhs));
                    if (cfg.N > n) {
                        min_sq = std::min(min_sq, ss.gradient_rhs);
                        grad = std::max(grad, rel(ss.gradient_lhs, ss.gradient_rhs));
                    }
                }
        }
        rep.max_slicing = worst;
        add("slicing_identity " + tag, "slicing-identity", worst, cfg.tol_identity);
        if (cfg.N > cfg.n) {
            add("gradient_terms_identity " + tag, "slicing-identity", grad, cfg.tol_identity);
            add("gradient_terms_nonnegative " + tag, "slicing-identity", min_sq, 0.0, Relation::GreaterEqual);
        }
    }

    {
        TestVectorSpec spec;
        spec.seed = cfg.seed + 9;
        spec.scale = 0.5;
        VectorField V = test_vector_field(slice.amb.metric.chart(), spec);
        auto residual = [&](double h) {
            FdOptions o;
            o.h_scale = h;
            auto js = verify_jacobi_formula(slice, V, {ys[0]}, o, cfg.tol_stat)[0];
            return std::abs(js.lhs - js.rhs);
        };
        add("jacobi_refinement_ratio " + tag, "jacobi-formula", residual(40.0) / residual(20.0), 8.0, Relation::Greater);
    }
    return rep;
}

}  // namespace hmlab
