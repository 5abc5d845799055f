#pragma once

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "hmlab/check.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/hypersurface.hpp"

namespace hmlab {

// Defining equation of s_hat: (1 - s^-2)^(-1/2) - 2^N (s^(2-N) - s^(1-N)).
inline double s_hat_defect(double s, int N) {
    return 1.0 / std::sqrt(1.0 - 1.0 / (s * s)) - std::ldexp(std::pow(s, 2.0 - N) - std::pow(s, 1.0 - N), N);
}

struct SHat {
    double value = 0.0;
    double residual = 0.0;
    double bracket_lo = 0.0, bracket_hi = 0.0;
    int sign_changes = 0;  // on the scan grid over (2, 1e6)
};

inline SHat solve_s_hat(int N) {
    if (N < 3) throw ConfigError("s_hat needs N >= 3");
    SHat r;
    double lo = 2.0, prev = s_hat_defect(lo, N);
    bool found = false;
    for (double s = 2.0 * 1.01; s < 1e6; s *= 1.01) {
        double d = s_hat_defect(s, N);
        if ((d > 0) != (prev > 0)) {
            ++r.sign_changes;
            if (!found) {
                r.bracket_lo = lo;
                r.bracket_hi = s;
                found = true;
            }
        }
        prev = d;
        lo = s;
    }
    if (!found) throw ConvergenceError("no sign change of the s_hat equation on (2, 1e6)");
    auto f = [N](double s) { return s_hat_defect(s, N); };
    auto [a, b] = boost::math::tools::bisect(f, r.bracket_lo, r.bracket_hi,
                                             boost::math::tools::eps_tolerance<double>(52));
    r.value = 0.5 * (a + b);
    r.residual = std::abs(s_hat_defect(r.value, N));
    return r;
}

// s_hat is needed inside every psi evaluation; cache per N.
inline double s_hat(int N) {
    static std::mutex mu;
    static std::map<int, double> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(N);
    if (it != cache.end()) return it->second;
    double v = solve_s_hat(N).value;
    cache[N] = v;
    return v;
}

template <class T>
T barrier_psi(const T& s, int N) {
    if (!(value_of(s) > 1.0)) throw DomainError("barrier psi is defined on (1, inf)");
    double sh = s_hat(N);
    if (value_of(s) <= sh) return sqrt(1.0 - 1.0 / (s * s));
    double c = std::ldexp(1.0, N);
    return std::sqrt(1.0 - 1.0 / (sh * sh)) + c / N * (std::pow(sh, -double(N)) - pow(s, -double(N))) -
           c / (N + 1.0) * (std::pow(sh, -N - 1.0) - pow(s, -N - 1.0));
}

template <class T>
T barrier_psi_prime(const T& s, int N) {
    if (!(value_of(s) > 1.0)) throw DomainError("barrier psi is defined on (1, inf)");
    if (value_of(s) <= s_hat(N)) return pow(1.0 - 1.0 / (s * s), -0.5) * pow(s, -3.0);
    return std::ldexp(1.0, N) * (pow(s, -N - 1.0) - pow(s, -N - 2.0));
}

// Closed form of chi on each side of s_hat.
inline double chi_closed(double s, int N) {
    if (!(s > 1.0)) throw DomainError("chi is defined on (1, inf)");
    double sh = s_hat(N);
    if (s == sh) throw DomainError("chi is undefined at s_hat");
    if (s < sh) return (N - 2.0) / s;
    double q = std::ldexp(1.0, -2 * N);
    double u = 1.0 - 1.0 / s;
    double A = q / (u * u) + std::pow(s, 2.0 - 2.0 * N);
    double B = q / (u * u * u) + (N - 1.0) * std::pow(s, 3.0 - 2.0 * N);
    return std::pow(A, -1.5) * B * std::pow(s, -double(N));
}

// chi from its defining expression s^(2-N) d/ds [ s^N psi' / (s^-2 + s^2 psi'^2)^(1/2) ],
// differentiated exactly with a jet.
inline double chi_generic(double s, int N) {
    Jet x = Jet::variable(1, 0, s);
    Jet p = barrier_psi_prime(x, N);
    Jet q = pow(x, double(N)) * p / sqrt(1.0 / (x * x) + x * x * p * p);
    return std::pow(s, 2.0 - N) * q.grad(0);
}

struct BarrierSpec {
    int N = 3;
    int n = 3;
    std::vector<double> b;  // b_0 .. b_{n-2}
    double sigma = 10.0;
    double tbar = 0.0;
};

inline bool in_barrier(const BarrierSpec& bs, double r, double theta) {
    if (!(r > bs.sigma)) return false;
    double bl = bs.b.back();
    return bl * bs.sigma * s1_distance(theta, bs.tbar) < barrier_psi(r / bs.sigma, bs.N);
}

// One of the two sheets of the barrier boundary, theta_{n-2} = tbar +- psi(r/sigma)/(b sigma),
// oriented by the outward normal of the barrier domain.
inline GraphPatch barrier_sheet(const CoordinateChart& ambient, const BarrierSpec& bs, int side) {
    const int k = ambient.dim() - 1;
    double bl = bs.b.back(), sig = bs.sigma, tb = bs.tbar;
    int N = bs.N;
    return make_graph(
        ambient, k,
        [=](auto y) { return tb + side * barrier_psi(y[0] / sig, N) / (bl * sig); }, side);
}

struct ConcavitySample {
    double r = 0.0;
    int side = 1;
    double value = 0.0;       // H + <grad log rho, nu>
    double predicted = 0.0;   // -chi(r / sigma)
    double nu_r_over_r = 0.0; // r^-1 <grad r, nu>
};

// Sample points on both sheets: quasi-random r/sigma in [s_lo, s_hi] kept at least
// gap away from s_hat, quasi-random remaining angles, alternating sides.
inline std::vector<std::pair<Eigen::VectorXd, int>> barrier_parameters(const BarrierSpec& bs, int count,
                                                                       double s_lo = 1.05, double s_hi = 30.0,
                                                                       double gap = 0.05) {
    double sh = s_hat(bs.N);
    std::vector<std::pair<Eigen::VectorXd, int>> out;
    for (unsigned i = 0; out.size() < static_cast<std::size_t>(count); ++i) {
        double s = s_lo * std::pow(s_hi / s_lo, halton_coordinate(i, 0));
        if (std::abs(s - sh) < gap) continue;
        Eigen::VectorXd y(bs.n - 1);
        y[0] = s * bs.sigma;
        for (int k = 1; k < bs.n - 1; ++k) y[k] = kTwoPi * halton_coordinate(i, k);
        out.emplace_back(y, (i % 2 == 0) ? 1 : -1);
    }
    return out;
}

inline std::vector<ConcavitySample> barrier_samples(const MetricField& metric, const ScalarField& log_rho,
                                                    const BarrierSpec& bs, int count,
                                                    const FdOptions& opt = verification_fd()) {
    if (metric.dim() != bs.n || static_cast<int>(bs.b.size()) != bs.n - 1)
        throw ConfigError("barrier dimension does not match metric");
    GraphPatch sheets[2] = {barrier_sheet(metric.chart(), bs, 1), barrier_sheet(metric.chart(), bs, -1)};
    std::vector<ConcavitySample> out;
    for (const auto& [y, side] : barrier_parameters(bs, count)) {
        SurfacePoint sp = hypersurface_geometry(metric, sheets[side > 0 ? 0 : 1], y, opt);
        Eigen::VectorXd dl = scalar_jet(log_rho, sp.x, 1, opt).d;
        ConcavitySample c;
        c.r = y[0];
        c.side = side;
        c.value = sp.H + dl.dot(sp.normal);
        c.predicted = -chi_closed(y[0] / bs.sigma, bs.N);
        c.nu_r_over_r = sp.normal[0] / y[0];
        out.push_back(c);
    }
    return out;
}

// Closed form of r^-1 <grad r, nu> on the barrier boundary in the hyperbolic metric.
inline double barrier_normal_r(const BarrierSpec& bs, double r) {
    double s = r / bs.sigma, sg = bs.sigma;
    double pp = barrier_psi_prime(s, bs.N);
    return -pp * r / sg / std::sqrt(sg * sg / (r * r) + r * r * pp * pp / (sg * sg));
}

inline double mean_concavity_residual(const BarrierSpec& bs, int count, const FdOptions& opt) {
    MetricField g = hyperbolic_metric(bs.b, 0.5 * bs.sigma);
    int w = bs.N - bs.n;
    ScalarField lr = ScalarField::generic(g.chart(), [w](auto x) { return double(w) * log(x[0]); });
    double worst = 0.0;
    for (const auto& c : barrier_samples(g, lr, bs, count, opt)) worst = std::max(worst, std::abs(c.value - c.predicted));
    return worst;
}

// Largest H + rho^-1 <grad rho, nu> on the sample set for g_HM; negative means the
// strict inequality holds everywhere sampled.
inline double hm_barrier_worst(const HMModel& m, double sigma, double tbar, int count,
                               const FdOptions& opt = verification_fd()) {
    BarrierSpec bs{m.N(), m.n(), m.dataset_scales(), sigma, tbar};
    double worst = -kInf;
    for (const auto& c : barrier_samples(m.metric(), m.log_weight_field(), bs, count, opt))
        worst = std::max(worst, c.value);
    return worst;
}

// Smallest sigma on a geometric grid below sigma_max from which the inequality holds at
// every sample for every larger grid value.
inline double find_r_barrier(const HMModel& m, double sigma_max, int count, double ratio = 1.25) {
    // sheets start at r = 1.05 sigma, which must stay inside the chart
    double sigma_floor = 1.01 * m.r_min() / 1.05;
    double r_bar = kInf;
    for (double sg = sigma_max; sg >= sigma_floor; sg /= ratio) {
        if (hm_barrier_worst(m, sg, 0.7, count) >= 0.0) break;
        r_bar = sg;
    }
    return r_bar;
}

// Count of grid points in Omega_{sigma2} but not in Omega_{sigma1}, sigma1 < sigma2.
inline int nesting_violations(int N, double b_last, double sigma1, double sigma2, double tbar, int grid = 200) {
    BarrierSpec a{N, 2, {b_last}, sigma1, tbar}, c{N, 2, {b_last}, sigma2, tbar};
    int bad = 0;
    for (int i = 0; i < grid; ++i) {
        double r = sigma2 * std::pow(50.0, (i + 0.5) / grid);
        for (int j = 0; j < grid; ++j) {
            double th = kTwoPi * (j + 0.5) / grid;
            if (in_barrier(c, r, th) && !in_barrier(a, r, th)) ++bad;
        }
    }
    return bad;
}

struct BarrierReport {
    std::vector<Check> checks;
    Table table;  // r, side, residual_identity, margin_inequality
    double s_hat = 0.0;
    double r_barrier = kInf;
    double max_residual = 0.0;
    double min_margin = kInf;
};

struct BarrierConfig {
    int N = 3;
    int n = 3;
    double sigma = 20.0;
    double tbar = 0.7;
    int points = 100;
    double tol_H = 1e-5;
    std::vector<double> flat_scales;  // b_1 .. b_{n-2}; defaults to 1
};

inline BarrierReport verify_barriers(const BarrierConfig& cfg) {
    const int N = cfg.N;
    HMParams hp;
    hp.N = N;
    hp.n = cfg.n;
    hp.flat_scales = cfg.flat_scales.empty() ? std::vector<double>(static_cast<std::size_t>(std::max(0, cfg.n - 2)), 1.0)
                                             : cfg.flat_scales;
    hp.periodic_flat = true;
    HMModel m(hp);
    std::string tag = "(N=" + std::to_string(N) + ")";
    BarrierReport rep;

    SHat sh = solve_s_hat(N);
    rep.s_hat = sh.value;
    rep.checks.push_back(make_check("barrier.s_hat_residual " + tag, "s-hat", sh.residual, 1e-12));
    rep.checks.push_back(make_check("barrier.s_hat_above_two " + tag, "s-hat", sh.value, 2.0, Relation::Greater));
    rep.checks.push_back(make_check("barrier.s_hat_unique_sign_change " + tag, "s-hat", sh.sign_changes, 1.0,
                                    Relation::LessEqual));

    double s0 = sh.value;
    double lo = s0 * (1 - 1e-12), hi = s0 * (1 + 1e-12);
    // left branch formula evaluated at the junction itself, right branch slightly above
    double jv = std::abs(std::sqrt(1 - 1 / (s0 * s0)) - barrier_psi(hi, N));
    double jd = std::abs(barrier_psi_prime(lo, N) - std::ldexp(1.0, N) * (std::pow(s0, -N - 1.0) - std::pow(s0, -N - 2.0)));
    rep.checks.push_back(make_check("barrier.psi_junction_value " + tag, "psi", jv, 1e-10));
    rep.checks.push_back(make_check("barrier.psi_junction_slope " + tag, "psi", jd, 1e-10));

    double min_pp = kInf, max_psi = -kInf, min_psi = kInf, min_gap = kInf, chi_x = 0.0;
    const int grid = 10000;
    for (int i = 0; i < grid; ++i) {
        double s = 1.001 * std::pow(1e3 / 1.001, i / (grid - 1.0));
        if (std::abs(s - s0) < 1e-6) continue;
        double p = barrier_psi(s, N), pp = barrier_psi_prime(s, N), c = chi_closed(s, N);
        min_pp = std::min(min_pp, pp);
        max_psi = std::max(max_psi, p);
        min_psi = std::min(min_psi, p);
        min_gap = std::min(min_gap, c * std::pow(s, double(N)) - 1.0);  // sign of chi - s^-N
        chi_x = std::max(chi_x, std::abs(c - chi_generic(s, N)) / std::abs(c));
    }
    rep.checks.push_back(make_check("barrier.psi_increasing " + tag, "psi", min_pp, 0.0, Relation::Greater));
    rep.checks.push_back(make_check("barrier.psi_positive " + tag, "psi", min_psi, 0.0, Relation::Greater));
    rep.checks.push_back(make_check("barrier.psi_below_bound " + tag, "psi", max_psi, 1.0 + 1.0 / N));
    rep.checks.push_back(make_check("barrier.chi_times_s^N_minus_one " + tag, "chi-estimate", min_gap, 0.0, Relation::GreaterEqual));
    rep.checks.push_back(make_check("barrier.chi_closed_vs_definition " + tag, "chi", chi_x, 1e-9));
    double far = 1e4;
    rep.checks.push_back(make_check("barrier.chi_far_limit " + tag, "chi",
                                    std::abs(std::pow(far, N) * chi_closed(far, N) / std::ldexp(1.0, N) - 1.0), 1e-6));

    BarrierSpec bs{N, cfg.n, m.dataset_scales(), cfg.sigma, cfg.tbar};
    MetricField gbar = hyperbolic_metric(bs.b, 0.5 * cfg.sigma);
    int w = N - cfg.n;
    ScalarField lbar = ScalarField::generic(gbar.chart(), [w](auto x) { return double(w) * log(x[0]); });
    auto hyp = barrier_samples(gbar, lbar, bs, cfg.points);
    auto hm = barrier_samples(m.metric(), m.log_weight_field(), bs, cfg.points);
    double normal_res = 0.0;
    rep.table.name = "barrier_N" + std::to_string(N) + "_n" + std::to_string(cfg.n);
    rep.table.header = {"r", "side", "residual_identity", "margin_inequality"};
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        double res = std::abs(hyp[i].value - hyp[i].predicted);
        double margin = -hm[i].value;
        rep.max_residual = std::max(rep.max_residual, res);
        rep.min_margin = std::min(rep.min_margin, margin);
        normal_res = std::max(normal_res, std::abs(hyp[i].nu_r_over_r - barrier_normal_r(bs, hyp[i].r)));
        rep.table.rows.push_back({hyp[i].r, double(hyp[i].side), res, margin});
    }
    std::string tag2 = "(N=" + std::to_string(N) + ",n=" + std::to_string(cfg.n) + ",sigma=" +
                       std::to_string(static_cast<int>(cfg.sigma)) + ")";
    rep.checks.push_back(make_check("barrier.normal_component " + tag2, "mean-concavity", normal_res, 1e-8));
    rep.checks.push_back(make_check("barrier.mean_concavity_identity " + tag2, "mean-concavity", rep.max_residual, cfg.tol_H));
    rep.checks.push_back(make_check("barrier.hm_inequality_margin " + tag2, "mean-concavity-hm", rep.min_margin, 0.0,
                                    Relation::Greater));
    int nest = nesting_violations(N, bs.b.back(), 0.5 * cfg.sigma, cfg.sigma, cfg.tbar);
    rep.checks.push_back(make_check("barrier.nested_family " + tag, "nesting", nest, 0.0, Relation::LessEqual));
    rep.r_barrier = find_r_barrier(m, cfg.sigma, std::min(cfg.points, 40));
    rep.checks.push_back(make_check("barrier.r_barrier_at_most_sigma " + tag2, "mean-concavity-hm", rep.r_barrier,
                                    cfg.sigma, Relation::LessEqual));
    return rep;
}

}  // namespace hmlab
