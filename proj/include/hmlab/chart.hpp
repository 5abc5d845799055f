#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hmlab/error.hpp"

namespace hmlab {

using Point = Eigen::VectorXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Reduce an angle to [0, 2pi).
inline double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
}

// Reduce an angle to (-pi, pi].
inline double wrap_signed(double a) {
    double r = wrap_angle(a);
    return r > std::numbers::pi ? r - kTwoPi : r;
}

inline double s1_distance(double a, double b) { return std::abs(wrap_signed(a - b)); }

struct Axis {
    std::string name;
    double lower = -kInf;
    double upper = kInf;
    bool periodic = false;
    double period = kTwoPi;
    // Finite-difference step. With relative_step the step is step * max(|x|, 1).
    double step = 1e-3;
    bool relative_step = false;

    static Axis line(std::string name, double lo = -kInf, double hi = kInf, double h = 1e-3) {
        return Axis{std::move(name), lo, hi, false, kTwoPi, h, false};
    }
    static Axis angle(std::string name, double h = 1e-3) {
        return Axis{std::move(name), 0.0, kTwoPi, true, kTwoPi, h, false};
    }
    static Axis radial(std::string name, double lo, double hi = kInf, double h = 1e-3) {
        return Axis{std::move(name), lo, hi, false, kTwoPi, h, true};
    }
};

class CoordinateChart {
public:
    CoordinateChart() = default;
    explicit CoordinateChart(std::vector<Axis> axes) : axes_(std::move(axes)) {
        if (axes_.empty()) throw ConfigError("chart needs at least one axis");
        for (const auto& a : axes_) {
            if (!a.periodic && !(a.lower < a.upper))
                throw ConfigError("axis " + a.name + " has empty range");
            if (a.periodic && !(a.period > 0.0))
                throw ConfigError("axis " + a.name + " has non-positive period");
        }
    }

    int dim() const { return static_cast<int>(axes_.size()); }
    const Axis& axis(int i) const { return axes_.at(static_cast<std::size_t>(i)); }
    Axis& axis(int i) { return axes_.at(static_cast<std::size_t>(i)); }
    const std::vector<Axis>& axes() const { return axes_; }

    double step(int i, const Point& p, double scale = 1.0) const {
        const Axis& a = axis(i);
        double h = a.step * scale;
        if (a.relative_step) h *= std::max(std::abs(p[i]), 1.0);
        return h;
    }

    Point reduce(Point p) const {
        for (int i = 0; i < dim(); ++i) {
            const Axis& a = axes_[static_cast<std::size_t>(i)];
            if (a.periodic) {
                double r = std::fmod(p[i] - a.lower, a.period);
                if (r < 0.0) r += a.period;
                p[i] = a.lower + r;
            }
        }
        return p;
    }

    bool contains(const Point& p) const {
        for (int i = 0; i < dim(); ++i) {
            const Axis& a = axes_[static_cast<std::size_t>(i)];
            if (!std::isfinite(p[i])) return false;
            if (!a.periodic && (p[i] < a.lower || p[i] > a.upper)) return false;
        }
        return true;
    }

    // Throws unless every non-periodic coordinate is at least margin_steps
    // finite-difference steps away from its boundary.
    void require_interior(const Point& p, double margin_steps, double scale = 1.0) const {
        if (p.size() != dim()) throw DomainError("point dimension does not match chart");
        for (int i = 0; i < dim(); ++i) {
            const Axis& a = axes_[static_cast<std::size_t>(i)];
            if (a.periodic) continue;
            double m = margin_steps * step(i, p, scale);
            if (!(p[i] - m >= a.lower && p[i] + m <= a.upper)) {
                std::ostringstream os;
                os << "point too close to boundary of axis " << a.name << " (x=" << p[i]
                   << ", margin=" << m << ", range=[" << a.lower << "," << a.upper << "])";
                throw BoundaryProximityError(os.str());
            }
        }
    }

private:
    std::vector<Axis> axes_;
};

}  // namespace hmlab
