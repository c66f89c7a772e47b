#pragma once

// Test-side reference computations. None of these call into the geometry of the
// library; they work from plain field values and hand Jacobians.

#include <cmath>
#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace oracle {

/// Root of a monotone scalar function on [lo, hi] by plain bisection; nullopt without a sign change.
inline std::optional<double> bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0)) return std::nullopt;
    for (int i = 0; i < iters && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Cone point from plain field values.
inline Eigen::VectorXd cone(const Eigen::VectorXd& zp, const Eigen::VectorXd& zm, double lambda) {
    return 0.5 * (1.0 - lambda) * zp + 0.5 * (1.0 + lambda) * zm;
}

/// Lambda making <grad h, C(lambda)> vanish, by bisection on (-1, 1).
inline std::optional<double> sliding_lambda(double a, double b) {
    return bisect([&](double l) { return 0.5 * (1.0 - l) * a + 0.5 * (1.0 + l) * b; }, -1.0, 1.0);
}

/// Lambda making <u, J C(lambda)> vanish for pushforwards u = J Z+ and v = J Z-, by bisection.
inline std::optional<double> cone_lambda(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return bisect([&](double l) { return u.dot(0.5 * (1.0 - l) * u + 0.5 * (1.0 + l) * v); }, -1.0, 1.0);
}

/// Scalar RK4 with a fixed step, for reference integrations of one-dimensional closed forms.
inline double rk4(const std::function<double(double)>& f, double y0, double T, int steps) {
    const double h = T / steps;
    double y = y0;
    for (int i = 0; i < steps; ++i) {
        const double k1 = f(y);
        const double k2 = f(y + 0.5 * h * k1);
        const double k3 = f(y + 0.5 * h * k2);
        const double k4 = f(y + h * k3);
        y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    return y;
}

inline double rel_err(double got, double expect) {
    return std::abs(got - expect) / std::max(1.0, std::abs(expect));
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& expect) {
    return (got - expect).norm() / std::max(1.0, expect.norm());
}

}  // namespace oracle
