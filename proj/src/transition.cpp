#include "tanglide/transition.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

namespace tanglide {

namespace {

double bump_density(double s) {
    const double d = 1.0 - s * s;
    return d <= 0.0 ? 0.0 : std::exp(-1.0 / d);
}

double bump_integral(double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(bump_density, a, b, 8, 1e-14);
}

}  // namespace

TransitionFunction::TransitionFunction(TransitionKind kind) : kind_(kind) {
    if (kind_ == TransitionKind::bump) bump_norm_ = 2.0 * bump_integral(0.0, 1.0);
}

TransitionFunction TransitionFunction::from_name(std::string_view name) {
    if (name == "smoothstep3") return TransitionFunction(TransitionKind::smoothstep3);
    if (name == "smoothstep5") return TransitionFunction(TransitionKind::smoothstep5);
    if (name == "bump") return TransitionFunction(TransitionKind::bump);
    throw Error("unknown transition function '" + std::string(name) + "' (expected smoothstep3, smoothstep5 or bump)");
}

std::string_view TransitionFunction::name() const noexcept {
    switch (kind_) {
        case TransitionKind::smoothstep3:
            return "smoothstep3";
        case TransitionKind::smoothstep5:
            return "smoothstep5";
        case TransitionKind::bump:
            return "bump";
    }
    return "?";
}

double TransitionFunction::operator()(double x) const {
    if (x <= -1.0) return -1.0;
    if (x >= 1.0) return 1.0;
    switch (kind_) {
        case TransitionKind::smoothstep3:
            return (3.0 * x - x * x * x) / 2.0;
        case TransitionKind::smoothstep5: {
            const double x2 = x * x;
            return x * (15.0 + x2 * (-10.0 + 3.0 * x2)) / 8.0;
        }
        case TransitionKind::bump: {
            // integrate from 0 so that the result is exactly odd
            const double half = 2.0 * bump_integral(0.0, std::abs(x)) / bump_norm_;
            return std::copysign(std::min(half, 1.0), x);
        }
    }
    return 0.0;
}

double TransitionFunction::derivative(double x) const {
    if (x <= -1.0 || x >= 1.0) return 0.0;
    switch (kind_) {
        case TransitionKind::smoothstep3:
            return 1.5 * (1.0 - x * x);
        case TransitionKind::smoothstep5: {
            const double d = 1.0 - x * x;
            return 15.0 * d * d / 8.0;
        }
        case TransitionKind::bump:
            return 2.0 * bump_density(x) / bump_norm_;
    }
    return 0.0;
}

double TransitionFunction::inverse(double y, double tol) const {
    if (!(y > -1.0 && y < 1.0)) throw DomainError("transition inverse needs a value in (-1, 1)");
    if (y == 0.0) return 0.0;
    double lo = -1.0;
    double hi = 1.0;
    double x = y;
    for (int it = 0; it < 200; ++it) {
        const double f = (*this)(x) - y;
        if (f == 0.0) return x;
        if (f < 0.0)
            lo = x;
        else
            hi = x;
        const double d = derivative(x);
        double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= tol * std::max(1.0, std::abs(x))) return next;
        if (hi - lo <= std::numeric_limits<double>::epsilon()) return next;
        x = next;
    }
    return x;
}

}  // namespace tanglide
