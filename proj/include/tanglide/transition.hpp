#pragma once

#include <string>
#include <string_view>
#include <type_traits>

#include "tanglide/jet.hpp"

namespace tanglide {

enum class TransitionKind {
    smoothstep3,  // (3x - x^3) / 2, C^1
    smoothstep5,  // (15x - 10x^3 + 3x^5) / 8, C^2
    bump,         // normalized integral of exp(-1 / (1 - s^2)), C^infinity
};

/// Monotone switch equal to -1 for x <= -1 and +1 for x >= 1.
class TransitionFunction {
public:
    explicit TransitionFunction(TransitionKind kind = TransitionKind::smoothstep5);
    static TransitionFunction from_name(std::string_view name);

    TransitionKind kind() const noexcept { return kind_; }
    std::string_view name() const noexcept;

    double operator()(double x) const;
    double derivative(double x) const;
    /// Inverse on (-1, 1) by safeguarded Newton iteration; throws DomainError outside.
    double inverse(double y, double tol = 1e-13) const;

    /// phi over a scalar ring. Polynomial kinds work for every jet order; the bump kind
    /// supports plain numbers and first-order jets only.
    template <typename S>
    S apply(const S& x) const {
        if constexpr (std::is_same_v<S, double>) {
            return (*this)(x);
        } else {
            const double x0 = primal(x);
            if (x0 <= -1.0) return S(-1.0);
            if (x0 >= 1.0) return S(1.0);
            switch (kind_) {
                case TransitionKind::smoothstep3:
                    return (3.0 * x - x * x * x) / 2.0;
                case TransitionKind::smoothstep5: {
                    const S x2 = x * x;
                    return x * (15.0 + x2 * (-10.0 + 3.0 * x2)) / 8.0;
                }
                case TransitionKind::bump:
                    if constexpr (std::is_same_v<S, Dual>) {
                        if (x.order() > 1) throw Error("bump transition supports first-order jets only");
                        Dual r = Dual::constant((*this)(x[0]), x.order());
                        if (x.order() == 1) r[1] = derivative(x[0]) * x[1];
                        return r;
                    } else {
                        throw Error("bump transition supports first-order jets only");
                    }
            }
            return S(0.0);
        }
    }

private:
    TransitionKind kind_;
    double bump_norm_ = 0.0;  // integral of the bump over [-1, 1]
};

}  // namespace tanglide
