#pragma once

// Flow jets, Lie derivatives and directional derivatives.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

#include "tanglide/expr.hpp"
#include "tanglide/jet.hpp"

namespace tanglide {

using Vec = Eigen::VectorXd;

/// n expressions over n state variables.
class VectorField {
public:
    VectorField() = default;
    VectorField(std::vector<Expr> components, SymbolTable symbols);
    static VectorField parse(const std::vector<std::string>& components, const SymbolTable& symbols);

    std::size_t dim() const noexcept { return components_.size(); }
    const SymbolTable& symbols() const noexcept { return symbols_; }
    const std::vector<Expr>& components() const noexcept { return components_; }

    template <typename S>
    std::vector<S> eval(std::span<const S> x) const {
        std::vector<S> out;
        out.reserve(components_.size());
        for (const auto& c : components_) out.push_back(evaluate<S>(c, x, symbols_.param_values()));
        return out;
    }

    Vec operator()(const Vec& x) const;

private:
    std::vector<Expr> components_;
    SymbolTable symbols_;
};

/// Scalar function of the state, evaluable over double, Jet<double> and Jet<Jet<double>>.
/// Either wraps an expression or a composite pipeline such as a Lie derivative.
class ScalarMap {
public:
    using F0 = std::function<double(std::span<const double>)>;
    using F1 = std::function<Dual(std::span<const Dual>)>;
    using F2 = std::function<DualJet(std::span<const DualJet>)>;

    ScalarMap() = default;
    ScalarMap(Expr e, SymbolTable symbols);
    ScalarMap(F0 f0, F1 f1, F2 f2);

    static ScalarMap parse(std::string_view src, const SymbolTable& symbols);

    template <typename S>
    S operator()(std::span<const S> x) const {
        if constexpr (std::is_same_v<S, double>)
            return f0_(x);
        else if constexpr (std::is_same_v<S, Dual>)
            return f1_(x);
        else {
            static_assert(std::is_same_v<S, DualJet>, "unsupported scalar ring");
            if (!f2_) throw Error("scalar map does not support this nesting depth");
            return f2_(x);
        }
    }

    double operator()(const Vec& x) const;

    /// Source text when built from an expression, empty otherwise.
    const std::string& description() const noexcept { return description_; }
    void set_description(std::string d) { description_ = std::move(d); }

private:
    F0 f0_;
    F1 f1_;
    F2 f2_;
    std::string description_;
};

/// Taylor coefficients of the solution of x' = field(x), x(0) = p, up to t^order.
template <typename S>
std::vector<Jet<S>> taylor_flow(const VectorField& field, std::span<const S> p, std::size_t order) {
    const std::size_t n = field.dim();
    if (p.size() != n) throw Error("point dimension does not match the field");
    std::vector<Jet<S>> x;
    x.reserve(n);
    for (std::size_t i = 0; i < n; ++i) x.push_back(Jet<S>::constant(p[i], order));
    for (std::size_t k = 0; k < order; ++k) {
        // coefficient k of field(x(t)) only depends on c_0..c_k, so zero padding is harmless
        auto f = field.eval<Jet<S>>(x);
        for (std::size_t i = 0; i < n; ++i) x[i][k + 1] = f[i].coefficient(k) / static_cast<double>(k + 1);
    }
    return x;
}

/// [g(p), Zg(p), ..., Z^order g(p)].
template <typename S>
std::vector<S> lie_derivatives(const VectorField& field, const ScalarMap& g, std::span<const S> p,
                               std::size_t order) {
    auto flow = taylor_flow<S>(field, p, order);
    Jet<S> gj = g.operator()<Jet<S>>(flow);
    std::vector<S> out;
    out.reserve(order + 1);
    double factorial = 1.0;
    for (std::size_t i = 0; i <= order; ++i) {
        if (i > 0) factorial *= static_cast<double>(i);
        out.push_back(gj.coefficient(i) * factorial);
    }
    return out;
}

std::vector<double> lie_derivatives(const VectorField& field, const ScalarMap& g, const Vec& p, std::size_t order);

/// The scalar map p -> Z^j g(p).
ScalarMap lie_map(const VectorField& field, const ScalarMap& g, std::size_t j);

/// dF(p) v for each component of F, by a single pass over first-order duals.
Vec directional_derivative(const std::vector<ScalarMap>& maps, const Vec& p, const Vec& v);

/// Jacobian of the maps at p (rows = maps), one dual pass per coordinate direction.
Eigen::MatrixXd jacobian(const std::vector<ScalarMap>& maps, const Vec& p);

std::vector<double> to_std(const Vec& v);
Vec to_eigen(std::span<const double> v);

}  // namespace tanglide
