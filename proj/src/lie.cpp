#include "tanglide/lie.hpp"

namespace tanglide {

VectorField::VectorField(std::vector<Expr> components, SymbolTable symbols)
    : components_(std::move(components)), symbols_(std::move(symbols)) {
    if (components_.size() != symbols_.state_count())
        throw Error("vector field has " + std::to_string(components_.size()) + " components for " +
                    std::to_string(symbols_.state_count()) + " state variables");
}

VectorField VectorField::parse(const std::vector<std::string>& components, const SymbolTable& symbols) {
    std::vector<Expr> parsed;
    parsed.reserve(components.size());
    for (const auto& c : components) parsed.push_back(Expr::parse(c, symbols));
    return VectorField(std::move(parsed), symbols);
}

Vec VectorField::operator()(const Vec& x) const {
    auto xs = to_std(x);
    auto f = eval<double>(xs);
    return to_eigen(f);
}

ScalarMap::ScalarMap(Expr e, SymbolTable symbols) : description_(e.to_string()) {
    auto shared = std::make_shared<std::pair<Expr, SymbolTable>>(std::move(e), std::move(symbols));
    f0_ = [shared](std::span<const double> x) {
        return evaluate<double>(shared->first, x, shared->second.param_values());
    };
    f1_ = [shared](std::span<const Dual> x) { return evaluate<Dual>(shared->first, x, shared->second.param_values()); };
    f2_ = [shared](std::span<const DualJet> x) {
        return evaluate<DualJet>(shared->first, x, shared->second.param_values());
    };
}

ScalarMap::ScalarMap(F0 f0, F1 f1, F2 f2) : f0_(std::move(f0)), f1_(std::move(f1)), f2_(std::move(f2)) {}

ScalarMap ScalarMap::parse(std::string_view src, const SymbolTable& symbols) {
    return ScalarMap(Expr::parse(src, symbols), symbols);
}

double ScalarMap::operator()(const Vec& x) const {
    auto xs = to_std(x);
    return f0_(xs);
}

std::vector<double> lie_derivatives(const VectorField& field, const ScalarMap& g, const Vec& p, std::size_t order) {
    auto ps = to_std(p);
    return lie_derivatives<double>(field, g, std::span<const double>(ps), order);
}

ScalarMap lie_map(const VectorField& field, const ScalarMap& g, std::size_t j) {
    if (j == 0) return g;
    ScalarMap m(
        [field, g, j](std::span<const double> x) { return lie_derivatives<double>(field, g, x, j)[j]; },
        [field, g, j](std::span<const Dual> x) { return lie_derivatives<Dual>(field, g, x, j)[j]; },
        nullptr);
    m.set_description("Z^" + std::to_string(j) + "(" + g.description() + ")");
    return m;
}

Vec directional_derivative(const std::vector<ScalarMap>& maps, const Vec& p, const Vec& v) {
    if (p.size() != v.size()) throw Error("point and direction dimensions differ");
    std::vector<Dual> x;
    x.reserve(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) x.push_back(Dual::variable(p[i], v[i], 1));
    Vec out(static_cast<Eigen::Index>(maps.size()));
    for (std::size_t k = 0; k < maps.size(); ++k)
        out[static_cast<Eigen::Index>(k)] = maps[k].operator()<Dual>(x).coefficient(1);
    return out;
}

Eigen::MatrixXd jacobian(const std::vector<ScalarMap>& maps, const Vec& p) {
    const auto n = p.size();
    Eigen::MatrixXd J(static_cast<Eigen::Index>(maps.size()), n);
    for (Eigen::Index i = 0; i < n; ++i) J.col(i) = directional_derivative(maps, p, Vec::Unit(n, i));
    return J;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec to_eigen(std::span<const double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

}  // namespace tanglide
