#include "tanglide/filippov.hpp"

#include <cmath>

namespace tanglide {

std::string_view to_string(RegionLabel label) {
    switch (label) {
        case RegionLabel::crossing_plus:
            return "crossing_plus";
        case RegionLabel::crossing_minus:
            return "crossing_minus";
        case RegionLabel::sliding:
            return "sliding";
        case RegionLabel::escaping:
            return "escaping";
        case RegionLabel::tangential:
            return "tangential";
        case RegionLabel::off_switching:
            return "off_switching";
    }
    return "?";
}

PiecewiseSystem::PiecewiseSystem(SymbolTable symbols, Expr h, VectorField zplus, VectorField zminus)
    : symbols_(std::move(symbols)),
      h_expr_(std::move(h)),
      h_map_(h_expr_, symbols_),
      zplus_(std::move(zplus)),
      zminus_(std::move(zminus)) {
    if (zplus_.dim() != symbols_.state_count() || zminus_.dim() != symbols_.state_count())
        throw Error("field dimension does not match the number of states");
}

PiecewiseSystem PiecewiseSystem::parse(const SymbolTable& symbols, std::string_view h,
                                       const std::vector<std::string>& zplus,
                                       const std::vector<std::string>& zminus) {
    return PiecewiseSystem(symbols, Expr::parse(h, symbols), VectorField::parse(zplus, symbols),
                           VectorField::parse(zminus, symbols));
}

Vec PiecewiseSystem::grad_h(const Vec& p) const { return jacobian({h_map_}, p).row(0).transpose(); }

double PiecewiseSystem::normal_component(Side side, const Vec& p) const {
    return directional_derivative({h_map_}, p, Z(side, p))[0];
}

PiecewiseSystem PiecewiseSystem::with_symbols(const SymbolTable& symbols) const {
    if (symbols.states() != symbols_.states()) throw Error("state variables differ");
    std::vector<std::string> zp, zm;
    for (const auto& e : zplus_.components()) zp.push_back(e.to_string());
    for (const auto& e : zminus_.components()) zm.push_back(e.to_string());
    return parse(symbols, h_expr_.to_string(), zp, zm);
}

Classification classify_point_detail(const PiecewiseSystem& sys, const Vec& p, double tol) {
    if (!(tol > 0.0)) throw Error("tolerance must be positive");
    Classification c;
    c.h = sys.h(p);
    if (std::abs(c.h) > tol) {
        c.label = RegionLabel::off_switching;
        return c;
    }
    const Vec grad = sys.grad_h(p);
    if (grad.norm() <= tol) throw GeometryError("0 is not a regular value of h at this point (gradient vanishes)");
    const Vec zp = sys.Zplus(p);
    const Vec zm = sys.Zminus(p);
    c.a = grad.dot(zp);
    c.b = grad.dot(zm);
    const double a = c.a;
    const double b = c.b;
    if ((std::abs(a) <= tol && zp.norm() <= tol) || (std::abs(b) <= tol && zm.norm() <= tol))
        throw GeometryError("degenerate point: a smooth field vanishes on the switching manifold");
    if (std::abs(a) <= tol || std::abs(b) <= tol)
        c.label = RegionLabel::tangential;
    else if (a > 0 && b > 0)
        c.label = RegionLabel::crossing_plus;
    else if (a < 0 && b < 0)
        c.label = RegionLabel::crossing_minus;
    else if (a < 0 && b > 0)
        c.label = RegionLabel::sliding;
    else
        c.label = RegionLabel::escaping;
    return c;
}

RegionLabel classify_point(const PiecewiseSystem& sys, const Vec& p, double tol) {
    return classify_point_detail(sys, p, tol).label;
}

double sliding_lambda(double a, double b) { return (a + b) / (a - b); }

Vec filippov_sliding_field(const PiecewiseSystem& sys, const Vec& p, double tol) {
    const auto c = classify_point_detail(sys, p, tol);
    if (c.label != RegionLabel::sliding && c.label != RegionLabel::escaping)
        throw GeometryError("point is not in the sliding or escaping region (" + std::string(to_string(c.label)) +
                            ")");
    const double lambda = sliding_lambda(c.a, c.b);
    return 0.5 * (1.0 - lambda) * sys.Zplus(p) + 0.5 * (1.0 + lambda) * sys.Zminus(p);
}

std::optional<int> contact_multiplicity(const PiecewiseSystem& sys, Side side, const Vec& p, int max_k,
                                        double tol) {
    if (std::abs(sys.h(p)) > tol) throw GeometryError("point is not on the switching manifold");
    if (max_k < 1) return std::nullopt;
    auto d = lie_derivatives(sys.field(side), sys.h_map(), p, static_cast<std::size_t>(max_k));
    for (int k = 1; k <= max_k; ++k)
        if (std::abs(d[static_cast<std::size_t>(k)]) > tol) return k;
    return std::nullopt;
}

}  // namespace tanglide
