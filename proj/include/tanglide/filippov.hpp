#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tanglide/lie.hpp"

namespace tanglide {

inline constexpr double kDefaultTol = 1e-9;

enum class Side { plus, minus };

enum class RegionLabel { crossing_plus, crossing_minus, sliding, escaping, tangential, off_switching };

std::string_view to_string(RegionLabel label);

/// Two smooth fields separated by the zero set of h.
class PiecewiseSystem {
public:
    PiecewiseSystem(SymbolTable symbols, Expr h, VectorField zplus, VectorField zminus);
    static PiecewiseSystem parse(const SymbolTable& symbols, std::string_view h,
                                 const std::vector<std::string>& zplus, const std::vector<std::string>& zminus);

    std::size_t dim() const noexcept { return symbols_.state_count(); }
    const SymbolTable& symbols() const noexcept { return symbols_; }
    const Expr& h_expr() const noexcept { return h_expr_; }
    const ScalarMap& h_map() const noexcept { return h_map_; }
    const VectorField& field(Side side) const noexcept { return side == Side::plus ? zplus_ : zminus_; }
    const VectorField& zplus() const noexcept { return zplus_; }
    const VectorField& zminus() const noexcept { return zminus_; }

    double h(const Vec& p) const { return h_map_(p); }
    Vec grad_h(const Vec& p) const;
    Vec Zplus(const Vec& p) const { return zplus_(p); }
    Vec Zminus(const Vec& p) const { return zminus_(p); }
    Vec Z(Side side, const Vec& p) const { return field(side)(p); }

    /// Z_side h(p), i.e. <grad h, Z_side>.
    double normal_component(Side side, const Vec& p) const;

    /// Same system with a different parameter binding (state names must match).
    PiecewiseSystem with_symbols(const SymbolTable& symbols) const;

private:
    SymbolTable symbols_;
    Expr h_expr_;
    ScalarMap h_map_;
    VectorField zplus_;
    VectorField zminus_;
};

struct Classification {
    RegionLabel label = RegionLabel::off_switching;
    double h = 0.0;
    double a = 0.0;  // Z+h
    double b = 0.0;  // Z-h
};

Classification classify_point_detail(const PiecewiseSystem& sys, const Vec& p, double tol = kDefaultTol);
RegionLabel classify_point(const PiecewiseSystem& sys, const Vec& p, double tol = kDefaultTol);

/// Convex combination of Z+ and Z- tangent to the switching manifold.
/// Only defined in the sliding and escaping regions.
Vec filippov_sliding_field(const PiecewiseSystem& sys, const Vec& p, double tol = kDefaultTol);

/// Coefficient selecting the sliding vector in the cone, (a + b) / (a - b).
double sliding_lambda(double a, double b);

/// Smallest k with |Z^k h(p)| > tol; nullopt when every order up to max_k vanishes.
std::optional<int> contact_multiplicity(const PiecewiseSystem& sys, Side side, const Vec& p, int max_k,
                                        double tol = kDefaultTol);

/// Default probing order for contact multiplicity.
inline int default_jet_order(const PiecewiseSystem& sys) { return static_cast<int>(sys.dim()) + 2; }

}  // namespace tanglide
