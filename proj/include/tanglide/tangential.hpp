#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tanglide/filippov.hpp"

namespace tanglide {

/// Highest Lie order accepted by build_eta_from_lie.
inline constexpr int kMaxLieOrder = 12;

/// M = eta^-1(0), a codimension-m set of tangential singularities. eta[0] is always h.
class TangencyManifold {
public:
    using DomainPredicate = std::function<bool(const Vec&)>;

    TangencyManifold() = default;
    /// `eta` must start with the switching function of `sys` (compared by its printed form).
    TangencyManifold(const PiecewiseSystem& sys, std::vector<ScalarMap> eta, DomainPredicate domain = {});

    /// eta = (h, extra...) with the extra components given as expressions.
    static TangencyManifold from_expressions(const PiecewiseSystem& sys, const std::vector<std::string>& extra,
                                             DomainPredicate domain = {});

    std::size_t codim() const noexcept { return eta_.size(); }
    const std::vector<ScalarMap>& maps() const noexcept { return eta_; }

    Vec eta(const Vec& p) const;
    Eigen::MatrixXd d_eta(const Vec& p) const { return jacobian(eta_, p); }
    /// d eta(p) v.
    Vec push(const Vec& p, const Vec& v) const { return directional_derivative(eta_, p, v); }

    bool in_domain(const Vec& p) const { return !domain_ || domain_(p); }
    void set_domain(DomainPredicate domain) { domain_ = std::move(domain); }

    /// Throws GeometryError when d eta(p) is rank deficient (relative singular value below `tol`).
    void check_rank(const Vec& p, double tol = 1e-10) const;

private:
    std::vector<ScalarMap> eta_;
    DomainPredicate domain_;
};

enum class ConeCase { case1, case2, case3, case4, empty };

std::string_view to_string(ConeCase c);

struct ConeCaseResult {
    ConeCase kind = ConeCase::empty;
    std::optional<double> lambda;  // present only for case1
    Vec u;                         // d eta(p) Z+(p)
    Vec v;                         // d eta(p) Z-(p)
    double norm_u = 0.0;
    double norm_v = 0.0;
};

/// ((1 - lambda)/2) Z+(p) + ((1 + lambda)/2) Z-(p).
Vec cone_point(const PiecewiseSystem& sys, const Vec& p, double lambda);

/// eta = (h, Z+h, ..., Z+^{k-1} h).
TangencyManifold build_eta_from_lie(const PiecewiseSystem& sys, int k);

/// Relative anti-parallelism defect of u and v: |<u,v> + |u||v|| / (|u||v|),
/// or the absolute defect when either norm is below 1e-12.
double antiparallel_defect(const Vec& u, const Vec& v);

/// Classifies the intersection of the cone at p with T_pM.
ConeCaseResult intersect_cone_tangent(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p,
                                      double tol = kDefaultTol);

/// Same classification from precomputed pushforwards.
ConeCaseResult classify_cone(Vec u, Vec v, double tol = kDefaultTol);

/// Z^tan_M(p) = C(p, lambda*(p)); requires case1.
Vec tangential_field(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p, double tol = kDefaultTol);

}  // namespace tanglide
