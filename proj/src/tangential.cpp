#include "tanglide/tangential.hpp"

#include <cmath>

namespace tanglide {

TangencyManifold::TangencyManifold(const PiecewiseSystem& sys, std::vector<ScalarMap> eta, DomainPredicate domain)
    : eta_(std::move(eta)), domain_(std::move(domain)) {
    if (eta_.empty()) throw Error("eta needs at least one component");
    if (eta_.front().description() != sys.h_map().description())
        throw Error("the first component of eta must be the switching function h = " + sys.h_map().description());
}

TangencyManifold TangencyManifold::from_expressions(const PiecewiseSystem& sys, const std::vector<std::string>& extra,
                                                    DomainPredicate domain) {
    std::vector<ScalarMap> eta{sys.h_map()};
    for (const auto& e : extra) eta.push_back(ScalarMap::parse(e, sys.symbols()));
    return TangencyManifold(sys, std::move(eta), std::move(domain));
}

Vec TangencyManifold::eta(const Vec& p) const {
    Vec out(static_cast<Eigen::Index>(eta_.size()));
    for (std::size_t i = 0; i < eta_.size(); ++i) out[static_cast<Eigen::Index>(i)] = eta_[i](p);
    return out;
}

void TangencyManifold::check_rank(const Vec& p, double tol) const {
    const Eigen::MatrixXd J = d_eta(p);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& s = svd.singularValues();
    const double largest = s.size() > 0 ? s[0] : 0.0;
    if (s.size() < J.rows() || largest == 0.0 || s[s.size() - 1] <= tol * largest)
        throw GeometryError("d eta is rank deficient at this point; 0 is not a regular value of eta");
}

std::string_view to_string(ConeCase c) {
    switch (c) {
        case ConeCase::case1:
            return "case1";
        case ConeCase::case2:
            return "case2";
        case ConeCase::case3:
            return "case3";
        case ConeCase::case4:
            return "case4";
        case ConeCase::empty:
            return "empty";
    }
    return "?";
}

Vec cone_point(const PiecewiseSystem& sys, const Vec& p, double lambda) {
    if (!(std::abs(lambda) <= 1.0)) throw Error("cone parameter must lie in [-1, 1]");
    return 0.5 * (1.0 - lambda) * sys.Zplus(p) + 0.5 * (1.0 + lambda) * sys.Zminus(p);
}

TangencyManifold build_eta_from_lie(const PiecewiseSystem& sys, int k) {
    if (k < 1 || k > kMaxLieOrder)
        throw Error("Lie-built eta order must be between 1 and " + std::to_string(kMaxLieOrder));
    std::vector<ScalarMap> eta{sys.h_map()};
    for (int j = 1; j < k; ++j) eta.push_back(lie_map(sys.zplus(), sys.h_map(), static_cast<std::size_t>(j)));
    return TangencyManifold(sys, std::move(eta));
}

double antiparallel_defect(const Vec& u, const Vec& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    const double defect = std::abs(u.dot(v) + nu * nv);
    if (nu < 1e-12 || nv < 1e-12) return defect;
    return defect / (nu * nv);
}

ConeCaseResult classify_cone(Vec u, Vec v, double tol) {
    ConeCaseResult r;
    r.norm_u = u.norm();
    r.norm_v = v.norm();
    r.u = std::move(u);
    r.v = std::move(v);
    const bool zu = r.norm_u <= tol;
    const bool zv = r.norm_v <= tol;
    if (zu && zv)
        r.kind = ConeCase::case4;
    else if (zv)
        r.kind = ConeCase::case2;
    else if (zu)
        r.kind = ConeCase::case3;
    else if (antiparallel_defect(r.u, r.v) <= tol) {
        r.kind = ConeCase::case1;
        r.lambda = (r.norm_u - r.norm_v) / (r.norm_u + r.norm_v);
    } else {
        r.kind = ConeCase::empty;
    }
    return r;
}

ConeCaseResult intersect_cone_tangent(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p,
                                      double tol) {
    if (!M.in_domain(p)) throw GeometryError("point lies outside the domain of eta");
    const double off = M.eta(p).norm();
    if (off > tol) throw GeometryError("point is not on M (|eta(p)| = " + std::to_string(off) + ")");
    return classify_cone(M.push(p, sys.Zplus(p)), M.push(p, sys.Zminus(p)), tol);
}

Vec tangential_field(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p, double tol) {
    const auto r = intersect_cone_tangent(sys, M, p, tol);
    if (r.kind != ConeCase::case1)
        throw GeometryError("tangential sliding field needs case1, found " + std::string(to_string(r.kind)));
    Vec f = cone_point(sys, p, *r.lambda);
    // An anti-parallelism defect d leaves a kernel residual of at most sqrt(2 d) (|u| + |v|) / 4.
    const double residual = M.push(p, f).norm();
    if (residual > std::sqrt(2.0 * tol) * (r.norm_u + r.norm_v))
        throw NumericalError("tangential field left the tangent space (residual " + std::to_string(residual) + ")");
    return f;
}

}  // namespace tanglide
