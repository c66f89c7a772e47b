#pragma once

// Regularization of a piecewise system and its slow-fast form near a tangency manifold.
//
// Coordinates of the slow-fast system are z = (u, v, w): u are the coordinates along M,
// v the remaining components of eta (eta = (h, v) in an adapted chart) and w = h / eps.
// The blend weights follow K(u,v,w) = ((1 - phi(w))/2) Z+_h + ((1 + phi(w))/2) Z-_h, so
// that phi(w) plays the role of the cone parameter lambda.

#include <vector>

#include "tanglide/integrate.hpp"
#include "tanglide/tangential.hpp"
#include "tanglide/transition.hpp"

namespace tanglide {

/// Z_eps(q) = (1/2 + phi(h(q)/eps)/2) Z+(q) + (1/2 - phi(h(q)/eps)/2) Z-(q).
Vec regularized_field(const PiecewiseSystem& sys, const TransitionFunction& phi, double eps, const Vec& q);

/// Which state coordinates play the roles of u, v and h in an adapted chart.
struct AdaptedChart {
    std::size_t w = 0;               // index of h = x_w
    std::vector<std::size_t> v;      // indices of eta_2..eta_m
    std::vector<std::size_t> u;      // remaining coordinates, in state order
};

class SPSystem {
public:
    SPSystem(PiecewiseSystem sys, AdaptedChart chart, TransitionFunction phi);

    const PiecewiseSystem& system() const noexcept { return sys_; }
    const AdaptedChart& chart() const noexcept { return chart_; }
    const TransitionFunction& phi() const noexcept { return phi_; }
    std::size_t n_u() const noexcept { return chart_.u.size(); }
    std::size_t n_v() const noexcept { return chart_.v.size(); }

    /// State x with x_u = u, x_v = v, x_w = eps * w.
    Vec to_state(const Vec& u, const Vec& v, double w, double eps) const;
    /// Packs (u, v, w) into one vector in that order.
    Vec pack(const Vec& u, const Vec& v, double w) const;
    void unpack(const Vec& z, Vec& u, Vec& v, double& w) const;
    /// z for a state x at a given eps.
    Vec from_state(const Vec& x, double eps) const;

    /// Slow-time right-hand side: (du/dt, dv/dt, eps dw/dt).
    Vec slow_rhs(const Vec& z, double eps) const;
    /// Fast-time right-hand side: (du/dtau, dv/dtau, dw/dtau) with t = eps tau.
    Vec fast_rhs(const Vec& z, double eps) const;
    /// Fast system at eps = 0: slow variables frozen.
    Vec layer_rhs(const Vec& z) const;
    /// (du/dt, dv/dt) of the reduced problem at a given w (eps = 0).
    Vec reduced_rhs(const Vec& u, const Vec& v, double w) const;

    /// K(u, v, w), the w-equation at eps = 0.
    template <typename S>
    S residual(const Vec& u, const Vec& v, const S& w) const {
        const Vec x = to_state(u, v, 0.0, 0.0);
        const double zp = sys_.Zplus(x)[static_cast<Eigen::Index>(chart_.w)];
        const double zm = sys_.Zminus(x)[static_cast<Eigen::Index>(chart_.w)];
        const S p = phi_.apply(w);
        return (1.0 - p) * (0.5 * zp) + (1.0 + p) * (0.5 * zm);
    }

private:
    PiecewiseSystem sys_;
    AdaptedChart chart_;
    TransitionFunction phi_;
};

/// Builds the slow-fast system. Requires h and every component of eta to be plain state
/// variables (an adapted chart up to a permutation of coordinates).
SPSystem sp_reduce(const PiecewiseSystem& sys, const TangencyManifold& M, const TransitionFunction& phi);

struct StanPoint {
    double lambda_star = 0.0;
    double w_star = 0.0;
    Vec H;          // (u, 0, w*) in packed slow-fast coordinates
    double K = 0.0;           // K(u, 0, w*)
    double v_block = 0.0;     // max |dv/dt| of the reduced field at (u, 0, w*)
};

/// w*(u) = phi^-1(lambda*(u, 0, 0)) and the point H(u, 0, 0) on S^tan.
StanPoint stan_graph(const SPSystem& sp, const TangencyManifold& M, const Vec& u, double tol = kDefaultTol);

/// du/dt of the reduced problem restricted to S^tan, i.e. evaluated at w = w*(u).
Vec reduced_field_on_stan(const SPSystem& sp, const TangencyManifold& M, const Vec& u, double tol = kDefaultTol);

/// dK/dw at (u, v, w) = phi'(w) (Z-_h - Z+_h) / 2.
double normal_hyperbolicity_residual_at(const SPSystem& sp, const Vec& u, const Vec& v, double w);
/// dK/dw on S^tan, at (u, 0, w*(u)).
double normal_hyperbolicity_residual(const SPSystem& sp, const TangencyManifold& M, const Vec& u,
                                     double tol = kDefaultTol);

struct ConjugacyReport {
    double max_deviation = 0.0;
    std::vector<double> times;
    std::vector<double> deviations;
    bool truncated = false;       // the tangential flow reached the manifold boundary or changed case
    double t_end = 0.0;           // last time compared
    Trajectory tangential;        // x_t(p0)
    Trajectory reduced;           // u-part of X_t(H(p0))
};

/// Integrates x_t(p0) under Z^tan_M and X_t(H(p0)) under the reduced flow on S^tan with the same
/// settings (concurrently) and reports sup |X_t(H(p0)) - H(x_t(p0))| on a 101-point grid over [0, T].
ConjugacyReport verify_conjugacy(const SPSystem& sp, const TangencyManifold& M, const Vec& p0, double T,
                                 const IntegratorSettings& settings, double tol = kDefaultTol);

}  // namespace tanglide
