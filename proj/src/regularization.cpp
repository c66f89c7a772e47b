#include "tanglide/regularization.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

namespace tanglide {

Vec regularized_field(const PiecewiseSystem& sys, const TransitionFunction& phi, double eps, const Vec& q) {
    if (!(eps > 0.0)) throw Error("eps must be positive");
    const double p = phi(sys.h(q) / eps);
    return (0.5 + 0.5 * p) * sys.Zplus(q) + (0.5 - 0.5 * p) * sys.Zminus(q);
}

SPSystem::SPSystem(PiecewiseSystem sys, AdaptedChart chart, TransitionFunction phi)
    : sys_(std::move(sys)), chart_(std::move(chart)), phi_(phi) {}

Vec SPSystem::to_state(const Vec& u, const Vec& v, double w, double eps) const {
    Vec x = Vec::Zero(static_cast<Eigen::Index>(sys_.dim()));
    for (std::size_t i = 0; i < chart_.u.size(); ++i) x[static_cast<Eigen::Index>(chart_.u[i])] = u[static_cast<Eigen::Index>(i)];
    for (std::size_t j = 0; j < chart_.v.size(); ++j) x[static_cast<Eigen::Index>(chart_.v[j])] = v[static_cast<Eigen::Index>(j)];
    x[static_cast<Eigen::Index>(chart_.w)] = eps * w;
    return x;
}

Vec SPSystem::pack(const Vec& u, const Vec& v, double w) const {
    Vec z(u.size() + v.size() + 1);
    z << u, v, w;
    return z;
}

void SPSystem::unpack(const Vec& z, Vec& u, Vec& v, double& w) const {
    const auto nu = static_cast<Eigen::Index>(n_u());
    const auto nv = static_cast<Eigen::Index>(n_v());
    u = z.head(nu);
    v = z.segment(nu, nv);
    w = z[nu + nv];
}

Vec SPSystem::from_state(const Vec& x, double eps) const {
    Vec u(static_cast<Eigen::Index>(n_u()));
    Vec v(static_cast<Eigen::Index>(n_v()));
    for (std::size_t i = 0; i < chart_.u.size(); ++i) u[static_cast<Eigen::Index>(i)] = x[static_cast<Eigen::Index>(chart_.u[i])];
    for (std::size_t j = 0; j < chart_.v.size(); ++j) v[static_cast<Eigen::Index>(j)] = x[static_cast<Eigen::Index>(chart_.v[j])];
    const double hw = x[static_cast<Eigen::Index>(chart_.w)];
    return pack(u, v, eps > 0.0 ? hw / eps : 0.0);
}

Vec SPSystem::slow_rhs(const Vec& z, double eps) const {
    Vec u, v;
    double w = 0.0;
    unpack(z, u, v, w);
    const Vec x = to_state(u, v, w, eps);
    const double p = phi_(w);
    const Vec F = 0.5 * (1.0 - p) * sys_.Zplus(x) + 0.5 * (1.0 + p) * sys_.Zminus(x);
    Vec out(z.size());
    for (std::size_t i = 0; i < chart_.u.size(); ++i) out[static_cast<Eigen::Index>(i)] = F[static_cast<Eigen::Index>(chart_.u[i])];
    for (std::size_t j = 0; j < chart_.v.size(); ++j)
        out[static_cast<Eigen::Index>(n_u() + j)] = F[static_cast<Eigen::Index>(chart_.v[j])];
    out[z.size() - 1] = F[static_cast<Eigen::Index>(chart_.w)];
    return out;
}

Vec SPSystem::fast_rhs(const Vec& z, double eps) const {
    Vec out = slow_rhs(z, eps);
    out.head(z.size() - 1) *= eps;
    return out;
}

Vec SPSystem::layer_rhs(const Vec& z) const {
    Vec u, v;
    double w = 0.0;
    unpack(z, u, v, w);
    Vec out = Vec::Zero(z.size());
    out[z.size() - 1] = residual<double>(u, v, w);
    return out;
}

Vec SPSystem::reduced_rhs(const Vec& u, const Vec& v, double w) const {
    const Vec x = to_state(u, v, 0.0, 0.0);
    const double p = phi_(w);
    const Vec F = 0.5 * (1.0 - p) * sys_.Zplus(x) + 0.5 * (1.0 + p) * sys_.Zminus(x);
    Vec out(static_cast<Eigen::Index>(n_u() + n_v()));
    for (std::size_t i = 0; i < chart_.u.size(); ++i) out[static_cast<Eigen::Index>(i)] = F[static_cast<Eigen::Index>(chart_.u[i])];
    for (std::size_t j = 0; j < chart_.v.size(); ++j)
        out[static_cast<Eigen::Index>(n_u() + j)] = F[static_cast<Eigen::Index>(chart_.v[j])];
    return out;
}

SPSystem sp_reduce(const PiecewiseSystem& sys, const TangencyManifold& M, const TransitionFunction& phi) {
    const auto& sym = sys.symbols();
    auto as_state = [&](const std::string& text, const char* what) {
        auto idx = sym.state_index(text);
        if (!idx)
            throw GeometryError(std::string("system is not in adapted coordinates: ") + what + " '" + text +
                                "' is not a single state variable");
        return *idx;
    };
    AdaptedChart chart;
    chart.w = as_state(sys.h_expr().to_string(), "h");
    std::set<std::size_t> used{chart.w};
    for (std::size_t i = 1; i < M.codim(); ++i) {
        const std::size_t idx = as_state(M.maps()[i].description(), "eta component");
        if (!used.insert(idx).second) throw GeometryError("system is not in adapted coordinates: repeated eta component");
        chart.v.push_back(idx);
    }
    for (std::size_t k = 0; k < sys.dim(); ++k)
        if (!used.count(k)) chart.u.push_back(k);
    return SPSystem(sys, std::move(chart), phi);
}

namespace {

double field_scale(const PiecewiseSystem& sys, const Vec& x) {
    return 1.0 + std::max(sys.Zplus(x).lpNorm<Eigen::Infinity>(), sys.Zminus(x).lpNorm<Eigen::Infinity>());
}

}  // namespace

StanPoint stan_graph(const SPSystem& sp, const TangencyManifold& M, const Vec& u, double tol) {
    const auto& sys = sp.system();
    const Vec v0 = Vec::Zero(static_cast<Eigen::Index>(sp.n_v()));
    const Vec x = sp.to_state(u, v0, 0.0, 0.0);
    const auto r = intersect_cone_tangent(sys, M, x, tol);
    if (r.kind != ConeCase::case1)
        throw GeometryError("S^tan needs case1 at (u, 0, 0), found " + std::string(to_string(r.kind)));
    StanPoint s;
    s.lambda_star = *r.lambda;
    if (!(std::abs(s.lambda_star) < 1.0)) throw GeometryError("lambda* outside the range of the transition function");
    s.w_star = sp.phi().inverse(s.lambda_star);
    s.H = sp.pack(u, v0, s.w_star);
    s.K = sp.residual<double>(u, v0, s.w_star);
    const Vec red = sp.reduced_rhs(u, v0, s.w_star);
    s.v_block = sp.n_v() == 0 ? 0.0 : red.tail(static_cast<Eigen::Index>(sp.n_v())).lpNorm<Eigen::Infinity>();
    const double scale = field_scale(sys, x);
    if (std::abs(s.K) > tol * scale) throw NumericalError("S^tan point is not in the slow set (K = " + std::to_string(s.K) + ")");
    if (s.v_block > tol * scale) throw NumericalError("reduced field is not tangent to S^tan (v-block " + std::to_string(s.v_block) + ")");
    return s;
}

Vec reduced_field_on_stan(const SPSystem& sp, const TangencyManifold& M, const Vec& u, double tol) {
    const StanPoint s = stan_graph(sp, M, u, tol);
    const Vec v0 = Vec::Zero(static_cast<Eigen::Index>(sp.n_v()));
    return sp.reduced_rhs(u, v0, s.w_star).head(static_cast<Eigen::Index>(sp.n_u()));
}

double normal_hyperbolicity_residual_at(const SPSystem& sp, const Vec& u, const Vec& v, double w) {
    const Vec x = sp.to_state(u, v, 0.0, 0.0);
    const auto wi = static_cast<Eigen::Index>(sp.chart().w);
    const double zp = sp.system().Zplus(x)[wi];
    const double zm = sp.system().Zminus(x)[wi];
    return sp.phi().derivative(w) * (zm - zp) / 2.0;
}

double normal_hyperbolicity_residual(const SPSystem& sp, const TangencyManifold& M, const Vec& u, double tol) {
    const StanPoint s = stan_graph(sp, M, u, tol);
    return normal_hyperbolicity_residual_at(sp, u, Vec::Zero(static_cast<Eigen::Index>(sp.n_v())), s.w_star);
}

ConjugacyReport verify_conjugacy(const SPSystem& sp, const TangencyManifold& M, const Vec& p0, double T,
                                 const IntegratorSettings& settings, double tol) {
    settings.validate();
    if (!(T >= 0.0)) throw Error("time horizon must be nonnegative");
    const auto& sys = sp.system();
    constexpr int kGrid = 101;
    std::vector<double> grid(kGrid);
    for (int i = 0; i < kGrid; ++i) grid[static_cast<std::size_t>(i)] = T * static_cast<double>(i) / (kGrid - 1);

    const Vec z0 = sp.from_state(p0, 0.0);
    const Vec u0 = z0.head(static_cast<Eigen::Index>(sp.n_u()));
    const Vec v0 = Vec::Zero(static_cast<Eigen::Index>(sp.n_v()));

    // Reduced flow on S^tan in the u variables. Outside case1 (past the boundary of M, where the
    // run is stopped by the event below) the cone parameter is taken from the pushforward norms.
    auto reduced = [&](const Vec& u) -> Vec {
        try {
            return reduced_field_on_stan(sp, M, u, tol);
        } catch (const GeometryError&) {
            const Vec x = sp.to_state(u, v0, 0.0, 0.0);
            double lam = tolerant_lambda(M.push(x, sys.Zplus(x)), M.push(x, sys.Zminus(x)));
            lam = std::clamp(lam, -1.0 + 1e-15, 1.0 - 1e-15);
            return sp.reduced_rhs(u, v0, sp.phi().inverse(lam)).head(static_cast<Eigen::Index>(sp.n_u()));
        }
    };
    EventFunction boundary{[&](const Vec& u) {
                               const Vec x = sp.to_state(u, v0, 0.0, 0.0);
                               const Vec a = M.push(x, sys.Zplus(x));
                               const Vec b = M.push(x, sys.Zminus(x));
                               const double s = a.norm() + b.norm();
                               return s == 0.0 ? 0.0 : -2.0 * a.dot(b) / (s * s);
                           },
                           EventKind::manifold_boundary, "cone_degeneracy", true, false};

    auto fut_tan = std::async(std::launch::async, [&] { return integrate_tangential(sys, M, p0, T, settings, tol, grid); });
    auto fut_red = std::async(std::launch::async, [&] {
        FieldRunOptions opt;
        opt.sample_times = grid;
        opt.arm_threshold = 0.0;
        return integrate_field(reduced, u0, 0.0, T, settings, {boundary}, opt);
    });

    ConjugacyReport report;
    report.tangential = fut_tan.get();
    report.reduced = fut_red.get();
    report.truncated = !report.tangential.completed || !report.reduced.completed;

    std::size_t j = 0;
    const auto& rs = report.reduced.samples;
    for (const auto& s : report.tangential.samples) {
        if (!std::binary_search(grid.begin(), grid.end(), s.t)) continue;
        while (j < rs.size() && rs[j].t < s.t) ++j;
        if (j == rs.size() || rs[j].t != s.t) break;
        const Vec zt = sp.from_state(s.x, 0.0);
        const Vec ua = zt.head(static_cast<Eigen::Index>(sp.n_u()));
        const Vec va = zt.segment(static_cast<Eigen::Index>(sp.n_u()), static_cast<Eigen::Index>(sp.n_v()));
        const Vec& ub = rs[j].x;
        double wa = 0.0;
        double wb = 0.0;
        try {
            wa = stan_graph(sp, M, ua, tol).w_star;
            wb = stan_graph(sp, M, ub, tol).w_star;
        } catch (const GeometryError&) {
            report.truncated = true;
            break;
        }
        Vec d(ua.size() + va.size() + 1);
        d << ua - ub, va, wa - wb;
        const double dev = d.norm();
        report.times.push_back(s.t);
        report.deviations.push_back(dev);
        report.max_deviation = std::max(report.max_deviation, dev);
        report.t_end = s.t;
    }
    return report;
}

}  // namespace tanglide
