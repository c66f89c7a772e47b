#include "tanglide/models.hpp"

#include <cmath>
#include <sstream>

namespace tanglide {

namespace {

std::string idx(const char* prefix, int i) { return prefix + std::to_string(i); }

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Magnitude in [0.5, 2] with a random sign.
double signed_magnitude(std::mt19937_64& rng) {
    const double m = uniform(rng, 0.5, 2.0);
    return std::bernoulli_distribution(0.5)(rng) ? m : -m;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

const ManifoldEntry& ModelBundle::manifold(const std::string& wanted) const {
    for (const auto& m : manifolds)
        if (m.name == wanted) return m;
    throw Error("model '" + name + "' has no manifold named '" + wanted + "'");
}

// ---------------------------------------------------------------- fold-fold

ModelBundle make_fold_fold(const FoldFoldParams& p) {
    if (p.a[0] * p.a[3] * p.b[0] * p.b[3] == 0.0) throw ConstraintError("fold-fold requires a1 a4 b1 b4 != 0");

    std::vector<std::pair<std::string, double>> params;
    for (int i = 0; i < 4; ++i) params.emplace_back(idx("a", i + 1), p.a[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 4; ++i) params.emplace_back(idx("b", i + 1), p.b[static_cast<std::size_t>(i)]);
    SymbolTable symbols({"x1", "x2", "x3", "x4"}, params);
    auto sys = PiecewiseSystem::parse(symbols, "x4", {"a1", "a2", "a3", "a4*x1"}, {"b1", "b2", "b3", "b4*x1"});

    const auto a = p.a;
    const auto b = p.b;
    const double wa = std::abs(a[0]);
    const double wb = std::abs(b[0]);

    ManifoldEntry m{"M", TangencyManifold::from_expressions(sys, {"x1"}), a[0] * b[0] < 0.0, {}, {}, {}};
    m.lambda_oracle = [wa, wb](const Vec&) { return (wa - wb) / (wa + wb); };
    m.ztan_oracle = [a, b, wa, wb](const Vec&) {
        Vec z = Vec::Zero(4);
        z[1] = (a[1] * wb + b[1] * wa) / (wb + wa);
        z[2] = (a[2] * wb + b[2] * wa) / (wb + wa);
        return z;
    };
    m.sample = [](std::mt19937_64& rng) {
        Vec x = Vec::Zero(4);
        x[1] = uniform(rng, -2.0, 2.0);
        x[2] = uniform(rng, -2.0, 2.0);
        return x;
    };

    ModelBundle bundle{"fold_fold", sys, {std::move(m)}, Vec::Zero(4)};
    return bundle;
}

// ---------------------------------------------------------------- chain

namespace {

void validate_chain(const ChainParams& p) {
    if (p.m < 2) throw ConstraintError("chain requires m >= 2");
    if (p.l <= p.m) throw ConstraintError("chain requires l > m");
    if (p.n < p.l) throw ConstraintError("chain requires n >= l");
    const auto len = static_cast<std::size_t>(p.n - 1);
    if (p.a.size() != len || p.b.size() != len)
        throw ConstraintError("chain requires n-1 coefficients a_i and n-1 coefficients b_i");
    for (int i = 1; i <= p.l - 1; ++i)
        if (p.a[static_cast<std::size_t>(i - 1)] == 0.0) throw ConstraintError("chain requires a_" + std::to_string(i) + " != 0");
    for (int j = 1; j <= p.m - 1; ++j)
        if (p.b[static_cast<std::size_t>(j - 1)] == 0.0) throw ConstraintError("chain requires b_" + std::to_string(j) + " != 0");
}

double coef(const std::vector<double>& c, int i) { return c[static_cast<std::size_t>(i - 1)]; }

/// Component i (1-based) of the chain field with contact order L and coefficients c.
double chain_component(const std::vector<double>& c, int L, int n, const Vec& x, int i) {
    if (i == n) return x[0];
    if (i <= L - 2) return coef(c, i) * x[i];  // x_{i+1}
    return coef(c, i);
}

Vec chain_field(const ChainParams& p, Side side, const Vec& x) {
    const auto& c = side == Side::plus ? p.a : p.b;
    const int L = side == Side::plus ? p.l : p.m;
    Vec z(p.n);
    for (int i = 1; i <= p.n; ++i) z[i - 1] = chain_component(c, L, p.n, x, i);
    return z;
}

std::vector<std::string> chain_text(const char* name, int L, int n) {
    std::vector<std::string> out;
    for (int i = 1; i <= n - 1; ++i)
        out.push_back(i <= L - 2 ? idx(name, i) + "*" + idx("x", i + 1) : idx(name, i));
    out.emplace_back("x1");
    return out;
}

/// Random point with x_1..x_{k-1} = 0, x_n = 0 and x_k of the requested sign (0: either).
Vec chain_point(int n, int k, int sign_k, std::mt19937_64& rng) {
    Vec x = Vec::Zero(n);
    for (int i = k; i <= n - 1; ++i) x[i - 1] = signed_magnitude(rng);
    if (sign_k != 0) x[k - 1] = sign_k * std::abs(x[k - 1]);
    return x;
}

}  // namespace

ModelBundle make_lie_chain(const ChainParams& p) {
    validate_chain(p);
    std::vector<std::string> states;
    for (int i = 1; i <= p.n; ++i) states.push_back(idx("x", i));
    std::vector<std::pair<std::string, double>> params;
    for (int i = 1; i <= p.n - 1; ++i) params.emplace_back(idx("a", i), coef(p.a, i));
    for (int i = 1; i <= p.n - 1; ++i) params.emplace_back(idx("b", i), coef(p.b, i));
    SymbolTable symbols(states, params);
    auto sys = PiecewiseSystem::parse(symbols, idx("x", p.n), chain_text("a", p.l, p.n), chain_text("b", p.m, p.n));

    ModelBundle bundle{"lie_chain", sys, {}, Vec()};
    for (int k = 2; k <= p.m; ++k) {
        TangencyManifold M = build_eta_from_lie(sys, k);
        M.set_domain([k](const Vec& x) { return x[k - 1] != 0.0; });
        ManifoldEntry e{idx("M", k), std::move(M), true, {}, {}, {}};
        const double ak = coef(p.a, k - 1);
        const double bk = coef(p.b, k - 1);
        if (k < p.m) {
            // u and v differ by the factor b_{k-1}/a_{k-1} in their last component.
            e.admissible = ak * bk < 0.0;
            const double wa = std::abs(ak);
            const double wb = std::abs(bk);
            e.lambda_oracle = [wa, wb](const Vec&) { return (wa - wb) / (wa + wb); };
            e.ztan_oracle = [p, wa, wb](const Vec& x) {
                return Vec((wb * chain_field(p, Side::plus, x) + wa * chain_field(p, Side::minus, x)) / (wa + wb));
            };
            e.sample = [n = p.n, k](std::mt19937_64& rng) { return chain_point(n, k, 0, rng); };
        } else {
            // Anti-parallel iff a_{m-1} x_m b_{m-1} < 0.
            e.lambda_oracle = [ak, bk, k](const Vec& x) {
                const double u = std::abs(ak * x[k - 1]);
                const double v = std::abs(bk);
                return (u - v) / (u + v);
            };
            e.ztan_oracle = [p, ak, bk, k](const Vec& x) {
                const double ax = ak * x[k - 1];
                Vec z = Vec::Zero(p.n);
                for (int i = k; i <= p.n - 1; ++i)
                    z[i - 1] = (bk * chain_component(p.a, p.l, p.n, x, i) - ax * coef(p.b, i)) / (bk - ax);
                return z;
            };
            const int sign = ak * bk > 0.0 ? -1 : 1;
            e.sample = [n = p.n, k, sign](std::mt19937_64& rng) { return chain_point(n, k, sign, rng); };
        }
        bundle.manifolds.push_back(std::move(e));
    }
    std::mt19937_64 rng(1);
    bundle.reference_point = bundle.manifolds.front().sample(rng);
    return bundle;
}

ChainParams random_chain_params(int n, int l, int m, std::mt19937_64& rng) {
    ChainParams p{n, l, m, {}, {}};
    for (int i = 1; i <= n - 1; ++i) {
        p.a.push_back(signed_magnitude(rng));
        p.b.push_back(signed_magnitude(rng));
        if (i + 1 < m && p.a.back() * p.b.back() > 0.0) p.b.back() = -p.b.back();
    }
    return p;
}

std::vector<double> chain_lie_ladder(const ChainParams& p, Side side, const Vec& x, int order) {
    validate_chain(p);
    const auto& c = side == Side::plus ? p.a : p.b;
    const int L = side == Side::plus ? p.l : p.m;
    std::vector<double> out;
    out.push_back(x[p.n - 1]);
    double prod = 1.0;  // c_1 ... c_{i-1}
    for (int i = 1; i <= order; ++i) {
        if (i > 1 && i - 1 <= L - 1) prod *= coef(c, i - 1);
        if (i <= L - 1)
            out.push_back(prod * x[i - 1]);
        else if (i == L)
            out.push_back(prod);
        else
            out.push_back(0.0);
    }
    return out;
}

ChainObstruction check_chain_obstruction(const ChainParams& p, const Vec& x) {
    auto bundle = make_lie_chain(p);
    const TangencyManifold M = build_eta_from_lie(bundle.system, p.m + 1);
    const ConeCaseResult r = intersect_cone_tangent(bundle.system, M, x);
    ChainObstruction out;
    out.engine_case = r.kind;
    const auto j = static_cast<Eigen::Index>(p.m - 1);
    out.blocking_component = r.v[j];
    const double scale = std::max({1.0, r.norm_u, r.norm_v});
    out.contradiction = std::abs(r.u[j]) <= kDefaultTol * scale && std::abs(r.v[j]) > kDefaultTol * scale;
    return out;
}

Vec sample_chain_obstruction_point(const ChainParams& p, std::mt19937_64& rng) {
    return chain_point(p.n, p.m + 1, 0, rng);
}

// ---------------------------------------------------------------- HIV

namespace {

ConstraintCheck check(std::string text, double lhs, double rhs) {
    return {std::move(text), lhs, rhs, lhs < rhs};
}

std::vector<ConstraintCheck> positivity(const HivParams& p) {
    const std::pair<const char*, double> fields[] = {{"s", p.s},         {"k", p.k},           {"alpha", p.alpha},
                                                     {"delta", p.delta}, {"theta", p.theta},   {"c", p.c},
                                                     {"eta_RT", p.eta_rt}, {"eta_PI", p.eta_pi}, {"C_T", p.C_T}};
    std::vector<ConstraintCheck> out;
    for (const auto& [name, v] : fields) out.push_back(check(std::string("0 < ") + name, 0.0, v));
    return out;
}

double lower_bound(const HivParams& p) { return p.s / p.delta + p.c * (p.delta - p.alpha) / (p.k * p.theta); }
double efficacy_bound(const HivParams& p) {
    return p.s / p.delta + p.c * (p.delta - p.alpha) / ((p.eta_rt - 1.0) * (p.eta_pi - 1.0) * p.k * p.theta);
}

void append_efficacy(std::vector<ConstraintCheck>& out, const HivParams& p) {
    out.push_back(check("eta_RT < 1", p.eta_rt, 1.0));
    out.push_back(check("eta_PI < 1", p.eta_pi, 1.0));
}

}  // namespace

std::vector<ConstraintCheck> check_hiv_constraints_printed(const HivParams& p) {
    std::vector<ConstraintCheck> out;
    out.push_back(check("alpha < delta", p.alpha, p.delta));
    out.push_back(check("c alpha delta < k s theta", p.c * p.alpha * p.delta, p.k * p.s * p.theta));
    out.push_back(check("s/delta + c(delta-alpha)/(k theta) < C_T", lower_bound(p), p.C_T));
    out.push_back(check("C_T < s/delta", p.C_T, p.s / p.delta));
    out.push_back(check("C_T < s/delta + c(delta-alpha)/((eta_RT-1)(eta_PI-1) k theta)", p.C_T, efficacy_bound(p)));
    return out;
}

std::vector<ConstraintCheck> check_hiv_constraints(const HivParams& p, HivValidation mode) {
    std::vector<ConstraintCheck> out = positivity(p);
    append_efficacy(out, p);
    out.push_back(check("alpha < delta", p.alpha, p.delta));
    if (mode == HivValidation::corrected) {
        out.push_back(check("c alpha delta < k s theta", p.c * p.alpha * p.delta, p.k * p.s * p.theta));
        out.push_back(check("s/delta + c(delta-alpha)/(k theta) < C_T", lower_bound(p), p.C_T));
        out.push_back(check("C_T < s/alpha", p.C_T, p.s / p.alpha));
        out.push_back(
            check("C_T < s/delta + c(delta-alpha)/((eta_RT-1)(eta_PI-1) k theta)", p.C_T, efficacy_bound(p)));
    } else {
        out.push_back(check("s/delta < C_T", p.s / p.delta, p.C_T));
        out.push_back(check("C_T < s/alpha", p.C_T, p.s / p.alpha));
    }
    return out;
}

HivParams hiv_default_params() { return HivParams{}; }

Vec hiv_to_adapted(const HivParams& p, const Vec& x) {
    Vec y(3);
    y << x[0] + x[1] - p.C_T, p.s - p.C_T * p.alpha + x[1] * (p.alpha - p.delta), x[2];
    return y;
}

Vec hiv_from_adapted(const HivParams& p, const Vec& y) {
    const double x2 = (y[1] - p.s + p.C_T * p.alpha) / (p.alpha - p.delta);
    Vec x(3);
    x << y[0] + p.C_T - x2, x2, y[2];
    return x;
}

Eigen::Matrix3d hiv_adapted_jacobian(const HivParams& p) {
    Eigen::Matrix3d J;
    J << 1.0, 1.0, 0.0, 0.0, p.alpha - p.delta, 0.0, 0.0, 0.0, 1.0;
    return J;
}

namespace {

/// Tangency line and cusps; everything in HivReference except the equilibrium.
HivReference hiv_tangency_line(const HivParams& p) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, eR = p.eta_rt, CT = p.C_T;
    HivReference r;
    r.x1 = (s - CT * de) / (al - de);
    r.x2 = (al * CT - s) / (al - de);
    r.x3_plus = -de * (s - al * CT) / (k * (s - CT * de));
    r.x3_minus = de * (s - al * CT) / ((eR - 1.0) * k * (s - CT * de));
    r.pc_plus = Vec(3);
    r.pc_plus << r.x1, r.x2, r.x3_plus;
    r.pc_minus = Vec(3);
    r.pc_minus << r.x1, r.x2, r.x3_minus;
    return r;
}

}  // namespace

HivReference hiv_reference_quantities(const HivParams& p) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, th = p.theta, c = p.c;
    const double eR = p.eta_rt, eP = p.eta_pi, CT = p.C_T;
    HivReference r = hiv_tangency_line(p);
    r.delta_disc = k * th * (s - al * CT) * (s - al * CT) * (s - CT * de) *
                   (4.0 * c * de * eP * eR * (al - de) + k * th * (eP - eR) * (eP - eR) * (s - CT * de));
    if (r.delta_disc < 0.0) throw DomainError("equilibrium discriminant is negative: " + fmt(r.delta_disc));
    r.p2_star = (-k * th * (eP - eR) * (s - al * CT) * (s - CT * de) + std::sqrt(r.delta_disc)) /
                (2.0 * c * eR * k * (al - de) * (CT * de - s));
    return r;
}

double hiv_lambda_x_chart(const HivParams& p, double x3) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, eR = p.eta_rt, CT = p.C_T;
    return (-2.0 * al * CT * de + CT * de * eR * k * x3 - 2.0 * CT * de * k * x3 - eR * k * s * x3 + 2.0 * k * s * x3 +
            2.0 * de * s) /
           (eR * k * x3 * (s - CT * de));
}

double hiv_lambda_y_chart(const HivParams& p, double y3) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, eR = p.eta_rt, CT = p.C_T;
    return -(de * s - al * CT * de) / (eR * k * s * y3 - CT * de * eR * k * y3) - 1.0 / eR + 1.0;
}

double hiv_ztan_x_chart(const HivParams& p, double x3) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, th = p.theta, c = p.c;
    const double eR = p.eta_rt, eP = p.eta_pi, CT = p.C_T;
    const double q = 1.0 - (de * (s - CT * (al + k * x3)) + k * s * x3) /
                               (de * (s - al * CT) - (eR - 1.0) * k * x3 * (s - CT * de));
    const double d = al - de;
    return -al * c * x3 / d + c * de * x3 / d - al * CT * eP * th / d + al * CT * th / d + al * CT * eP * th / (d * q) -
           eP * th * s / (d * q) + eP * th * s / d - th * s / d;
}

double hiv_ztan_y_chart(const HivParams& p, double y3) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, th = p.theta, c = p.c;
    const double eR = p.eta_rt, eP = p.eta_pi, CT = p.C_T;
    return -c * y3 - th * (s - al * CT) * (k * y3 * (eP - eR) * (s - CT * de) + de * eP * (s - al * CT)) /
                         (eR * k * y3 * (al - de) * (CT * de - s));
}

double hiv_stan_argument(const HivParams& p, double u) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, eR = p.eta_rt, CT = p.C_T;
    return -de * (s - al * CT) / (eR * k * (s * u - CT * de * u)) - 1.0 / eR + 1.0;
}

namespace {

/// Third coordinate strictly between the cusps, away from them by `margin` of the gap.
double sample_x3(const HivReference& r, std::mt19937_64& rng, double margin = 0.01) {
    const double lo = std::min(r.x3_plus, r.x3_minus);
    const double hi = std::max(r.x3_plus, r.x3_minus);
    const double gap = hi - lo;
    return uniform(rng, lo + margin * gap, hi - margin * gap);
}

/// Pushforwards of the adapted-chart eta along Z+ and Z- on the tangency line (hand-derived).
std::pair<double, double> hiv_pushforwards(const HivParams& p, double y3) {
    const double s = p.s, k = p.k, al = p.alpha, de = p.delta, eR = p.eta_rt, CT = p.C_T;
    const double u = k * y3 * (s - CT * de) + de * (s - al * CT);
    const double v = de * (s - al * CT) - (eR - 1.0) * k * y3 * (s - CT * de);
    return {u, v};
}

double lambda_from_pushforwards(const HivParams& p, double y3) {
    const auto [u, v] = hiv_pushforwards(p, y3);
    return (std::abs(u) - std::abs(v)) / (std::abs(u) + std::abs(v));
}

std::string fail_list(const std::vector<ConstraintCheck>& checks) {
    std::string out;
    for (const auto& c : checks)
        if (!c.holds) out += (out.empty() ? "" : "; ") + c.inequality + " (" + fmt(c.lhs) + " vs " + fmt(c.rhs) + ")";
    return out;
}

}  // namespace

ModelBundle make_hiv(const HivParams& p, HivChart chart, HivValidation validation) {
    const auto checks = check_hiv_constraints(p, validation);
    if (const auto failed = fail_list(checks); !failed.empty())
        throw ConstraintError("HIV parameters violate: " + failed);

    SymbolTable symbols(chart == HivChart::original ? std::vector<std::string>{"x1", "x2", "x3"}
                                                    : std::vector<std::string>{"y1", "y2", "y3"},
                        {{"s", p.s},
                         {"k", p.k},
                         {"alpha", p.alpha},
                         {"delta", p.delta},
                         {"theta", p.theta},
                         {"c", p.c},
                         {"eta_RT", p.eta_rt},
                         {"eta_PI", p.eta_pi},
                         {"C_T", p.C_T}});

    const HivReference ref = hiv_tangency_line(p);
    const double cusp_a = ref.x3_plus;
    const double cusp_b = ref.x3_minus;
    // eta is defined away from the two cusps.
    auto domain = [cusp_a, cusp_b](const Vec& x) {
        const double x3 = x[2];
        const double scale = 1e-12 * std::max({1.0, std::abs(cusp_a), std::abs(cusp_b)});
        return std::abs(x3 - cusp_a) > scale && std::abs(x3 - cusp_b) > scale;
    };

    ModelBundle bundle{chart == HivChart::original ? "hiv" : "hiv_adapted",
                       chart == HivChart::original
                           ? PiecewiseSystem::parse(symbols, "x1 + x2 - C_T",
                                                    {"-k*x1*x3 + s - alpha*x1", "k*x1*x3 - delta*x2",
                                                     "theta*x2 - c*x3"},
                                                    {"-(1 - eta_RT)*k*x1*x3 + s - alpha*x1",
                                                     "(1 - eta_RT)*k*x1*x3 - delta*x2",
                                                     "(1 - eta_PI)*theta*x2 - c*x3"})
                           : PiecewiseSystem::parse(
                                 symbols, "y1",
                                 {"y2 - alpha*y1",
                                  "k*y3*(-delta*(C_T + y1) + s + alpha*y1 - y2) + delta*(-alpha*C_T + s - y2)",
                                  "theta*(alpha*C_T - s + y2)/(alpha - delta) - c*y3"},
                                 {"y2 - alpha*y1",
                                  "delta*(-alpha*C_T + s - y2) - (eta_RT - 1)*k*y3*(-delta*(C_T + y1) + s + alpha*y1 - y2)",
                                  "(eta_PI - 1)*theta*(-alpha*C_T + s - y2)/(alpha - delta) - c*y3"}),
                       {},
                       Vec()};

    const double x1 = chart == HivChart::original ? ref.x1 : 0.0;
    const double x2 = chart == HivChart::original ? ref.x2 : 0.0;
    auto on_line = [x1, x2](double x3) {
        Vec x(3);
        x << x1, x2, x3;
        return x;
    };
    auto lambda_oracle = chart == HivChart::original
                             ? std::function<double(const Vec&)>([p](const Vec& x) { return hiv_lambda_x_chart(p, x[2]); })
                             : std::function<double(const Vec&)>(
                                   [p](const Vec& y) { return lambda_from_pushforwards(p, y[2]); });
    auto ztan_oracle = [p, chart](const Vec& x) {
        Vec z = Vec::Zero(3);
        z[2] = chart == HivChart::original ? hiv_ztan_x_chart(p, x[2]) : hiv_ztan_y_chart(p, x[2]);
        return z;
    };
    auto sample = [ref, on_line](std::mt19937_64& rng) { return on_line(sample_x3(ref, rng)); };

    const std::string eta2 = chart == HivChart::original ? "-alpha*C_T + s + x2*(alpha - delta)" : "y2";
    bundle.manifolds.push_back(
        {"M2", TangencyManifold::from_expressions(bundle.system, {eta2}, domain), true, lambda_oracle, ztan_oracle, sample});
    if (chart == HivChart::original) {
        TangencyManifold lie = build_eta_from_lie(bundle.system, 2);
        lie.set_domain(domain);
        bundle.manifolds.push_back({"M2_lie", std::move(lie), true, lambda_oracle, ztan_oracle, sample});
    }
    bundle.reference_point = on_line(0.5 * (ref.x3_plus + ref.x3_minus));
    return bundle;
}

}  // namespace tanglide
