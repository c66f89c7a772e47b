#include "tanglide/integrate.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tanglide/regularization.hpp"

namespace tanglide {

void IntegratorSettings::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw Error(std::string("integrator setting '") + name + "' must be positive");
    };
    positive(rtol, "rtol");
    positive(atol, "atol");
    positive(max_step, "max_step");
    positive(event_tol, "event_tol");
    if (max_events == 0) throw Error("integrator setting 'max_events' must be positive");
    if (max_steps == 0) throw Error("integrator setting 'max_steps' must be positive");
}

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::smooth_plus:
            return "smooth_plus";
        case Mode::smooth_minus:
            return "smooth_minus";
        case Mode::sliding:
            return "sliding";
        case Mode::tangential:
            return "tangential";
        case Mode::regularized:
            return "regularized";
        case Mode::free:
            return "free";
    }
    return "?";
}

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::hit_sigma:
            return "hit_sigma";
        case EventKind::exit_sliding:
            return "exit_sliding";
        case EventKind::case_change:
            return "case_change";
        case EventKind::manifold_boundary:
            return "manifold_boundary";
        case EventKind::escaping_halt:
            return "escaping_halt";
        case EventKind::user:
            return "user";
    }
    return "?";
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                 b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

struct StepResult {
    Vec x;
    Vec err;
};

StepResult dopri_step(const Rhs& f, const Vec& x, const Vec& k1, double h) {
    const Vec k2 = f(x + h * a21 * k1);
    const Vec k3 = f(x + h * (a31 * k1 + a32 * k2));
    const Vec k4 = f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    StepResult r;
    r.x = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = f(r.x);
    r.err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    return r;
}

double error_norm(const Vec& err, const Vec& x0, const Vec& x1, const IntegratorSettings& s) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = s.atol + s.rtol * std::max(std::abs(x0[i]), std::abs(x1[i]));
        const double q = err[i] / sc;
        sum += q * q;
    }
    return err.size() == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(err.size()));
}

double scaled_norm(const Vec& v, const Vec& x, const IntegratorSettings& s) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double q = v[i] / (s.atol + s.rtol * std::abs(x[i]));
        sum += q * q;
    }
    return v.size() == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(v.size()));
}

double initial_step(const Rhs& f, const Vec& x, const Vec& f0, const IntegratorSettings& s, double span) {
    const double d0 = scaled_norm(x, x, s);
    const double d1 = scaled_norm(f0, x, s);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    const Vec f1 = f(x + h0 * f0);
    const double d2 = scaled_norm(f1 - f0, x, s) / h0;
    const double m = std::max(d1, d2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
    return std::min({100.0 * h0, h1, span, s.max_step});
}

bool finite(const Vec& v) { return v.allFinite(); }

int sign_of(double g) { return (g > 0.0) - (g < 0.0); }

}  // namespace

Trajectory integrate_field(const Rhs& rhs, const Vec& p0, double t0, double t1, const IntegratorSettings& settings,
                           const std::vector<EventFunction>& events, const FieldRunOptions& options) {
    settings.validate();
    Trajectory traj;
    auto make_sample = [&](double t, const Vec& x) {
        Sample s;
        s.t = t;
        s.x = x;
        s.mode = options.mode;
        if (options.lambda_at) s.lambda_star = options.lambda_at(x);
        return s;
    };
    traj.samples.push_back(make_sample(t0, p0));
    if (!(t1 > t0)) {
        traj.completed = true;
        return traj;
    }

    std::vector<double> targets;
    for (double ts : options.sample_times)
        if (ts > t0 && ts < t1) targets.push_back(ts);
    std::sort(targets.begin(), targets.end());
    targets.push_back(t1);
    std::size_t next_target = 0;

    Vec x = p0;
    double t = t0;
    std::vector<double> g_prev(events.size());
    std::vector<bool> armed(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        g_prev[i] = events[i].g(x);
        armed[i] = std::abs(g_prev[i]) > options.arm_threshold;
    }

    Vec f0 = rhs(x);
    double h = initial_step(rhs, x, f0, settings, t1 - t0);
    double err_old = 1e-4;
    std::size_t steps = 0;
    std::size_t event_count = 0;

    while (t < t1) {
        if (++steps > settings.max_steps)
            throw NumericalError("maximum number of integration steps exceeded at t = " + std::to_string(t));
        double hmax = settings.max_step;
        if (options.max_step_at) hmax = std::min(hmax, options.max_step_at(x));
        const double h_nominal = std::min(h, hmax);
        double step = h_nominal;
        const double target = targets[next_target];
        bool hits_target = false;
        if (t + step >= target - 1e-13 * std::max(1.0, std::abs(target))) {
            step = target - t;
            hits_target = true;
        }
        const double hmin = 1e-14 * std::max(1.0, std::abs(t));
        if (step < hmin && !hits_target)
            throw StepUnderflowError("step size underflow at t = " + std::to_string(t) +
                                         " (stiff or nonsmooth right-hand side; try tighter tolerances or a "
                                         "larger eps)",
                                     t, x);

        StepResult r = dopri_step(rhs, x, f0, step);
        double err = finite(r.x) && finite(r.err) ? error_norm(r.err, x, r.x, settings) : 1e10;
        if (err > 1.0) {
            ++traj.rejected_steps;
            const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
            h = step * fac;
            if (h < hmin)
                throw StepUnderflowError("step size underflow at t = " + std::to_string(t) +
                                             " (stiff or nonsmooth right-hand side; try tighter tolerances or a "
                                             "larger eps)",
                                         t, x);
            continue;
        }

        ++traj.accepted_steps;
        if (options.band && options.band(x)) ++traj.band_steps;
        const double t_new = hits_target ? target : t + step;
        Vec x_new = options.post_step ? options.post_step(r.x) : r.x;

        // Event detection over [t, t_new].
        auto state_at = [&](double s) -> Vec {
            if (s >= step) return x_new;
            Vec xs = dopri_step(rhs, x, f0, s).x;
            return options.post_step ? options.post_step(xs) : xs;
        };
        std::optional<std::size_t> hit;
        double hit_lo = 0.0, hit_hi = 0.0;
        std::vector<double> g_new(events.size());
        for (std::size_t i = 0; i < events.size(); ++i) {
            g_new[i] = events[i].g(x_new);
            if (!armed[i]) continue;
            const double g0 = g_prev[i];
            double hi = -1.0;
            if (sign_of(g_new[i]) != sign_of(g0)) {
                hi = step;
            } else if (events[i].detect_grazing) {
                const Vec xm = state_at(0.5 * step);
                const double gm = events[i].g(xm);
                if (sign_of(gm) != sign_of(g0)) {
                    hi = 0.5 * step;
                } else {
                    // quadratic through (0, g0), (h/2, gm), (h, g1) in normalized time
                    const double c = 2.0 * (g_new[i] - 2.0 * gm + g0);
                    const double bq = 4.0 * gm - 3.0 * g0 - g_new[i];
                    if (c != 0.0) {
                        const double sv = -bq / (2.0 * c);
                        const double qv = g0 + bq * sv + c * sv * sv;
                        if (sv > 0.0 && sv < 1.0 && sign_of(qv) != sign_of(g0)) {
                            const double gv = events[i].g(state_at(sv * step));
                            if (sign_of(gv) != sign_of(g0)) hi = sv * step;
                        }
                    }
                }
            }
            if (hi > 0.0 && (!hit || hi < hit_hi)) {
                hit = i;
                hit_lo = 0.0;
                hit_hi = hi;
            }
        }

        if (hit) {
            const auto& ev = events[*hit];
            const double g0 = g_prev[*hit];
            auto fn = [&](double s) {
                const double g = ev.g(state_at(s));
                return g;
            };
            double s_event = hit_hi;
            const double g_hi = fn(hit_hi);
            if (g_hi != 0.0 && sign_of(g_hi) != sign_of(g0)) {
                std::uintmax_t iters = 200;
                auto tol = [&](double a, double b) { return std::abs(b - a) <= settings.event_tol; };
                auto [lo, hi] = boost::math::tools::toms748_solve(fn, hit_lo, hit_hi, g0, g_hi, tol, iters);
                const double g_at_hi = fn(hi);
                s_event = sign_of(g_at_hi) != sign_of(g0) ? hi : lo;
                if (s_event <= 0.0) s_event = hi;
            }
            const Vec x_event = state_at(s_event);
            const double t_event = s_event >= step ? t_new : t + s_event;
            if (++event_count > settings.max_events) throw NumericalError("maximum number of events exceeded");
            EventRecord rec;
            rec.t = t_event;
            rec.kind = ev.kind;
            rec.x = x_event;
            rec.detail = ev.name;
            traj.events.push_back(rec);
            if (t_event > traj.samples.back().t)
                traj.samples.push_back(make_sample(t_event, x_event));
            else
                traj.samples.back() = make_sample(traj.samples.back().t, x_event);
            if (ev.terminal) {
                traj.completed = false;
                traj.stop_reason = ev.name;
                return traj;
            }
            t = t_event;
            x = x_event;
            for (std::size_t i = 0; i < events.size(); ++i) {
                g_prev[i] = events[i].g(x);
                armed[i] = i != *hit && std::abs(g_prev[i]) > options.arm_threshold;
            }
            f0 = rhs(x);
            if (hits_target && s_event >= step) ++next_target;
            continue;
        }

        for (std::size_t i = 0; i < events.size(); ++i) {
            if (!armed[i] && std::abs(g_new[i]) > options.arm_threshold) armed[i] = true;
            g_prev[i] = g_new[i];
        }
        t = t_new;
        x = x_new;
        if (options.sample_times.empty() || hits_target) traj.samples.push_back(make_sample(t, x));
        if (hits_target) ++next_target;

        const double fac = std::clamp(0.9 * std::pow(err, -0.17) * std::pow(err_old, 0.04), 0.2, 10.0);
        err_old = std::max(err, 1e-4);
        h = hits_target ? std::max(step * fac, h_nominal) : step * fac;
        f0 = rhs(x);
    }
    traj.completed = true;
    traj.stop_reason = "final time reached";
    return traj;
}

namespace {

void append_segment(Trajectory& all, Trajectory seg) {
    bool first = true;
    for (auto& s : seg.samples) {
        if (first && !all.samples.empty()) {
            first = false;
            if (s.t <= all.samples.back().t) continue;
        }
        first = false;
        all.samples.push_back(std::move(s));
    }
    for (auto& e : seg.events) all.events.push_back(std::move(e));
    all.accepted_steps += seg.accepted_steps;
    all.rejected_steps += seg.rejected_steps;
    all.band_steps += seg.band_steps;
    all.completed = seg.completed;
    all.stop_reason = seg.stop_reason;
}

Vec project_to_sigma(const PiecewiseSystem& sys, Vec x) {
    double best = std::abs(sys.h(x));
    for (int it = 0; it < 20 && best > 0.0; ++it) {
        const Vec g = sys.grad_h(x);
        const double gg = g.squaredNorm();
        if (gg == 0.0) throw GeometryError("gradient of h vanishes during projection");
        const Vec next = x - (sys.h(x) / gg) * g;
        const double hn = std::abs(sys.h(next));
        if (!(hn < best)) break;
        x = next;
        best = hn;
    }
    return x;
}

Vec sliding_rhs(const PiecewiseSystem& sys, const Vec& x) {
    const Vec grad = sys.grad_h(x);
    const Vec zp = sys.Zplus(x);
    const Vec zm = sys.Zminus(x);
    const double a = grad.dot(zp);
    const double b = grad.dot(zm);
    if (a == b) return 0.5 * (zp + zm);
    const double lambda = sliding_lambda(a, b);
    return 0.5 * (1.0 - lambda) * zp + 0.5 * (1.0 + lambda) * zm;
}

}  // namespace

Trajectory integrate_hybrid(const PiecewiseSystem& sys, const Vec& p0, double T, const IntegratorSettings& settings,
                            double tol) {
    settings.validate();
    Trajectory traj;
    Vec x = p0;
    double t = 0.0;
    Mode mode = Mode::free;
    bool on_sigma = true;
    const double h0 = sys.h(x);
    if (std::abs(h0) > tol) {
        mode = h0 > 0.0 ? Mode::smooth_plus : Mode::smooth_minus;
        on_sigma = false;
    }

    for (std::size_t segment = 0; segment <= settings.max_events; ++segment) {
        if (on_sigma) {
            on_sigma = false;
            // On the switching manifold: decide how to continue.
            const auto c = classify_point_detail(sys, x, tol);
            switch (c.label) {
                case RegionLabel::crossing_plus:
                    mode = Mode::smooth_plus;
                    break;
                case RegionLabel::crossing_minus:
                    mode = Mode::smooth_minus;
                    break;
                case RegionLabel::sliding:
                    mode = Mode::sliding;
                    break;
                case RegionLabel::escaping: {
                    traj.events.push_back({t, EventKind::escaping_halt, x, "escaping region"});
                    if (traj.samples.empty()) traj.samples.push_back({t, x, Mode::free, std::nullopt});
                    traj.completed = false;
                    traj.stop_reason = "escaping region (forward solution not unique)";
                    return traj;
                }
                case RegionLabel::tangential:
                    if (traj.samples.empty()) traj.samples.push_back({t, x, Mode::free, std::nullopt});
                    traj.completed = false;
                    traj.stop_reason = "tangential singularity reached";
                    return traj;
                case RegionLabel::off_switching:
                    mode = c.h > 0.0 ? Mode::smooth_plus : Mode::smooth_minus;
                    break;
            }
        }

        if (mode == Mode::smooth_plus || mode == Mode::smooth_minus) {
            const Side side = mode == Mode::smooth_plus ? Side::plus : Side::minus;
            const VectorField& field = sys.field(side);
            EventFunction hit{[&sys](const Vec& y) { return sys.h(y); }, EventKind::hit_sigma, "hit_sigma", true, true};
            FieldRunOptions opt;
            opt.mode = mode;
            opt.arm_threshold = tol;
            auto seg = integrate_field([&field](const Vec& y) { return field(y); }, x, t, T, settings, {hit}, opt);
            if (!seg.completed) {
                Vec xs = project_to_sigma(sys, seg.samples.back().x);
                seg.samples.back().x = xs;
                seg.events.back().x = xs;
            }
            append_segment(traj, std::move(seg));
            if (traj.completed) return traj;
            x = traj.samples.back().x;
            t = traj.samples.back().t;
            on_sigma = true;
            continue;
        }

        // Sliding.
        EventFunction exit_plus{[&sys](const Vec& y) { return sys.normal_component(Side::plus, y); },
                                EventKind::exit_sliding, "exit_sliding_plus", true, false};
        EventFunction exit_minus{[&sys](const Vec& y) { return sys.normal_component(Side::minus, y); },
                                 EventKind::exit_sliding, "exit_sliding_minus", true, false};
        FieldRunOptions opt;
        opt.mode = Mode::sliding;
        opt.arm_threshold = tol;
        opt.post_step = [&sys](const Vec& y) { return project_to_sigma(sys, y); };
        opt.lambda_at = [&sys](const Vec& y) -> std::optional<double> {
            const Vec grad = sys.grad_h(y);
            const double a = grad.dot(sys.Zplus(y));
            const double b = grad.dot(sys.Zminus(y));
            if (a == b) return 0.0;
            return sliding_lambda(a, b);
        };
        auto seg = integrate_field([&sys](const Vec& y) { return sliding_rhs(sys, y); }, x, t, T, settings,
                                   {exit_plus, exit_minus}, opt);
        const std::string reason = seg.stop_reason;
        append_segment(traj, std::move(seg));
        if (traj.completed) return traj;
        x = traj.samples.back().x;
        t = traj.samples.back().t;
        // Leave Σ only where the exiting field bends away from it (visible fold).
        const Side side = reason == "exit_sliding_plus" ? Side::plus : Side::minus;
        const auto d = lie_derivatives(sys.field(side), sys.h_map(), x, 2);
        if (side == Side::plus && d[2] > tol) {
            mode = Mode::smooth_plus;
        } else if (side == Side::minus && d[2] < -tol) {
            mode = Mode::smooth_minus;
        } else {
            traj.completed = false;
            traj.stop_reason = "sliding ended at a tangential singularity";
            return traj;
        }
    }
    throw NumericalError("maximum number of events exceeded");
}

double tolerant_lambda(const Vec& u, const Vec& v) {
    const double nu = u.norm();
    const double nv = v.norm();
    const double s = nu + nv;
    return s == 0.0 ? 0.0 : (nu - nv) / s;
}

Vec project_onto(const TangencyManifold& M, const Vec& x0, double tol, int max_iter) {
    Vec x = x0;
    Vec e = M.eta(x);
    double err = e.norm();
    for (int it = 0; it < max_iter && err > tol; ++it) {
        const Eigen::MatrixXd J = M.d_eta(x);
        const Eigen::MatrixXd JJt = J * J.transpose();
        const Vec dx = J.transpose() * JJt.ldlt().solve(e);
        const Vec next = x - dx;
        if (!next.allFinite()) throw NumericalError("projection onto M produced a non-finite state");
        const Vec en = M.eta(next);
        const double errn = en.norm();
        if (!(errn < err)) break;  // no further progress in floating point
        x = next;
        e = en;
        err = errn;
    }
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + x.norm());
    if (err > std::max(tol, floor)) throw NumericalError("projection onto M diverged (|eta| = " + std::to_string(err) + ")");
    return x;
}

Trajectory integrate_tangential(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p0, double T,
                                const IntegratorSettings& settings, double tol,
                                const std::vector<double>& sample_times) {
    settings.validate();
    const auto start = intersect_cone_tangent(sys, M, p0, tol);
    if (start.kind != ConeCase::case1)
        throw GeometryError("tangential integration needs case1 at the initial point, found " +
                            std::string(to_string(start.kind)));

    auto pushes = [&](const Vec& x) {
        const Vec zp = sys.Zplus(x);
        const Vec zm = sys.Zminus(x);
        return std::pair<Vec, Vec>(M.push(x, zp), M.push(x, zm));
    };
    auto rhs = [&](const Vec& x) {
        const Vec zp = sys.Zplus(x);
        const Vec zm = sys.Zminus(x);
        const double lam = tolerant_lambda(M.push(x, zp), M.push(x, zm));
        return Vec(0.5 * (1.0 - lam) * zp + 0.5 * (1.0 + lam) * zm);
    };

    // (1 - lambda^2)/2 on case1; changes sign when the pushforwards stop being anti-parallel
    // through a vanishing norm (lambda -> +-1).
    EventFunction degeneracy{[&](const Vec& x) {
                                 auto [u, v] = pushes(x);
                                 const double s = u.norm() + v.norm();
                                 return s == 0.0 ? 0.0 : -2.0 * u.dot(v) / (s * s);
                             },
                             EventKind::case_change, "cone_degeneracy", true, false};
    EventFunction alignment{[&](const Vec& x) {
                                auto [u, v] = pushes(x);
                                return 1e-6 - antiparallel_defect(u, v);
                            },
                            EventKind::case_change, "antiparallel_lost", true, false};
    EventFunction domain{[&](const Vec& x) { return M.in_domain(x) ? 1.0 : -1.0; }, EventKind::manifold_boundary,
                         "domain_exit", true, false};

    FieldRunOptions opt;
    opt.mode = Mode::tangential;
    opt.sample_times = sample_times;
    opt.arm_threshold = 0.0;
    opt.post_step = [&](const Vec& x) { return project_onto(M, x, settings.event_tol); };
    opt.lambda_at = [&](const Vec& x) -> std::optional<double> {
        auto [u, v] = pushes(x);
        return tolerant_lambda(u, v);
    };

    Trajectory traj = integrate_field(rhs, p0, 0.0, T, settings, {degeneracy, alignment, domain}, opt);
    if (!traj.completed && !traj.events.empty()) {
        auto& ev = traj.events.back();
        if (ev.detail == "cone_degeneracy" || ev.detail == "antiparallel_lost") {
            auto [u, v] = pushes(ev.x);
            const double nu = u.norm();
            const double nv = v.norm();
            const double ratio = std::max(nu, nv) == 0.0 ? 0.0 : std::min(nu, nv) / std::max(nu, nv);
            ev.kind = ratio <= 1e-6 ? EventKind::manifold_boundary : EventKind::case_change;
        }
        traj.stop_reason = ev.kind == EventKind::manifold_boundary ? "reached manifold boundary" : "cone case changed";
    }
    return traj;
}

Trajectory integrate_regularized(const PiecewiseSystem& sys, const TransitionFunction& phi, double eps, const Vec& p0,
                                 double T, const IntegratorSettings& settings,
                                 const std::vector<double>& sample_times) {
    if (!(eps > 0.0)) throw Error("eps must be positive");
    settings.validate();
    FieldRunOptions opt;
    opt.mode = Mode::regularized;
    opt.sample_times = sample_times;
    opt.max_step_at = [&](const Vec& x) {
        return std::abs(sys.h(x)) < 2.0 * eps ? 0.5 * eps : std::numeric_limits<double>::infinity();
    };
    opt.band = [&](const Vec& x) { return std::abs(sys.h(x)) < 2.0 * eps; };
    return integrate_field([&](const Vec& x) { return regularized_field(sys, phi, eps, x); }, p0, 0.0, T, settings,
                           {}, opt);
}

}  // namespace tanglide
