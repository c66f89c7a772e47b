#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tanglide/tangential.hpp"
#include "tanglide/transition.hpp"

namespace tanglide {

struct IntegratorSettings {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = std::numeric_limits<double>::infinity();
    double event_tol = 1e-12;  // in time
    std::size_t max_events = 1000;
    std::size_t max_steps = 2'000'000;

    /// Throws Error naming the first nonpositive field.
    void validate() const;
};

enum class Mode { smooth_plus, smooth_minus, sliding, tangential, regularized, free };
enum class EventKind { hit_sigma, exit_sliding, case_change, manifold_boundary, escaping_halt, user };

std::string_view to_string(Mode m);
std::string_view to_string(EventKind k);

struct Sample {
    double t = 0.0;
    Vec x;
    Mode mode = Mode::free;
    std::optional<double> lambda_star;
};

struct EventRecord {
    double t = 0.0;
    EventKind kind = EventKind::user;
    Vec x;
    std::string detail;
};

struct Trajectory {
    std::vector<Sample> samples;
    std::vector<EventRecord> events;
    bool completed = false;  // reached the requested final time
    std::string stop_reason;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t band_steps = 0;  // regularized runs: accepted steps started inside |h| < 2 eps

    const Sample& back() const { return samples.back(); }
    double final_time() const { return samples.back().t; }
};

/// Step underflow; carries the last accepted state.
class StepUnderflowError : public NumericalError {
public:
    StepUnderflowError(const std::string& message, double t, Vec x)
        : NumericalError(message), t_(t), x_(std::move(x)) {}
    double t() const noexcept { return t_; }
    const Vec& x() const noexcept { return x_; }

private:
    double t_;
    Vec x_;
};

struct EventFunction {
    std::function<double(const Vec&)> g;
    EventKind kind = EventKind::user;
    std::string name;
    bool terminal = true;
    /// Also look for a pair of roots inside one step (touch-and-return contacts).
    bool detect_grazing = false;
};

using Rhs = std::function<Vec(const Vec&)>;

struct FieldRunOptions {
    Mode mode = Mode::free;
    /// If nonempty, samples are emitted exactly at these times (ascending, inside the span)
    /// instead of at every accepted step. The endpoints are always sampled.
    std::vector<double> sample_times;
    /// Applied to every accepted state (projection onto a constraint set).
    std::function<Vec(const Vec&)> post_step;
    /// State-dependent cap on the step size, evaluated at the start of each step.
    std::function<double(const Vec&)> max_step_at;
    /// Per-sample annotation for the lambda_star column.
    std::function<std::optional<double>(const Vec&)> lambda_at;
    /// Counts accepted steps whose start state satisfies this predicate.
    std::function<bool(const Vec&)> band;
    /// |g| must exceed this before a sign change of an event function counts.
    double arm_threshold = 1e-9;
};

/// Dormand-Prince 5(4) with PI step control and event location.
Trajectory integrate_field(const Rhs& rhs, const Vec& p0, double t0, double t1, const IntegratorSettings& settings,
                           const std::vector<EventFunction>& events = {}, const FieldRunOptions& options = {});

/// Filippov orchestration: smooth flow in each half space, crossing, sliding, halting at
/// escaping and tangential points.
Trajectory integrate_hybrid(const PiecewiseSystem& sys, const Vec& p0, double T, const IntegratorSettings& settings,
                            double tol = kDefaultTol);

/// Tangential sliding on M with Newton projection after each accepted step.
Trajectory integrate_tangential(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p0, double T,
                                const IntegratorSettings& settings, double tol = kDefaultTol,
                                const std::vector<double>& sample_times = {});

/// Integrates the phi-regularization Z_eps, with the step capped at eps/2 inside |h| < 2 eps.
Trajectory integrate_regularized(const PiecewiseSystem& sys, const TransitionFunction& phi, double eps, const Vec& p0,
                                 double T, const IntegratorSettings& settings,
                                 const std::vector<double>& sample_times = {});

/// Min-norm Newton projection onto eta = 0. Throws NumericalError if it fails to converge.
Vec project_onto(const TangencyManifold& M, const Vec& x, double tol, int max_iter = 25);

/// Lambda used by the tangential integrator at points near M; also defined off case1.
double tolerant_lambda(const Vec& u, const Vec& v);

}  // namespace tanglide
