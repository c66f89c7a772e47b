#include "tanglide/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "tanglide/filippov.hpp"
#include "tanglide/regularization.hpp"

namespace tanglide {

using json = nlohmann::ordered_json;

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------- config parsing

namespace {

double get_number(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError(key, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
    return v;
}

std::vector<double> get_numbers(const nlohmann::json& j, const std::string& key) {
    std::vector<double> out;
    if (j.is_number()) return {get_number(j, key)};
    if (!j.is_array()) throw ConfigError(key, "expected a number or an array of numbers");
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], key + "[" + std::to_string(i) + "]"));
    return out;
}

std::string get_string(const nlohmann::json& j, const std::string& key) {
    if (!j.is_string()) throw ConfigError(key, "expected a string");
    return j.get<std::string>();
}

std::vector<std::string> get_strings(const nlohmann::json& j, const std::string& key) {
    if (!j.is_array()) throw ConfigError(key, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], key + "[" + std::to_string(i) + "]"));
    return out;
}

void reject_unknown(const nlohmann::json& j, const std::string& prefix, std::initializer_list<const char*> known) {
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* name : known) ok = ok || k == name;
        if (!ok) throw ConfigError(prefix + k, "unknown key");
    }
}

ModelSpec parse_model(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model", "expected an object");
    reject_unknown(j, "model.", {"builtin", "params", "a", "b", "validation", "states", "h", "zplus", "zminus", "eta"});
    ModelSpec m;
    const bool has_builtin = j.contains("builtin");
    const bool has_inline = j.contains("h") || j.contains("zplus") || j.contains("zminus") || j.contains("states");
    if (has_builtin == has_inline)
        throw ConfigError("model", "exactly one model source is required (builtin, or states/h/zplus/zminus)");
    if (has_builtin) {
        m.builtin = get_string(j["builtin"], "model.builtin");
        if (j.contains("params")) {
            if (!j["params"].is_object()) throw ConfigError("model.params", "expected an object");
            for (const auto& [k, v] : j["params"].items()) m.params[k] = get_number(v, "model.params." + k);
        }
        for (const char* key : {"a", "b"})
            if (j.contains(key)) m.arrays[key] = get_numbers(j[key], std::string("model.") + key);
        if (j.contains("validation")) m.validation = get_string(j["validation"], "model.validation");
        return m;
    }
    for (const char* key : {"states", "h", "zplus", "zminus"})
        if (!j.contains(key)) throw ConfigError(std::string("model.") + key, "missing for an inline model");
    m.states = get_strings(j["states"], "model.states");
    m.h = get_string(j["h"], "model.h");
    m.zplus = get_strings(j["zplus"], "model.zplus");
    m.zminus = get_strings(j["zminus"], "model.zminus");
    if (j.contains("eta")) m.eta = get_strings(j["eta"], "model.eta");
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw ConfigError("model.params", "expected an object");
        for (const auto& [k, v] : j["params"].items()) m.inline_params.emplace_back(k, get_number(v, "model.params." + k));
    }
    return m;
}

}  // namespace

ScenarioConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("(root)", "expected an object");
    reject_unknown(j, "", {"command", "model", "manifold", "initial", "T", "eps", "phi", "mode", "rtol", "atol",
                           "max_step", "event_tol", "max_events", "tol", "grid", "sweep", "oracle_samples", "seed",
                           "out", "emit_plot_data"});
    ScenarioConfig c;
    if (j.contains("command")) c.command = get_string(j["command"], "command");
    if (!j.contains("model")) throw ConfigError("model", "missing");
    c.model = parse_model(j["model"]);
    if (j.contains("manifold")) c.manifold = get_string(j["manifold"], "manifold");
    if (j.contains("initial")) {
        const auto& init = j["initial"];
        if (!init.is_array() || init.empty()) throw ConfigError("initial", "expected a point or a list of points");
        if (init[0].is_array()) {
            for (std::size_t i = 0; i < init.size(); ++i) {
                const auto v = get_numbers(init[i], "initial[" + std::to_string(i) + "]");
                c.initial.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
            }
        } else {
            const auto v = get_numbers(init, "initial");
            c.initial.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
    }
    if (j.contains("T")) c.T = get_number(j["T"], "T");
    if (j.contains("eps")) c.eps = get_numbers(j["eps"], "eps");
    if (j.contains("phi")) c.phi = get_string(j["phi"], "phi");
    if (j.contains("mode")) c.simulate_mode = get_string(j["mode"], "mode");
    if (j.contains("rtol")) c.settings.rtol = get_number(j["rtol"], "rtol");
    if (j.contains("atol")) c.settings.atol = get_number(j["atol"], "atol");
    if (j.contains("max_step")) c.settings.max_step = get_number(j["max_step"], "max_step");
    if (j.contains("event_tol")) c.settings.event_tol = get_number(j["event_tol"], "event_tol");
    if (j.contains("max_events")) {
        const double v = get_number(j["max_events"], "max_events");
        if (v < 1 || v != std::floor(v)) throw ConfigError("max_events", "expected a positive integer");
        c.settings.max_events = static_cast<std::size_t>(v);
    }
    if (j.contains("tol")) c.tol = get_number(j["tol"], "tol");
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        if (!g.is_object()) throw ConfigError("grid", "expected an object with lo, hi and n");
        reject_unknown(g, "grid.", {"lo", "hi", "n"});
        GridSpec spec;
        for (const char* key : {"lo", "hi", "n"})
            if (!g.contains(key)) throw ConfigError(std::string("grid.") + key, "missing");
        spec.lo = get_numbers(g["lo"], "grid.lo");
        spec.hi = get_numbers(g["hi"], "grid.hi");
        for (double v : get_numbers(g["n"], "grid.n")) {
            if (v < 1 || v != std::floor(v) || v > 1e6) throw ConfigError("grid.n", "expected positive integers");
            spec.n.push_back(static_cast<int>(v));
        }
        c.grid = spec;
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        if (!s.is_object()) throw ConfigError("sweep", "expected an object");
        reject_unknown(s, "sweep.", {"params", "eps"});
        if (s.contains("params")) {
            if (!s["params"].is_object()) throw ConfigError("sweep.params", "expected an object");
            for (const auto& [k, v] : s["params"].items()) c.sweep_params[k] = get_numbers(v, "sweep.params." + k);
        }
        if (s.contains("eps")) c.eps = get_numbers(s["eps"], "sweep.eps");
    }
    if (j.contains("oracle_samples")) {
        const double v = get_number(j["oracle_samples"], "oracle_samples");
        if (v < 1 || v != std::floor(v)) throw ConfigError("oracle_samples", "expected a positive integer");
        c.oracle_samples = static_cast<int>(v);
    }
    if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(get_number(j["seed"], "seed"));
    if (j.contains("out")) c.out_dir = get_string(j["out"], "out");
    if (j.contains("emit_plot_data")) {
        if (!j["emit_plot_data"].is_boolean()) throw ConfigError("emit_plot_data", "expected true or false");
        c.emit_plot_data = j["emit_plot_data"].get<bool>();
    }
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("--config", "cannot open '" + file.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("(root)", std::string("not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

void validate_config(const ScenarioConfig& c) {
    static const char* commands[] = {"classify", "tangential", "simulate", "verify", "sweep"};
    if (std::find(std::begin(commands), std::end(commands), c.command) == std::end(commands))
        throw ConfigError("command", "expected classify, tangential, simulate, verify or sweep");
    if (!(c.T >= 0.0)) throw ConfigError("T", "must be nonnegative");
    for (std::size_t i = 0; i < c.eps.size(); ++i)
        if (!(c.eps[i] > 0.0)) throw ConfigError("eps[" + std::to_string(i) + "]", "must be positive");
    if (c.eps.empty()) throw ConfigError("eps", "needs at least one value");
    if (!(c.settings.rtol > 0.0)) throw ConfigError("rtol", "must be positive");
    if (!(c.settings.atol > 0.0)) throw ConfigError("atol", "must be positive");
    if (!(c.settings.max_step > 0.0)) throw ConfigError("max_step", "must be positive");
    if (!(c.settings.event_tol > 0.0)) throw ConfigError("event_tol", "must be positive");
    if (!(c.tol > 0.0)) throw ConfigError("tol", "must be positive");
    if (c.phi != "smoothstep3" && c.phi != "smoothstep5" && c.phi != "bump")
        throw ConfigError("phi", "expected smoothstep3, smoothstep5 or bump");
    if (c.simulate_mode != "hybrid" && c.simulate_mode != "regularized")
        throw ConfigError("mode", "expected hybrid or regularized");
    if (c.grid) {
        const auto& g = *c.grid;
        if (g.lo.size() != g.hi.size() || g.lo.size() != g.n.size())
            throw ConfigError("grid", "lo, hi and n must have the same length");
    }
}

// ---------------------------------------------------------------- models

namespace {

double take(const std::map<std::string, double>& params, const std::string& key, double fallback,
            std::vector<std::string>& used) {
    used.push_back(key);
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void check_used(const std::map<std::string, double>& params, const std::vector<std::string>& used) {
    for (const auto& [k, v] : params)
        if (std::find(used.begin(), used.end(), k) == used.end()) throw ConfigError("model.params." + k, "unknown parameter");
}

int take_int(const std::map<std::string, double>& params, const std::string& key, int fallback,
             std::vector<std::string>& used) {
    const double v = take(params, key, fallback, used);
    if (v != std::floor(v) || v < 1 || v > 64) throw ConfigError("model.params." + key, "expected a small positive integer");
    return static_cast<int>(v);
}

}  // namespace

ModelBundle build_model(const ModelSpec& spec) {
    std::vector<std::string> used;
    if (spec.builtin.empty()) {
        if (spec.zplus.size() != spec.states.size() || spec.zminus.size() != spec.states.size())
            throw ConfigError("model.zplus", "needs one component per state");
        SymbolTable symbols(spec.states, spec.inline_params);
        auto sys = PiecewiseSystem::parse(symbols, spec.h, spec.zplus, spec.zminus);
        ModelBundle bundle{"inline", sys, {}, Vec::Zero(static_cast<Eigen::Index>(spec.states.size()))};
        if (!spec.eta.empty()) {
            ManifoldEntry e{"M", TangencyManifold::from_expressions(sys, spec.eta), true, {}, {}, {}};
            bundle.manifolds.push_back(std::move(e));
        }
        return bundle;
    }
    if (spec.builtin == "fold_fold") {
        FoldFoldParams p;
        for (int i = 0; i < 4; ++i) {
            p.a[i] = take(spec.params, "a" + std::to_string(i + 1), p.a[i], used);
            p.b[i] = take(spec.params, "b" + std::to_string(i + 1), p.b[i], used);
        }
        check_used(spec.params, used);
        return make_fold_fold(p);
    }
    if (spec.builtin == "lie_chain") {
        const int n = take_int(spec.params, "n", 5, used);
        const int l = take_int(spec.params, "l", 4, used);
        const int m = take_int(spec.params, "m", 3, used);
        const double seed = take(spec.params, "seed", 1, used);
        check_used(spec.params, used);
        if (!(l > m && m >= 2 && n >= l)) throw ConfigError("model.params", "lie_chain needs n >= l > m >= 2");
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        ChainParams p = random_chain_params(n, l, m, rng);
        for (const char* key : {"a", "b"}) {
            const auto it = spec.arrays.find(key);
            if (it == spec.arrays.end()) continue;
            if (it->second.size() != static_cast<std::size_t>(n - 1))
                throw ConfigError(std::string("model.") + key, "expected n-1 coefficients");
            (key[0] == 'a' ? p.a : p.b) = it->second;
        }
        return make_lie_chain(p);
    }
    if (spec.builtin == "hiv" || spec.builtin == "hiv_adapted") {
        HivParams p = hiv_default_params();
        p.s = take(spec.params, "s", p.s, used);
        p.k = take(spec.params, "k", p.k, used);
        p.alpha = take(spec.params, "alpha", p.alpha, used);
        p.delta = take(spec.params, "delta", p.delta, used);
        p.theta = take(spec.params, "theta", p.theta, used);
        p.c = take(spec.params, "c", p.c, used);
        p.eta_rt = take(spec.params, "eta_RT", p.eta_rt, used);
        p.eta_pi = take(spec.params, "eta_PI", p.eta_pi, used);
        p.C_T = take(spec.params, "C_T", p.C_T, used);
        check_used(spec.params, used);
        HivValidation v = HivValidation::corrected;
        if (spec.validation == "geometric")
            v = HivValidation::geometric;
        else if (spec.validation != "corrected")
            throw ConfigError("model.validation", "expected corrected or geometric");
        return make_hiv(p, spec.builtin == "hiv" ? HivChart::original : HivChart::adapted, v);
    }
    throw ConfigError("model.builtin", "unknown model '" + spec.builtin + "' (expected fold_fold, lie_chain, hiv or hiv_adapted)");
}

// ---------------------------------------------------------------- output

void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& tr,
                          const std::vector<std::string>& states) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write '" + file.string() + "'");
    out << "t";
    for (const auto& s : states) out << ',' << s;
    out << ",mode,lambda_star\n";
    for (const auto& smp : tr.samples) {
        out << format_double(smp.t);
        for (Eigen::Index i = 0; i < smp.x.size(); ++i) out << ',' << format_double(smp.x[i]);
        out << ',' << to_string(smp.mode) << ',';
        if (smp.lambda_star) out << format_double(*smp.lambda_star);
        out << '\n';
    }
}

void write_plot_data(const std::filesystem::path& file, const Trajectory& tr, const std::vector<std::string>& states) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write '" + file.string() + "'");
    out << "# t";
    for (const auto& s : states) out << ' ' << s;
    out << " mode\n";
    Mode last = tr.samples.empty() ? Mode::free : tr.samples.front().mode;
    for (const auto& smp : tr.samples) {
        // blank line between modes so gnuplot draws segments separately
        if (smp.mode != last) out << '\n';
        last = smp.mode;
        out << format_double(smp.t);
        for (Eigen::Index i = 0; i < smp.x.size(); ++i) out << ' ' << format_double(smp.x[i]);
        out << ' ' << static_cast<int>(smp.mode) << '\n';
    }
}

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json settings_json(const ScenarioConfig& c) {
    return json{{"rtol", c.settings.rtol},
                {"atol", c.settings.atol},
                {"max_step", std::isfinite(c.settings.max_step) ? json(c.settings.max_step) : json(nullptr)},
                {"event_tol", c.settings.event_tol},
                {"max_events", c.settings.max_events},
                {"tol", c.tol},
                {"T", c.T},
                {"phi", c.phi},
                {"eps", c.eps}};
}

json events_json(const Trajectory& tr) {
    json a = json::array();
    for (const auto& e : tr.events)
        a.push_back(json{{"t", e.t}, {"kind", to_string(e.kind)}, {"x", vec_json(e.x)}, {"detail", e.detail}});
    return a;
}

json trajectory_summary(const Trajectory& tr, const std::string& csv) {
    return json{{"csv", csv},
                {"samples", tr.samples.size()},
                {"completed", tr.completed},
                {"stop_reason", tr.stop_reason},
                {"t_end", tr.samples.empty() ? 0.0 : tr.final_time()},
                {"final_state", tr.samples.empty() ? json::array() : vec_json(tr.back().x)},
                {"accepted_steps", tr.accepted_steps},
                {"rejected_steps", tr.rejected_steps},
                {"events", events_json(tr)}};
}

struct Check {
    Check(std::string n, double v, double t, bool info = false, std::string why = {})
        : name(std::move(n)), value(v), threshold(t), informational(info), note(std::move(why)) {}
    std::string name;
    double value;
    double threshold;
    bool informational;
    std::string note;
    bool pass() const { return std::isfinite(value) && value <= threshold; }
};

json checks_json(const std::vector<Check>& checks) {
    json a = json::array();
    for (const auto& c : checks) {
        json o{{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass()}};
        if (c.informational) o["informational"] = true;
        if (!c.note.empty()) o["note"] = c.note;
        a.push_back(std::move(o));
    }
    return a;
}

void write_json(const std::filesystem::path& file, const json& j) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write '" + file.string() + "'");
    out << j.dump(2) << '\n';
}

const ManifoldEntry* pick_manifold(const ModelBundle& b, const ScenarioConfig& c) {
    if (!c.manifold.empty()) {
        for (const auto& m : b.manifolds)
            if (m.name == c.manifold) return &m;
        throw ConfigError("manifold", "model '" + b.name + "' has no manifold named '" + c.manifold + "'");
    }
    return b.manifolds.empty() ? nullptr : &b.manifolds.front();
}

const ManifoldEntry& require_manifold(const ModelBundle& b, const ScenarioConfig& c) {
    const auto* m = pick_manifold(b, c);
    if (!m) throw ConfigError("model.eta", "this command needs a tangency manifold");
    return *m;
}

std::vector<Vec> initial_points(const ModelBundle& b, const ScenarioConfig& c) {
    std::vector<Vec> pts = c.initial.empty() ? std::vector<Vec>{b.reference_point} : c.initial;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (static_cast<std::size_t>(pts[i].size()) != b.system.dim())
            throw ConfigError("initial[" + std::to_string(i) + "]",
                              "expected " + std::to_string(b.system.dim()) + " coordinates");
    return pts;
}

std::string indexed(const std::string& stem, std::size_t i, std::size_t count, const std::string& ext) {
    return count == 1 ? stem + ext : stem + "_" + std::to_string(i) + ext;
}

void emit_trajectory(const ScenarioConfig& c, const ModelBundle& b, const Trajectory& tr, const std::string& stem,
                     json& entry) {
    const std::string csv = stem + ".csv";
    write_trajectory_csv(c.out_dir / csv, tr, b.system.symbols().states());
    if (c.emit_plot_data) {
        write_plot_data(c.out_dir / (stem + ".dat"), tr, b.system.symbols().states());
        entry["plot_data"] = stem + ".dat";
    }
    entry["trajectory"] = trajectory_summary(tr, csv);
}

// ---------------------------------------------------------------- commands

json run_classify(const ScenarioConfig& c, const ModelBundle& b) {
    std::vector<Vec> pts;
    if (c.grid) {
        const auto& g = *c.grid;
        if (g.lo.size() != b.system.dim()) throw ConfigError("grid.lo", "dimension does not match the model");
        std::vector<int> idx(g.n.size(), 0);
        while (true) {
            Vec x(static_cast<Eigen::Index>(g.n.size()));
            for (std::size_t i = 0; i < g.n.size(); ++i)
                x[i] = g.n[i] == 1 ? g.lo[i] : g.lo[i] + (g.hi[i] - g.lo[i]) * idx[i] / (g.n[i] - 1);
            pts.push_back(x);
            std::size_t k = 0;
            while (k < idx.size() && ++idx[k] == g.n[k]) idx[k++] = 0;
            if (k == idx.size()) break;
        }
    } else {
        pts = initial_points(b, c);
    }
    std::ofstream out(c.out_dir / "classify.csv");
    if (!out) throw Error("cannot write classify.csv");
    for (const auto& s : b.system.symbols().states()) out << s << ',';
    out << "label,h,Zplus_h,Zminus_h\n";
    std::map<std::string, int> counts;
    for (const auto& x : pts) {
        std::string label;
        double h = b.system.h(x), a = NAN, bb = NAN;
        try {
            const auto d = classify_point_detail(b.system, x, c.tol);
            label = std::string(to_string(d.label));
            a = d.a;
            bb = d.b;
        } catch (const GeometryError&) {
            label = "degenerate";
        }
        ++counts[label];
        for (Eigen::Index i = 0; i < x.size(); ++i) out << format_double(x[i]) << ',';
        out << label << ',' << format_double(h) << ',' << (std::isnan(a) ? "" : format_double(a)) << ','
            << (std::isnan(bb) ? "" : format_double(bb)) << '\n';
    }
    return json{{"csv", "classify.csv"}, {"points", pts.size()}, {"counts", counts}};
}

json run_tangential(const ScenarioConfig& c, const ModelBundle& b) {
    const auto& m = require_manifold(b, c);
    const auto pts = initial_points(b, c);
    json runs = json::array();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto r = intersect_cone_tangent(b.system, m.manifold, pts[i], c.tol);
        json entry{{"initial", vec_json(pts[i])}, {"cone_case", to_string(r.kind)}};
        if (r.lambda) {
            entry["lambda_star"] = *r.lambda;
            entry["Ztan"] = vec_json(tangential_field(b.system, m.manifold, pts[i], c.tol));
        }
        if (r.kind == ConeCase::case1) {
            const auto tr = integrate_tangential(b.system, m.manifold, pts[i], c.T, c.settings, c.tol);
            double eta_max = 0.0;
            for (const auto& smp : tr.samples) eta_max = std::max(eta_max, m.manifold.eta(smp.x).norm());
            entry["max_eta_residual"] = eta_max;
            emit_trajectory(c, b, tr, indexed("trajectory", i, pts.size(), ""), entry);
        }
        runs.push_back(std::move(entry));
    }
    return json{{"manifold", m.name}, {"runs", runs}};
}

json run_simulate(const ScenarioConfig& c, const ModelBundle& b) {
    const auto pts = initial_points(b, c);
    json runs = json::array();
    const TransitionFunction phi = TransitionFunction::from_name(c.phi);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (c.simulate_mode == "hybrid") {
            json entry{{"initial", vec_json(pts[i])}, {"mode", "hybrid"}};
            emit_trajectory(c, b, integrate_hybrid(b.system, pts[i], c.T, c.settings, c.tol),
                            indexed("trajectory", i, pts.size(), ""), entry);
            runs.push_back(std::move(entry));
            continue;
        }
        for (double eps : c.eps) {
            json entry{{"initial", vec_json(pts[i])}, {"mode", "regularized"}, {"eps", eps}};
            const auto tr = integrate_regularized(b.system, phi, eps, pts[i], c.T, c.settings);
            entry["band_steps"] = tr.band_steps;
            emit_trajectory(c, b, tr, indexed("trajectory", i, pts.size(), "") + "_eps_" + format_double(eps), entry);
            runs.push_back(std::move(entry));
        }
    }
    json report{{"runs", runs}};
    // epsilon study against the tangential flow when the start point is on a manifold
    if (c.simulate_mode == "regularized") {
        if (const auto* m = pick_manifold(b, c)) {
            json study = json::array();
            for (const auto& p : pts) {
                if (m->manifold.eta(p).norm() > c.tol) continue;
                for (const auto& row : epsilon_study(b.system, m->manifold, p, c.T, c.eps, phi, c.settings, c.tol))
                    study.push_back(json{{"initial", vec_json(p)},
                                         {"eps", row.eps},
                                         {"max_distance", row.max_distance},
                                         {"band_residence", row.band_residence},
                                         {"left_band", row.left_band},
                                         {"completed", row.completed},
                                         {"band_steps", row.band_steps}});
            }
            report["epsilon_study"] = study;
        }
    }
    return report;
}

HivParams hiv_params_of(const ModelBundle& b) {
    const auto& sym = b.system.symbols();
    HivParams hp;
    hp.s = sym.param("s");
    hp.k = sym.param("k");
    hp.alpha = sym.param("alpha");
    hp.delta = sym.param("delta");
    hp.theta = sym.param("theta");
    hp.c = sym.param("c");
    hp.eta_rt = sym.param("eta_RT");
    hp.eta_pi = sym.param("eta_PI");
    hp.C_T = sym.param("C_T");
    return hp;
}

double rel_err(double got, double expect) { return std::abs(got - expect) / std::max(1.0, std::abs(expect)); }

double rel_err(const Vec& got, const Vec& expect) { return (got - expect).norm() / std::max(1.0, expect.norm()); }

std::pair<json, bool> run_verify(const ScenarioConfig& c, const ModelBundle& b) {
    std::vector<Check> checks;
    json report;
    std::mt19937_64 rng(c.seed);
    const TransitionFunction phi = TransitionFunction::from_name(c.phi);

    // oracle agreement on every manifold with closed forms
    for (const auto& m : b.manifolds) {
        if (!m.sample || !m.admissible) continue;
        double lam_err = 0.0, ztan_err = 0.0, kernel = 0.0;
        for (int i = 0; i < c.oracle_samples; ++i) {
            const Vec p = m.sample(rng);
            const auto r = intersect_cone_tangent(b.system, m.manifold, p, c.tol);
            if (!r.lambda) {
                lam_err = INFINITY;
                continue;
            }
            const Vec z = tangential_field(b.system, m.manifold, p, c.tol);
            kernel = std::max(kernel, m.manifold.push(p, z).norm() / (r.norm_u + r.norm_v));
            if (m.lambda_oracle) lam_err = std::max(lam_err, rel_err(*r.lambda, m.lambda_oracle(p)));
            if (m.ztan_oracle) ztan_err = std::max(ztan_err, rel_err(z, m.ztan_oracle(p)));
        }
        checks.push_back({m.name + ".kernel_residual", kernel, 1e-9});
        if (m.lambda_oracle) checks.push_back({m.name + ".lambda_oracle", lam_err, 1e-10});
        if (m.ztan_oracle) checks.push_back({m.name + ".ztan_oracle", ztan_err, 1e-10});
    }

    const auto* m = pick_manifold(b, c);
    const auto pts = initial_points(b, c);

    // tangential invariance along the trajectory
    if (m) {
        const auto tr = integrate_tangential(b.system, m->manifold, pts.front(), c.T, c.settings, c.tol);
        double eta_max = 0.0;
        for (const auto& smp : tr.samples) eta_max = std::max(eta_max, m->manifold.eta(smp.x).norm());
        checks.push_back({"tangential.eta_invariance", eta_max, 10 * c.settings.event_tol});
    }

    // slow-fast checks; HIV runs them in the adapted chart where h and eta are coordinates
    std::optional<ModelBundle> sp_bundle;
    Vec sp_p0;
    if (b.name == "hiv") {
        ModelSpec adapted = c.model;
        adapted.builtin = "hiv_adapted";
        sp_bundle = build_model(adapted);
        sp_p0 = sp_bundle->reference_point;
        if (!c.initial.empty()) sp_p0 = hiv_to_adapted(hiv_params_of(b), pts.front());
        report["slow_fast_chart"] = "hiv_adapted";
    } else if (m) {
        sp_bundle = b;
        sp_p0 = pts.front();
    }
    if (sp_bundle) {
        const ManifoldEntry& sm = sp_bundle->name == b.name ? *m : sp_bundle->manifolds.front();
        std::optional<SPSystem> sp;
        try {
            sp = sp_reduce(sp_bundle->system, sm.manifold, phi);
        } catch (const GeometryError& e) {
            report["slow_fast_skipped"] = e.what();
        }
        if (sp) {
            double K = 0.0, vb = 0.0, nh = 0.0;
            if (sm.sample) {
                for (int i = 0; i < c.oracle_samples; ++i) {
                    const Vec p = sm.sample(rng);
                    Vec u(static_cast<Eigen::Index>(sp->n_u()));
                    for (std::size_t k = 0; k < sp->n_u(); ++k) u[k] = p[sp->chart().u[k]];
                    const auto s = stan_graph(*sp, sm.manifold, u, c.tol);
                    K = std::max(K, std::abs(s.K));
                    vb = std::max(vb, s.v_block);
                    nh = std::max(nh, std::abs(normal_hyperbolicity_residual(*sp, sm.manifold, u, c.tol)));
                }
                checks.push_back({"slow_set.K", K, 1e-10});
                checks.push_back({"slow_set.v_block", vb, 1e-10});
                checks.push_back({"normal_hyperbolicity", nh, 1e-12});
            }
            const auto conj = verify_conjugacy(*sp, sm.manifold, sp_p0, c.T, c.settings, c.tol);
            checks.push_back({"conjugacy.max_deviation", conj.max_deviation, 10 * c.settings.rtol});
            report["conjugacy"] = json{{"max_deviation", conj.max_deviation},
                                       {"truncated", conj.truncated},
                                       {"t_end", conj.t_end}};
        }
    }

    // HIV closed-form cross checks
    if (b.name == "hiv" || b.name == "hiv_adapted") {
        const HivParams hp = hiv_params_of(b);
        const auto ref = hiv_reference_quantities(hp);
        checks.push_back({"hiv.equilibrium_p2_star", std::abs(hiv_ztan_y_chart(hp, ref.p2_star)), 1e-8});
        double chart = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const double x3 = ref.x3_plus + (ref.x3_minus - ref.x3_plus) * (0.01 + 0.98 * i / 100.0);
            chart = std::max(chart, std::abs(hiv_lambda_y_chart(hp, x3) - hiv_lambda_x_chart(hp, x3)));
        }
        checks.push_back({"hiv.lambda_chart_agreement", chart, 1e-10, true,
                          "the y-chart closed form equals (1 - lambda*)/2, the Z- cone weight"});
        report["hiv_reference"] = json{{"x3_plus", ref.x3_plus},
                                       {"x3_minus", ref.x3_minus},
                                       {"delta_disc", ref.delta_disc},
                                       {"p2_star", ref.p2_star}};
    }

    bool ok = true;
    for (const auto& ch : checks) ok = ok && (ch.informational || ch.pass());
    report["checks"] = checks_json(checks);
    report["passed"] = ok;
    return {report, ok};
}

struct SweepJob {
    std::size_t index;
    std::map<std::string, double> params;
    double eps;
};

json run_sweep(const ScenarioConfig& c) {
    // cartesian product in canonical (key-sorted, then listed) order
    std::vector<std::map<std::string, double>> combos{{}};
    for (const auto& [key, values] : c.sweep_params) {
        if (values.empty()) throw ConfigError("sweep.params." + key, "needs at least one value");
        std::vector<std::map<std::string, double>> next;
        for (const auto& base : combos)
            for (double v : values) {
                auto m = base;
                m[key] = v;
                next.push_back(std::move(m));
            }
        combos = std::move(next);
    }
    std::vector<SweepJob> jobs;
    for (const auto& combo : combos)
        for (double eps : c.eps) jobs.push_back({jobs.size(), combo, eps});

    // validate every parameter set before fanning out
    std::vector<ModelBundle> bundles;
    for (const auto& combo : combos) {
        ModelSpec spec = c.model;
        for (const auto& [k, v] : combo) spec.params[k] = v;
        bundles.push_back(build_model(spec));
    }
    const TransitionFunction phi = TransitionFunction::from_name(c.phi);
    std::vector<json> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            const auto& b = bundles[i / c.eps.size()];
            json row{{"index", job.index}, {"params", job.params}, {"eps", job.eps}};
            try {
                const Vec p0 = c.initial.empty() ? b.reference_point : c.initial.front();
                const auto* m = pick_manifold(b, c);
                if (m && m->manifold.eta(p0).norm() <= c.tol) {
                    const auto s = epsilon_study(b.system, m->manifold, p0, c.T, {job.eps}, phi, c.settings, c.tol);
                    row["max_distance"] = s[0].max_distance;
                    row["band_residence"] = s[0].band_residence;
                    row["completed"] = s[0].completed;
                } else {
                    const auto tr = integrate_regularized(b.system, phi, job.eps, p0, c.T, c.settings);
                    row["completed"] = tr.completed;
                    row["final_state"] = vec_json(tr.back().x);
                }
                row["status"] = "ok";
            } catch (const NumericalError& e) {
                row["status"] = "numerical_failure";
                row["message"] = e.what();
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
            rows[i] = std::move(row);
        }
    };
    const unsigned nthreads = std::max(1u, std::min<unsigned>(sweep_threads(), static_cast<unsigned>(jobs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    std::ofstream out(c.out_dir / "sweep.csv");
    if (!out) throw Error("cannot write sweep.csv");
    out << "index";
    for (const auto& [k, v] : c.sweep_params) out << ',' << k;
    out << ",eps,status,max_distance,band_residence\n";
    for (const auto& row : rows) {
        out << row["index"].get<std::size_t>();
        for (const auto& [k, v] : c.sweep_params) out << ',' << format_double(row["params"][k].get<double>());
        out << ',' << format_double(row["eps"].get<double>()) << ',' << row["status"].get<std::string>() << ',';
        if (row.contains("max_distance")) out << format_double(row["max_distance"].get<double>());
        out << ',';
        if (row.contains("band_residence")) out << format_double(row["band_residence"].get<double>());
        out << '\n';
    }
    return json{{"csv", "sweep.csv"}, {"threads", nthreads}, {"rows", rows}};
}

}  // namespace

std::vector<EpsilonStudyRow> epsilon_study(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p0,
                                           double T, const std::vector<double>& eps, const TransitionFunction& phi,
                                           const IntegratorSettings& settings, double tol) {
    std::vector<double> times;
    for (int i = 1; i < 100; ++i) times.push_back(T * i / 100.0);
    const auto tan = integrate_tangential(sys, M, p0, T, settings, tol, times);
    std::vector<EpsilonStudyRow> rows;
    for (double e : eps) {
        EpsilonStudyRow row;
        row.eps = e;
        const auto reg = integrate_regularized(sys, phi, e, p0, T, settings, times);
        row.completed = reg.completed && tan.completed;
        row.band_steps = reg.band_steps;
        std::size_t inside = 0;
        bool entered = false;
        for (const auto& smp : reg.samples) {
            const bool in = std::abs(sys.h(smp.x)) < 2 * e;
            inside += in;
            if (in) entered = true;
            if (entered && !in) row.left_band = true;
        }
        row.band_residence = static_cast<double>(inside) / static_cast<double>(reg.samples.size());
        const std::size_t n = std::min(reg.samples.size(), tan.samples.size());
        for (std::size_t i = 0; i < n; ++i)
            row.max_distance = std::max(row.max_distance, (reg.samples[i].x - tan.samples[i].x).norm());
        rows.push_back(row);
    }
    return rows;
}

unsigned sweep_threads() {
    if (const char* env = std::getenv("TANGLIDE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int run_scenario(const ScenarioConfig& cfg, std::ostream& err) {
    try {
        validate_config(cfg);
        std::filesystem::create_directories(cfg.out_dir);
        json report{{"command", cfg.command}, {"settings", settings_json(cfg)}};
        int code = exit_ok;
        if (cfg.command == "sweep") {
            report["model"] = cfg.model.builtin.empty() ? "inline" : cfg.model.builtin;
            report["result"] = run_sweep(cfg);
        } else {
            const ModelBundle bundle = build_model(cfg.model);
            report["model"] = bundle.name;
            report["states"] = bundle.system.symbols().states();
            if (cfg.command == "classify") {
                report["result"] = run_classify(cfg, bundle);
            } else if (cfg.command == "tangential") {
                report["result"] = run_tangential(cfg, bundle);
            } else if (cfg.command == "simulate") {
                report["result"] = run_simulate(cfg, bundle);
            } else {
                auto [result, ok] = run_verify(cfg, bundle);
                report["result"] = std::move(result);
                if (!ok) {
                    code = exit_verification;
                    err << "verification failed; see report.json\n";
                }
            }
        }
        report["exit_code"] = code;
        write_json(cfg.out_dir / "report.json", report);
        return code;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_validation;
    } catch (const ConstraintError& e) {
        err << "invalid parameters: " << e.what() << '\n';
        return exit_validation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const GeometryError& e) {
        err << "geometry failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const DomainError& e) {
        err << "domain failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const Error& e) {
        // syntax, unknown identifiers and other input errors
        err << "invalid input: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "output error: " << e.what() << '\n';
        return exit_numerical;
    }
}

}  // namespace tanglide
