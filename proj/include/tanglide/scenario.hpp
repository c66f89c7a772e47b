#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tanglide/integrate.hpp"
#include "tanglide/models.hpp"

namespace tanglide {

/// Invalid configuration; `key()` is the dotted path of the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& message) : Error(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_numerical = 2, exit_verification = 3 };

struct ModelSpec {
    std::string builtin;  // empty for inline models
    std::map<std::string, double> params;
    std::map<std::string, std::vector<double>> arrays;  // lie_chain coefficient lists "a" and "b"
    std::string validation = "corrected";                // hiv only

    // inline model
    std::vector<std::string> states;
    std::vector<std::pair<std::string, double>> inline_params;
    std::string h;
    std::vector<std::string> zplus;
    std::vector<std::string> zminus;
    std::vector<std::string> eta;  // components after h; empty for no manifold
};

struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> n;
};

struct ScenarioConfig {
    std::string command;
    ModelSpec model;
    std::string manifold;      // empty: the bundle's first manifold
    std::vector<Vec> initial;  // empty: the bundle's reference point
    double T = 1.0;
    std::vector<double> eps{1e-2};
    std::string phi = "smoothstep3";
    std::string simulate_mode = "hybrid";  // or "regularized"
    IntegratorSettings settings;
    double tol = kDefaultTol;
    std::optional<GridSpec> grid;
    std::map<std::string, std::vector<double>> sweep_params;
    int oracle_samples = 100;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = ".";
    bool emit_plot_data = false;
};

ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& file);

/// Throws ConfigError naming the first offending key.
void validate_config(const ScenarioConfig& cfg);

ModelBundle build_model(const ModelSpec& spec);

/// Runs cfg.command, writes outputs under cfg.out_dir and returns the exit code. Diagnostics go to `err`.
int run_scenario(const ScenarioConfig& cfg, std::ostream& err);

/// 17 significant digits, round-trip exact.
std::string format_double(double x);

void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& tr,
                          const std::vector<std::string>& states);
void write_plot_data(const std::filesystem::path& file, const Trajectory& tr, const std::vector<std::string>& states);

struct EpsilonStudyRow {
    double eps = 0.0;
    double max_distance = 0.0;   // sup over sample times of the regularized vs tangential distance
    double band_residence = 0.0; // fraction of samples inside |h| < 2 eps
    bool left_band = false;      // true if the orbit left the band after entering it
    bool completed = false;
    std::size_t band_steps = 0;
};

/// Regularized against tangential trajectories from p0 on M, compared on a 101-point grid over [0, T].
std::vector<EpsilonStudyRow> epsilon_study(const PiecewiseSystem& sys, const TangencyManifold& M, const Vec& p0,
                                           double T, const std::vector<double>& eps, const TransitionFunction& phi,
                                           const IntegratorSettings& settings, double tol = kDefaultTol);

/// Concurrency cap for sweeps: TANGLIDE_THREADS if set and positive, otherwise the hardware count.
unsigned sweep_threads();

}  // namespace tanglide
