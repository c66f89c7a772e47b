#include <iostream>

#include "CLI11.hpp"

#include "tanglide/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"tanglide: tangential sliding, regularization and verification runs for piecewise smooth systems"};
    app.require_subcommand(1, 1);

    std::string config;
    std::string out;
    double rtol = 0.0;
    double atol = 0.0;
    std::vector<double> eps;
    std::string phi;
    bool plot = false;

    for (const char* name : {"classify", "tangential", "simulate", "verify", "sweep"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON scenario file")->required();
        sub->add_option("--out", out, "output directory (default: the config's \"out\" or .)");
        sub->add_option("--rtol", rtol, "relative tolerance");
        sub->add_option("--atol", atol, "absolute tolerance");
        sub->add_option("--eps", eps, "regularization widths")->expected(1, -1);
        sub->add_option("--phi", phi, "transition function")
            ->check(CLI::IsMember({"smoothstep3", "smoothstep5", "bump"}));
        sub->add_flag("--emit-plot-data", plot, "also write gnuplot-ready .dat files");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : tanglide::exit_validation;
    }

    tanglide::ScenarioConfig cfg;
    try {
        cfg = tanglide::load_config(config);
    } catch (const tanglide::Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return tanglide::exit_validation;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    if (!out.empty()) cfg.out_dir = out;
    if (app.get_subcommands().front()->count("--rtol")) cfg.settings.rtol = rtol;
    if (app.get_subcommands().front()->count("--atol")) cfg.settings.atol = atol;
    if (!eps.empty()) cfg.eps = eps;
    if (!phi.empty()) cfg.phi = phi;
    if (plot) cfg.emit_plot_data = true;
    return tanglide::run_scenario(cfg, std::cerr);
}
