// Config-driven laboratory CLI: one experiment per invocation, CSV artifacts
// plus a manifest with content hashes.  Exit codes: 0 success, 2 config
// error, 3 solver error.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "folia/lab.hpp"

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for invariant foliations, holonomy and leaf conjugacies"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    bool plots = false;

    const char* kinds[] = {"bunching", "section",    "holonomy", "conjugacy",
                           "suspension", "leafexp", "gallery"};
    std::string chosen;
    for (const char* kind : kinds) {
        CLI::App* sub = app.add_subcommand(kind, std::string("run the ") + kind + " experiment");
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "seed (overrides config)");
        sub->add_flag("--plots", plots, "emit SVG plots where supported");
        sub->callback([kind, &chosen]() { chosen = kind; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        folia::ExperimentConfig cfg = folia::load_config(config_path);
        cfg.experiment = chosen; // the subcommand is the experiment kind
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
        if (plots) cfg.plots = true;
        return folia::run_experiment(cfg);
    } catch (const folia::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    }
}
