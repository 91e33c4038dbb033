#pragma once

#include <cstdint>
#include <string>

#include "folia/systems.hpp"

namespace folia {

// One declarative key-value config per experiment; reruns with the same file
// and seed reproduce every data artifact byte for byte.
struct ExperimentConfig {
    // [system]
    std::string kind = "linear_anosov";
    Eigen::Matrix2d matrix = (Eigen::Matrix2d() << 2, 1, 1, 1).finished();
    double delta = 0, eps = 0;
    std::string base_shape = "none";
    std::string fiber_shape = "none";
    // [experiment]
    std::string experiment;
    std::string side = "u";   // holonomy side
    std::string gallery;      // gallery name
    // [numeric]
    int grid = 64;
    uint64_t seed = 42;
    double scale_min = 1e-6, scale_max = 1e-2;
    int n_pairs = 400;
    double tol = 1e-8;
    double margin = 1e-6;
    // [output]
    std::string out_dir = "out";
    bool plots = false;

    std::string raw_text; // hashed into the manifest
};

ExperimentConfig load_config(const std::string& path);

// builds and bunching-validates the configured system
SystemSpec system_from_config(const ExperimentConfig& cfg);

// Runs one experiment, writing CSV artifacts and manifest.csv into
// cfg.out_dir.  Returns 0; throws ConfigError (exit 2) or SolverError-family
// (exit 3) otherwise.
int run_experiment(const ExperimentConfig& cfg);

uint64_t fnv1a64(const std::string& data);

const char* lab_version();

} // namespace folia
