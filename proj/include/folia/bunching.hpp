#pragma once

#include <iosfwd>
#include <vector>

#include "folia/systems.hpp"

namespace folia {

// Smallest singular value; equals 1/||m^{-1}|| in the spectral norm.
double conorm(const Mat& m);

struct ExactSplitting {
    double lambda_u = 0; // expanding eigenvalue, |.| > 1
    double lambda_s = 0; // contracting eigenvalue
    Vec e_u, e_s;        // unit eigenvectors
};

ExactSplitting exact_splitting_linear(const Eigen::Matrix2d& matrix);

struct SplittingFrame {
    TorusPoint point;
    Vec e_u, e_s; // unit
    Vec e_c;      // unit; empty in dimension 2
    double residual = 0; // last-iteration direction change (convergence estimate)
};

// Power iteration along orbits: e_u from forward pushes along the backward
// orbit ending at p, e_s time-reversed; e_c (dim 3) from the intersection of
// the cu and cs plane iterations.
SplittingFrame estimate_splitting(const SystemSpec& sys, const TorusPoint& p,
                                  int n_iters = 60, double tol = 1e-8);

struct BracketingReport {
    int dim = 2;
    double margin = 0;
    std::vector<TorusPoint> grid;
    // pointwise bracketing values (already relaxed outward by margin)
    std::vector<double> mu, nu, gamma, gamma_hat, nu_hat, mu_hat;
    std::vector<double> lambda, omega; // derived: 1/nu_hat and 1/mu_hat
    // uniform extremes
    double sup_nu = 0, inf_mu = 0, inf_gamma = 0, inf_gamma_hat = 0, sup_nu_hat = 0, inf_mu_hat = 0;
};

// Pointwise |Tf| restricted to each splitting line over a grid, relaxed
// outward by `margin` so the strict inequalities hold in floating point.
// Throws ConfigError if the ordering mu < nu < gamma <= 1/gamma_hat < 1/nu_hat <= 1/mu_hat
// fails anywhere (system not normally hyperbolic at these amplitudes).
BracketingReport bracketing(const SystemSpec& sys, int grid_per_dim,
                            double margin = 1e-6, int n_iters = 60);

// Load-time rejection of systems violating nu < gamma < 1/gamma_hat < 1/nu_hat
// with a 10% margin (operational proxy for "g C1-approximates f").
void validate_system_bunching(const SystemSpec& sys, int grid_per_dim = 16);

enum class ExponentCondition {
    Eu,        // nu_hat < gamma_hat * mu^theta
    Es,        // nu < gamma * mu_hat^theta
    Ecu,       // nu < gamma * mu^theta
    Ecs,       // nu_hat < gamma_hat * mu_hat^theta
    Ec,        // both Ecu and Ecs
    Wu_C2,     // strong unstable holonomy, C2 maps: nu_hat < gamma_hat * mu^theta
    Ws_C2,     // nu < gamma * mu_hat^theta
    Wu_C1,     // strong unstable holonomy, C1 maps: nu_hat < gamma_hat * (nu_hat*mu)^theta
    Ws_C1,     // nu < gamma * (nu*mu_hat)^theta
    ThmA_cu,   // nu < mu^theta
    ThmA_cs,   // nu_hat < mu_hat^theta
    ThmA_c,    // both
    ThmB_in_cu,// center holonomy inside cu leaves: nu_hat < mu_hat^theta
    ThmB_in_cs,// nu < mu^theta
    ThmB_full  // both
};

ExponentCondition parse_exponent_condition(const std::string& s);
const char* exponent_condition_name(ExponentCondition c);

enum class ExponentMode { Uniform, Pointwise };

struct PredictedExponent {
    ExponentCondition condition = ExponentCondition::Eu;
    ExponentMode mode = ExponentMode::Uniform;
    double theta_max = 0;
    bool satisfiable = true; // false => theta_max reported as 0 with warning
};

PredictedExponent predicted_exponent(const BracketingReport& report, ExponentCondition cond,
                                     ExponentMode mode = ExponentMode::Uniform);

// One-dimensional data (section-theorem style): largest theta with
// lhs < coef * base^theta, capped at 1; 0 when unsatisfiable for any theta>0.
double theta_max_for(double lhs, double coef, double base);

void write_bracketing_csv(const BracketingReport& report, std::ostream& out);

} // namespace folia
