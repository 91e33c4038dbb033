#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "folia/errors.hpp"

namespace folia {

// Grid representation of a section of a fiber bundle over an interval,
// piecewise-linear between uniformly spaced samples.
struct SampledSection {
    double lo = 0, hi = 1;
    std::vector<double> values; // size >= 2, endpoints included

    int size() const { return static_cast<int>(values.size()); }
    double grid_x(int i) const { return lo + (hi - lo) * double(i) / double(size() - 1); }
    double value_at(double x) const; // throws std::domain_error outside [lo, hi]
    double sup_diff(const SampledSection& other) const;
};

using SectionFn = std::function<double(double)>;

SectionFn as_function(const SampledSection& s); // interpolating evaluator (domain-checked)

// A fiber contraction over a single global chart: base map h on [base_lo,
// base_hi], fiber rule v(u,y) on a bounded fiber interval, with the reported
// contraction constants.  The chart atlas of the general theorem is
// represented by (fiber_lipschitz, base_conorm, covering delta); the covering
// constant of the one-chart atlas is the base diameter.
struct FiberContraction {
    double base_lo = 0, base_hi = 1;
    std::function<double(double)> h;     // base map
    std::function<double(double)> h_inv; // its inverse
    std::function<double(double, double)> v; // fiber rule v(u, y)
    double fiber_lo = 0, fiber_hi = 1;
    double fiber_lipschitz = 0; // k: sup Lipschitz constant of y -> v(u,y)
    double base_conorm = 0;     // mu: reciprocal Lipschitz constant of h_inv
    double shear_bound = 0;     // L: vertical shear bound at shear_exponent
    double shear_exponent = 0;
    bool base_contracts = false; // h maps the domain into itself; h_inv escapes,
                                 // so sections are evaluated over backward base orbits

    double diameter() const { return fiber_hi - fiber_lo; }
    double covering_delta() const { return base_hi - base_lo; }
};

// The strongly sheared worked example: base x/9 on [-1,1], fiber y/3 + sin(50x).
FiberContraction make_sine_shear_example();

// theta-domination and sampled vertical-shear checks; throws SolverError when
// sup k/mu^theta >= 1.
void validate_fiber_contraction(const FiberContraction& fc, double theta);

// sigma' = F o sigma o h^{-1}, sampled on an n-point grid.  The SampledSection
// overload interpolates at off-grid preimages and raises std::domain_error
// when h^{-1} leaves the base domain.
SampledSection graph_transform_step(const FiberContraction& fc, const SectionFn& sigma, int grid_n);
SampledSection graph_transform_step(const FiberContraction& fc, const SampledSection& sigma);

// Pointwise value of F_#^depth(sigma0) at x, evaluated over the backward base
// orbit of x (valid in both orientations; needs only global evaluability of
// v and sigma0).
double invariant_section_value(const FiberContraction& fc, const SectionFn& sigma0,
                               double x, int depth);

struct ConvergenceLog {
    std::vector<int> iter;
    std::vector<double> sup_change;
    std::vector<double> ratio; // sup_change[i] / sup_change[i-1]
};

struct InvariantSectionResult {
    SampledSection section;
    ConvergenceLog log;
    int iterations = 0;
    double residual = 0; // sup |F_#(sigma) - sigma| on the grid
};

InvariantSectionResult solve_invariant_section(const FiberContraction& fc, const SectionFn& sigma0,
                                               double tol, int max_iters, int grid_n);

struct HolderBudget {
    double theta = 0;
    double H0 = 0;
    double H = 0; // max{H0, D/delta^theta, sup 1/(mu^theta - k)}
};

HolderBudget holder_budget(const FiberContraction& fc, double theta, double H0);

void write_section_csv(const SampledSection& s, std::ostream& out);
void write_convergence_csv(const ConvergenceLog& log, std::ostream& out);

} // namespace folia
