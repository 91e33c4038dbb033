#include "folia/sections.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace folia {

double SampledSection::value_at(double x) const {
    if (x < lo - 1e-12 || x > hi + 1e-12)
        throw std::domain_error("section evaluation outside the base domain");
    double t = (x - lo) / (hi - lo) * double(size() - 1);
    int i = static_cast<int>(std::floor(t));
    if (i < 0) i = 0;
    if (i >= size() - 1) i = size() - 2;
    double f = t - i;
    return values[i] * (1.0 - f) + values[i + 1] * f;
}

double SampledSection::sup_diff(const SampledSection& other) const {
    if (size() != other.size() || lo != other.lo || hi != other.hi)
        throw std::domain_error("sup_diff: sections on different grids");
    double m = 0;
    for (int i = 0; i < size(); ++i)
        m = std::max(m, std::fabs(values[i] - other.values[i]));
    return m;
}

SectionFn as_function(const SampledSection& s) {
    return [s](double x) { return s.value_at(x); };
}

FiberContraction make_sine_shear_example() {
    FiberContraction fc;
    fc.base_lo = -1.0;
    fc.base_hi = 1.0;
    fc.h = [](double x) { return x / 9.0; };
    fc.h_inv = [](double x) { return 9.0 * x; };
    fc.v = [](double u, double y) { return y / 3.0 + std::sin(50.0 * u); };
    fc.fiber_lo = -2.0;
    fc.fiber_hi = 2.0;
    fc.fiber_lipschitz = 1.0 / 3.0;
    fc.base_conorm = 1.0 / 9.0;
    fc.shear_exponent = 0.4;
    fc.shear_bound = 2.0 * std::pow(25.0, 0.4); // |sin 50u - sin 50u'| <= min(2, 50|du|)
    fc.base_contracts = true;
    return fc;
}

void validate_fiber_contraction(const FiberContraction& fc, double theta) {
    if (fc.fiber_lipschitz >= std::pow(fc.base_conorm, theta))
        throw SolverError("fiber contraction fails to theta-dominate the base at theta=" +
                          std::to_string(theta));
    // sampled vertical-shear check against the declared bound
    const int nu = 33, ny = 5;
    for (int a = 0; a < nu; ++a) {
        double u = fc.base_lo + (fc.base_hi - fc.base_lo) * a / (nu - 1);
        for (int b = 0; b < nu; ++b) {
            double up = fc.base_lo + (fc.base_hi - fc.base_lo) * b / (nu - 1);
            if (u == up) continue;
            for (int c = 0; c < ny; ++c) {
                double y = fc.fiber_lo + (fc.fiber_hi - fc.fiber_lo) * c / (ny - 1);
                double shear = std::fabs(fc.v(u, y) - fc.v(up, y));
                double bound = fc.shear_bound * std::pow(std::fabs(u - up), fc.shear_exponent);
                if (shear > bound * (1 + 1e-9))
                    throw SolverError("vertical shear exceeds the declared bound");
            }
        }
    }
}

SampledSection graph_transform_step(const FiberContraction& fc, const SectionFn& sigma, int grid_n) {
    if (grid_n < 2)
        throw ConfigError("graph_transform_step: grid must have at least 2 points");
    SampledSection out;
    out.lo = fc.base_lo;
    out.hi = fc.base_hi;
    out.values.resize(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        double x = out.grid_x(i);
        double u = fc.h_inv(x);
        out.values[i] = fc.v(u, sigma(u));
    }
    return out;
}

SampledSection graph_transform_step(const FiberContraction& fc, const SampledSection& sigma) {
    // domain check up front: interpolation is only defined inside [lo, hi]
    double u0 = fc.h_inv(sigma.lo), u1 = fc.h_inv(sigma.hi);
    if (std::min(u0, u1) < sigma.lo - 1e-12 || std::max(u0, u1) > sigma.hi + 1e-12)
        throw std::domain_error("graph_transform_step: h^{-1} leaves the base domain");
    return graph_transform_step(fc, as_function(sigma), sigma.size());
}

double invariant_section_value(const FiberContraction& fc, const SectionFn& sigma0,
                               double x, int depth) {
    // u_j = h^{-j}(x); value = v(u_1, v(u_2, ... v(u_depth, sigma0(u_depth))))
    std::vector<double> u(depth);
    double cur = x;
    for (int j = 0; j < depth; ++j) {
        cur = fc.h_inv(cur);
        u[j] = cur;
    }
    double y = sigma0(u[depth - 1]);
    for (int j = depth - 1; j >= 0; --j) y = fc.v(u[j], y);
    return y;
}

InvariantSectionResult solve_invariant_section(const FiberContraction& fc, const SectionFn& sigma0,
                                               double tol, int max_iters, int grid_n) {
    if (tol <= 0)
        throw ConfigError("solve_invariant_section: tol must be positive");
    InvariantSectionResult res;
    res.section.lo = fc.base_lo;
    res.section.hi = fc.base_hi;
    res.section.values.resize(grid_n);

    if (fc.base_contracts) {
        // evaluate F_#^n(sigma0) pointwise over backward base orbits, one depth
        // at a time, until the grid sup-change drops below tol
        std::vector<double> cur(grid_n), next(grid_n);
        for (int i = 0; i < grid_n; ++i)
            cur[i] = invariant_section_value(fc, sigma0, res.section.grid_x(i), 1);
        double prev_change = -1;
        for (int n = 2; n <= max_iters; ++n) {
            double change = 0;
            for (int i = 0; i < grid_n; ++i) {
                next[i] = invariant_section_value(fc, sigma0, res.section.grid_x(i), n);
                change = std::max(change, std::fabs(next[i] - cur[i]));
            }
            res.log.iter.push_back(n - 1);
            res.log.sup_change.push_back(change);
            res.log.ratio.push_back(prev_change > 0 ? change / prev_change : 0.0);
            prev_change = change;
            cur.swap(next);
            res.iterations = n;
            if (change < tol) {
                res.section.values = cur;
                res.residual = change; // F_#(sigma_n) == sigma_{n+1} pointwise here
                return res;
            }
        }
        throw SolverError("solve_invariant_section: max_iters exceeded");
    }

    // classic mode: h_inv stays inside the domain, iterate on the sampled grid
    for (int i = 0; i < grid_n; ++i) res.section.values[i] = sigma0(res.section.grid_x(i));
    double prev_change = -1;
    for (int n = 1; n <= max_iters; ++n) {
        SampledSection nxt = graph_transform_step(fc, res.section);
        double change = nxt.sup_diff(res.section);
        res.log.iter.push_back(n);
        res.log.sup_change.push_back(change);
        res.log.ratio.push_back(prev_change > 0 ? change / prev_change : 0.0);
        prev_change = change;
        res.section = nxt;
        res.iterations = n;
        if (change < tol) {
            res.residual = graph_transform_step(fc, res.section).sup_diff(res.section);
            return res;
        }
    }
    throw SolverError("solve_invariant_section: max_iters exceeded");
}

HolderBudget holder_budget(const FiberContraction& fc, double theta, double H0) {
    double mu_theta = std::pow(fc.base_conorm, theta);
    if (mu_theta - fc.fiber_lipschitz <= 0)
        throw SolverError("holder_budget: k >= mu^theta (theta too large)");
    HolderBudget b;
    b.theta = theta;
    b.H0 = H0;
    double d_over = fc.diameter() / std::pow(fc.covering_delta(), theta);
    double dom = 1.0 / (mu_theta - fc.fiber_lipschitz);
    b.H = std::max(H0, std::max(d_over, dom));
    return b;
}

void write_section_csv(const SampledSection& s, std::ostream& out) {
    char buf[128];
    out << "x,value\n";
    for (int i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", s.grid_x(i), s.values[i]);
        out << buf << '\n';
    }
}

void write_convergence_csv(const ConvergenceLog& log, std::ostream& out) {
    char buf[128];
    out << "iter,sup_change,ratio\n";
    for (size_t i = 0; i < log.iter.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g", log.iter[i], log.sup_change[i], log.ratio[i]);
        out << buf << '\n';
    }
}

} // namespace folia
