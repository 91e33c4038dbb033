#pragma once

#include <iosfwd>

#include "folia/foliations.hpp"

namespace folia {

struct PseudoOrbit {
    std::vector<TorusPoint> points;
    std::vector<double> jump_sizes; // d(f(x_n), x_{n+1})
    bool plaque_respecting = false;
    double delta = 0; // the threshold the jumps were checked against
};

// a(x) = (g-strong-stable patch at g(x)) /\ (E-plaque at f(x)), the transverse
// foliation E being the f-invariant unstable (2d) or center-unstable (3d)
// family, exact for a linear base.
struct AmalgamSpec {
    SystemSpec f_sys, g_sys;
    FoliationModel E_model;
    double r = 0.1;
    double patch_tol = 1e-9;
    double c0_dist = 0; // cached d_C0(f, g)
};

AmalgamSpec make_amalgam(const SystemSpec& f, const SystemSpec& g, double r);

TorusPoint amalgam(const AmalgamSpec& spec, const TorusPoint& x);

// Newton inversion of the amalgam map, seeded at g^{-1}.
TorusPoint amalgam_inverse(const AmalgamSpec& spec, const TorusPoint& y);

// the forward a-orbit together with its jump sizes against f
PseudoOrbit amalgam_pseudo_orbit(const AmalgamSpec& spec, const TorusPoint& x, int n_steps);

// smallest N with nu^N r < tol
int stable_depth(double nu, double r, double tol);

// s(x) = g^N(a^{-N}(x)): the truncated invariant section of the fiber
// contraction a x g, a leaf conjugacy onto the E_g foliation.
TorusPoint leaf_conjugacy_stable(const AmalgamSpec& spec, const TorusPoint& x, int N);

// the inverse conjugacy t(x) = a^N(g^{-N}(x))
TorusPoint leaf_conjugacy_stable_inverse(const AmalgamSpec& spec, const TorusPoint& x, int N);

// Independent structural-stability oracle on T^2: h0 = id + w with the
// eigencomponents of w solved by orbit-local contraction sums.
class BaseConjugacy {
public:
    BaseConjugacy(const Eigen::Matrix2d& A, const SystemSpec& g0, double tol);

    TorusPoint operator()(const TorusPoint& x) const;
    Vec displacement(const TorusPoint& x) const; // w(x), lifted

    int truncation_depth() const { return depth_; }
    const SystemSpec& g0() const { return g0_; }
    const Eigen::Matrix2d& matrix() const { return A_; }

private:
    SystemSpec g0_;
    Eigen::Matrix2d A_;
    Vec e_u_, e_s_, d_u_, d_s_;
    double lambda_u_ = 0, lambda_s_ = 0;
    double tol_ = 1e-10;
    int depth_ = 20;
};

BaseConjugacy anosov_base_conjugacy(const Eigen::Matrix2d& A, const SystemSpec& g0, double tol);

// sup over a grid of d(g0(h0(x)), h0(A x))
double conjugacy_residual(const BaseConjugacy& h0, int grid_per_dim);

struct CenterConjugacyResult {
    TorusPoint image;        // the point of N(p,r) on the continued leaf
    double fiber_move = 0;   // d(image, p) within the fiber
    double shadow_jump_max = 0;
    double shadow_dist_max = 0;
};

// h(p) = N(p,r) /\ (g-invariant circle continuing the vertical leaf of p),
// verified post hoc by an f pseudo-orbit that respects the vertical
// plaquation over the given window.
CenterConjugacyResult leaf_conjugacy_center(const SystemSpec& f_sys, const SystemSpec& g_sys,
                                            const TorusPoint& p, double r, double tol,
                                            int window = 30);

// same intersection against a slanted fiber family l(w) = (b+w, z + <slant,w>)
TorusPoint leaf_conjugacy_center_slanted(const SystemSpec& f_sys, const SystemSpec& g_sys,
                                         const TorusPoint& p, double r, double tol,
                                         const Vec& slant);

// Continuation in t of N(p,r) /\ (g_t-leaf through the vertical plaque of x),
// returned at t = 1.
TorusPoint suspension_holonomy(const SuspensionLoop& loop, const TorusPoint& p,
                               const TorusPoint& x, int t_steps, double r = 0.2,
                               double tol = 1e-9);

struct LeafExpansivityReport {
    TorusPoint q;        // W^u(p) /\ W^s(-p) from the exact 2x2 solve
    TorusPoint control;  // generic companion off the invariant manifolds
    double initial_dist = 0;
    double max_pair_dist = 0;
    double max_control_dist = 0;
    std::vector<double> per_k_pair, per_k_control; // k = -k_range..k_range
};

LeafExpansivityReport leaf_expansivity_probe(const SystemSpec& qsys, const TorusPoint& p,
                                             int k_range);

struct ConjugacyField {
    std::vector<TorusPoint> inputs, outputs;
    std::vector<double> tail_bound, equiv_residual;
};

void write_conjugacy_csv(const ConjugacyField& field, std::ostream& out);

} // namespace folia
