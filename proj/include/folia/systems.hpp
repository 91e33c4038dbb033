#pragma once

#include <string>

#include "folia/phasespace.hpp"

namespace folia {

enum class SystemKind {
    LinearAnosov,   // b -> A b on T^2
    PerturbedAnosov,// b -> A b + delta * p(b)
    SkewProduct,    // (b,z) -> (A b, z + eps * phi(b,z))
    PerturbedSkew,  // (b,z) -> (A b + delta * p(b,z), z + eps * phi(b,z))
    QuotientCat     // A on the T^2 x [0,1] / (x,0)~(-x,1) quotient, height fixed
};

// Built-in smooth trigonometric perturbation families.  Coefficients are part
// of the system data so exact derivatives are available everywhere.
enum class BaseShape {
    None,
    TrigSwap,  // p(b)   = (sin 2*pi*b2, sin 2*pi*b1)
    TrigSwapZ  // p(b,z) = (sin 2*pi*b2, sin 2*pi*b1) * cos 2*pi*z   (tilts center leaves)
};

enum class FiberShape {
    None,
    Translate, // phi(b,z) = sin 2*pi*b1
    Shear      // phi(b,z) = sin(2*pi*z) * cos(2*pi*b1)
};

SystemKind parse_system_kind(const std::string& s);
BaseShape parse_base_shape(const std::string& s);
FiberShape parse_fiber_shape(const std::string& s);

struct SystemSpec {
    SystemKind kind = SystemKind::LinearAnosov;
    Eigen::Matrix2d matrix = (Eigen::Matrix2d() << 2, 1, 1, 1).finished();
    double delta = 0; // base amplitude
    double eps = 0;   // fiber amplitude
    BaseShape base_shape = BaseShape::None;
    FiberShape fiber_shape = FiberShape::None;

    int dim() const;
    bool base_depends_on_z() const { return base_shape == BaseShape::TrigSwapZ; }
};

// Validates unimodularity and hyperbolicity of the matrix and shape/kind
// consistency.  The C^1-smallness bunching check happens at config load.
SystemSpec make_system(SystemKind kind, const Eigen::Matrix2d& matrix, double delta, double eps,
                       BaseShape base_shape = BaseShape::None,
                       FiberShape fiber_shape = FiberShape::None);

struct Jet {
    TorusPoint image;
    Mat derivative;
};

TorusPoint apply(const SystemSpec& sys, const TorusPoint& p);
Jet derivative(const SystemSpec& sys, const TorusPoint& p);

// The map on R^d commuting with lattice translations (for Newton solves and
// polyline continuation).
Vec apply_lift(const SystemSpec& sys, const Vec& x);
Mat derivative_lift(const SystemSpec& sys, const Vec& x);

// Newton iteration on a lattice lift seeded at the linear inverse.  Throws
// SolverError after 50 steps (perturbation too large).
TorusPoint apply_inverse(const SystemSpec& sys, const TorusPoint& p, int* newton_steps = nullptr);
Vec apply_inverse_lift(const SystemSpec& sys, const Vec& y, int* newton_steps = nullptr);
// warm-started variant for polyline pullbacks (seed = a nearby known preimage)
Vec apply_inverse_lift_seeded(const SystemSpec& sys, const Vec& y, const Vec& seed);

// Quotient action of QuotientCat: (v, t) -> (A v, t), canonical representative.
QuotientPoint apply_quotient(const SystemSpec& sys, const QuotientPoint& p);

// sup over a grid of d(f(x), g(x)); systems must share dimension.
double c0_distance(const SystemSpec& f, const SystemSpec& g, int grid_per_dim = 16);

// One-parameter C^1 loop of systems joining f (t=0,2) to g (t=1) on the
// circle of circumference 2.  Slices scale the (delta, eps) amplitudes by the
// bump beta(t); matrix and shapes are shared.
struct SuspensionLoop {
    SystemSpec f_spec;
    SystemSpec g_spec;
};

SuspensionLoop make_suspension_loop(const SystemSpec& f, const SystemSpec& g);

double bump(double t);            // beta(t) = sin^2(pi t / 2): beta(0)=beta(2)=0, beta(1)=1
double bump_derivative(double t);

SystemSpec suspension_slice(const SuspensionLoop& loop, double t); // t in [0,2)

} // namespace folia
