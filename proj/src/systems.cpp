#include "folia/systems.hpp"

#include <cmath>

namespace folia {

namespace {

constexpr double TWO_PI = 6.283185307179586476925286766559;

// base perturbation field p(b,z) and its partials, as configured by shape
Eigen::Vector2d base_field(BaseShape s, double b1, double b2, double z) {
    switch (s) {
        case BaseShape::None: return {0, 0};
        case BaseShape::TrigSwap: return {std::sin(TWO_PI * b2), std::sin(TWO_PI * b1)};
        case BaseShape::TrigSwapZ: {
            double cz = std::cos(TWO_PI * z);
            return {std::sin(TWO_PI * b2) * cz, std::sin(TWO_PI * b1) * cz};
        }
    }
    return {0, 0};
}

// d(base_field)/d(b1,b2,z) as a 2x3 block
Eigen::Matrix<double, 2, 3> base_field_jac(BaseShape s, double b1, double b2, double z) {
    Eigen::Matrix<double, 2, 3> J = Eigen::Matrix<double, 2, 3>::Zero();
    switch (s) {
        case BaseShape::None: break;
        case BaseShape::TrigSwap:
            J(0, 1) = TWO_PI * std::cos(TWO_PI * b2);
            J(1, 0) = TWO_PI * std::cos(TWO_PI * b1);
            break;
        case BaseShape::TrigSwapZ: {
            double cz = std::cos(TWO_PI * z), sz = std::sin(TWO_PI * z);
            J(0, 1) = TWO_PI * std::cos(TWO_PI * b2) * cz;
            J(0, 2) = -TWO_PI * std::sin(TWO_PI * b2) * sz;
            J(1, 0) = TWO_PI * std::cos(TWO_PI * b1) * cz;
            J(1, 2) = -TWO_PI * std::sin(TWO_PI * b1) * sz;
            break;
        }
    }
    return J;
}

double fiber_field(FiberShape s, double b1, double b2, double z) {
    (void)b2;
    switch (s) {
        case FiberShape::None: return 0;
        case FiberShape::Translate: return std::sin(TWO_PI * b1);
        case FiberShape::Shear: return std::sin(TWO_PI * z) * std::cos(TWO_PI * b1);
    }
    return 0;
}

Eigen::Vector3d fiber_field_grad(FiberShape s, double b1, double b2, double z) {
    (void)b2;
    switch (s) {
        case FiberShape::None: return {0, 0, 0};
        case FiberShape::Translate: return {TWO_PI * std::cos(TWO_PI * b1), 0, 0};
        case FiberShape::Shear:
            return {-TWO_PI * std::sin(TWO_PI * z) * std::sin(TWO_PI * b1), 0,
                    TWO_PI * std::cos(TWO_PI * z) * std::cos(TWO_PI * b1)};
    }
    return {0, 0, 0};
}

void check_dim(const SystemSpec& sys, const Vec& x, const char* who) {
    if (static_cast<int>(x.size()) != sys.dim())
        throw std::domain_error(std::string(who) + ": dimension mismatch");
}

} // namespace

SystemKind parse_system_kind(const std::string& s) {
    if (s == "linear_anosov") return SystemKind::LinearAnosov;
    if (s == "perturbed_anosov") return SystemKind::PerturbedAnosov;
    if (s == "skew_product") return SystemKind::SkewProduct;
    if (s == "perturbed_skew") return SystemKind::PerturbedSkew;
    if (s == "quotient_cat") return SystemKind::QuotientCat;
    throw ConfigError("system.kind: unknown value '" + s + "'");
}

BaseShape parse_base_shape(const std::string& s) {
    if (s.empty() || s == "none") return BaseShape::None;
    if (s == "trig") return BaseShape::TrigSwap;
    if (s == "trig_z") return BaseShape::TrigSwapZ;
    throw ConfigError("system.base_shape: unknown value '" + s + "'");
}

FiberShape parse_fiber_shape(const std::string& s) {
    if (s.empty() || s == "none") return FiberShape::None;
    if (s == "translate") return FiberShape::Translate;
    if (s == "shear") return FiberShape::Shear;
    throw ConfigError("system.fiber_shape: unknown value '" + s + "'");
}

int SystemSpec::dim() const {
    switch (kind) {
        case SystemKind::SkewProduct:
        case SystemKind::PerturbedSkew: return 3;
        default: return 2;
    }
}

SystemSpec make_system(SystemKind kind, const Eigen::Matrix2d& matrix, double delta, double eps,
                       BaseShape base_shape, FiberShape fiber_shape) {
    double det = matrix.determinant();
    if (std::fabs(std::fabs(det) - 1.0) > 1e-12)
        throw ConfigError("system.matrix: |det| must be 1 (unimodular)");
    if (std::fabs(matrix.trace()) <= 2.0)
        throw ConfigError("system.matrix: |trace| must exceed 2 (hyperbolic)");
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            if (std::fabs(matrix(i, j) - std::round(matrix(i, j))) > 1e-12)
                throw ConfigError("system.matrix: entries must be integers");
    if (delta < 0 || eps < 0)
        throw ConfigError("system.delta/epsilon: amplitudes must be >= 0");

    SystemSpec sys;
    sys.kind = kind;
    sys.matrix = matrix;
    sys.delta = delta;
    sys.eps = eps;
    sys.base_shape = base_shape;
    sys.fiber_shape = fiber_shape;

    switch (kind) {
        case SystemKind::LinearAnosov:
        case SystemKind::QuotientCat:
            sys.delta = 0;
            sys.eps = 0;
            sys.base_shape = BaseShape::None;
            sys.fiber_shape = FiberShape::None;
            break;
        case SystemKind::PerturbedAnosov:
            if (delta > 0 && base_shape == BaseShape::None)
                throw ConfigError("system.base_shape: required when delta > 0");
            if (base_shape == BaseShape::TrigSwapZ)
                throw ConfigError("system.base_shape: trig_z needs a skew product");
            sys.eps = 0;
            sys.fiber_shape = FiberShape::None;
            break;
        case SystemKind::SkewProduct:
            sys.delta = 0;
            sys.base_shape = BaseShape::None;
            if (eps > 0 && fiber_shape == FiberShape::None)
                throw ConfigError("system.fiber_shape: required when epsilon > 0");
            break;
        case SystemKind::PerturbedSkew:
            if (delta > 0 && base_shape == BaseShape::None)
                throw ConfigError("system.base_shape: required when delta > 0");
            break;
    }
    return sys;
}

Vec apply_lift(const SystemSpec& sys, const Vec& x) {
    check_dim(sys, x, "apply");
    if (sys.dim() == 2) {
        Eigen::Vector2d b(x[0], x[1]);
        Eigen::Vector2d img = sys.matrix * b;
        if (sys.delta != 0)
            img += sys.delta * base_field(sys.base_shape, x[0], x[1], 0.0);
        Vec out(2);
        out << img[0], img[1];
        return out;
    }
    Eigen::Vector2d b(x[0], x[1]);
    Eigen::Vector2d img = sys.matrix * b;
    if (sys.delta != 0)
        img += sys.delta * base_field(sys.base_shape, x[0], x[1], x[2]);
    double znew = x[2] + sys.eps * fiber_field(sys.fiber_shape, x[0], x[1], x[2]);
    Vec out(3);
    out << img[0], img[1], znew;
    return out;
}

Mat derivative_lift(const SystemSpec& sys, const Vec& x) {
    check_dim(sys, x, "derivative");
    int d = sys.dim();
    Mat J = Mat::Zero(d, d);
    J.block<2, 2>(0, 0) = sys.matrix;
    if (d == 2) {
        if (sys.delta != 0)
            J.block<2, 2>(0, 0) += sys.delta * base_field_jac(sys.base_shape, x[0], x[1], 0.0).block<2, 2>(0, 0);
        return J;
    }
    if (sys.delta != 0)
        J.block<2, 3>(0, 0) += sys.delta * base_field_jac(sys.base_shape, x[0], x[1], x[2]);
    Eigen::Vector3d g = sys.eps * fiber_field_grad(sys.fiber_shape, x[0], x[1], x[2]);
    J(2, 0) = g[0];
    J(2, 1) = g[1];
    J(2, 2) = 1.0 + g[2];
    return J;
}

TorusPoint apply(const SystemSpec& sys, const TorusPoint& p) {
    return wrap(apply_lift(sys, p.coords));
}

Jet derivative(const SystemSpec& sys, const TorusPoint& p) {
    Jet j;
    j.image = apply(sys, p);
    j.derivative = derivative_lift(sys, p.coords);
    return j;
}

namespace {

Vec newton_inverse(const SystemSpec& sys, const Vec& y, Vec x, int* newton_steps) {
    for (int it = 1; it <= 50; ++it) {
        Vec r = apply_lift(sys, x) - y;
        if (r.norm() < 1e-14) {
            if (newton_steps) *newton_steps = it - 1;
            return x;
        }
        Mat J = derivative_lift(sys, x);
        x -= J.partialPivLu().solve(r);
    }
    Vec r = apply_lift(sys, x) - y;
    if (r.norm() < 1e-12) { // converged to tolerance, just slowly
        if (newton_steps) *newton_steps = 50;
        return x;
    }
    throw SolverError("apply_inverse: Newton failed to converge in 50 steps (perturbation too large)");
}

} // namespace

Vec apply_inverse_lift(const SystemSpec& sys, const Vec& y, int* newton_steps) {
    check_dim(sys, y, "apply_inverse");
    int d = sys.dim();
    // seed at the inverse of the linear part
    Eigen::Matrix2d Ainv = sys.matrix.inverse();
    Vec x(d);
    Eigen::Vector2d b0 = Ainv * Eigen::Vector2d(y[0], y[1]);
    x[0] = b0[0];
    x[1] = b0[1];
    if (d == 3) x[2] = y[2];
    return newton_inverse(sys, y, std::move(x), newton_steps);
}

Vec apply_inverse_lift_seeded(const SystemSpec& sys, const Vec& y, const Vec& seed) {
    check_dim(sys, y, "apply_inverse");
    return newton_inverse(sys, y, seed, nullptr);
}

TorusPoint apply_inverse(const SystemSpec& sys, const TorusPoint& p, int* newton_steps) {
    return wrap(apply_inverse_lift(sys, p.coords, newton_steps));
}

QuotientPoint apply_quotient(const SystemSpec& sys, const QuotientPoint& p) {
    if (sys.kind != SystemKind::QuotientCat)
        throw std::domain_error("apply_quotient: system is not the quotient kind");
    Eigen::Vector2d img = sys.matrix * Eigen::Vector2d(p.base.coords[0], p.base.coords[1]);
    Vec v(2);
    v << img[0], img[1];
    return make_quotient_point(wrap(v), p.height);
}

double c0_distance(const SystemSpec& f, const SystemSpec& g, int grid_per_dim) {
    if (f.dim() != g.dim())
        throw std::domain_error("c0_distance: dimension mismatch");
    int d = f.dim();
    double sup = 0;
    int n = grid_per_dim;
    auto visit = [&](const Vec& x) {
        double dd = torus_dist(apply(f, TorusPoint(x)), apply(g, TorusPoint(x)));
        if (dd > sup) sup = dd;
    };
    Vec x(d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            x[0] = double(i) / n;
            x[1] = double(j) / n;
            if (d == 2) {
                visit(x);
            } else {
                for (int k = 0; k < n; ++k) {
                    x[2] = double(k) / n;
                    visit(x);
                }
            }
        }
    return sup;
}

SuspensionLoop make_suspension_loop(const SystemSpec& f, const SystemSpec& g) {
    if (f.dim() != g.dim())
        throw ConfigError("suspension loop: endpoint systems must share dimension");
    if ((f.matrix - g.matrix).cwiseAbs().maxCoeff() > 0)
        throw ConfigError("suspension loop: endpoint systems must share the matrix");
    SuspensionLoop loop;
    loop.f_spec = f;
    loop.g_spec = g;
    return loop;
}

double bump(double t) {
    double s = std::sin(0.5 * M_PI * t);
    return s * s;
}

double bump_derivative(double t) {
    return 0.5 * M_PI * std::sin(M_PI * t);
}

SystemSpec suspension_slice(const SuspensionLoop& loop, double t) {
    if (t < 0 || t >= 2.0)
        throw std::out_of_range("suspension_slice: t must lie in [0,2)");
    double b = bump(t);
    SystemSpec s = loop.g_spec;
    s.delta = loop.f_spec.delta + b * (loop.g_spec.delta - loop.f_spec.delta);
    s.eps = loop.f_spec.eps + b * (loop.g_spec.eps - loop.f_spec.eps);
    // shapes come from whichever endpoint carries them
    if (s.base_shape == BaseShape::None) s.base_shape = loop.f_spec.base_shape;
    if (s.fiber_shape == FiberShape::None) s.fiber_shape = loop.f_spec.fiber_shape;
    return s;
}

} // namespace folia
