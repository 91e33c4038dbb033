#include "folia/bunching.hpp"

#include <cmath>
#include <ostream>

namespace folia {

double conorm(const Mat& m) {
    if (m.rows() != m.cols())
        throw std::domain_error("conorm: matrix must be square");
    Eigen::JacobiSVD<Mat> svd(m);
    double smin = svd.singularValues().tail(1)(0);
    double smax = svd.singularValues()(0);
    if (smin <= smax * 1e-14)
        throw std::domain_error("conorm: singular matrix");
    return smin;
}

ExactSplitting exact_splitting_linear(const Eigen::Matrix2d& A) {
    double tr = A.trace(), det = A.determinant();
    double disc = tr * tr - 4.0 * det;
    if (disc <= 0 || std::fabs(tr) <= 2.0)
        throw ConfigError("exact_splitting_linear: matrix is not hyperbolic");
    double root = std::sqrt(disc);
    double l1 = 0.5 * (tr + root), l2 = 0.5 * (tr - root);
    if (std::fabs(l1) < std::fabs(l2)) std::swap(l1, l2);

    auto eigvec = [&A](double lam) {
        Eigen::Vector2d v;
        if (std::fabs(A(0, 1)) > 1e-14)
            v << 1.0, (lam - A(0, 0)) / A(0, 1);
        else if (std::fabs(A(1, 0)) > 1e-14)
            v << (lam - A(1, 1)) / A(1, 0), 1.0;
        else
            v << (std::fabs(A(0, 0) - lam) < 1e-12 ? 1.0 : 0.0),
                 (std::fabs(A(1, 1) - lam) < 1e-12 ? 1.0 : 0.0);
        v.normalize();
        if (v[0] < 0 || (v[0] == 0 && v[1] < 0)) v = -v;
        return v;
    };

    ExactSplitting es;
    es.lambda_u = l1;
    es.lambda_s = l2;
    Vec eu(2), esv(2);
    eu << eigvec(l1)[0], eigvec(l1)[1];
    esv << eigvec(l2)[0], eigvec(l2)[1];
    es.e_u = eu;
    es.e_s = esv;
    return es;
}

namespace {

Vec fixed_seed_vector(int d) {
    Vec v(d);
    if (d == 2) v << 0.77, 0.31;
    else v << 0.77, 0.31, 0.53;
    v.normalize();
    return v;
}

Vec fixed_seed_vector2(int d) {
    Vec v(d);
    if (d == 2) v << -0.29, 0.83;
    else v << -0.29, 0.83, 0.41;
    v.normalize();
    return v;
}

void orient(Vec& v) {
    for (int i = 0; i < v.size(); ++i) {
        if (std::fabs(v[i]) > 1e-12) {
            if (v[i] < 0) v = -v;
            return;
        }
    }
}

} // namespace

SplittingFrame estimate_splitting(const SystemSpec& sys, const TorusPoint& p, int n_iters, double tol) {
    if (n_iters < 20)
        throw ConfigError("estimate_splitting: n_iters must be at least 20");
    int d = sys.dim();
    SplittingFrame fr;
    fr.point = p;

    if (sys.kind == SystemKind::LinearAnosov || sys.kind == SystemKind::QuotientCat) {
        ExactSplitting es = exact_splitting_linear(sys.matrix);
        fr.e_u = es.e_u;
        fr.e_s = es.e_s;
        fr.residual = 0;
        return fr;
    }

    // backward orbit x_n, ..., x_0 = p
    std::vector<TorusPoint> back(n_iters + 1);
    back[0] = p;
    for (int k = 1; k <= n_iters; ++k) back[k] = apply_inverse(sys, back[k - 1]);
    // forward orbit
    std::vector<TorusPoint> fwd(n_iters + 1);
    fwd[0] = p;
    for (int k = 1; k <= n_iters; ++k) fwd[k] = apply(sys, fwd[k - 1]);

    // e_u(depth): push a generic vector forward along the backward orbit;
    // e_s(depth): pull one backward along the forward orbit
    auto push_u = [&](int depth) {
        Vec v = fixed_seed_vector(d);
        for (int k = depth; k >= 1; --k)
            v = (derivative_lift(sys, back[k].coords) * v).normalized();
        orient(v);
        return v;
    };
    auto pull_s = [&](int depth) {
        Vec v = fixed_seed_vector2(d);
        for (int k = depth; k >= 1; --k)
            v = derivative_lift(sys, fwd[k - 1].coords).partialPivLu().solve(v).normalized();
        orient(v);
        return v;
    };

    Vec vu = push_u(n_iters);
    Vec vs = pull_s(n_iters);
    double res_u = (push_u(n_iters - 1) - vu).norm();
    double res_s = (pull_s(n_iters - 1) - vs).norm();

    fr.e_u = vu;
    fr.e_s = vs;
    fr.residual = std::max(res_u, res_s);

    if (d == 3) {
        // cu-plane by forward pushes of a 2-frame, cs-plane by backward pulls;
        // e_c is the intersection line of the two planes
        auto plane_normal = [&](bool forward, int depth) {
            Eigen::Vector3d a(1, 0, 0), b(0, 0.3, 1);
            b.normalize();
            for (int k = depth; k >= 1; --k) {
                Mat J = forward ? derivative_lift(sys, back[k].coords)
                                : derivative_lift(sys, fwd[k - 1].coords);
                Eigen::Vector3d na, nb;
                if (forward) {
                    na = J * a;
                    nb = J * b;
                } else {
                    Eigen::PartialPivLU<Mat> lu(J);
                    na = lu.solve(Eigen::VectorXd(a));
                    nb = lu.solve(Eigen::VectorXd(b));
                }
                a = na.normalized();
                nb -= nb.dot(a) * a;
                b = nb.normalized();
            }
            Eigen::Vector3d nrm = a.cross(b).normalized();
            for (int i = 0; i < 3; ++i) {
                if (std::fabs(nrm[i]) > 1e-9) {
                    if (nrm[i] < 0) nrm = -nrm;
                    break;
                }
            }
            return nrm;
        };
        Eigen::Vector3d n_cu = plane_normal(true, n_iters);
        Eigen::Vector3d n_cs = plane_normal(false, n_iters);
        double res_c = std::max((plane_normal(true, n_iters - 1) - n_cu).norm(),
                                (plane_normal(false, n_iters - 1) - n_cs).norm());
        Eigen::Vector3d ec = n_cu.cross(n_cs);
        double nn = ec.norm();
        if (nn < 1e-10)
            throw SolverError("estimate_splitting: cu and cs planes are nearly tangent");
        ec /= nn;
        Vec vc(3);
        vc << ec[0], ec[1], ec[2];
        orient(vc);
        fr.e_c = vc;
        fr.residual = std::max(fr.residual, res_c);
    }

    if (fr.residual > std::max(tol, 1e-6))
        throw SolverError("estimate_splitting: residual above tolerance (not converged)");
    return fr;
}

BracketingReport bracketing(const SystemSpec& sys, int grid_per_dim, double margin, int n_iters) {
    if (grid_per_dim < 2)
        throw ConfigError("bracketing: grid must be at least 2 per dimension");
    int d = sys.dim();
    BracketingReport rep;
    rep.dim = d;
    rep.margin = margin;

    bool linear = (sys.kind == SystemKind::LinearAnosov || sys.kind == SystemKind::QuotientCat);
    bool product3 = (d == 3 && sys.delta == 0 && !sys.base_depends_on_z());

    // a shared frame is exact for linear systems; product skews have exact
    // vertical center and base-plane u/s only when the fiber is uncoupled
    SplittingFrame shared;
    bool use_shared = false;
    if (linear) {
        shared = estimate_splitting(sys, TorusPoint(Vec::Zero(d)), n_iters);
        use_shared = true;
    }

    int n = grid_per_dim;
    std::vector<Vec> pts;
    Vec x(d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            x[0] = double(i) / n;
            x[1] = double(j) / n;
            if (d == 2) {
                pts.push_back(x);
            } else {
                for (int k = 0; k < n; ++k) {
                    x[2] = double(k) / n;
                    pts.push_back(x);
                }
            }
        }
    (void)product3;

    rep.grid.reserve(pts.size());
    std::vector<double> raw_s, raw_c, raw_u;
    for (const Vec& v : pts) {
        TorusPoint p(v);
        SplittingFrame fr = use_shared ? shared : estimate_splitting(sys, p, n_iters);
        Mat J = derivative_lift(sys, v);
        double su = (J * fr.e_u).norm();
        double ss = (J * fr.e_s).norm();
        double sc = 1.0;
        if (d == 3 && fr.e_c.size() == 3) sc = (J * fr.e_c).norm();

        rep.grid.push_back(p);
        raw_s.push_back(ss);
        raw_c.push_back(sc);
        raw_u.push_back(su);
        rep.mu.push_back(ss - margin);
        rep.nu.push_back(ss + margin);
        rep.gamma.push_back(sc - margin);
        rep.gamma_hat.push_back(1.0 / (sc + margin));
        rep.nu_hat.push_back(1.0 / (su - margin));
        rep.mu_hat.push_back(1.0 / (su + margin));
        rep.lambda.push_back(su - margin);
        rep.omega.push_back(su + margin);
    }

    auto vmax = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    auto vmin = [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); };
    rep.sup_nu = vmax(rep.nu);
    rep.inf_mu = vmin(rep.mu);
    rep.inf_gamma = vmin(rep.gamma);
    rep.inf_gamma_hat = vmin(rep.gamma_hat);
    rep.sup_nu_hat = vmax(rep.nu_hat);
    rep.inf_mu_hat = vmin(rep.mu_hat);

    // ordering invariant on the raw stretches (reciprocal roundoff would blur
    // the boundary cases); mu/nu and the hat pairs separate strictly only
    // through the margin
    bool sep = margin > 0;
    for (size_t i = 0; i < rep.grid.size(); ++i) {
        double mu = raw_s[i] - margin, nu = raw_s[i] + margin;
        double ga = raw_c[i] - margin, inv_gh = raw_c[i] + margin;
        double inv_nh = raw_u[i] - margin, inv_mh = raw_u[i] + margin;
        bool ok = mu > 0 && (sep ? mu < nu : mu <= nu) && nu < 1.0 && nu < ga &&
                  ga <= inv_gh && inv_gh < inv_nh && inv_nh <= inv_mh;
        if (!ok)
            throw ConfigError("bracketing: ordering violated at a grid point "
                              "(system not normally hyperbolic at these amplitudes)");
    }
    return rep;
}

void validate_system_bunching(const SystemSpec& sys, int grid_per_dim) {
    BracketingReport rep;
    try {
        rep = bracketing(sys, grid_per_dim);
    } catch (const SolverError& e) {
        // amplitude so large the splitting solvers themselves give up
        throw ConfigError(std::string("system rejected: ") + e.what());
    }
    if (1.1 * rep.sup_nu >= rep.inf_gamma)
        throw ConfigError("system rejected: nu < gamma fails with 10% margin "
                          "(base contraction too weak against the center)");
    if (1.1 / rep.inf_gamma_hat >= 1.0 / rep.sup_nu_hat)
        throw ConfigError("system rejected: 1/gamma_hat < 1/nu_hat fails with 10% margin "
                          "(center expansion too strong against the unstable)");
}

ExponentCondition parse_exponent_condition(const std::string& s) {
    if (s == "Eu") return ExponentCondition::Eu;
    if (s == "Es") return ExponentCondition::Es;
    if (s == "Ecu") return ExponentCondition::Ecu;
    if (s == "Ecs") return ExponentCondition::Ecs;
    if (s == "Ec") return ExponentCondition::Ec;
    if (s == "Wu_C2") return ExponentCondition::Wu_C2;
    if (s == "Ws_C2") return ExponentCondition::Ws_C2;
    if (s == "Wu_C1") return ExponentCondition::Wu_C1;
    if (s == "Ws_C1") return ExponentCondition::Ws_C1;
    if (s == "ThmA_cu") return ExponentCondition::ThmA_cu;
    if (s == "ThmA_cs") return ExponentCondition::ThmA_cs;
    if (s == "ThmA_c") return ExponentCondition::ThmA_c;
    if (s == "ThmB_in_cu") return ExponentCondition::ThmB_in_cu;
    if (s == "ThmB_in_cs") return ExponentCondition::ThmB_in_cs;
    if (s == "ThmB_full") return ExponentCondition::ThmB_full;
    throw ConfigError("exponent condition: unknown value '" + s + "'");
}

const char* exponent_condition_name(ExponentCondition c) {
    switch (c) {
        case ExponentCondition::Eu: return "Eu";
        case ExponentCondition::Es: return "Es";
        case ExponentCondition::Ecu: return "Ecu";
        case ExponentCondition::Ecs: return "Ecs";
        case ExponentCondition::Ec: return "Ec";
        case ExponentCondition::Wu_C2: return "Wu_C2";
        case ExponentCondition::Ws_C2: return "Ws_C2";
        case ExponentCondition::Wu_C1: return "Wu_C1";
        case ExponentCondition::Ws_C1: return "Ws_C1";
        case ExponentCondition::ThmA_cu: return "ThmA_cu";
        case ExponentCondition::ThmA_cs: return "ThmA_cs";
        case ExponentCondition::ThmA_c: return "ThmA_c";
        case ExponentCondition::ThmB_in_cu: return "ThmB_in_cu";
        case ExponentCondition::ThmB_in_cs: return "ThmB_in_cs";
        case ExponentCondition::ThmB_full: return "ThmB_full";
    }
    return "?";
}

double theta_max_for(double lhs, double coef, double base) {
    if (lhs <= 0 || coef <= 0 || base <= 0 || base >= 1)
        throw std::domain_error("theta_max_for: need lhs,coef > 0 and base in (0,1)");
    double ratio = lhs / coef;
    if (ratio >= 1.0) return 0.0; // unsatisfiable for any theta > 0
    double t = std::log(ratio) / std::log(base);
    return std::min(t, 1.0);
}

namespace {

// the three series entering a single-inequality condition, per grid point
struct CondTerms {
    double lhs, coef, base;
};

CondTerms cond_terms(const BracketingReport& r, ExponentCondition c, size_t i) {
    switch (c) {
        case ExponentCondition::Eu:
        case ExponentCondition::Wu_C2: return {r.nu_hat[i], r.gamma_hat[i], r.mu[i]};
        case ExponentCondition::Es:
        case ExponentCondition::Ws_C2: return {r.nu[i], r.gamma[i], r.mu_hat[i]};
        case ExponentCondition::Ecu: return {r.nu[i], r.gamma[i], r.mu[i]};
        case ExponentCondition::Ecs: return {r.nu_hat[i], r.gamma_hat[i], r.mu_hat[i]};
        case ExponentCondition::Wu_C1: return {r.nu_hat[i], r.gamma_hat[i], r.nu_hat[i] * r.mu[i]};
        case ExponentCondition::Ws_C1: return {r.nu[i], r.gamma[i], r.nu[i] * r.mu_hat[i]};
        case ExponentCondition::ThmA_cu:
        case ExponentCondition::ThmB_in_cs: return {r.nu[i], 1.0, r.mu[i]};
        case ExponentCondition::ThmA_cs:
        case ExponentCondition::ThmB_in_cu: return {r.nu_hat[i], 1.0, r.mu_hat[i]};
        default: break;
    }
    throw std::logic_error("cond_terms: compound condition");
}

bool is_compound(ExponentCondition c, ExponentCondition& a, ExponentCondition& b) {
    switch (c) {
        case ExponentCondition::Ec: a = ExponentCondition::Ecu; b = ExponentCondition::Ecs; return true;
        case ExponentCondition::ThmA_c: a = ExponentCondition::ThmA_cu; b = ExponentCondition::ThmA_cs; return true;
        case ExponentCondition::ThmB_full: a = ExponentCondition::ThmB_in_cu; b = ExponentCondition::ThmB_in_cs; return true;
        default: return false;
    }
}

} // namespace

PredictedExponent predicted_exponent(const BracketingReport& report, ExponentCondition cond,
                                     ExponentMode mode) {
    ExponentCondition a, b;
    if (is_compound(cond, a, b)) {
        PredictedExponent pa = predicted_exponent(report, a, mode);
        PredictedExponent pb = predicted_exponent(report, b, mode);
        PredictedExponent out;
        out.condition = cond;
        out.mode = mode;
        out.theta_max = std::min(pa.theta_max, pb.theta_max);
        out.satisfiable = pa.satisfiable && pb.satisfiable;
        return out;
    }

    PredictedExponent out;
    out.condition = cond;
    out.mode = mode;
    size_t n = report.grid.size();
    if (mode == ExponentMode::Uniform) {
        double lhs = 0, coef = 1e300, base = 1.0;
        for (size_t i = 0; i < n; ++i) {
            CondTerms t = cond_terms(report, cond, i);
            lhs = std::max(lhs, t.lhs);
            coef = std::min(coef, t.coef);
            base = std::min(base, t.base);
        }
        out.theta_max = theta_max_for(lhs, coef, base);
    } else {
        double tmin = 1.0;
        for (size_t i = 0; i < n; ++i) {
            CondTerms t = cond_terms(report, cond, i);
            tmin = std::min(tmin, theta_max_for(t.lhs, t.coef, t.base));
        }
        out.theta_max = tmin;
    }
    out.satisfiable = out.theta_max > 0;
    return out;
}

void write_bracketing_csv(const BracketingReport& report, std::ostream& out) {
    char buf[512];
    if (report.dim == 2)
        out << "x1,x2,mu,nu,gamma,gammahat,nuhat,muhat\n";
    else
        out << "x1,x2,x3,mu,nu,gamma,gammahat,nuhat,muhat\n";
    for (size_t i = 0; i < report.grid.size(); ++i) {
        const Vec& c = report.grid[i].coords;
        int len = 0;
        for (int j = 0; j < c.size(); ++j)
            len += std::snprintf(buf + len, sizeof(buf) - len, "%.17g,", c[j]);
        len += std::snprintf(buf + len, sizeof(buf) - len, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                             report.mu[i], report.nu[i], report.gamma[i], report.gamma_hat[i],
                             report.nu_hat[i], report.mu_hat[i]);
        out << buf << '\n';
    }
}

} // namespace folia
