#include "folia/conjugacy.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "folia/bunching.hpp"

namespace folia {

namespace {

double wrap01(double z) {
    double w = z - std::floor(z);
    return w >= 1.0 ? 0.0 : w;
}

Vec embed_base(const Vec& v2, int dim) {
    Vec out = Vec::Zero(dim);
    out[0] = v2[0];
    out[1] = v2[1];
    return out;
}

// stable dual covector: the functional with <A v, n> = lambda_s <v, n>
Vec stable_dual(const Eigen::Matrix2d& A) {
    ExactSplitting es = exact_splitting_linear(A);
    Eigen::Matrix2d M;
    M << es.e_u[0], es.e_s[0], es.e_u[1], es.e_s[1];
    Eigen::Matrix2d Minv = M.inverse();
    Vec ds(2);
    ds << Minv(1, 0), Minv(1, 1);
    return ds;
}

} // namespace

AmalgamSpec make_amalgam(const SystemSpec& f, const SystemSpec& g, double r) {
    if (f.dim() != g.dim())
        throw ConfigError("amalgam: systems must share dimension");
    if ((f.matrix - g.matrix).cwiseAbs().maxCoeff() > 0)
        throw ConfigError("amalgam: systems must share the base matrix");
    if (f.delta != 0 || f.base_depends_on_z())
        throw ConfigError("amalgam: the reference system must have the linear base "
                          "(its transverse foliation is then exactly invariant)");
    if (g.base_depends_on_z())
        throw ConfigError("amalgam: z-coupled base perturbations are outside the "
                          "skew-product setting of the stable conjugacy");
    AmalgamSpec spec;
    spec.f_sys = f;
    spec.g_sys = g;
    spec.r = r;
    spec.c0_dist = c0_distance(f, g, f.dim() == 2 ? 32 : 12);
    if (spec.c0_dist >= 0.5 * r)
        throw ConfigError("amalgam: d_C0(f,g) must stay below r/2");

    spec.E_model.sys = f;
    spec.E_model.side = (f.dim() == 2) ? LeafSide::U : LeafSide::CU;
    spec.E_model.plaque_radius = r;
    spec.E_model.tol = spec.patch_tol;
    spec.E_model.dual = embed_base(stable_dual(f.matrix), f.dim());
    return spec;
}

namespace {

// the 2d base system seen by a skew product's base coordinates
SystemSpec base_twin(const SystemSpec& sys) {
    if (sys.dim() == 2) return sys;
    if (sys.delta == 0) return make_system(SystemKind::LinearAnosov, sys.matrix, 0, 0);
    return make_system(SystemKind::PerturbedAnosov, sys.matrix, sys.delta, 0, sys.base_shape);
}

// Dynamical shooting for the 2d amalgam: a(x) is the point of the unstable
// dual level set of f(x) whose forward g-orbit tracks g(x); the sign of the
// unstable dual component of the marched orbit difference brackets it.
Vec amalgam_base_shoot(const SystemSpec& g2, const Eigen::Matrix2d& A, const Vec& gx_w,
                       const Vec& fx_lift, double r) {
    ExactSplitting es = exact_splitting_linear(A);

    // forward orbit of g(x), wrapped
    const int max_march = 60;
    std::vector<Vec> orbit(max_march + 1);
    orbit[0] = gx_w;
    for (int k = 1; k <= max_march; ++k)
        orbit[k] = wrap(apply_lift(g2, orbit[k - 1])).coords;

    Eigen::Matrix2d M;
    M << es.e_u[0], es.e_s[0], es.e_u[1], es.e_s[1];
    Eigen::Matrix2d Minv = M.inverse();
    Vec du(2);
    du << Minv(0, 0), Minv(0, 1);

    auto u_sign_value = [&](double t) {
        Vec e = (fx_lift + t * es.e_u) - gx_w;
        for (int k = 0; k < max_march; ++k) {
            if (e.norm() >= 0.05) break;
            e = apply_lift(g2, orbit[k] + e) - apply_lift(g2, orbit[k]);
        }
        return e.dot(du);
    };

    double lo = -0.5 * r, hi = 0.5 * r;
    double flo = u_sign_value(lo), fhi = u_sign_value(hi);
    if (flo * fhi > 0) {
        lo = -r;
        hi = r;
        flo = u_sign_value(lo);
        fhi = u_sign_value(hi);
        if (flo * fhi > 0)
            throw SolverError("amalgam undefined: no stable-leaf crossing within radius r");
    }
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = u_sign_value(mid);
        if (fm == 0.0) { lo = hi = mid; break; }
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return fx_lift + 0.5 * (lo + hi) * es.e_u;
}

} // namespace

TorusPoint amalgam(const AmalgamSpec& spec, const TorusPoint& x) {
    const int d = spec.g_sys.dim();
    TorusPoint gx = apply(spec.g_sys, x);
    TorusPoint fx = apply(spec.f_sys, x);

    if (d == 2) {
        Vec fx_lift = lift_near(fx, gx.coords);
        Vec y = amalgam_base_shoot(spec.g_sys, spec.g_sys.matrix, gx.coords, fx_lift, spec.r);
        return wrap(y);
    }

    // 3d, z-independent base: the base coordinates decouple and solve the 2d
    // problem; the fiber coordinate then solves the marched height condition
    SystemSpec g2 = base_twin(spec.g_sys);
    Vec gx_b(2), fx_b(2);
    gx_b << gx.coords[0], gx.coords[1];
    fx_b << fx.coords[0], fx.coords[1];
    Vec fx_b_lift = lift_near(TorusPoint(fx_b), gx_b);
    Vec b_star = amalgam_base_shoot(g2, spec.g_sys.matrix, gx_b, fx_b_lift, spec.r);

    // height condition: the fiber offset of the forward pair orbit must die out
    const int max_march = 60;
    Vec e0 = Vec::Zero(3);
    e0.head(2) = b_star - gx_b;
    auto fiber_limit = [&](double dz) {
        Vec e = e0;
        e[2] = dz;
        Vec cur = gx.coords;
        for (int k = 0; k < max_march; ++k) {
            if (e.head(2).norm() < 1e-15) break;
            Vec nxt = wrap(apply_lift(spec.g_sys, cur)).coords;
            e = apply_lift(spec.g_sys, cur + e) - apply_lift(spec.g_sys, cur);
            cur = nxt;
        }
        return e[2];
    };
    double z0 = 0.0, f0 = fiber_limit(z0);
    double z1 = z0 - f0, f1 = fiber_limit(z1);
    for (int it = 0; it < 40 && std::fabs(f1) > 1e-15; ++it) {
        double denom = f1 - f0;
        if (std::fabs(denom) < 1e-300) break;
        double z2 = z1 - f1 * (z1 - z0) / denom;
        z0 = z1;
        f0 = f1;
        z1 = z2;
        f1 = fiber_limit(z1);
    }
    Vec y(3);
    y.head(2) = b_star;
    y[2] = gx.coords[2] + z1;
    return wrap(y);
}

TorusPoint amalgam_inverse(const AmalgamSpec& spec, const TorusPoint& y) {
    TorusPoint x = apply_inverse(spec.g_sys, y);
    double best = 1e300;
    for (int it = 0; it < 40; ++it) {
        TorusPoint ax = amalgam(spec, x);
        Vec r = lift_near(ax, y.coords) - y.coords;
        double rn = r.norm();
        if (rn < 1e-13) return x;
        if (it > 6 && rn > 0.5 * best) {
            // stagnation at the evaluation floor
            if (rn < 1e-10) return x;
            break;
        }
        best = std::min(best, rn);
        Mat J = derivative_lift(spec.g_sys, x.coords);
        x = wrap(x.coords - J.partialPivLu().solve(r));
    }
    throw SolverError("amalgam inverse: Newton failed to converge");
}

PseudoOrbit amalgam_pseudo_orbit(const AmalgamSpec& spec, const TorusPoint& x, int n_steps) {
    PseudoOrbit po;
    po.delta = 4.0 * spec.c0_dist + 1e-12;
    po.points.push_back(x);
    po.plaque_respecting = true;
    for (int k = 0; k < n_steps; ++k) {
        TorusPoint cur = po.points.back();
        TorusPoint nxt = amalgam(spec, cur);
        double jump = torus_dist(apply(spec.f_sys, cur), nxt);
        po.jump_sizes.push_back(jump);
        if (jump >= po.delta) po.plaque_respecting = false;
        po.points.push_back(nxt);
    }
    return po;
}

int stable_depth(double nu, double r, double tol) {
    if (!(nu > 0 && nu < 1))
        throw ConfigError("stable_depth: nu must lie in (0,1)");
    int N = static_cast<int>(std::ceil(std::log(tol / r) / std::log(nu)));
    return std::clamp(N, 4, 60);
}

TorusPoint leaf_conjugacy_stable(const AmalgamSpec& spec, const TorusPoint& x, int N) {
    TorusPoint y = x;
    for (int k = 0; k < N; ++k) y = amalgam_inverse(spec, y);
    for (int k = 0; k < N; ++k) y = apply(spec.g_sys, y);
    return y;
}

TorusPoint leaf_conjugacy_stable_inverse(const AmalgamSpec& spec, const TorusPoint& x, int N) {
    TorusPoint y = x;
    for (int k = 0; k < N; ++k) y = apply_inverse(spec.g_sys, y);
    for (int k = 0; k < N; ++k) y = amalgam(spec, y);
    return y;
}

BaseConjugacy::BaseConjugacy(const Eigen::Matrix2d& A, const SystemSpec& g0, double tol)
    : g0_(g0), A_(A), tol_(tol) {
    if (g0.dim() != 2)
        throw ConfigError("anosov_base_conjugacy: oracle works on 2d base systems");
    ExactSplitting es = exact_splitting_linear(A);
    e_u_ = es.e_u;
    e_s_ = es.e_s;
    lambda_u_ = es.lambda_u; // signed: the component recursions follow the matrix
    lambda_s_ = es.lambda_s;
    Eigen::Matrix2d M;
    M << e_u_[0], e_s_[0], e_u_[1], e_s_[1];
    Eigen::Matrix2d Minv = M.inverse();
    d_u_ = Vec(2);
    d_s_ = Vec(2);
    d_u_ << Minv(0, 0), Minv(0, 1);
    d_s_ << Minv(1, 0), Minv(1, 1);
    double amp = std::max(2.0 * g0.delta, 1e-12);
    depth_ = std::clamp(
        static_cast<int>(std::ceil(std::log(10.0 * amp / tol) / std::log(std::fabs(lambda_u_)))),
        10, 48);
}

Vec BaseConjugacy::displacement(const TorusPoint& x) const {
    const int K = depth_;
    const int n = 2 * K + 1;
    std::vector<TorusPoint> orbit(n); // orbit[K + k] = A^k x, wrapped
    orbit[K] = wrap(x.coords);
    for (int k = 1; k <= K; ++k) {
        Eigen::Vector2d f = A_ * Eigen::Vector2d(orbit[K + k - 1].coords[0],
                                                 orbit[K + k - 1].coords[1]);
        Eigen::Vector2d b = A_.inverse() * Eigen::Vector2d(orbit[K - k + 1].coords[0],
                                                           orbit[K - k + 1].coords[1]);
        Vec vf(2), vb(2);
        vf << f[0], f[1];
        vb << b[0], b[1];
        orbit[K + k] = wrap(vf);
        orbit[K - k] = wrap(vb);
    }

    std::vector<double> wu(n, 0.0), ws(n, 0.0), pu(n, 0.0), ps(n, 0.0);
    for (int sweep = 0; sweep < 80; ++sweep) {
        // perturbation field evaluated at the current h0 along the orbit
        for (int i = 0; i < n; ++i) {
            Vec h = wrap(orbit[i].coords + wu[i] * e_u_ + ws[i] * e_s_).coords;
            Eigen::Vector2d lin = A_ * Eigen::Vector2d(h[0], h[1]);
            Vec p = apply_lift(g0_, h);
            p[0] -= lin[0];
            p[1] -= lin[1];
            pu[i] = p.dot(d_u_);
            ps[i] = p.dot(d_s_);
        }
        double change = 0;
        // unstable component: w_u(x) = (w_u(Ax) - p_u(h0(x))) / lambda_u
        for (int i = n - 1; i >= 0; --i) {
            double ahead = (i + 1 < n) ? wu[i + 1] : 0.0; // truncation past the window
            double next = (ahead - pu[i]) / lambda_u_;
            change = std::max(change, std::fabs(next - wu[i]));
            wu[i] = next;
        }
        // stable component: w_s(Ax) = lambda_s w_s(x) + p_s(h0(x))
        for (int i = 0; i < n; ++i) {
            double next = (i == 0) ? 0.0 : lambda_s_ * ws[i - 1] + ps[i - 1];
            change = std::max(change, std::fabs(next - ws[i]));
            ws[i] = next;
        }
        if (change < 0.1 * tol_) break;
    }
    return wu[K] * e_u_ + ws[K] * e_s_;
}

TorusPoint BaseConjugacy::operator()(const TorusPoint& x) const {
    return wrap(x.coords + displacement(x));
}

BaseConjugacy anosov_base_conjugacy(const Eigen::Matrix2d& A, const SystemSpec& g0, double tol) {
    return BaseConjugacy(A, g0, tol);
}

double conjugacy_residual(const BaseConjugacy& h0, int grid_per_dim) {
    double worst = 0;
    const Eigen::Matrix2d& A = h0.matrix();
    for (int i = 0; i < grid_per_dim; ++i)
        for (int j = 0; j < grid_per_dim; ++j) {
            Vec x(2);
            x << double(i) / grid_per_dim, double(j) / grid_per_dim;
            TorusPoint gh = apply(h0.g0(), h0(TorusPoint(x)));
            Eigen::Vector2d ax = A * Eigen::Vector2d(x[0], x[1]);
            Vec axv(2);
            axv << ax[0], ax[1];
            TorusPoint hA = h0(wrap(axv));
            worst = std::max(worst, torus_dist(gh, hA));
        }
    return worst;
}

void write_conjugacy_csv(const ConjugacyField& field, std::ostream& out) {
    char buf[360];
    out << "p1,p2,p3,h1,h2,h3,tail,resid\n";
    for (size_t i = 0; i < field.inputs.size(); ++i) {
        const Vec& p = field.inputs[i].coords;
        const Vec& h = field.outputs[i].coords;
        double p3 = p.size() > 2 ? p[2] : 0.0;
        double h3 = h.size() > 2 ? h[2] : 0.0;
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                      p[0], p[1], p3, h[0], h[1], h3, field.tail_bound[i],
                      field.equiv_residual[i]);
        out << buf << '\n';
    }
}

CenterConjugacyResult leaf_conjugacy_center(const SystemSpec& f_sys, const SystemSpec& g_sys,
                                            const TorusPoint& p, double r, double tol,
                                            int window) {
    if (p.dim() != 3)
        throw ConfigError("leaf_conjugacy_center: needs a skew-product point");
    LeafPatch circle = center_patch_g(f_sys, g_sys, p, r, tol);
    double zp = p.coords[2];
    Vec b = center_circle_base_at(circle, zp);
    Vec q3(3);
    q3 << b[0], b[1], zp;

    CenterConjugacyResult res;
    res.image = wrap(q3);
    Vec move = b - lift_near(p, b).head(2);
    res.fiber_move = move.norm();
    if (res.fiber_move > r)
        throw SolverError("leaf_conjugacy_center: continued leaf misses the fiber N(p,r)");

    // post-hoc shadowing verification: the f pseudo-orbit x_k pairs the
    // f-label orbit with the fiber heights of the g-orbit of the image.
    // The window amplifies transverse image errors by lambda^(window/2), so
    // the threshold carries that factor on the solver tolerance.
    double dc0 = c0_distance(f_sys, g_sys, 8);
    double lam = std::fabs(exact_splitting_linear(f_sys.matrix).lambda_u);
    double amplified_tol = std::pow(lam, window / 2) * 100.0 * tol;
    double jump_thresh = 4.0 * dc0 + std::max(10 * tol, 1e-10) + amplified_tol;
    double shadow_thresh = 8.0 * dc0 + std::max(10 * tol, 1e-9) + amplified_tol;

    const Eigen::Matrix2d A = f_sys.matrix;
    int half = window / 2;
    std::vector<TorusPoint> g_orbit(2 * half + 1), labels(2 * half + 1);
    g_orbit[half] = res.image;
    labels[half] = wrap(embed_base(Vec(p.coords.head(2)), 2));
    for (int k = 1; k <= half; ++k) {
        g_orbit[half + k] = apply(g_sys, g_orbit[half + k - 1]);
        g_orbit[half - k] = apply_inverse(g_sys, g_orbit[half - k + 1]);
        Eigen::Vector2d f = A * Eigen::Vector2d(labels[half + k - 1].coords[0],
                                                labels[half + k - 1].coords[1]);
        Eigen::Vector2d bb = A.inverse() * Eigen::Vector2d(labels[half - k + 1].coords[0],
                                                           labels[half - k + 1].coords[1]);
        Vec vf(2), vb(2);
        vf << f[0], f[1];
        vb << bb[0], bb[1];
        labels[half + k] = wrap(vf);
        labels[half - k] = wrap(vb);
    }

    auto make_x = [&](int i) {
        Vec x(3);
        x << labels[i].coords[0], labels[i].coords[1], g_orbit[i].coords[2];
        return TorusPoint(x);
    };
    for (int i = 0; i + 1 < 2 * half + 1; ++i) {
        TorusPoint xk = make_x(i), xk1 = make_x(i + 1);
        double jump = torus_dist(apply(f_sys, xk), xk1);
        res.shadow_jump_max = std::max(res.shadow_jump_max, jump);
        double shadow = torus_dist(xk, g_orbit[i]);
        res.shadow_dist_max = std::max(res.shadow_dist_max, shadow);
    }
    if (res.shadow_jump_max > jump_thresh || res.shadow_dist_max > shadow_thresh)
        throw SolverError("leaf_conjugacy_center: shadowing verification failed "
                          "(jump " + std::to_string(res.shadow_jump_max) + ", shadow " +
                          std::to_string(res.shadow_dist_max) + ")");
    return res;
}

TorusPoint leaf_conjugacy_center_slanted(const SystemSpec& f_sys, const SystemSpec& g_sys,
                                         const TorusPoint& p, double r, double tol,
                                         const Vec& slant) {
    LeafPatch circle = center_patch_g(f_sys, g_sys, p, r, tol);
    double zp = p.coords[2];
    double z = zp;
    for (int it = 0; it < 60; ++it) {
        Vec b = center_circle_base_at(circle, z);
        Vec w = b - lift_near(p, b).head(2);
        double zn = wrap01(zp + slant.dot(w));
        double dz = zn - z;
        dz -= std::round(dz);
        z = wrap01(z + dz);
        if (std::fabs(dz) < 1e-13) break;
        if (it == 59)
            throw SolverError("slanted-fiber intersection did not converge");
    }
    Vec b = center_circle_base_at(circle, z);
    Vec q(3);
    q << b[0], b[1], z;
    return wrap(q);
}

TorusPoint suspension_holonomy(const SuspensionLoop& loop, const TorusPoint& p,
                               const TorusPoint& x, int t_steps, double r, double tol) {
    if (t_steps < 16)
        throw ConfigError("suspension_holonomy: t_steps must be at least 16");
    if (p.dim() != 3 || x.dim() != 3)
        throw ConfigError("suspension_holonomy: skew-product points required");
    double zp = p.coords[2];
    if (std::fabs(x.coords[2] - zp) > 1e-9)
        throw ConfigError("suspension_holonomy: x must lie in the fiber disc N(p,r)");
    if (torus_dist(x, p) > 0.75 * r)
        throw ConfigError("suspension_holonomy: x must lie within N(p, r') with r' < r");

    TorusPoint y = x;
    for (int k = 1; k <= t_steps; ++k) {
        double t = double(k) / t_steps;
        SystemSpec gt = suspension_slice(loop, t);
        LeafPatch circle = center_patch_g(loop.f_spec, gt, x, r, tol);
        Vec b = center_circle_base_at(circle, zp);
        Vec q(3);
        q << b[0], b[1], zp;
        TorusPoint ynew = wrap(q);
        if (torus_dist(ynew, p) > r) {
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "suspension continuation exits the tube at t=%.4f", t);
            throw HolonomyUndefined(buf);
        }
        if (torus_dist(ynew, y) > 0.5 * r)
            throw HolonomyUndefined("suspension continuation jumped between branches");
        y = ynew;
    }
    return y;
}

LeafExpansivityReport leaf_expansivity_probe(const SystemSpec& qsys, const TorusPoint& p,
                                             int k_range) {
    if (qsys.kind != SystemKind::QuotientCat)
        throw ConfigError("leaf_expansivity_probe: quotient system required");
    const Eigen::Matrix2d A = qsys.matrix;
    // reject the four special leaves (fixed by the gluing involution)
    const double specials[4][2] = {{0, 0}, {0.5, 0}, {0, 0.5}, {0.5, 0.5}};
    for (auto& s : specials) {
        Vec sp(2);
        sp << s[0], s[1];
        if (quotient_leaf_dist(p, wrap(sp)) < 1e-3)
            throw std::domain_error("leaf_expansivity_probe: p lies on a special leaf");
    }

    // lift p to the centered fundamental domain and solve a v_u - b v_s = -2p
    Vec pl = p.coords;
    pl[0] -= std::round(pl[0]);
    pl[1] -= std::round(pl[1]);
    ExactSplitting es = exact_splitting_linear(A);
    Eigen::Matrix2d M;
    M << es.e_u[0] / es.e_u[0], -es.e_s[0] / es.e_s[0], es.e_u[1] / es.e_u[0],
        -es.e_s[1] / es.e_s[0]; // columns v_u = (1, slope_u), -v_s = -(1, slope_s)
    Eigen::Vector2d ab = M.inverse() * Eigen::Vector2d(-2 * pl[0], -2 * pl[1]);
    Vec vq = pl;
    vq[0] += ab[0] * 1.0;
    vq[1] += ab[0] * (es.e_u[1] / es.e_u[0]);

    LeafExpansivityReport rep;
    rep.q = wrap(vq);
    double sep = (vq - pl).norm();
    Vec vc = pl;
    vc[0] += sep * 0.6;
    vc[1] += sep * 0.8;
    rep.control = wrap(vc);
    rep.initial_dist = quotient_leaf_dist(p, rep.q);

    auto sweep = [&](const TorusPoint& partner, std::vector<double>& out) {
        out.assign(2 * k_range + 1, 0.0);
        TorusPoint pk = wrap(pl), qk = partner;
        out[k_range] = quotient_leaf_dist(pk, qk);
        TorusPoint pf = pk, qf = qk, pb = pk, qb = qk;
        const Eigen::Matrix2d Ai = A.inverse();
        for (int k = 1; k <= k_range; ++k) {
            auto step = [&](const TorusPoint& v, const Eigen::Matrix2d& mat) {
                Eigen::Vector2d w = mat * Eigen::Vector2d(v.coords[0], v.coords[1]);
                Vec vv(2);
                vv << w[0], w[1];
                return wrap(vv);
            };
            pf = step(pf, A);
            qf = step(qf, A);
            pb = step(pb, Ai);
            qb = step(qb, Ai);
            out[k_range + k] = quotient_leaf_dist(pf, qf);
            out[k_range - k] = quotient_leaf_dist(pb, qb);
        }
        double mx = 0;
        for (double d : out) mx = std::max(mx, d);
        return mx;
    };

    rep.max_pair_dist = sweep(rep.q, rep.per_k_pair);
    rep.max_control_dist = sweep(rep.control, rep.per_k_control);
    return rep;
}

} // namespace folia
