#include "folia/foliations.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "folia/bunching.hpp"
#include "folia/estimation.hpp"

namespace folia {

namespace {

double wrap01(double z) {
    double w = z - std::floor(z);
    return w >= 1.0 ? 0.0 : w;
}

// Catmull-Rom weights; the z-profiles are smooth trig polynomials, so cubic
// interpolation keeps the periodic direction from dominating the error budget
void catmull_rom(double f, double w[4]) {
    w[0] = 0.5 * (-f + 2 * f * f - f * f * f);
    w[1] = 0.5 * (2 - 5 * f * f + 3 * f * f * f);
    w[2] = 0.5 * (f + 4 * f * f - 3 * f * f * f);
    w[3] = 0.5 * (-f * f + f * f * f);
}

// uniform-arclength resample of a polyline around a distinguished sample
struct Resampled {
    std::vector<Vec> pts;
    int base_index;
};

// cubic evaluation of a polyline at fractional index (clamped at the ends)
Vec polyline_eval(const std::vector<Vec>& pts, double idx) {
    const int n = static_cast<int>(pts.size());
    int i = std::clamp(static_cast<int>(std::floor(idx)), 0, n - 2);
    double f = idx - i;
    double w[4];
    catmull_rom(f, w);
    Vec out = Vec::Zero(pts[0].size());
    for (int s = 0; s < 4; ++s) {
        int j = std::clamp(i + s - 1, 0, n - 1);
        out += w[s] * pts[j];
    }
    return out;
}

Resampled resample_centered(const std::vector<Vec>& pts, int center_idx, double r, int m) {
    const int n = static_cast<int>(pts.size());
    std::vector<double> arc(n, 0.0);
    for (int i = 1; i < n; ++i) arc[i] = arc[i - 1] + (pts[i] - pts[i - 1]).norm();
    double c = arc[center_idx];
    if (c < r || arc[n - 1] - c < r)
        throw SolverError("leaf resample: polyline too short for the requested radius");
    Resampled out;
    out.pts.resize(m);
    out.base_index = (m - 1) / 2;
    int seg = 0;
    for (int j = 0; j < m; ++j) {
        double target = c - r + 2.0 * r * j / (m - 1);
        while (seg < n - 2 && arc[seg + 1] < target) ++seg;
        double denom = arc[seg + 1] - arc[seg];
        double f = denom > 0 ? (target - arc[seg]) / denom : 0.0;
        out.pts[j] = polyline_eval(pts, seg + f);
    }
    return out;
}

std::vector<double> cumulative_arclength(const std::vector<Vec>& pts, int base_index) {
    const int n = static_cast<int>(pts.size());
    std::vector<double> arc(n, 0.0);
    for (int i = 1; i < n; ++i) arc[i] = arc[i - 1] + (pts[i] - pts[i - 1]).norm();
    double c = arc[base_index];
    for (double& a : arc) a -= c;
    return arc;
}

std::vector<Vec> polyline_tangents(const std::vector<Vec>& pts) {
    const int n = static_cast<int>(pts.size());
    std::vector<Vec> tan(n);
    for (int i = 0; i < n; ++i) {
        int a = std::max(0, i - 1), b = std::min(n - 1, i + 1);
        tan[i] = (pts[b] - pts[a]).normalized();
    }
    return tan;
}

Vec embed_base(const Vec& v2, int dim) {
    Vec out = Vec::Zero(dim);
    out[0] = v2[0];
    out[1] = v2[1];
    return out;
}

// dual basis of a 2d frame (e1, e2): <ei, dual_j> = delta_ij
void dual_frame(const Vec& e1, const Vec& e2, Vec& d1, Vec& d2) {
    Eigen::Matrix2d M;
    M << e1[0], e2[0], e1[1], e2[1];
    Eigen::Matrix2d Minv = M.inverse();
    d1 = Vec(2);
    d2 = Vec(2);
    d1 << Minv(0, 0), Minv(0, 1);
    d2 << Minv(1, 0), Minv(1, 1);
}

} // namespace

Vec LeafPatch::point_at(double s) const {
    const int n = static_cast<int>(samples.size());
    if (closed) {
        // closed circles: arclength stores the fiber coordinate z in [0,1],
        // the last sample repeating the first one period up; interpolate the
        // base trace periodically with cubic accuracy
        int nz = n - 1;
        double v = wrap01(s) * nz;
        int j = static_cast<int>(std::floor(v)) % nz;
        double f = v - std::floor(v);
        double cw[4];
        catmull_rom(f, cw);
        Vec out = Vec::Zero(samples[0].size());
        for (int t = 0; t < 4; ++t) {
            int jj = (j + t - 1 + nz) % nz;
            out += cw[t] * samples[jj];
        }
        out[out.size() - 1] = wrap01(s); // the fiber coordinate itself is exact
        return out;
    }
    if (s < arclength.front() - 1e-12 || s > arclength.back() + 1e-12)
        throw std::out_of_range("leaf patch evaluation outside radius");
    auto it = std::upper_bound(arclength.begin(), arclength.end(), s);
    int i = std::clamp(static_cast<int>(it - arclength.begin()) - 1, 0, n - 2);
    double denom = arclength[i + 1] - arclength[i];
    double f = denom > 0 ? (s - arclength[i]) / denom : 0.0;
    return samples[i] * (1.0 - f) + samples[i + 1] * f;
}

double LeafPatch::distance_to(const Vec& x) const {
    double best = 1e300;
    for (size_t i = 0; i + 1 < samples.size(); ++i) {
        Vec a = samples[i], b = samples[i + 1];
        Vec ab = b - a;
        double len2 = ab.squaredNorm();
        double t = len2 > 0 ? std::clamp((x - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (a + t * ab - x).norm());
    }
    return best;
}

Vec LeafPatch::intersect_level(const Vec& dual, const Vec& anchor, double level) const {
    const int n = static_cast<int>(samples.size());
    std::vector<double> psi(n);
    for (int i = 0; i < n; ++i) psi[i] = (samples[i] - anchor).dot(dual) - level;
    int found = -1;
    Vec hit;
    for (int i = 0; i + 1 < n; ++i) {
        if (psi[i] == 0.0 || psi[i] * psi[i + 1] < 0) {
            double f = psi[i] / (psi[i] - psi[i + 1]);
            Vec cand = samples[i] * (1.0 - f) + samples[i + 1] * f;
            if (found >= 0 && (cand - hit).norm() > 1e-9)
                throw SolverError("leaf patch crosses the level set more than once "
                                  "(branches not separated at this radius)");
            if (found < 0) {
                found = i;
                hit = cand;
            }
        }
    }
    if (found < 0)
        throw SolverError("leaf patch does not reach the level set within its radius");
    return hit;
}

LeafPatch strong_manifold(const SystemSpec& sys, const TorusPoint& p, LeafSide side,
                          double r, double tol) {
    if (side != LeafSide::U && side != LeafSide::S)
        throw ConfigError("strong_manifold: side must be u or s");
    if (r <= 0 || tol <= 0)
        throw ConfigError("strong_manifold: r and tol must be positive");
    const int d = sys.dim();
    ExactSplitting es = exact_splitting_linear(sys.matrix);
    Vec dir = embed_base(side == LeafSide::U ? es.e_u : es.e_s, d);

    LeafPatch patch;
    patch.side = side;
    patch.base = wrap(p.coords);
    patch.radius = r;

    const bool exact_line = (sys.kind == SystemKind::LinearAnosov ||
                             sys.kind == SystemKind::QuotientCat ||
                             (sys.delta == 0 && sys.eps == 0));
    const int m = (r > 0.1) ? 257 : 129;

    if (exact_line) {
        patch.samples.resize(m);
        patch.arclength.resize(m);
        patch.base_index = (m - 1) / 2;
        for (int j = 0; j < m; ++j) {
            double t = -r + 2.0 * r * j / (m - 1);
            patch.samples[j] = patch.base.coords + t * dir;
            patch.arclength[j] = t;
        }
        patch.tangents = polyline_tangents(patch.samples);
        patch.residual = 0;
        return patch;
    }

    // orbit to seed from: backward for u, forward for s
    double amp = std::max(sys.delta + sys.eps, 1e-3);
    int n_iter = std::clamp(
        static_cast<int>(std::ceil(std::log(0.1 * tol / amp) / std::log(0.4))), 10, 60);
    std::vector<TorusPoint> orbit(n_iter + 1);
    orbit[0] = patch.base;
    for (int k = 1; k <= n_iter; ++k)
        orbit[k] = (side == LeafSide::U) ? apply_inverse(sys, orbit[k - 1])
                                         : apply(sys, orbit[k - 1]);

    // seed segment in the linear eigenframe at the far end, radius padded so
    // the first image still covers [-r, r]
    double pad = 1.3;
    std::vector<Vec> cur(m);
    int base_idx = (m - 1) / 2;
    for (int j = 0; j < m; ++j) {
        double t = (-r + 2.0 * r * j / (m - 1)) * pad;
        cur[j] = orbit[n_iter].coords + t * dir;
    }

    Vec seed_prev;
    for (int k = n_iter; k >= 1; --k) {
        std::vector<Vec> img(m);
        bool have_seed = false;
        for (int j = 0; j < m; ++j) {
            if (side == LeafSide::U) {
                img[j] = apply_lift(sys, cur[j]);
            } else {
                img[j] = have_seed ? apply_inverse_lift_seeded(sys, cur[j], seed_prev)
                                   : apply_inverse_lift(sys, cur[j]);
                seed_prev = img[j];
                have_seed = true;
            }
        }
        Resampled rs = resample_centered(img, base_idx, k == 1 ? r : r * pad, m);
        cur = std::move(rs.pts);
        base_idx = rs.base_index;
        // re-anchor the lift each step: coordinates would otherwise grow like
        // lambda^k and eat the mantissa
        Vec origin = cur[base_idx];
        for (int i = 0; i < d; ++i) origin[i] = std::floor(origin[i]);
        for (Vec& w : cur) w -= origin;
    }

    // pin the polyline to the canonical lift of the base point
    Vec shift = patch.base.coords - cur[base_idx];
    for (Vec& w : cur) w += shift;

    patch.samples = std::move(cur);
    patch.base_index = base_idx;
    patch.arclength = cumulative_arclength(patch.samples, base_idx);
    patch.tangents = polyline_tangents(patch.samples);
    patch.residual = amp * std::pow(0.4, n_iter); // analytic tail estimate
    return patch;
}

FoliationModel make_strong_model(const SystemSpec& sys, LeafSide side,
                                 double plaque_radius, double tol) {
    FoliationModel model;
    model.sys = sys;
    model.side = side;
    model.plaque_radius = plaque_radius;
    model.tol = tol;
    model.generator = [sys, side, plaque_radius, tol](const TorusPoint& q) {
        return strong_manifold(sys, q, side, plaque_radius, tol);
    };
    if (sys.kind == SystemKind::LinearAnosov || sys.kind == SystemKind::QuotientCat ||
        (sys.delta == 0 && sys.eps == 0)) {
        // leaves are level sets of the opposite eigen-covector
        ExactSplitting es = exact_splitting_linear(sys.matrix);
        Vec du, ds;
        dual_frame(es.e_u, es.e_s, du, ds);
        model.dual = embed_base(side == LeafSide::U ? ds : du, sys.dim());
    }
    return model;
}

double strong_invariance_residual(const SystemSpec& sys, const TorusPoint& p, LeafSide side,
                                  double r, double tol) {
    LeafPatch p1 = strong_manifold(sys, p, side, r, tol);
    TorusPoint q = (side == LeafSide::U) ? apply(sys, p) : apply_inverse(sys, p);
    LeafPatch p2 = strong_manifold(sys, q, side, r, tol);

    auto step = [&](const Vec& x) {
        return (side == LeafSide::U) ? apply_lift(sys, x) : apply_inverse_lift(sys, x);
    };
    // align the image of p's base sample with p2's lift frame
    Vec img_base = step(p1.samples[p1.base_index]);
    Vec shift = p2.base.coords - img_base;
    for (int i = 0; i < 2; ++i)
        if (std::fabs(shift[i] - std::round(shift[i])) > 1e-6)
            throw SolverError("strong_invariance_residual: lift misalignment");
    shift = shift.array().round();

    double worst = 0;
    for (size_t j = 0; j < p1.samples.size(); ++j) {
        if (std::fabs(p1.arclength[j]) > 0.3 * r) continue; // image must stay inside p2
        Vec y = step(p1.samples[j]) + shift;
        worst = std::max(worst, p2.distance_to(y));
    }
    return worst;
}

namespace {

// graph values over (t, z) with bilinear interpolation; z periodic
struct SurfaceGrid {
    double r = 0;
    int nt = 0, nz = 1;
    std::vector<double> w;

    double& at(int i, int j) { return w[j * nt + i]; }
    double at(int i, int j) const { return w[j * nt + i]; }

    double value(double t, double z) const {
        double u = (t + r) / (2 * r) * (nt - 1);
        if (u < -0.5 || u > nt - 0.5)
            throw SolverError("center surface: pullback left the t-range");
        u = std::clamp(u, 0.0, double(nt - 1));
        int i = std::clamp(static_cast<int>(std::floor(u)), 0, nt - 2);
        double fu = u - i;
        if (nz == 1) return w[i] * (1 - fu) + w[i + 1] * fu;
        double v = wrap01(z) * nz;
        int j = static_cast<int>(std::floor(v)) % nz;
        double fv = v - std::floor(v);
        double cw[4];
        catmull_rom(fv, cw);
        double a = 0, b = 0;
        for (int s = 0; s < 4; ++s) {
            int jj = (j + s - 1 + nz) % nz;
            a += cw[s] * at(i, jj);
            b += cw[s] * at(i + 1, jj);
        }
        return a * (1 - fu) + b * fu;
    }
};

struct CenterFrame {
    Vec eu, es, du, ds; // 2d frame and its dual
    double lambda_u = 0, lambda_s = 0;
};

CenterFrame center_frame(const SystemSpec& sys) {
    ExactSplitting es = exact_splitting_linear(sys.matrix);
    CenterFrame fr;
    fr.eu = es.e_u;
    fr.es = es.e_s;
    fr.lambda_u = es.lambda_u; // signed: Newton slopes follow the matrix
    fr.lambda_s = es.lambda_s;
    dual_frame(fr.eu, fr.es, fr.du, fr.ds);
    return fr;
}

// one graph-transform family over the product leaf.  cs surfaces (stable) are
// solved implicitly with forward g-evaluations along the forward label orbit;
// cu surfaces are built by forward shooting from the backward orbit, so
// neither side needs map inversions.
SurfaceGrid solve_center_surface(const SystemSpec& f, const SystemSpec& g,
                                 const TorusPoint& beta, bool stable, double r,
                                 int n_steps, int nt, int nz, const CenterFrame& fr) {
    (void)f; // the label dynamics is the shared matrix
    const Eigen::Matrix2d A = g.matrix;
    const Eigen::Matrix2d Ainv = A.inverse();

    std::vector<TorusPoint> labels(n_steps + 1);
    labels[0] = beta;
    for (int k = 1; k <= n_steps; ++k) {
        Eigen::Vector2d b(labels[k - 1].coords[0], labels[k - 1].coords[1]);
        Eigen::Vector2d nb = stable ? Eigen::Vector2d(A * b) : Eigen::Vector2d(Ainv * b);
        Vec v(2);
        v << nb[0], nb[1];
        labels[k] = wrap(v);
    }

    SurfaceGrid W;
    W.r = r;
    W.nt = nt;
    W.nz = nz;
    W.w.assign(size_t(nt) * nz, 0.0);

    Vec x(3);
    for (int k = n_steps; k >= 1; --k) {
        SurfaceGrid Wnew = W;
        if (stable) {
            // surface known at labels[k] (one step forward); solve the
            // implicit pullback at labels[k-1]
            const Vec& from = labels[k - 1].coords;
            Eigen::Vector2d nb = A * Eigen::Vector2d(from[0], from[1]);
            Vec ref(2);
            ref << nb[0], nb[1];
            for (int j = 0; j < nz; ++j) {
                double z = double(j) / nz;
                double w = 0;
                for (int i = 0; i < nt; ++i) {
                    double t = -r + 2.0 * r * i / (nt - 1);
                    if (i > 0) w = Wnew.at(i - 1, j);
                    for (int it = 0; it < 40; ++it) {
                        x.head(2) = from.head(2) + t * fr.es + w * fr.eu;
                        x[2] = z;
                        Vec y = apply_lift(g, x);
                        double tbar = (y.head(2) - ref).dot(fr.ds);
                        double wbar = (y.head(2) - ref).dot(fr.du);
                        double F = wbar - W.value(tbar, y[2]);
                        if (std::fabs(F) < 1e-13) break;
                        w -= F / fr.lambda_u;
                        if (std::fabs(w) > 4 * r)
                            throw CoherenceError("center surface solve diverged "
                                                 "(perturbation too large for the tube)");
                        if (it == 39)
                            throw CoherenceError("center surface inner solve did not converge");
                    }
                    Wnew.at(i, j) = w;
                }
            }
        } else {
            // surface known at labels[k] (one step backward); its forward
            // g-image is the surface at labels[k-1]: shoot (t', z') so the
            // image lands on the requested grid node
            const Vec& src = labels[k].coords;
            Eigen::Vector2d nb = A * Eigen::Vector2d(src[0], src[1]);
            Vec ref(2);
            ref << nb[0], nb[1]; // lift of labels[k-1] the images cluster around
            for (int j = 0; j < nz; ++j) {
                double z = double(j) / nz;
                double tp = (-r) / fr.lambda_u, zp = z;
                for (int i = 0; i < nt; ++i) {
                    double t = -r + 2.0 * r * i / (nt - 1);
                    double w_out = 0;
                    for (int it = 0; it < 60; ++it) {
                        x.head(2) = src.head(2) + tp * fr.eu + W.value(tp, zp) * fr.es;
                        x[2] = zp;
                        Vec y = apply_lift(g, x);
                        double tbar = (y.head(2) - ref).dot(fr.du);
                        double zbar = y[2];
                        w_out = (y.head(2) - ref).dot(fr.ds);
                        double Ft = tbar - t;
                        double dz = zbar - z;
                        dz -= std::round(dz); // fiber is periodic
                        if (std::fabs(Ft) < 1e-13 && (nz == 1 || std::fabs(dz) < 1e-13)) break;
                        tp -= Ft / fr.lambda_u;
                        if (nz > 1) zp = wrap01(zp - dz);
                        if (std::fabs(tp) > 1.5 * r)
                            throw CoherenceError("center surface shooting left the tube "
                                                 "(perturbation too large)");
                        if (it == 59)
                            throw CoherenceError("center surface shooting did not converge");
                    }
                    Wnew.at(i, j) = w_out;
                }
            }
        }
        W = std::move(Wnew);
    }
    return W;
}

} // namespace

LeafPatch center_patch_g(const SystemSpec& f_sys, const SystemSpec& g_sys,
                         const TorusPoint& leaf_base, double r, double tol) {
    if (f_sys.dim() != 3 || g_sys.dim() != 3)
        throw ConfigError("center_patch_g: skew-product systems required");
    if (f_sys.base_depends_on_z() || f_sys.delta != 0)
        throw ConfigError("center_patch_g: the reference system must have a z-independent base");
    if ((f_sys.matrix - g_sys.matrix).cwiseAbs().maxCoeff() > 0)
        throw ConfigError("center_patch_g: systems must share the base matrix");

    CenterFrame fr = center_frame(g_sys);
    Vec beta2(2);
    beta2 << leaf_base.coords[0], leaf_base.coords[1];
    TorusPoint beta = wrap(beta2);

    // tube-entry condition: the continuation moves points at most ~2 d_C0/(1-nu)
    double dc0 = c0_distance(f_sys, g_sys, 8);
    if (dc0 >= 0.5 * r)
        throw ConfigError("center_patch_g: d_C0(f,g) must be below r/2");

    // tilted (z-coupled) solves need finer grids: downstream shadowing checks
    // amplify image errors by lambda^(window/2)
    bool zdep = g_sys.base_depends_on_z();
    int nz = zdep ? ((tol <= 1e-9) ? 96 : 32) : 1;
    int nt = (tol <= 1e-9) ? (zdep ? 321 : 161) : 97;
    double amp0 = std::max(2.0 * dc0 + 1e-6, 1e-6);
    int n_steps = std::clamp(
        static_cast<int>(std::ceil(std::log(0.1 * tol / amp0) / std::log(std::fabs(fr.lambda_s)))),
        12, 45);

    SurfaceGrid Wcs = solve_center_surface(f_sys, g_sys, beta, true, r, n_steps, nt, nz, fr);
    SurfaceGrid Wcu = solve_center_surface(f_sys, g_sys, beta, false, r, n_steps, nt, nz, fr);

    const int nz_out = zdep ? 128 : 64;
    LeafPatch circle;
    circle.side = LeafSide::C;
    circle.base = wrap(leaf_base.coords);
    circle.radius = r;
    circle.closed = true;
    circle.samples.resize(nz_out + 1);
    circle.arclength.resize(nz_out + 1);
    for (int j = 0; j <= nz_out; ++j) {
        double z = double(j % nz_out) / nz_out;
        double t = 0, s = 0;
        for (int it = 0; it < 60; ++it) {
            double tn = Wcs.value(s, z);
            double sn = Wcu.value(tn, z);
            double move = std::fabs(tn - t) + std::fabs(sn - s);
            t = tn;
            s = sn;
            if (move < 1e-14) break;
            if (it == 59)
                throw CoherenceError("center patch: cu/cs intersection did not converge");
        }
        if (std::fabs(t) > r || std::fabs(s) > r)
            throw CoherenceError("center patch: intersection left the tube");
        Vec pt(3);
        pt.head(2) = beta.coords.head(2) + t * fr.eu + s * fr.es;
        pt[2] = double(j) / nz_out; // closing sample repeats z=0 at z=1
        circle.samples[j] = pt;
        circle.arclength[j] = double(j) / nz_out;
    }
    circle.base_index = 0;
    circle.tangents = polyline_tangents(circle.samples);
    circle.residual = amp0 * std::pow(std::fabs(fr.lambda_s), n_steps);
    return circle;
}

Vec center_circle_base_at(const LeafPatch& circle, double z) {
    if (!circle.closed)
        throw std::domain_error("center_circle_base_at: patch is not a closed circle");
    Vec p = circle.point_at(wrap01(z));
    return p.head(2);
}

double leaf_tilt(const LeafPatch& circle) {
    double worst = 0;
    for (const Vec& a : circle.samples)
        worst = std::max(worst, (a.head(2) - circle.samples[0].head(2)).norm());
    return worst;
}

double center_invariance_residual(const SystemSpec& f_sys, const SystemSpec& g_sys,
                                  const TorusPoint& leaf_base, double r, double tol) {
    LeafPatch c1 = center_patch_g(f_sys, g_sys, leaf_base, r, tol);
    TorusPoint image_base = apply(f_sys, leaf_base);
    LeafPatch c2 = center_patch_g(f_sys, g_sys, image_base, r, tol);

    double worst = 0;
    for (size_t j = 0; j + 1 < c1.samples.size(); ++j) {
        Vec y = apply_lift(g_sys, c1.samples[j]);
        Vec target = center_circle_base_at(c2, y[2]);
        Vec dy = y.head(2) - target;
        dy[0] -= std::round(dy[0]);
        dy[1] -= std::round(dy[1]);
        worst = std::max(worst, dy.norm());
    }
    return worst;
}

namespace {

Vec perp2(const Vec& v) {
    Vec w(2);
    w << -v[1], v[0];
    return w;
}

// crossings of a polyline with the line {a + s d}: returns offsets s and points
struct LineHit {
    Vec point;
    double offset;
    int segment;
};

std::vector<LineHit> polyline_line_hits(const std::vector<Vec>& pts, const Vec& a, const Vec& d,
                                        double max_offset) {
    Vec n = perp2(d);
    std::vector<LineHit> hits;
    double prev = (pts[0] - a).dot(n);
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double next = (pts[i + 1] - a).dot(n);
        if (prev == 0.0 || prev * next < 0) {
            // bracket on the segment, then refine on the cubic through the
            // neighbouring samples (the linear crossing leaves h^2 curvature
            // bias that accumulates over long lifts)
            double lo = 0, hi = 1;
            double flo = prev;
            for (int it = 0; it < 50; ++it) {
                double mid = 0.5 * (lo + hi);
                double fm = (polyline_eval(pts, double(i) + mid) - a).dot(n);
                if (fm == 0.0) { lo = hi = mid; break; }
                if ((fm > 0) == (flo > 0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            Vec hit = polyline_eval(pts, double(i) + 0.5 * (lo + hi));
            double off = (hit - a).dot(d);
            if (std::fabs(off) <= max_offset) hits.push_back({hit, off, static_cast<int>(i)});
        }
        prev = next;
    }
    return hits;
}

} // namespace

TorusPoint holonomy_map(const FoliationModel& model, const Transversal& tau_from,
                        const Transversal& tau_to, const std::vector<TorusPoint>& path,
                        const TorusPoint& x) {
    if (model.sys.dim() != 2)
        throw ConfigError("holonomy_map: polyline lifting is for 2-dimensional systems");
    if (path.empty())
        throw ConfigError("holonomy_map: path must contain at least one node");
    if (torus_dist(x, path.front()) > tau_from.radius + 1e-12)
        throw ConfigError("holonomy_map: x is not within the source transversal radius");

    // refine the path in a continuous lift, spacing <= plaque_radius / 2
    double step = model.plaque_radius / 2;
    std::vector<Vec> nodes;
    nodes.push_back(path.front().coords);
    for (size_t i = 1; i < path.size(); ++i) {
        Vec prev = nodes.back();
        Vec next = lift_near(path[i], prev);
        double seg = (next - prev).norm();
        if (seg > 0.45)
            throw ConfigError("holonomy_map: path nodes too far apart to lift continuously");
        int pieces = std::max(1, static_cast<int>(std::ceil(seg / step)));
        for (int k = 1; k <= pieces; ++k)
            nodes.push_back(prev + (next - prev) * (double(k) / pieces));
    }

    Vec y = lift_near(x, nodes.front());
    if (nodes.size() == 1) {
        // empty path: identity
        return wrap(y);
    }

    double tube = std::max({tau_from.radius, tau_to.radius, model.plaque_radius});
    const Vec offset0 = y - nodes.front();
    for (size_t k = 1; k < nodes.size(); ++k) {
        bool last = (k + 1 == nodes.size());
        // the lift must track the translated path
        if ((y - (nodes[k - 1] + offset0)).norm() > tube + 1e-12) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "holonomy lift exited the tubular neighborhood at (%.6f, %.6f)",
                          wrap(y).coords[0], wrap(y).coords[1]);
            throw HolonomyUndefined(buf);
        }
        LeafPatch plaque = model.generator(wrap(y));
        // the plaque lift frame is anchored at wrap(y); shift onto y's lift
        Vec shift = y - plaque.base.coords;
        shift[0] = std::round(shift[0]);
        shift[1] = std::round(shift[1]);
        std::vector<Vec> pts = plaque.samples;
        for (Vec& w : pts) w += shift;

        // transverse fiber: through the running point advanced by the path
        // increment, so it always meets the plaque; the last fiber is tau_to
        Vec fiber_dir;
        if (last) {
            fiber_dir = tau_to.direction;
        } else {
            Vec t = plaque.tangents[plaque.base_index];
            fiber_dir = perp2(t);
        }
        Vec anchor = last ? lift_near(tau_to.base, y) : Vec(y + (nodes[k] - nodes[k - 1]));
        double reach = last ? tau_to.radius : tube;
        auto hits = polyline_line_hits(pts, anchor, fiber_dir, reach);
        if (hits.empty()) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "holonomy lift lost the fiber at (%.6f, %.6f)",
                          wrap(Vec(anchor)).coords[0], wrap(Vec(anchor)).coords[1]);
            throw HolonomyUndefined(buf);
        }
        // continuity picks the crossing nearest the running point
        const LineHit* best = &hits[0];
        for (const auto& h : hits)
            if ((h.point - y).norm() < (best->point - y).norm()) best = &h;
        for (const auto& h : hits)
            if (&h != best && (h.point - best->point).norm() > 1e-7 &&
                std::fabs(h.offset) <= reach && std::fabs(best->offset) <= reach &&
                (h.point - y).norm() < 2 * model.plaque_radius &&
                (best->point - y).norm() < 2 * model.plaque_radius)
                throw HolonomyUndefined("multiple leaf branches cross the fiber "
                                        "(radius too large for branch separation)");
        y = best->point;
    }
    return wrap(y);
}

double holonomy_offset(const FoliationModel& model, const Transversal& tau_from,
                       const Transversal& tau_to, const std::vector<TorusPoint>& path,
                       double s_in) {
    TorusPoint x = transversal_point(tau_from, s_in);
    TorusPoint out = holonomy_map(model, tau_from, tau_to, path, x);
    Vec rel = lift_near(out, tau_to.base.coords) - tau_to.base.coords;
    return rel.dot(tau_to.direction);
}

std::vector<TorusPoint> straight_leaf_path(const SystemSpec& sys, const TorusPoint& from,
                                           const Vec& leaf_dir, double length, int n_nodes) {
    (void)sys;
    std::vector<TorusPoint> path;
    path.reserve(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        double t = length * i / (n_nodes - 1);
        path.push_back(wrap(from.coords + t * leaf_dir));
    }
    return path;
}

namespace {

struct PolyHit {
    Vec point;
    double arc_a = 0, arc_b = 0;
    Vec tan_a, tan_b;
    bool ok = false;
};

PolyHit intersect_polylines(const LeafPatch& A, const LeafPatch& B) {
    PolyHit out;
    for (size_t i = 0; i + 1 < A.samples.size(); ++i) {
        const Vec &a0 = A.samples[i], &a1 = A.samples[i + 1];
        double alo = std::min(a0[0], a1[0]), ahi = std::max(a0[0], a1[0]);
        double blo = std::min(a0[1], a1[1]), bhi = std::max(a0[1], a1[1]);
        for (size_t j = 0; j + 1 < B.samples.size(); ++j) {
            const Vec &b0 = B.samples[j], &b1 = B.samples[j + 1];
            if (std::max(b0[0], b1[0]) < alo - 1e-12 || std::min(b0[0], b1[0]) > ahi + 1e-12 ||
                std::max(b0[1], b1[1]) < blo - 1e-12 || std::min(b0[1], b1[1]) > bhi + 1e-12)
                continue;
            Eigen::Matrix2d M;
            M << (a1 - a0)[0], -(b1 - b0)[0], (a1 - a0)[1], -(b1 - b0)[1];
            double det = M.determinant();
            if (std::fabs(det) < 1e-14) continue;
            Eigen::Vector2d rhs((b0 - a0)[0], (b0 - a0)[1]);
            Eigen::Vector2d ts = M.inverse() * rhs;
            if (ts[0] < -1e-12 || ts[0] > 1 + 1e-12 || ts[1] < -1e-12 || ts[1] > 1 + 1e-12)
                continue;
            out.point = a0 + ts[0] * (a1 - a0);
            out.arc_a = A.arclength[i] + ts[0] * (A.arclength[i + 1] - A.arclength[i]);
            out.arc_b = B.arclength[j] + ts[1] * (B.arclength[j + 1] - B.arclength[j]);
            out.tan_a = (a1 - a0).normalized();
            out.tan_b = (b1 - b0).normalized();
            out.ok = true;
            return out;
        }
    }
    return out;
}

} // namespace

double triangle_constant(const FoliationModel& model_F, const FoliationModel& model_G,
                         const TransversalDisc& tau, int n_pairs, uint64_t seed) {
    if (n_pairs < 4)
        throw ConfigError("triangle_constant: need at least 4 sampled pairs");
    DetRng rng(seed);
    double rho = tau.radius;
    if (model_F.plaque_radius < 3 * rho || model_G.plaque_radius < 3 * rho)
        throw ConfigError("triangle_constant: slice plaque radius must cover 3x the disc");

    auto gen = [&](const FoliationModel& m, const TorusPoint& q) {
        return m.generator(q);
    };

    double D = 1.0;
    int accepted = 0;
    int attempts = 0;
    while (accepted < n_pairs && attempts < 20 * n_pairs) {
        ++attempts;
        // structured samples first: pairs aligned with each slice direction
        Vec dp(2), dq(2);
        if (accepted < n_pairs / 10) {
            LeafPatch Fp = gen(model_F, tau.center);
            double s = rho * (0.2 + 0.6 * rng.uniform01());
            Vec q = Fp.point_at(accepted % 2 == 0 ? s : -s);
            dp = Vec::Zero(2);
            dq = q - Fp.samples[Fp.base_index];
        } else {
            double a1 = rng.uniform(-rho, rho), a2 = rng.uniform(-rho, rho);
            double b1 = rng.uniform(-rho, rho), b2 = rng.uniform(-rho, rho);
            dp << a1, a2;
            dq << b1, b2;
            if (dp.norm() > rho || dq.norm() > rho || (dp - dq).norm() < 1e-6) continue;
        }
        TorusPoint p = wrap(tau.center.coords + dp);
        TorusPoint q = wrap(tau.center.coords + dq);

        LeafPatch Fp = gen(model_F, p);
        LeafPatch Gq = gen(model_G, q);
        // put both patches in the lift frame of the disc center
        Vec sf = (tau.center.coords + dp) - Fp.base.coords;
        sf[0] = std::round(sf[0]);
        sf[1] = std::round(sf[1]);
        for (Vec& w : Fp.samples) w += sf;
        Vec sg = (tau.center.coords + dq) - Gq.base.coords;
        sg[0] = std::round(sg[0]);
        sg[1] = std::round(sg[1]);
        for (Vec& w : Gq.samples) w += sg;

        PolyHit hit = intersect_polylines(Fp, Gq);
        if (!hit.ok) continue;
        double ang = std::acos(std::clamp(std::fabs(hit.tan_a.dot(hit.tan_b)), 0.0, 1.0));
        if (ang < 1e-3)
            throw TransversalityError("triangle_constant: slice foliations nearly tangent");

        double d_F = std::fabs(hit.arc_a);
        double d_G = std::fabs(hit.arc_b);
        double d_tau = (dp - dq).norm();
        if (d_tau < 1e-12) continue;
        D = std::max(D, std::max(d_F, d_G) / d_tau);
        if (d_F + d_G > 1e-12) D = std::max(D, d_tau / (d_F + d_G));
        ++accepted;
    }
    if (accepted < n_pairs)
        throw SolverError("triangle_constant: could not realize enough transversal triples");
    return D;
}

void write_leaf_csv(const LeafPatch& patch, std::ostream& out) {
    char buf[256];
    int d = static_cast<int>(patch.samples.empty() ? 0 : patch.samples[0].size());
    out << (d == 3 ? "arclength,x1,x2,x3\n" : "arclength,x1,x2\n");
    for (size_t i = 0; i < patch.samples.size(); ++i) {
        int len = std::snprintf(buf, sizeof(buf), "%.17g", patch.arclength[i]);
        for (int j = 0; j < d; ++j)
            len += std::snprintf(buf + len, sizeof(buf) - len, ",%.17g", patch.samples[i][j]);
        out << buf << '\n';
    }
}

} // namespace folia
