#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "folia/estimation.hpp"
#include "folia/lab.hpp"

namespace folia {

namespace {

// increasing homeomorphism of [0,1] with modulus 1/log(e/y) at 0: continuous,
// but slower than every power law
double log_modulus(double y) {
    if (y <= 0) return 0;
    if (y >= 1) return 1;
    return 1.0 / (1.0 - std::log(y));
}

// Strip foliation of R x [0,1]: the leaf through (0, y) is the graph
// x -> (1 - x) y + x Phi(y), interpolating the identity at x=0 into the
// logarithmic-modulus homeomorphism at x=1.  Leaves are smooth and disjoint;
// the vertical holonomy from x=0 to x=s has modulus dominated by s (Phi - id).
double strip_leaf(double x, double y) {
    return (1.0 - x) * y + x * log_modulus(y);
}

// leaf label through the point (x, h): invert strip_leaf in y by bisection
double strip_label(double x, double h) {
    double lo = 0, hi = 1;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (strip_leaf(x, mid) < h ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// The conjugacy of the strip foliation expressed in the slanted fiber family
// l_s(t) = (x0 + s t, y0 + t): the composition of the vertical translation
// with the foliation holonomy from the fiber at (0,0) to the fiber at (s,0).
// In fiber coordinates it maps t to t' with (s + s t', t') on the leaf of
// (s t, t).
double slanted_conjugacy_t(double s, double t) {
    if (t == 0) return 0;
    double label = strip_label(s * t, t);
    double lo = 0, hi = 1;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (strip_leaf(s + s * mid, label) > mid ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<HolonomySample> anchored_samples(const std::function<double(double)>& map,
                                             double smin, double smax, int n, uint64_t seed) {
    DetRng rng(seed);
    std::vector<HolonomySample> out;
    out.reserve(n);
    double m0 = map(0.0);
    for (int i = 0; i < n; ++i) {
        double d = rng.log_uniform(smin, smax);
        HolonomySample s;
        s.d_in = d;
        s.d_out = std::fabs(map(d) - m0);
        s.bucket = static_cast<int>(std::floor(std::log2(d)));
        out.push_back(s);
    }
    return out;
}

std::string slopes_csv(const std::vector<HolonomySample>& samples, const std::string& tag) {
    auto slopes = envelope_local_slopes(samples);
    std::ostringstream os;
    os << "map,slope_index,local_slope\n";
    char buf[128];
    for (size_t i = 0; i < slopes.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g", tag.c_str(), i, slopes[i]);
        os << buf << '\n';
    }
    return os.str();
}

void gallery_slanted(const ExperimentConfig& cfg, std::map<std::string, std::string>& artifacts) {
    // vertical fibers: the conjugacy is the translation, exponent 1
    auto vertical = [](double t) { return slanted_conjugacy_t(0.0, t); };
    auto v_samples = anchored_samples(vertical, 1e-7, 1e-2, std::max(cfg.n_pairs, 200), cfg.seed);
    HolderFit v_fit = fit_holder(v_samples);

    // slanted fibers: the same conjugacy composed with the non-Holder holonomy
    auto slanted = [](double t) { return slanted_conjugacy_t(0.5, t); };
    auto s_samples = anchored_samples(slanted, 1e-7, 1e-2, std::max(cfg.n_pairs, 200),
                                      cfg.seed + 1);
    auto slopes = envelope_local_slopes(s_samples);
    bool collapsed = non_holder_flag(s_samples);

    std::ostringstream os;
    write_samples_csv(v_samples, os);
    artifacts["gallery_vertical_samples.csv"] = os.str();
    std::ostringstream os2;
    write_samples_csv(s_samples, os2);
    artifacts["gallery_slanted_samples.csv"] = os2.str();
    artifacts["gallery_slopes.csv"] = slopes_csv(s_samples, "slanted");

    std::ostringstream vs;
    char buf[240];
    vs << "map,theta_hat,finest_local_slope,non_holder_flag,verdict\n";
    std::snprintf(buf, sizeof(buf), "vertical,%.17g,%.17g,0,%s", v_fit.theta_hat,
                  envelope_local_slopes(v_samples).front(),
                  v_fit.theta_hat > 0.95 ? "pass" : "fail");
    vs << buf << '\n';
    std::snprintf(buf, sizeof(buf), "slanted,nan,%.17g,%d,%s", slopes.front(),
                  collapsed ? 1 : 0, collapsed ? "pass" : "fail");
    vs << buf << '\n';
    artifacts["gallery_verdicts.csv"] = vs.str();
}

void gallery_good_bad(const ExperimentConfig& cfg, std::map<std::string, std::string>& artifacts) {
    // cube foliations on the 3-torus: the F-traces in each transversal face
    // follow z(x) = (1-x) z + x phi(z) with the non-Holder return map phi,
    // while the G-leaves are vertical tori; the intersection leaves are the
    // circles x * S^1 * z, so their holonomy is lifted with constant (x, z)
    auto phi = [](double z) { return log_modulus(z); };

    // intersection holonomy: the circle leaf through (x, y, z) is parametrized
    // by y at constant (x, z), so lifting any y-path returns the input height
    auto intersection_hol = [&](double z) { return z; };
    auto i_samples = anchored_samples(intersection_hol, 1e-7, 1e-2,
                                      std::max(cfg.n_pairs, 200), cfg.seed);
    HolderFit i_fit = fit_holder(i_samples);

    // the constituent F-slice map (the return map of the traces)
    auto f_samples = anchored_samples(phi, 1e-12, 1e-2, std::max(cfg.n_pairs, 300), cfg.seed + 1);
    bool f_bad = non_holder_flag(f_samples);

    std::ostringstream os;
    write_samples_csv(i_samples, os);
    artifacts["gallery_intersection_samples.csv"] = os.str();
    std::ostringstream os2;
    write_samples_csv(f_samples, os2);
    artifacts["gallery_slice_samples.csv"] = os2.str();
    artifacts["gallery_slopes.csv"] = slopes_csv(f_samples, "slice");

    std::ostringstream vs;
    char buf[240];
    vs << "map,theta_hat,finest_local_slope,non_holder_flag,verdict\n";
    std::snprintf(buf, sizeof(buf), "intersection,%.17g,%.17g,0,%s", i_fit.theta_hat,
                  envelope_local_slopes(i_samples).front(),
                  i_fit.theta_hat >= 0.99 ? "pass" : "fail");
    vs << buf << '\n';
    std::snprintf(buf, sizeof(buf), "slice,nan,%.17g,%d,%s",
                  envelope_local_slopes(f_samples).front(), f_bad ? 1 : 0,
                  f_bad ? "pass" : "fail");
    vs << buf << '\n';
    artifacts["gallery_verdicts.csv"] = vs.str();
}

} // namespace

void run_gallery(const ExperimentConfig& cfg, std::map<std::string, std::string>& artifacts) {
    if (cfg.gallery == "slanted-conjugacy") gallery_slanted(cfg, artifacts);
    else if (cfg.gallery == "good-bad-intersection") gallery_good_bad(cfg, artifacts);
    else throw ConfigError("experiment.gallery: unknown name '" + cfg.gallery + "'");
}

} // namespace folia
