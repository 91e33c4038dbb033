#include "folia/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace folia {

uint64_t DetRng::next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double DetRng::uniform01() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

double DetRng::uniform(double a, double b) {
    return a + (b - a) * uniform01();
}

double DetRng::log_uniform(double a, double b) {
    return std::exp(uniform(std::log(a), std::log(b)));
}

std::vector<HolonomySample> sample_pairs(const Map1D& map, const Transversal& tau, int n_pairs,
                                         double scale_min, double scale_max, uint64_t seed) {
    if (!(scale_min > 0 && scale_min < scale_max && scale_max <= tau.radius))
        throw ConfigError("sample_pairs: need 0 < scale_min < scale_max <= radius");
    DetRng rng(seed);
    std::vector<HolonomySample> out;
    out.reserve(n_pairs);
    for (int i = 0; i < n_pairs; ++i) {
        double sep = rng.log_uniform(scale_min, scale_max);
        double x = rng.uniform(-tau.radius, tau.radius - sep);
        double y0, y1;
        try {
            y0 = map(x);
            y1 = map(x + sep);
        } catch (const std::exception& e) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), " [at offsets %.17g, %.17g]", x, x + sep);
            throw SolverError(std::string(e.what()) + buf);
        }
        HolonomySample s;
        s.d_in = sep;
        s.d_out = std::fabs(y1 - y0);
        s.bucket = static_cast<int>(std::floor(std::log2(sep)));
        out.push_back(s);
    }
    return out;
}

namespace {

struct BucketEnvelope {
    double d_in = 0, d_out = 0; // the worst pair of the bucket
};

std::map<int, BucketEnvelope> bucket_envelopes(const std::vector<HolonomySample>& samples) {
    std::map<int, BucketEnvelope> env;
    for (const auto& s : samples) {
        if (s.d_in <= 0) continue;
        auto& e = env[s.bucket];
        if (s.d_out > e.d_out) {
            e.d_out = s.d_out;
            e.d_in = s.d_in;
        }
    }
    // drop buckets whose worst pair still has d_out == 0 (no information)
    for (auto it = env.begin(); it != env.end();)
        it = (it->second.d_out <= 0) ? env.erase(it) : std::next(it);
    return env;
}

void least_squares(const std::vector<double>& xs, const std::vector<double>& ys,
                   double& slope, double& intercept, double& r2) {
    size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    double vx = n * sxx - sx * sx;
    double vy = n * syy - sy * sy;
    slope = (n * sxy - sx * sy) / vx;
    intercept = (sy - slope * sx) / n;
    double cov = n * sxy - sx * sy;
    r2 = (vy > 0) ? (cov * cov) / (vx * vy) : 1.0;
}

} // namespace

HolderFit fit_holder(const std::vector<HolonomySample>& samples) {
    std::vector<double> lx, ly;
    double smin = 1e300, smax = 0;
    for (const auto& s : samples) {
        if (s.d_in <= 0 || s.d_out <= 0) continue;
        lx.push_back(std::log(s.d_in));
        ly.push_back(std::log(s.d_out));
        smin = std::min(smin, s.d_in);
        smax = std::max(smax, s.d_in);
    }
    auto env = bucket_envelopes(samples);
    if (lx.size() < 50 || env.size() < 4)
        throw InsufficientData("fit_holder: need >= 50 valid samples spanning >= 4 dyadic scales (have " +
                               std::to_string(lx.size()) + " samples, " + std::to_string(env.size()) +
                               " buckets)");

    HolderFit fit;
    fit.n_samples = static_cast<int>(lx.size());
    fit.n_buckets = static_cast<int>(env.size());
    fit.scale_min = smin;
    fit.scale_max = smax;

    double slope, intercept, r2;
    least_squares(lx, ly, slope, intercept, r2);
    fit.theta_hat = slope;
    fit.H_hat = std::exp(intercept);
    fit.r_squared = r2;

    std::vector<double> ex, ey;
    for (const auto& [b, e] : env) {
        ex.push_back(std::log(e.d_in));
        ey.push_back(std::log(e.d_out));
    }
    double es, ei, er;
    least_squares(ex, ey, es, ei, er);
    fit.envelope_theta = es;
    return fit;
}

std::vector<double> envelope_local_slopes(const std::vector<HolonomySample>& samples) {
    auto env = bucket_envelopes(samples);
    std::vector<double> slopes;
    const BucketEnvelope* prev = nullptr;
    for (const auto& [b, e] : env) { // ascending bucket = ascending scale
        (void)b;
        if (prev) {
            double dx = std::log(e.d_in) - std::log(prev->d_in);
            double dy = std::log(e.d_out) - std::log(prev->d_out);
            slopes.push_back(dy / dx);
        }
        prev = &e;
    }
    return slopes; // slopes[0] is between the two finest buckets
}

bool non_holder_flag(const std::vector<HolonomySample>& samples, double slope_threshold) {
    auto slopes = envelope_local_slopes(samples);
    if (slopes.size() < 3) return false;
    double finest = slopes.front();
    double coarsest = slopes.back();
    return finest < slope_threshold && finest < 0.5 * coarsest;
}

bool verdict(const HolderFit& fit, const PredictedExponent& predicted, double margin) {
    if (margin <= 0)
        throw ConfigError("verdict: margin must be positive");
    return fit.envelope_theta >= predicted.theta_max - margin;
}

void write_samples_csv(const std::vector<HolonomySample>& samples, std::ostream& out) {
    char buf[128];
    out << "d_in,d_out,bucket\n";
    for (const auto& s : samples) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d", s.d_in, s.d_out, s.bucket);
        out << buf << '\n';
    }
}

void write_fit_csv(const HolderFit& fit, std::ostream& out) {
    char buf[320];
    out << "theta_hat,H_hat,envelope_theta,r_squared,scale_min,scale_max,n_samples,n_buckets\n";
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d",
                  fit.theta_hat, fit.H_hat, fit.envelope_theta, fit.r_squared,
                  fit.scale_min, fit.scale_max, fit.n_samples, fit.n_buckets);
    out << buf << '\n';
}

} // namespace folia
