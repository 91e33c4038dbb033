#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "folia/bunching.hpp"
#include "folia/phasespace.hpp"

namespace folia {

struct HolonomySample {
    double d_in = 0;
    double d_out = 0;
    int bucket = 0; // dyadic index: floor(log2 d_in)
};

struct HolderFit {
    double theta_hat = 0;      // least-squares slope of log d_out vs log d_in
    double H_hat = 0;          // exp(intercept)
    double envelope_theta = 0; // slope fitted through per-bucket worst pairs
    double r_squared = 0;
    double scale_min = 0, scale_max = 0;
    int n_samples = 0;
    int n_buckets = 0;
};

// Deterministic uniform doubles from a fixed 64-bit generator (keeps sample
// lists byte-identical across platforms).
class DetRng {
public:
    explicit DetRng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
    uint64_t next_u64();
    double uniform01();                    // in [0,1)
    double uniform(double a, double b);
    double log_uniform(double a, double b); // log-uniform on [a,b], a>0

private:
    uint64_t state_;
};

// A map expressed in transversal offset coordinates.
using Map1D = std::function<double(double)>;

// Pairs with log-uniform separations across dyadic buckets; the first point
// is uniform on the admissible part of the transversal.  Deterministic given
// the seed.  Map evaluation failures are rethrown with the sample coordinates.
std::vector<HolonomySample> sample_pairs(const Map1D& map, const Transversal& tau, int n_pairs,
                                         double scale_min, double scale_max, uint64_t seed);

// Requires >= 50 valid samples spanning >= 4 dyadic buckets, else
// InsufficientData.
HolderFit fit_holder(const std::vector<HolonomySample>& samples);

// Local slope between consecutive per-bucket envelope points, finest scale
// first.  Used by the non-Holder galleries.
std::vector<double> envelope_local_slopes(const std::vector<HolonomySample>& samples);

// "no Holder exponent certified at finest scale": local slope decays toward 0
// at the finest buckets.
bool non_holder_flag(const std::vector<HolonomySample>& samples, double slope_threshold = 0.2);

// pass iff envelope_theta >= predicted.theta_max - margin
bool verdict(const HolderFit& fit, const PredictedExponent& predicted, double margin);

void write_samples_csv(const std::vector<HolonomySample>& samples, std::ostream& out);
void write_fit_csv(const HolderFit& fit, std::ostream& out);

} // namespace folia
