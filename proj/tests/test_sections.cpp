#include <doctest.h>

#include <cmath>

#include "folia/estimation.hpp"
#include "folia/sections.hpp"

using namespace folia;

namespace {

// independent oracle for the invariant section of the sine-shear example:
// lacunary series sum_{j>=1} 3^{1-j} sin(50 * 9^j * x)
double lacunary_series(double x, int terms = 40) {
    double s = 0;
    for (int j = 1; j <= terms; ++j)
        s += std::pow(3.0, 1 - j) * std::sin(50.0 * std::pow(9.0, j) * x);
    return s;
}

} // namespace

TEST_CASE("graph transform step on closed-form sections") {
    FiberContraction fc = make_sine_shear_example();

    // sigma = 0: sigma'(x) = sin(450 x)
    SampledSection out = graph_transform_step(fc, [](double) { return 0.0; }, 4097);
    for (int i = 0; i < out.size(); i += 37) {
        double x = out.grid_x(i);
        CHECK(out.values[i] == doctest::Approx(std::sin(450.0 * x)).epsilon(1e-13));
    }

    // fixed point of the pure halving rule: zero section maps to itself
    FiberContraction half;
    half.base_lo = -1;
    half.base_hi = 1;
    half.h = [](double x) { return x; };
    half.h_inv = [](double x) { return x; };
    half.v = [](double, double y) { return y / 2.0; };
    half.fiber_lo = -1;
    half.fiber_hi = 1;
    half.fiber_lipschitz = 0.5;
    half.base_conorm = 1.0;
    SampledSection z = graph_transform_step(half, [](double) { return 0.0; }, 101);
    for (double v : z.values) CHECK(v == 0.0);

    // applying the transform to the lacunary oracle reproduces it; the residual
    // floor ~5e-7 comes from sin() phase roundoff in the deep terms (9^j x
    // carries j ulps of phase error), identical in both evaluation orders
    SampledSection img = graph_transform_step(fc, [](double x) { return lacunary_series(x); }, 4097);
    double worst = 0;
    for (int i = 0; i < img.size(); ++i)
        worst = std::max(worst, std::fabs(img.values[i] - lacunary_series(img.grid_x(i))));
    CHECK(worst < 1e-6);

    // sampled-section overload refuses to leave the base domain
    SampledSection flat;
    flat.lo = -1;
    flat.hi = 1;
    flat.values.assign(64, 0.0);
    CHECK_THROWS_AS(graph_transform_step(fc, flat), std::domain_error);
    CHECK_NOTHROW(graph_transform_step(half, flat));
}

TEST_CASE("invariant section of the sine-shear example matches the lacunary oracle") {
    FiberContraction fc = make_sine_shear_example();
    validate_fiber_contraction(fc, 0.4);

    InvariantSectionResult res =
        solve_invariant_section(fc, [](double) { return 0.0; }, 1e-8, 60, 1 << 12);

    double worst = 0;
    for (int i = 0; i < res.section.size(); ++i)
        worst = std::max(worst, std::fabs(res.section.values[i] - lacunary_series(res.section.grid_x(i))));
    CHECK(worst < 2e-6); // deep-term phase roundoff floor, far below the 1e-3 contract

    // s(pi/100) = 1.5: every term sin(9^j * pi/2) = 1
    double sval = invariant_section_value(fc, [](double) { return 0.0; }, M_PI / 100.0, 30);
    CHECK(std::fabs(sval - 1.5) < 1e-6);

    // residual contract: sup|F_#(sigma) - sigma| <= tol (1+k)/(1-k)
    CHECK(res.residual <= 1e-8 * (1 + 1.0 / 3) / (1 - 1.0 / 3));
}

TEST_CASE("contraction ratio approaches the fiber Lipschitz constant") {
    FiberContraction fc = make_sine_shear_example();
    InvariantSectionResult res =
        solve_invariant_section(fc, [](double) { return 0.0; }, 1e-10, 60, 4096);
    REQUIRE(res.log.ratio.size() >= 8);
    for (size_t i = 5; i < res.log.ratio.size(); ++i)
        CHECK(std::fabs(res.log.ratio[i] - 1.0 / 3.0) < 0.05 / 3.0);
}

TEST_CASE("pure fiber halving converges from any start in log2(1/tol) steps") {
    FiberContraction half;
    half.base_lo = 0;
    half.base_hi = 1;
    half.h = [](double x) { return x; };
    half.h_inv = [](double x) { return x; };
    half.v = [](double, double y) { return y / 2.0; };
    half.fiber_lo = -1;
    half.fiber_hi = 1;
    half.fiber_lipschitz = 0.5;
    half.base_conorm = 1.0;

    double tol = 1e-9;
    InvariantSectionResult res = solve_invariant_section(
        half, [](double x) { return std::cos(3 * x); }, tol, 60, 257);
    CHECK(res.iterations <= int(std::ceil(std::log2(1.0 / tol))) + 1);
    for (double v : res.section.values) CHECK(std::fabs(v) < 2 * tol);
}

TEST_CASE("graph transform contracts section pairs by the fiber constant") {
    FiberContraction fc = make_sine_shear_example();
    DetRng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), w = rng.uniform(1, 9);
        SectionFn s1 = [a, w](double x) { return a * std::sin(w * x); };
        SectionFn s2 = [b, w](double x) { return b * std::cos(w * x); };
        SampledSection t1 = graph_transform_step(fc, s1, 2048);
        SampledSection t2 = graph_transform_step(fc, s2, 2048);
        double d_before = 0, d_after = t1.sup_diff(t2);
        for (int i = 0; i < t1.size(); ++i) {
            double x = fc.h_inv(t1.grid_x(i)); // the preimages the transform used
            d_before = std::max(d_before, std::fabs(s1(x) - s2(x)));
        }
        CHECK(d_after <= fc.fiber_lipschitz * d_before + 1e-12);
    }
}

TEST_CASE("uniqueness: distinct starting sections land together") {
    FiberContraction fc = make_sine_shear_example();
    double tol = 1e-9;
    auto r1 = solve_invariant_section(fc, [](double) { return 1.7; }, tol, 60, 1024);
    auto r2 = solve_invariant_section(fc, [](double x) { return -std::cos(5 * x); }, tol, 60, 1024);
    CHECK(r1.section.sup_diff(r2.section) < 2 * tol);
}

TEST_CASE("holder budget formula") {
    FiberContraction fc = make_sine_shear_example();
    fc.fiber_lo = -2;
    fc.fiber_hi = 2; // D = 4, delta = 2
    HolderBudget b = holder_budget(fc, 0.4, 0.0);
    // frozen: max{0, 4/2^0.4, 1/(9^-0.4 - 1/3)} computed independently
    CHECK(b.H == doctest::Approx(12.208474865614998).epsilon(1e-12));

    // at the domination boundary the budget blows up
    CHECK_THROWS_AS(holder_budget(fc, 0.5, 0.0), SolverError);
    double h49 = holder_budget(fc, 0.49, 0.0).H;
    double h499 = holder_budget(fc, 0.499, 0.0).H;
    CHECK(h499 > h49);
    CHECK(h499 > 1e2);

    // shear-free rule with k = 0 stays finite for every theta
    FiberContraction plain = fc;
    plain.fiber_lipschitz = 0.0;
    for (double th : {0.2, 0.5, 0.9, 1.0}) {
        HolderBudget pb = holder_budget(plain, th, 0.7);
        double expect = std::max({0.7, 4.0 / std::pow(2.0, th), std::pow(9.0, th)});
        CHECK(pb.H == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("budget case split: distant pairs are bounded by D/delta^theta alone") {
    FiberContraction fc = make_sine_shear_example();
    double theta = 0.4;
    double d_over = fc.diameter() / std::pow(fc.covering_delta(), theta);
    SectionFn s = [](double x) { return lacunary_series(x); };
    DetRng rng(5);
    for (int i = 0; i < 2000; ++i) {
        double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
        if (std::fabs(x - y) <= fc.covering_delta() * 0.5) continue; // want d > delta-scale pairs
        double num = std::fabs(s(x) - s(y));
        CHECK(num <= d_over * std::pow(std::fabs(x - y), theta) + 1e-12);
    }
}
